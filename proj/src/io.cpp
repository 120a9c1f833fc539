#include "micpdag/io.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace micpdag::io {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void fail(const std::string& name, std::size_t line, const std::string& what) {
  throw ParseError(name + ":" + std::to_string(line) + ": " + what);
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

bool parse_size(const std::string& tok, std::size_t& out) {
  const char* b = tok.data();
  const char* e = tok.data() + tok.size();
  auto [p, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && p == e;
}

bool parse_double(const std::string& tok, double& out) {
  const std::string t = trim(tok);
  if (t.empty()) return false;
  std::size_t used = 0;
  try {
    out = std::stod(t, &used);
  } catch (const std::exception&) {
    return false;
  }
  return used == t.size();
}

}  // namespace

EdgeSet read_edge_list(std::istream& in, const std::string& name) {
  std::string line;
  std::size_t lineno = 0;
  std::optional<EdgeSet> edges;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    std::istringstream ss(t);
    std::vector<std::string> tok;
    for (std::string w; ss >> w;) tok.push_back(w);
    if (!edges) {
      std::size_t m = 0;
      if (tok.size() != 1 || !parse_size(tok[0], m) || m == 0) fail(name, lineno, "expected node count m >= 1");
      edges.emplace(m);
      continue;
    }
    std::size_t a = 0;
    std::size_t b = 0;
    if (tok.size() != 2 || !parse_size(tok[0], a) || !parse_size(tok[1], b))
      fail(name, lineno, "expected \"from to\" pair of node indices");
    try {
      edges->insert(a, b);
    } catch (const GraphError& err) {
      fail(name, lineno, err.what());
    }
  }
  if (!edges) fail(name, lineno, "missing node count line");
  return *edges;
}

EdgeSet read_edge_list(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_edge_list(in, path.string());
}

Dag read_dag(const std::filesystem::path& path) {
  const EdgeSet e = read_edge_list(path);
  try {
    return Dag(e.m(), e.to_vector());
  } catch (const GraphError& err) {
    throw ParseError(path.string() + ": " + err.what());
  }
}

void write_edge_list(std::ostream& out, const EdgeSet& edges) {
  out << edges.m() << '\n';
  for (const Edge& e : edges.pairs()) out << e.from << ' ' << e.to << '\n';
}

void write_edge_list(const std::filesystem::path& path, const EdgeSet& edges) {
  auto out = open_out(path);
  write_edge_list(out, edges);
  if (!out) throw IoError("failed writing " + path.string());
}

void write_dag(const std::filesystem::path& path, const Dag& dag) { write_edge_list(path, dag.as_edge_set()); }

Dataset read_dataset(std::istream& in, const std::string& name) {
  std::string line;
  std::size_t lineno = 0;
  std::vector<double> values;
  std::size_t m = 0;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::size_t cols = 0;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) {
      double v = 0.0;
      if (!parse_double(cell, v)) fail(name, lineno, "cannot parse \"" + trim(cell) + "\" as a number");
      if (!std::isfinite(v)) fail(name, lineno, "non-finite value");
      values.push_back(v);
      ++cols;
    }
    if (m == 0) m = cols;
    if (cols != m) fail(name, lineno, "expected " + std::to_string(m) + " columns, found " + std::to_string(cols));
    ++n;
  }
  if (n == 0) fail(name, lineno, "dataset is empty");
  Matrix x(n, m);
  x.values() = std::move(values);
  return Dataset(std::move(x));
}

Dataset read_dataset(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_dataset(in, path.string());
}

void write_dataset(std::ostream& out, const Dataset& data) {
  out << std::setprecision(17);
  for (std::size_t i = 0; i < data.n(); ++i) {
    for (std::size_t j = 0; j < data.m(); ++j) {
      if (j) out << ',';
      out << data.x()(i, j);
    }
    out << '\n';
  }
}

void write_dataset(const std::filesystem::path& path, const Dataset& data) {
  auto out = open_out(path);
  write_dataset(out, data);
  if (!out) throw IoError("failed writing " + path.string());
}

nlohmann::json to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) rows.push_back(std::vector<double>(m.row(i).begin(), m.row(i).end()));
  return rows;
}

Matrix matrix_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.empty()) throw ParseError("matrix must be a non-empty array of rows");
  const std::size_t rows = j.size();
  const std::size_t cols = j[0].size();
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    if (!j[i].is_array() || j[i].size() != cols) throw ParseError("matrix rows must have equal length");
    for (std::size_t k = 0; k < cols; ++k) m(i, k) = j[i][k].get<double>();
  }
  return m;
}

nlohmann::json to_json(const SemParameters& p) { return {{"m", p.m()}, {"B", to_json(p.b)}, {"omega", p.omega}}; }

SemParameters sem_from_json(const nlohmann::json& j) {
  try {
    SemParameters p{matrix_from_json(j.at("B")), j.at("omega").get<Vector>()};
    p.validate();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("SEM parameters: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ParseError(e.what());
  }
}

nlohmann::json edges_to_json(const std::vector<Edge>& edges) {
  nlohmann::json a = nlohmann::json::array();
  for (const Edge& e : edges) a.push_back({e.from, e.to});
  return a;
}

nlohmann::json read_json(const std::filesystem::path& path) {
  auto in = open_in(path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

void write_text(const std::filesystem::path& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace micpdag::io
