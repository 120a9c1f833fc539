#include "micpdag/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <spdlog/spdlog.h>

#include "micpdag/io.hpp"

namespace micpdag::pipeline {

GenerateConfig GenerateConfig::preset(const std::string& name, std::size_t m, double rho) {
  GenerateConfig cfg;
  cfg.m = m;
  cfg.edges = m;
  if (name == "benchmark") return cfg;
  if (name == "rho-sweep") {
    if (!(rho > 0.0) || !(rho <= 4.0)) throw std::invalid_argument("rho-sweep preset: rho must lie in (0, 4]");
    cfg.variances = Interval{4.0 - rho, 4.0 + rho};
    cfg.n = 100;
    return cfg;
  }
  throw std::invalid_argument("unknown preset '" + name + "' (benchmark|rho-sweep)");
}

void GenerateConfig::validate() const {
  if (n == 0) throw std::invalid_argument("generate: n must be >= 1");
  if (!graph_file) {
    if (m == 0) throw std::invalid_argument("generate: m must be >= 1");
    if (edges > m * (m - 1) / 2) throw std::invalid_argument("generate: too many edges for m");
  }
}

Instance generate(const GenerateConfig& cfg) {
  cfg.validate();
  Instance inst;
  inst.truth = cfg.graph_file ? io::read_dag(*cfg.graph_file) : random_dag(cfg.m, cfg.edges, cfg.seed);
  inst.sem = random_sem(inst.truth, cfg.weights, cfg.variances, cfg.seed);
  inst.data = generate_data(inst.sem, cfg.n, cfg.noise, cfg.seed);
  return inst;
}

void write_instance(const std::filesystem::path& dir, const Instance& inst) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw io::IoError("cannot create directory " + dir.string() + ": " + ec.message());
  io::write_dataset(dir / "data.csv", inst.data);
  io::write_dag(dir / "truth.txt", inst.truth);
  io::write_json(dir / "sem.json", io::to_json(inst.sem));
}

SuperstructureSource parse_superstructure_source(const std::string& name) {
  if (name == "estimate") return SuperstructureSource::estimate;
  if (name == "file") return SuperstructureSource::file;
  if (name == "true-moral") return SuperstructureSource::true_moral;
  throw std::invalid_argument("unknown superstructure source '" + name + "' (estimate|file|true-moral)");
}

double GapSpec::target(double lambda_sq, std::size_t m) const {
  const double t = gap_target(mode, lambda_sq, m, tau, c);
  return times_m ? static_cast<double>(m) * t : t;
}

std::string GapSpec::label() const {
  std::string base;
  switch (mode) {
    case GapMode::exact: base = "exact"; break;
    case GapMode::theorem1: base = "theorem1"; break;
    case GapMode::theorem2: base = "theorem2"; break;
    case GapMode::custom: {
      std::ostringstream s;
      s << "tau=" << tau;
      base = s.str();
      break;
    }
  }
  return times_m ? "m*" + base : base;
}

GapSpec GapSpec::parse(const std::string& token) {
  GapSpec g;
  std::string t = token;
  if (t.starts_with("m*")) {
    g.times_m = true;
    t = t.substr(2);
  }
  if (t.starts_with("tau=")) {
    g.mode = GapMode::custom;
    try {
      std::size_t used = 0;
      g.tau = std::stod(t.substr(4), &used);
      if (used != t.size() - 4) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw std::invalid_argument("bad gap value in '" + token + "'");
    }
    if (!(g.tau >= 0.0)) throw std::invalid_argument("gap value must be >= 0 in '" + token + "'");
    return g;
  }
  g.mode = parse_gap_mode(t);
  if (g.mode == GapMode::custom) throw std::invalid_argument("custom gap needs a value: tau=<v>");
  return g;
}

EdgeSet superstructure_for(const Dataset& data, const FitConfig& cfg) {
  switch (cfg.source) {
    case SuperstructureSource::estimate:
      return estimate_superstructure(data, cfg.glasso ? *cfg.glasso : GlassoConfig::defaults_for(data.m(), data.n()));
    case SuperstructureSource::file: {
      if (!cfg.superstructure_file) throw std::invalid_argument("superstructure source 'file' needs a file");
      EdgeSet e = io::read_edge_list(*cfg.superstructure_file);
      if (e.m() != data.m())
        throw std::invalid_argument("superstructure file has m = " + std::to_string(e.m()) + ", data has " +
                                    std::to_string(data.m()));
      return e;
    }
    case SuperstructureSource::true_moral:
      if (!cfg.truth) throw std::invalid_argument("superstructure source 'true-moral' needs the true DAG");
      if (cfg.truth->m() != data.m()) throw std::invalid_argument("true DAG and data differ in m");
      return moral_graph(*cfg.truth);
  }
  throw std::logic_error("unreachable superstructure source");
}

FitResult fit(const Dataset& raw, const FitConfig& cfg) {
  const Dataset data = cfg.standardize ? raw.standardized() : raw;
  const std::size_t m = data.m();
  FitResult res;
  res.superstructure = superstructure_for(data, cfg);
  const SymmetricMatrix s = sample_covariance(data);

  auto solve_at = [&](double lambda_sq) {
    SolveConfig sc = cfg.solve;
    sc.gap_target = cfg.gap.target(lambda_sq, m);
    const MicpProblem p = build_problem(s, res.superstructure, lambda_sq);
    SolveReport r = branch_and_bound(p, sc);
    return std::pair{std::move(r), to_json(r, p)};
  };

  if (cfg.lambda_sq) {
    auto [r, j] = solve_at(*cfg.lambda_sq);
    res.lambda_sq = *cfg.lambda_sq;
    res.grid.push_back(r);
    res.report = std::move(r);
    res.report_json = std::move(j);
    return res;
  }

  std::map<int, std::pair<SolveReport, nlohmann::json>> by_c;
  std::size_t next = 0;
  const LambdaSelection sel = select_lambda(
      data,
      [&](double lambda_sq) {
        const int c = cfg.c_grid.at(next++);
        auto fitted = solve_at(lambda_sq);
        GammaMatrix g = fitted.first.incumbent;
        by_c.emplace(c, std::move(fitted));
        return g;
      },
      cfg.c_grid);
  for (int c : cfg.c_grid)
    if (auto it = by_c.find(c); it != by_c.end()) res.grid.push_back(it->second.first);
  res.lambda_sq = sel.lambda_sq;
  res.c = sel.c;
  res.bic_by_c = sel.bic_by_c;
  res.report = by_c.at(sel.c).first;
  res.report_json = by_c.at(sel.c).second;
  return res;
}

nlohmann::json to_json(const FitResult& r) {
  nlohmann::json j = r.report_json;
  j["c"] = r.c;
  nlohmann::json bic = nlohmann::json::array();
  for (const auto& [c, v] : r.bic_by_c) bic.push_back({{"c", c}, {"bic", v}});
  j["bic_by_c"] = bic;
  j["superstructure"] = io::edges_to_json(r.superstructure.to_vector());
  return j;
}

EvalRecord evaluate(const Dag& truth, const Dag& estimate) {
  if (truth.m() != estimate.m())
    throw DimensionMismatch("evaluate: truth has m = " + std::to_string(truth.m()) + ", estimate " +
                            std::to_string(estimate.m()));
  EvalRecord r;
  r.d_cpdag = d_cpdag(dag_to_cpdag(truth), dag_to_cpdag(estimate));
  r.true_edges = truth.edge_count();
  r.scaled_d_cpdag = scaled_d_cpdag(r.d_cpdag, r.true_edges);
  r.skeleton = skeleton_metrics(truth, estimate);
  return r;
}

nlohmann::json to_json(const EvalRecord& r) {
  return {{"d_cpdag", r.d_cpdag},
          {"scaled_d_cpdag", r.scaled_d_cpdag},
          {"shd_skeleton", r.skeleton.shd},
          {"tpr", r.skeleton.tpr},
          {"fpr", r.skeleton.fpr},
          {"true_edges", r.true_edges}};
}

MeanSd mean_sd(const std::vector<double>& values) {
  MeanSd out;
  if (values.empty()) return out;
  for (double v : values) out.mean += v;
  out.mean /= static_cast<double>(values.size());
  if (values.size() < 2) return out;
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  return out;
}

std::string format_mean_sd(const std::vector<double>& values) {
  const MeanSd ms = mean_sd(values);
  char buf[64];
  if (std::round(ms.sd * 10.0) == 0.0)
    std::snprintf(buf, sizeof buf, "%.1f±0", ms.mean);
  else
    std::snprintf(buf, sizeof buf, "%.1f±%.1f", ms.mean, ms.sd);
  return buf;
}

// ---- suite parsing ------------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(v);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <class T>
T parse_number(const std::string& text, const std::string& where) {
  try {
    std::size_t used = 0;
    T v;
    if constexpr (std::is_floating_point_v<T>) {
      v = static_cast<T>(std::stod(text, &used));
    } else {
      if (text.starts_with("-")) throw std::invalid_argument("negative");
      v = static_cast<T>(std::stoull(text, &used));
    }
    if (used != text.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw io::ParseError(where + ": bad number '" + text + "'");
  }
}

}  // namespace

SuiteConfig SuiteConfig::parse(const std::string& text, const std::string& name) {
  SuiteConfig s;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = name + ":" + std::to_string(lineno);
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw io::ParseError(where + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "name") {
        s.name = value;
      } else if (key == "preset") {
        GenerateConfig::preset(value, 2);  // validates the name
        s.preset = value;
      } else if (key == "m") {
        s.m.clear();
        for (const auto& t : split_list(value)) s.m.push_back(parse_number<std::size_t>(t, where));
      } else if (key == "rho") {
        s.rho.clear();
        for (const auto& t : split_list(value)) s.rho.push_back(parse_number<double>(t, where));
      } else if (key == "n") {
        s.n = parse_number<std::size_t>(value, where);
      } else if (key == "edges") {
        s.edges = parse_number<std::size_t>(value, where);
      } else if (key == "seeds") {
        s.seeds.clear();
        for (const auto& t : split_list(value)) {
          if (auto dash = t.find('-'); dash != std::string::npos && dash > 0) {
            const auto a = parse_number<std::uint64_t>(trim(t.substr(0, dash)), where);
            const auto b = parse_number<std::uint64_t>(trim(t.substr(dash + 1)), where);
            if (b < a) throw io::ParseError(where + ": empty seed range '" + t + "'");
            for (std::uint64_t v = a; v <= b; ++v) s.seeds.push_back(v);
          } else {
            s.seeds.push_back(parse_number<std::uint64_t>(t, where));
          }
        }
      } else if (key == "gaps") {
        s.gaps.clear();
        for (const auto& t : split_list(value)) s.gaps.push_back(GapSpec::parse(t));
      } else if (key == "superstructure") {
        s.source = parse_superstructure_source(value);
        if (s.source == SuperstructureSource::file)
          throw std::invalid_argument("suites take 'estimate' or 'true-moral' superstructures");
      } else if (key == "lambda") {
        if (value == "bic")
          s.lambda_sq.reset();
        else
          s.lambda_sq = parse_number<double>(value, where);
      } else if (key == "time_limit") {
        s.time_limit_secs = parse_number<double>(value, where);
      } else if (key == "jobs") {
        s.jobs = static_cast<int>(parse_number<std::size_t>(value, where));
        if (s.jobs < 1) throw std::invalid_argument("jobs must be >= 1");
      } else if (key == "graph_file") {
        s.graph_file = value;
      } else {
        throw io::ParseError(where + ": unknown key '" + key + "'");
      }
    } catch (const io::ParseError&) {
      throw;
    } catch (const std::exception& e) {
      throw io::ParseError(where + ": " + e.what());
    }
  }
  if (s.m.empty() || s.rho.empty() || s.seeds.empty() || s.gaps.empty())
    throw io::ParseError(name + ": m, rho, seeds and gaps must be non-empty");
  return s;
}

SuiteConfig SuiteConfig::read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io::IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.string());
}

// ---- suite runner -------------------------------------------------------------

namespace {

std::string run_key(std::size_t m, double rho, std::uint64_t seed, const std::string& gap) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "m%03zu_rho%04.2f_seed%06llu_", m, rho, static_cast<unsigned long long>(seed));
  std::string key = buf + gap;
  for (char& ch : key)
    if (ch == '*') ch = 'x';
  return key;
}

struct Job {
  std::size_t m;
  double rho;
  std::uint64_t seed;
  GapSpec gap;
};

RunRow run_one(const SuiteConfig& suite, const SolveConfig& base, const Job& job) {
  RunRow row;
  row.m = job.m;
  row.rho = job.rho;
  row.seed = job.seed;
  row.gap = job.gap.label();
  row.key = run_key(job.m, job.rho, job.seed, row.gap);
  try {
    GenerateConfig g = GenerateConfig::preset(suite.preset, job.m, job.rho);
    g.seed = job.seed;
    if (suite.n) g.n = *suite.n;
    if (suite.edges) g.edges = *suite.edges;
    g.graph_file = suite.graph_file;
    const Instance inst = generate(g);

    FitConfig fc;
    fc.source = suite.source;
    fc.truth = inst.truth;
    fc.lambda_sq = suite.lambda_sq;
    fc.gap = job.gap;
    fc.solve = base;
    if (suite.time_limit_secs > 0.0) fc.solve.time_limit_secs = suite.time_limit_secs;
    const FitResult fr = fit(inst.data, fc);

    row.lambda_sq = fr.lambda_sq;
    row.gap_target = job.gap.target(fr.lambda_sq, inst.truth.m());
    row.status = to_string(fr.report.status);
    row.upper_bound = fr.report.upper_bound;
    row.lower_bound = fr.report.lower_bound;
    row.gap_value = fr.report.gap;
    row.rgap = fr.report.rgap;
    row.nodes = fr.report.nodes_explored;
    row.wall_secs = fr.report.wall_secs;
    row.eval = evaluate(inst.truth, fr.dag());
    row.events_csv = events_csv(fr.report);
  } catch (const std::exception& e) {
    row.error = e.what();
    spdlog::error("run {} failed: {}", row.key, e.what());
  }
  return row;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

}  // namespace

SuiteResult run_suite(const SuiteConfig& suite, const SolveConfig& base) {
  std::vector<Job> jobs;
  for (std::size_t m : suite.m)
    for (double rho : suite.rho)
      for (std::uint64_t seed : suite.seeds)
        for (const GapSpec& gap : suite.gaps) jobs.push_back({m, rho, seed, gap});

  SuiteResult res;
  res.rows.resize(jobs.size());
  const int threads = base.deterministic ? 1 : suite.jobs;
  SolveConfig solve = base;
  if (threads > 1) solve.worker_count = 1;
  const auto count = static_cast<std::ptrdiff_t>(jobs.size());
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (std::ptrdiff_t i = 0; i < count; ++i) res.rows[i] = run_one(suite, solve, jobs[i]);
  std::sort(res.rows.begin(), res.rows.end(), [](const RunRow& a, const RunRow& b) { return a.key < b.key; });
  return res;
}

std::string SuiteResult::runs_csv() const {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "key,m,rho,seed,gap,lambda_sq,gap_target,status,upper_bound,lower_bound,gap_value,rgap,nodes,wall_secs,"
         "d_cpdag,scaled_d_cpdag,shd_skeleton,tpr,fpr,error\n";
  for (const RunRow& r : rows) {
    out << r.key << ',' << r.m << ',' << r.rho << ',' << r.seed << ',' << csv_field(r.gap) << ',';
    if (r.error.empty()) {
      out << r.lambda_sq << ',' << r.gap_target << ',' << r.status << ',' << r.upper_bound << ',' << r.lower_bound
          << ',' << r.gap_value << ',' << r.rgap << ',' << r.nodes << ',' << r.wall_secs << ',' << r.eval.d_cpdag << ','
          << r.eval.scaled_d_cpdag << ',' << r.eval.skeleton.shd << ',' << r.eval.skeleton.tpr << ','
          << r.eval.skeleton.fpr << ",\n";
    } else {
      out << ",,Error,,,,,,,,,,,," << csv_field(r.error) << '\n';
    }
  }
  return out.str();
}

std::string SuiteResult::aggregate_csv() const {
  struct Group {
    std::vector<double> wall, rgap, d, scaled;
    std::size_t runs = 0, failed = 0, solved = 0;
  };
  std::map<std::tuple<std::size_t, double, std::string>, Group> groups;
  for (const RunRow& r : rows) {
    Group& g = groups[{r.m, r.rho, r.gap}];
    ++g.runs;
    if (!r.error.empty()) {
      ++g.failed;
      continue;
    }
    if (r.status != "TimeLimit") ++g.solved;
    g.wall.push_back(r.wall_secs);
    g.rgap.push_back(r.rgap);
    g.d.push_back(static_cast<double>(r.eval.d_cpdag));
    g.scaled.push_back(r.eval.scaled_d_cpdag);
  }
  std::ostringstream out;
  out << std::setprecision(17);
  out << "m,rho,gap,runs,failed,within_limit,time,rgap,d_cpdag,scaled_d_cpdag,"
         "time_mean,time_sd,rgap_mean,rgap_sd,d_cpdag_mean,d_cpdag_sd,scaled_mean,scaled_sd\n";
  for (const auto& [k, g] : groups) {
    const auto& [m, rho, gap] = k;
    const MeanSd t = mean_sd(g.wall), rg = mean_sd(g.rgap), d = mean_sd(g.d), sc = mean_sd(g.scaled);
    out << m << ',' << rho << ',' << csv_field(gap) << ',' << g.runs << ',' << g.failed << ',' << g.solved << ','
        << format_mean_sd(g.wall) << ',' << format_mean_sd(g.rgap) << ',' << format_mean_sd(g.d) << ','
        << format_mean_sd(g.scaled) << ',' << t.mean << ',' << t.sd << ',' << rg.mean << ',' << rg.sd << ',' << d.mean
        << ',' << d.sd << ',' << sc.mean << ',' << sc.sd << '\n';
  }
  return out.str();
}

void write_suite(const std::filesystem::path& dir, const SuiteResult& r) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "events", ec);
  if (ec) throw io::IoError("cannot create directory " + (dir / "events").string() + ": " + ec.message());
  io::write_text(dir / "runs.csv", r.runs_csv());
  io::write_text(dir / "aggregate.csv", r.aggregate_csv());
  for (const RunRow& row : r.rows)
    if (row.error.empty()) io::write_text(dir / "events" / (row.key + ".csv"), row.events_csv);
}

}  // namespace micpdag::pipeline
