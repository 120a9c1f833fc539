#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "micpdag/model.hpp"

namespace micpdag::io {

/// The file could not be opened, read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The content is malformed; the message carries "<file>:<line>: ...".
class ParseError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Edge-list format: first line "m", then one "from to" pair per line, 0-based.
// Blank lines and lines starting with '#' are ignored.
EdgeSet read_edge_list(std::istream& in, const std::string& name = "<stream>");
EdgeSet read_edge_list(const std::filesystem::path& path);
Dag read_dag(const std::filesystem::path& path);
void write_edge_list(std::ostream& out, const EdgeSet& edges);
void write_edge_list(const std::filesystem::path& path, const EdgeSet& edges);
void write_dag(const std::filesystem::path& path, const Dag& dag);

// Headerless CSV, n rows by m columns.
Dataset read_dataset(std::istream& in, const std::string& name = "<stream>");
Dataset read_dataset(const std::filesystem::path& path);
void write_dataset(std::ostream& out, const Dataset& data);
void write_dataset(const std::filesystem::path& path, const Dataset& data);

nlohmann::json to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SemParameters& p);
SemParameters sem_from_json(const nlohmann::json& j);
nlohmann::json edges_to_json(const std::vector<Edge>& edges);

nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace micpdag::io
