#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "micpdag/evaluation.hpp"
#include "micpdag/formulation.hpp"
#include "micpdag/model.hpp"
#include "micpdag/scoring.hpp"
#include "micpdag/solver.hpp"
#include "micpdag/superstructure.hpp"

namespace micpdag::pipeline {

// ---- generate ---------------------------------------------------------------

struct GenerateConfig {
  std::size_t m = 10;
  std::size_t edges = 10;
  std::optional<std::filesystem::path> graph_file;  // replaces the random DAG
  std::vector<double> weights{-0.8, -0.6, 0.6, 0.8};
  VarianceSpec variances = ValueSet{{0.5, 1.0, 1.5}};
  std::size_t n = 500;
  std::uint64_t seed = 0;
  NoiseSpec noise = GaussianNoise{};

  /// "benchmark": weights +-0.6/+-0.8, variances {0.5, 1, 1.5}, n = 500.
  /// "rho-sweep": same weights, variances uniform on [4 - rho, 4 + rho], n = 100.
  /// Both use m edges on m nodes unless changed afterwards.
  static GenerateConfig preset(const std::string& name, std::size_t m, double rho = 4.0);
  void validate() const;
};

struct Instance {
  Dag truth;
  SemParameters sem;
  Dataset data;
};

Instance generate(const GenerateConfig& cfg);

/// Writes data.csv, truth.txt (edge list) and sem.json into `dir`.
void write_instance(const std::filesystem::path& dir, const Instance& inst);

// ---- fit --------------------------------------------------------------------

enum class SuperstructureSource { estimate, file, true_moral };
SuperstructureSource parse_superstructure_source(const std::string& name);

/// Gap target as a multiple of one of the solver's gap modes, e.g.
/// "m*theorem1" for m lambda^2 s_bar.
struct GapSpec {
  GapMode mode = GapMode::exact;
  double tau = 0.0;       // custom mode
  double c = 0.5;         // theorem2 constant
  bool times_m = false;

  double target(double lambda_sq, std::size_t m) const;
  std::string label() const;
  /// exact | theorem1 | theorem2 | m*theorem1 | m*theorem2 | tau=<v>
  static GapSpec parse(const std::string& token);
};

struct FitConfig {
  SuperstructureSource source = SuperstructureSource::estimate;
  std::optional<std::filesystem::path> superstructure_file;
  std::optional<Dag> truth;                 // required by true_moral
  std::optional<double> lambda_sq;          // fixed lambda; BIC grid when unset
  std::vector<int> c_grid = default_lambda_grid();
  GapSpec gap;
  SolveConfig solve;
  bool standardize = false;
  std::optional<GlassoConfig> glasso;       // default: GlassoConfig::defaults_for(m, n)
};

struct FitResult {
  EdgeSet superstructure;
  double lambda_sq = 0.0;
  int c = 0;  // 0 for a fixed lambda
  std::vector<std::pair<int, double>> bic_by_c;
  SolveReport report;            // solve at the selected lambda
  std::vector<SolveReport> grid;  // one per fitted grid point, in grid order
  nlohmann::json report_json;     // report with problem context (lambda, big-M, pairs)

  Dag dag() const { return report.dag(); }
};

EdgeSet superstructure_for(const Dataset& data, const FitConfig& cfg);
FitResult fit(const Dataset& data, const FitConfig& cfg);
nlohmann::json to_json(const FitResult& r);

// ---- eval -------------------------------------------------------------------

struct EvalRecord {
  std::size_t d_cpdag = 0;
  double scaled_d_cpdag = 0.0;
  SkeletonMetrics skeleton;
  std::size_t true_edges = 0;
};

EvalRecord evaluate(const Dag& truth, const Dag& estimate);
nlohmann::json to_json(const EvalRecord& r);

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation, 0 for fewer than two values
};
MeanSd mean_sd(const std::vector<double>& values);
/// One decimal each, a zero deviation printed as "0": {2, 2} -> "2.0±0".
std::string format_mean_sd(const std::vector<double>& values);

// ---- bench ------------------------------------------------------------------

/// Key-value suite file: "key = value" lines, '#' comments. Keys:
///   name, preset (benchmark | rho-sweep), m (list), rho (list), n, edges,
///   seeds (list, "a-b" ranges allowed), gaps (list of GapSpec tokens),
///   superstructure (estimate | true-moral), lambda (bic | value),
///   time_limit, jobs, graph_file.
struct SuiteConfig {
  std::string name = "suite";
  std::string preset = "benchmark";
  std::vector<std::size_t> m{10};
  std::vector<double> rho{4.0};
  std::optional<std::size_t> n;
  std::optional<std::size_t> edges;  // default: m
  std::vector<std::uint64_t> seeds{0};
  std::vector<GapSpec> gaps{GapSpec{}};
  SuperstructureSource source = SuperstructureSource::estimate;
  std::optional<double> lambda_sq;
  double time_limit_secs = 0.0;
  int jobs = 1;
  std::optional<std::filesystem::path> graph_file;

  static SuiteConfig parse(const std::string& text, const std::string& name = "<suite>");
  static SuiteConfig read(const std::filesystem::path& path);
};

struct RunRow {
  std::string key;  // sortable run identifier
  std::size_t m = 0;
  double rho = 0.0;
  std::uint64_t seed = 0;
  std::string gap;
  std::string error;  // empty on success
  double lambda_sq = 0.0;
  double gap_target = 0.0;
  std::string status;
  double upper_bound = 0.0;
  double lower_bound = 0.0;
  double gap_value = 0.0;
  double rgap = 0.0;
  std::uint64_t nodes = 0;
  double wall_secs = 0.0;
  EvalRecord eval;
  std::string events_csv;
};

struct SuiteResult {
  std::vector<RunRow> rows;  // sorted by key
  std::string runs_csv() const;
  /// Grouped by (m, rho, gap): "mean±sd" columns plus full-precision ones.
  std::string aggregate_csv() const;
};

SuiteResult run_suite(const SuiteConfig& suite, const SolveConfig& base);

/// runs.csv, aggregate.csv and events/<key>.csv under `dir`.
void write_suite(const std::filesystem::path& dir, const SuiteResult& r);

}  // namespace micpdag::pipeline
