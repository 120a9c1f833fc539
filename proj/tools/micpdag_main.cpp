// micpdag command-line driver: generate, superstructure, fit, eval, bench, oracle.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "micpdag/io.hpp"
#include "micpdag/pipeline.hpp"

namespace fs = std::filesystem;
using namespace micpdag;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitTimeLimit = 2;
constexpr int kExitValidation = 3;
constexpr int kExitIo = 4;

std::vector<double> parse_doubles(const std::string& text) {
  std::vector<double> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) throw std::invalid_argument("bad number '" + item + "' in '" + text + "'");
    out.push_back(v);
  }
  if (out.empty()) throw std::invalid_argument("empty number list");
  return out;
}

struct SolveFlags {
  std::string gap = "exact";
  double time_limit = 0.0;
  bool deterministic = false;
  int workers = 0;
  std::uint64_t node_limit = 0;

  void add(CLI::App* app) {
    app->add_option("--gap", gap, "exact | theorem1 | theorem2 | m*theorem1 | m*theorem2 | tau=<v>")
        ->capture_default_str();
    app->add_option("--time-limit", time_limit, "seconds; <= 0 means 50 m")->capture_default_str();
    app->add_flag("--deterministic", deterministic, "single worker, byte-identical reruns");
    app->add_option("--workers", workers, "worker threads (0: runtime default)");
    app->add_option("--node-limit", node_limit, "stop after this many nodes (0: none)");
  }

  SolveConfig config() const {
    SolveConfig c;
    c.time_limit_secs = time_limit;
    c.deterministic = deterministic;
    c.worker_count = workers;
    c.node_limit = node_limit;
    if (const char* env = std::getenv("MICPDAG_WORKERS")) {
      const int cap = std::atoi(env);
      if (cap < 1) throw std::invalid_argument("MICPDAG_WORKERS must be a positive integer");
      c.worker_count = c.worker_count > 0 ? std::min(c.worker_count, cap) : cap;
    }
    if (c.deterministic) c.worker_count = 1;
    c.validate();
    return c;
  }
};

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw io::IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

void print_json(const nlohmann::json& j) { std::cout << j.dump(2) << '\n'; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Structure learning for linear SEMs by mixed-integer convex programming"};
  app.require_subcommand(1);
  std::string log_level = "warn";
  app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off")->capture_default_str();

  // generate
  auto* gen = app.add_subcommand("generate", "Sample a random SEM and a dataset");
  std::string preset = "benchmark";
  std::size_t gen_m = 10;
  std::optional<std::size_t> gen_edges, gen_n;
  std::string gen_graph, gen_weights, gen_vset, gen_vint, gen_noise = "gaussian";
  double gen_rho = 4.0;
  std::uint64_t gen_seed = 0;
  std::string gen_out;
  gen->add_option("--preset", preset, "benchmark | rho-sweep")->capture_default_str();
  gen->add_option("--m", gen_m, "number of nodes")->capture_default_str();
  gen->add_option("--edges", gen_edges, "number of edges (default m)");
  gen->add_option("--graph", gen_graph, "edge-list file used instead of a random DAG");
  gen->add_option("--n", gen_n, "sample size (preset default)");
  gen->add_option("--rho", gen_rho, "rho-sweep spread")->capture_default_str();
  gen->add_option("--weights", gen_weights, "comma-separated weight set");
  gen->add_option("--variances", gen_vset, "comma-separated variance set");
  gen->add_option("--variance-interval", gen_vint, "lo,hi");
  gen->add_option("--noise", gen_noise, "gaussian | power:<exponent>")->capture_default_str();
  gen->add_option("--seed", gen_seed)->capture_default_str();
  gen->add_option("--out", gen_out, "output directory")->required();

  // superstructure
  auto* sup = app.add_subcommand("superstructure", "Estimate a superstructure by graphical lasso");
  std::string sup_data, sup_out, sup_method = "newton";
  std::optional<double> sup_lambda, sup_tau;
  bool sup_standardize = false;
  sup->add_option("--data", sup_data, "CSV dataset")->required();
  sup->add_option("--out", sup_out, "edge-list output")->required();
  sup->add_option("--lambda", sup_lambda, "l1 weight (default log(m)/n)");
  sup->add_option("--threshold", sup_tau, "keep |Theta_ij| > threshold (default 0.1)");
  sup->add_option("--method", sup_method, "newton | ista")->capture_default_str();
  sup->add_flag("--standardize", sup_standardize, "rescale columns to unit second moment first");

  // fit
  auto* fitc = app.add_subcommand("fit", "Estimate a DAG by branch and bound");
  std::string fit_data, fit_source = "estimate", fit_sfile, fit_truth, fit_lambda = "bic", fit_out;
  bool fit_standardize = false;
  SolveFlags fit_flags;
  fitc->add_option("--data", fit_data, "CSV dataset")->required();
  fitc->add_option("--superstructure", fit_source, "estimate | file | true-moral")->capture_default_str();
  fitc->add_option("--superstructure-file", fit_sfile, "edge list for --superstructure file");
  fitc->add_option("--truth", fit_truth, "true DAG edge list for --superstructure true-moral");
  fitc->add_option("--lambda", fit_lambda, "bic | lambda^2 value")->capture_default_str();
  fitc->add_option("--out", fit_out, "output directory")->required();
  fitc->add_flag("--standardize", fit_standardize, "rescale columns to unit second moment first");
  fit_flags.add(fitc);

  // eval
  auto* ev = app.add_subcommand("eval", "Compare estimated and true DAGs");
  std::string ev_truth, ev_est, ev_batch;
  ev->add_option("--truth", ev_truth, "true DAG edge list");
  ev->add_option("--estimate", ev_est, "estimated DAG edge list");
  ev->add_option("--batch", ev_batch, "file with one 'truth estimate' path pair per line");

  // bench
  auto* bench = app.add_subcommand("bench", "Run an experiment suite");
  std::string bench_suite, bench_out;
  SolveFlags bench_flags;
  bench->add_option("--suite", bench_suite, "suite file")->required();
  bench->add_option("--out", bench_out, "output directory")->required();
  bench_flags.add(bench);

  // oracle
  auto* orc = app.add_subcommand("oracle", "Exhaustive optimum over all DAGs (m <= 5)");
  std::string orc_data, orc_sfile;
  double orc_lambda = 0.0;
  orc->add_option("--data", orc_data, "CSV dataset")->required();
  orc->add_option("--lambda", orc_lambda, "lambda^2")->required();
  orc->add_option("--superstructure-file", orc_sfile, "restrict to these pairs (default: all)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitValidation;
  }

  try {
    spdlog::set_level(spdlog::level::from_str(log_level));

    if (*gen) {
      auto cfg = pipeline::GenerateConfig::preset(preset, gen_m, gen_rho);
      if (gen_edges) cfg.edges = *gen_edges;
      if (gen_n) cfg.n = *gen_n;
      if (!gen_graph.empty()) cfg.graph_file = gen_graph;
      if (!gen_weights.empty()) cfg.weights = parse_doubles(gen_weights);
      if (!gen_vset.empty() && !gen_vint.empty())
        throw std::invalid_argument("--variances and --variance-interval are exclusive");
      if (!gen_vset.empty()) cfg.variances = ValueSet{parse_doubles(gen_vset)};
      if (!gen_vint.empty()) {
        const auto v = parse_doubles(gen_vint);
        if (v.size() != 2) throw std::invalid_argument("--variance-interval takes lo,hi");
        cfg.variances = Interval{v[0], v[1]};
      }
      if (gen_noise.starts_with("power:")) {
        cfg.noise = PowerNoise{parse_doubles(gen_noise.substr(6)).at(0)};
      } else if (gen_noise != "gaussian") {
        throw std::invalid_argument("--noise takes gaussian or power:<exponent>");
      }
      cfg.seed = gen_seed;
      pipeline::write_instance(gen_out, pipeline::generate(cfg));
      return kExitOk;
    }

    if (*sup) {
      Dataset data = io::read_dataset(sup_data);
      if (sup_standardize) data = data.standardized();
      auto cfg = GlassoConfig::defaults_for(data.m(), data.n());
      if (sup_lambda) cfg.lambda_glasso_sq = *sup_lambda;
      if (sup_tau) cfg.threshold_tau = *sup_tau;
      if (sup_method == "ista")
        cfg.method = GlassoMethod::ista;
      else if (sup_method != "newton")
        throw std::invalid_argument("--method takes newton or ista");
      io::write_edge_list(sup_out, estimate_superstructure(data, cfg));
      return kExitOk;
    }

    if (*fitc) {
      const Dataset data = io::read_dataset(fit_data);
      pipeline::FitConfig cfg;
      cfg.source = pipeline::parse_superstructure_source(fit_source);
      if (!fit_sfile.empty()) cfg.superstructure_file = fit_sfile;
      if (!fit_truth.empty()) cfg.truth = io::read_dag(fit_truth);
      if (fit_lambda != "bic") cfg.lambda_sq = parse_doubles(fit_lambda).at(0);
      cfg.gap = pipeline::GapSpec::parse(fit_flags.gap);
      cfg.solve = fit_flags.config();
      cfg.standardize = fit_standardize;
      const auto res = pipeline::fit(data, cfg);
      ensure_dir(fit_out);
      io::write_json(fs::path(fit_out) / "report.json", pipeline::to_json(res));
      io::write_dag(fs::path(fit_out) / "estimate.txt", res.dag());
      io::write_edge_list(fs::path(fit_out) / "superstructure.txt", res.superstructure);
      io::write_text(fs::path(fit_out) / "events.csv", events_csv(res.report));
      std::cout << to_string(res.report.status) << " upper_bound=" << res.report.upper_bound
                << " lower_bound=" << res.report.lower_bound << " edges=" << res.dag().edge_count() << '\n';
      return res.report.status == SolveStatus::time_limit ? kExitTimeLimit : kExitOk;
    }

    if (*ev) {
      if (!ev_batch.empty()) {
        std::ifstream in(ev_batch);
        if (!in) throw io::IoError("cannot open " + ev_batch);
        std::vector<double> d, scaled, shd, tpr, fpr;
        std::string line;
        std::size_t lineno = 0;
        std::cout << "truth,estimate,d_cpdag,scaled_d_cpdag,shd_skeleton,tpr,fpr\n";
        while (std::getline(in, line)) {
          ++lineno;
          std::istringstream ls(line);
          std::string t, e;
          if (!(ls >> t)) continue;
          if (t.starts_with("#")) continue;
          if (!(ls >> e)) throw io::ParseError(ev_batch + ":" + std::to_string(lineno) + ": expected two paths");
          const auto rec = pipeline::evaluate(io::read_dag(t), io::read_dag(e));
          std::cout << t << ',' << e << ',' << rec.d_cpdag << ',' << rec.scaled_d_cpdag << ',' << rec.skeleton.shd
                    << ',' << rec.skeleton.tpr << ',' << rec.skeleton.fpr << '\n';
          d.push_back(static_cast<double>(rec.d_cpdag));
          scaled.push_back(rec.scaled_d_cpdag);
          shd.push_back(static_cast<double>(rec.skeleton.shd));
          tpr.push_back(rec.skeleton.tpr);
          fpr.push_back(rec.skeleton.fpr);
        }
        std::cout << "mean±sd,," << pipeline::format_mean_sd(d) << ',' << pipeline::format_mean_sd(scaled) << ','
                  << pipeline::format_mean_sd(shd) << ',' << pipeline::format_mean_sd(tpr) << ','
                  << pipeline::format_mean_sd(fpr) << '\n';
        return kExitOk;
      }
      if (ev_truth.empty() || ev_est.empty()) throw std::invalid_argument("eval needs --truth and --estimate, or --batch");
      print_json(pipeline::to_json(pipeline::evaluate(io::read_dag(ev_truth), io::read_dag(ev_est))));
      return kExitOk;
    }

    if (*bench) {
      const auto suite = pipeline::SuiteConfig::read(bench_suite);
      const auto res = pipeline::run_suite(suite, bench_flags.config());
      pipeline::write_suite(bench_out, res);
      std::cout << res.aggregate_csv();
      return kExitOk;
    }

    if (*orc) {
      const Dataset data = io::read_dataset(orc_data);
      if (data.m() > 5) throw std::invalid_argument("oracle is limited to m <= 5");
      const EdgeSet restrict = orc_sfile.empty() ? EdgeSet::complete(data.m()) : io::read_edge_list(orc_sfile);
      const auto best = brute_force_optimum(sample_covariance(data), orc_lambda, restrict);
      print_json({{"objective", best.objective},
                  {"edges", io::edges_to_json(best.gamma.support().edges())},
                  {"gamma", io::to_json(best.gamma.matrix())}});
      return kExitOk;
    }
  } catch (const io::IoError& e) {
    spdlog::error("{}", e.what());
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    spdlog::error("{}", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return kExitOk;
}
