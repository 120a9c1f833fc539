#include <doctest.h>

#include <random>

#include "micpdag/evaluation.hpp"
#include "micpdag/oa.hpp"
#include "micpdag/relaxation.hpp"
#include "micpdag/solver.hpp"
#include "micpdag/subset_bound.hpp"
#include "support.hpp"

using namespace micpdag;
using testing::random_spd;

TEST_CASE("OA cuts of the worked toy example") {
  const OaCut c4 = oa_cut_at(0, 4.0, kDiagonalFloor);
  CHECK(c4.slope() == doctest::Approx(-0.5));
  CHECK(std::abs(c4.intercept() - (2.0 - 2.0 * std::log(4.0))) <= 1e-12);
  const OaCut c1 = oa_cut_at(0, 1.0, kDiagonalFloor);
  CHECK(c1.slope() == doctest::Approx(-2.0));
  CHECK(std::abs(c1.intercept() - 2.0) <= 1e-12);
  const OaCut c2 = oa_cut_at(0, 2.0, kDiagonalFloor);
  CHECK(c2.slope() == doctest::Approx(-1.0));
  CHECK(std::abs(c2.intercept() - (2.0 - 2.0 * std::log(2.0))) <= 1e-12);
  CHECK(std::abs(c2(2.0) + 2.0 * std::log(2.0)) <= 1e-12);
  CHECK_THROWS_AS(oa_cut_at(0, 1e-9, kDiagonalFloor), std::invalid_argument);
}

TEST_CASE("property: cuts underestimate -2 log x") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> anchor(kDiagonalFloor, 50.0), x(1e-6, 100.0);
  for (int c = 0; c < 50; ++c) {
    const OaCut cut = oa_cut_at(0, anchor(rng), kDiagonalFloor);
    for (int t = 0; t < 1000; ++t) {
      const double v = x(rng);
      CHECK(cut(v) <= -2.0 * std::log(v) + 1e-12);
    }
  }
}

TEST_CASE("integer outer approximation reproduces 4 -> 1 -> 2") {
  const IntegerOaTrace t = solve_integer_log_program(4.0, 1.0, 10.0);
  REQUIRE(t.anchors.size() >= 3);
  CHECK(t.anchors[0] == 4.0);
  CHECK(t.anchors[1] == 1.0);
  CHECK(t.anchors[2] == 2.0);
  CHECK(t.x == 2.0);
  CHECK(std::abs(t.value - (2.0 - 2.0 * std::log(2.0))) <= 1e-9);
}

TEST_CASE("cut envelope minimization against a dense scan") {
  std::vector<OaCut> cuts{oa_cut_at(0, 0.5, kDiagonalFloor), oa_cut_at(0, 1.0, kDiagonalFloor), oa_cut_at(0, 3.0, kDiagonalFloor)};
  const CutEnvelope env(cuts, 0.1, 5.0);
  for (double curv : {0.0, 0.3, 2.0})
    for (double lin : {-1.0, 0.0, 0.7}) {
      const auto [arg, val] = env.minimize(curv, lin);
      double best = std::numeric_limits<double>::infinity();
      for (int i = 0; i <= 200000; ++i) {
        const double x = 0.1 + 4.9 * i / 200000.0;
        double e = -std::numeric_limits<double>::infinity();
        for (const OaCut& c : cuts) e = std::max(e, c(x));
        best = std::min(best, curv * x * x + lin * x + e);
      }
      // The scan only sees grid points, so it sits slightly above the true minimum.
      CHECK(val <= best + 1e-12);
      CHECK(val >= best - 1e-4);
      double at_arg = -std::numeric_limits<double>::infinity();
      for (const OaCut& c : cuts) at_arg = std::max(at_arg, c(arg));
      CHECK(curv * arg * arg + lin * arg + at_arg == doctest::Approx(val).epsilon(1e-12));
      CHECK(arg >= 0.1);
      CHECK(arg <= 5.0);
    }
}

TEST_CASE("node relaxation examples") {
  const MicpProblem p = build_problem(SymmetricMatrix::identity(3), EdgeSet::complete(3), 0.1);
  BnbNode all_zero = root_node(p);
  std::fill(all_zero.fixed.begin(), all_zero.fixed.end(), 0);
  CutPool cuts(3);
  for (std::size_t i = 0; i < 3; ++i) cuts.add(oa_cut_at(i, 1.0, kDiagonalFloor));
  const RelaxResult r = solve_node_relaxation(p, all_zero, cuts);
  CHECK(r.status == RelaxStatus::ok);
  CHECK(r.value == doctest::Approx(3.0).epsilon(1e-6));
  CHECK(r.lower_bound <= 3.0 + 1e-9);
  for (std::size_t i = 0; i < 3; ++i) CHECK(r.point.gamma(i, i) == doctest::Approx(1.0).epsilon(1e-4));

  const MicpProblem one = build_problem(SymmetricMatrix::identity(1), EdgeSet(1), 0.0);
  RelaxOptions exact;
  exact.exact_log = true;
  const RelaxResult scalar = solve_node_relaxation(one, root_node(one), CutPool(1), exact);
  CHECK(scalar.value == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(scalar.point.gamma(0, 0) == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("property: root relaxation bounds the brute-force optimum") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const std::size_t m = 3 + seed % 2;
    const SymmetricMatrix s = random_spd(m, seed);
    const double lsq = seed % 2 ? 0.01 : 0.1;
    const MicpProblem p = build_problem(s, EdgeSet::complete(m), lsq);
    CutPool cuts(m);
    for (std::size_t i = 0; i < m; ++i)
      for (double a : {0.5, 1.0, 2.0}) cuts.add(oa_cut_at(i, a, kDiagonalFloor));
    const RelaxResult r = solve_node_relaxation(p, root_node(p), cuts);
    CHECK(r.lower_bound <= brute_force_optimum(s, lsq, EdgeSet::complete(m)).objective + 1e-9);
  }
}

TEST_CASE("property: subset bound is a valid lower bound at random nodes") {
  std::mt19937_64 rng(7);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const std::size_t m = 3 + seed % 2;
    const SymmetricMatrix s = random_spd(m, seed);
    const double lsq = seed % 2 ? 0.01 : 0.1;
    const MicpProblem p = build_problem(s, EdgeSet::complete(m), lsq);
    SubsetBound sb(p, 12);
    REQUIRE(sb.enabled());
    BnbNode node = root_node(p);
    for (auto& f : node.fixed) {
      const auto r = rng() % 4;
      f = r == 0 ? 0 : r == 1 ? 1 : kFree;
    }
    const auto fixed = propagate_fixings(p, node.fixed);
    if (!fixed) continue;
    // Brute-force optimum over DAGs consistent with the fixings.
    double best = std::numeric_limits<double>::infinity();
    for (const Dag& d : enumerate_dags(m)) {
      bool ok = true;
      for (std::size_t q = 0; q < p.pairs().size() && ok; ++q) {
        const bool has = d.has_edge(p.pairs()[q].from, p.pairs()[q].to);
        if (((*fixed)[q] == 1 && !has) || ((*fixed)[q] == 0 && has)) ok = false;
      }
      if (ok) best = std::min(best, dag_mle(s, d, lsq).objective);
    }
    const auto r = sb.evaluate(*fixed, {}, std::numeric_limits<double>::infinity(), 30);
    CHECK(r.bound <= best + 1e-9);
  }
}

TEST_CASE("fixing propagation closes acyclicity") {
  const MicpProblem p = build_problem(random_spd(3, 3), EdgeSet::complete(3), 0.1);
  BnbNode n = root_node(p);
  n.fixed[*p.pair_index(0, 1)] = 1;
  n.fixed[*p.pair_index(1, 2)] = 1;
  const auto f = propagate_fixings(p, n.fixed);
  REQUIRE(f.has_value());
  CHECK((*f)[*p.pair_index(2, 0)] == 0);
  CHECK((*f)[*p.pair_index(1, 0)] == 0);
  n.fixed[*p.pair_index(2, 0)] = 1;
  CHECK_FALSE(propagate_fixings(p, n.fixed).has_value());
}

TEST_CASE("rescale_to_trace examples and property") {
  CHECK(rescale_to_trace(GammaMatrix(Matrix::identity(3)), SymmetricMatrix::identity(3)).matrix() == Matrix::identity(3));
  const GammaMatrix two(2.0 * Matrix::identity(3));
  CHECK(testing::max_abs_diff(rescale_to_trace(two, SymmetricMatrix::identity(3)).matrix(), Matrix::identity(3)) <= 1e-15);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.2, 3.0), w(-2.0, 2.0);
  for (int t = 0; t < 100; ++t) {
    const std::size_t m = 2 + t % 5;
    const Dag d = random_dag(m, m - 1, static_cast<std::uint64_t>(t));
    Matrix g(m, m, 0.0);
    for (std::size_t i = 0; i < m; ++i) g(i, i) = u(rng);
    for (const Edge& e : d.edges()) g(e.from, e.to) = w(rng);
    const SymmetricMatrix s = random_spd(m, static_cast<std::uint64_t>(t));
    const GammaMatrix r = rescale_to_trace(GammaMatrix(g), s);
    CHECK(std::abs(trace_term(r.matrix(), s) - static_cast<double>(m)) <= 1e-9);
    CHECK(objective(r, s, 0.1) <= objective(GammaMatrix(g), s, 0.1) + 1e-10);
  }
}

TEST_CASE("gap targets") {
  CHECK(gap_target(GapMode::exact, 0.02, 20) == 0.0);
  CHECK(gap_target(GapMode::theorem1, 0.02, 20) == doctest::Approx(1.9));
  CHECK(gap_target(GapMode::theorem2, 0.02, 20) == doctest::Approx(0.01));
  CHECK(gap_target(GapMode::custom, 0.02, 20, 0.3) == 0.3);
  CHECK_THROWS_AS(gap_target(GapMode::custom, 0.02, 20, -1.0), std::invalid_argument);
  CHECK(parse_gap_mode("theorem1") == GapMode::theorem1);
  CHECK_THROWS_AS(parse_gap_mode("nope"), std::invalid_argument);
  SolveConfig bad;
  bad.gap_target = -1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  CHECK(SolveConfig{}.effective_time_limit(7) == doctest::Approx(350.0));
}

TEST_CASE("empty superstructure solves at the root") {
  const SymmetricMatrix s = random_spd(4, 9);
  const SolveReport r = branch_and_bound(build_problem(s, EdgeSet(4), 0.1), SolveConfig{});
  CHECK(r.status == SolveStatus::optimal);
  CHECK(r.nodes_explored == 1);
  for (std::size_t i = 0; i < 4; ++i) CHECK(r.incumbent(i, i) == doctest::Approx(1.0 / std::sqrt(s(i, i))).epsilon(1e-12));
  CHECK(r.dag().edge_count() == 0);
}

namespace {

void check_report(const SolveReport& r, const MicpProblem& p) {
  CHECK(r.upper_bound >= r.lower_bound - 1e-9);
  CHECK(r.gap == doctest::Approx(r.upper_bound - r.lower_bound));
  CHECK(is_acyclic(p.m(), r.dag().edges()));
  CHECK(r.incumbent.support_within(p.e_super()));
  CHECK(r.incumbent.matrix().max_abs() <= p.big_m() * (1 + 1e-12));
  CHECK(std::abs(objective(r.incumbent, p.s(), p.lambda_sq()) - r.upper_bound) <= 1e-12 * std::abs(r.upper_bound) + 1e-12);
  std::vector<Edge> from_g;
  for (std::size_t q = 0; q < p.pairs().size(); ++q)
    if (r.g[q] > 0.5) from_g.push_back(p.pairs()[q]);
  CHECK(from_g == r.dag().edges());
  for (std::size_t e = 1; e < r.events.size(); ++e) {
    CHECK(r.events[e].upper_bound <= r.events[e - 1].upper_bound);
    CHECK(r.events[e].lower_bound >= r.events[e - 1].lower_bound);
  }
}

}  // namespace

TEST_CASE("branch and bound matches brute force on small instances") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::size_t m = 3 + seed % 2;
    const SymmetricMatrix s = random_spd(m, 1000 + seed);
    const double lsq = seed % 4 < 2 ? 0.01 : 0.1;
    const MicpProblem p = build_problem(s, EdgeSet::complete(m), lsq);
    const DagScore oracle = brute_force_optimum(s, lsq, EdgeSet::complete(m));
    const SolveReport r = branch_and_bound(p, SolveConfig{});
    CHECK(r.status == SolveStatus::optimal);
    CHECK(std::abs(r.upper_bound - oracle.objective) <= 1e-6);
    CHECK(r.lower_bound <= oracle.objective + 1e-9);
    CHECK(mec_equal(r.dag(), oracle.gamma.support()));
    check_report(r, p);
  }
}

TEST_CASE("branch and bound without the subset bound still matches brute force") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const SymmetricMatrix s = random_spd(3, 2000 + seed);
    const MicpProblem p = build_problem(s, EdgeSet::complete(3), 0.05);
    SolveConfig cfg;
    cfg.subset_bounds = false;
    cfg.polish_incumbents = false;
    const SolveReport r = branch_and_bound(p, cfg);
    CHECK(std::abs(r.upper_bound - brute_force_optimum(s, 0.05, EdgeSet::complete(3)).objective) <= 1e-6);
    check_report(r, p);
  }
}

TEST_CASE("deterministic runs are reproducible") {
  const Dag d = random_dag(8, 9, 4);
  const SymmetricMatrix s = sample_covariance(
      generate_data(random_sem(d, {-0.8, 0.6}, ValueSet{{0.5, 1.5}}, 4), 200, GaussianNoise{}, 4));
  const MicpProblem p = build_problem(s, moral_graph(d), 0.03);
  const SolveReport a = branch_and_bound(p, SolveConfig{});
  const SolveReport b = branch_and_bound(p, SolveConfig{});
  CHECK(a.incumbent == b.incumbent);
  CHECK(a.upper_bound == b.upper_bound);
  CHECK(a.lower_bound == b.lower_bound);
  CHECK(a.nodes_explored == b.nodes_explored);
  CHECK(a.oa_cuts_added == b.oa_cuts_added);
  check_report(a, p);
}

TEST_CASE("early stopping honours the gap target") {
  const Dag d = random_dag(10, 10, 2);
  const SymmetricMatrix s = sample_covariance(
      generate_data(random_sem(d, {-0.8, -0.6, 0.6, 0.8}, ValueSet{{0.5, 1.0, 1.5}}, 2), 400, GaussianNoise{}, 2));
  const MicpProblem p = build_problem(s, moral_graph(d), 0.02);
  const SolveReport exact = branch_and_bound(p, SolveConfig{});
  SolveConfig cfg;
  cfg.gap_target = gap_target(GapMode::theorem1, 0.02, 10);
  const SolveReport early = branch_and_bound(p, cfg);
  CHECK(early.gap <= cfg.gap_target + 1e-12);
  CHECK(early.nodes_explored <= exact.nodes_explored);
  CHECK(early.upper_bound >= exact.upper_bound - 1e-9);
  CHECK(early.upper_bound - exact.upper_bound <= cfg.gap_target + 1e-9);
  check_report(early, p);
}

TEST_CASE("node limit ends the search with a time-limit status") {
  const Dag d = random_dag(10, 14, 6);
  const SymmetricMatrix s = sample_covariance(
      generate_data(random_sem(d, {-0.8, 0.8}, ValueSet{{0.5, 1.5}}, 6), 300, GaussianNoise{}, 6));
  const MicpProblem p = build_problem(s, EdgeSet::complete(10), 0.005);
  SolveConfig cfg;
  cfg.node_limit = 3;
  const SolveReport r = branch_and_bound(p, cfg);
  CHECK(r.status == SolveStatus::time_limit);
  CHECK(r.nodes_explored <= 3);
  check_report(r, p);
}

TEST_CASE("greedy initial DAG stays inside the superstructure") {
  const Dag d = random_dag(7, 8, 3);
  const SymmetricMatrix s = random_spd(7, 3);
  const MicpProblem p = build_problem(s, moral_graph(d), 0.1);
  const Dag g = greedy_initial_dag(p);
  for (const Edge& e : g.edges()) CHECK(p.e_super().contains(e.from, e.to));
}

TEST_CASE("report serialization") {
  const MicpProblem p = build_problem(random_spd(3, 8), EdgeSet::complete(3), 0.1);
  const SolveReport r = branch_and_bound(p, SolveConfig{});
  const auto j = to_json(r, p);
  CHECK(j.at("status") == to_string(r.status));
  CHECK(j.at("upper_bound").get<double>() == r.upper_bound);
  const std::string csv = events_csv(r);
  CHECK(csv.rfind("wall,upper_bound,lower_bound,node\n", 0) == 0);
}
