#include <doctest.h>

#include "micpdag/formulation.hpp"
#include "micpdag/scoring.hpp"
#include "support.hpp"

using namespace micpdag;
using testing::random_spd;

TEST_CASE("choose_delta examples") {
  for (double v : choose_delta(SymmetricMatrix::identity(4))) CHECK(v == doctest::Approx(1.0).epsilon(1e-6));
  const double d[] = {0.5, 2.0, 3.0};
  const Vector dd = choose_delta(SymmetricMatrix::diagonal(d));
  for (std::size_t i = 0; i < 3; ++i) CHECK(dd[i] == doctest::Approx(d[i]).epsilon(1e-6));

  Matrix a(2, 2);
  a(0, 0) = a(1, 1) = 2.0;
  a(0, 1) = a(1, 0) = 1.0;
  const Vector two = choose_delta(SymmetricMatrix(a));
  // Grid search of delta1 + delta2 subject to (2 - d1)(2 - d2) >= 1, d <= 2.
  double best = 0.0;
  for (int i = 0; i <= 2000; ++i) {
    const double d1 = 2.0 * i / 2000.0;
    if (d1 >= 2.0) continue;
    const double d2 = std::max(0.0, 2.0 - 1.0 / (2.0 - d1));
    best = std::max(best, d1 + d2);
  }
  CHECK(two[0] + two[1] == doctest::Approx(best).epsilon(1e-4));
  CHECK(two[0] == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(two[1] == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("property: delta is feasible and coordinate-wise maximal") {
  for (std::uint64_t seed = 0; seed < 15; ++seed) {
    const SymmetricMatrix s = random_spd(2 + seed % 6, seed);
    const Vector d = choose_delta(s);
    for (double v : d) CHECK(v >= 0.0);
    CHECK(is_psd(s.minus_diagonal(d), kPsdTolerance));
    for (std::size_t i = 0; i < d.size(); ++i) {
      Vector up = d;
      up[i] += 1e-6;
      CHECK_FALSE(is_psd(s.minus_diagonal(up), kPsdTolerance));
    }
  }
}

TEST_CASE("big-M calibration examples") {
  CHECK(calibrate_big_m(SymmetricMatrix::identity(3), EdgeSet::complete(3)) == doctest::Approx(2.0));
  CHECK(calibrate_big_m(SymmetricMatrix(4.0 * Matrix::identity(3)), EdgeSet::complete(3)) == doctest::Approx(1.0));

  Matrix a(2, 2, 0.5);
  a(0, 0) = a(1, 1) = 1.0;
  const SymmetricMatrix s(a);
  // Each column regressed on the other: Gamma_jj = 1/sqrt(0.75), Gamma_ij = -0.5 Gamma_jj.
  const double gjj = 1.0 / std::sqrt(0.75);
  CHECK(calibrate_big_m(s, EdgeSet::complete(2)) == doctest::Approx(2.0 * gjj));
  const DagScore opt = brute_force_optimum(s, 0.01, EdgeSet::complete(2));
  CHECK(opt.gamma.matrix().max_abs() <= calibrate_big_m(s, EdgeSet::complete(2)));
}

TEST_CASE("big-M falls back to a ridge on singular blocks") {
  Matrix a(3, 3, 1.0);
  a(2, 2) = 2.0;
  a(0, 2) = a(2, 0) = a(1, 2) = a(2, 1) = 0.5;
  CHECK(std::isfinite(calibrate_big_m(SymmetricMatrix(a), EdgeSet::complete(3))));
}

TEST_CASE("property: big-M bounds brute-force optima") {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const std::size_t m = 2 + seed % 3;
    const SymmetricMatrix s = random_spd(m, seed);
    const double bm = calibrate_big_m(s, EdgeSet::complete(m));
    for (double lsq : {0.01, 0.1}) CHECK(brute_force_optimum(s, lsq, EdgeSet::complete(m)).gamma.matrix().max_abs() <= bm);
  }
}

TEST_CASE("problem assembly") {
  const MicpProblem empty = build_problem(SymmetricMatrix::identity(3), EdgeSet(3), 1.0);
  CHECK(empty.layout().binaries() == 0);
  CHECK(empty.pairs().empty());

  const MicpProblem full = build_problem(random_spd(3, 2), EdgeSet::complete(3), 0.1);
  CHECK(full.layout().binaries() == 6);
  CHECK(full.layout().psi_count() == 3);
  CHECK(full.layout().s_count() == 9);
  CHECK(full.layout().t_count() == 3);
  CHECK(full.layout().total() == 3 + 6 + 6 + 3 + 9 + 3);
  CHECK(is_psd(full.q(), kPsdTolerance));
  for (std::size_t p = 0; p < full.pairs().size(); ++p)
    CHECK(full.pair_index(full.pairs()[p].from, full.pairs()[p].to) == p);
  CHECK_FALSE(full.pair_index(0, 0).has_value());
}

TEST_CASE("property: program objective equals the Gamma objective at integral points") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::size_t m = 3 + seed % 3;
    const SymmetricMatrix s = random_spd(m, seed);
    const MicpProblem p = build_problem(s, EdgeSet::complete(m), 0.05);
    const Dag d = random_dag(m, m - 1, seed);
    const GammaMatrix g = dag_mle(s, d, 0.05).gamma;
    Vector gv(p.pairs().size(), 0.0), s_off(p.pairs().size(), 0.0), s_diag(m);
    for (std::size_t q = 0; q < p.pairs().size(); ++q) {
      const Edge e = p.pairs()[q];
      gv[q] = d.has_edge(e.from, e.to) ? 1.0 : 0.0;
      s_off[q] = g(e.from, e.to) * g(e.from, e.to);
    }
    for (std::size_t i = 0; i < m; ++i) s_diag[i] = g(i, i) * g(i, i);
    CHECK(micp_objective(p, g.matrix(), gv, s_off, s_diag) == doctest::Approx(objective(g, s, 0.05)).epsilon(1e-10));
    CHECK(micp_feasible(p, g.matrix(), gv));
    CHECK(layer_values(p, gv).has_value());
  }
}

TEST_CASE("layered constraints reject cyclic indicator vectors") {
  const MicpProblem p = build_problem(random_spd(3, 1), EdgeSet::complete(3), 0.1);
  Vector g(p.pairs().size(), 0.0);
  g[*p.pair_index(0, 1)] = 1.0;
  g[*p.pair_index(1, 2)] = 1.0;
  const auto psi = layer_values(p, g);
  REQUIRE(psi.has_value());
  const std::size_t m = 3;
  for (std::size_t q = 0; q < p.pairs().size(); ++q) {
    const Edge e = p.pairs()[q];
    CHECK(1.0 - m + m * g[q] <= (*psi)[e.to] - (*psi)[e.from] + 1e-12);
  }
  g[*p.pair_index(2, 0)] = 1.0;
  CHECK_FALSE(layer_values(p, g).has_value());
}

TEST_CASE("problem JSON round trip") {
  const MicpProblem p = build_problem(random_spd(4, 5), EdgeSet::complete(4), 0.2);
  const MicpProblem back = problem_from_json(to_json(p));
  CHECK(back.s() == p.s());
  CHECK(back.e_super() == p.e_super());
  CHECK(back.lambda_sq() == p.lambda_sq());
  CHECK(back.big_m() == p.big_m());
  CHECK(back.delta() == p.delta());
}
