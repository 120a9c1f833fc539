#include <doctest.h>

#include <filesystem>
#include <random>
#include <sstream>

#include "micpdag/io.hpp"
#include "micpdag/model.hpp"
#include "micpdag/rng.hpp"
#include "support.hpp"

using namespace micpdag;

namespace {

SemParameters two_node(double w) {
  SemParameters p;
  p.b = Matrix(2, 2, 0.0);
  p.b(0, 1) = w;
  p.omega = {1.0, 1.0};
  return p;
}

}  // namespace

TEST_CASE("Dag validation") {
  CHECK_NOTHROW(Dag(3, {{0, 1}, {1, 2}}));
  CHECK_THROWS_AS(Dag(3, {{0, 1}, {1, 2}, {2, 0}}), GraphError);
  CHECK_THROWS_AS(Dag(2, {{0, 0}}), GraphError);
  CHECK_THROWS_AS(Dag(2, {{0, 1}, {0, 1}}), GraphError);
  CHECK_THROWS_AS(Dag(2, {{0, 2}}), GraphError);
}

TEST_CASE("property: a back edge on a random chain is rejected") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 50; ++t) {
    const std::size_t m = 2 + static_cast<std::size_t>(rng() % 8);
    std::vector<std::size_t> perm(m);
    for (std::size_t i = 0; i < m; ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<Edge> chain;
    for (std::size_t i = 0; i + 1 < m; ++i) chain.push_back({perm[i], perm[i + 1]});
    CHECK_NOTHROW(Dag(m, chain));
    const std::size_t a = rng() % m, b = rng() % m;
    if (a == b) continue;
    const std::size_t lo = std::min(a, b), hi = std::max(a, b);
    chain.push_back({perm[hi], perm[lo]});
    CHECK_THROWS_AS(Dag(m, chain), GraphError);
  }
}

TEST_CASE("population covariance examples") {
  SemParameters p;
  p.b = Matrix(3, 3, 0.0);
  p.omega = {1.0, 1.0, 1.0};
  CHECK(population_covariance(p) == SymmetricMatrix::identity(3));

  const SymmetricMatrix s = population_covariance(two_node(1.0));
  CHECK(s(0, 0) == doctest::Approx(1.0));
  CHECK(s(0, 1) == doctest::Approx(1.0));
  CHECK(s(1, 1) == doctest::Approx(2.0));

  SemParameters chain;
  chain.b = Matrix(3, 3, 0.0);
  chain.b(0, 1) = 0.7;
  chain.b(1, 2) = -1.3;
  chain.omega = {0.5, 2.0, 1.5};
  CHECK(is_positive_definite(population_covariance(chain)));
}

TEST_CASE("Monte Carlo: X2 = X1 + eps2 has covariance [[1,1],[1,2]]") {
  const Dataset d = generate_data(two_node(1.0), 200000, GaussianNoise{}, 17);
  // Independent second-moment computation.
  double s00 = 0, s01 = 0, s11 = 0;
  for (std::size_t i = 0; i < d.n(); ++i) {
    s00 += d.x()(i, 0) * d.x()(i, 0);
    s01 += d.x()(i, 0) * d.x()(i, 1);
    s11 += d.x()(i, 1) * d.x()(i, 1);
  }
  const double n = static_cast<double>(d.n());
  CHECK(std::abs(s00 / n - 1.0) <= 0.05);
  CHECK(std::abs(s01 / n - 1.0) <= 0.05);
  CHECK(std::abs(s11 / n - 2.0) <= 0.05);
}

TEST_CASE("generate_data converges to the population covariance") {
  SemParameters ind;
  ind.b = Matrix(3, 3, 0.0);
  ind.omega = {1.0, 1.0, 1.0};
  const SymmetricMatrix s0 = sample_covariance(generate_data(ind, 100000, GaussianNoise{}, 1));
  CHECK(testing::max_abs_diff(s0.matrix(), Matrix::identity(3)) <= 0.05);

  const SemParameters p = two_node(0.6);
  const SymmetricMatrix s = sample_covariance(generate_data(p, 200000, GaussianNoise{}, 2));
  CHECK(testing::max_abs_diff(s.matrix(), population_covariance(p).matrix()) <= 0.05);

  const Dag dag = random_dag(5, 6, 9);
  const SemParameters q = random_sem(dag, {-0.8, -0.6, 0.6, 0.8}, ValueSet{{0.5, 1.0, 1.5}}, 9);
  const SymmetricMatrix sq = sample_covariance(generate_data(q, 200000, GaussianNoise{}, 9));
  CHECK(testing::max_abs_diff(sq.matrix(), population_covariance(q).matrix()) <= 0.05);
}

TEST_CASE("generate_data is deterministic in the seed") {
  const SemParameters p = two_node(0.6);
  CHECK(generate_data(p, 50, GaussianNoise{}, 4).x() == generate_data(p, 50, GaussianNoise{}, 4).x());
  CHECK_FALSE(generate_data(p, 50, GaussianNoise{}, 4).x() == generate_data(p, 50, GaussianNoise{}, 5).x());
  CHECK(generate_data(p, 50, PowerNoise{1.5}, 4).x() == generate_data(p, 50, PowerNoise{1.5}, 4).x());
}

TEST_CASE("power noise applies sign(e)|e|^p to the gaussian draw") {
  SemParameters p;
  p.b = Matrix(1, 1, 0.0);
  p.omega = {1.0};
  const Dataset g = generate_data(p, 20, GaussianNoise{}, 8);
  const Dataset w = generate_data(p, 20, PowerNoise{1.5}, 8);
  for (std::size_t i = 0; i < 20; ++i) {
    const double e = g.x()(i, 0);
    CHECK(w.x()(i, 0) == doctest::Approx(std::copysign(std::pow(std::abs(e), 1.5), e)));
  }
  for (double bad : {0.3, 1.0, 1.1, 2.5}) CHECK_THROWS_AS(generate_data(p, 5, PowerNoise{bad}, 0), std::invalid_argument);
  for (double ok : {0.5, 0.8, 1.2, 2.0}) CHECK_NOTHROW(generate_data(p, 5, PowerNoise{ok}, 0));
}

TEST_CASE("random_sem respects the weight set and variance spec") {
  const std::vector<double> weights{-0.8, -0.6, 0.6, 0.8};
  const SemParameters empty = random_sem(Dag(4, {}), weights, ValueSet{{0.5, 1.0, 1.5}}, 1);
  CHECK(empty.b.max_abs() == 0.0);
  for (double v : empty.omega) CHECK((v == 0.5 || v == 1.0 || v == 1.5));

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Dag d = random_dag(10, 12, seed);
    const SemParameters p = random_sem(d, weights, Interval{0.0, 8.0}, seed);
    for (double v : p.omega) CHECK((v > 0.0 && v < 8.0));
    for (std::size_t i = 0; i < 10; ++i)
      for (std::size_t j = 0; j < 10; ++j) {
        if (d.has_edge(i, j))
          CHECK(std::find(weights.begin(), weights.end(), p.b(i, j)) != weights.end());
        else
          CHECK(p.b(i, j) == 0.0);
      }
  }
  CHECK_THROWS_AS(random_sem(Dag(2, {}), {}, ValueSet{{1.0}}, 0), std::invalid_argument);
  CHECK_THROWS_AS(random_sem(Dag(2, {}), {0.0, 1.0}, ValueSet{{1.0}}, 0), std::invalid_argument);
  CHECK_THROWS_AS(random_sem(Dag(2, {}), weights, Interval{-1.0, 1.0}, 0), std::invalid_argument);
  CHECK_THROWS_AS(random_sem(Dag(2, {}), weights, Interval{2.0, 1.0}, 0), std::invalid_argument);
}

TEST_CASE("random_dag has the requested edge count and is deterministic") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Dag d = random_dag(12, 12, seed);
    CHECK(d.edge_count() == 12);
    CHECK(d == random_dag(12, 12, seed));
  }
}

TEST_CASE("sample covariance") {
  Matrix x(2, 2, 0.0);
  x(0, 0) = 1.0;
  x(1, 0) = -1.0;
  const SymmetricMatrix s = sample_covariance(Dataset(x));
  CHECK(s(0, 0) == 1.0);
  CHECK(s(0, 1) == 0.0);
  CHECK(s(1, 1) == 0.0);
  CHECK(sample_covariance(Dataset(Matrix(1, 3, 0.0))).matrix().max_abs() == 0.0);

  std::mt19937_64 rng(21);
  std::normal_distribution<double> z;
  Matrix r(50, 4);
  for (double& v : r.values()) v = z(rng);
  const SymmetricMatrix sr = sample_covariance(Dataset(r));
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < 50; ++k) acc += r(k, i) * r(k, j);
      CHECK(std::abs(sr(i, j) - acc / 50.0) <= 1e-12);
    }
}

TEST_CASE("moral graph examples") {
  const EdgeSet collider = moral_graph(Dag(3, {{0, 2}, {1, 2}}));
  CHECK(collider.size() == 6);
  CHECK(collider.contains(0, 1));
  CHECK(collider.contains(1, 0));
  const EdgeSet chain = moral_graph(Dag(3, {{0, 1}, {1, 2}}));
  CHECK(chain.size() == 4);
  CHECK_FALSE(chain.contains(0, 2));
  const EdgeSet diamond = moral_graph(Dag(4, {{0, 1}, {0, 2}, {1, 3}, {2, 3}}));
  CHECK(diamond.size() == 10);
  CHECK(diamond.contains(1, 2));
  CHECK_FALSE(diamond.contains(0, 3));
}

TEST_CASE("property: moral graph is symmetric and contains the skeleton") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const Dag d = random_dag(8, 10, seed);
    const EdgeSet mg = moral_graph(d);
    CHECK(mg.is_symmetric());
    for (const Edge& e : d.edges()) {
      CHECK(mg.contains(e.from, e.to));
      CHECK(mg.contains(e.to, e.from));
    }
  }
}

TEST_CASE("substreams do not depend on creation order") {
  Rng a = make_substream(5, streams::kNoise, 2);
  Rng b = make_substream(5, streams::kNoise, 3);
  Rng a2 = make_substream(5, streams::kNoise, 2);
  CHECK(a() == a2());
  CHECK_FALSE(b() == make_substream(5, streams::kNoise, 2)());
}

TEST_CASE("edge list and dataset files round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "micpdag_test_model_io";
  std::filesystem::create_directories(dir);
  const Dag d = random_dag(6, 7, 3);
  io::write_dag(dir / "g.txt", d);
  CHECK(io::read_dag(dir / "g.txt") == d);

  const Dataset data = generate_data(random_sem(d, {0.6}, ValueSet{{1.0}}, 3), 30, GaussianNoise{}, 3);
  io::write_dataset(dir / "x.csv", data);
  CHECK(io::read_dataset(dir / "x.csv").x() == data.x());

  const SemParameters sem = random_sem(d, {0.6, -0.8}, ValueSet{{0.5, 1.5}}, 4);
  const SemParameters back = io::sem_from_json(io::to_json(sem));
  CHECK(back.b == sem.b);
  CHECK(back.omega == sem.omega);
  std::filesystem::remove_all(dir);
}

TEST_CASE("readers report line numbers") {
  std::istringstream bad_edges("3\n0 1\n1 x\n");
  try {
    (void)io::read_edge_list(bad_edges, "g.txt");
    FAIL("expected ParseError");
  } catch (const io::ParseError& e) {
    CHECK(std::string(e.what()).find("g.txt:3") != std::string::npos);
  }
  std::istringstream loop("2\n1 1\n");
  CHECK_THROWS_AS(io::read_edge_list(loop, "h.txt"), io::ParseError);
  std::istringstream ragged("1,2\n3\n");
  CHECK_THROWS_AS(io::read_dataset(ragged, "x.csv"), io::ParseError);
  CHECK_THROWS_AS(io::read_dataset(std::filesystem::path("/nonexistent/x.csv")), io::IoError);
}
