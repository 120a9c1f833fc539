#include "micpdag/kernels.hpp"

#include <omp.h>

#include <limits>

#include "micpdag/scoring.hpp"

namespace micpdag::kernels {

namespace {
int g_default_workers = 0;
}

void set_worker_count(int workers) {
  if (g_default_workers == 0) g_default_workers = omp_get_max_threads();
  omp_set_num_threads(workers > 0 ? workers : g_default_workers);
}

int worker_count() { return omp_get_max_threads(); }

SymmetricMatrix sample_covariance(const Dataset& data, Exec exec) {
  const std::size_t n = data.n();
  const std::size_t m = data.m();
  const Matrix& x = data.x();
  Matrix cov(m, m);
  const double inv_n = 1.0 / static_cast<double>(n);

  auto entry = [&](std::size_t a, std::size_t b) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x(i, a) * x(i, b);
    return s * inv_n;
  };

  if (exec == Exec::serial) {
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t b = a; b < m; ++b) cov(a, b) = cov(b, a) = entry(a, b);
  } else {
    const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t ai = 0; ai < rows; ++ai) {
      const auto a = static_cast<std::size_t>(ai);
      for (std::size_t b = a; b < m; ++b) cov(a, b) = cov(b, a) = entry(a, b);
    }
  }
  return SymmetricMatrix(std::move(cov));
}

std::vector<double> score_dags(const SymmetricMatrix& s, const std::vector<Dag>& dags, double lambda_sq, Exec exec) {
  std::vector<double> out(dags.size(), std::numeric_limits<double>::infinity());
  auto score_one = [&](std::size_t i) {
    try {
      out[i] = dag_mle(s, dags[i], lambda_sq).objective;
    } catch (const SingularParentBlock&) {
      out[i] = std::numeric_limits<double>::infinity();
    }
  };
  if (exec == Exec::serial) {
    for (std::size_t i = 0; i < dags.size(); ++i) score_one(i);
  } else {
    const auto count = static_cast<std::ptrdiff_t>(dags.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < count; ++i) score_one(static_cast<std::size_t>(i));
  }
  return out;
}

}  // namespace micpdag::kernels
