#pragma once

#include <vector>

#include "micpdag/model.hpp"
#include "micpdag/numerics.hpp"

namespace micpdag::kernels {

/// Every data-parallel kernel has a serial reference path kept for testing and
/// benchmarking. Both paths produce bit-identical results: parallel loops only
/// partition independent outputs, and reductions run serially afterwards.
enum class Exec { serial, parallel };

/// Caps the OpenMP worker count; 0 restores the runtime default.
void set_worker_count(int workers);
int worker_count();

SymmetricMatrix sample_covariance(const Dataset& data, Exec exec);

/// Per-DAG closed-form objective (scoring::dag_mle) for each DAG in `dags`.
/// Entries whose parent blocks are singular come back as +infinity.
std::vector<double> score_dags(const SymmetricMatrix& s, const std::vector<Dag>& dags, double lambda_sq, Exec exec);

}  // namespace micpdag::kernels
