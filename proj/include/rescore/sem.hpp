#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "rescore/graphs.hpp"

namespace rescore {

/// Linear SEM coefficients; entry (j, i) multiplies X_j in the equation for X_i.
using WeightedAdjacency = Eigen::MatrixXd;

struct NoiseGroup {
  double fraction = 1.0;
  Eigen::VectorXd sigma;
};

/// Gaussian noise scales, with optional row groups and pure-noise corruption.
struct NoiseSpec {
  Eigen::VectorXd sigma;
  std::vector<NoiseGroup> groups;  // empty: every row uses `sigma`
  double corrupt_fraction = 0.0;
  int corrupt_graph_k = 2;  // ER multiplier of the independent corrupting SCM

  void validate(int d) const;
};

/// Observations plus optional per-row group and corruption labels.
struct DataMatrix {
  Eigen::MatrixXd values;
  std::vector<int> group;
  std::vector<std::uint8_t> corrupted;

  [[nodiscard]] Eigen::Index rows() const noexcept { return values.rows(); }
  [[nodiscard]] Eigen::Index cols() const noexcept { return values.cols(); }
  void validate() const;
};

enum class NoiseKind { homogeneous, heterogeneous, corrupted };

struct NoiseParams {
  double p = 0.0;  // corrupted fraction
  int corrupt_graph_k = 2;
};

/// homogeneous: sigma = 1. heterogeneous: a 10% group with the first ceil(d/2)
/// variables at sigma 1 and the rest at 0.1, and a 90% group with the halves
/// swapped. corrupted: homogeneous plus corrupt_fraction = p.
[[nodiscard]] NoiseSpec make_noise_spec(NoiseKind kind, int d, const NoiseParams& params = {});

/// Draws each edge coefficient uniformly from (-high, -low) U (low, high).
[[nodiscard]] WeightedAdjacency assign_linear_weights(const Dag& dag, double low, double high,
                                                      std::uint64_t seed);
[[nodiscard]] inline WeightedAdjacency assign_linear_weights(const Dag& dag, std::uint64_t seed) {
  return assign_linear_weights(dag, 0.5, 2.0, seed);
}

/// Ancestral sampling of X = X B + N.
[[nodiscard]] DataMatrix simulate_linear_sem(const WeightedAdjacency& b, int n, const NoiseSpec& noise,
                                             std::uint64_t seed);

struct GpOptions {
  int max_rows = 4000;
  double initial_jitter = 1e-6;
  double max_jitter = 1e-2;
};

/// Additive-noise SEM whose mechanisms are draws from a unit-length-scale RBF
/// Gaussian process over the parent values.
[[nodiscard]] DataMatrix simulate_gp_sem(const Dag& dag, int n, const NoiseSpec& noise, std::uint64_t seed,
                                         const GpOptions& options = {});

/// Zero mean, unit variance per column (population variance).
void standardize_columns(DataMatrix& data);

}  // namespace rescore
