#pragma once

#include <span>

#include <Eigen/Core>

#include "rescore/sample_weights.hpp"
#include "rescore/sem.hpp"

namespace rescore {

enum class LossKind { least_squares, gaussian_nll };

struct ScoreConfig {
  LossKind loss = LossKind::least_squares;
  double lambda = 0.0;
  Eigen::VectorXd sigma;  // gaussian_nll scales; empty means all ones
};

/// Per-row losses from a residual matrix R = X - f(X).
///   least_squares: l_i = 0.5 * ||r_i||^2
///   gaussian_nll:  l_i = sum_j log(sigma_j sqrt(2 pi)) + r_ij^2 / (2 sigma_j^2)
[[nodiscard]] Eigen::VectorXd losses_from_residuals(const Eigen::MatrixXd& residuals, const ScoreConfig& cfg);

/// Linear model f(x_i) = x_i B.
[[nodiscard]] Eigen::VectorXd per_sample_losses(const WeightedAdjacency& b, const DataMatrix& x,
                                                const ScoreConfig& cfg);

/// sum_i w_i l_i + sparsity, summed index-ascending with Neumaier compensation.
[[nodiscard]] double weighted_score(std::span<const double> losses, const SampleWeights& w, double sparsity);
[[nodiscard]] double weighted_score(const Eigen::VectorXd& losses, const SampleWeights& w, double sparsity);

/// The unweighted score: every loss scaled by 1/n through the same summation.
[[nodiscard]] double average_score(const Eigen::VectorXd& losses, double sparsity);

/// e^A by scaling and squaring around a [13/13] Pade core (degree chosen by norm).
[[nodiscard]] Eigen::MatrixXd matrix_exp(const Eigen::MatrixXd& a);

struct AcyclicityValue {
  double value = 0.0;
  Eigen::MatrixXd gradient;  // d value / d A
};

enum class AcyclicityKind { expm, poly };

/// tr(e^{A o A}) - d with gradient (e^{A o A})^T o 2A.
[[nodiscard]] AcyclicityValue h_expm(const Eigen::MatrixXd& a);

/// tr((I + c A o A)^d) - d; c <= 0 selects the default 1/d.
[[nodiscard]] AcyclicityValue h_poly(const Eigen::MatrixXd& a, double c = 0.0);

[[nodiscard]] AcyclicityValue acyclicity(AcyclicityKind kind, const Eigen::MatrixXd& a);

}  // namespace rescore
