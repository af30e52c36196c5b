#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rescore/errors.hpp"
#include "rescore/graphs.hpp"
#include "rescore/sample_weights.hpp"
#include "rescore/scoring.hpp"
#include "rescore/sem.hpp"

namespace rescore {

enum class BackboneKind { linear_notears, linear_nll, mlp_notears };

/// Noise-variance treatment of the Gaussian likelihood backbone.
///   fixed:     sigma taken from LearnerConfig::sigma (all ones when empty)
///   equal:     one shared variance profiled out
///   non_equal: one variance per variable profiled out
enum class NllVariance { fixed, equal, non_equal };

struct LearnerConfig {
  double lambda = 0.1;
  AcyclicityKind acyclicity = AcyclicityKind::expm;
  double rho_init = 1.0;
  double rho_multiplier = 10.0;
  double rho_max = 1e16;
  double alpha_init = 0.0;
  double h_tol = 1e-8;
  int max_outer = 100;
  int inner_max_iterations = 15000;  // quasi-Newton iterations per inner solve
  double w_threshold = 0.3;
  std::vector<int> hidden_units{10, 10};

  // Likelihood backbone.
  double dag_penalty = 5.0;
  NllVariance variance = NllVariance::non_equal;
  Eigen::VectorXd sigma;
  bool equal_variance_warm_start = true;

  // MLP backbone.
  double l2 = 0.01;  // ridge on every layer weight
  int max_dims = 50;
  std::uint64_t seed = 0;

  void validate() const;

  /// Defaults tuned per backbone (sparsity level differs by loss scale).
  [[nodiscard]] static LearnerConfig defaults_for(BackboneKind kind);
};

struct FitDiagnostics {
  double h = 0.0;
  int outer_iterations = 0;
  double rho = 0.0;
  double alpha = 0.0;
  std::vector<double> objective_trace;
  bool converged = false;
  Eigen::VectorXd final_weights;  // set by the reweighting driver
};

struct FitResult {
  Eigen::MatrixXd continuous;  // B for linear backbones, A(theta) for the MLP
  Dag graph;
  Eigen::VectorXd losses;  // per-sample, recomputed at the returned parameters
  FitDiagnostics diagnostics;
};

/// Thrown when a fit diverges or a constrained backbone ends with h above tolerance.
class FitError : public NumericError {
 public:
  FitError(const std::string& what, FitDiagnostics diagnostics)
      : NumericError(what), diagnostics_(std::move(diagnostics)) {}
  [[nodiscard]] const FitDiagnostics& diagnostics() const noexcept { return diagnostics_; }

 private:
  FitDiagnostics diagnostics_;
};

/// X^T diag(w) X.
[[nodiscard]] Eigen::MatrixXd weighted_gram(const Eigen::MatrixXd& x, const Eigen::VectorXd& w);

/// Unpenalized weighted least squares, column by column: x_j regressed on the columns
/// marked in `support` (every other column when null). Column j of the result holds
/// beta_j; rows outside the regressor set are zero.
[[nodiscard]] Eigen::MatrixXd weighted_regression(const Eigen::MatrixXd& x, const Eigen::VectorXd& w,
                                                  const AdjacencyMatrix* support = nullptr);

/// Keeps |m(k, j)| > threshold, then drops the weakest surviving edge until acyclic.
[[nodiscard]] Dag threshold_to_dag(const Eigen::MatrixXd& m, double threshold);

// ---------------------------------------------------------------------------
// Objectives. Linear parameters are [B+; B-] stacked column-major, both >= 0,
// so the L1 penalty is linear in the parameters.

[[nodiscard]] Eigen::MatrixXd split_to_matrix(const Eigen::VectorXd& params, Eigen::Index d);

/// sum_i w_i 0.5 ||x_i - x_i B||^2 + lambda |B|_1 + alpha h(B) + rho/2 h(B)^2, evaluated
/// through the weighted Gram matrix C = X^T W X.
class LinearLeastSquaresObjective {
 public:
  LinearLeastSquaresObjective(Eigen::MatrixXd gram, double lambda, AcyclicityKind kind, double alpha, double rho);
  double operator()(const Eigen::VectorXd& params, Eigen::VectorXd& grad) const;
  [[nodiscard]] Eigen::Index dims() const noexcept { return gram_.rows(); }

 private:
  Eigen::MatrixXd gram_;
  double lambda_;
  AcyclicityKind kind_;
  double alpha_;
  double rho_;
};

/// Weighted Gaussian negative log-likelihood - log det(I - B) + lambda |B|_1 + mu h(B).
/// Returns +inf where det(I - B) <= 0.
class LinearNllObjective {
 public:
  LinearNllObjective(Eigen::MatrixXd gram, double weight_total, double lambda, double dag_penalty,
                     AcyclicityKind kind, NllVariance variance, Eigen::VectorXd sigma);
  double operator()(const Eigen::VectorXd& params, Eigen::VectorXd& grad) const;

  /// Noise scales implied at B (profiled or fixed).
  [[nodiscard]] Eigen::VectorXd noise_scales(const Eigen::MatrixXd& b) const;

 private:
  Eigen::MatrixXd gram_;
  double weight_total_;
  double lambda_;
  double dag_penalty_;
  AcyclicityKind kind_;
  NllVariance variance_;
  Eigen::VectorXd sigma_;
};

struct MlpLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;
};

/// One rectifier network per variable. The first layer of network j never sees input j.
class MlpModel {
 public:
  MlpModel(int d, std::vector<int> hidden_units, std::uint64_t seed);

  [[nodiscard]] int dims() const noexcept { return d_; }
  [[nodiscard]] const std::vector<int>& hidden_units() const noexcept { return hidden_; }
  [[nodiscard]] Eigen::Index parameter_count() const noexcept { return count_; }
  [[nodiscard]] Eigen::VectorXd pack() const;
  /// Loads a flat vector; the self-input column of each first layer is forced to 0.
  void unpack(const Eigen::VectorXd& params);

  [[nodiscard]] const std::vector<MlpLayer>& network(int j) const { return nets_[static_cast<size_t>(j)]; }
  [[nodiscard]] std::vector<MlpLayer>& network(int j) { return nets_[static_cast<size_t>(j)]; }

  /// n x d matrix of per-variable predictions.
  [[nodiscard]] Eigen::MatrixXd predict(const Eigen::MatrixXd& x) const;
  /// A(theta)(k, j) = || first-layer weights of network j on input k ||_2.
  [[nodiscard]] Eigen::MatrixXd adjacency() const;

 private:
  int d_;
  std::vector<int> hidden_;
  std::vector<std::vector<MlpLayer>> nets_;
  Eigen::Index count_ = 0;
};

/// sum_i w_i sum_j 0.5 (x_ij - MLP_j(x_i))^2 + lambda sum A + 0.5 l2 ||W||^2
///   + alpha h(A) + rho/2 h(A)^2, with W every layer's weight matrix (biases excluded).
class MlpObjective {
 public:
  MlpObjective(const Eigen::MatrixXd& x, Eigen::VectorXd weights, const MlpModel& shape, double lambda, double l2,
               AcyclicityKind kind, double alpha, double rho);
  double operator()(const Eigen::VectorXd& params, Eigen::VectorXd& grad) const;

 private:
  const Eigen::MatrixXd& x_;
  Eigen::VectorXd weights_;
  mutable MlpModel model_;
  double lambda_;
  double l2_;
  AcyclicityKind kind_;
  double alpha_;
  double rho_;
  // Reused buffers: pre-activations and activations per layer, and layer gradients per network.
  mutable std::vector<Eigen::MatrixXd> pre_;
  mutable std::vector<Eigen::MatrixXd> act_;
  mutable Eigen::MatrixXd delta_;
  mutable Eigen::MatrixXd delta_prev_;
  mutable std::vector<std::vector<MlpLayer>> grads_;
};

[[nodiscard]] Eigen::VectorXd per_sample_losses(const MlpModel& model, const DataMatrix& x, const ScoreConfig& cfg);

// ---------------------------------------------------------------------------

/// Stateful learner advanced one outer epoch at a time with the current sample
/// weights. For the constrained backbones an epoch is one dual update of the
/// augmented Lagrangian; for the likelihood backbone it is one full solve.
class Backbone {
 public:
  virtual ~Backbone() = default;
  virtual void outer_step(const SampleWeights& w) = 0;
  [[nodiscard]] virtual bool finished() const = 0;
  [[nodiscard]] virtual Eigen::VectorXd sample_losses() const = 0;
  [[nodiscard]] virtual FitResult result() const = 0;
  /// Whether the result must satisfy h < h_tol.
  [[nodiscard]] virtual bool constrained() const = 0;
};

[[nodiscard]] std::unique_ptr<Backbone> make_backbone(BackboneKind kind, const DataMatrix& x, const LearnerConfig& cfg);

[[nodiscard]] FitResult fit_backbone(BackboneKind kind, const DataMatrix& x, const SampleWeights& w,
                                     const LearnerConfig& cfg);
[[nodiscard]] FitResult fit_linear_notears(const DataMatrix& x, const SampleWeights& w, const LearnerConfig& cfg);
[[nodiscard]] FitResult fit_linear_nll(const DataMatrix& x, const SampleWeights& w, const LearnerConfig& cfg);
[[nodiscard]] FitResult fit_mlp_notears(const DataMatrix& x, const SampleWeights& w, const LearnerConfig& cfg);

/// Throws FitError when a constrained backbone ended above tolerance.
void require_acyclic_solution(const Backbone& backbone, const FitResult& result, double h_tol);

}  // namespace rescore
