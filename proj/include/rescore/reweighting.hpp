#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "rescore/learners.hpp"
#include "rescore/optim.hpp"
#include "rescore/sample_weights.hpp"
#include "rescore/sem.hpp"

namespace rescore {

enum class InnerSolver { exact, parametric };

struct RescoreConfig {
  double tau = 0.9;
  InnerSolver inner = InnerSolver::exact;
  int k_outer = 0;  // 0: run until the backbone finishes
  int k_inner = 100;
  int k_reweight = 1;
  std::vector<int> hidden_units{10};
  double temperature = 1.0;
  double learning_rate = 1e-2;
  bool loss_feature = false;  // feed (x_i, l_i) to the scorer instead of x_i
  std::uint64_t seed = 0;

  void validate() const;
};

/// Exact maximizer of sum_i w_i l_i over C(tau): caps go to the largest losses, floors
/// to the smallest, at most one weight in between. Tied losses share their block's
/// average weight.
[[nodiscard]] SampleWeights inner_weights_exact(const Eigen::VectorXd& losses, double tau);

/// Euclidean projection onto {lo <= w_i <= hi, sum w = 1} by bisection on the water level.
[[nodiscard]] Eigen::VectorXd project_capped_simplex(const Eigen::VectorXd& v, double lo, double hi);

struct ClipResult {
  Eigen::VectorXd weights;
  Eigen::Array<bool, Eigen::Dynamic, 1> free;  // entries equal to scale * p
  double scale = 1.0;
  bool projected = false;  // iteration cap hit, water-filling used
};

/// Clamps p to [tau/n, 1/(tau n)] and rescales the unclamped mass, repeating until
/// feasible; after 50 rounds falls back to project_capped_simplex.
[[nodiscard]] ClipResult clip_renormalize(const Eigen::VectorXd& p, double tau);

/// Feed-forward scorer g(x_i) whose softmax gives sample weights. The output layer
/// starts at zero so the first weights are uniform.
class ReweightModel {
 public:
  ReweightModel(int input_dim, std::vector<int> hidden_units, std::uint64_t seed, double learning_rate);

  [[nodiscard]] int input_dim() const noexcept { return input_dim_; }
  [[nodiscard]] const std::vector<int>& hidden_units() const noexcept { return hidden_; }
  [[nodiscard]] Eigen::VectorXd logits(const Eigen::MatrixXd& features) const;

  /// Ascent step on sum_i w_i l_i; returns the weights evaluated before the step.
  ClipResult ascend(const Eigen::MatrixXd& features, const Eigen::VectorXd& losses, double tau, double temperature);

 private:
  int input_dim_;
  std::vector<int> hidden_;
  std::vector<MlpLayer> layers_;
  Eigen::Index count_ = 0;
  optim::Adam adam_;
};

[[nodiscard]] Eigen::MatrixXd scorer_features(const DataMatrix& x, const Eigen::VectorXd& losses, bool loss_feature);

/// K_inner ascent steps from `state`; returns the weights of the updated scorer.
[[nodiscard]] std::pair<SampleWeights, ReweightModel> inner_weights_parametric(const DataMatrix& x,
                                                                              const Eigen::VectorXd& losses,
                                                                              const RescoreConfig& cfg,
                                                                              ReweightModel state);

[[nodiscard]] ReweightModel make_reweight_model(const DataMatrix& x, const RescoreConfig& cfg);

/// Bilevel alternation: each outer epoch advances the backbone under the current
/// weights, then (from epoch k_reweight on) re-solves the inner maximization on the
/// per-sample losses. The final weights land in diagnostics.final_weights.
[[nodiscard]] FitResult fit_rescore(BackboneKind backbone, const DataMatrix& x, const LearnerConfig& lcfg,
                                    const RescoreConfig& rcfg);

}  // namespace rescore
