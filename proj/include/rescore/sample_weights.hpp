#pragma once

#include <span>

#include <Eigen/Core>

namespace rescore {

/// Feasible sample weights: tau/n <= w_i <= 1/(tau n) and sum(w) == 1.
class SampleWeights {
 public:
  static constexpr double kBoundTolerance = 1e-12;
  static constexpr double kSumTolerance = 1e-9;

  /// Validates against C(tau); throws InvalidParameter when infeasible.
  SampleWeights(Eigen::VectorXd values, double tau);

  /// Every entry exactly 1.0 / n.
  [[nodiscard]] static SampleWeights uniform(Eigen::Index n, double tau = 1.0);

  [[nodiscard]] Eigen::Index size() const noexcept { return values_.size(); }
  [[nodiscard]] double tau() const noexcept { return tau_; }
  [[nodiscard]] const Eigen::VectorXd& values() const noexcept { return values_; }
  [[nodiscard]] double operator[](Eigen::Index i) const { return values_[i]; }
  [[nodiscard]] double floor() const noexcept { return tau_ / static_cast<double>(size()); }
  [[nodiscard]] double cap() const noexcept { return 1.0 / (tau_ * static_cast<double>(size())); }

 private:
  Eigen::VectorXd values_;
  double tau_;
};

}  // namespace rescore
