#pragma once

#include <functional>

#include <Eigen/Core>

namespace rescore::optim {

/// Returns f(x) and writes the gradient. +inf rejects the point (line search backs off).
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

struct BoxLbfgsOptions {
  int memory = 10;
  int max_iterations = 15000;
  double ftol = 2.220446049250313e-09;  // relative reduction stop
  double pgtol = 1e-5;                  // projected-gradient infinity norm stop
  int max_line_search = 40;
};

struct BoxLbfgsResult {
  Eigen::VectorXd x;
  double f = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
};

/// Limited-memory quasi-Newton over the box lower <= x <= upper. Variables pinned at a
/// bound with an outward gradient are frozen for the step; the remaining ones follow
/// the two-loop direction along a projected backtracking search.
[[nodiscard]] BoxLbfgsResult minimize_box_lbfgs(const Objective& objective, Eigen::VectorXd x0,
                                                const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                                                const BoxLbfgsOptions& options = {});

/// Adam moments for a flat parameter vector.
class Adam {
 public:
  Adam(Eigen::Index size, double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  /// x -= step(grad); pass a negated gradient to ascend.
  void step(Eigen::VectorXd& x, const Eigen::VectorXd& grad);
  void set_learning_rate(double lr) noexcept { lr_ = lr; }
  [[nodiscard]] double learning_rate() const noexcept { return lr_; }

 private:
  Eigen::VectorXd m_;
  Eigen::VectorXd v_;
  double lr_;
  double beta1_;
  double beta2_;
  double eps_;
  long t_ = 0;
};

}  // namespace rescore::optim
