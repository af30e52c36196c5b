#include "rescore/optim.hpp"

#include <cmath>
#include <deque>
#include <limits>

#include "rescore/errors.hpp"

namespace rescore::optim {

namespace {

Eigen::VectorXd project(const Eigen::VectorXd& x, const Eigen::VectorXd& lower, const Eigen::VectorXd& upper) {
  return x.cwiseMax(lower).cwiseMin(upper);
}

double projected_gradient_norm(const Eigen::VectorXd& x, const Eigen::VectorXd& g, const Eigen::VectorXd& lower,
                               const Eigen::VectorXd& upper) {
  return (project(x - g, lower, upper) - x).cwiseAbs().maxCoeff();
}

struct CurvaturePair {
  Eigen::VectorXd s;
  Eigen::VectorXd y;
  double rho;
};

}  // namespace

BoxLbfgsResult minimize_box_lbfgs(const Objective& objective, Eigen::VectorXd x0, const Eigen::VectorXd& lower,
                                  const Eigen::VectorXd& upper, const BoxLbfgsOptions& options) {
  const Eigen::Index n = x0.size();
  if (lower.size() != n || upper.size() != n) throw InvalidParameter("bound vectors differ from x0 length");
  if ((lower.array() > upper.array()).any()) throw InvalidParameter("lower bound exceeds upper bound");

  BoxLbfgsResult res;
  res.x = project(x0, lower, upper);
  Eigen::VectorXd g(n);
  res.f = objective(res.x, g);
  res.evaluations = 1;
  if (!std::isfinite(res.f) || !g.allFinite()) throw NumericError("objective is not finite at the starting point");

  std::deque<CurvaturePair> history;
  Eigen::VectorXd alpha_buf(options.memory);

  for (res.iterations = 0; res.iterations < options.max_iterations; ++res.iterations) {
    if (projected_gradient_norm(res.x, g, lower, upper) <= options.pgtol) {
      res.converged = true;
      break;
    }
    // Free set: not pinned at a bound by an outward-pointing gradient.
    Eigen::Array<bool, Eigen::Dynamic, 1> free(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const bool at_lower = res.x[i] <= lower[i] && g[i] > 0.0;
      const bool at_upper = res.x[i] >= upper[i] && g[i] < 0.0;
      free[i] = !(at_lower || at_upper) && lower[i] < upper[i];
    }
    Eigen::VectorXd q = free.select(g, 0.0);

    const int m = static_cast<int>(history.size());
    for (int k = m - 1; k >= 0; --k) {
      const auto& p = history[static_cast<size_t>(k)];
      alpha_buf[k] = p.rho * p.s.dot(q);
      q -= alpha_buf[k] * p.y;
    }
    if (m > 0) {
      const auto& last = history.back();
      q *= last.s.dot(last.y) / last.y.squaredNorm();
    }
    for (int k = 0; k < m; ++k) {
      const auto& p = history[static_cast<size_t>(k)];
      const double beta = p.rho * p.y.dot(q);
      q += (alpha_buf[k] - beta) * p.s;
    }
    Eigen::VectorXd direction = -free.select(q, 0.0);
    if (direction.dot(g) >= 0.0) {
      history.clear();
      direction = -free.select(g, 0.0);
    }

    double step = 1.0;
    if (history.empty()) {
      const double dn = direction.cwiseAbs().maxCoeff();
      if (dn > 0.0) step = std::min(1.0, 1.0 / dn);
    }

    Eigen::VectorXd x_new;
    Eigen::VectorXd g_new(n);
    double f_new = std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int ls = 0; ls < options.max_line_search; ++ls) {
      x_new = project(res.x + step * direction, lower, upper);
      f_new = objective(x_new, g_new);
      ++res.evaluations;
      if (std::isfinite(f_new) && g_new.allFinite() && f_new <= res.f + 1e-4 * g.dot(x_new - res.x)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (!history.empty()) {
        history.clear();
        continue;
      }
      break;  // no descent possible along the projected gradient
    }

    const Eigen::VectorXd s = x_new - res.x;
    const Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-10 * y.squaredNorm() && sy > 0.0) {
      if (static_cast<int>(history.size()) == options.memory) history.pop_front();
      history.push_back({s, y, 1.0 / sy});
    }

    const double f_old = res.f;
    res.x = std::move(x_new);
    res.f = f_new;
    g = g_new;
    if ((f_old - res.f) <= options.ftol * std::max({std::abs(f_old), std::abs(res.f), 1.0})) {
      res.converged = true;
      ++res.iterations;
      break;
    }
  }
  return res;
}

Adam::Adam(Eigen::Index size, double learning_rate, double beta1, double beta2, double eps)
    : m_(Eigen::VectorXd::Zero(size)),
      v_(Eigen::VectorXd::Zero(size)),
      lr_(learning_rate),
      beta1_(beta1),
      beta2_(beta2),
      eps_(eps) {}

void Adam::step(Eigen::VectorXd& x, const Eigen::VectorXd& grad) {
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  x.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

}  // namespace rescore::optim
