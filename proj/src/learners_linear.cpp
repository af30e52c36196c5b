#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/LU>

#include "rescore/learners.hpp"
#include "rescore/optim.hpp"

namespace rescore {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::VectorXd stack_split_gradient(const Eigen::MatrixXd& grad_b, double lambda) {
  const Eigen::Index dd = grad_b.size();
  Eigen::VectorXd g(2 * dd);
  g.head(dd) = Eigen::Map<const Eigen::VectorXd>(grad_b.data(), dd).array() + lambda;
  g.tail(dd) = (-Eigen::Map<const Eigen::VectorXd>(grad_b.data(), dd)).array() + lambda;
  return g;
}

// Diagonal entries are pinned to zero through their upper bound.
void split_bounds(Eigen::Index d, Eigen::VectorXd& lower, Eigen::VectorXd& upper) {
  lower = Eigen::VectorXd::Zero(2 * d * d);
  upper = Eigen::VectorXd::Constant(2 * d * d, kInf);
  for (Eigen::Index half = 0; half < 2; ++half) {
    for (Eigen::Index j = 0; j < d; ++j) upper[half * d * d + j * d + j] = 0.0;
  }
}

optim::BoxLbfgsOptions solver_options(const LearnerConfig& cfg) {
  optim::BoxLbfgsOptions opts;
  opts.max_iterations = cfg.inner_max_iterations;
  return opts;
}

FitDiagnostics base_diagnostics(double h, int outer, double rho, double alpha, std::vector<double> trace,
                                bool converged) {
  FitDiagnostics diag;
  diag.h = h;
  diag.outer_iterations = outer;
  diag.rho = rho;
  diag.alpha = alpha;
  diag.objective_trace = std::move(trace);
  diag.converged = converged;
  return diag;
}

class LinearNotearsBackbone final : public Backbone {
 public:
  LinearNotearsBackbone(const DataMatrix& x, const LearnerConfig& cfg)
      : x_(x), cfg_(cfg), d_(x.cols()), rho_(cfg.rho_init), alpha_(cfg.alpha_init) {
    params_ = Eigen::VectorXd::Zero(2 * d_ * d_);
    split_bounds(d_, lower_, upper_);
  }

  void outer_step(const SampleWeights& w) override {
    if (done_) return;
    const Eigen::MatrixXd gram = weighted_gram(x_.values, w.values());
    Eigen::VectorXd candidate = params_;
    double h_new = h_;
    double f_new = kInf;
    while (rho_ < cfg_.rho_max) {
      const LinearLeastSquaresObjective objective(gram, cfg_.lambda, cfg_.acyclicity, alpha_, rho_);
      const auto solved = optim::minimize_box_lbfgs(objective, params_, lower_, upper_, solver_options(cfg_));
      if (!std::isfinite(solved.f)) {
        throw FitError("least-squares objective diverged", diagnostics(false));
      }
      candidate = solved.x;
      f_new = solved.f;
      h_new = acyclicity(cfg_.acyclicity, split_to_matrix(candidate, d_)).value;
      if (h_new > 0.25 * h_) {
        rho_ *= cfg_.rho_multiplier;
      } else {
        break;
      }
    }
    params_ = std::move(candidate);
    h_ = h_new;
    alpha_ += rho_ * h_;
    trace_.push_back(f_new);
    ++outer_;
    done_ = h_ <= cfg_.h_tol || rho_ >= cfg_.rho_max || outer_ >= cfg_.max_outer;
  }

  [[nodiscard]] bool finished() const override { return done_; }
  [[nodiscard]] bool constrained() const override { return true; }

  [[nodiscard]] Eigen::VectorXd sample_losses() const override {
    return per_sample_losses(split_to_matrix(params_, d_), x_, ScoreConfig{});
  }

  [[nodiscard]] FitResult result() const override {
    Eigen::MatrixXd b = split_to_matrix(params_, d_);
    Dag graph = threshold_to_dag(b, cfg_.w_threshold);
    return {std::move(b), std::move(graph), sample_losses(), diagnostics(h_ < cfg_.h_tol)};
  }

 private:
  [[nodiscard]] FitDiagnostics diagnostics(bool converged) const {
    return base_diagnostics(h_, outer_, rho_, alpha_, trace_, converged);
  }

  const DataMatrix& x_;
  LearnerConfig cfg_;
  Eigen::Index d_;
  Eigen::VectorXd params_;
  Eigen::VectorXd lower_;
  Eigen::VectorXd upper_;
  double rho_;
  double alpha_;
  double h_ = kInf;
  int outer_ = 0;
  bool done_ = false;
  std::vector<double> trace_;
};

class LinearNllBackbone final : public Backbone {
 public:
  LinearNllBackbone(const DataMatrix& x, const LearnerConfig& cfg) : x_(x), cfg_(cfg), d_(x.cols()) {
    params_ = Eigen::VectorXd::Zero(2 * d_ * d_);
    split_bounds(d_, lower_, upper_);
    warm_epochs_ = (cfg_.variance == NllVariance::non_equal && cfg_.equal_variance_warm_start) ? 1 : 0;
  }

  void outer_step(const SampleWeights& w) override {
    if (done_) return;
    const bool warm = epoch_ < warm_epochs_;
    const LinearNllObjective objective = make_objective(w, warm ? NllVariance::equal : cfg_.variance);
    const auto solved = optim::minimize_box_lbfgs(objective, params_, lower_, upper_, solver_options(cfg_));
    if (!std::isfinite(solved.f)) throw FitError("likelihood objective diverged", diagnostics());
    params_ = solved.x;
    trace_.push_back(solved.f);
    ++epoch_;
    last_sigma_ = objective.noise_scales(split_to_matrix(params_, d_));
    if (!warm) {
      const bool settled = has_previous_ && std::abs(previous_f_ - solved.f) <= 1e-9 * std::max(1.0, std::abs(solved.f));
      previous_f_ = solved.f;
      has_previous_ = true;
      done_ = settled;
    }
    done_ = done_ || epoch_ >= cfg_.max_outer + warm_epochs_;
  }

  [[nodiscard]] bool finished() const override { return done_; }
  [[nodiscard]] bool constrained() const override { return false; }

  [[nodiscard]] Eigen::VectorXd sample_losses() const override {
    ScoreConfig score;
    score.loss = LossKind::gaussian_nll;
    score.sigma = last_sigma_.size() > 0 ? last_sigma_ : Eigen::VectorXd::Ones(d_);
    return per_sample_losses(split_to_matrix(params_, d_), x_, score);
  }

  [[nodiscard]] FitResult result() const override {
    Eigen::MatrixXd b = split_to_matrix(params_, d_);
    Dag graph = threshold_to_dag(b, cfg_.w_threshold);
    return {std::move(b), std::move(graph), sample_losses(), diagnostics()};
  }

 private:
  [[nodiscard]] LinearNllObjective make_objective(const SampleWeights& w, NllVariance variance) const {
    Eigen::VectorXd sigma = cfg_.sigma.size() > 0 ? cfg_.sigma : Eigen::VectorXd::Ones(d_);
    return LinearNllObjective(weighted_gram(x_.values, w.values()), w.values().sum(), cfg_.lambda, cfg_.dag_penalty,
                              cfg_.acyclicity, variance, std::move(sigma));
  }

  [[nodiscard]] FitDiagnostics diagnostics() const {
    const double h = acyclicity(cfg_.acyclicity, split_to_matrix(params_, d_)).value;
    return base_diagnostics(h, epoch_, 0.0, 0.0, trace_, done_);
  }

  const DataMatrix& x_;
  LearnerConfig cfg_;
  Eigen::Index d_;
  Eigen::VectorXd params_;
  Eigen::VectorXd lower_;
  Eigen::VectorXd upper_;
  Eigen::VectorXd last_sigma_;
  int warm_epochs_ = 0;
  int epoch_ = 0;
  double previous_f_ = 0.0;
  bool has_previous_ = false;
  bool done_ = false;
  std::vector<double> trace_;
};

}  // namespace

Eigen::MatrixXd split_to_matrix(const Eigen::VectorXd& params, Eigen::Index d) {
  if (params.size() != 2 * d * d) throw InvalidParameter("split parameter vector has the wrong length");
  return Eigen::Map<const Eigen::MatrixXd>(params.data(), d, d) -
         Eigen::Map<const Eigen::MatrixXd>(params.data() + d * d, d, d);
}

LinearLeastSquaresObjective::LinearLeastSquaresObjective(Eigen::MatrixXd gram, double lambda, AcyclicityKind kind,
                                                         double alpha, double rho)
    : gram_(std::move(gram)), lambda_(lambda), kind_(kind), alpha_(alpha), rho_(rho) {}

double LinearLeastSquaresObjective::operator()(const Eigen::VectorXd& params, Eigen::VectorXd& grad) const {
  const Eigen::Index d = gram_.rows();
  const Eigen::MatrixXd b = split_to_matrix(params, d);
  const Eigen::MatrixXd m = Eigen::MatrixXd::Identity(d, d) - b;
  const Eigen::MatrixXd cm = gram_ * m;
  const double loss = 0.5 * (m.array() * cm.array()).sum();
  const AcyclicityValue h = acyclicity(kind_, b);
  const Eigen::MatrixXd grad_b = -cm + (alpha_ + rho_ * h.value) * h.gradient;
  grad = stack_split_gradient(grad_b, lambda_);
  return loss + 0.5 * rho_ * h.value * h.value + alpha_ * h.value + lambda_ * params.sum();
}

LinearNllObjective::LinearNllObjective(Eigen::MatrixXd gram, double weight_total, double lambda, double dag_penalty,
                                       AcyclicityKind kind, NllVariance variance, Eigen::VectorXd sigma)
    : gram_(std::move(gram)),
      weight_total_(weight_total),
      lambda_(lambda),
      dag_penalty_(dag_penalty),
      kind_(kind),
      variance_(variance),
      sigma_(sigma.size() == 0 ? Eigen::VectorXd::Ones(gram_.rows()) : std::move(sigma)) {
  if (sigma_.size() != gram_.rows()) throw InvalidParameter("sigma length differs from variable count");
}

Eigen::VectorXd LinearNllObjective::noise_scales(const Eigen::MatrixXd& b) const {
  const Eigen::Index d = gram_.rows();
  const Eigen::MatrixXd m = Eigen::MatrixXd::Identity(d, d) - b;
  const Eigen::VectorXd rss = (m.array() * (gram_ * m).array()).colwise().sum().transpose() / weight_total_;
  switch (variance_) {
    case NllVariance::fixed:
      return sigma_;
    case NllVariance::equal:
      return Eigen::VectorXd::Constant(d, std::sqrt(rss.mean()));
    case NllVariance::non_equal:
      return rss.cwiseSqrt();
  }
  return sigma_;
}

double LinearNllObjective::operator()(const Eigen::VectorXd& params, Eigen::VectorXd& grad) const {
  const Eigen::Index d = gram_.rows();
  const Eigen::MatrixXd b = split_to_matrix(params, d);
  const Eigen::MatrixXd m = Eigen::MatrixXd::Identity(d, d) - b;
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(m);
  const double det = lu.determinant();
  auto reject = [&grad, &params] {
    grad = Eigen::VectorXd::Zero(params.size());
    return kInf;
  };
  if (!(det > 0.0) || !std::isfinite(det)) return reject();
  const double log_det = lu.matrixLU().diagonal().cwiseAbs().array().log().sum();

  const Eigen::MatrixXd cm = gram_ * m;
  const Eigen::RowVectorXd rss = (m.array() * cm.array()).colwise().sum();
  double fit = 0.0;
  Eigen::MatrixXd grad_b(d, d);
  switch (variance_) {
    case NllVariance::fixed: {
      const Eigen::RowVectorXd var = sigma_.array().square().matrix().transpose();
      fit = weight_total_ * (sigma_.array() * std::sqrt(2.0 * std::numbers::pi)).log().sum() + (0.5 * rss.array() / var.array()).sum();
      grad_b = -(cm.array().rowwise() / var.array()).matrix();
      break;
    }
    case NllVariance::equal: {
      const double total = rss.sum();
      if (!(total > 0.0)) return reject();
      fit = 0.5 * static_cast<double>(d) * std::log(total / static_cast<double>(d));
      grad_b = -static_cast<double>(d) / total * cm;
      break;
    }
    case NllVariance::non_equal: {
      if (!(rss.array() > 0.0).all()) return reject();
      fit = 0.5 * rss.array().log().sum();
      grad_b = -(cm.array().rowwise() / rss.array()).matrix();
      break;
    }
  }
  const AcyclicityValue h = acyclicity(kind_, b);
  grad_b += lu.inverse().transpose() + dag_penalty_ * h.gradient;
  grad = stack_split_gradient(grad_b, lambda_);
  return fit - log_det + dag_penalty_ * h.value + lambda_ * params.sum();
}

std::unique_ptr<Backbone> make_linear_notears(const DataMatrix& x, const LearnerConfig& cfg) {
  return std::make_unique<LinearNotearsBackbone>(x, cfg);
}

std::unique_ptr<Backbone> make_linear_nll(const DataMatrix& x, const LearnerConfig& cfg) {
  return std::make_unique<LinearNllBackbone>(x, cfg);
}

}  // namespace rescore
