#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "rescore/learners.hpp"
#include "rescore/optim.hpp"

namespace rescore {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::MatrixXd relu(const Eigen::MatrixXd& z) { return z.cwiseMax(0.0); }

}  // namespace

MlpModel::MlpModel(int d, std::vector<int> hidden_units, std::uint64_t seed) : d_(d), hidden_(std::move(hidden_units)) {
  if (d < 1) throw InvalidParameter("MLP needs d >= 1");
  if (hidden_.empty()) throw InvalidParameter("MLP needs at least one hidden layer");
  std::mt19937_64 rng(seed);
  nets_.resize(static_cast<size_t>(d));
  for (auto& net : nets_) {
    int fan_in = d;
    for (size_t l = 0; l <= hidden_.size(); ++l) {
      const int fan_out = l < hidden_.size() ? hidden_[l] : 1;
      if (fan_out < 1) throw InvalidParameter("hidden layer sizes must be >= 1");
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      std::uniform_real_distribution<double> init(-bound, bound);
      MlpLayer layer{Eigen::MatrixXd::Zero(fan_out, fan_in), Eigen::VectorXd(fan_out)};
      // The first layer starts at zero so the initial graph is empty.
      if (l > 0) {
        for (Eigen::Index k = 0; k < layer.weight.size(); ++k) layer.weight.data()[k] = init(rng);
      }
      for (Eigen::Index k = 0; k < layer.bias.size(); ++k) layer.bias[k] = init(rng);
      count_ += layer.weight.size() + layer.bias.size();
      net.push_back(std::move(layer));
      fan_in = fan_out;
    }
  }
}

Eigen::VectorXd MlpModel::pack() const {
  Eigen::VectorXd out(count_);
  Eigen::Index at = 0;
  for (const auto& net : nets_) {
    for (const auto& layer : net) {
      out.segment(at, layer.weight.size()) = Eigen::Map<const Eigen::VectorXd>(layer.weight.data(), layer.weight.size());
      at += layer.weight.size();
      out.segment(at, layer.bias.size()) = layer.bias;
      at += layer.bias.size();
    }
  }
  return out;
}

void MlpModel::unpack(const Eigen::VectorXd& params) {
  if (params.size() != count_) throw InvalidParameter("MLP parameter vector has the wrong length");
  Eigen::Index at = 0;
  for (int j = 0; j < d_; ++j) {
    auto& net = nets_[static_cast<size_t>(j)];
    for (auto& layer : net) {
      Eigen::Map<Eigen::VectorXd>(layer.weight.data(), layer.weight.size()) = params.segment(at, layer.weight.size());
      at += layer.weight.size();
      layer.bias = params.segment(at, layer.bias.size());
      at += layer.bias.size();
    }
    net.front().weight.col(j).setZero();
  }
}

Eigen::MatrixXd MlpModel::predict(const Eigen::MatrixXd& x) const {
  if (x.cols() != d_) throw InvalidParameter("data dimension differs from MLP input size");
  Eigen::MatrixXd out(x.rows(), d_);
  for (int j = 0; j < d_; ++j) {
    const auto& net = nets_[static_cast<size_t>(j)];
    Eigen::MatrixXd h = x;
    for (size_t l = 0; l < net.size(); ++l) {
      Eigen::MatrixXd z = h * net[l].weight.transpose();
      z.rowwise() += net[l].bias.transpose();
      h = l + 1 < net.size() ? relu(z) : z;
    }
    out.col(j) = h.col(0);
  }
  return out;
}

Eigen::MatrixXd MlpModel::adjacency() const {
  Eigen::MatrixXd a(d_, d_);
  for (int j = 0; j < d_; ++j) a.col(j) = nets_[static_cast<size_t>(j)].front().weight.colwise().norm().transpose();
  return a;
}

Eigen::VectorXd per_sample_losses(const MlpModel& model, const DataMatrix& x, const ScoreConfig& cfg) {
  return losses_from_residuals(x.values - model.predict(x.values), cfg);
}

MlpObjective::MlpObjective(const Eigen::MatrixXd& x, Eigen::VectorXd weights, const MlpModel& shape, double lambda,
                           double l2, AcyclicityKind kind, double alpha, double rho)
    : x_(x),
      weights_(std::move(weights)),
      model_(shape),
      lambda_(lambda),
      l2_(l2),
      kind_(kind),
      alpha_(alpha),
      rho_(rho) {
  if (weights_.size() != x_.rows()) throw InvalidParameter("weight vector length differs from row count");
  if (x_.cols() != shape.dims()) throw InvalidParameter("data dimension differs from MLP input size");
}

double MlpObjective::operator()(const Eigen::VectorXd& params, Eigen::VectorXd& grad) const {
  model_.unpack(params);
  const int d = model_.dims();
  double loss = 0.0;
  double weight_norm = 0.0;
  grads_.resize(static_cast<size_t>(d));

  for (int j = 0; j < d; ++j) {
    const auto& net = model_.network(j);
    const size_t depth = net.size();
    pre_.resize(depth);
    act_.resize(depth);
    for (size_t l = 0; l < depth; ++l) {
      const Eigen::MatrixXd& in = l == 0 ? x_ : act_[l - 1];
      pre_[l].noalias() = in * net[l].weight.transpose();
      pre_[l].rowwise() += net[l].bias.transpose();
      if (l + 1 < depth) act_[l] = pre_[l].cwiseMax(0.0);
    }
    const auto residual = pre_[depth - 1].col(0) - x_.col(j);
    loss += 0.5 * (weights_.array() * residual.array().square()).sum();

    auto& g = grads_[static_cast<size_t>(j)];
    g.resize(depth);
    delta_ = weights_.cwiseProduct(residual);
    for (size_t l = depth; l-- > 0;) {
      const Eigen::MatrixXd& in = l == 0 ? x_ : act_[l - 1];
      g[l].weight.noalias() = delta_.transpose() * in;
      g[l].bias = delta_.colwise().sum().transpose();
      if (l > 0) {
        delta_prev_.noalias() = delta_ * net[l].weight;
        delta_ = (pre_[l - 1].array() > 0.0).select(delta_prev_, 0.0);
      }
    }
    g[0].weight.col(j).setZero();
    for (size_t l = 0; l < depth; ++l) {
      weight_norm += net[l].weight.squaredNorm();
      g[l].weight += l2_ * net[l].weight;
    }
  }
  auto& grads = grads_;

  const Eigen::MatrixXd a = model_.adjacency();
  const AcyclicityValue h = acyclicity(kind_, a);
  const Eigen::MatrixXd grad_a = (alpha_ + rho_ * h.value) * h.gradient + Eigen::MatrixXd::Constant(d, d, lambda_);
  for (int j = 0; j < d; ++j) {
    const Eigen::MatrixXd& w1 = model_.network(j).front().weight;
    for (int k = 0; k < d; ++k) {
      if (a(k, j) > 0.0) grads[static_cast<size_t>(j)][0].weight.col(k) += grad_a(k, j) / a(k, j) * w1.col(k);
    }
  }

  grad.resize(params.size());
  Eigen::Index at = 0;
  for (const auto& net : grads) {
    for (const auto& layer : net) {
      grad.segment(at, layer.weight.size()) = Eigen::Map<const Eigen::VectorXd>(layer.weight.data(), layer.weight.size());
      at += layer.weight.size();
      grad.segment(at, layer.bias.size()) = layer.bias;
      at += layer.bias.size();
    }
  }
  return loss + lambda_ * a.sum() + 0.5 * l2_ * weight_norm + alpha_ * h.value + 0.5 * rho_ * h.value * h.value;
}

namespace {

class MlpNotearsBackbone final : public Backbone {
 public:
  MlpNotearsBackbone(const DataMatrix& x, const LearnerConfig& cfg)
      : x_(x),
        cfg_(cfg),
        model_(static_cast<int>(x.cols()), cfg.hidden_units, cfg.seed),
        rho_(cfg.rho_init),
        alpha_(cfg.alpha_init) {
    if (x.cols() > cfg.max_dims) {
      throw ResourceLimit("MLP backbone limited to d <= " + std::to_string(cfg.max_dims));
    }
    params_ = model_.pack();
    build_split_layout();
  }

  void outer_step(const SampleWeights& w) override {
    if (done_) return;
    Eigen::VectorXd candidate = params_;
    double h_new = h_;
    double f_new = kInf;
    while (rho_ < cfg_.rho_max) {
      const MlpObjective objective(x_.values, w.values(), model_, cfg_.lambda, cfg_.l2, cfg_.acyclicity, alpha_, rho_);
      std::tie(candidate, f_new) = solve(objective);
      model_.unpack(candidate);
      h_new = acyclicity(cfg_.acyclicity, model_.adjacency()).value;
      if (h_new > 0.25 * h_) {
        rho_ *= cfg_.rho_multiplier;
      } else {
        break;
      }
    }
    params_ = std::move(candidate);
    model_.unpack(params_);
    h_ = h_new;
    alpha_ += rho_ * h_;
    trace_.push_back(f_new);
    ++outer_;
    done_ = h_ <= cfg_.h_tol || rho_ >= cfg_.rho_max || outer_ >= cfg_.max_outer;
  }

  [[nodiscard]] bool finished() const override { return done_; }
  [[nodiscard]] bool constrained() const override { return true; }

  [[nodiscard]] Eigen::VectorXd sample_losses() const override {
    return per_sample_losses(model_, x_, ScoreConfig{});
  }

  [[nodiscard]] FitResult result() const override {
    Eigen::MatrixXd a = model_.adjacency();
    Dag graph = threshold_to_dag(a, cfg_.w_threshold);
    return {std::move(a), std::move(graph), sample_losses(), diagnostics(h_ < cfg_.h_tol)};
  }

  [[nodiscard]] const MlpModel& model() const noexcept { return model_; }

 private:
  // First-layer weights are split into nonnegative parts W+ and W-; the self-input
  // column of each network is pinned to zero by its bounds. Other parameters are free.
  void build_split_layout() {
    const int d = model_.dims();
    Eigen::Index at = 0;
    std::vector<double> pinned;
    for (int j = 0; j < d; ++j) {
      const auto& net = model_.network(j);
      for (size_t l = 0; l < net.size(); ++l) {
        const Eigen::Index rows = net[l].weight.rows();
        for (Eigen::Index k = 0; k < net[l].weight.size(); ++k) {
          if (l == 0) {
            first_.push_back(at + k);
            pinned.push_back(k / rows == j ? 0.0 : kInf);
          } else {
            other_.push_back(at + k);
          }
        }
        at += net[l].weight.size();
        for (Eigen::Index k = 0; k < net[l].bias.size(); ++k) other_.push_back(at + k);
        at += net[l].bias.size();
      }
    }
    const auto f = static_cast<Eigen::Index>(first_.size());
    const auto r = static_cast<Eigen::Index>(other_.size());
    lower_ = Eigen::VectorXd::Constant(2 * f + r, -kInf);
    upper_ = Eigen::VectorXd::Constant(2 * f + r, kInf);
    lower_.head(2 * f).setZero();
    for (Eigen::Index i = 0; i < f; ++i) upper_(i) = upper_(f + i) = pinned[static_cast<size_t>(i)];
  }

  [[nodiscard]] Eigen::VectorXd to_split(const Eigen::VectorXd& theta) const {
    const auto f = static_cast<Eigen::Index>(first_.size());
    Eigen::VectorXd z(lower_.size());
    for (Eigen::Index i = 0; i < f; ++i) {
      const double v = theta(first_[static_cast<size_t>(i)]);
      z(i) = std::max(v, 0.0);
      z(f + i) = std::max(-v, 0.0);
    }
    for (size_t i = 0; i < other_.size(); ++i) z(2 * f + static_cast<Eigen::Index>(i)) = theta(other_[i]);
    return z;
  }

  void from_split(const Eigen::VectorXd& z, Eigen::VectorXd& theta) const {
    const auto f = static_cast<Eigen::Index>(first_.size());
    for (Eigen::Index i = 0; i < f; ++i) theta(first_[static_cast<size_t>(i)]) = z(i) - z(f + i);
    for (size_t i = 0; i < other_.size(); ++i) theta(other_[i]) = z(2 * f + static_cast<Eigen::Index>(i));
  }

  std::pair<Eigen::VectorXd, double> solve(const MlpObjective& objective) const {
    const auto f = static_cast<Eigen::Index>(first_.size());
    Eigen::VectorXd theta = params_;
    Eigen::VectorXd grad_theta;
    const auto split_objective = [&](const Eigen::VectorXd& z, Eigen::VectorXd& grad) {
      from_split(z, theta);
      const double value = objective(theta, grad_theta);
      grad.resize(z.size());
      for (Eigen::Index i = 0; i < f; ++i) {
        const double g = grad_theta(first_[static_cast<size_t>(i)]);
        grad(i) = g;
        grad(f + i) = -g;
      }
      for (size_t i = 0; i < other_.size(); ++i) grad(2 * f + static_cast<Eigen::Index>(i)) = grad_theta(other_[i]);
      return value;
    };
    optim::BoxLbfgsOptions opts;
    opts.max_iterations = cfg_.inner_max_iterations;
    const auto solved = optim::minimize_box_lbfgs(split_objective, to_split(params_), lower_, upper_, opts);
    if (!std::isfinite(solved.f)) throw FitError("MLP objective diverged", diagnostics(false));
    from_split(solved.x, theta);
    return {theta, solved.f};
  }

  [[nodiscard]] FitDiagnostics diagnostics(bool converged) const {
    FitDiagnostics diag;
    diag.h = h_;
    diag.outer_iterations = outer_;
    diag.rho = rho_;
    diag.alpha = alpha_;
    diag.objective_trace = trace_;
    diag.converged = converged;
    return diag;
  }

  const DataMatrix& x_;
  LearnerConfig cfg_;
  MlpModel model_;
  Eigen::VectorXd params_;
  double rho_;
  double alpha_;
  double h_ = kInf;
  int outer_ = 0;
  bool done_ = false;
  std::vector<double> trace_;
  std::vector<Eigen::Index> first_;
  std::vector<Eigen::Index> other_;
  Eigen::VectorXd lower_;
  Eigen::VectorXd upper_;
};

}  // namespace

std::unique_ptr<Backbone> make_mlp_notears(const DataMatrix& x, const LearnerConfig& cfg) {
  return std::make_unique<MlpNotearsBackbone>(x, cfg);
}

}  // namespace rescore
