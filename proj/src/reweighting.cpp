#include "rescore/reweighting.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "rescore/errors.hpp"

namespace rescore {

namespace {

constexpr int kClipRounds = 50;

void require_tau(double tau) {
  if (!(tau > 0.0 && tau <= 1.0)) throw InvalidParameter("tau must lie in (0, 1], got " + std::to_string(tau));
}

Eigen::VectorXd softmax(const Eigen::VectorXd& z) {
  const Eigen::VectorXd e = (z.array() - z.maxCoeff()).exp();
  return e / e.sum();
}

}  // namespace

void RescoreConfig::validate() const {
  require_tau(tau);
  if (k_outer < 0) throw InvalidParameter("k_outer must be >= 0");
  if (k_inner < 1) throw InvalidParameter("k_inner must be >= 1");
  if (k_reweight < 0) throw InvalidParameter("k_reweight must be >= 0");
  if (k_outer > 0 && k_reweight > k_outer) throw InvalidParameter("k_reweight must not exceed k_outer");
  if (!(temperature > 0.0)) throw InvalidParameter("temperature must be > 0");
  if (!(learning_rate > 0.0)) throw InvalidParameter("learning rate must be > 0");
  for (const int h : hidden_units) {
    if (h < 1) throw InvalidParameter("hidden layer sizes must be >= 1");
  }
}

SampleWeights inner_weights_exact(const Eigen::VectorXd& losses, double tau) {
  require_tau(tau);
  const Eigen::Index n = losses.size();
  if (n < 1) throw InvalidParameter("inner solver needs at least one loss");
  if (!losses.allFinite()) throw InvalidParameter("losses must be finite");
  if (tau == 1.0) return SampleWeights::uniform(n, tau);

  const double lo = tau / static_cast<double>(n);
  const double hi = 1.0 / (tau * static_cast<double>(n));
  std::vector<Eigen::Index> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&losses](Eigen::Index a, Eigen::Index b) { return losses[a] > losses[b]; });

  Eigen::VectorXd sorted_w(n);
  double budget = 1.0 - static_cast<double>(n) * lo;
  for (Eigen::Index k = 0; k < n; ++k) {
    const double extra = std::clamp(budget, 0.0, hi - lo);
    sorted_w[k] = lo + extra;
    budget -= extra;
  }
  // Equalize tied blocks.
  for (Eigen::Index start = 0; start < n;) {
    Eigen::Index end = start + 1;
    while (end < n && losses[order[static_cast<size_t>(end)]] == losses[order[static_cast<size_t>(start)]]) ++end;
    if (end - start > 1) sorted_w.segment(start, end - start).setConstant(sorted_w.segment(start, end - start).mean());
    start = end;
  }
  Eigen::VectorXd w(n);
  for (Eigen::Index k = 0; k < n; ++k) w[order[static_cast<size_t>(k)]] = sorted_w[k];
  return SampleWeights(std::move(w), tau);
}

Eigen::VectorXd project_capped_simplex(const Eigen::VectorXd& v, double lo, double hi) {
  const auto n = static_cast<double>(v.size());
  if (!(lo <= hi) || lo * n > 1.0 + 1e-12 || hi * n < 1.0 - 1e-12) {
    throw InvalidParameter("capped simplex is empty for the given bounds");
  }
  auto mass = [&](double level) { return (v.array() - level).max(lo).min(hi).sum(); };
  double below = v.minCoeff() - hi;  // mass(below) = n * hi >= 1
  double above = v.maxCoeff() - lo;  // mass(above) = n * lo <= 1
  for (int it = 0; it < 200 && above - below > 0.0; ++it) {
    const double mid = 0.5 * (below + above);
    if (mid <= below || mid >= above) break;
    (mass(mid) > 1.0 ? below : above) = mid;
  }
  return (v.array() - 0.5 * (below + above)).max(lo).min(hi).matrix();
}

ClipResult clip_renormalize(const Eigen::VectorXd& p, double tau) {
  require_tau(tau);
  const Eigen::Index n = p.size();
  const double lo = tau / static_cast<double>(n);
  const double hi = 1.0 / (tau * static_cast<double>(n));
  ClipResult out;
  out.weights = p;
  out.free = Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(n, true);
  for (int round = 0; round < kClipRounds; ++round) {
    bool clamped = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!out.free[i]) continue;
      if (out.weights[i] < lo || out.weights[i] > hi) {
        out.weights[i] = std::clamp(out.weights[i], lo, hi);
        out.free[i] = false;
        clamped = true;
      }
    }
    const double fixed_mass = out.free.select(0.0, out.weights).sum();
    const double free_mass = out.free.select(out.weights, 0.0).sum();
    if (!clamped && std::abs(fixed_mass + free_mass - 1.0) <= 1e-13) return out;
    if (!(free_mass > 0.0)) break;
    const double factor = (1.0 - fixed_mass) / free_mass;
    out.scale *= factor;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (out.free[i]) out.weights[i] *= factor;
    }
  }
  out.weights = project_capped_simplex(p, lo, hi);
  out.free = (out.weights.array() > lo) && (out.weights.array() < hi);
  out.scale = 1.0;
  out.projected = true;
  return out;
}

ReweightModel::ReweightModel(int input_dim, std::vector<int> hidden_units, std::uint64_t seed, double learning_rate)
    : input_dim_(input_dim), hidden_(std::move(hidden_units)), adam_(0, learning_rate) {
  if (input_dim < 1) throw InvalidParameter("scorer input dimension must be >= 1");
  std::mt19937_64 rng(seed);
  int fan_in = input_dim;
  for (size_t l = 0; l <= hidden_.size(); ++l) {
    const int fan_out = l < hidden_.size() ? hidden_[l] : 1;
    if (fan_out < 1) throw InvalidParameter("hidden layer sizes must be >= 1");
    MlpLayer layer{Eigen::MatrixXd::Zero(fan_out, fan_in), Eigen::VectorXd::Zero(fan_out)};
    if (l < hidden_.size()) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      std::uniform_real_distribution<double> init(-bound, bound);
      for (Eigen::Index k = 0; k < layer.weight.size(); ++k) layer.weight.data()[k] = init(rng);
      for (Eigen::Index k = 0; k < layer.bias.size(); ++k) layer.bias[k] = init(rng);
    }
    count_ += layer.weight.size() + layer.bias.size();
    layers_.push_back(std::move(layer));
    fan_in = fan_out;
  }
  adam_ = optim::Adam(count_, learning_rate);
}

Eigen::VectorXd ReweightModel::logits(const Eigen::MatrixXd& features) const {
  if (features.cols() != input_dim_) throw InvalidParameter("scorer input has the wrong width");
  Eigen::MatrixXd h = features;
  for (size_t l = 0; l < layers_.size(); ++l) {
    Eigen::MatrixXd z = h * layers_[l].weight.transpose();
    z.rowwise() += layers_[l].bias.transpose();
    h = l + 1 < layers_.size() ? z.cwiseMax(0.0) : z;
  }
  return h.col(0);
}

ClipResult ReweightModel::ascend(const Eigen::MatrixXd& features, const Eigen::VectorXd& losses, double tau,
                                 double temperature) {
  if (features.rows() != losses.size()) throw InvalidParameter("scorer features and losses differ in length");
  const size_t depth = layers_.size();
  std::vector<Eigen::MatrixXd> inputs(depth);
  std::vector<Eigen::MatrixXd> pre(depth);
  Eigen::MatrixXd h = features;
  for (size_t l = 0; l < depth; ++l) {
    inputs[l] = h;
    pre[l] = h * layers_[l].weight.transpose();
    pre[l].rowwise() += layers_[l].bias.transpose();
    h = l + 1 < depth ? pre[l].cwiseMax(0.0) : pre[l];
  }
  const Eigen::VectorXd z = h.col(0);
  if (!z.allFinite()) throw NumericError("reweighting scorer produced non-finite logits");
  const Eigen::VectorXd p = softmax(z / temperature);
  ClipResult clipped = clip_renormalize(p, tau);

  // Free entries: exact derivative, scale * (l_k - mean_F(l)). Clamped entries get the same
  // expression straight through, kept only when it points back into the box; otherwise
  // every vertex of C(tau) would be stationary.
  const double free_p = clipped.free.select(p, 0.0).sum();
  double centre = p.dot(losses);
  double slope = 1.0;
  if (!clipped.projected && free_p > 0.0) {
    centre = clipped.free.select(p.cwiseProduct(losses), 0.0).sum() / free_p;
    slope = clipped.scale;
  } else if (clipped.projected && clipped.free.any()) {
    centre = clipped.free.select(losses, 0.0).sum() / static_cast<double>(clipped.free.count());
  }
  const double n = static_cast<double>(p.size());
  const double mid = 0.5 * (tau / n + 1.0 / (tau * n));
  Eigen::VectorXd grad_p = slope * (losses.array() - centre).matrix();
  for (Eigen::Index k = 0; k < grad_p.size(); ++k) {
    if (clipped.free(k)) continue;
    const bool at_cap = clipped.weights(k) > mid;
    if (at_cap ? grad_p(k) > 0.0 : grad_p(k) < 0.0) grad_p(k) = 0.0;
  }
  Eigen::MatrixXd delta = (p.array() * (grad_p.array() - p.dot(grad_p))).matrix() / temperature;

  // Ascent: hand Adam the negated gradient.
  Eigen::VectorXd grad(count_);
  std::vector<Eigen::MatrixXd> gw(depth);
  std::vector<Eigen::VectorXd> gb(depth);
  for (size_t l = depth; l-- > 0;) {
    gw[l] = -(delta.transpose() * inputs[l]);
    gb[l] = -delta.colwise().sum().transpose();
    if (l > 0) delta = (delta * layers_[l].weight).cwiseProduct((pre[l - 1].array() > 0.0).cast<double>().matrix());
  }
  Eigen::Index at = 0;
  for (size_t l = 0; l < depth; ++l) {
    grad.segment(at, gw[l].size()) = Eigen::Map<const Eigen::VectorXd>(gw[l].data(), gw[l].size());
    at += gw[l].size();
    grad.segment(at, gb[l].size()) = gb[l];
    at += gb[l].size();
  }
  Eigen::VectorXd params(count_);
  at = 0;
  for (const auto& layer : layers_) {
    params.segment(at, layer.weight.size()) = Eigen::Map<const Eigen::VectorXd>(layer.weight.data(), layer.weight.size());
    at += layer.weight.size();
    params.segment(at, layer.bias.size()) = layer.bias;
    at += layer.bias.size();
  }
  adam_.step(params, grad);
  at = 0;
  for (auto& layer : layers_) {
    Eigen::Map<Eigen::VectorXd>(layer.weight.data(), layer.weight.size()) = params.segment(at, layer.weight.size());
    at += layer.weight.size();
    layer.bias = params.segment(at, layer.bias.size());
    at += layer.bias.size();
  }
  return clipped;
}

Eigen::MatrixXd scorer_features(const DataMatrix& x, const Eigen::VectorXd& losses, bool loss_feature) {
  if (!loss_feature) return x.values;
  Eigen::MatrixXd f(x.rows(), x.cols() + 1);
  f.leftCols(x.cols()) = x.values;
  f.col(x.cols()) = losses;
  return f;
}

ReweightModel make_reweight_model(const DataMatrix& x, const RescoreConfig& cfg) {
  const int input = static_cast<int>(x.cols()) + (cfg.loss_feature ? 1 : 0);
  return ReweightModel(input, cfg.hidden_units, cfg.seed, cfg.learning_rate);
}

std::pair<SampleWeights, ReweightModel> inner_weights_parametric(const DataMatrix& x, const Eigen::VectorXd& losses,
                                                                const RescoreConfig& cfg, ReweightModel state) {
  cfg.validate();
  if (losses.size() != x.rows()) throw InvalidParameter("loss vector length differs from row count");
  if (!losses.allFinite()) throw InvalidParameter("losses must be finite");
  const Eigen::MatrixXd features = scorer_features(x, losses, cfg.loss_feature);
  if (state.input_dim() != features.cols() || state.hidden_units() != cfg.hidden_units) {
    throw InvalidParameter("reweighting model shape does not match the data and config");
  }
  for (int k = 0; k < cfg.k_inner; ++k) (void)state.ascend(features, losses, cfg.tau, cfg.temperature);
  const Eigen::VectorXd z = state.logits(features);
  if (!z.allFinite()) throw NumericError("reweighting scorer produced non-finite logits");
  ClipResult clipped = clip_renormalize(softmax(z / cfg.temperature), cfg.tau);
  return {SampleWeights(std::move(clipped.weights), cfg.tau), std::move(state)};
}

FitResult fit_rescore(BackboneKind backbone_kind, const DataMatrix& x, const LearnerConfig& lcfg,
                      const RescoreConfig& rcfg) {
  rcfg.validate();
  auto backbone = make_backbone(backbone_kind, x, lcfg);
  SampleWeights weights = SampleWeights::uniform(x.rows(), rcfg.tau);
  std::optional<ReweightModel> scorer;
  if (rcfg.inner == InnerSolver::parametric) scorer.emplace(make_reweight_model(x, rcfg));

  int epoch = 0;
  for (; !backbone->finished() && (rcfg.k_outer == 0 || epoch < rcfg.k_outer); ++epoch) {
    try {
      backbone->outer_step(weights);
    } catch (const FitError& e) {
      throw FitError("outer epoch " + std::to_string(epoch) + ": " + e.what(), e.diagnostics());
    }
    if (epoch < rcfg.k_reweight) continue;
    const Eigen::VectorXd losses = backbone->sample_losses();
    if (scorer) {
      auto [w, state] = inner_weights_parametric(x, losses, rcfg, std::move(*scorer));
      weights = std::move(w);
      scorer.emplace(std::move(state));
    } else {
      weights = inner_weights_exact(losses, rcfg.tau);
    }
  }
  FitResult result = backbone->result();
  result.diagnostics.final_weights = weights.values();
  try {
    require_acyclic_solution(*backbone, result, lcfg.h_tol);
  } catch (const FitError& e) {
    throw FitError("outer epoch " + std::to_string(epoch - 1) + ": " + e.what(), e.diagnostics());
  }
  return result;
}

}  // namespace rescore
