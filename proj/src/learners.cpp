#include "rescore/learners.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Cholesky>

namespace rescore {

void LearnerConfig::validate() const {
  if (!(lambda >= 0.0)) throw InvalidParameter("lambda must be >= 0");
  if (!(rho_init > 0.0)) throw InvalidParameter("rho_init must be > 0");
  if (!(rho_multiplier > 1.0)) throw InvalidParameter("rho multiplier must be > 1");
  if (!(rho_max >= rho_init)) throw InvalidParameter("rho_max must be >= rho_init");
  if (!(w_threshold >= 0.0)) throw InvalidParameter("edge threshold must be >= 0");
  if (!(h_tol > 0.0)) throw InvalidParameter("h tolerance must be > 0");
  if (max_outer < 1) throw InvalidParameter("max_outer must be >= 1");
  if (inner_max_iterations < 1) throw InvalidParameter("inner_max_iterations must be >= 1");
  if (hidden_units.empty()) throw InvalidParameter("MLP needs at least one hidden layer");
  for (const int h : hidden_units) {
    if (h < 1) throw InvalidParameter("hidden layer sizes must be >= 1");
  }
  if (!(dag_penalty >= 0.0)) throw InvalidParameter("dag penalty must be >= 0");
  if (!(l2 >= 0.0)) throw InvalidParameter("l2 must be >= 0");
  if (sigma.size() > 0 && (sigma.array() <= 0.0).any()) throw InvalidParameter("sigma entries must be > 0");
}

LearnerConfig LearnerConfig::defaults_for(BackboneKind kind) {
  LearnerConfig cfg;
  switch (kind) {
    case BackboneKind::linear_notears:
      cfg.lambda = 0.1;
      break;
    case BackboneKind::linear_nll:
      cfg.lambda = 2e-3;
      cfg.max_outer = 10;
      break;
    case BackboneKind::mlp_notears:
      cfg.lambda = 0.01;
      cfg.inner_max_iterations = 2000;
      break;
  }
  return cfg;
}

std::unique_ptr<Backbone> make_linear_notears(const DataMatrix& x, const LearnerConfig& cfg);
std::unique_ptr<Backbone> make_linear_nll(const DataMatrix& x, const LearnerConfig& cfg);
std::unique_ptr<Backbone> make_mlp_notears(const DataMatrix& x, const LearnerConfig& cfg);

std::unique_ptr<Backbone> make_backbone(BackboneKind kind, const DataMatrix& x, const LearnerConfig& cfg) {
  cfg.validate();
  x.validate();
  switch (kind) {
    case BackboneKind::linear_notears:
      return make_linear_notears(x, cfg);
    case BackboneKind::linear_nll:
      return make_linear_nll(x, cfg);
    case BackboneKind::mlp_notears:
      return make_mlp_notears(x, cfg);
  }
  throw InvalidParameter("unknown backbone");
}

Eigen::MatrixXd weighted_gram(const Eigen::MatrixXd& x, const Eigen::VectorXd& w) {
  if (w.size() != x.rows()) throw InvalidParameter("weight vector length differs from row count");
  return x.transpose() * w.asDiagonal() * x;
}

Eigen::MatrixXd weighted_regression(const Eigen::MatrixXd& x, const Eigen::VectorXd& w,
                                    const AdjacencyMatrix* support) {
  const Eigen::Index d = x.cols();
  if (w.size() != x.rows()) throw InvalidParameter("weight vector length differs from row count");
  if (support && (support->rows() != d || support->cols() != d)) {
    throw InvalidParameter("support must be d x d");
  }
  const Eigen::MatrixXd gram = weighted_gram(x, w);
  Eigen::MatrixXd beta = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    std::vector<Eigen::Index> cols;
    for (Eigen::Index k = 0; k < d; ++k) {
      if (k != j && (!support || (*support)(k, j) != 0)) cols.push_back(k);
    }
    if (cols.empty()) continue;
    const auto m = static_cast<Eigen::Index>(cols.size());
    Eigen::MatrixXd a(m, m);
    Eigen::VectorXd b(m);
    for (Eigen::Index r = 0; r < m; ++r) {
      b(r) = gram(cols[r], j);
      for (Eigen::Index c = 0; c < m; ++c) a(r, c) = gram(cols[r], cols[c]);
    }
    const Eigen::VectorXd coef = a.ldlt().solve(b);
    for (Eigen::Index r = 0; r < m; ++r) beta(cols[r], j) = coef(r);
  }
  return beta;
}

Dag threshold_to_dag(const Eigen::MatrixXd& m, double threshold) {
  if (m.rows() != m.cols()) throw InvalidParameter("threshold_to_dag needs a square matrix");
  if (!(threshold >= 0.0)) throw InvalidParameter("threshold must be >= 0");
  const Eigen::Index d = m.rows();
  AdjacencyMatrix adj = AdjacencyMatrix::Zero(d, d);
  std::vector<std::tuple<double, Eigen::Index, Eigen::Index>> kept;
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index i = 0; i < d; ++i) {
      if (i != j && std::abs(m(j, i)) > threshold) {
        adj(j, i) = 1;
        kept.emplace_back(std::abs(m(j, i)), j, i);
      }
    }
  }
  std::sort(kept.begin(), kept.end());
  for (auto it = kept.begin(); !is_acyclic(adj) && it != kept.end(); ++it) {
    adj(std::get<1>(*it), std::get<2>(*it)) = 0;
  }
  return Dag(std::move(adj));
}

void require_acyclic_solution(const Backbone& backbone, const FitResult& result, double h_tol) {
  if (backbone.constrained() && !(result.diagnostics.h < h_tol)) {
    throw FitError("acyclicity constraint not met: h = " + std::to_string(result.diagnostics.h) +
                       " after " + std::to_string(result.diagnostics.outer_iterations) + " outer iterations",
                   result.diagnostics);
  }
}

FitResult fit_backbone(BackboneKind kind, const DataMatrix& x, const SampleWeights& w, const LearnerConfig& cfg) {
  if (w.size() != x.rows()) throw InvalidParameter("weight vector length differs from row count");
  auto backbone = make_backbone(kind, x, cfg);
  while (!backbone->finished()) backbone->outer_step(w);
  FitResult result = backbone->result();
  require_acyclic_solution(*backbone, result, cfg.h_tol);
  return result;
}

FitResult fit_linear_notears(const DataMatrix& x, const SampleWeights& w, const LearnerConfig& cfg) {
  return fit_backbone(BackboneKind::linear_notears, x, w, cfg);
}

FitResult fit_linear_nll(const DataMatrix& x, const SampleWeights& w, const LearnerConfig& cfg) {
  return fit_backbone(BackboneKind::linear_nll, x, w, cfg);
}

FitResult fit_mlp_notears(const DataMatrix& x, const SampleWeights& w, const LearnerConfig& cfg) {
  return fit_backbone(BackboneKind::mlp_notears, x, w, cfg);
}

}  // namespace rescore
