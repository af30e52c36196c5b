#pragma once

// Independent reference implementations used only by the tests.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Core>

#include "rescore/graphs.hpp"

namespace oracle {

/// Central differences of a scalar function.
inline Eigen::VectorXd finite_difference(const std::function<double(const Eigen::VectorXd&)>& f,
                                         const Eigen::VectorXd& x, double step) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe(i) = x(i) + step;
    const double up = f(probe);
    probe(i) = x(i) - step;
    const double down = f(probe);
    probe(i) = x(i);
    g(i) = (up - down) / (2.0 * step);
  }
  return g;
}

/// max_i |a_i - b_i| / max(|b|_inf, floor).
inline double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double floor = 1e-8) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(b.cwiseAbs().maxCoeff(), floor);
}

/// Truncated Taylor series of e^A.
inline Eigen::MatrixXd taylor_expm(const Eigen::MatrixXd& a, int terms = 60) {
  Eigen::MatrixXd sum = Eigen::MatrixXd::Identity(a.rows(), a.cols());
  Eigen::MatrixXd term = sum;
  for (int k = 1; k < terms; ++k) {
    term = term * a / static_cast<double>(k);
    sum += term;
  }
  return sum;
}

/// Maximum of sum w_i l_i over the vertices of {lo <= w <= hi, sum w = 1}: every vertex
/// has at least n - 1 coordinates on a bound, the free one fixed by the budget.
inline double lp_vertex_optimum(const Eigen::VectorXd& losses, double tau) {
  const int n = static_cast<int>(losses.size());
  const double lo = tau / n;
  const double hi = 1.0 / (tau * n);
  double best = -std::numeric_limits<double>::infinity();
  for (int free = 0; free < n; ++free) {
    for (unsigned mask = 0; mask < (1u << (n - 1)); ++mask) {
      double used = 0.0;
      double value = 0.0;
      int bit = 0;
      for (int i = 0; i < n; ++i) {
        if (i == free) continue;
        const double w = (mask >> bit++) & 1u ? hi : lo;
        used += w;
        value += w * losses(i);
      }
      const double w_free = 1.0 - used;
      if (w_free < lo - 1e-12 || w_free > hi + 1e-12) continue;
      best = std::max(best, value + w_free * losses(free));
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Structural intervention distance by explicit path enumeration.

struct Step {
  int node;
  bool forward;  // edge traversed in its direction (prev -> node)
};

inline void simple_paths(const rescore::Dag& g, int at, int target, std::vector<bool>& visited,
                         std::vector<Step>& path, std::vector<std::vector<Step>>& out) {
  if (at == target) {
    out.push_back(path);
    return;
  }
  for (int next = 0; next < g.size(); ++next) {
    if (visited[static_cast<size_t>(next)]) continue;
    const bool fwd = g.has_edge(at, next);
    const bool bwd = g.has_edge(next, at);
    if (!fwd && !bwd) continue;
    visited[static_cast<size_t>(next)] = true;
    path.push_back({next, fwd});
    simple_paths(g, next, target, visited, path, out);
    path.pop_back();
    visited[static_cast<size_t>(next)] = false;
  }
}

inline std::vector<bool> reach_down(const rescore::Dag& g, int node) {
  std::vector<bool> seen(static_cast<size_t>(g.size()), false);
  std::vector<int> stack{node};
  seen[static_cast<size_t>(node)] = true;
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    for (int c = 0; c < g.size(); ++c) {
      if (g.has_edge(v, c) && !seen[static_cast<size_t>(c)]) {
        seen[static_cast<size_t>(c)] = true;
        stack.push_back(c);
      }
    }
  }
  return seen;
}

/// Adjustment-criterion validity of z for the effect of x on y in g: no member of z
/// descends from a non-x node of a causal path, and every non-causal path is blocked.
inline bool valid_adjustment(const rescore::Dag& g, int x, int y, const std::vector<bool>& z) {
  const int d = g.size();
  std::vector<bool> visited(static_cast<size_t>(d), false);
  visited[static_cast<size_t>(x)] = true;
  std::vector<Step> path;
  std::vector<std::vector<Step>> paths;
  simple_paths(g, x, y, visited, path, paths);

  for (const auto& p : paths) {
    const bool causal = std::all_of(p.begin(), p.end(), [](const Step& s) { return s.forward; });
    if (causal) {
      for (const Step& s : p) {
        const auto de = reach_down(g, s.node);
        for (int v = 0; v < d; ++v) {
          if (de[static_cast<size_t>(v)] && z[static_cast<size_t>(v)]) return false;
        }
      }
      continue;
    }
    bool blocked = false;
    for (size_t k = 0; k + 1 < p.size() && !blocked; ++k) {
      const int v = p[k].node;
      const bool into_from_prev = p[k].forward;       // prev -> v
      const bool into_from_next = !p[k + 1].forward;  // v <- next
      if (into_from_prev && into_from_next) {
        const auto de = reach_down(g, v);
        bool opened = false;
        for (int u = 0; u < d; ++u) opened = opened || (de[static_cast<size_t>(u)] && z[static_cast<size_t>(u)]);
        blocked = !opened;
      } else {
        blocked = z[static_cast<size_t>(v)];
      }
    }
    if (!blocked) return false;
  }
  return true;
}

inline int sid(const rescore::Dag& est, const rescore::Dag& truth) {
  const int d = truth.size();
  int wrong = 0;
  for (int i = 0; i < d; ++i) {
    std::vector<bool> z(static_cast<size_t>(d), false);
    for (const int p : est.parents(i)) z[static_cast<size_t>(p)] = true;
    const auto de = reach_down(truth, i);
    for (int j = 0; j < d; ++j) {
      if (j == i) continue;
      // A parent in the estimate is predicted to be unaffected by do(x_i).
      const bool ok = z[static_cast<size_t>(j)] ? !de[static_cast<size_t>(j)] : valid_adjustment(truth, i, j, z);
      if (!ok) ++wrong;
    }
  }
  return wrong;
}

}  // namespace oracle
