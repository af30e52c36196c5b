#include "rescore/graphs.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <string>

#include "rescore/errors.hpp"

namespace rescore {

namespace {

template <typename Matrix>
bool support_acyclic(const Matrix& m) {
  if (m.rows() != m.cols()) {
    throw InvalidParameter("adjacency must be square, got " + std::to_string(m.rows()) + "x" +
                           std::to_string(m.cols()));
  }
  const Eigen::Index d = m.rows();
  std::vector<int> indegree(static_cast<size_t>(d), 0);
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index i = 0; i < d; ++i) {
      if (m(j, i) != 0) ++indegree[static_cast<size_t>(i)];
    }
  }
  std::vector<Eigen::Index> sources;
  for (Eigen::Index i = 0; i < d; ++i) {
    if (indegree[static_cast<size_t>(i)] == 0) sources.push_back(i);
  }
  Eigen::Index removed = 0;
  while (!sources.empty()) {
    const Eigen::Index j = sources.back();
    sources.pop_back();
    ++removed;
    for (Eigen::Index i = 0; i < d; ++i) {
      if (m(j, i) != 0 && --indegree[static_cast<size_t>(i)] == 0) sources.push_back(i);
    }
  }
  return removed == d;
}

}  // namespace

bool is_acyclic(const AdjacencyMatrix& adjacency) { return support_acyclic(adjacency); }

bool support_is_acyclic(const Eigen::MatrixXd& matrix) { return support_acyclic(matrix); }

Dag::Dag(int d) {
  if (d < 1) throw InvalidParameter("graph needs at least one node");
  adjacency_ = AdjacencyMatrix::Zero(d, d);
}

Dag::Dag(AdjacencyMatrix adjacency) : adjacency_(std::move(adjacency)) {
  if (adjacency_.rows() < 1) throw InvalidParameter("graph needs at least one node");
  for (Eigen::Index j = 0; j < adjacency_.rows(); ++j) {
    for (Eigen::Index i = 0; i < adjacency_.cols(); ++i) {
      const int v = adjacency_(j, i);
      if (v != 0 && v != 1) throw InvalidParameter("adjacency entries must be 0 or 1");
    }
  }
  if (!is_acyclic(adjacency_)) throw InvalidParameter("adjacency contains a directed cycle");
}

Dag::Dag(int d, const std::vector<std::pair<int, int>>& edges) : Dag(d) {
  for (const auto& [from, to] : edges) {
    if (from < 0 || to < 0 || from >= d || to >= d) {
      throw InvalidParameter("edge (" + std::to_string(from) + ", " + std::to_string(to) +
                             ") out of range for d=" + std::to_string(d));
    }
    adjacency_(from, to) = 1;
  }
  if (!is_acyclic(adjacency_)) throw InvalidParameter("edge list contains a directed cycle");
}

int Dag::edge_count() const noexcept { return adjacency_.sum(); }

std::vector<std::pair<int, int>> Dag::edges() const {
  std::vector<std::pair<int, int>> out;
  for (int j = 0; j < size(); ++j) {
    for (int i = 0; i < size(); ++i) {
      if (adjacency_(j, i) != 0) out.emplace_back(j, i);
    }
  }
  return out;
}

std::vector<int> Dag::parents(int node) const {
  std::vector<int> out;
  for (int j = 0; j < size(); ++j) {
    if (adjacency_(j, node) != 0) out.push_back(j);
  }
  return out;
}

std::vector<int> Dag::children(int node) const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i) {
    if (adjacency_(node, i) != 0) out.push_back(i);
  }
  return out;
}

std::vector<int> Dag::topological_order() const {
  const int d = size();
  std::vector<int> indegree(static_cast<size_t>(d), 0);
  for (int j = 0; j < d; ++j) {
    for (int i = 0; i < d; ++i) indegree[static_cast<size_t>(i)] += adjacency_(j, i);
  }
  // Smallest available index first so the order is canonical.
  std::vector<int> order;
  order.reserve(static_cast<size_t>(d));
  std::vector<bool> done(static_cast<size_t>(d), false);
  while (static_cast<int>(order.size()) < d) {
    int next = -1;
    for (int i = 0; i < d; ++i) {
      if (!done[static_cast<size_t>(i)] && indegree[static_cast<size_t>(i)] == 0) {
        next = i;
        break;
      }
    }
    done[static_cast<size_t>(next)] = true;
    order.push_back(next);
    for (int i = 0; i < d; ++i) indegree[static_cast<size_t>(i)] -= adjacency_(next, i);
  }
  return order;
}

std::vector<bool> Dag::descendants(int node) const {
  std::vector<bool> seen(static_cast<size_t>(size()), false);
  std::vector<int> stack{node};
  seen[static_cast<size_t>(node)] = true;
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    for (int v = 0; v < size(); ++v) {
      if (adjacency_(u, v) != 0 && !seen[static_cast<size_t>(v)]) {
        seen[static_cast<size_t>(v)] = true;
        stack.push_back(v);
      }
    }
  }
  return seen;
}

namespace {

Dag sample_erdos_renyi(int k, int d, std::mt19937_64& rng) {
  std::vector<int> order(static_cast<size_t>(d));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const double p = std::min(1.0, 2.0 * k / (d - 1));
  std::bernoulli_distribution coin(p);
  AdjacencyMatrix adj = AdjacencyMatrix::Zero(d, d);
  for (int a = 0; a < d; ++a) {
    for (int b = a + 1; b < d; ++b) {
      if (coin(rng)) adj(order[static_cast<size_t>(a)], order[static_cast<size_t>(b)]) = 1;
    }
  }
  return Dag(std::move(adj));
}

Dag sample_scale_free(int k, int d, std::mt19937_64& rng) {
  AdjacencyMatrix adj = AdjacencyMatrix::Zero(d, d);
  std::vector<double> degree(static_cast<size_t>(d), 0.0);
  for (int a = 0; a < k; ++a) {
    for (int b = a + 1; b < k; ++b) {
      adj(a, b) = 1;
      degree[static_cast<size_t>(a)] += 1;
      degree[static_cast<size_t>(b)] += 1;
    }
  }
  for (int node = std::max(k, 1); node < d; ++node) {
    // Plus-one smoothing keeps isolated nodes selectable.
    std::vector<double> weight(static_cast<size_t>(node));
    for (int u = 0; u < node; ++u) weight[static_cast<size_t>(u)] = degree[static_cast<size_t>(u)] + 1.0;
    for (int pick = 0; pick < k; ++pick) {
      std::discrete_distribution<int> choose(weight.begin(), weight.end());
      const int target = choose(rng);
      weight[static_cast<size_t>(target)] = 0.0;
      adj(target, node) = 1;
      degree[static_cast<size_t>(target)] += 1;
      degree[static_cast<size_t>(node)] += 1;
    }
  }
  std::vector<int> label(static_cast<size_t>(d));
  std::iota(label.begin(), label.end(), 0);
  std::shuffle(label.begin(), label.end(), rng);
  AdjacencyMatrix relabeled = AdjacencyMatrix::Zero(d, d);
  for (int j = 0; j < d; ++j) {
    for (int i = 0; i < d; ++i) {
      if (adj(j, i) != 0) relabeled(label[static_cast<size_t>(j)], label[static_cast<size_t>(i)]) = 1;
    }
  }
  return Dag(std::move(relabeled));
}

}  // namespace

Dag sample_dag(const GraphModel& model, int d, std::uint64_t seed) {
  if (d < 2) throw InvalidParameter("sample_dag requires d >= 2");
  if (model.k < 1) throw InvalidParameter("edge multiplier k must be >= 1");
  std::mt19937_64 rng(seed);
  switch (model.kind) {
    case GraphKind::erdos_renyi:
      return sample_erdos_renyi(model.k, d, rng);
    case GraphKind::scale_free:
      if (model.k >= d) throw InvalidParameter("scale-free graphs require k < d");
      return sample_scale_free(model.k, d, rng);
  }
  throw InvalidParameter("unknown graph kind");
}

}  // namespace rescore
