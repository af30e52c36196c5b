#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace rescore {

/// Binary adjacency; entry (j, i) == 1 encodes the edge j -> i.
using AdjacencyMatrix = Eigen::MatrixXi;

/// Exact cycle check by iterated source removal. Nonzero entries are edges.
[[nodiscard]] bool is_acyclic(const AdjacencyMatrix& adjacency);

/// Same check on the support (nonzero pattern) of a real matrix.
[[nodiscard]] bool support_is_acyclic(const Eigen::MatrixXd& matrix);

/// Immutable directed acyclic graph. Every constructor validates acyclicity.
class Dag {
 public:
  explicit Dag(int d);
  explicit Dag(AdjacencyMatrix adjacency);
  Dag(int d, const std::vector<std::pair<int, int>>& edges);

  [[nodiscard]] int size() const noexcept { return static_cast<int>(adjacency_.rows()); }
  [[nodiscard]] const AdjacencyMatrix& adjacency() const noexcept { return adjacency_; }
  [[nodiscard]] bool has_edge(int from, int to) const { return adjacency_(from, to) != 0; }
  [[nodiscard]] int edge_count() const noexcept;
  /// Edges as (source, target), row-major order.
  [[nodiscard]] std::vector<std::pair<int, int>> edges() const;
  [[nodiscard]] std::vector<int> parents(int node) const;
  [[nodiscard]] std::vector<int> children(int node) const;
  [[nodiscard]] std::vector<int> topological_order() const;
  /// Descendant indicator, including the node itself.
  [[nodiscard]] std::vector<bool> descendants(int node) const;

  friend bool operator==(const Dag& a, const Dag& b) { return a.adjacency_ == b.adjacency_; }

 private:
  AdjacencyMatrix adjacency_;
};

enum class GraphKind { erdos_renyi, scale_free };

struct GraphModel {
  GraphKind kind = GraphKind::erdos_renyi;
  int k = 2;  // expected edges ~ k * d
};

/// Samples a random DAG. ER: each pair of a random node order is linked with
/// probability 2k/(d-1) and oriented along the order. SF: preferential
/// attachment with k links per new node, seeded by an acyclic k-clique and
/// relabeled by a random permutation.
[[nodiscard]] Dag sample_dag(const GraphModel& model, int d, std::uint64_t seed);

}  // namespace rescore
