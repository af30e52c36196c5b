#pragma once

#include <optional>

#include "rescore/graphs.hpp"

namespace rescore {

struct GraphConfusion {
  int true_positive = 0;
  int false_positive = 0;  // predicted edge absent from the truth in both directions
  int reversed = 0;
  int missing = 0;  // true edge absent from the estimate in both directions
  int predicted_edges = 0;
  int true_edges = 0;
};

struct MetricsReport {
  double tpr = 0.0;
  double fdr = 0.0;
  int shd = 0;
  std::optional<int> sid;
  double runtime_seconds = 0.0;
  GraphConfusion confusion;
};

[[nodiscard]] GraphConfusion confusion(const Dag& est, const Dag& truth);

/// TPR = TP / true edges, FDR = (reversed + FP) / max(predicted, 1),
/// SHD = missing + FP + reversed (a reversal costs 1).
[[nodiscard]] MetricsReport evaluate_graph(const Dag& est, const Dag& truth);

/// Structural intervention distance: ordered pairs (i, j) whose interventional
/// distribution p(x_j | do(x_i)) is wrong when the estimate's parents of i are used as
/// the adjustment set in the true graph.
[[nodiscard]] int sid(const Dag& est, const Dag& truth);

/// d-separation of x and y given z in `graph`, by reachability over active trails.
[[nodiscard]] bool d_separated(const Dag& graph, int x, int y, const std::vector<bool>& given);

}  // namespace rescore
