#include "rescore/metrics.hpp"

#include <algorithm>
#include <array>
#include <deque>

#include "rescore/errors.hpp"

namespace rescore {

namespace {

void require_same_size(const Dag& est, const Dag& truth) {
  if (est.size() != truth.size()) throw InvalidParameter("estimated and true graphs differ in node count");
}

// Ancestors of the conditioning set, including the set itself.
std::vector<bool> ancestors_of(const Dag& graph, const std::vector<bool>& set) {
  const int d = graph.size();
  std::vector<bool> out(set);
  std::vector<int> stack;
  for (int v = 0; v < d; ++v) {
    if (set[static_cast<size_t>(v)]) stack.push_back(v);
  }
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    for (int p = 0; p < d; ++p) {
      if (graph.has_edge(p, v) && !out[static_cast<size_t>(p)]) {
        out[static_cast<size_t>(p)] = true;
        stack.push_back(p);
      }
    }
  }
  return out;
}

}  // namespace

GraphConfusion confusion(const Dag& est, const Dag& truth) {
  require_same_size(est, truth);
  const int d = est.size();
  GraphConfusion c;
  c.predicted_edges = est.edge_count();
  c.true_edges = truth.edge_count();
  for (int j = 0; j < d; ++j) {
    for (int i = 0; i < d; ++i) {
      if (est.has_edge(j, i)) {
        if (truth.has_edge(j, i)) {
          ++c.true_positive;
        } else if (truth.has_edge(i, j)) {
          ++c.reversed;
        } else {
          ++c.false_positive;
        }
      }
      if (truth.has_edge(j, i) && !est.has_edge(j, i) && !est.has_edge(i, j)) ++c.missing;
    }
  }
  return c;
}

MetricsReport evaluate_graph(const Dag& est, const Dag& truth) {
  MetricsReport r;
  r.confusion = confusion(est, truth);
  const auto& c = r.confusion;
  r.tpr = c.true_edges > 0 ? static_cast<double>(c.true_positive) / c.true_edges : 0.0;
  r.fdr = static_cast<double>(c.reversed + c.false_positive) / std::max(c.predicted_edges, 1);
  r.shd = c.missing + c.false_positive + c.reversed;
  return r;
}

bool d_separated(const Dag& graph, int x, int y, const std::vector<bool>& given) {
  const int d = graph.size();
  if (static_cast<int>(given.size()) != d) throw InvalidParameter("conditioning mask has the wrong length");
  if (x == y) return false;
  const std::vector<bool> anc = ancestors_of(graph, given);
  // visited[v][0]: reached from a child (moving up); visited[v][1]: from a parent (moving down).
  std::vector<std::array<bool, 2>> visited(static_cast<size_t>(d), {false, false});
  std::deque<std::pair<int, int>> queue{{x, 0}};
  while (!queue.empty()) {
    const auto [v, down] = queue.front();
    queue.pop_front();
    auto& seen = visited[static_cast<size_t>(v)][static_cast<size_t>(down)];
    if (seen) continue;
    seen = true;
    const bool observed = given[static_cast<size_t>(v)];
    if (v == y && !observed) return false;
    if (down == 0) {
      if (observed) continue;
      for (int u = 0; u < d; ++u) {
        if (graph.has_edge(u, v)) queue.emplace_back(u, 0);
        if (graph.has_edge(v, u)) queue.emplace_back(u, 1);
      }
    } else {
      if (!observed) {
        for (int u = 0; u < d; ++u) {
          if (graph.has_edge(v, u)) queue.emplace_back(u, 1);
        }
      }
      if (anc[static_cast<size_t>(v)]) {
        for (int u = 0; u < d; ++u) {
          if (graph.has_edge(u, v)) queue.emplace_back(u, 0);
        }
      }
    }
  }
  return true;
}

int sid(const Dag& est, const Dag& truth) {
  require_same_size(est, truth);
  const int d = truth.size();
  std::vector<std::vector<bool>> descendants;
  descendants.reserve(static_cast<size_t>(d));
  for (int v = 0; v < d; ++v) descendants.push_back(truth.descendants(v));

  int wrong = 0;
  for (int i = 0; i < d; ++i) {
    std::vector<bool> adjust(static_cast<size_t>(d), false);
    for (const int p : est.parents(i)) adjust[static_cast<size_t>(p)] = true;
    const auto& desc_i = descendants[static_cast<size_t>(i)];

    for (int j = 0; j < d; ++j) {
      if (j == i) continue;
      if (adjust[static_cast<size_t>(j)]) {
        // The estimate claims no effect of i on j.
        if (desc_i[static_cast<size_t>(j)]) ++wrong;
        continue;
      }
      // Nodes other than i on directed paths i -> ... -> j.
      std::vector<bool> on_causal(static_cast<size_t>(d), false);
      bool forbidden_hit = false;
      for (int w = 0; w < d; ++w) {
        if (w != i && desc_i[static_cast<size_t>(w)] && descendants[static_cast<size_t>(w)][static_cast<size_t>(j)]) {
          on_causal[static_cast<size_t>(w)] = true;
          for (int z = 0; z < d; ++z) {
            if (adjust[static_cast<size_t>(z)] && descendants[static_cast<size_t>(w)][static_cast<size_t>(z)]) {
              forbidden_hit = true;
            }
          }
        }
      }
      if (forbidden_hit) {
        ++wrong;
        continue;
      }
      // Proper back-door graph: drop the first edge of every proper causal path.
      AdjacencyMatrix pruned = truth.adjacency();
      for (int c = 0; c < d; ++c) {
        if (on_causal[static_cast<size_t>(c)]) pruned(i, c) = 0;
      }
      if (!d_separated(Dag(std::move(pruned)), i, j, adjust)) ++wrong;
    }
  }
  return wrong;
}

}  // namespace rescore
