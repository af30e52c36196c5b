#include <doctest.h>

#include <numeric>
#include <random>

#include "oracles.hpp"
#include "rescore/errors.hpp"
#include "rescore/metrics.hpp"

using namespace rescore;

namespace {

Dag random_dag(int d, double p, std::mt19937_64& rng) {
  std::vector<int> order(static_cast<size_t>(d));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::bernoulli_distribution coin(p);
  std::vector<std::pair<int, int>> edges;
  for (int a = 0; a < d; ++a) {
    for (int b = a + 1; b < d; ++b) {
      if (coin(rng)) edges.emplace_back(order[static_cast<size_t>(a)], order[static_cast<size_t>(b)]);
    }
  }
  return Dag(d, edges);
}

}  // namespace

TEST_CASE("metric examples") {
  const Dag chain(3, {{0, 1}, {1, 2}});
  const MetricsReport same = evaluate_graph(chain, chain);
  CHECK(same.tpr == 1.0);
  CHECK(same.fdr == 0.0);
  CHECK(same.shd == 0);

  const Dag est(3, {{0, 1}, {2, 1}});
  const MetricsReport r = evaluate_graph(est, chain);
  CHECK(r.tpr == 0.5);
  CHECK(r.fdr == 0.5);
  CHECK(r.shd == 1);
  CHECK(r.confusion.reversed == 1);

  std::mt19937_64 rng(1);
  Dag truth = random_dag(12, 0.4, rng);
  while (truth.edge_count() != 20) truth = random_dag(12, 0.3, rng);
  const MetricsReport empty = evaluate_graph(Dag(12), truth);
  CHECK(empty.tpr == 0.0);
  CHECK(empty.fdr == 0.0);
  CHECK(empty.shd == 20);
}

TEST_CASE("dimension mismatch") {
  CHECK_THROWS_AS((void)evaluate_graph(Dag(3), Dag(4)), InvalidParameter);
  CHECK_THROWS_AS((void)sid(Dag(3), Dag(4)), InvalidParameter);
}

TEST_CASE("SHD properties") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 300; ++trial) {
    const int d = 2 + trial % 8;
    const Dag a = random_dag(d, 0.3, rng);
    const Dag b = random_dag(d, 0.3, rng);
    const int ab = evaluate_graph(a, b).shd;
    CHECK((ab == 0) == (a == b));
    CHECK(evaluate_graph(a, a).shd == 0);
    if (evaluate_graph(a, b).confusion.reversed == 0) CHECK(ab == evaluate_graph(b, a).shd);
  }
  const Dag fwd(2, {{0, 1}});
  const Dag bwd(2, {{1, 0}});
  CHECK(evaluate_graph(fwd, bwd).shd == 1);
  CHECK(evaluate_graph(bwd, fwd).shd == 1);
}

TEST_CASE("SID examples") {
  const Dag chain(3, {{0, 1}, {1, 2}});
  CHECK(sid(chain, chain) == 0);
  CHECK(sid(Dag(3), chain) == 3);
  CHECK(sid(Dag(2, {{1, 0}}), Dag(2, {{0, 1}})) == 2);
  CHECK(oracle::sid(Dag(3), chain) == 3);
  CHECK(oracle::sid(Dag(2, {{1, 0}}), Dag(2, {{0, 1}})) == 2);
}

TEST_CASE("SID agrees with path enumeration") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const int d = 2 + trial % 4;
    const Dag truth = random_dag(d, 0.5, rng);
    const Dag est = random_dag(d, 0.5, rng);
    const int s = sid(est, truth);
    CHECK(s == oracle::sid(est, truth));
    CHECK(s >= 0);
    CHECK(s <= d * (d - 1));
    CHECK(sid(truth, truth) == 0);
  }
}

TEST_CASE("d-separation basics") {
  const Dag collider(3, {{0, 2}, {1, 2}});
  std::vector<bool> none(3, false);
  std::vector<bool> mid(3, false);
  mid[2] = true;
  CHECK(d_separated(collider, 0, 1, none));
  CHECK(!d_separated(collider, 0, 1, mid));
  const Dag chain(3, {{0, 1}, {1, 2}});
  std::vector<bool> one(3, false);
  one[1] = true;
  CHECK(!d_separated(chain, 0, 2, none));
  CHECK(d_separated(chain, 0, 2, one));
}
