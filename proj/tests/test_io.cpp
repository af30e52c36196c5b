#include <doctest.h>

#include <filesystem>
#include <random>

#include "rescore/errors.hpp"
#include "rescore/io.hpp"
#include "rescore/sem.hpp"

using namespace rescore;

namespace {

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "rescore_test_io";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("graph JSON round-trips bit-exactly") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const int d = 2 + trial % 11;
    const Dag g = sample_dag({}, d, static_cast<std::uint64_t>(trial));
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(d, d);
    for (const auto& [j, i] : g.edges()) w(j, i) = normal(rng) * std::pow(10.0, trial % 7 - 3);
    const io::GraphDocument plain = io::graph_from_json(io::graph_to_json(g));
    CHECK(plain.graph == g);
    CHECK(!plain.weights.has_value());
    const io::GraphDocument doc = io::graph_from_json(io::graph_to_json(g, &w));
    CHECK(doc.graph == g);
    REQUIRE(doc.weights.has_value());
    CHECK(*doc.weights == w);
  }
  const auto path = scratch("g.json");
  const Dag g(3, {{0, 2}, {1, 2}});
  io::write_graph(path, g);
  CHECK(io::read_graph(path).graph == g);
}

TEST_CASE("graph JSON rejects malformed documents") {
  CHECK_THROWS((void)io::graph_from_json("{\"d\": 2, \"edges\": [[0, 1], [1, 0]]}"));
  CHECK_THROWS((void)io::graph_from_json("{\"d\": 2, \"edges\": [[0, 5]]}"));
  CHECK_THROWS((void)io::graph_from_json("{\"d\": 2, \"edges\": [[0, 1]], \"weights\": [1, 2]}"));
  CHECK_THROWS((void)io::graph_from_json("not json"));
}

TEST_CASE("CSV round-trip") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd m(37, 5);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = normal(rng) * 1e3;
  m(0, 0) = 1e-300;
  m(1, 1) = -0.0;
  for (const bool header : {false, true}) {
    const auto path = scratch(header ? "h.csv" : "p.csv");
    io::write_matrix_csv(path, m, header);
    const Eigen::MatrixXd back = io::read_matrix_csv(path);
    CHECK(back == m);
    if (header) CHECK(io::read_text(path).rfind("x1,x2,x3,x4,x5\n", 0) == 0);
  }
}

TEST_CASE("labels sidecar") {
  const Eigen::MatrixXd b = assign_linear_weights(sample_dag({}, 4, 1), 1);
  const DataMatrix x = simulate_linear_sem(b, 20, make_noise_spec(NoiseKind::heterogeneous, 4), 3);
  const auto path = scratch("labels.csv");
  io::write_labels_csv(path, x);
  const std::string text = io::read_text(path);
  CHECK(text.rfind("group,corrupted\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 21);
}
