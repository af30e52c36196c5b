#include "rescore/sem.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include <Eigen/Cholesky>

#include "rescore/errors.hpp"
#include "rescore/random.hpp"

namespace rescore {

namespace {

enum Stream : std::uint64_t { kLabels = 1, kNoise = 2, kCorruptRows = 3, kCorruptModel = 4, kMechanism = 5 };

Dag support_dag(const WeightedAdjacency& b) {
  AdjacencyMatrix adj = (b.array() != 0.0).cast<int>();
  if (!is_acyclic(adj)) throw InvalidParameter("coefficient support is cyclic");
  return Dag(std::move(adj));
}

// Row-to-group assignment: floor(fraction * n) rows per group, the last group
// takes the remainder, labels shuffled.
std::vector<int> assign_groups(const NoiseSpec& noise, int n, std::uint64_t seed) {
  if (noise.groups.empty()) return {};
  std::vector<int> labels;
  labels.reserve(static_cast<size_t>(n));
  for (size_t g = 0; g + 1 < noise.groups.size(); ++g) {
    const auto count = static_cast<int>(std::floor(noise.groups[g].fraction * n + 1e-9));
    labels.insert(labels.end(), static_cast<size_t>(count), static_cast<int>(g));
  }
  labels.resize(static_cast<size_t>(n), static_cast<int>(noise.groups.size() - 1));
  std::mt19937_64 rng(derive_seed(seed, {kLabels}));
  std::shuffle(labels.begin(), labels.end(), rng);
  return labels;
}

Eigen::MatrixXd draw_noise(const NoiseSpec& noise, const std::vector<int>& labels, int n, int d,
                           std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, {kNoise}));
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd out(n, d);
  for (int r = 0; r < n; ++r) {
    const Eigen::VectorXd& sigma =
        labels.empty() ? noise.sigma : noise.groups[static_cast<size_t>(labels[static_cast<size_t>(r)])].sigma;
    for (int c = 0; c < d; ++c) out(r, c) = sigma[c] * normal(rng);
  }
  return out;
}

std::vector<std::uint8_t> pick_corrupted(double fraction, int n, std::uint64_t seed) {
  std::vector<std::uint8_t> flags(static_cast<size_t>(n), 0);
  const auto count = static_cast<int>(std::floor(fraction * n + 1e-9));
  if (count == 0) return flags;
  std::vector<int> rows(static_cast<size_t>(n));
  std::iota(rows.begin(), rows.end(), 0);
  std::mt19937_64 rng(derive_seed(seed, {kCorruptRows}));
  std::shuffle(rows.begin(), rows.end(), rng);
  for (int i = 0; i < count; ++i) flags[static_cast<size_t>(rows[static_cast<size_t>(i)])] = 1;
  return flags;
}

Eigen::MatrixXd propagate_linear(const WeightedAdjacency& b, const Dag& dag, Eigen::MatrixXd values) {
  // values holds the noise on entry; parents precede children in topological order.
  for (const int i : dag.topological_order()) {
    if (!dag.parents(i).empty()) values.col(i) += values * b.col(i);
  }
  return values;
}

NoiseSpec homogeneous_spec(int d) {
  NoiseSpec spec;
  spec.sigma = Eigen::VectorXd::Ones(d);
  return spec;
}

void overwrite_rows(Eigen::MatrixXd& values, const std::vector<std::uint8_t>& flags, const Eigen::MatrixXd& source) {
  Eigen::Index next = 0;
  for (size_t r = 0; r < flags.size(); ++r) {
    if (flags[r] != 0) values.row(static_cast<Eigen::Index>(r)) = source.row(next++);
  }
}

int count_flags(const std::vector<std::uint8_t>& flags) {
  return static_cast<int>(std::count(flags.begin(), flags.end(), std::uint8_t{1}));
}

}  // namespace

void NoiseSpec::validate(int d) const {
  auto check_sigma = [d](const Eigen::VectorXd& s, const char* what) {
    if (s.size() != d) throw InvalidParameter(std::string(what) + " sigma length differs from d");
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      if (!(s[i] > 0.0) || !std::isfinite(s[i])) throw InvalidParameter(std::string(what) + " sigma must be > 0");
    }
  };
  check_sigma(sigma, "base");
  double total = 0.0;
  for (const auto& g : groups) {
    if (!(g.fraction > 0.0)) throw InvalidParameter("group fractions must be positive");
    check_sigma(g.sigma, "group");
    total += g.fraction;
  }
  if (!groups.empty() && std::abs(total - 1.0) > 1e-9) throw InvalidParameter("group fractions must sum to 1");
  if (!(corrupt_fraction >= 0.0 && corrupt_fraction < 1.0)) {
    throw InvalidParameter("corrupt_fraction must lie in [0, 1)");
  }
  if (corrupt_graph_k < 1) throw InvalidParameter("corrupt_graph_k must be >= 1");
}

void DataMatrix::validate() const {
  if (values.rows() < 1 || values.cols() < 1) throw InvalidParameter("data matrix is empty");
  if (!values.allFinite()) throw InvalidParameter("data matrix contains non-finite entries");
  if (!group.empty() && static_cast<Eigen::Index>(group.size()) != values.rows()) {
    throw InvalidParameter("group labels length differs from row count");
  }
  if (!corrupted.empty() && static_cast<Eigen::Index>(corrupted.size()) != values.rows()) {
    throw InvalidParameter("corruption flags length differs from row count");
  }
}

NoiseSpec make_noise_spec(NoiseKind kind, int d, const NoiseParams& params) {
  if (d < 2) throw InvalidParameter("noise spec requires d >= 2");
  NoiseSpec spec = homogeneous_spec(d);
  switch (kind) {
    case NoiseKind::homogeneous:
      break;
    case NoiseKind::heterogeneous: {
      const int half = (d + 1) / 2;
      Eigen::VectorXd minority(d);
      Eigen::VectorXd majority(d);
      for (int i = 0; i < d; ++i) {
        minority[i] = i < half ? 1.0 : 0.1;
        majority[i] = i < half ? 0.1 : 1.0;
      }
      spec.groups = {{0.1, minority}, {0.9, majority}};
      break;
    }
    case NoiseKind::corrupted:
      if (!(params.p >= 0.0 && params.p < 1.0)) throw InvalidParameter("corruption fraction p must lie in [0, 1)");
      spec.corrupt_fraction = params.p;
      spec.corrupt_graph_k = params.corrupt_graph_k;
      break;
  }
  spec.validate(d);
  return spec;
}

WeightedAdjacency assign_linear_weights(const Dag& dag, double low, double high, std::uint64_t seed) {
  if (!(low > 0.0) || !(high > low)) throw InvalidParameter("coefficient range requires 0 < low < high");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> magnitude(low, high);
  std::bernoulli_distribution negative(0.5);
  const int d = dag.size();
  WeightedAdjacency b = WeightedAdjacency::Zero(d, d);
  for (const auto& [from, to] : dag.edges()) {
    const double m = magnitude(rng);
    b(from, to) = negative(rng) ? -m : m;
  }
  return b;
}

DataMatrix simulate_linear_sem(const WeightedAdjacency& b, int n, const NoiseSpec& noise, std::uint64_t seed) {
  if (b.rows() != b.cols()) throw InvalidParameter("coefficient matrix must be square");
  if (n < 1) throw InvalidParameter("simulate_linear_sem requires n >= 1");
  const int d = static_cast<int>(b.rows());
  noise.validate(d);
  const Dag dag = support_dag(b);

  DataMatrix out;
  out.group = assign_groups(noise, n, seed);
  out.values = propagate_linear(b, dag, draw_noise(noise, out.group, n, d, seed));
  if (noise.corrupt_fraction > 0.0) {
    out.corrupted = pick_corrupted(noise.corrupt_fraction, n, seed);
    const int count = count_flags(out.corrupted);
    if (count > 0) {
      const std::uint64_t model_seed = derive_seed(seed, {kCorruptModel});
      const Dag other = sample_dag({GraphKind::erdos_renyi, noise.corrupt_graph_k}, d, derive_seed(model_seed, {1}));
      const WeightedAdjacency other_b = assign_linear_weights(other, derive_seed(model_seed, {2}));
      const DataMatrix fresh = simulate_linear_sem(other_b, count, homogeneous_spec(d), derive_seed(model_seed, {3}));
      overwrite_rows(out.values, out.corrupted, fresh.values);
    }
  }
  return out;
}

DataMatrix simulate_gp_sem(const Dag& dag, int n, const NoiseSpec& noise, std::uint64_t seed,
                           const GpOptions& options) {
  if (n < 1) throw InvalidParameter("simulate_gp_sem requires n >= 1");
  if (n > options.max_rows) {
    throw ResourceLimit("GP simulation limited to " + std::to_string(options.max_rows) + " rows, requested " +
                        std::to_string(n));
  }
  const int d = dag.size();
  noise.validate(d);

  DataMatrix out;
  out.group = assign_groups(noise, n, seed);
  out.values = draw_noise(noise, out.group, n, d, seed);

  std::mt19937_64 rng(derive_seed(seed, {kMechanism}));
  std::normal_distribution<double> normal(0.0, 1.0);
  for (const int i : dag.topological_order()) {
    const std::vector<int> parents = dag.parents(i);
    if (parents.empty()) continue;
    Eigen::MatrixXd pa(n, static_cast<Eigen::Index>(parents.size()));
    for (size_t c = 0; c < parents.size(); ++c) pa.col(static_cast<Eigen::Index>(c)) = out.values.col(parents[c]);
    const Eigen::VectorXd sq = pa.rowwise().squaredNorm();
    Eigen::MatrixXd gram = (pa * pa.transpose()) * -2.0;
    gram.colwise() += sq;
    gram.rowwise() += sq.transpose();
    gram = (gram * -0.5).array().exp().matrix();

    Eigen::VectorXd z(n);
    for (int r = 0; r < n; ++r) z[r] = normal(rng);

    bool drawn = false;
    for (double jitter = options.initial_jitter; jitter <= options.max_jitter * (1 + 1e-12); jitter *= 10.0) {
      Eigen::MatrixXd k = gram;
      k.diagonal().array() += jitter;
      Eigen::LLT<Eigen::MatrixXd> llt(k);
      if (llt.info() == Eigen::Success) {
        out.values.col(i) += llt.matrixL() * z;
        drawn = true;
        break;
      }
    }
    if (!drawn) throw NumericError("GP kernel factorization failed at maximum jitter for variable " + std::to_string(i));
  }

  if (noise.corrupt_fraction > 0.0) {
    out.corrupted = pick_corrupted(noise.corrupt_fraction, n, seed);
    const int count = count_flags(out.corrupted);
    if (count > 0) {
      const std::uint64_t model_seed = derive_seed(seed, {kCorruptModel});
      const Dag other = sample_dag({GraphKind::erdos_renyi, noise.corrupt_graph_k}, d, derive_seed(model_seed, {1}));
      const DataMatrix fresh = simulate_gp_sem(other, count, homogeneous_spec(d), derive_seed(model_seed, {3}), options);
      overwrite_rows(out.values, out.corrupted, fresh.values);
    }
  }
  return out;
}

void standardize_columns(DataMatrix& data) {
  const Eigen::RowVectorXd mean = data.values.colwise().mean();
  data.values.rowwise() -= mean;
  const Eigen::RowVectorXd sd =
      (data.values.array().square().colwise().sum() / static_cast<double>(data.rows())).sqrt();
  for (Eigen::Index c = 0; c < data.cols(); ++c) {
    if (sd[c] > 0.0) data.values.col(c) /= sd[c];
  }
}

}  // namespace rescore
