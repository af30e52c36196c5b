#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rescore/graphs.hpp"
#include "rescore/learners.hpp"
#include "rescore/reweighting.hpp"
#include "rescore/sem.hpp"

namespace rescore::harness {

enum class SemKind { linear, gp };

struct Scenario {
  std::string id;
  GraphModel graph{GraphKind::erdos_renyi, 2};
  int d = 10;
  SemKind sem = SemKind::linear;
  int n = 2000;
  NoiseKind noise = NoiseKind::homogeneous;
  double p = 0.0;  // corrupted fraction
  bool standardize = false;
};

struct MethodSpec {
  std::string id;
  BackboneKind backbone = BackboneKind::linear_notears;
  LearnerConfig learner;
  std::optional<RescoreConfig> rescore;  // empty: plain backbone
};

struct BenchConfig {
  std::vector<Scenario> scenarios;
  std::vector<MethodSpec> methods;
  int trials = 10;
  std::uint64_t base_seed = 0;
  bool random_baseline = false;
  std::vector<double> lambda_sweep;  // each method is run once per value
  bool compute_sid = false;
  bool record_runtime = false;  // off: runtime_s is written as 0 so reruns are byte-identical
  int jobs = 1;
  std::string out;  // optional default output directory

  void validate() const;
};

/// Parses the JSON config; unknown keys and bad values throw InvalidParameter.
[[nodiscard]] BenchConfig parse_bench_config(const std::string& json_text);
[[nodiscard]] BenchConfig load_bench_config(const std::filesystem::path& path);

[[nodiscard]] BackboneKind parse_backbone(const std::string& name);
[[nodiscard]] std::string backbone_name(BackboneKind kind);

/// Methods after the lambda sweep has been expanded, in seed-index order. The random
/// baseline, when requested, is appended last.
struct ExpandedMethod {
  std::string id;
  std::string base_id;
  std::optional<double> lambda;
  bool random = false;
  const MethodSpec* spec = nullptr;
};
[[nodiscard]] std::vector<ExpandedMethod> expand_methods(const BenchConfig& cfg);

[[nodiscard]] std::uint64_t data_seed(std::uint64_t base, int scenario, int trial);
[[nodiscard]] std::uint64_t method_seed(std::uint64_t base, int scenario, int method, int trial);

struct TrialData {
  Dag truth;
  std::optional<WeightedAdjacency> weights;  // linear SEMs only
  DataMatrix data;
};
[[nodiscard]] TrialData generate_trial(const Scenario& scenario, std::uint64_t seed);

struct ResultRow {
  std::string scenario;
  std::string method;
  int trial = 0;
  std::uint64_t seed = 0;
  bool failed = false;
  double tpr = 0.0;
  double fdr = 0.0;
  int shd = 0;
  std::optional<int> sid;
  double runtime_s = 0.0;
};

struct AggregateRow {
  std::string scenario;
  std::string method;
  int count = 0;
  int failed = 0;
  double tpr_mean = 0.0, tpr_sd = 0.0;
  double fdr_mean = 0.0, fdr_sd = 0.0;
  double shd_mean = 0.0, shd_sd = 0.0;
  std::optional<double> sid_mean, sid_sd;
  double runtime_mean = 0.0, runtime_sd = 0.0;
};

struct ResultsTable {
  std::vector<ResultRow> rows;
  std::vector<AggregateRow> aggregates;
};

inline constexpr const char* kResultsHeader = "scenario,method,trial,seed,tpr,fdr,shd,sid,runtime_s";
inline constexpr const char* kAggregatesHeader =
    "scenario,method,count,failed,tpr_mean,tpr_sd,fdr_mean,fdr_sd,shd_mean,shd_sd,sid_mean,sid_sd,runtime_mean,"
    "runtime_sd";
inline constexpr const char* kSweepHeader = "scenario,method,x,y,sigma";

/// Mean and sample standard deviation (n - 1) of successful rows, grouped in row order.
[[nodiscard]] std::vector<AggregateRow> aggregate(const std::vector<ResultRow>& rows);

[[nodiscard]] std::string format_results(const std::vector<ResultRow>& rows);
[[nodiscard]] std::vector<ResultRow> parse_results(const std::string& text);
[[nodiscard]] std::string format_aggregates(const std::vector<AggregateRow>& rows);

/// Runs every (scenario, method, trial) not already present in `out_dir`, then writes
/// results.csv, aggregates.csv and, with a lambda sweep, lambda_sweep.csv.
ResultsTable run_benchmark(const BenchConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace rescore::harness
