#include <cctype>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "rescore/errors.hpp"
#include "rescore/harness.hpp"
#include "rescore/io.hpp"
#include "rescore/learners.hpp"
#include "rescore/metrics.hpp"
#include "rescore/random.hpp"
#include "rescore/reweighting.hpp"
#include "rescore/sem.hpp"

using namespace rescore;

namespace {

constexpr int kExitInvalid = 2;
constexpr int kExitFitFailed = 3;

// Every flag can also be supplied as RESCORE_<FLAG> (dashes become underscores).
std::string env_name(const std::string& flag) {
  std::string out = "RESCORE_";
  for (const char c : flag) out += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

template <typename T>
CLI::Option* opt(CLI::App* app, const std::string& flag, T& target, const std::string& help) {
  return app->add_option("--" + flag, target, help)->envname(env_name(flag));
}

CLI::Option* flag(CLI::App* app, const std::string& name, bool& target, const std::string& help) {
  return app->add_flag("--" + name, target, help)->envname(env_name(name));
}

const std::map<std::string, GraphKind> kGraphs{{"er", GraphKind::erdos_renyi}, {"sf", GraphKind::scale_free}};
const std::map<std::string, harness::SemKind> kSems{{"linear", harness::SemKind::linear},
                                                   {"gp", harness::SemKind::gp}};
const std::map<std::string, NoiseKind> kNoise{
    {"homo", NoiseKind::homogeneous}, {"hetero", NoiseKind::heterogeneous}, {"corrupt", NoiseKind::corrupted}};
const std::map<std::string, AcyclicityKind> kH{{"expm", AcyclicityKind::expm}, {"poly", AcyclicityKind::poly}};
const std::map<std::string, InnerSolver> kInner{{"exact", InnerSolver::exact},
                                                {"parametric", InnerSolver::parametric}};
const std::map<std::string, BackboneKind> kMethods{{"notears", BackboneKind::linear_notears},
                                                   {"golem", BackboneKind::linear_nll},
                                                   {"notears-mlp", BackboneKind::mlp_notears}};

struct SimulateArgs {
  std::string graph = "er";
  int k = 2;
  int d = 10;
  std::string sem = "linear";
  int n = 1000;
  std::string noise = "homo";
  double p = 0.0;
  std::uint64_t seed = 0;
  std::string out;
  std::string graph_out;
  std::string labels_out;
  bool header = false;
  bool standardize = false;
};

struct FitArgs {
  std::string method = "notears";
  std::string data;
  std::optional<double> lambda;
  std::optional<double> thresh;
  std::string h = "expm";
  std::optional<int> max_outer;
  std::uint64_t seed = 0;
  std::string out_cont;
  std::string out_graph;
  std::string losses_out;
};

struct RescoreArgs {
  double tau = 0.9;
  std::string inner = "exact";
  int k_outer = 0;
  int k_inner = 100;
  int k_reweight = 1;
  std::string weights_out;
};

struct EvalArgs {
  std::string est;
  std::string truth;
  bool sid = false;
};

struct BenchArgs {
  std::string config;
  std::string out;
  std::optional<int> jobs;
};

void add_fit_options(CLI::App* app, FitArgs& a) {
  opt(app, "method", a.method, "Backbone")->check(CLI::IsMember(kMethods));
  opt(app, "data", a.data, "Data CSV (n rows, d columns)")->required();
  opt(app, "lambda", a.lambda, "Sparsity weight (backbone default when omitted)");
  opt(app, "thresh", a.thresh, "Edge threshold on the continuous output");
  opt(app, "h", a.h, "Acyclicity function")->check(CLI::IsMember(kH));
  opt(app, "max-outer", a.max_outer, "Outer iteration cap");
  opt(app, "seed", a.seed, "Seed for stochastic initialisation");
  opt(app, "out-cont", a.out_cont, "Continuous matrix CSV");
  opt(app, "out-graph", a.out_graph, "Thresholded graph JSON");
  opt(app, "losses-out", a.losses_out, "Per-sample losses, one per line");
}

LearnerConfig learner_config(const FitArgs& a) {
  LearnerConfig cfg = LearnerConfig::defaults_for(kMethods.at(a.method));
  if (a.lambda) cfg.lambda = *a.lambda;
  if (a.thresh) cfg.w_threshold = *a.thresh;
  if (a.max_outer) cfg.max_outer = *a.max_outer;
  cfg.acyclicity = kH.at(a.h);
  cfg.seed = a.seed;
  return cfg;
}

DataMatrix load_data(const std::string& path) {
  DataMatrix x;
  x.values = io::read_matrix_csv(path);
  x.validate();
  return x;
}

void write_fit(const FitArgs& a, const FitResult& r) {
  if (!a.out_cont.empty()) io::write_matrix_csv(a.out_cont, r.continuous);
  if (!a.out_graph.empty()) io::write_graph(a.out_graph, r.graph);
  if (!a.losses_out.empty()) io::write_vector(a.losses_out, r.losses);
  nlohmann::json summary{{"edges", r.graph.edge_count()},
                         {"h", r.diagnostics.h},
                         {"outer_iterations", r.diagnostics.outer_iterations},
                         {"converged", r.diagnostics.converged}};
  std::cout << summary.dump() << '\n';
}

int run_simulate(const SimulateArgs& a) {
  harness::Scenario s;
  s.graph = GraphModel{kGraphs.at(a.graph), a.k};
  s.d = a.d;
  s.sem = kSems.at(a.sem);
  s.n = a.n;
  s.noise = kNoise.at(a.noise);
  s.p = a.p;
  s.standardize = a.standardize;
  const harness::TrialData t = harness::generate_trial(s, a.seed);
  io::write_matrix_csv(a.out, t.data.values, a.header);
  io::write_graph(a.graph_out, t.truth, t.weights ? &*t.weights : nullptr);
  if (!a.labels_out.empty()) io::write_labels_csv(a.labels_out, t.data);
  return 0;
}

int run_fit(const FitArgs& a) {
  const DataMatrix x = load_data(a.data);
  const BackboneKind kind = kMethods.at(a.method);
  write_fit(a, fit_backbone(kind, x, SampleWeights::uniform(static_cast<int>(x.rows())), learner_config(a)));
  return 0;
}

int run_rescore(const FitArgs& a, const RescoreArgs& r) {
  const DataMatrix x = load_data(a.data);
  RescoreConfig rcfg;
  rcfg.tau = r.tau;
  rcfg.inner = kInner.at(r.inner);
  rcfg.k_outer = r.k_outer;
  rcfg.k_inner = r.k_inner;
  rcfg.k_reweight = r.k_reweight;
  rcfg.seed = rescore::derive_seed(a.seed, {1});
  const FitResult result = fit_rescore(kMethods.at(a.method), x, learner_config(a), rcfg);
  if (!r.weights_out.empty()) io::write_vector(r.weights_out, result.diagnostics.final_weights);
  write_fit(a, result);
  return 0;
}

int run_eval(const EvalArgs& a) {
  const Dag est = io::read_graph(a.est).graph;
  const Dag truth = io::read_graph(a.truth).graph;
  const MetricsReport m = evaluate_graph(est, truth);
  nlohmann::json record{{"tpr", m.tpr},
                        {"fdr", m.fdr},
                        {"shd", m.shd},
                        {"true_edges", m.confusion.true_edges},
                        {"predicted_edges", m.confusion.predicted_edges},
                        {"reversed", m.confusion.reversed}};
  if (a.sid) record["sid"] = sid(est, truth);
  std::cout << record.dump() << '\n';
  return 0;
}

int run_bench(const BenchArgs& a) {
  harness::BenchConfig cfg = harness::load_bench_config(a.config);
  if (a.jobs) cfg.jobs = *a.jobs;
  const std::string out = a.out.empty() ? cfg.out : a.out;
  if (out.empty()) throw InvalidParameter("no output directory: pass --out or set 'out' in the config");
  const harness::ResultsTable table = harness::run_benchmark(cfg, out);
  int failed = 0;
  for (const auto& row : table.rows) failed += row.failed ? 1 : 0;
  std::cout << nlohmann::json{{"rows", table.rows.size()}, {"failed", failed}, {"out", out}}.dump() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Causal structure learning with adversarial sample reweighting"};
  app.set_help_flag("--help", "Print this help message and exit");
  app.require_subcommand(1);

  SimulateArgs sim;
  CLI::App* simulate = app.add_subcommand("simulate", "Sample a DAG and data from an SEM");
  opt(simulate, "graph", sim.graph, "Random graph model")->check(CLI::IsMember(kGraphs));
  opt(simulate, "k", sim.k, "Expected edges per node");
  opt(simulate, "d", sim.d, "Number of variables");
  opt(simulate, "sem", sim.sem, "Mechanism family")->check(CLI::IsMember(kSems));
  opt(simulate, "n", sim.n, "Number of samples");
  opt(simulate, "noise", sim.noise, "Noise regime")->check(CLI::IsMember(kNoise));
  opt(simulate, "p", sim.p, "Corrupted fraction");
  opt(simulate, "seed", sim.seed, "Seed");
  opt(simulate, "out", sim.out, "Data CSV")->required();
  opt(simulate, "graph-out", sim.graph_out, "Ground-truth graph JSON")->required();
  opt(simulate, "labels-out", sim.labels_out, "Per-row group and corruption labels");
  flag(simulate, "header", sim.header, "Write an x1..xd header row");
  flag(simulate, "standardize", sim.standardize, "Scale columns to zero mean and unit variance");

  FitArgs fit_args;
  CLI::App* fit = app.add_subcommand("fit", "Fit a backbone under uniform weights");
  add_fit_options(fit, fit_args);

  FitArgs rescore_fit;
  RescoreArgs rs;
  CLI::App* rescore = app.add_subcommand("rescore", "Fit a backbone with adaptive sample reweighting");
  add_fit_options(rescore, rescore_fit);
  opt(rescore, "tau", rs.tau, "Cutoff threshold in (0, 1]");
  opt(rescore, "inner", rs.inner, "Inner maximisation solver")->check(CLI::IsMember(kInner));
  opt(rescore, "k-outer", rs.k_outer, "Outer epochs (0: until the backbone finishes)");
  opt(rescore, "k-inner", rs.k_inner, "Inner ascent steps (parametric solver)");
  opt(rescore, "k-reweight", rs.k_reweight, "First epoch that reweights");
  opt(rescore, "weights-out", rs.weights_out, "Final sample weights, one per line");

  EvalArgs ev;
  CLI::App* eval = app.add_subcommand("eval", "Compare an estimated graph with the truth");
  opt(eval, "est", ev.est, "Estimated graph JSON")->required();
  opt(eval, "truth", ev.truth, "True graph JSON")->required();
  flag(eval, "sid", ev.sid, "Also compute the structural intervention distance");

  BenchArgs bn;
  CLI::App* bench = app.add_subcommand("bench", "Run a benchmark configuration");
  opt(bench, "config", bn.config, "Benchmark JSON")->required();
  opt(bench, "out", bn.out, "Output directory");
  opt(bench, "jobs", bn.jobs, "Worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*simulate) return run_simulate(sim);
    if (*fit) return run_fit(fit_args);
    if (*rescore) return run_rescore(rescore_fit, rs);
    if (*eval) return run_eval(ev);
    if (*bench) return run_bench(bn);
  } catch (const InvalidParameter& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const NumericError& e) {
    std::cerr << "fit failed: " << e.what() << '\n';
    return kExitFitFailed;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
