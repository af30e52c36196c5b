#include "rescore/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include <json.hpp>

#include "rescore/errors.hpp"
#include "rescore/io.hpp"
#include "rescore/metrics.hpp"
#include "rescore/random.hpp"

namespace rescore::harness {

namespace {

using nlohmann::json;

// Typed access to a JSON object that rejects keys nobody asked about.
class ObjectReader {
 public:
  ObjectReader(const json& node, std::string where) : node_(node), where_(std::move(where)) {
    if (!node_.is_object()) throw InvalidParameter(where_ + ": expected an object");
  }

  template <typename T>
  std::optional<T> get(const std::string& key) {
    seen_.insert(key);
    const auto it = node_.find(key);
    if (it == node_.end() || it->is_null()) return std::nullopt;
    try {
      return it->get<T>();
    } catch (const json::exception&) {
      throw InvalidParameter(where_ + "." + key + ": wrong type");
    }
  }

  const json* child(const std::string& key) {
    seen_.insert(key);
    const auto it = node_.find(key);
    return it == node_.end() || it->is_null() ? nullptr : &*it;
  }

  void finish() const {
    for (const auto& [key, value] : node_.items()) {
      if (!seen_.count(key)) throw InvalidParameter(where_ + ": unknown key '" + key + "'");
    }
  }

 private:
  const json& node_;
  std::string where_;
  std::set<std::string> seen_;
};

template <typename T>
void assign(ObjectReader& r, const std::string& key, T& target) {
  if (auto v = r.get<T>(key)) target = *v;
}

GraphKind parse_graph_kind(const std::string& s) {
  if (s == "er" || s == "ER") return GraphKind::erdos_renyi;
  if (s == "sf" || s == "SF") return GraphKind::scale_free;
  throw InvalidParameter("unknown graph model '" + s + "'");
}

SemKind parse_sem(const std::string& s) {
  if (s == "linear") return SemKind::linear;
  if (s == "gp") return SemKind::gp;
  throw InvalidParameter("unknown SEM kind '" + s + "'");
}

NoiseKind parse_noise(const std::string& s) {
  if (s == "homo" || s == "homogeneous") return NoiseKind::homogeneous;
  if (s == "hetero" || s == "heterogeneous") return NoiseKind::heterogeneous;
  if (s == "corrupt" || s == "corrupted") return NoiseKind::corrupted;
  throw InvalidParameter("unknown noise kind '" + s + "'");
}

const char* noise_name(NoiseKind k) {
  switch (k) {
    case NoiseKind::homogeneous: return "homo";
    case NoiseKind::heterogeneous: return "hetero";
    case NoiseKind::corrupted: return "corrupt";
  }
  return "?";
}

AcyclicityKind parse_h(const std::string& s) {
  if (s == "expm") return AcyclicityKind::expm;
  if (s == "poly") return AcyclicityKind::poly;
  throw InvalidParameter("unknown acyclicity function '" + s + "'");
}

NllVariance parse_variance(const std::string& s) {
  if (s == "fixed") return NllVariance::fixed;
  if (s == "equal") return NllVariance::equal;
  if (s == "non_equal" || s == "non-equal") return NllVariance::non_equal;
  throw InvalidParameter("unknown variance mode '" + s + "'");
}

InnerSolver parse_inner(const std::string& s) {
  if (s == "exact") return InnerSolver::exact;
  if (s == "parametric") return InnerSolver::parametric;
  throw InvalidParameter("unknown inner solver '" + s + "'");
}

Scenario parse_scenario(const json& node, size_t index) {
  ObjectReader r(node, "scenarios[" + std::to_string(index) + "]");
  Scenario s;
  if (auto g = r.get<std::string>("graph")) s.graph.kind = parse_graph_kind(*g);
  assign(r, "k", s.graph.k);
  assign(r, "d", s.d);
  if (auto v = r.get<std::string>("sem")) s.sem = parse_sem(*v);
  assign(r, "n", s.n);
  if (auto v = r.get<std::string>("noise")) s.noise = parse_noise(*v);
  assign(r, "p", s.p);
  assign(r, "standardize", s.standardize);
  if (auto id = r.get<std::string>("id")) {
    s.id = *id;
  } else {
    std::ostringstream name;
    name << (s.graph.kind == GraphKind::erdos_renyi ? "ER" : "SF") << s.graph.k << "-d" << s.d << "-"
         << (s.sem == SemKind::linear ? "linear" : "gp") << "-n" << s.n << "-" << noise_name(s.noise);
    if (s.noise == NoiseKind::corrupted) name << "-p" << io::format_double(s.p);
    s.id = name.str();
  }
  r.finish();
  return s;
}

RescoreConfig parse_rescore(const json& node, const std::string& where) {
  ObjectReader r(node, where);
  RescoreConfig c;
  assign(r, "tau", c.tau);
  if (auto v = r.get<std::string>("inner")) c.inner = parse_inner(*v);
  assign(r, "k_outer", c.k_outer);
  assign(r, "k_inner", c.k_inner);
  assign(r, "k_reweight", c.k_reweight);
  assign(r, "hidden", c.hidden_units);
  assign(r, "temperature", c.temperature);
  assign(r, "learning_rate", c.learning_rate);
  assign(r, "loss_feature", c.loss_feature);
  r.finish();
  return c;
}

MethodSpec parse_method(const json& node, size_t index) {
  const std::string where = "methods[" + std::to_string(index) + "]";
  ObjectReader r(node, where);
  MethodSpec m;
  const auto backbone = r.get<std::string>("backbone");
  if (!backbone) throw InvalidParameter(where + ": 'backbone' is required");
  m.backbone = parse_backbone(*backbone);
  m.learner = LearnerConfig::defaults_for(m.backbone);
  LearnerConfig& l = m.learner;
  assign(r, "lambda", l.lambda);
  assign(r, "thresh", l.w_threshold);
  if (auto v = r.get<std::string>("h")) l.acyclicity = parse_h(*v);
  assign(r, "max_outer", l.max_outer);
  assign(r, "inner_max_iterations", l.inner_max_iterations);
  if (auto v = r.get<std::string>("variance")) l.variance = parse_variance(*v);
  assign(r, "dag_penalty", l.dag_penalty);
  assign(r, "hidden", l.hidden_units);
  assign(r, "l2", l.l2);
  if (const json* rs = r.child("rescore")) m.rescore = parse_rescore(*rs, where + ".rescore");
  if (auto id = r.get<std::string>("id")) {
    m.id = *id;
  } else {
    m.id = *backbone;
    if (m.rescore) m.id += "+rescore";
  }
  r.finish();
  return m;
}

void check_id(const std::string& id, const std::string& what) {
  if (id.empty()) throw InvalidParameter(what + " id must be non-empty");
  if (id.find_first_of(",\"\n\r@") != std::string::npos) {
    throw InvalidParameter(what + " id '" + id + "' contains a reserved character");
  }
}

std::string format_sid(const std::optional<int>& sid) { return sid ? std::to_string(*sid) : std::string(); }

std::string format_opt(const std::optional<double>& v) { return v ? io::format_double(*v) : std::string(); }

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::pair<double, double> mean_sd(const std::vector<double>& v) {
  if (v.empty()) return {std::nan(""), std::nan("")};
  double sum = 0.0;
  for (const double x : v) sum += x;
  const double mean = sum / static_cast<double>(v.size());
  if (v.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (const double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

using RowKey = std::tuple<std::string, std::string, int>;

RowKey key_of(const ResultRow& r) { return {r.scenario, r.method, r.trial}; }

std::vector<ResultRow> read_rows_if_present(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) return {};
  return parse_results(io::read_text(path));
}

}  // namespace

BackboneKind parse_backbone(const std::string& name) {
  if (name == "notears") return BackboneKind::linear_notears;
  if (name == "golem" || name == "nll") return BackboneKind::linear_nll;
  if (name == "notears-mlp" || name == "mlp") return BackboneKind::mlp_notears;
  throw InvalidParameter("unknown backbone '" + name + "'");
}

std::string backbone_name(BackboneKind kind) {
  switch (kind) {
    case BackboneKind::linear_notears: return "notears";
    case BackboneKind::linear_nll: return "golem";
    case BackboneKind::mlp_notears: return "notears-mlp";
  }
  return "?";
}

void BenchConfig::validate() const {
  if (trials < 1) throw InvalidParameter("trials must be >= 1");
  if (jobs < 1) throw InvalidParameter("jobs must be >= 1");
  if (scenarios.empty()) throw InvalidParameter("at least one scenario is required");
  if (methods.empty() && !random_baseline) throw InvalidParameter("at least one method is required");
  std::set<std::string> ids;
  for (const Scenario& s : scenarios) {
    check_id(s.id, "scenario");
    if (!ids.insert(s.id).second) throw InvalidParameter("duplicate scenario id '" + s.id + "'");
    if (s.d < 2) throw InvalidParameter("scenario '" + s.id + "': d must be >= 2");
    if (s.n < 1) throw InvalidParameter("scenario '" + s.id + "': n must be >= 1");
    if (s.graph.k < 1) throw InvalidParameter("scenario '" + s.id + "': k must be >= 1");
    if (s.graph.kind == GraphKind::scale_free && s.graph.k >= s.d) {
      throw InvalidParameter("scenario '" + s.id + "': scale-free k must be < d");
    }
    make_noise_spec(s.noise, s.d, NoiseParams{s.p}).validate(s.d);
    if (s.sem == SemKind::gp && s.n > GpOptions{}.max_rows) {
      throw InvalidParameter("scenario '" + s.id + "': GP SEM limited to n <= " + std::to_string(GpOptions{}.max_rows));
    }
  }
  ids.clear();
  for (const MethodSpec& m : methods) {
    check_id(m.id, "method");
    if (m.id == "random") throw InvalidParameter("method id 'random' is reserved for the baseline");
    if (!ids.insert(m.id).second) throw InvalidParameter("duplicate method id '" + m.id + "'");
    m.learner.validate();
    if (m.rescore) m.rescore->validate();
    if (m.backbone == BackboneKind::mlp_notears) {
      for (const Scenario& s : scenarios) {
        if (s.d > m.learner.max_dims) {
          throw InvalidParameter("method '" + m.id + "' cannot run scenario '" + s.id + "': d exceeds MLP limit");
        }
      }
    }
  }
  for (const double lambda : lambda_sweep) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InvalidParameter("lambda_sweep values must be >= 0");
  }
}

BenchConfig parse_bench_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw InvalidParameter(std::string("config is not valid JSON: ") + e.what());
  }
  ObjectReader r(root, "config");
  BenchConfig cfg;
  assign(r, "trials", cfg.trials);
  assign(r, "base_seed", cfg.base_seed);
  assign(r, "random_baseline", cfg.random_baseline);
  assign(r, "lambda_sweep", cfg.lambda_sweep);
  assign(r, "compute_sid", cfg.compute_sid);
  assign(r, "record_runtime", cfg.record_runtime);
  assign(r, "jobs", cfg.jobs);
  assign(r, "out", cfg.out);
  if (const json* s = r.child("scenarios")) {
    if (!s->is_array()) throw InvalidParameter("config.scenarios: expected an array");
    for (size_t i = 0; i < s->size(); ++i) cfg.scenarios.push_back(parse_scenario((*s)[i], i));
  }
  if (const json* m = r.child("methods")) {
    if (!m->is_array()) throw InvalidParameter("config.methods: expected an array");
    for (size_t i = 0; i < m->size(); ++i) cfg.methods.push_back(parse_method((*m)[i], i));
  }
  r.finish();
  cfg.validate();
  return cfg;
}

BenchConfig load_bench_config(const std::filesystem::path& path) { return parse_bench_config(io::read_text(path)); }

std::vector<ExpandedMethod> expand_methods(const BenchConfig& cfg) {
  std::vector<ExpandedMethod> out;
  for (const MethodSpec& m : cfg.methods) {
    if (cfg.lambda_sweep.empty()) {
      out.push_back({m.id, m.id, std::nullopt, false, &m});
    } else {
      for (const double lambda : cfg.lambda_sweep) {
        out.push_back({m.id + "@lambda=" + io::format_double(lambda), m.id, lambda, false, &m});
      }
    }
  }
  if (cfg.random_baseline) out.push_back({"random", "random", std::nullopt, true, nullptr});
  return out;
}

std::uint64_t data_seed(std::uint64_t base, int scenario, int trial) {
  return derive_seed(base, {0xDA7AULL, static_cast<std::uint64_t>(scenario), static_cast<std::uint64_t>(trial)});
}

std::uint64_t method_seed(std::uint64_t base, int scenario, int method, int trial) {
  return derive_seed(base, {0xF17ULL, static_cast<std::uint64_t>(scenario), static_cast<std::uint64_t>(method),
                            static_cast<std::uint64_t>(trial)});
}

TrialData generate_trial(const Scenario& scenario, std::uint64_t seed) {
  TrialData t{sample_dag(scenario.graph, scenario.d, derive_seed(seed, {0})), std::nullopt, {}};
  const NoiseSpec noise = make_noise_spec(scenario.noise, scenario.d, NoiseParams{scenario.p});
  if (scenario.sem == SemKind::linear) {
    t.weights = assign_linear_weights(t.truth, derive_seed(seed, {1}));
    t.data = simulate_linear_sem(*t.weights, scenario.n, noise, derive_seed(seed, {2}));
  } else {
    t.data = simulate_gp_sem(t.truth, scenario.n, noise, derive_seed(seed, {2}));
  }
  if (scenario.standardize) standardize_columns(t.data);
  return t;
}

std::vector<AggregateRow> aggregate(const std::vector<ResultRow>& rows) {
  std::vector<AggregateRow> out;
  std::map<std::pair<std::string, std::string>, size_t> index;
  std::vector<std::vector<const ResultRow*>> groups;
  for (const ResultRow& r : rows) {
    const auto key = std::make_pair(r.scenario, r.method);
    auto [it, inserted] = index.emplace(key, groups.size());
    if (inserted) {
      groups.emplace_back();
      AggregateRow a;
      a.scenario = r.scenario;
      a.method = r.method;
      out.push_back(a);
    }
    groups[it->second].push_back(&r);
  }
  for (size_t g = 0; g < groups.size(); ++g) {
    AggregateRow& a = out[g];
    std::vector<double> tpr, fdr, shd, sid, runtime;
    bool all_sid = true;
    for (const ResultRow* r : groups[g]) {
      ++a.count;
      if (r->failed) {
        ++a.failed;
        continue;
      }
      tpr.push_back(r->tpr);
      fdr.push_back(r->fdr);
      shd.push_back(r->shd);
      runtime.push_back(r->runtime_s);
      if (r->sid) {
        sid.push_back(*r->sid);
      } else {
        all_sid = false;
      }
    }
    std::tie(a.tpr_mean, a.tpr_sd) = mean_sd(tpr);
    std::tie(a.fdr_mean, a.fdr_sd) = mean_sd(fdr);
    std::tie(a.shd_mean, a.shd_sd) = mean_sd(shd);
    std::tie(a.runtime_mean, a.runtime_sd) = mean_sd(runtime);
    if (all_sid && !sid.empty()) {
      const auto [m, s] = mean_sd(sid);
      a.sid_mean = m;
      a.sid_sd = s;
    }
  }
  return out;
}

std::string format_results(const std::vector<ResultRow>& rows) {
  std::ostringstream out;
  out << kResultsHeader << '\n';
  for (const ResultRow& r : rows) {
    out << r.scenario << ',' << r.method << ',' << r.trial << ',' << r.seed << ',';
    if (r.failed) {
      out << "nan,nan,nan,nan,";
    } else {
      out << io::format_double(r.tpr) << ',' << io::format_double(r.fdr) << ',' << r.shd << ',' << format_sid(r.sid)
          << ',';
    }
    out << io::format_double(r.runtime_s) << '\n';
  }
  return out.str();
}

std::vector<ResultRow> parse_results(const std::string& text) {
  std::vector<ResultRow> rows;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == kResultsHeader) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 9) throw InvalidParameter("results line " + std::to_string(line_no) + ": expected 9 fields");
    try {
      ResultRow r;
      r.scenario = cells[0];
      r.method = cells[1];
      r.trial = std::stoi(cells[2]);
      r.seed = std::stoull(cells[3]);
      r.failed = cells[4] == "nan";
      if (!r.failed) {
        r.tpr = std::stod(cells[4]);
        r.fdr = std::stod(cells[5]);
        r.shd = std::stoi(cells[6]);
        if (!cells[7].empty()) r.sid = std::stoi(cells[7]);
      }
      r.runtime_s = std::stod(cells[8]);
      rows.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw InvalidParameter("results line " + std::to_string(line_no) + ": malformed field");
    }
  }
  return rows;
}

std::string format_aggregates(const std::vector<AggregateRow>& rows) {
  std::ostringstream out;
  out << kAggregatesHeader << '\n';
  for (const AggregateRow& a : rows) {
    out << a.scenario << ',' << a.method << ',' << a.count << ',' << a.failed << ',' << io::format_double(a.tpr_mean)
        << ',' << io::format_double(a.tpr_sd) << ',' << io::format_double(a.fdr_mean) << ','
        << io::format_double(a.fdr_sd) << ',' << io::format_double(a.shd_mean) << ',' << io::format_double(a.shd_sd)
        << ',' << format_opt(a.sid_mean) << ',' << format_opt(a.sid_sd) << ',' << io::format_double(a.runtime_mean)
        << ',' << io::format_double(a.runtime_sd) << '\n';
  }
  return out.str();
}

ResultsTable run_benchmark(const BenchConfig& cfg, const std::filesystem::path& out_dir) {
  cfg.validate();
  std::filesystem::create_directories(out_dir);
  const auto results_path = out_dir / "results.csv";
  const auto partial_path = out_dir / "results.partial.csv";
  const std::vector<ExpandedMethod> methods = expand_methods(cfg);

  std::map<RowKey, ResultRow> done;
  for (const auto& path : {results_path, partial_path}) {
    for (ResultRow& r : read_rows_if_present(path)) done[key_of(r)] = std::move(r);
  }

  // One work unit per (scenario, trial): the data set is generated once and shared by its methods.
  struct Unit {
    int scenario;
    int trial;
    std::vector<int> methods;
  };
  std::vector<Unit> units;
  for (int s = 0; s < static_cast<int>(cfg.scenarios.size()); ++s) {
    for (int t = 0; t < cfg.trials; ++t) {
      Unit u{s, t, {}};
      for (int m = 0; m < static_cast<int>(methods.size()); ++m) {
        const auto it = done.find({cfg.scenarios[s].id, methods[m].id, t});
        if (it == done.end() || it->second.seed != method_seed(cfg.base_seed, s, m, t)) u.methods.push_back(m);
      }
      if (!u.methods.empty()) units.push_back(std::move(u));
    }
  }

  std::mutex mutex;
  std::ofstream partial;
  if (!units.empty()) {
    const bool fresh = !std::filesystem::exists(partial_path);
    partial.open(partial_path, std::ios::app);
    if (!partial) throw InvalidParameter("cannot write " + partial_path.string());
    if (fresh) partial << kResultsHeader << '\n' << std::flush;
  }

  auto run_unit = [&](const Unit& u) {
    const Scenario& scenario = cfg.scenarios[static_cast<size_t>(u.scenario)];
    const TrialData trial = generate_trial(scenario, data_seed(cfg.base_seed, u.scenario, u.trial));
    for (const int m : u.methods) {
      const ExpandedMethod& method = methods[static_cast<size_t>(m)];
      ResultRow row;
      row.scenario = scenario.id;
      row.method = method.id;
      row.trial = u.trial;
      row.seed = method_seed(cfg.base_seed, u.scenario, m, u.trial);
      const auto start = std::chrono::steady_clock::now();
      try {
        Dag estimate(scenario.d);
        if (method.random) {
          estimate = sample_dag(GraphModel{GraphKind::erdos_renyi, scenario.graph.k}, scenario.d, row.seed);
        } else {
          LearnerConfig lcfg = method.spec->learner;
          lcfg.seed = row.seed;
          if (method.lambda) lcfg.lambda = *method.lambda;
          if (method.spec->rescore) {
            RescoreConfig rcfg = *method.spec->rescore;
            rcfg.seed = derive_seed(row.seed, {1});
            estimate = fit_rescore(method.spec->backbone, trial.data, lcfg, rcfg).graph;
          } else {
            estimate = fit_backbone(method.spec->backbone, trial.data, SampleWeights::uniform(scenario.n), lcfg).graph;
          }
        }
        const MetricsReport report = evaluate_graph(estimate, trial.truth);
        row.tpr = report.tpr;
        row.fdr = report.fdr;
        row.shd = report.shd;
        if (cfg.compute_sid) row.sid = sid(estimate, trial.truth);
      } catch (const std::exception&) {
        row.failed = true;
      }
      if (cfg.record_runtime) {
        row.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      }
      const std::lock_guard<std::mutex> lock(mutex);
      partial << format_results({row}).substr(std::string(kResultsHeader).size() + 1) << std::flush;
      done[key_of(row)] = std::move(row);
    }
  };

  std::atomic<size_t> next{0};
  std::exception_ptr failure;
  auto worker = [&] {
    for (size_t i = next++; i < units.size(); i = next++) {
      try {
        run_unit(units[i]);
      } catch (...) {
        const std::lock_guard<std::mutex> lock(mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int threads = std::min<int>(cfg.jobs, static_cast<int>(units.size()));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (partial.is_open()) partial.close();
  if (failure) std::rethrow_exception(failure);

  ResultsTable table;
  for (int s = 0; s < static_cast<int>(cfg.scenarios.size()); ++s) {
    for (const ExpandedMethod& m : methods) {
      for (int t = 0; t < cfg.trials; ++t) table.rows.push_back(done.at({cfg.scenarios[s].id, m.id, t}));
    }
  }
  table.aggregates = aggregate(table.rows);

  io::write_text(results_path, format_results(table.rows));
  io::write_text(out_dir / "aggregates.csv", format_aggregates(table.aggregates));
  if (!cfg.lambda_sweep.empty()) {
    std::ostringstream sweep;
    sweep << kSweepHeader << '\n';
    for (const AggregateRow& a : table.aggregates) {
      for (const ExpandedMethod& m : methods) {
        if (m.id != a.method || !m.lambda) continue;
        sweep << a.scenario << ',' << m.base_id << ',' << io::format_double(*m.lambda) << ','
              << io::format_double(a.shd_mean) << ',' << io::format_double(a.shd_sd) << '\n';
      }
    }
    io::write_text(out_dir / "lambda_sweep.csv", sweep.str());
  }
  std::filesystem::remove(partial_path);
  return table;
}

}  // namespace rescore::harness
