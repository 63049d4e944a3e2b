#include "isdbandit/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace isdbandit {

// --- Configuration ------------------------------------------------------------

void ExperimentConfig::validate() const {
  if (repetitions < 1) throw InvalidInput("repetitions must be at least 1");
  if (policies.empty()) throw InvalidInput("config lists no policies");
  if (environment != "synthetic" && environment != "hypercube")
    throw InvalidInput("unknown environment '" + environment + "'");
  if (!sweep.param.empty() && sweep.values.empty())
    throw InvalidInput("sweep '" + sweep.param + "' has no values");
  std::set<std::string> ids;
  for (const auto& pc : policies) {
    if (pc.id.empty() || pc.id.find_first_of(",\"\n") != std::string::npos)
      throw InvalidInput("policy id '" + pc.id + "' is empty or contains , \" or newline");
    if (!ids.insert(pc.id).second) throw InvalidInput("duplicate policy id '" + pc.id + "'");
    if (environment == "hypercube" && pc.kind == "isd_linucb")
      throw InvalidInput("isd_linucb needs the synthetic environment");
  }
  if (experiment.find_first_of(",\"\n") != std::string::npos)
    throw InvalidInput("experiment name contains , \" or newline");
  for (double v : sweep.values) (void)apply_sweep(instance, sweep.param, v);
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  j = nlohmann::json{{"experiment", c.experiment},
                     {"environment", c.environment},
                     {"instance", c.instance},
                     {"sweep", {{"param", c.sweep.param}, {"values", c.sweep.values}}},
                     {"policies", c.policies},
                     {"repetitions", c.repetitions},
                     {"root_seed", c.root_seed},
                     {"resample_instance", c.resample_instance}};
}

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  const ExperimentConfig d;
  c.experiment = j.value("experiment", d.experiment);
  c.environment = j.value("environment", d.environment);
  c.instance = j.value("instance", InstanceConfig{});
  c.sweep = {};
  if (j.contains("sweep")) {
    const auto& s = j.at("sweep");
    c.sweep.param = s.value("param", std::string());
    c.sweep.values = s.value("values", std::vector<double>{});
  }
  c.policies = j.at("policies").get<std::vector<PolicyConfig>>();
  c.repetitions = j.value("repetitions", d.repetitions);
  c.root_seed = j.value("root_seed", d.root_seed);
  c.resample_instance = j.value("resample_instance", d.resample_instance);
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  ExperimentConfig cfg;
  try {
    cfg = nlohmann::json::parse(in).get<ExperimentConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("malformed config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

InstanceConfig apply_sweep(InstanceConfig base, const std::string& param, double value) {
  if (param.empty()) return base;
  auto as_int = [&](int& field) {
    if (value != std::round(value)) throw InvalidInput("sweep '" + param + "' needs integer values");
    field = static_cast<int>(value);
  };
  if (param == "p") as_int(base.p);
  else if (param == "p_res") as_int(base.p_res);
  else if (param == "K") as_int(base.n_actions);
  else if (param == "T0") as_int(base.T0);
  else if (param == "T") as_int(base.T);
  else if (param == "cov_windows") as_int(base.cov_windows);
  else if (param == "noise_sigma") base.noise_sigma = value;
  else if (param == "drift_amplitude") base.drift_amplitude = value;
  else throw InvalidInput("unknown sweep parameter '" + param + "'");
  return base;
}

// --- Episodes -----------------------------------------------------------------

namespace {

template <typename E>
[[noreturn]] void rethrow_annotated(const E& e, long t, const std::string& kind) {
  throw E(std::string(e.what()) + " [round " + std::to_string(t) + ", policy " + kind + "]");
}

}  // namespace

RegretTrace run_episode(const Environment& env, Policy& policy, int T, const EpisodeStreams& streams) {
  if (T < 0) throw InvalidInput("horizon must be nonnegative");
  RegretTrace trace;
  trace.inst_regret.reserve(T);
  trace.cum_regret.reserve(T);
  trace.actions.reserve(T);
  double cum = 0.0;
  for (long t = 1; t <= T; ++t) {
    try {
      policy.begin_round(t);
      const Candidates c = env.candidates(t, streams.feature_stream);
      const int a = policy.select_action(c.features);
      Engine noise(derive_seed(streams.noise_seed, t));
      const double r = reward(env, t, c.features[a], noise);
      const double reg = instantaneous_regret(env, t, c.features[a], c.features);
      policy.update(c.features[a], r);
      cum += reg;
      trace.inst_regret.push_back(reg);
      trace.cum_regret.push_back(cum);
      trace.actions.push_back(a);
    } catch (const NumericalError& e) {
      throw NumericalError(std::string(e.what()) + " [round " + std::to_string(t) + ", policy " +
                               policy.kind() + "]",
                           e.condition());
    } catch (const InvalidInput& e) {
      rethrow_annotated(e, t, policy.kind());
    }
  }
  return trace;
}

void record_isd_diagnostics(RegretTrace& trace, const IsdLinUcb& policy,
                            const SyntheticInstance& instance) {
  const OfflineFit& fit = policy.fit();
  trace.lambda0_hat = fit.lambda0_hat;
  trace.delta_pi_hat = projector_distance(fit.basis.u_inv, instance.basis.u_inv);
  trace.beta_err = (fit.beta_inv() - instance.beta_inv()).norm();
  if (policy.oracle() != OracleTier::subspaces_and_beta && fit.basis.p_inv() > 0) {
    // confidence event for the projection of beta onto the estimated subspace
    const Vector err = fit.basis.u_inv.transpose() * instance.beta_inv() - fit.beta_coords;
    const double norm = std::sqrt(std::max(0.0, err.dot(fit.inv_gram * err)));
    trace.coverage = norm <= bonus_scale(fit.rho_inv, policy.params().convention) ? 1.0 : 0.0;
  }
}

// --- Grid -----------------------------------------------------------------------

int default_thread_count() {
  if (const char* env = std::getenv("ISDBANDIT_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

struct UnitOutput {
  std::vector<RegretTrace> traces;
  std::vector<CellFailure> failures;
};

UnitOutput run_unit(const ExperimentConfig& cfg, std::size_t sweep_idx, int rep) {
  UnitOutput out;
  const bool swept = !cfg.sweep.param.empty();
  const double sweep_value = swept ? cfg.sweep.values[sweep_idx] : kNaN;
  const InstanceConfig ic =
      swept ? apply_sweep(cfg.instance, cfg.sweep.param, sweep_value) : cfg.instance;
  const std::uint64_t instance_seed = cfg.resample_instance
                                          ? derive_seed(cfg.root_seed, 1, rep)
                                          : derive_seed(cfg.root_seed, 1);
  const EpisodeStreams streams{derive_seed(cfg.root_seed, 3, sweep_idx, rep),
                               derive_seed(cfg.root_seed, 4, sweep_idx, rep)};

  std::unique_ptr<Environment> env;
  const SyntheticInstance* synthetic = nullptr;
  OfflineLog log;
  try {
    Engine rng(instance_seed);
    if (cfg.environment == "hypercube") {
      env = std::make_unique<HypercubeInstance>(hypercube_worst_case(ic.p, ic.T, rng));
    } else {
      auto inst = std::make_unique<SyntheticInstance>(sample_instance(ic, rng));
      Engine log_rng(derive_seed(instance_seed, 2));
      log = generate_offline_log(*inst, log_rng);
      synthetic = inst.get();
      env = std::move(inst);
    }
  } catch (const std::exception& e) {
    for (const auto& pc : cfg.policies)
      out.failures.push_back({sweep_value, rep, pc.id, std::string("instance: ") + e.what()});
    return out;
  }

  for (std::size_t k = 0; k < cfg.policies.size(); ++k) {
    const PolicyConfig& pc = cfg.policies[k];
    const std::uint64_t policy_seed = derive_seed(cfg.root_seed, 5, sweep_idx, rep, k);
    try {
      PolicyContext ctx;
      ctx.env = env.get();
      ctx.log = synthetic ? &log : nullptr;
      if (synthetic) ctx.truth = truth_of(*synthetic);
      ctx.horizon = ic.T;
      ctx.seed = policy_seed;
      std::unique_ptr<Policy> policy = make_policy(pc, ctx);
      RegretTrace trace = run_episode(*env, *policy, ic.T, streams);
      trace.policy = pc.id;
      trace.repetition = rep;
      trace.sweep_value = sweep_value;
      if (synthetic) trace.lambda0_hat = log.lambda0_hat;
      if (const auto* isd = dynamic_cast<const IsdLinUcb*>(policy.get()); isd && synthetic)
        record_isd_diagnostics(trace, *isd, *synthetic);
      out.traces.push_back(std::move(trace));
    } catch (const std::exception& e) {
      out.failures.push_back({sweep_value, rep, pc.id,
                              std::string(e.what()) + " [seed " + std::to_string(policy_seed) + "]"});
    }
  }
  return out;
}

}  // namespace

GridResult run_grid(const ExperimentConfig& config, int threads) {
  config.validate();
  const std::size_t n_sweep = config.sweep.param.empty() ? 1 : config.sweep.values.size();
  const std::size_t n_units = n_sweep * static_cast<std::size_t>(config.repetitions);
  std::vector<UnitOutput> outputs(n_units);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t u = next++; u < n_units; u = next++)
      outputs[u] = run_unit(config, u / config.repetitions, static_cast<int>(u % config.repetitions));
  };
  if (threads <= 0) threads = default_thread_count();
  const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(threads), n_units);
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  }
  GridResult result;
  for (auto& o : outputs) {
    std::move(o.traces.begin(), o.traces.end(), std::back_inserter(result.traces));
    std::move(o.failures.begin(), o.failures.end(), std::back_inserter(result.failures));
  }
  return result;
}

std::vector<ResultRow> to_rows(const ExperimentConfig& config, const GridResult& result) {
  std::vector<ResultRow> rows;
  for (const auto& tr : result.traces) {
    for (std::size_t i = 0; i < tr.inst_regret.size(); ++i) {
      ResultRow r;
      r.experiment = config.experiment;
      r.policy = tr.policy;
      r.sweep_param = config.sweep.param;
      r.sweep_value = tr.sweep_value;
      r.repetition = tr.repetition;
      r.t = static_cast<int>(i + 1);
      r.inst_regret = tr.inst_regret[i];
      r.cum_regret = tr.cum_regret[i];
      r.lambda0_hat = tr.lambda0_hat;
      r.delta_pi_hat = tr.delta_pi_hat;
      r.beta_err = tr.beta_err;
      r.coverage = tr.coverage;
      rows.push_back(std::move(r));
    }
  }
  return rows;
}

// --- Aggregation ------------------------------------------------------------------

namespace {

bool same_double(double a, double b) {
  return (std::isnan(a) && std::isnan(b)) || a == b;
}

std::string fmt17(double x) {
  if (std::isnan(x)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

bool ResultRow::operator==(const ResultRow& o) const {
  return experiment == o.experiment && policy == o.policy && sweep_param == o.sweep_param &&
         same_double(sweep_value, o.sweep_value) && repetition == o.repetition && t == o.t &&
         same_double(inst_regret, o.inst_regret) && same_double(cum_regret, o.cum_regret) &&
         same_double(lambda0_hat, o.lambda0_hat) && same_double(delta_pi_hat, o.delta_pi_hat) &&
         same_double(beta_err, o.beta_err) && same_double(coverage, o.coverage);
}

std::vector<AggregateRow> aggregate(const std::vector<ResultRow>& rows) {
  using Key = std::tuple<std::string, std::string, int>;
  std::map<Key, std::size_t> index;
  std::vector<AggregateRow> out;
  std::vector<std::vector<std::pair<double, double>>> samples;
  for (const auto& r : rows) {
    const Key key{r.policy, fmt17(r.sweep_value), r.t};
    auto [it, inserted] = index.try_emplace(key, out.size());
    if (inserted) {
      AggregateRow a;
      a.policy = r.policy;
      a.sweep_value = r.sweep_value;
      a.t = r.t;
      out.push_back(a);
      samples.emplace_back();
    }
    samples[it->second].emplace_back(r.cum_regret, r.inst_regret);
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& s = samples[i];
    const double n = static_cast<double>(s.size());
    double sc = 0.0, si = 0.0;
    for (const auto& [c, r] : s) {
      sc += c;
      si += r;
    }
    out[i].n = static_cast<int>(s.size());
    out[i].mean_cum = sc / n;
    out[i].mean_inst = si / n;
    if (s.size() > 1) {
      double vc = 0.0, vi = 0.0;
      for (const auto& [c, r] : s) {
        vc += (c - out[i].mean_cum) * (c - out[i].mean_cum);
        vi += (r - out[i].mean_inst) * (r - out[i].mean_inst);
      }
      out[i].std_cum = std::sqrt(vc / (n - 1.0));
      out[i].std_inst = std::sqrt(vi / (n - 1.0));
    }
  }
  return out;
}

std::vector<std::pair<double, double>> final_regret_curve(const std::vector<AggregateRow>& agg,
                                                          const std::string& policy) {
  std::vector<std::pair<double, double>> curve;
  std::vector<int> last_t;
  for (const auto& a : agg) {
    if (a.policy != policy) continue;
    auto it = std::find_if(curve.begin(), curve.end(),
                           [&](const auto& c) { return same_double(c.first, a.sweep_value); });
    if (it == curve.end()) {
      curve.emplace_back(a.sweep_value, a.mean_cum);
      last_t.push_back(a.t);
    } else if (a.t > last_t[it - curve.begin()]) {
      it->second = a.mean_cum;
      last_t[it - curve.begin()] = a.t;
    }
  }
  return curve;
}

// --- Export / import ----------------------------------------------------------------

namespace {

const char* kColumns[] = {"experiment", "policy",      "sweep_param", "sweep_value",
                          "repetition", "t",           "inst_regret", "cum_regret",
                          "lambda0_hat", "delta_pi_hat", "beta_err",   "coverage"};

std::string json_number(double x) { return std::isnan(x) ? "null" : fmt17(x); }

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s) {
  if (s.empty() || s == "nan" || s == "NaN") return kNaN;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw IoError("cannot parse number '" + s + "'");
  return v;
}

double json_double(const nlohmann::json& j, const char* key) {
  const auto& v = j.at(key);
  return v.is_null() ? kNaN : v.get<double>();
}

}  // namespace

void export_rows(const std::vector<ResultRow>& rows, const std::filesystem::path& path,
                 ExportFormat format) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  if (format == ExportFormat::csv) {
    for (std::size_t i = 0; i < std::size(kColumns); ++i) out << (i ? "," : "") << kColumns[i];
    out << '\n';
    for (const auto& r : rows)
      out << r.experiment << ',' << r.policy << ',' << r.sweep_param << ',' << fmt17(r.sweep_value)
          << ',' << r.repetition << ',' << r.t << ',' << fmt17(r.inst_regret) << ','
          << fmt17(r.cum_regret) << ',' << fmt17(r.lambda0_hat) << ',' << fmt17(r.delta_pi_hat)
          << ',' << fmt17(r.beta_err) << ',' << fmt17(r.coverage) << '\n';
  } else {
    out << "[";
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& r = rows[i];
      out << (i ? ",\n " : "\n ") << "{\"experiment\":" << nlohmann::json(r.experiment).dump()
          << ",\"policy\":" << nlohmann::json(r.policy).dump()
          << ",\"sweep_param\":" << nlohmann::json(r.sweep_param).dump()
          << ",\"sweep_value\":" << json_number(r.sweep_value) << ",\"repetition\":" << r.repetition
          << ",\"t\":" << r.t << ",\"inst_regret\":" << json_number(r.inst_regret)
          << ",\"cum_regret\":" << json_number(r.cum_regret)
          << ",\"lambda0_hat\":" << json_number(r.lambda0_hat)
          << ",\"delta_pi_hat\":" << json_number(r.delta_pi_hat)
          << ",\"beta_err\":" << json_number(r.beta_err)
          << ",\"coverage\":" << json_number(r.coverage) << "}";
    }
    out << "\n]\n";
  }
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<ResultRow> import_rows(const std::filesystem::path& path, ExportFormat format) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<ResultRow> rows;
  if (format == ExportFormat::json) {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(in);
      for (const auto& j : doc) {
        ResultRow r;
        r.experiment = j.at("experiment").get<std::string>();
        r.policy = j.at("policy").get<std::string>();
        r.sweep_param = j.at("sweep_param").get<std::string>();
        r.sweep_value = json_double(j, "sweep_value");
        r.repetition = j.at("repetition").get<int>();
        r.t = j.at("t").get<int>();
        r.inst_regret = json_double(j, "inst_regret");
        r.cum_regret = json_double(j, "cum_regret");
        r.lambda0_hat = json_double(j, "lambda0_hat");
        r.delta_pi_hat = json_double(j, "delta_pi_hat");
        r.beta_err = json_double(j, "beta_err");
        r.coverage = json_double(j, "coverage");
        rows.push_back(std::move(r));
      }
    } catch (const nlohmann::json::exception& e) {
      throw IoError(std::string("malformed result JSON: ") + e.what());
    }
    return rows;
  }
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty CSV " + path.string());
  const auto header = split_csv(line);
  if (header.size() != std::size(kColumns) || !std::equal(header.begin(), header.end(), kColumns))
    throw IoError("unexpected CSV header in " + path.string());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != std::size(kColumns)) throw IoError("wrong field count in line: " + line);
    ResultRow r;
    r.experiment = f[0];
    r.policy = f[1];
    r.sweep_param = f[2];
    r.sweep_value = parse_double(f[3]);
    r.repetition = std::stoi(f[4]);
    r.t = std::stoi(f[5]);
    r.inst_regret = parse_double(f[6]);
    r.cum_regret = parse_double(f[7]);
    r.lambda0_hat = parse_double(f[8]);
    r.delta_pi_hat = parse_double(f[9]);
    r.beta_err = parse_double(f[10]);
    r.coverage = parse_double(f[11]);
    rows.push_back(std::move(r));
  }
  return rows;
}

// --- Figure grids -------------------------------------------------------------------

namespace {

PolicyConfig policy(std::string id, std::string kind, OracleTier oracle = OracleTier::none) {
  PolicyConfig c;
  c.id = std::move(id);
  c.kind = std::move(kind);
  c.oracle = oracle;
  return c;
}

}  // namespace

ExperimentConfig reproduce_config(const std::string& figure) {
  ExperimentConfig c;
  c.experiment = figure;
  c.repetitions = 20;
  c.root_seed = 20240601;
  c.instance.p = 10;
  c.instance.n_actions = 5;
  c.instance.T0 = 2000;
  c.instance.T = 100;
  if (figure == "fig2") {
    c.sweep = {"p_res", {2, 4, 6, 8}};
    c.policies = {policy("isd_oracle_subspaces", "isd_linucb", OracleTier::subspaces)};
  } else if (figure == "fig3") {
    c.instance.p_res = 2;
    c.sweep = {"p", {3, 4, 5, 6, 7, 8, 9, 10}};
    PolicyConfig sw = policy("sw_linucb", "sw_linucb");
    sw.window = c.instance.T;
    PolicyConfig d = policy("d_linucb", "d_linucb");
    d.discount = 0.999;
    c.policies = {policy("linucb", "linucb"),
                  policy("isd_oracle_subspaces", "isd_linucb", OracleTier::subspaces), sw, d};
  } else if (figure == "fig4" || figure == "fig5") {
    c.instance.T = 500;
    c.instance.p_res = 3;
    c.sweep = {"T0", {1000, 3500, 8000}};
    PolicyConfig estimated = policy("isd_estimated", "isd_linucb", OracleTier::none);
    estimated.known_p_res = 3;
    if (figure == "fig4")
      c.policies = {policy("linucb", "linucb"),
                    policy("isd_oracle_beta", "isd_linucb", OracleTier::subspaces_and_beta),
                    policy("isd_oracle_subspaces", "isd_linucb", OracleTier::subspaces), estimated};
    else
      c.policies = {estimated};
  } else if (figure == "hypercube") {
    c.environment = "hypercube";
    c.instance.T = 400;
    c.repetitions = 50;
    c.sweep = {"p", {2, 4, 8}};
    c.policies = {policy("linucb", "linucb")};
  } else {
    throw InvalidInput("unknown figure '" + figure + "' (expected fig2, fig3, fig4, fig5 or hypercube)");
  }
  return c;
}

}  // namespace isdbandit
