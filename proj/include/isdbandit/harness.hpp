#pragma once

#include "isdbandit/environments.hpp"
#include "isdbandit/policies.hpp"

#include <json.hpp>

#include <filesystem>
#include <limits>
#include <string>
#include <vector>

namespace isdbandit {

struct SweepSpec {
  std::string param;           // instance field name, empty for no sweep
  std::vector<double> values;  // one grid cell per value
};

struct ExperimentConfig {
  std::string experiment = "experiment";
  std::string environment = "synthetic";  // synthetic | hypercube
  InstanceConfig instance;
  SweepSpec sweep;
  std::vector<PolicyConfig> policies;
  int repetitions = 20;
  std::uint64_t root_seed = 0;
  bool resample_instance = true;  // false: one instance for every repetition

  void validate() const;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Instance configuration with the sweep parameter set to `value`.
InstanceConfig apply_sweep(InstanceConfig base, const std::string& param, double value);

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct RegretTrace {
  std::string policy;
  int repetition = 0;
  double sweep_value = kNaN;
  std::vector<double> inst_regret;
  std::vector<double> cum_regret;
  std::vector<int> actions;
  // diagnostics; NaN when not applicable
  double lambda0_hat = kNaN;
  double delta_pi_hat = kNaN;  // distance of estimated vs true invariant projector
  double beta_err = kNaN;      // ||beta_hat - beta||_2
  double coverage = kNaN;      // 1 if the invariant confidence event holds

  double final_regret() const { return cum_regret.empty() ? 0.0 : cum_regret.back(); }
};

/// Common random numbers for one episode: features from `feature_stream`,
/// reward noise at round t from derive_seed(noise_seed, t).
struct EpisodeStreams {
  std::uint64_t feature_stream = 0;
  std::uint64_t noise_seed = 0;
};

RegretTrace run_episode(const Environment& env, Policy& policy, int T, const EpisodeStreams& streams);

/// Fills the diagnostic fields of `trace` for an ISD policy on a synthetic instance.
void record_isd_diagnostics(RegretTrace& trace, const IsdLinUcb& policy,
                            const SyntheticInstance& instance);

/// One exported line.
struct ResultRow {
  std::string experiment;
  std::string policy;
  std::string sweep_param;
  double sweep_value = kNaN;
  int repetition = 0;
  int t = 0;
  double inst_regret = 0.0;
  double cum_regret = 0.0;
  double lambda0_hat = kNaN;
  double delta_pi_hat = kNaN;
  double beta_err = kNaN;
  double coverage = kNaN;

  bool operator==(const ResultRow& o) const;
};

struct CellFailure {
  double sweep_value = kNaN;
  int repetition = 0;
  std::string policy;
  std::string message;
};

struct GridResult {
  std::vector<RegretTrace> traces;
  std::vector<CellFailure> failures;
};

/// Runs every (sweep value, repetition) unit on a worker pool; each unit
/// samples one instance and offline log shared by all policies. Failures
/// are recorded per cell and the grid continues. threads <= 0 selects
/// default_thread_count().
GridResult run_grid(const ExperimentConfig& config, int threads = 0);

/// ISDBANDIT_THREADS if set and positive, else the hardware concurrency.
int default_thread_count();

std::vector<ResultRow> to_rows(const ExperimentConfig& config, const GridResult& result);

struct AggregateRow {
  std::string policy;
  double sweep_value = kNaN;
  int t = 0;
  int n = 0;
  double mean_cum = 0.0;
  double std_cum = 0.0;  // sample standard deviation, 0 when n = 1
  double mean_inst = 0.0;
  double std_inst = 0.0;
};

/// Mean and sample std per (policy, sweep value, t), ordered by first appearance.
std::vector<AggregateRow> aggregate(const std::vector<ResultRow>& rows);

/// Mean final cumulative regret per sweep value for one policy, in sweep order.
std::vector<std::pair<double, double>> final_regret_curve(const std::vector<AggregateRow>& agg,
                                                          const std::string& policy);

enum class ExportFormat { csv, json };

void export_rows(const std::vector<ResultRow>& rows, const std::filesystem::path& path,
                 ExportFormat format);
std::vector<ResultRow> import_rows(const std::filesystem::path& path, ExportFormat format);

/// Configurations of the four figure grids.
ExperimentConfig reproduce_config(const std::string& figure);

}  // namespace isdbandit
