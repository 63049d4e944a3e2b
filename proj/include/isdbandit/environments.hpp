#pragma once

#include "isdbandit/common.hpp"
#include "isdbandit/subspace.hpp"

#include <json.hpp>

#include <filesystem>
#include <vector>

namespace isdbandit {

/// Round indices follow the convention t in {-T0, ..., -1} for the offline
/// log and t in {1, ..., T} online. Action indices are 0-based in code and
/// 1-based in exported files.
struct Candidates {
  std::vector<Vector> features;
  bool clipped = false;  // some feature was rescaled to norm L
};

/// Anything run_episode can drive: candidate features per round and the
/// noiseless mean reward of a feature.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual Eigen::Index dim() const = 0;
  virtual Candidates candidates(long t, std::uint64_t stream) const = 0;
  virtual double mean_reward(long t, const Vector& feature) const = 0;
  virtual double noise_sigma() const = 0;
  virtual double feature_bound() const = 0;    // L
  virtual double parameter_bound() const = 0;  // M
};

struct InstanceConfig {
  int p = 10;
  int p_res = 2;
  int n_actions = 5;
  int T0 = 2000;
  int T = 100;
  double noise_sigma = 0.1;
  int cov_windows = 8;         // offline windows over which the residual spectrum changes
  double drift_amplitude = 1.5;
};

void to_json(nlohmann::json& j, const InstanceConfig& c);
void from_json(const nlohmann::json& j, InstanceConfig& c);

/// Full generative model of the synthetic non-stationary bandit.
///
/// Features at round t are N(0, U diag(inv_spectrum, s_t * res_spectrum) U^T)
/// with s_t = 1 + 0.5 sin(2 pi (w + 1/2) / m) on offline window w and s_t = 1
/// online. The reward parameter is U_inv beta + U_res delta_t.
struct SyntheticInstance final : Environment {
  InstanceConfig config;
  IsdBasis basis;
  Vector beta_inv_coords;
  Matrix delta_res_coords_offline;  // T0 x p_res, row i is offline position i + 1
  Vector delta_res_coords_online;
  Vector inv_spectrum;
  Vector res_spectrum;
  Vector offline_res_scale;  // one entry per covariance window
  double L = 0.0;
  double M = 0.0;
  std::uint64_t offline_stream = 0;

  Eigen::Index dim() const override { return basis.p(); }
  Candidates candidates(long t, std::uint64_t stream) const override;
  double mean_reward(long t, const Vector& feature) const override;
  double noise_sigma() const override { return config.noise_sigma; }
  double feature_bound() const override { return L; }
  double parameter_bound() const override { return M; }

  Vector beta_inv() const { return basis.u_inv * beta_inv_coords; }
  Vector delta_res(long t) const;
  Vector gamma(long t) const { return beta_inv() + delta_res(t); }
  /// Block spectrum of the feature covariance in U coordinates at round t.
  Vector spectrum(long t) const;
  Matrix feature_covariance(long t) const;
  /// Offline position (1..T0) of round t in [-T0].
  long offline_position(long t) const { return t + config.T0 + 1; }
};

struct OfflineRecord {
  Vector feature;
  int action = 0;
  double reward = 0.0;
};

struct OfflineLog {
  std::vector<OfflineRecord> records;  // records[i] is round i - T0
  double lambda0_hat = 0.0;            // lambda_min of the normalized offline Gram
  bool rank_deficient = false;

  long round_of(std::size_t i) const { return static_cast<long>(i) - static_cast<long>(records.size()); }
};

/// Min eigenvalue of (1/n) sum x x^T over the records.
double min_normalized_eigenvalue(std::span<const OfflineRecord> records);

/// Worst-case instance on the hypercube [-1,1]^p with gamma in {+-1/sqrt(T)}^p.
struct HypercubeInstance final : Environment {
  int p = 1;
  int horizon = 1;
  Vector gamma;

  Eigen::Index dim() const override { return p; }
  /// All 2^p corners when p <= 10, otherwise 2p corners drawn per round.
  Candidates candidates(long t, std::uint64_t stream) const override;
  double mean_reward(long, const Vector& feature) const override { return feature.dot(gamma); }
  double noise_sigma() const override { return 1.0; }
  double feature_bound() const override { return std::sqrt(static_cast<double>(p)); }
  double parameter_bound() const override { return gamma.norm(); }
  double optimal_reward() const { return gamma.cwiseAbs().sum(); }
};

/// Samples a synthetic instance; see InstanceConfig for the knobs.
SyntheticInstance sample_instance(const InstanceConfig& config, Engine& rng);

/// K independent feature draws for round t; reproducible from (stream, t).
Candidates features_at(const Environment& env, long t, std::uint64_t stream);

/// Noisy reward phi^T gamma_t + N(0, sigma^2).
double reward(const Environment& env, long t, const Vector& feature, Engine& rng);

/// Expected regret of choosing `chosen` among `all` at round t.
double instantaneous_regret(const Environment& env, long t, const Vector& chosen,
                            std::span<const Vector> all);

/// Uniform-random logging policy over [-T0]; features come from the
/// instance's offline stream so they match the draws used to fix L.
OfflineLog generate_offline_log(const SyntheticInstance& instance, Engine& rng);

HypercubeInstance hypercube_worst_case(int p, int T, Engine& rng);

/// CSV with columns t, action, reward, f_1..f_p (actions 1-based).
void export_offline_log_csv(const OfflineLog& log, const std::filesystem::path& path);

}  // namespace isdbandit
