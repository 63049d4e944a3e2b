#pragma once

#include "isdbandit/common.hpp"
#include "isdbandit/environments.hpp"
#include "isdbandit/subspace.hpp"

#include <json.hpp>

#include <deque>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace isdbandit {

/// How a radius rho enters the exploration bonus.
///
/// squared_set: the confidence set is {||theta_hat - theta||^2_G <= rho} and
/// the bonus is sqrt(rho) ||v||_{G^-1}. norm_bound: the set is
/// {||theta_hat - theta||_G <= rho} and the bonus is rho ||v||_{G^-1}.
enum class RadiusConvention { squared_set, norm_bound };

double bonus_scale(double radius, RadiusConvention convention);

/// Radius of the invariant confidence set after T0 offline rounds.
/// The subspace-error terms are added when `oracle_subspaces` is false.
double rho_inv(double T0, double eta, double L, double M, double sigma, double lambda0,
               int p_inv, double delta_pi_bound, bool oracle_subspaces);

/// Radius of the residual confidence set at round t.
double rho_res(double t, double eta, double L, double M, double sigma, double lambda, int p_res,
               double delta_pi_bound, double beta_err_2norm);

/// c * sqrt(log(p / eta) / T0).
double delta_pi_surrogate(double c, int p, double eta, double T0);

/// Ridge statistics G = reg I + sum x x^T (or a weighted variant) and b = sum x R.
class ConfidenceEllipsoid {
 public:
  ConfidenceEllipsoid() = default;
  ConfidenceEllipsoid(Eigen::Index dim, double reg);

  Eigen::Index dim() const { return gram_.rows(); }
  const Matrix& gram() const { return gram_; }
  const Vector& moment() const { return moment_; }
  const Vector& center() const;

  void rank_one_update(const Vector& x, double r);
  /// gram <- rho gram + x x^T + (1 - rho) reg I, moment <- rho moment + x r.
  void discounted_update(const Vector& x, double r, double rho);
  void assign(Matrix gram, Vector moment);

  /// ||v||_{G^-1}
  double inverse_norm(const Vector& v) const;
  /// center^T v + scale ||v||_{G^-1}
  double support(const Vector& v, double scale) const;

 private:
  void refresh() const;

  Matrix gram_;
  Vector moment_;
  double reg_ = 0.0;
  mutable bool stale_ = true;
  mutable Eigen::LLT<Matrix> chol_;
  mutable Vector center_;
};

/// Cholesky of a symmetric PD matrix; one 1e-10 I jitter retry, then NumericalError.
Eigen::LLT<Matrix> robust_cholesky(const Matrix& g);

/// Known problem constants handed to every policy.
struct ProblemBounds {
  double L = 1.0;      // feature norm bound
  double M = 1.0;      // parameter norm bound
  double sigma = 1.0;  // noise level
  int horizon = 1;     // T, used for the eta = 1/T default
};

ProblemBounds bounds_of(const Environment& env, int horizon);

class Policy {
 public:
  virtual ~Policy() = default;
  /// Called once at the start of round t (1-based), before select_action.
  virtual void begin_round(long) {}
  /// Index of the largest UCB score; ties go to the lowest index.
  virtual int select_action(std::span<const Vector> candidates) = 0;
  virtual void update(const Vector& feature, double reward) = 0;
  virtual std::string kind() const = 0;
};

/// argmax with lowest-index tie-break; throws InvalidInput on an empty set.
int argmax_lowest(std::span<const double> scores);

class LinUcb final : public Policy {
 public:
  LinUcb(Eigen::Index p, double lambda, double eta, ProblemBounds bounds,
         RadiusConvention convention = RadiusConvention::squared_set);
  int select_action(std::span<const Vector> candidates) override;
  void update(const Vector& feature, double reward) override;
  std::string kind() const override { return "linucb"; }

  double radius() const;
  const ConfidenceEllipsoid& statistics() const { return stats_; }
  long n_updates() const { return n_; }

 private:
  ConfidenceEllipsoid stats_;
  double lambda_, eta_;
  ProblemBounds bounds_;
  RadiusConvention convention_;
  long n_ = 0;
};

class SlidingWindowLinUcb final : public Policy {
 public:
  SlidingWindowLinUcb(Eigen::Index p, double lambda, double eta, int window, ProblemBounds bounds,
                      RadiusConvention convention = RadiusConvention::squared_set);
  int select_action(std::span<const Vector> candidates) override;
  void update(const Vector& feature, double reward) override;
  std::string kind() const override { return "sw_linucb"; }

  double radius() const;
  const ConfidenceEllipsoid& statistics() const { return stats_; }
  std::size_t buffer_size() const { return buffer_.size(); }

 private:
  ConfidenceEllipsoid stats_;
  std::deque<std::pair<Vector, double>> buffer_;
  double lambda_, eta_;
  int window_;
  ProblemBounds bounds_;
  RadiusConvention convention_;
  long n_ = 0;
};

class DiscountedLinUcb final : public Policy {
 public:
  DiscountedLinUcb(Eigen::Index p, double lambda, double eta, double discount, ProblemBounds bounds,
                   RadiusConvention convention = RadiusConvention::squared_set);
  int select_action(std::span<const Vector> candidates) override;
  void update(const Vector& feature, double reward) override;
  std::string kind() const override { return "d_linucb"; }

  /// Effective sample size sum_{j<t} rho^{2j} entering the radius.
  double effective_rounds() const;
  double radius() const;
  const ConfidenceEllipsoid& statistics() const { return stats_; }

 private:
  ConfidenceEllipsoid stats_;
  double lambda_, eta_, discount_;
  ProblemBounds bounds_;
  RadiusConvention convention_;
  long n_ = 0;
};

class UniformRandom final : public Policy {
 public:
  explicit UniformRandom(std::uint64_t seed) : rng_(seed) {}
  int select_action(std::span<const Vector> candidates) override;
  void update(const Vector&, double) override {}
  std::string kind() const override { return "uniform"; }

 private:
  Engine rng_;
};

enum class OracleTier { none, subspaces, subspaces_and_beta };

std::string to_string(OracleTier tier);
OracleTier oracle_tier_from_string(const std::string& s);

/// Ground truth a policy may be granted; beta coordinates are in truth.basis.u_inv.
struct IsdTruth {
  IsdBasis basis;
  Vector beta_inv_coords;
};

IsdTruth truth_of(const SyntheticInstance& instance);

struct IsdParams {
  double lambda = 0.1;
  double eta = 0.01;
  int windows = 8;  // m, number of offline slices for basis estimation
  double delta_pi_c = 1.0;
  bool recompute = false;
  bool freeze_basis = false;
  double coupling_noise_floor = 3.0;
  double invariance_multiplier = 6.0;
  double invariance_leakage = 3.0;
  int known_p_res = 0;  // > 0: label the top-variance blocks residual instead of thresholding
  RadiusConvention convention = RadiusConvention::squared_set;
};

/// Result of the offline phase; everything the online loop needs.
struct OfflineFit {
  IsdBasis basis;
  Vector beta_coords;  // in basis.u_inv coordinates
  Matrix inv_gram;     // U_inv^T (sum_offline phi phi^T) U_inv, unregularized
  double lambda0_hat = 0.0;
  double n_offline = 0.0;
  double rho_inv = 0.0;
  double delta_pi_bound = 0.0;
  double beta_err_bound = 0.0;
  std::vector<std::string> diagnostics;

  Vector beta_inv() const { return basis.u_inv * beta_coords; }
};

/// Orthonormal invariant/residual split estimated from a record pool cut
/// into `windows` contiguous slices.
IsdBasis estimate_basis(std::span<const OfflineRecord> pool, int windows, const IsdParams& params,
                        Engine& rng, std::vector<std::string>* diagnostics = nullptr);

/// OLS of the rewards on U_inv^T phi; returns coordinates and the Gram.
std::pair<Vector, Matrix> invariant_ols(std::span<const OfflineRecord> pool, const Matrix& u_inv);

OfflineFit fit_offline(std::span<const OfflineRecord> pool, OracleTier oracle,
                       const IsdTruth* truth, const IsdParams& params,
                       const ProblemBounds& bounds, Engine& rng);

class IsdLinUcb final : public Policy {
 public:
  IsdLinUcb(std::vector<OfflineRecord> offline, OracleTier oracle, std::optional<IsdTruth> truth,
            IsdParams params, ProblemBounds bounds, std::uint64_t seed);

  void begin_round(long t) override;
  int select_action(std::span<const Vector> candidates) override;
  void update(const Vector& feature, double reward) override;
  std::string kind() const override { return "isd_linucb"; }

  /// Re-fits on offline plus online records when the recompute flag is set.
  void maybe_recompute();

  double residual_radius() const;
  double ucb(const Vector& feature) const;
  const OfflineFit& fit() const { return fit_; }
  const ConfidenceEllipsoid& residual_statistics() const { return res_; }
  Vector delta_res_hat() const { return fit_.basis.u_res * res_.center(); }
  OracleTier oracle() const { return oracle_; }
  const IsdParams& params() const { return params_; }
  std::size_t online_rounds() const { return online_.size(); }

 private:
  void rebuild_residual();

  std::vector<OfflineRecord> offline_;
  std::vector<OfflineRecord> online_;
  OracleTier oracle_;
  std::optional<IsdTruth> truth_;
  IsdParams params_;
  ProblemBounds bounds_;
  Engine rng_;
  OfflineFit fit_;
  Eigen::LLT<Matrix> inv_chol_;
  ConfidenceEllipsoid res_;
};

/// One policy entry of an experiment config.
struct PolicyConfig {
  std::string id;
  std::string kind = "linucb";  // linucb | sw_linucb | d_linucb | uniform | isd_linucb
  OracleTier oracle = OracleTier::none;
  double lambda = 0.1;
  std::optional<double> eta;  // defaults to 1/T
  int window = 100;
  double discount = 0.999;
  int m = 8;
  bool recompute = false;
  bool freeze_basis = false;
  double delta_pi_c = 1.0;
  int known_p_res = 0;
  RadiusConvention convention = RadiusConvention::squared_set;
};

void to_json(nlohmann::json& j, const PolicyConfig& c);
void from_json(const nlohmann::json& j, PolicyConfig& c);

/// Everything an offline-fitted policy may consume.
struct PolicyContext {
  const Environment* env = nullptr;
  const OfflineLog* log = nullptr;          // required for isd_linucb
  std::optional<IsdTruth> truth;            // required for oracle tiers
  int horizon = 1;
  std::uint64_t seed = 0;
};

std::unique_ptr<Policy> make_policy(const PolicyConfig& config, const PolicyContext& context);

}  // namespace isdbandit
