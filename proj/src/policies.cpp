#include "isdbandit/policies.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace isdbandit {

namespace {

void check_eta(double eta) {
  if (!(eta > 0.0 && eta < 1.0)) throw InvalidInput("eta must lie in (0, 1)");
}

void check_nonneg(double x, const char* name) {
  if (!(x >= 0.0) || !std::isfinite(x)) throw InvalidInput(std::string(name) + " must be finite and nonnegative");
}

double default_eta(const ProblemBounds& b) {
  return b.horizon > 1 ? 1.0 / b.horizon : 0.5;
}

}  // namespace

double bonus_scale(double radius, RadiusConvention convention) {
  return convention == RadiusConvention::squared_set ? std::sqrt(radius) : radius;
}

double rho_inv(double T0, double eta, double L, double M, double sigma, double lambda0,
               int p_inv, double delta_pi_bound, bool oracle_subspaces) {
  check_eta(eta);
  check_nonneg(L, "L");
  check_nonneg(M, "M");
  check_nonneg(sigma, "sigma");
  check_nonneg(delta_pi_bound, "delta_pi_bound");
  if (!(T0 > 0.0)) throw InvalidInput("T0 must be positive");
  if (!(lambda0 > 0.0)) throw InvalidInput("lambda0 must be positive");
  if (p_inv < 0) throw InvalidInput("p_inv must be nonnegative");
  const double pk = p_inv;
  const double dim_term = p_inv > 0 ? pk * std::log(std::max(1.0, L * L / (pk * lambda0))) : 0.0;
  double r = sigma * std::sqrt(2.0 * std::log(1.0 / eta) + dim_term) +
             2.0 * L * L * M * std::sqrt(2.0 / lambda0 * std::log((pk + 1.0) / eta));
  if (!oracle_subspaces)
    r += std::sqrt(pk * T0) * delta_pi_bound * L * M +
         std::sqrt(T0 / lambda0) * delta_pi_bound * L * L * M;
  return r;
}

double rho_res(double t, double eta, double L, double M, double sigma, double lambda, int p_res,
               double delta_pi_bound, double beta_err_2norm) {
  check_eta(eta);
  check_nonneg(L, "L");
  check_nonneg(M, "M");
  check_nonneg(sigma, "sigma");
  check_nonneg(delta_pi_bound, "delta_pi_bound");
  check_nonneg(beta_err_2norm, "beta_err_2norm");
  if (!(t >= 1.0)) throw InvalidInput("rho_res requires t >= 1");
  if (!(lambda > 0.0)) throw InvalidInput("lambda must be positive");
  if (p_res < 1) throw InvalidInput("p_res must be positive");
  const double pk = p_res;
  const double grow = std::sqrt(pk * t);
  return sigma * std::sqrt(2.0 * std::log(1.0 / eta) + pk * std::log(1.0 + t * L * L / (lambda * pk))) +
         std::sqrt(lambda) * M + L * M * delta_pi_bound * grow + L * beta_err_2norm * grow;
}

double delta_pi_surrogate(double c, int p, double eta, double T0) {
  check_eta(eta);
  if (!(T0 > 0.0) || p < 1) throw InvalidInput("delta_pi_surrogate: T0 and p must be positive");
  return c * std::sqrt(std::log(p / eta) / T0);
}

// --- ConfidenceEllipsoid ---------------------------------------------------

Eigen::LLT<Matrix> robust_cholesky(const Matrix& g) {
  Eigen::LLT<Matrix> llt(g);
  if (llt.info() == Eigen::Success) return llt;
  const Matrix jittered = g + 1e-10 * Matrix::Identity(g.rows(), g.cols());
  llt.compute(jittered);
  if (llt.info() == Eigen::Success) return llt;
  Eigen::SelfAdjointEigenSolver<Matrix> es(g, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  const double cond = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  throw NumericalError("Gram matrix is not positive definite", cond);
}

ConfidenceEllipsoid::ConfidenceEllipsoid(Eigen::Index dim, double reg)
    : gram_(reg * Matrix::Identity(dim, dim)), moment_(Vector::Zero(dim)), reg_(reg) {
  if (!(reg > 0.0)) throw InvalidInput("ridge regularization must be positive");
}

void ConfidenceEllipsoid::refresh() const {
  if (!stale_) return;
  chol_ = robust_cholesky(gram_);
  center_ = chol_.solve(moment_);
  stale_ = false;
}

const Vector& ConfidenceEllipsoid::center() const {
  refresh();
  return center_;
}

void ConfidenceEllipsoid::rank_one_update(const Vector& x, double r) {
  if (x.size() != dim()) throw InvalidInput("feature dimension mismatch");
  if (!std::isfinite(r)) throw InvalidInput("reward must be finite");
  gram_.noalias() += x * x.transpose();
  moment_ += r * x;
  stale_ = true;
}

void ConfidenceEllipsoid::discounted_update(const Vector& x, double r, double rho) {
  if (x.size() != dim()) throw InvalidInput("feature dimension mismatch");
  if (!std::isfinite(r)) throw InvalidInput("reward must be finite");
  gram_ *= rho;
  gram_.noalias() += x * x.transpose();
  gram_.diagonal().array() += (1.0 - rho) * reg_;
  moment_ = rho * moment_ + r * x;
  stale_ = true;
}

void ConfidenceEllipsoid::assign(Matrix gram, Vector moment) {
  gram_ = std::move(gram);
  moment_ = std::move(moment);
  stale_ = true;
}

double ConfidenceEllipsoid::inverse_norm(const Vector& v) const {
  refresh();
  return std::sqrt(std::max(0.0, v.dot(chol_.solve(v))));
}

double ConfidenceEllipsoid::support(const Vector& v, double scale) const {
  refresh();
  return center_.dot(v) + scale * inverse_norm(v);
}

// --- Baselines --------------------------------------------------------------

ProblemBounds bounds_of(const Environment& env, int horizon) {
  return {env.feature_bound(), env.parameter_bound(), env.noise_sigma(), horizon};
}

int argmax_lowest(std::span<const double> scores) {
  if (scores.empty()) throw InvalidInput("empty candidate set");
  int best = 0;
  for (int a = 1; a < static_cast<int>(scores.size()); ++a)
    if (scores[a] > scores[best]) best = a;
  return best;
}

namespace {

int select_by_support(const ConfidenceEllipsoid& stats, std::span<const Vector> candidates,
                      double scale) {
  if (candidates.empty()) throw InvalidInput("empty candidate set");
  std::vector<double> scores;
  scores.reserve(candidates.size());
  for (const Vector& x : candidates) {
    if (x.size() != stats.dim()) throw InvalidInput("candidate dimension mismatch");
    scores.push_back(stats.support(x, scale));
  }
  return argmax_lowest(scores);
}

}  // namespace

LinUcb::LinUcb(Eigen::Index p, double lambda, double eta, ProblemBounds bounds,
               RadiusConvention convention)
    : stats_(p, lambda), lambda_(lambda), eta_(eta), bounds_(bounds), convention_(convention) {
  check_eta(eta);
}

double LinUcb::radius() const {
  return rho_res(static_cast<double>(n_ + 1), eta_, bounds_.L, bounds_.M, bounds_.sigma, lambda_,
                 static_cast<int>(stats_.dim()), 0.0, 0.0);
}

int LinUcb::select_action(std::span<const Vector> candidates) {
  return select_by_support(stats_, candidates, bonus_scale(radius(), convention_));
}

void LinUcb::update(const Vector& feature, double reward) {
  stats_.rank_one_update(feature, reward);
  ++n_;
}

SlidingWindowLinUcb::SlidingWindowLinUcb(Eigen::Index p, double lambda, double eta, int window,
                                         ProblemBounds bounds, RadiusConvention convention)
    : stats_(p, lambda), lambda_(lambda), eta_(eta), window_(window), bounds_(bounds),
      convention_(convention) {
  check_eta(eta);
  if (window < 1) throw InvalidInput("window must be positive");
}

double SlidingWindowLinUcb::radius() const {
  const double t_eff = std::min<double>(static_cast<double>(n_ + 1), window_);
  return rho_res(t_eff, eta_, bounds_.L, bounds_.M, bounds_.sigma, lambda_,
                 static_cast<int>(stats_.dim()), 0.0, 0.0);
}

int SlidingWindowLinUcb::select_action(std::span<const Vector> candidates) {
  return select_by_support(stats_, candidates, bonus_scale(radius(), convention_));
}

void SlidingWindowLinUcb::update(const Vector& feature, double reward) {
  if (feature.size() != stats_.dim()) throw InvalidInput("feature dimension mismatch");
  if (!std::isfinite(reward)) throw InvalidInput("reward must be finite");
  buffer_.emplace_back(feature, reward);
  while (static_cast<int>(buffer_.size()) > window_) buffer_.pop_front();
  const Eigen::Index p = stats_.dim();
  Matrix g = lambda_ * Matrix::Identity(p, p);
  Vector b = Vector::Zero(p);
  for (const auto& [x, r] : buffer_) {
    g.noalias() += x * x.transpose();
    b += r * x;
  }
  stats_.assign(std::move(g), std::move(b));
  ++n_;
}

DiscountedLinUcb::DiscountedLinUcb(Eigen::Index p, double lambda, double eta, double discount,
                                   ProblemBounds bounds, RadiusConvention convention)
    : stats_(p, lambda), lambda_(lambda), eta_(eta), discount_(discount), bounds_(bounds),
      convention_(convention) {
  check_eta(eta);
  if (!(discount > 0.0 && discount <= 1.0)) throw InvalidInput("discount must lie in (0, 1]");
}

double DiscountedLinUcb::effective_rounds() const {
  const double t = static_cast<double>(n_ + 1);
  if (discount_ == 1.0) return t;
  const double r2 = discount_ * discount_;
  return (1.0 - std::pow(r2, t)) / (1.0 - r2);
}

double DiscountedLinUcb::radius() const {
  return rho_res(effective_rounds(), eta_, bounds_.L, bounds_.M, bounds_.sigma, lambda_,
                 static_cast<int>(stats_.dim()), 0.0, 0.0);
}

int DiscountedLinUcb::select_action(std::span<const Vector> candidates) {
  return select_by_support(stats_, candidates, bonus_scale(radius(), convention_));
}

void DiscountedLinUcb::update(const Vector& feature, double reward) {
  stats_.discounted_update(feature, reward, discount_);
  ++n_;
}

int UniformRandom::select_action(std::span<const Vector> candidates) {
  if (candidates.empty()) throw InvalidInput("empty candidate set");
  std::uniform_int_distribution<int> pick(0, static_cast<int>(candidates.size()) - 1);
  return pick(rng_);
}

// --- ISD-linUCB ---------------------------------------------------------------

std::string to_string(OracleTier tier) {
  switch (tier) {
    case OracleTier::none: return "none";
    case OracleTier::subspaces: return "subspaces";
    case OracleTier::subspaces_and_beta: return "subspaces_and_beta";
  }
  return "none";
}

OracleTier oracle_tier_from_string(const std::string& s) {
  if (s == "none") return OracleTier::none;
  if (s == "subspaces") return OracleTier::subspaces;
  if (s == "subspaces_and_beta") return OracleTier::subspaces_and_beta;
  throw InvalidInput("unknown oracle tier '" + s + "'");
}

IsdTruth truth_of(const SyntheticInstance& instance) {
  return {instance.basis, instance.beta_inv_coords};
}

IsdBasis estimate_basis(std::span<const OfflineRecord> pool, int windows, const IsdParams& params,
                        Engine& rng, std::vector<std::string>* diagnostics) {
  if (windows < 2) throw InvalidInput("basis estimation needs at least two windows");
  const auto n = static_cast<Eigen::Index>(pool.size());
  if (n < 2 * windows) throw InvalidInput("too few records for the requested number of windows");
  const Eigen::Index p = pool.front().feature.size();

  std::vector<Window> slices;
  std::vector<Matrix> covs;
  Eigen::Index begin = 0;
  for (int w = 0; w < windows; ++w) {
    const Eigen::Index end = n * (w + 1) / windows;
    Window win;
    win.features.resize(end - begin, p);
    win.rewards.resize(end - begin);
    for (Eigen::Index i = begin; i < end; ++i) {
      win.features.row(i - begin) = pool[i].feature.transpose();
      win.rewards(i - begin) = pool[i].reward;
    }
    const Matrix centered = win.features.rowwise() - win.features.colwise().mean();
    covs.push_back(centered.transpose() * centered / static_cast<double>(end - begin - 1));
    slices.push_back(std::move(win));
    begin = end;
  }
  const double per_window = static_cast<double>(n / windows);
  const double tol = default_coupling_tol(covs, per_window, params.coupling_noise_floor);
  const JointBlockDiagonalization jbd = joint_block_diagonalize(covs, tol, rng);
  Matrix u = jbd.u;
  std::vector<std::vector<int>> blocks = jbd.blocks;
  if (params.known_p_res > 0) {
    u = rotate_blocks_by_variation(blocks, u, slices);
    blocks.clear();
    for (int j = 0; j < static_cast<int>(p); ++j) blocks.push_back({j});
  }
  const std::vector<double> inv_tol = default_invariance_tolerances(
      blocks, u, slices, params.invariance_multiplier, params.invariance_leakage);
  BlockClassification cls = classify_blocks(blocks, u, slices, inv_tol);
  if (params.known_p_res > 0)
    label_by_rank(cls, params.known_p_res);
  else
    force_residual_block(cls);
  if (diagnostics)
    diagnostics->insert(diagnostics->end(), cls.diagnostics.begin(), cls.diagnostics.end());
  return assemble_basis(cls.partition, u);
}

std::pair<Vector, Matrix> invariant_ols(std::span<const OfflineRecord> pool, const Matrix& u_inv) {
  const Eigen::Index k = u_inv.cols();
  Matrix g = Matrix::Zero(k, k);
  Vector b = Vector::Zero(k);
  if (k == 0) return {b, g};
  for (const auto& rec : pool) {
    const Vector z = u_inv.transpose() * rec.feature;
    g.noalias() += z * z.transpose();
    b += rec.reward * z;
  }
  return {robust_cholesky(g).solve(b), g};
}

OfflineFit fit_offline(std::span<const OfflineRecord> pool, OracleTier oracle,
                       const IsdTruth* truth, const IsdParams& params,
                       const ProblemBounds& bounds, Engine& rng) {
  if (pool.empty()) throw InvalidInput("fit_offline: empty offline log");
  const Eigen::Index p = pool.front().feature.size();
  if (static_cast<Eigen::Index>(pool.size()) < p)
    throw InvalidInput("fit_offline: need at least p offline records");
  if (oracle != OracleTier::none && !truth)
    throw InvalidInput("fit_offline: oracle tier requires ground truth");
  check_eta(params.eta);

  OfflineFit fit;
  fit.n_offline = static_cast<double>(pool.size());
  fit.lambda0_hat = min_normalized_eigenvalue(pool);
  if (oracle == OracleTier::none)
    fit.basis = estimate_basis(pool, params.windows, params, rng, &fit.diagnostics);
  else
    fit.basis = truth->basis;
  const Eigen::Index p_inv = fit.basis.p_inv();

  if (oracle == OracleTier::subspaces_and_beta) {
    fit.beta_coords = truth->beta_inv_coords;
    fit.inv_gram = Matrix::Zero(p_inv, p_inv);
    for (const auto& rec : pool) {
      const Vector z = fit.basis.u_inv.transpose() * rec.feature;
      fit.inv_gram.noalias() += z * z.transpose();
    }
    return fit;
  }

  std::tie(fit.beta_coords, fit.inv_gram) = invariant_ols(pool, fit.basis.u_inv);
  if (p_inv == 0) return fit;
  if (!(fit.lambda0_hat > 0.0))
    throw NumericalError("offline Gram is rank deficient", std::numeric_limits<double>::infinity());
  const bool oracle_subspaces = oracle == OracleTier::subspaces;
  if (!oracle_subspaces)
    fit.delta_pi_bound = delta_pi_surrogate(params.delta_pi_c, static_cast<int>(p), params.eta,
                                            fit.n_offline);
  fit.rho_inv = rho_inv(fit.n_offline, params.eta, bounds.L, bounds.M, bounds.sigma,
                        fit.lambda0_hat, static_cast<int>(p_inv), fit.delta_pi_bound,
                        oracle_subspaces);
  fit.beta_err_bound = bonus_scale(fit.rho_inv, params.convention) /
                       std::sqrt(fit.lambda0_hat * fit.n_offline);
  return fit;
}

IsdLinUcb::IsdLinUcb(std::vector<OfflineRecord> offline, OracleTier oracle,
                     std::optional<IsdTruth> truth, IsdParams params, ProblemBounds bounds,
                     std::uint64_t seed)
    : offline_(std::move(offline)), oracle_(oracle), truth_(std::move(truth)), params_(params),
      bounds_(bounds), rng_(seed) {
  if (!(params.lambda > 0.0)) throw InvalidInput("lambda must be positive");
  fit_ = fit_offline(offline_, oracle_, truth_ ? &*truth_ : nullptr, params_, bounds_, rng_);
  if (fit_.basis.p_inv() > 0) inv_chol_ = robust_cholesky(fit_.inv_gram);
  rebuild_residual();
}

void IsdLinUcb::rebuild_residual() {
  res_ = ConfidenceEllipsoid(fit_.basis.p_res(), params_.lambda);
  const bool has_inv = fit_.basis.p_inv() > 0;
  const Vector beta = fit_.beta_inv();
  for (const auto& rec : online_) {
    const double r = has_inv ? rec.reward - rec.feature.dot(beta) : rec.reward;
    res_.rank_one_update(fit_.basis.u_res.transpose() * rec.feature, r);
  }
}

void IsdLinUcb::begin_round(long t) {
  if (t > 1) maybe_recompute();
}

void IsdLinUcb::maybe_recompute() {
  if (!params_.recompute) return;
  std::vector<OfflineRecord> pool = offline_;
  pool.insert(pool.end(), online_.begin(), online_.end());
  if (params_.freeze_basis && oracle_ == OracleTier::none) {
    // keep the current basis; refit beta only
    IsdTruth frozen{fit_.basis, Vector()};
    OfflineFit next = fit_offline(pool, OracleTier::subspaces, &frozen, params_, bounds_, rng_);
    next.delta_pi_bound = delta_pi_surrogate(params_.delta_pi_c, static_cast<int>(fit_.basis.p()),
                                             params_.eta, next.n_offline);
    if (next.basis.p_inv() > 0) {
      next.rho_inv = rho_inv(next.n_offline, params_.eta, bounds_.L, bounds_.M, bounds_.sigma,
                             next.lambda0_hat, static_cast<int>(next.basis.p_inv()),
                             next.delta_pi_bound, false);
      next.beta_err_bound = bonus_scale(next.rho_inv, params_.convention) /
                            std::sqrt(next.lambda0_hat * next.n_offline);
    }
    fit_ = std::move(next);
  } else {
    fit_ = fit_offline(pool, oracle_, truth_ ? &*truth_ : nullptr, params_, bounds_, rng_);
  }
  if (fit_.basis.p_inv() > 0) inv_chol_ = robust_cholesky(fit_.inv_gram);
  rebuild_residual();
}

double IsdLinUcb::residual_radius() const {
  return rho_res(static_cast<double>(online_.size() + 1), params_.eta, bounds_.L, bounds_.M,
                 bounds_.sigma, params_.lambda, static_cast<int>(fit_.basis.p_res()),
                 fit_.delta_pi_bound, fit_.beta_err_bound);
}

double IsdLinUcb::ucb(const Vector& feature) const {
  if (feature.size() != fit_.basis.p()) throw InvalidInput("candidate dimension mismatch");
  const Vector y = fit_.basis.u_res.transpose() * feature;
  double score = res_.support(y, bonus_scale(residual_radius(), params_.convention));
  if (fit_.basis.p_inv() > 0) {
    const Vector z = fit_.basis.u_inv.transpose() * feature;
    score += z.dot(fit_.beta_coords);
    if (fit_.rho_inv > 0.0)
      score += bonus_scale(fit_.rho_inv, params_.convention) *
               std::sqrt(std::max(0.0, z.dot(inv_chol_.solve(z))));
  }
  return score;
}

int IsdLinUcb::select_action(std::span<const Vector> candidates) {
  if (candidates.empty()) throw InvalidInput("empty candidate set");
  std::vector<double> scores;
  scores.reserve(candidates.size());
  for (const Vector& x : candidates) scores.push_back(ucb(x));
  return argmax_lowest(scores);
}

void IsdLinUcb::update(const Vector& feature, double reward) {
  if (feature.size() != fit_.basis.p()) throw InvalidInput("feature dimension mismatch");
  if (!std::isfinite(reward)) throw InvalidInput("reward must be finite");
  const double r = fit_.basis.p_inv() > 0 ? reward - feature.dot(fit_.beta_inv()) : reward;
  res_.rank_one_update(fit_.basis.u_res.transpose() * feature, r);
  online_.push_back({feature, 0, reward});
}

// --- Configuration ------------------------------------------------------------

namespace {

std::string to_string(RadiusConvention c) {
  return c == RadiusConvention::squared_set ? "squared_set" : "norm_bound";
}

RadiusConvention convention_from_string(const std::string& s) {
  if (s == "squared_set") return RadiusConvention::squared_set;
  if (s == "norm_bound") return RadiusConvention::norm_bound;
  throw InvalidInput("unknown radius convention '" + s + "'");
}

}  // namespace

void to_json(nlohmann::json& j, const PolicyConfig& c) {
  j = nlohmann::json{{"id", c.id},
                     {"kind", c.kind},
                     {"oracle", to_string(c.oracle)},
                     {"lambda", c.lambda},
                     {"window", c.window},
                     {"discount", c.discount},
                     {"m", c.m},
                     {"recompute", c.recompute},
                     {"freeze_basis", c.freeze_basis},
                     {"delta_pi_c", c.delta_pi_c},
                     {"known_p_res", c.known_p_res},
                     {"convention", to_string(c.convention)}};
  if (c.eta) j["eta"] = *c.eta;
}

void from_json(const nlohmann::json& j, PolicyConfig& c) {
  const PolicyConfig d;
  c.kind = j.value("kind", d.kind);
  c.id = j.value("id", c.kind);
  c.oracle = oracle_tier_from_string(j.value("oracle", std::string("none")));
  c.lambda = j.value("lambda", d.lambda);
  c.eta = j.contains("eta") && !j.at("eta").is_null() ? std::optional<double>(j.at("eta").get<double>())
                                                       : std::nullopt;
  c.window = j.value("window", d.window);
  c.discount = j.value("discount", d.discount);
  c.m = j.value("m", d.m);
  c.recompute = j.value("recompute", d.recompute);
  c.freeze_basis = j.value("freeze_basis", d.freeze_basis);
  c.delta_pi_c = j.value("delta_pi_c", d.delta_pi_c);
  c.known_p_res = j.value("known_p_res", d.known_p_res);
  if (c.known_p_res < 0) throw InvalidInput("known_p_res must be nonnegative");
  c.convention = convention_from_string(j.value("convention", std::string("squared_set")));
  static const char* kinds[] = {"linucb", "sw_linucb", "d_linucb", "uniform", "isd_linucb"};
  if (std::find(std::begin(kinds), std::end(kinds), c.kind) == std::end(kinds))
    throw InvalidInput("unknown policy kind '" + c.kind + "'");
}

std::unique_ptr<Policy> make_policy(const PolicyConfig& config, const PolicyContext& context) {
  if (!context.env) throw InvalidInput("make_policy: no environment");
  const ProblemBounds bounds = bounds_of(*context.env, context.horizon);
  const double eta = config.eta.value_or(default_eta(bounds));
  const Eigen::Index p = context.env->dim();
  if (config.kind == "linucb")
    return std::make_unique<LinUcb>(p, config.lambda, eta, bounds, config.convention);
  if (config.kind == "sw_linucb")
    return std::make_unique<SlidingWindowLinUcb>(p, config.lambda, eta, config.window, bounds,
                                                 config.convention);
  if (config.kind == "d_linucb")
    return std::make_unique<DiscountedLinUcb>(p, config.lambda, eta, config.discount, bounds,
                                              config.convention);
  if (config.kind == "uniform") return std::make_unique<UniformRandom>(context.seed);
  if (config.kind == "isd_linucb") {
    if (!context.log) throw InvalidInput("isd_linucb needs an offline log");
    IsdParams params;
    params.lambda = config.lambda;
    params.eta = eta;
    params.windows = config.m;
    params.delta_pi_c = config.delta_pi_c;
    params.known_p_res = config.known_p_res;
    params.recompute = config.recompute;
    params.freeze_basis = config.freeze_basis;
    params.convention = config.convention;
    return std::make_unique<IsdLinUcb>(context.log->records, config.oracle, context.truth, params,
                                       bounds, context.seed);
  }
  throw InvalidInput("unknown policy kind '" + config.kind + "'");
}

}  // namespace isdbandit
