#include "isdbandit/environments.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>

namespace isdbandit {

void to_json(nlohmann::json& j, const InstanceConfig& c) {
  j = nlohmann::json{{"p", c.p},
                     {"p_res", c.p_res},
                     {"K", c.n_actions},
                     {"T0", c.T0},
                     {"T", c.T},
                     {"noise_sigma", c.noise_sigma},
                     {"cov_windows", c.cov_windows},
                     {"drift_amplitude", c.drift_amplitude}};
}

void from_json(const nlohmann::json& j, InstanceConfig& c) {
  const InstanceConfig d;
  c.p = j.value("p", d.p);
  c.p_res = j.value("p_res", d.p_res);
  c.n_actions = j.value("K", d.n_actions);
  c.T0 = j.value("T0", d.T0);
  c.T = j.value("T", d.T);
  c.noise_sigma = j.value("noise_sigma", d.noise_sigma);
  c.cov_windows = j.value("cov_windows", d.cov_windows);
  c.drift_amplitude = j.value("drift_amplitude", d.drift_amplitude);
}

namespace {

Vector uniform_vector(Eigen::Index n, double lo, double hi, Engine& rng) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = dist(rng);
  return v;
}

Matrix haar_orthogonal(Eigen::Index p, Engine& rng) {
  std::normal_distribution<double> normal;
  Matrix g(p, p);
  for (Eigen::Index j = 0; j < p; ++j)
    for (Eigen::Index i = 0; i < p; ++i) g(i, j) = normal(rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < p; ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  return q;
}

}  // namespace

Vector SyntheticInstance::delta_res(long t) const {
  if (t >= 1) return basis.u_res * delta_res_coords_online;
  const long pos = offline_position(t);
  if (t == 0 || pos < 1) throw InvalidInput("round index outside [-T0] and [T]");
  return basis.u_res * delta_res_coords_offline.row(pos - 1).transpose();
}

Vector SyntheticInstance::spectrum(long t) const {
  const Eigen::Index p_inv = inv_spectrum.size();
  Vector s(p_inv + res_spectrum.size());
  s.head(p_inv) = inv_spectrum;
  double scale = 1.0;
  if (t < 0) {
    const long pos = offline_position(t);
    if (pos < 1) throw InvalidInput("round index before -T0");
    const long m = offline_res_scale.size();
    const long w = std::min(m - 1, (pos - 1) * m / config.T0);
    scale = offline_res_scale(w);
  } else if (t == 0) {
    throw InvalidInput("round 0 does not exist");
  }
  s.tail(res_spectrum.size()) = scale * res_spectrum;
  return s;
}

Matrix SyntheticInstance::feature_covariance(long t) const {
  Matrix u(basis.p(), basis.p());
  u << basis.u_inv, basis.u_res;
  return u * spectrum(t).asDiagonal() * u.transpose();
}

Candidates SyntheticInstance::candidates(long t, std::uint64_t stream) const {
  const Vector sd = spectrum(t).cwiseSqrt();
  const Eigen::Index p_inv = basis.p_inv();
  Engine rng(derive_seed(stream, t));
  std::normal_distribution<double> normal;
  Candidates out;
  out.features.reserve(config.n_actions);
  Vector z(sd.size());
  for (int a = 0; a < config.n_actions; ++a) {
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = sd(i) * normal(rng);
    Vector x = basis.u_res * z.tail(basis.p_res());
    if (p_inv > 0) x += basis.u_inv * z.head(p_inv);
    const double norm = x.norm();
    if (L > 0.0 && norm > L) {
      x *= L / norm;
      out.clipped = true;
    }
    out.features.push_back(std::move(x));
  }
  return out;
}

double SyntheticInstance::mean_reward(long t, const Vector& feature) const {
  return feature.dot(gamma(t));
}

double min_normalized_eigenvalue(std::span<const OfflineRecord> records) {
  if (records.empty()) return 0.0;
  const Eigen::Index p = records.front().feature.size();
  Matrix g = Matrix::Zero(p, p);
  for (const auto& r : records) g.selfadjointView<Eigen::Lower>().rankUpdate(r.feature);
  g.triangularView<Eigen::StrictlyUpper>() = g.transpose();
  g /= static_cast<double>(records.size());
  Eigen::SelfAdjointEigenSolver<Matrix> es(g, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  return lo > 1e-12 * std::max(hi, 1e-300) ? lo : 0.0;
}

SyntheticInstance sample_instance(const InstanceConfig& config, Engine& rng) {
  if (config.p < 2 || config.p_res < 1 || config.p_res >= config.p)
    throw InvalidInput("sample_instance requires 1 <= p_res < p");
  if (config.n_actions < 2) throw InvalidInput("sample_instance requires K >= 2");
  if (config.T0 < 1 || config.T < 1) throw InvalidInput("sample_instance requires T0, T >= 1");
  if (config.noise_sigma < 0.0) throw InvalidInput("noise_sigma must be nonnegative");
  if (config.cov_windows < 1) throw InvalidInput("cov_windows must be positive");

  SyntheticInstance inst;
  inst.config = config;
  const int p_inv = config.p - config.p_res;
  const Matrix u = haar_orthogonal(config.p, rng);
  inst.basis.u_inv = u.leftCols(p_inv);
  inst.basis.u_res = u.rightCols(config.p_res);

  inst.beta_inv_coords = uniform_vector(p_inv, 0.5, 1.5, rng);
  const Vector delta_start = uniform_vector(config.p_res, 0.5, 1.5, rng);
  inst.delta_res_coords_offline.resize(config.T0, config.p_res);
  for (int pos = 1; pos <= config.T0; ++pos) {
    const double frac = static_cast<double>(pos) / config.T0;
    for (int i = 1; i <= config.p_res; ++i) {
      const double s = std::sin(0.25 * i * frac + i);
      inst.delta_res_coords_offline(pos - 1, i - 1) =
          delta_start(i - 1) - config.drift_amplitude * frac * s * s;
    }
  }
  inst.delta_res_coords_online = uniform_vector(config.p_res, 0.5, 1.5, rng);
  inst.inv_spectrum = uniform_vector(p_inv, 0.5, 1.5, rng);
  inst.res_spectrum = uniform_vector(config.p_res, 0.5, 1.5, rng);
  inst.offline_res_scale.resize(config.cov_windows);
  for (int w = 0; w < config.cov_windows; ++w)
    inst.offline_res_scale(w) =
        1.0 + 0.5 * std::sin(2.0 * std::numbers::pi * (w + 0.5) / config.cov_windows);
  inst.offline_stream = rng();

  // L from the realized offline draws (no clipping while L is unset).
  double max_norm = 0.0;
  for (long t = -config.T0; t <= -1; ++t)
    for (const Vector& x : inst.candidates(t, inst.offline_stream).features)
      max_norm = std::max(max_norm, x.norm());
  inst.L = 1.05 * max_norm;

  const Vector beta = inst.beta_inv();
  double m = (beta + inst.basis.u_res * inst.delta_res_coords_online).norm();
  for (int pos = 0; pos < config.T0; ++pos)
    m = std::max(m, (beta + inst.basis.u_res * inst.delta_res_coords_offline.row(pos).transpose()).norm());
  inst.M = m;
  return inst;
}

Candidates features_at(const Environment& env, long t, std::uint64_t stream) {
  return env.candidates(t, stream);
}

double reward(const Environment& env, long t, const Vector& feature, Engine& rng) {
  std::normal_distribution<double> normal;
  const double noise = normal(rng);
  return env.mean_reward(t, feature) + env.noise_sigma() * noise;
}

double instantaneous_regret(const Environment& env, long t, const Vector& chosen,
                            std::span<const Vector> all) {
  bool found = false;
  double best = -std::numeric_limits<double>::infinity();
  for (const Vector& x : all) {
    best = std::max(best, env.mean_reward(t, x));
    if (x.size() == chosen.size() && x == chosen) found = true;
  }
  if (!found) throw InvalidInput("chosen feature is not among the candidates");
  return std::max(0.0, best - env.mean_reward(t, chosen));
}

OfflineLog generate_offline_log(const SyntheticInstance& instance, Engine& rng) {
  OfflineLog log;
  const int t0 = instance.config.T0;
  log.records.reserve(t0);
  std::uniform_int_distribution<int> pick(0, instance.config.n_actions - 1);
  for (long t = -t0; t <= -1; ++t) {
    Candidates c = instance.candidates(t, instance.offline_stream);
    const int a = pick(rng);
    OfflineRecord rec;
    rec.action = a;
    rec.reward = reward(instance, t, c.features[a], rng);
    rec.feature = std::move(c.features[a]);
    log.records.push_back(std::move(rec));
  }
  log.lambda0_hat = min_normalized_eigenvalue(log.records);
  log.rank_deficient = !(log.lambda0_hat > 0.0);
  return log;
}

Candidates HypercubeInstance::candidates(long t, std::uint64_t stream) const {
  Candidates out;
  if (p <= 10) {
    const unsigned corners = 1u << p;
    out.features.reserve(corners);
    for (unsigned mask = 0; mask < corners; ++mask) {
      Vector x(p);
      for (int i = 0; i < p; ++i) x(i) = (mask >> i) & 1u ? 1.0 : -1.0;
      out.features.push_back(std::move(x));
    }
    return out;
  }
  Engine rng(derive_seed(stream, t));
  std::bernoulli_distribution coin(0.5);
  for (int a = 0; a < 2 * p; ++a) {
    Vector x(p);
    for (int i = 0; i < p; ++i) x(i) = coin(rng) ? 1.0 : -1.0;
    out.features.push_back(std::move(x));
  }
  return out;
}

HypercubeInstance hypercube_worst_case(int p, int T, Engine& rng) {
  if (p < 1 || T < 1) throw InvalidInput("hypercube_worst_case requires p, T >= 1");
  HypercubeInstance inst;
  inst.p = p;
  inst.horizon = T;
  inst.gamma.resize(p);
  std::bernoulli_distribution coin(0.5);
  const double mag = 1.0 / std::sqrt(static_cast<double>(T));
  for (int i = 0; i < p; ++i) inst.gamma(i) = coin(rng) ? mag : -mag;
  return inst;
}

void export_offline_log_csv(const OfflineLog& log, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  const Eigen::Index p = log.records.empty() ? 0 : log.records.front().feature.size();
  out << "t,action,reward";
  for (Eigen::Index i = 1; i <= p; ++i) out << ",f_" << i;
  out << '\n' << std::setprecision(17);
  for (std::size_t i = 0; i < log.records.size(); ++i) {
    const auto& r = log.records[i];
    out << log.round_of(i) << ',' << r.action + 1 << ',' << r.reward;
    for (Eigen::Index k = 0; k < p; ++k) out << ',' << r.feature(k);
    out << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace isdbandit
