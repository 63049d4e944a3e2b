// Runs the acceptance criteria and prints one PASS/FAIL line per criterion.

#include "isdbandit/harness.hpp"
#include "isdbandit/policies.hpp"
#include "isdbandit/subspace.hpp"
#include "oracles.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace isdbandit;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct LineFit {
  double slope = 0.0;
  double r2 = 0.0;
};

LineFit fit_line(const std::vector<std::pair<double, double>>& pts) {
  const double n = static_cast<double>(pts.size());
  double mx = 0.0, my = 0.0;
  for (const auto& [x, y] : pts) {
    mx += x / n;
    my += y / n;
  }
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& [x, y] : pts) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
    syy += (y - my) * (y - my);
  }
  LineFit f;
  f.slope = sxy / sxx;
  f.r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
  return f;
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

std::string curve_str(const std::vector<std::pair<double, double>>& c) {
  std::string s;
  for (const auto& [x, y] : c) s += (s.empty() ? "" : " ") + fmt(x) + ":" + fmt(y);
  return s;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

struct Grid {
  ExperimentConfig config;
  std::vector<AggregateRow> agg;
  std::vector<RegretTrace> traces;
  std::size_t failures = 0;
  double seconds = 0.0;

  std::vector<std::pair<double, double>> curve(const std::string& policy) const {
    return final_regret_curve(agg, policy);
  }
};

Grid run_figure(const std::string& figure, int threads) {
  Grid g;
  g.config = reproduce_config(figure);
  const auto start = std::chrono::steady_clock::now();
  GridResult r = run_grid(g.config, threads);
  g.seconds = seconds_since(start);
  g.agg = aggregate(to_rows(g.config, r));
  g.failures = r.failures.size();
  for (const auto& f : r.failures)
    std::fprintf(stderr, "  %s: %s rep %d: %s\n", figure.c_str(), f.policy.c_str(), f.repetition,
                 f.message.c_str());
  g.traces = std::move(r.traces);
  return g;
}

Outcome fig2(int threads) {
  const Grid g = run_figure("fig2", threads);
  const auto c = g.curve("isd_oracle_subspaces");
  bool increasing = c.size() == 4;
  for (std::size_t i = 1; i < c.size(); ++i) increasing = increasing && c[i].second > c[i - 1].second;
  const LineFit f = fit_line(c);
  Outcome o;
  o.pass = g.failures == 0 && increasing && f.r2 >= 0.85 && g.seconds < 120.0;
  o.detail = "final regret by p_res " + curve_str(c) + ", R2 " + fmt(f.r2) + ", " + fmt(g.seconds) + " s";
  return o;
}

// criteria 2 and 5 share the fig3 grid
std::pair<Outcome, Outcome> fig3(int threads) {
  const Grid g = run_figure("fig3", threads);
  const auto lin = g.curve("linucb");
  const auto isd = g.curve("isd_oracle_subspaces");
  const auto sw = g.curve("sw_linucb");
  const auto d = g.curve("d_linucb");

  Outcome c2;
  const bool shape = lin.size() == 8 && isd.size() == 8;
  bool growth = false, below = shape;
  double ratio = 0.0;
  std::string above_at;
  if (shape) {
    growth = lin.back().second >= 1.5 * lin.front().second;
    double lo = isd[0].second, hi = isd[0].second;
    for (std::size_t i = 0; i < isd.size(); ++i) {
      lo = std::min(lo, isd[i].second);
      hi = std::max(hi, isd[i].second);
      if (isd[i].first >= 5 && !(isd[i].second < lin[i].second)) {
        below = false;
        above_at += (above_at.empty() ? "" : ",") + fmt(isd[i].first);
      }
    }
    ratio = hi / lo;
  }
  c2.pass = g.failures == 0 && growth && ratio <= 1.5 && below && g.seconds < 300.0;
  c2.detail = "linucb " + curve_str(lin) + "; isd " + curve_str(isd) + "; linucb p10/p3 " +
              (shape ? fmt(lin.back().second / lin.front().second) : "n/a") + ", isd max/min " +
              fmt(ratio) + (below ? "" : ", isd not below linucb at p=" + above_at) + ", " +
              fmt(g.seconds) + " s";

  Outcome c5;
  double worst = 0.0;
  c5.pass = g.failures == 0 && sw.size() == lin.size() && d.size() == lin.size();
  for (std::size_t i = 0; c5.pass && i < lin.size(); ++i)
    worst = std::max({worst, std::abs(sw[i].second / lin[i].second - 1.0),
                      std::abs(d[i].second / lin[i].second - 1.0)});
  c5.pass = c5.pass && worst <= 0.10;
  c5.detail = "largest relative gap to linucb " + fmt(worst) + " (sw " + curve_str(sw) + "; d " +
              curve_str(d) + ")";
  return {c2, c5};
}

Outcome fig4(int threads) {
  const Grid g = run_figure("fig4", threads);
  const auto lin = g.curve("linucb");
  const auto sub = g.curve("isd_oracle_subspaces");
  const auto est = g.curve("isd_estimated");
  const bool shape = lin.size() == 3 && sub.size() == 3 && est.size() == 3;
  bool mono = shape, below = shape, above = shape;
  for (std::size_t i = 0; shape && i < 3; ++i) {
    if (i > 0) mono = mono && est[i].second <= est[i - 1].second;
    below = below && est[i].second < lin[i].second;
    above = above && est[i].second > sub[i].second;
  }
  Outcome o;
  o.pass = g.failures == 0 && mono && below && above && g.seconds < 900.0;
  o.detail = "estimated " + curve_str(est) + "; linucb " + curve_str(lin) + "; oracle subspaces " +
             curve_str(sub) + "; oracle beta " + curve_str(g.curve("isd_oracle_beta")) +
             "; non-increasing " + (mono ? "yes" : "no") + ", below linucb " + (below ? "yes" : "no") +
             ", above oracle " + (above ? "yes" : "no") + ", " + fmt(g.seconds) + " s";
  return o;
}

Outcome fig5(int threads) {
  const Grid g = run_figure("fig5", threads);
  std::map<double, std::pair<double, int>> acc;
  for (const auto& tr : g.traces) {
    auto& [sum, n] = acc[tr.sweep_value];
    sum += tr.delta_pi_hat * std::sqrt(tr.sweep_value);
    ++n;
  }
  std::vector<std::pair<double, double>> scaled;
  for (const auto& [t0, sn] : acc) scaled.emplace_back(t0, sn.first / sn.second);
  double lo = scaled.empty() ? 0.0 : scaled[0].second, hi = lo;
  for (const auto& [t0, v] : scaled) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  Outcome o;
  o.pass = g.failures == 0 && scaled.size() == 3 && lo > 0.0 && hi / lo <= 2.0;
  o.detail = "mean dPi*sqrt(T0) " + curve_str(scaled) + ", max/min " + fmt(hi / lo);
  return o;
}

Outcome coverage() {
  const int runs = 200;
  int beta_hits = 0, res_hits = 0;
  for (int rep = 0; rep < runs; ++rep) {
    InstanceConfig ic;
    ic.T = 100;
    Engine rng(derive_seed(404, 1, rep));
    const SyntheticInstance inst = sample_instance(ic, rng);
    Engine log_rng(derive_seed(404, 2, rep));
    const OfflineLog log = generate_offline_log(inst, log_rng);
    IsdParams params;
    params.eta = 0.05;
    IsdLinUcb isd(log.records, OracleTier::subspaces, truth_of(inst), params, bounds_of(inst, ic.T),
                  derive_seed(404, 5, rep));

    const OfflineFit& fit = isd.fit();
    const Vector eb = fit.basis.u_inv.transpose() * inst.beta_inv() - fit.beta_coords;
    if (std::sqrt(eb.dot(fit.inv_gram * eb)) <= bonus_scale(fit.rho_inv, params.convention)) ++beta_hits;

    // residual event at round T, before its update
    run_episode(inst, isd, ic.T - 1, {derive_seed(404, 3, rep), derive_seed(404, 4, rep)});
    isd.begin_round(ic.T);
    const ConfidenceEllipsoid& res = isd.residual_statistics();
    const Vector er = res.center() - inst.delta_res_coords_online;
    if (std::sqrt(er.dot(res.gram() * er)) <= bonus_scale(isd.residual_radius(), params.convention))
      ++res_hits;
  }
  Outcome o;
  o.pass = beta_hits >= 0.92 * runs && res_hits >= 0.92 * runs;
  o.detail = "beta event " + std::to_string(beta_hits) + "/" + std::to_string(runs) + ", residual event " +
             std::to_string(res_hits) + "/" + std::to_string(runs);
  return o;
}

Outcome all_residual_equivalence() {
  int same = 0;
  const int seeds = 10;
  for (int seed = 0; seed < seeds; ++seed) {
    InstanceConfig ic;
    ic.T = 200;
    Engine rng(derive_seed(505, 1, seed));
    const SyntheticInstance inst = sample_instance(ic, rng);
    Engine log_rng(derive_seed(505, 2, seed));
    const OfflineLog log = generate_offline_log(inst, log_rng);
    const Eigen::Index p = inst.dim();
    const IsdTruth truth{{Matrix(p, 0), Matrix::Identity(p, p)}, Vector(0)};
    const ProblemBounds b = bounds_of(inst, ic.T);
    IsdParams params;
    params.eta = 1.0 / ic.T;
    IsdLinUcb isd(log.records, OracleTier::subspaces_and_beta, truth, params, b, 1);
    LinUcb lin(p, params.lambda, params.eta, b);
    const EpisodeStreams st{derive_seed(505, 3, seed), derive_seed(505, 4, seed)};
    if (run_episode(inst, isd, ic.T, st).actions == run_episode(inst, lin, ic.T, st).actions) ++same;
  }
  return {same == seeds, std::to_string(same) + "/" + std::to_string(seeds) + " identical action sequences"};
}

Outcome numerics() {
  using namespace isdbandit::oracle;
  std::normal_distribution<double> n;

  Engine rng(606);
  LinUcb lin(6, 0.1, 0.1, {3, 1, 1, 10});
  Matrix g = 0.1 * Matrix::Identity(6, 6);
  Vector m = Vector::Zero(6);
  for (int i = 0; i < 1000; ++i) {
    const Vector x = Vector::NullaryExpr(6, [&] { return n(rng); });
    const double r = n(rng);
    lin.update(x, r);
    g += x * x.transpose();
    m += r * x;
  }
  const double inc = std::max((lin.statistics().gram() - g).cwiseAbs().maxCoeff(),
                              (lin.statistics().moment() - m).cwiseAbs().maxCoeff());

  double angle = 0.0;
  std::uniform_int_distribution<int> dim(2, 9);
  for (int i = 0; i < 100; ++i) {
    const int p = dim(rng);
    const int k = std::uniform_int_distribution<int>(1, p - 1)(rng);
    const Matrix a = random_orthonormal(p, k, rng);
    const Matrix b = random_orthonormal(p, k, rng);
    angle = std::max(angle, std::abs(principal_angle_distance(a, b) - projector_gap(a, b)));
  }

  double jbd = 0.0;
  bool jbd_blocks = true;
  for (int fam = 0; fam < 50; ++fam) {
    Engine fr(derive_seed(606, fam));
    const Matrix q = random_orthonormal(5, 5, fr);
    std::vector<Matrix> covs;
    for (int i = 0; i < 3; ++i) {
      Matrix blk = Matrix::Zero(5, 5);
      blk.topLeftCorner(2, 2) = random_spd(2, fr);
      blk.bottomRightCorner(3, 3) = random_spd(3, fr);
      covs.push_back(q * blk * q.transpose());
    }
    const JointBlockDiagonalization res = joint_block_diagonalize(covs, 1e-8, fr);
    if (res.blocks.size() != 2) {
      jbd_blocks = false;
      continue;
    }
    for (const auto& blk : res.blocks) {
      const Matrix want = blk.size() == 2 ? Matrix(q.leftCols(2)) : Matrix(q.rightCols(3));
      jbd = std::max(jbd, principal_angle_distance(res.u(Eigen::all, blk), want));
    }
  }

  double radii = 0.0;
  std::uniform_real_distribution<double> u(0.05, 5.0);
  std::uniform_real_distribution<double> e(0.001, 0.5);
  std::uniform_int_distribution<int> kd(1, 9);
  for (int i = 0; i < 20; ++i) {
    const double T0 = 100 * u(rng), eta = e(rng), L = u(rng), M = u(rng), s = u(rng), l0 = u(rng) / 5;
    const int k = kd(rng);
    const double dpi = u(rng) / 10, t = std::floor(50 * u(rng)) + 1, lam = u(rng), berr = u(rng);
    radii = std::max({radii, rel(rho_inv(T0, eta, L, M, s, l0, k, dpi, true), inv_radius(eta, L, M, s, l0, k)),
                      rel(rho_inv(T0, eta, L, M, s, l0, k, dpi, false),
                          full_inv_radius(T0, eta, L, M, s, l0, k, dpi)),
                      rel(rho_res(t, eta, L, M, s, lam, k, dpi, berr),
                          res_radius(t, eta, L, M, s, lam, k, dpi, berr))});
  }

  Outcome o;
  o.pass = inc <= 1e-8 && angle <= 1e-8 && jbd_blocks && jbd <= 1e-6 && radii <= 1e-12;
  o.detail = "incremental " + fmt(inc) + ", principal angles " + fmt(angle) + ", jbd " +
             (jbd_blocks ? fmt(jbd) : std::string("wrong block count")) + ", radii " + fmt(radii);
  return o;
}

Outcome hypercube(int threads) {
  const Grid g = run_figure("hypercube", threads);
  const auto c = g.curve("linucb");
  const LineFit f = fit_line(c);
  Outcome o;
  o.pass = g.failures == 0 && c.size() == 3 && f.slope > 0.0;
  o.detail = "mean regret at T=400 by p " + curve_str(c) + ", slope " + fmt(f.slope);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::set<int> only;
  int threads = 0;
  app.add_option("--only", only, "criteria to run (default all)")->check(CLI::Range(1, 9));
  app.add_option("--threads", threads, "worker threads (default ISDBANDIT_THREADS or all cores)");
  CLI11_PARSE(app, argc, argv);

  const std::map<int, std::string> names{
      {1, "fig2 regret grows linearly in p_res"},
      {2, "fig3 ISD flat in p, LinUCB grows"},
      {3, "fig4 estimated ISD between oracle and LinUCB"},
      {4, "fig5 subspace error scales as 1/sqrt(T0)"},
      {5, "SW/D-LinUCB comparable to LinUCB"},
      {6, "coverage of the confidence events"},
      {7, "p_inv=0 ISD equals LinUCB"},
      {8, "numerical suite"},
      {9, "hypercube regret grows with p"}};
  auto wanted = [&](int c) { return only.empty() || only.count(c) > 0; };

  std::map<int, Outcome> out;
  auto run = [&](int c, const std::function<Outcome()>& f) {
    if (!wanted(c)) return;
    try {
      out[c] = f();
    } catch (const std::exception& e) {
      out[c] = {false, std::string("error: ") + e.what()};
    }
    std::printf("criterion %d %s  %s: %s\n", c, out[c].pass ? "PASS" : "FAIL", names.at(c).c_str(),
                out[c].detail.c_str());
    std::fflush(stdout);
  };

  run(8, numerics);
  run(7, all_residual_equivalence);
  run(6, coverage);
  run(1, [&] { return fig2(threads); });
  if (wanted(2) || wanted(5)) {
    std::pair<Outcome, Outcome> both;
    bool done = false;
    auto get = [&] {
      if (!done) both = fig3(threads);
      done = true;
      return both;
    };
    run(2, [&] { return get().first; });
    run(5, [&] { return get().second; });
  }
  run(3, [&] { return fig4(threads); });
  run(4, [&] { return fig5(threads); });
  run(9, [&] { return hypercube(threads); });

  int failed = 0;
  for (const auto& [c, o] : out) failed += o.pass ? 0 : 1;
  std::printf("%zu criteria run, %d failed\n", out.size(), failed);
  return failed == 0 ? 0 : 1;
}
