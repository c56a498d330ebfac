// Acceptance suite: runs every gate criterion at its stated tolerance and
// prints one PASS/FAIL line per criterion. Exit code is the number of
// failures.

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <string>
#include <vector>

#include "fewtreat/crosssec.hpp"
#include "fewtreat/mclab.hpp"
#include "fewtreat/normal.hpp"
#include "fewtreat/panel.hpp"
#include "fewtreat/rng.hpp"
#include "fewtreat/signchange.hpp"
#include "fewtreat/special.hpp"
#include "fewtreat/timeseries.hpp"

using namespace fewtreat;

namespace {

int failures = 0;

void report(int criterion, bool ok, const std::string& detail) {
  std::printf("%s  criterion %2d: %s\n", ok ? "PASS" : "FAIL", criterion, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

CollapsedSample make_sample(std::vector<double> w, std::vector<std::uint8_t> treated) {
  CollapsedSample s;
  s.w = std::move(w);
  s.treated = std::move(treated);
  return s;
}

// ---------------------------------------------------------------------------
// Criteria 1 and 2: Table 1 rejection rates and the N1 = 1 analytic check.
// ---------------------------------------------------------------------------
void criteria_table1() {
  const std::size_t reps = 100000;
  const auto t0 = std::chrono::steady_clock::now();
  const auto rows = reproduce_table1(reps, 20260809);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  static constexpr double targets[5] = {0.84, 0.35, 0.22, 0.16, 0.15};
  bool ok = true;
  std::string detail = "table1 rejections (100k reps, " + std::to_string(secs).substr(0, 5) + " s):";
  for (const auto& r : rows) {
    ok = ok && std::fabs(r.rejection - targets[r.n1 - 1]) <= 0.02;
    char buf[64];
    std::snprintf(buf, sizeof(buf), " N1=%zu %.3f(%.2f)", r.n1, r.rejection, targets[r.n1 - 1]);
    detail += buf;
  }
  ok = ok && secs < 120.0;
  report(1, ok, detail);

  const double analytic = table1_analytic_rejection_n1_1();
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "N1=1 analytic cross-check: simulated %.4f vs closed form %.4f (tol 0.01)",
                rows[0].rejection, analytic);
  report(2, std::fabs(rows[0].rejection - analytic) <= 0.01, buf);

  std::printf("      (variance-ratio diagnostics, reported not gated:");
  for (const auto& r : rows)
    std::printf(" N1=%zu roe=%.2f mor=%.2f", r.n1, r.ratio_of_expectations, r.mean_of_ratios);
  std::printf(")\n");
}

// ---------------------------------------------------------------------------
// Criterion 3: exact size of the permutation test on the AR(1) DGP, N1 = 2.
// ---------------------------------------------------------------------------
void criterion_exact_size() {
  Scenario scen;
  scen.n0 = 30;
  scen.n1 = 2;
  scen.t0 = 5;
  scen.t1 = 5;
  scen.rho = 0.5;
  scen.alpha = 0.05;
  scen.methods = {"ct-exact"};
  scen.reps = 10000;
  scen.seed = 31;
  const MCResult r = run_rejection_study(scen);
  const double rate = r.rows[0].rejection_rate;
  char buf[128];
  std::snprintf(buf, sizeof(buf),
                "ct-exact size at 5%% (N1=2, AR(1) DGP, 10k reps): %.4f in [0.03, 0.06]", rate);
  report(3, rate >= 0.03 && rate <= 0.06, buf);
}

// ---------------------------------------------------------------------------
// Criteria 4, 5, 6: Figure 1 grid (sign-change trivial power, power ordering,
// size control).
// ---------------------------------------------------------------------------
void criteria_figure1() {
  Figure1Options opt;
  opt.reps = 5000;
  opt.seed = 112233;
  const auto rows = reproduce_figure1(opt);
  auto rate = [&](const std::string& m, std::size_t n1, double effect) {
    for (const auto& r : rows)
      if (r.method == m && r.n1 == n1 && r.effect == effect) return r.rejection_rate;
    std::fprintf(stderr, "missing figure1 cell\n");
    std::exit(99);
  };

  // criterion 4: trivial power for N1 <= 5, positive power at N1 in {6,10}
  bool ok4 = true;
  std::string d4 = "sign-change rejections:";
  for (std::size_t n1 : {2u, 5u}) {
    double worst = 0.0;
    for (double e : opt.effect_grid) worst = std::max(worst, rate("signchange-agg", n1, e));
    ok4 = ok4 && worst == 0.0;
    d4 += " N1=" + std::to_string(n1) + " max=" + std::to_string(worst).substr(0, 6);
  }
  for (std::size_t n1 : {6u, 10u}) {
    const double p = rate("signchange-agg", n1, 1.0);
    ok4 = ok4 && p > 0.0;
    d4 += " N1=" + std::to_string(n1) + "@1.0=" + std::to_string(p).substr(0, 6);
  }
  report(4, ok4, d4);

  // criterion 5: ct-exact dominates every other method up to 0.02
  bool ok5 = true;
  double worst_gap = 0.0;
  for (std::size_t n1 : opt.n1_grid)
    for (double e : opt.effect_grid) {
      if (e == 0.0) continue;
      const double ct = rate("ct-exact", n1, e);
      for (const auto& m : opt.methods) {
        if (m == "ct-exact") continue;
        const double gap = rate(m, n1, e) - ct;
        worst_gap = std::max(worst_gap, gap);
        ok5 = ok5 && ct >= rate(m, n1, e) - 0.02;
      }
    }
  char buf5[128];
  std::snprintf(buf5, sizeof(buf5),
                "power ordering: ct-exact >= others - 0.02 at all positive effects "
                "(worst shortfall %.4f)",
                worst_gap);
  report(5, ok5, buf5);

  // criterion 6: size control at effect 0 for all methods (the
  // signchange-agg cells at N1 <= 5 never reject by construction and are
  // governed by criterion 4)
  bool ok6 = true;
  std::string d6 = "sizes at effect 0:";
  for (const auto& m : opt.methods)
    for (std::size_t n1 : opt.n1_grid) {
      if (m == "signchange-agg" && n1 <= 5) continue;
      const double p = rate(m, n1, 0.0);
      ok6 = ok6 && p >= 0.03 && p <= 0.07;
      char buf[64];
      std::snprintf(buf, sizeof(buf), " %s/N1=%zu %.3f", m.c_str(), n1, p);
      d6 += buf;
    }
  if (!ok6)
    d6 += " [sign-change p support at N1=6 is dyadic {2/64, 4/64, ...}: the single test's size "
          "is 1/32 and partition-averaging with S > 2 can only fall below it]";
  report(6, ok6, d6);
}

// ---------------------------------------------------------------------------
// Criterion 7: bit-exact identity of the partitioned sign-change test and the
// coarse-cluster wild bootstrap with shared flip draws.
// ---------------------------------------------------------------------------
void criterion_bit_identity() {
  Rng rng(774411);
  std::size_t matched = 0;
  const std::size_t datasets = 100;
  for (std::size_t i = 0; i < datasets; ++i) {
    const std::size_t n1 = 2 + static_cast<std::size_t>(rng.below(5));   // 2..6
    const std::size_t per = 1 + static_cast<std::size_t>(rng.below(3));  // controls per cluster
    const std::size_t n = n1 * (1 + per);
    Scenario scen;
    scen.n1 = n1;
    scen.n0 = n - n1;
    scen.t0 = 3;
    scen.t1 = 2;
    scen.rho = 0.5;
    scen.methods = {"dl"};
    const Panel panel = gen_ar1_panel(scen, derive_seed(8, i));
    const CollapsedSample s = to_collapsed(panel);
    const Partition part = partition_controls(s, derive_seed(9, i));
    const double c = 0.1;
    DrawOptions opt;
    opt.seed = derive_seed(10, i);  // shared flip stream (enumerated here anyway)
    const double p_sign = signchange_partitioned(s, part, c, opt).p_value;
    const double p_wild = wildboot_null_clustered(s, part, c, opt).p_value;
    matched += (p_sign == p_wild);
  }
  char buf[128];
  std::snprintf(buf, sizeof(buf),
                "partitioned sign-change == clustered wild bootstrap bit-exactly on %zu/%zu "
                "balanced DiD datasets",
                matched, datasets);
  report(7, matched == datasets, buf);
}

// ---------------------------------------------------------------------------
// Criterion 8: asymptotic equivalence of the unit-level wild bootstrap and
// the sign-change test with N1 = 4, N0 = 2000, shared flip draws.
// ---------------------------------------------------------------------------
void criterion_asymptotic_equivalence() {
  Rng rng(88220022);
  const std::size_t n1 = 4, n0 = 2000, n = n1 + n0;
  const std::size_t datasets = 200;
  const std::size_t budget = 2000;
  std::size_t close = 0;
  double max_stat_gap = 0.0;
  for (std::size_t i = 0; i < datasets; ++i) {
    std::vector<double> w(n);
    for (auto& v : w) v = rng.normal();
    std::vector<std::uint8_t> d(n, 0);
    for (std::size_t j = 0; j < n1; ++j) d[j] = 1;
    const auto s = make_sample(w, d);
    const double c = 0.0;
    DrawOptions opt;
    opt.budget = budget;
    opt.seed = derive_seed(12, i);
    // Both tests sample the same flip stream (treated units come first, so
    // flip indices coincide); the comparison is free of draw noise.
    opt.force_sampling = true;

    const double p_wild = wildboot_null(s, c, opt).p_value;
    const double p_sign = signchange_test(per_unit_effects(s), c, opt).p_value;
    close += std::fabs(p_wild - p_sign) < 0.02;

    // Proposition-B.1 diagnostic: the shared-draw statistics themselves
    // converge; recompute both on the first draws and track the largest gap.
    const auto resid = null_residuals(s, c);
    const auto est = per_unit_effects(s);
    for (std::size_t draw = 1; draw <= 50; ++draw) {
      double sum_t = 0.0, sum_c = 0.0, sign_stat = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double g = flip_sign(opt.seed, draw, j);
        if (d[j]) {
          sum_t += g * resid[j];
          sign_stat += g * (est.tau[j] - c);
        } else {
          sum_c += g * resid[j];
        }
      }
      const double wild_stat = sum_t / static_cast<double>(n1) - sum_c / static_cast<double>(n0);
      max_stat_gap = std::max(max_stat_gap, std::fabs(wild_stat - sign_stat / static_cast<double>(n1)));
    }
  }
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "|p_wild - p_sign| < 0.02 on %zu/%zu datasets (need >= 190) at N1=4, N0=2000 "
                "[shared-draw statistics agree to %.4f; the p gap is the 2/2^4 tie-atom mass "
                "half-counted under noise]",
                close, datasets, max_stat_gap);
  report(8, close * 100 >= datasets * 95, buf);
}

// ---------------------------------------------------------------------------
// Criterion 9: IM / Bester collapse on balanced clusters.
// ---------------------------------------------------------------------------
void criterion_im_bester() {
  Rng rng(9911);
  std::size_t matched = 0;
  const std::size_t datasets = 100;
  double worst = 0.0;
  for (std::size_t i = 0; i < datasets; ++i) {
    const std::size_t g = 2 + static_cast<std::size_t>(rng.below(5));
    const std::size_t per = 1 + static_cast<std::size_t>(rng.below(4));
    const std::size_t n = g * (1 + per);
    std::vector<double> w(n);
    for (auto& v : w) v = rng.normal();
    std::vector<std::uint8_t> d(n, 0);
    for (std::size_t j = 0; j < g; ++j) d[j] = 1;
    const auto s = make_sample(w, d);
    const Partition part = partition_controls(s, derive_seed(13, i));
    const double c = 0.3;
    const auto bt = bester_ttest(s, part, c);
    const auto im = im_ttest(ClusterEstimates{cluster_effects(s, part)}, 0.05, c);
    const double dt = std::fabs(bt.statistic - im.statistic);
    const double dc = std::fabs(bt.metadata.at("critical_value") - im.metadata.at("critical_value"));
    worst = std::max({worst, dt, dc});
    matched += (dt <= 1e-10 && dc <= 1e-10);
  }
  char buf[128];
  std::snprintf(buf, sizeof(buf),
                "IM and Bester statistics/critical values agree to 1e-10 on %zu/%zu datasets "
                "(worst %.2e)",
                matched, datasets, worst);
  report(9, matched == datasets, buf);
}

// ---------------------------------------------------------------------------
// Criterion 10: permutation floor 1/(N0+1) with one treated unit, N0 <= 20.
// ---------------------------------------------------------------------------
void criterion_permutation_floor() {
  Rng rng(1010);
  bool ok = true;
  for (std::size_t n0 = 1; n0 <= 20; ++n0) {
    std::vector<double> w(n0 + 1);
    std::vector<std::uint8_t> d(n0 + 1, 0);
    d[0] = 1;
    // an extreme treated unit attains the floor exactly; with a single
    // control the two assignments have equal magnitude, so the two-sided
    // p-value is identically 1 and the floor holds strictly
    w[0] = 100.0;
    for (std::size_t j = 1; j <= n0; ++j) w[j] = rng.normal();
    const auto attained = ct_exact_permutation(make_sample(w, d), 0.0);
    ok = ok && attained.enumerated && attained.ref_size == n0 + 1;
    const double floor_p = n0 == 1 ? 1.0 : 1.0 / static_cast<double>(n0 + 1);
    ok = ok && attained.p_value == floor_p;
    // and random datasets never dip below the floor
    for (int t = 0; t < 20; ++t) {
      for (auto& v : w) v = rng.normal();
      const double p = ct_exact_permutation(make_sample(w, d), 0.0).p_value;
      ok = ok && p >= 1.0 / static_cast<double>(n0 + 1);
    }
  }
  report(10, ok,
         "full-enumeration minimum p equals 1/(N0+1) for every 2 <= N0 <= 20 "
         "(p is identically 1 at N0 = 1) and the floor holds throughout");
}

// ---------------------------------------------------------------------------
// Criterion 11: property suites (super-uniformity by brute force, location
// and scale invariances, dense least-squares oracle equivalence).
// ---------------------------------------------------------------------------
double twfe_dense_ls(const Panel& p) {
  const std::size_t n = p.n_units, t = p.n_periods;
  const std::size_t cols = 1 + (n - 1) + (t - 1) + 1;
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n * t, cols);
  Eigen::VectorXd y(n * t);
  std::size_t r = 0;
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t s = 0; s < t; ++s, ++r) {
      y(r) = p.outcome(j, s);
      x(r, 0) = 1.0;
      if (j > 0) x(r, j) = 1.0;
      if (s > 0) x(r, (n - 1) + s) = 1.0;
      if (p.treated[j] && s >= p.n_pre) x(r, cols - 1) = 1.0;
    }
  Eigen::VectorXd beta = x.colPivHouseholderQr().solve(y);
  return beta(cols - 1);
}

void criterion_property_suites() {
  Rng rng(111213);
  bool ok = true;
  std::string failures_detail;

  // (a) super-uniformity of the enumerated randomization test, N <= 8
  for (std::size_t n : {5u, 6u, 8u}) {
    for (std::size_t n1 : {1u, 2u, 3u}) {
      if (n1 >= n) continue;
      std::vector<double> w(n);
      for (auto& v : w) v = rng.normal();
      std::vector<double> pvals;
      std::vector<std::size_t> comb(n1);
      for (std::size_t i = 0; i < n1; ++i) comb[i] = i;
      do {
        std::vector<std::uint8_t> d(n, 0);
        for (std::size_t j : comb) d[j] = 1;
        pvals.push_back(ct_exact_permutation(make_sample(w, d), 0.0).p_value);
      } while (next_combination(comb, n));
      const double m = static_cast<double>(pvals.size());
      for (std::size_t k = 1; k <= pvals.size(); ++k) {
        std::size_t count = 0;
        for (double p : pvals) count += p <= static_cast<double>(k) / m + 1e-12;
        if (count > k) {
          ok = false;
          failures_detail += " randomization-super-uniformity";
        }
      }
    }
  }

  // (b) super-uniformity of the sign-change test under exact symmetry, N1 <= 4
  for (std::size_t n1 : {2u, 3u, 4u}) {
    std::vector<double> mag(n1);
    for (auto& v : mag) v = std::fabs(rng.normal()) + 0.05;
    const std::size_t total = std::size_t{1} << n1;
    std::vector<double> pvals;
    for (std::size_t mask = 0; mask < total; ++mask) {
      PerUnitEstimates est;
      est.tau.resize(n1);
      for (std::size_t j = 0; j < n1; ++j)
        est.tau[j] = ((mask >> j) & 1 ? -1.0 : 1.0) * mag[j];
      pvals.push_back(signchange_test(est, 0.0).p_value);
    }
    for (std::size_t k = 1; k <= total; ++k) {
      std::size_t count = 0;
      for (double p : pvals) count += p <= static_cast<double>(k) / static_cast<double>(total) + 1e-12;
      if (count > k) {
        ok = false;
        failures_detail += " signchange-super-uniformity";
      }
    }
  }

  // (c) super-uniformity of the conformal p-value over full permutations, T <= 8
  {
    const std::size_t t_total = 6;
    std::vector<double> base(t_total);
    for (auto& v : base) v = rng.normal();
    std::vector<std::size_t> order(t_total);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> pvals;
    do {
      std::vector<double> v(t_total);
      for (std::size_t i = 0; i < t_total; ++i) v[i] = base[order[i]];
      pvals.push_back(eos_pvalue({v, 1}).p_value);
    } while (std::next_permutation(order.begin(), order.end()));
    const double m = static_cast<double>(pvals.size());
    for (std::size_t k = 1; k <= t_total; ++k) {
      const double alpha = static_cast<double>(k) / static_cast<double>(t_total);
      std::size_t count = 0;
      for (double p : pvals) count += p <= alpha + 1e-12;
      if (static_cast<double>(count) > alpha * m + 1e-9) {
        ok = false;
        failures_detail += " eos-super-uniformity";
      }
    }
  }

  // (d) location/scale invariances
  {
    std::vector<double> w(10);
    for (auto& v : w) v = rng.normal();
    std::vector<std::uint8_t> d(10, 0);
    d[0] = d[1] = 1;
    const auto s = make_sample(w, d);
    auto shifted = s;
    for (auto& v : shifted.w) v += 3.25;
    if (ct_pvalue(s, 0.1).p_value != ct_pvalue(shifted, 0.1).p_value) {
      ok = false;
      failures_detail += " ct-location";
    }
    if (ct_exact_permutation(s, 0.1).p_value != ct_exact_permutation(shifted, 0.1).p_value) {
      ok = false;
      failures_detail += " ct-exact-location";
    }
    auto treated_shifted = s;
    for (std::size_t j = 0; j < 10; ++j)
      if (d[j]) treated_shifted.w[j] += 0.75;
    if (std::fabs(ct_exact_permutation(s, 0.1).p_value -
                  ct_exact_permutation(treated_shifted, 0.85).p_value) > 1e-12) {
      ok = false;
      failures_detail += " null-shift";
    }
    auto scaled = s;
    for (auto& v : scaled.w) v *= 10.0;
    if (std::fabs(permutation_tstat(s, 0.0).p_value - permutation_tstat(scaled, 0.0).p_value) >
        1e-12) {
      ok = false;
      failures_detail += " tstat-scale";
    }
  }

  // (e) collapsed DiD equals dense least squares, N <= 6, T <= 4
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(rng.below(5));
    const std::size_t t = 2 + static_cast<std::size_t>(rng.below(3));
    const std::size_t n_pre = 1 + static_cast<std::size_t>(rng.below(t - 1));
    const std::size_t n1 = 1 + static_cast<std::size_t>(rng.below(n - 1));
    Panel p;
    p.n_units = n;
    p.n_periods = t;
    p.n_pre = n_pre;
    p.outcomes.resize(n * t);
    for (auto& v : p.outcomes) v = rng.normal();
    p.treated.assign(n, 0);
    for (std::size_t j = 0; j < n1; ++j) p.treated[j] = 1;
    const double collapsed = estimate_effect(collapse_prepost(p)).tau_hat;
    if (std::fabs(collapsed - twfe_dense_ls(p)) > 1e-8 * (1.0 + std::fabs(collapsed))) {
      ok = false;
      failures_detail += " dense-ls";
    }
  }

  report(11, ok,
         ok ? "property suites: super-uniformity (brute force), invariances, dense-LS oracle"
            : "property suites failed:" + failures_detail);
}

// ---------------------------------------------------------------------------
// Criterion 12: jackknife variance is not downward-biased at the MC level.
// ---------------------------------------------------------------------------
void criterion_jackknife_bias() {
  bool ok = true;
  std::string detail = "mean(V_jack) >= MC-var(tau) - 3 SE on the AR(1) DGP:";
  for (std::size_t n1 : {2u, 5u}) {
    Scenario scen;
    scen.n0 = 30;
    scen.n1 = n1;
    scen.t0 = 5;
    scen.t1 = 5;
    scen.rho = 0.5;
    scen.methods = {"dl"};
    const std::size_t reps = 4000;
    std::vector<double> tau(reps), vjack(reps);
    for (std::size_t rep = 0; rep < reps; ++rep) {
      const Panel panel = gen_ar1_panel(scen, derive_seed(606, rep + n1 * 1000000));
      const CollapsedSample s = to_collapsed(panel);
      tau[rep] = estimate_effect(s).tau_hat;
      vjack[rep] = jackknife_variance(tau[rep], leave_one_unit_out_effects(s)).value;
    }
    const double rd = static_cast<double>(reps);
    const double tmean = kahan_mean(tau);
    double ss = 0.0, vmean = 0.0, vss = 0.0;
    for (double v : tau) ss += (v - tmean) * (v - tmean);
    const double var_tau = ss / (rd - 1.0);
    vmean = kahan_mean(vjack);
    for (double v : vjack) vss += (v - vmean) * (v - vmean);
    const double se_vmean = std::sqrt(vss / (rd - 1.0) / rd);
    const double se_var_tau = var_tau * std::sqrt(2.0 / (rd - 1.0));
    const double slack = 3.0 * std::sqrt(se_vmean * se_vmean + se_var_tau * se_var_tau);
    ok = ok && vmean >= var_tau - slack;
    char buf[96];
    std::snprintf(buf, sizeof(buf), " N1=%zu mean(Vjack)=%.4f var(tau)=%.4f", n1, vmean, var_tau);
    detail += buf;
  }
  report(12, ok, detail);
}

}  // namespace

int main() {
  std::printf("fewtreat acceptance suite\n");
  criteria_table1();
  criterion_exact_size();
  criteria_figure1();
  criterion_bit_identity();
  criterion_asymptotic_equivalence();
  criterion_im_bester();
  criterion_permutation_floor();
  criterion_property_suites();
  criterion_jackknife_bias();
  if (failures == 0) std::printf("all acceptance criteria passed\n");
  else std::printf("%d acceptance criteria FAILED\n", failures);
  return failures;
}
