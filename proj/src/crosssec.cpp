#include "fewtreat/crosssec.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "fewtreat/error.hpp"
#include "fewtreat/rng.hpp"

namespace fewtreat {

namespace {

bool exceeds(double stat, double obs, Tail tail) {
  switch (tail) {
    case Tail::left:
      return stat <= obs;
    case Tail::right:
      return stat >= obs;
    case Tail::both:
    default:
      return std::fabs(stat) >= std::fabs(obs);
  }
}

// Shared driver for assignment-randomization tests. `stat` maps a treated
// index set to a statistic, or NaN to skip the draw (singular designs). The
// observed statistic is computed through the same function at the actual
// assignment, so the identity draw ties it exactly.
template <typename StatFn>
TestResult run_assignment_test(std::size_t n, std::size_t n1,
                               const std::vector<std::size_t>& observed_set,
                               const DrawOptions& opt, StatFn&& stat) {
  if (opt.budget < 2) fail(errc::bad_argument, "budget must be at least 2");
  const double obs = stat(observed_set);
  if (std::isnan(obs)) fail(errc::singular_design, "observed assignment yields no statistic");

  const std::uint64_t total = n_choose_k_capped(n, n1);
  std::size_t count = 0, evaluated = 0, skipped = 0;
  const bool enumerate = !opt.force_sampling && total <= opt.budget;
  if (enumerate) {
    std::vector<std::size_t> comb(n1);
    for (std::size_t i = 0; i < n1; ++i) comb[i] = i;
    do {
      const double s = stat(comb);
      if (std::isnan(s)) {
        ++skipped;
        continue;
      }
      ++evaluated;
      if (exceeds(s, obs, opt.tail)) ++count;
    } while (next_combination(comb, n));
  } else {
    // Identity plus iid uniform assignments. The index pool persists across
    // draws (a partial Fisher-Yates from any permutation is still uniform),
    // which keeps the sampling loop allocation-free.
    ++evaluated;
    ++count;  // the identity ties itself under every tail convention
    Rng rng(splitmix64(opt.seed));
    std::vector<std::size_t> pool(n), comb(n1);
    for (std::size_t i = 0; i < n; ++i) pool[i] = i;
    for (std::size_t d = 1; d < opt.budget; ++d) {
      for (std::size_t i = 0; i < n1; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
        std::swap(pool[i], pool[j]);
        comb[i] = pool[i];
      }
      const double s = stat(comb);
      if (std::isnan(s)) {
        ++skipped;
        continue;
      }
      ++evaluated;
      if (exceeds(s, obs, opt.tail)) ++count;
    }
  }
  if (evaluated == 0) fail(errc::degenerate, "no evaluable assignments");

  TestResult r;
  r.p_value = static_cast<double>(count) / static_cast<double>(evaluated);
  r.statistic = obs;
  r.ref_size = evaluated;
  r.enumerated = enumerate;
  r.seed = opt.seed;
  r.tail = opt.tail;
  if (skipped > 0) r.metadata["singular_skipped"] = static_cast<double>(skipped);
  return r;
}

// Difference in means of `values` between an index set and its complement.
struct DiffMeans {
  const std::vector<double>& values;
  double total;
  double n1, n0;
  double operator()(const std::vector<std::size_t>& comb) const {
    double sum_t = 0.0;
    for (std::size_t j : comb) sum_t += values[j];
    return sum_t / n1 - (total - sum_t) / n0;
  }
};

void require_two_groups(const CollapsedSample& s) {
  if (s.n_treated() == 0) fail(errc::no_treated, "no treated units");
  if (s.n_controls() == 0) fail(errc::no_controls, "no control units");
}

}  // namespace

std::vector<double> control_residuals(const CollapsedSample& sample) {
  const double m0 = sample.control_mean();
  std::vector<double> out;
  out.reserve(sample.n_controls());
  for (std::size_t j = 0; j < sample.size(); ++j)
    if (!sample.treated[j]) out.push_back(sample.w[j] - m0);
  return out;
}

TestResult ct_pvalue(const CollapsedSample& sample, double c, Tail tail) {
  require_two_groups(sample);
  const auto resid = control_residuals(sample);
  const double tau = estimate_effect(sample).tau_hat;
  const double obs = tau - c;
  std::size_t count = 0;
  for (double wj : resid)
    if (exceeds(wj, obs, tail)) ++count;
  TestResult r;
  r.method = "ct";
  r.p_value = static_cast<double>(count) / static_cast<double>(resid.size());
  r.statistic = obs;
  r.estimate = tau;
  r.c0 = c;
  r.ref_size = resid.size();
  r.enumerated = true;
  r.tail = tail;
  return r;
}

namespace {

// Order-statistic quantile: the ceil(u*n)-th smallest of sorted values.
double order_stat_quantile(const std::vector<double>& sorted, double u) {
  const std::size_t n = sorted.size();
  std::size_t k = static_cast<std::size_t>(std::ceil(u * static_cast<double>(n)));
  if (k < 1) k = 1;
  if (k > n) k = n;
  return sorted[k - 1];
}

}  // namespace

IntervalResult ct_confint(const CollapsedSample& sample, double gamma) {
  require_two_groups(sample);
  if (!(gamma > 0.0 && gamma < 1.0)) fail(errc::bad_argument, "gamma must be in (0,1)");
  if (sample.n_controls() < 2) fail(errc::insufficient_data, "interval needs at least 2 controls");
  auto resid = control_residuals(sample);
  std::sort(resid.begin(), resid.end());
  const double tau = estimate_effect(sample).tau_hat;
  IntervalResult out;
  out.method = "ct-ci";
  out.lower = tau - order_stat_quantile(resid, 1.0 - gamma / 2.0);
  out.upper = tau - order_stat_quantile(resid, gamma / 2.0);
  out.level = 1.0 - gamma;
  return out;
}

TestResult ct_exact_permutation(const CollapsedSample& sample, double c, const DrawOptions& opt) {
  require_two_groups(sample);
  const auto resid = null_residuals(sample, c);
  const std::size_t n = sample.size();
  const std::size_t n1 = sample.n_treated();
  DiffMeans stat{resid, kahan_sum(resid), static_cast<double>(n1),
                 static_cast<double>(n - n1)};
  TestResult r = run_assignment_test(n, n1, sample.treated_units(), opt, stat);
  r.method = "ct-exact";
  r.estimate = estimate_effect(sample).tau_hat;
  r.c0 = c;
  return r;
}

TestResult ct_exact_permutation_cov(const CollapsedSample& sample, double c,
                                    const DrawOptions& opt) {
  if (sample.n_covariates == 0) {
    TestResult r = ct_exact_permutation(sample, c, opt);
    r.method = "ct-exact-cov";
    return r;
  }
  require_two_groups(sample);
  const std::size_t n = sample.size();
  const std::size_t n1 = sample.n_treated();
  const std::size_t k = sample.n_covariates;
  const std::size_t cols = 2 + k;
  if (n <= cols) fail(errc::insufficient_data, "more parameters than units");

  Eigen::VectorXd y(n);
  for (std::size_t j = 0; j < n; ++j)
    y(static_cast<Eigen::Index>(j)) = sample.w[j] - (sample.treated[j] ? c : 0.0);
  Eigen::MatrixXd design(n, cols);
  for (std::size_t j = 0; j < n; ++j) {
    design(j, 0) = 1.0;
    design(j, 1) = 0.0;
    for (std::size_t q = 0; q < k; ++q) design(j, 2 + q) = sample.covariates[j * k + q];
  }

  auto stat = [&](const std::vector<std::size_t>& comb) -> double {
    design.col(1).setZero();
    for (std::size_t j : comb) design(static_cast<Eigen::Index>(j), 1) = 1.0;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    qr.setThreshold(1e-10);
    if (qr.rank() < static_cast<Eigen::Index>(cols)) return std::numeric_limits<double>::quiet_NaN();
    const Eigen::VectorXd beta = qr.solve(y);
    return beta(1);
  };

  TestResult r = run_assignment_test(n, n1, sample.treated_units(), opt, stat);
  r.method = "ct-exact-cov";
  r.estimate = r.statistic + c;  // coefficient on D in the unmodified regression
  r.c0 = c;
  return r;
}

TestResult permutation_tstat(const CollapsedSample& sample, double c, const DrawOptions& opt) {
  const std::size_t n = sample.size();
  const std::size_t n1 = sample.n_treated();
  const std::size_t n0 = n - n1;
  if (n1 < 2 || n0 < 2) fail(errc::insufficient_data, "studentized test needs N1 >= 2 and N0 >= 2");
  const auto resid = null_residuals(sample, c);
  const double d1 = static_cast<double>(n1), d0 = static_cast<double>(n0);

  std::vector<std::uint8_t> mark(n, 0);
  auto stat = [&](const std::vector<std::size_t>& comb) -> double {
    for (std::size_t j : comb) mark[j] = 1;
    double sum_t = 0.0, sum_c = 0.0;
    for (std::size_t j = 0; j < n; ++j) (mark[j] ? sum_t : sum_c) += resid[j];
    const double mt = sum_t / d1, mc = sum_c / d0;
    double ss_t = 0.0, ss_c = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double d = resid[j] - (mark[j] ? mt : mc);
      (mark[j] ? ss_t : ss_c) += d * d;
    }
    for (std::size_t j : comb) mark[j] = 0;
    const double num = mt - mc;
    const double denom = std::sqrt(ss_t / (d1 * (d1 - 1.0)) + ss_c / (d0 * (d0 - 1.0)));
    if (denom == 0.0) {
      if (num == 0.0) return 0.0;
      return std::copysign(std::numeric_limits<double>::infinity(), num);
    }
    return num / denom;
  };

  TestResult r = run_assignment_test(n, n1, sample.treated_units(), opt, stat);
  r.method = "perm-t";
  r.estimate = estimate_effect(sample).tau_hat;
  r.c0 = c;
  return r;
}

FpRescaleResult fp_rescale(const CollapsedSample& sample) {
  require_two_groups(sample);
  if (sample.unit_sizes.empty()) fail(errc::bad_argument, "unit sizes required for rescaling");
  const std::size_t n0 = sample.n_controls();
  if (n0 < 3) fail(errc::insufficient_data, "rescaling needs at least 3 controls");

  const double m1 = sample.treated_mean();
  const double m0 = sample.control_mean();

  // OLS of squared control residuals on [1, 1/X].
  double zbar = 0.0, qbar = 0.0;
  std::vector<double> z, q;
  z.reserve(n0);
  q.reserve(n0);
  for (std::size_t j = 0; j < sample.size(); ++j) {
    if (sample.treated[j]) continue;
    const double r = sample.w[j] - m0;
    z.push_back(1.0 / sample.unit_sizes[j]);
    q.push_back(r * r);
    zbar += z.back();
    qbar += q.back();
  }
  zbar /= static_cast<double>(n0);
  qbar /= static_cast<double>(n0);
  double szz = 0.0, szq = 0.0;
  for (std::size_t i = 0; i < n0; ++i) {
    szz += (z[i] - zbar) * (z[i] - zbar);
    szq += (z[i] - zbar) * (q[i] - qbar);
  }
  if (szz <= 0.0) fail(errc::collinear, "all unit sizes equal; variance model unidentified");

  FpRescaleResult out;
  out.b_hat = szq / szz;
  out.a_hat = qbar - out.b_hat * zbar;

  const double floor = 1e-10 * qbar;
  double z1 = 0.0;
  std::size_t n1 = 0;
  for (std::size_t j = 0; j < sample.size(); ++j)
    if (sample.treated[j]) {
      z1 += 1.0 / sample.unit_sizes[j];
      ++n1;
    }
  z1 /= static_cast<double>(n1);
  double v_ref = out.a_hat + out.b_hat * z1;
  if (v_ref < floor) {
    v_ref = floor;
    out.clamped = true;
  }

  out.rescaled = sample;
  out.fitted_variance.resize(sample.size());
  if (qbar == 0.0) {
    // All control residuals are zero: no variance information, rescaling is
    // the identity.
    out.clamped = true;
    for (std::size_t j = 0; j < sample.size(); ++j) out.fitted_variance[j] = 0.0;
    return out;
  }
  for (std::size_t j = 0; j < sample.size(); ++j) {
    double v = out.a_hat + out.b_hat / sample.unit_sizes[j];
    if (v < floor) {
      v = floor;
      out.clamped = true;
    }
    out.fitted_variance[j] = v;
    const double mean_j = sample.treated[j] ? m1 : m0;
    out.rescaled.w[j] = mean_j + (sample.w[j] - mean_j) * std::sqrt(v_ref / v);
  }
  return out;
}

TestResult design_randomization_test(const std::vector<double>& outcomes,
                                     const std::vector<std::uint8_t>& treated, double c,
                                     const DrawOptions& opt) {
  const std::size_t n = outcomes.size();
  if (treated.size() != n) fail(errc::bad_argument, "outcomes/treated size mismatch");
  std::vector<std::size_t> t_ids;
  for (std::size_t j = 0; j < n; ++j)
    if (treated[j]) t_ids.push_back(j);
  const std::size_t n1 = t_ids.size();
  if (n1 == 0) fail(errc::no_treated, "no treated units");
  if (n1 == n) fail(errc::no_controls, "no control units");

  std::vector<double> adjusted(outcomes);
  for (std::size_t j : t_ids) adjusted[j] -= c;
  DiffMeans stat{adjusted, kahan_sum(adjusted), static_cast<double>(n1),
                 static_cast<double>(n - n1)};
  TestResult r = run_assignment_test(n, n1, t_ids, opt, stat);
  r.method = "drt";
  r.estimate = r.statistic + c;
  r.c0 = c;
  return r;
}

TestResult conditional_randomization_test(const std::vector<double>& outcomes,
                                          const std::vector<std::uint8_t>& treated,
                                          const std::vector<std::uint8_t>& balance, double c,
                                          const DrawOptions& opt) {
  const std::size_t n = outcomes.size();
  if (treated.size() != n || balance.size() != n)
    fail(errc::bad_argument, "outcomes/treated/balance size mismatch");
  if (opt.budget < 2) fail(errc::bad_argument, "budget must be at least 2");

  std::vector<std::size_t> t_ids, pool1, pool0;
  std::size_t k1 = 0;
  for (std::size_t j = 0; j < n; ++j) {
    if (treated[j]) {
      t_ids.push_back(j);
      if (balance[j]) ++k1;
    }
    (balance[j] ? pool1 : pool0).push_back(j);
  }
  const std::size_t n1 = t_ids.size();
  if (n1 == 0) fail(errc::no_treated, "no treated units");
  if (n1 == n) fail(errc::no_controls, "no control units");
  const std::size_t k0 = n1 - k1;

  std::vector<double> adjusted(outcomes);
  for (std::size_t j : t_ids) adjusted[j] -= c;
  DiffMeans stat{adjusted, kahan_sum(adjusted), static_cast<double>(n1),
                 static_cast<double>(n - n1)};
  const double obs = stat(t_ids);

  const std::uint64_t c1 = n_choose_k_capped(pool1.size(), k1);
  const std::uint64_t c0 = n_choose_k_capped(pool0.size(), k0);
  const std::uint64_t total =
      (c1 != 0 && c0 > INT64_MAX / c1) ? INT64_MAX : c1 * c0;

  TestResult r;
  r.method = "drt-cond";
  r.statistic = obs;
  r.estimate = obs + c;
  r.c0 = c;
  r.seed = opt.seed;
  r.tail = opt.tail;
  r.metadata["restricted_set_size"] = static_cast<double>(total);
  if (total <= 1) {
    r.p_value = 1.0;
    r.ref_size = 1;
    r.enumerated = true;
    r.warnings.push_back("SINGLETON: restricted assignment set contains only the identity");
    return r;
  }

  std::size_t count = 0, evaluated = 0;
  const bool enumerate = total <= opt.budget;
  std::vector<std::size_t> comb(n1);
  if (enumerate) {
    std::vector<std::size_t> sel1(k1), sel0(k0);
    for (std::size_t i = 0; i < k1; ++i) sel1[i] = i;
    do {
      for (std::size_t i = 0; i < k0; ++i) sel0[i] = i;
      do {
        comb.clear();
        for (std::size_t i : sel1) comb.push_back(pool1[i]);
        for (std::size_t i : sel0) comb.push_back(pool0[i]);
        ++evaluated;
        if (exceeds(stat(comb), obs, opt.tail)) ++count;
      } while (next_combination(sel0, pool0.size()));
    } while (next_combination(sel1, pool1.size()));
  } else {
    ++evaluated;
    ++count;  // identity
    Rng rng(splitmix64(opt.seed));
    for (std::size_t d = 1; d < opt.budget; ++d) {
      comb.clear();
      for (std::size_t i : rng.sample_without_replacement(pool1.size(), k1))
        comb.push_back(pool1[i]);
      for (std::size_t i : rng.sample_without_replacement(pool0.size(), k0))
        comb.push_back(pool0[i]);
      ++evaluated;
      if (exceeds(stat(comb), obs, opt.tail)) ++count;
    }
  }
  r.p_value = static_cast<double>(count) / static_cast<double>(evaluated);
  r.ref_size = evaluated;
  r.enumerated = enumerate;
  return r;
}

}  // namespace fewtreat
