#include "fewtreat/normal.hpp"

#include <algorithm>
#include <cmath>

#include "fewtreat/error.hpp"
#include "fewtreat/rng.hpp"
#include "fewtreat/special.hpp"

namespace fewtreat {

TestResult im_ttest(const ClusterEstimates& est, double alpha, double c) {
  const std::size_t g = est.size();
  if (g < 2) fail(errc::insufficient_data, "t-test needs at least 2 cluster estimates");
  if (!(alpha > 0.0 && alpha < 1.0)) fail(errc::bad_argument, "alpha must be in (0,1)");
  const double gd = static_cast<double>(g);
  const double mean = kahan_mean(est.values);
  double ss = 0.0;
  for (double v : est.values) ss += (v - mean) * (v - mean);
  const double s2 = ss / (gd - 1.0);
  if (s2 == 0.0) fail(errc::degenerate, "zero variance across cluster estimates");

  TestResult r;
  r.method = "im";
  r.estimate = mean;
  r.c0 = c;
  r.statistic = (mean - c) / std::sqrt(s2 / gd);
  r.p_value = student_t_two_sided_p(r.statistic, gd - 1.0);
  r.ref_size = g;
  r.metadata["df"] = gd - 1.0;
  r.metadata["critical_value"] = student_t_quantile(1.0 - alpha / 2.0, gd - 1.0);
  if (g < 3)
    r.warnings.push_back("only " + std::to_string(g) +
                         " clusters; the t approximation can be fragile");
  return r;
}

TestResult donald_lang(const CollapsedSample& sample, double c) {
  const std::size_t n = sample.size();
  if (n < 3) fail(errc::insufficient_data, "needs at least 3 units");
  const auto est = estimate_effect(sample);
  const auto v = var_homoskedastic(sample);
  if (!(v.value > 0.0)) fail(errc::degenerate, "zero homoskedastic variance estimate");

  TestResult r;
  r.method = "dl";
  r.estimate = est.tau_hat;
  r.c0 = c;
  r.statistic = (est.tau_hat - c) / std::sqrt(v.value);
  const double df = static_cast<double>(n) - 2.0;
  r.p_value = student_t_two_sided_p(r.statistic, df);
  r.metadata["df"] = df;
  return r;
}

namespace {

void require_balanced(const Partition& part) {
  if (part.n_clusters() < 2)
    fail(errc::insufficient_data, "coarse-cluster test needs at least 2 clusters");
  const std::size_t size0 = part.clusters.front().controls.size();
  for (const auto& cl : part.clusters) {
    if (cl.controls.size() != size0)
      fail(errc::bester_balance, "clusters must have equal sizes with one treated unit each");
    if (cl.controls.empty()) fail(errc::bester_balance, "cluster without controls");
  }
}

}  // namespace

TestResult bester_ttest(const CollapsedSample& sample, const Partition& part, double c,
                        double alpha) {
  require_balanced(part);
  if (!(alpha > 0.0 && alpha < 1.0)) fail(errc::bad_argument, "alpha must be in (0,1)");
  const std::size_t g = part.n_clusters();
  const double gd = static_cast<double>(g);

  // OLS of w on an intercept and the treatment dummy over partitioned units.
  double sum1 = 0.0, sum0 = 0.0;
  std::size_t n1 = 0, n0 = 0;
  for (const auto& cl : part.clusters) {
    sum1 += sample.w[cl.treated];
    ++n1;
    for (std::size_t j : cl.controls) {
      sum0 += sample.w[j];
      ++n0;
    }
  }
  const double m1 = sum1 / static_cast<double>(n1);
  const double m0 = sum0 / static_cast<double>(n0);
  const double beta = m1 - m0;

  // Cluster-robust sandwich for the dummy coefficient. With X_j = (1, D_j),
  // the tau-row of (X'X)^{-1} is (-1/N0, N/(N1*N0)), so the per-cluster
  // contribution is r'S_k with S_k the within-cluster score sum.
  const double d1 = static_cast<double>(n1), d0 = static_cast<double>(n0);
  const double dn = d1 + d0;
  double meat = 0.0;
  for (const auto& cl : part.clusters) {
    double s_all = sample.w[cl.treated] - m1;
    const double s_treat = sample.w[cl.treated] - m1;
    for (std::size_t j : cl.controls) s_all += sample.w[j] - m0;
    const double contrib = -s_all / d0 + s_treat * dn / (d1 * d0);
    meat += contrib * contrib;
  }
  const double v_corrected = meat * gd / (gd - 1.0);
  if (!(v_corrected > 0.0)) fail(errc::degenerate, "zero cluster-robust variance");

  TestResult r;
  r.method = "bester";
  r.estimate = beta;
  r.c0 = c;
  r.statistic = (beta - c) / std::sqrt(v_corrected);
  r.p_value = student_t_two_sided_p(r.statistic, gd - 1.0);
  r.ref_size = g;
  r.metadata["df"] = gd - 1.0;
  r.metadata["critical_value"] = student_t_quantile(1.0 - alpha / 2.0, gd - 1.0);
  // Equivalent uncorrected form: statistic sqrt(G/(G-1)) larger, compared to
  // the scaled t_{G-1} critical value.
  r.metadata["statistic_uncorrected"] = r.statistic * std::sqrt(gd / (gd - 1.0));
  r.metadata["critical_value_scaled"] =
      std::sqrt(gd / (gd - 1.0)) * r.metadata["critical_value"];
  return r;
}

TestResult bester_aggregate(const CollapsedSample& sample, double c, std::size_t n_partitions,
                            std::uint64_t seed, double alpha) {
  if (n_partitions == 0) fail(errc::bad_argument, "need at least one partition");
  TestResult r;
  r.method = "bester-agg";
  r.c0 = c;
  r.seed = seed;
  std::size_t accept = 0;
  for (std::size_t s = 0; s < n_partitions; ++s) {
    const Partition part = partition_controls(sample, derive_seed(seed, s));
    const TestResult ts = bester_ttest(sample, part, c, alpha);
    const double cv = ts.metadata.at("critical_value");
    if (std::fabs(ts.statistic) <= cv) ++accept;
    r.component_pvalues.push_back(ts.p_value);
    if (s == 0) {
      r.statistic = ts.statistic;
      r.estimate = ts.estimate;
    }
  }
  r.p_value = static_cast<double>(accept) / static_cast<double>(n_partitions);
  r.ref_size = n_partitions;
  r.metadata["n_partitions"] = static_cast<double>(n_partitions);
  r.metadata["alpha"] = alpha;
  return r;
}

VarianceEstimate jackknife_variance(double est_full,
                                    const std::vector<double>& est_leave_one_cluster) {
  (void)est_full;  // centered at the leave-one-out mean
  const std::size_t g = est_leave_one_cluster.size();
  if (g < 2) fail(errc::insufficient_data, "jackknife needs at least 2 clusters");
  const double gd = static_cast<double>(g);
  const double mean = kahan_mean(est_leave_one_cluster);
  double ss = 0.0;
  for (double v : est_leave_one_cluster) ss += (v - mean) * (v - mean);
  return {ss * (gd - 1.0) / gd, VarianceKind::jackknife};
}

std::vector<double> leave_one_unit_out_effects(const CollapsedSample& sample) {
  const std::size_t n1 = sample.n_treated();
  const std::size_t n0 = sample.n_controls();
  if (n1 < 2 || n0 < 2)
    fail(errc::insufficient_data, "leave-one-unit-out needs at least 2 units per group");
  double sum1 = 0.0, sum0 = 0.0;
  for (std::size_t j = 0; j < sample.size(); ++j)
    (sample.treated[j] ? sum1 : sum0) += sample.w[j];
  std::vector<double> out(sample.size());
  for (std::size_t j = 0; j < sample.size(); ++j) {
    if (sample.treated[j])
      out[j] = (sum1 - sample.w[j]) / static_cast<double>(n1 - 1) -
               sum0 / static_cast<double>(n0);
    else
      out[j] = sum1 / static_cast<double>(n1) -
               (sum0 - sample.w[j]) / static_cast<double>(n0 - 1);
  }
  return out;
}

std::vector<double> leave_one_cluster_out_effects(const CollapsedSample& sample,
                                                  const Partition& part) {
  const std::size_t g = part.n_clusters();
  if (g < 2) fail(errc::insufficient_data, "leave-one-cluster-out needs at least 2 clusters");
  std::vector<double> out(g);
  for (std::size_t drop = 0; drop < g; ++drop) {
    double sum1 = 0.0, sum0 = 0.0;
    std::size_t n1 = 0, n0 = 0;
    for (std::size_t k = 0; k < g; ++k) {
      if (k == drop) continue;
      sum1 += sample.w[part.clusters[k].treated];
      ++n1;
      for (std::size_t j : part.clusters[k].controls) {
        sum0 += sample.w[j];
        ++n0;
      }
    }
    out[drop] = sum1 / static_cast<double>(n1) - sum0 / static_cast<double>(n0);
  }
  return out;
}

TestResult jackknife_ttest(const CollapsedSample& sample, const Partition& part, double c,
                           double alpha) {
  require_balanced(part);
  if (!(alpha > 0.0 && alpha < 1.0)) fail(errc::bad_argument, "alpha must be in (0,1)");
  const std::size_t g = part.n_clusters();
  const double gd = static_cast<double>(g);

  const auto tau = cluster_effects(sample, part);
  const double est = kahan_mean(tau);
  const auto loo = leave_one_cluster_out_effects(sample, part);
  const auto v = jackknife_variance(est, loo);
  if (!(v.value > 0.0)) fail(errc::degenerate, "zero jackknife variance");

  TestResult r;
  r.method = "jackknife";
  r.estimate = est;
  r.c0 = c;
  r.statistic = (est - c) / std::sqrt(v.value);
  const double scale = std::sqrt(gd / (gd - 1.0));
  r.p_value = student_t_two_sided_p(r.statistic / scale, gd - 1.0);
  r.ref_size = g;
  r.metadata["df"] = gd - 1.0;
  r.metadata["critical_value"] = scale * student_t_quantile(1.0 - alpha / 2.0, gd - 1.0);
  r.metadata["jackknife_variance"] = v.value;
  return r;
}

TestResult leung_resampled_t(const std::vector<double>& cluster_a,
                             const std::vector<double>& cluster_b, std::size_t r_a,
                             std::size_t r_b, std::uint64_t seed, double c) {
  if (r_a < 2 || r_a > cluster_a.size() || r_b < 2 || r_b > cluster_b.size())
    fail(errc::bad_argument, "resample sizes must satisfy 2 <= r_j <= N_j");

  Rng rng(splitmix64(seed));
  auto resample_moments = [&](const std::vector<double>& x, std::size_t r, double& mean,
                              double& var) {
    std::vector<double> draw(r);
    for (std::size_t i = 0; i < r; ++i)
      draw[i] = x[static_cast<std::size_t>(rng.below(x.size()))];
    mean = kahan_mean(draw);
    double ss = 0.0;
    for (double v : draw) ss += (v - mean) * (v - mean);
    var = ss / static_cast<double>(r - 1);
  };

  double mean_a, var_a, mean_b, var_b;
  resample_moments(cluster_a, r_a, mean_a, var_a);
  resample_moments(cluster_b, r_b, mean_b, var_b);
  const double denom =
      std::sqrt(var_a / static_cast<double>(r_a) + var_b / static_cast<double>(r_b));
  if (denom == 0.0) fail(errc::degenerate, "zero spread in both resamples");

  TestResult r;
  r.method = "leung";
  r.estimate = mean_a - mean_b;
  r.c0 = c;
  r.statistic = (mean_a - mean_b - c) / denom;
  r.p_value = 2.0 * normal_cdf(-std::fabs(r.statistic));
  r.seed = seed;
  r.metadata["r_a"] = static_cast<double>(r_a);
  r.metadata["r_b"] = static_cast<double>(r_b);
  return r;
}

std::size_t leung_default_r(std::size_t n) {
  return static_cast<std::size_t>(std::ceil(std::pow(static_cast<double>(n), 2.0 / 3.0)));
}

}  // namespace fewtreat
