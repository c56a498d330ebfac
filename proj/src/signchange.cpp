#include "fewtreat/signchange.hpp"

#include <algorithm>
#include <cmath>

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

// Driver for sign-flip randomization tests. `stat` maps a +/-1 vector to a
// statistic and is evaluated fresh per draw, so that the all-minus draw is
// the exact floating-point negation of the identity and ties count.
template <typename StatFn>
TestResult run_signflip_test(std::size_t m, const DrawOptions& opt, StatFn&& stat) {
  if (opt.budget < 2) fail(errc::bad_argument, "budget must be at least 2");
  if (m == 0) fail(errc::bad_argument, "no flip coordinates");

  std::vector<double> g(m, 1.0);
  const double obs = stat(g);

  const bool enumerate =
      !opt.force_sampling && m < 63 && (std::uint64_t{1} << m) <= opt.budget;
  std::size_t count = 0, total = 0;
  if (enumerate) {
    const std::uint64_t n_masks = std::uint64_t{1} << m;
    for (std::uint64_t mask = 0; mask < n_masks; ++mask) {
      for (std::size_t j = 0; j < m; ++j) g[j] = (mask >> j) & 1 ? -1.0 : 1.0;
      ++total;
      if (exceeds(stat(g), obs, opt.tail)) ++count;
    }
  } else {
    for (std::size_t d = 0; d < opt.budget; ++d) {
      for (std::size_t j = 0; j < m; ++j) g[j] = flip_sign(opt.seed, d, j);
      ++total;
      if (exceeds(stat(g), obs, opt.tail)) ++count;
    }
  }

  TestResult r;
  r.p_value = static_cast<double>(count) / static_cast<double>(total);
  r.statistic = obs;
  r.ref_size = total;
  r.enumerated = enumerate;
  r.seed = opt.seed;
  r.tail = opt.tail;
  return r;
}

}  // namespace

PerUnitEstimates per_unit_effects(const CollapsedSample& sample) {
  if (sample.n_treated() == 0) fail(errc::no_treated, "no treated units");
  if (sample.n_controls() == 0) fail(errc::no_controls, "no control units");
  const double m0 = sample.control_mean();
  PerUnitEstimates est;
  for (std::size_t j = 0; j < sample.size(); ++j)
    if (sample.treated[j]) est.tau.push_back(sample.w[j] - m0);
  return est;
}

Partition partition_controls(const std::vector<std::size_t>& treated_ids,
                             std::vector<std::size_t> control_ids, std::uint64_t seed) {
  const std::size_t n1 = treated_ids.size();
  if (n1 == 0) fail(errc::no_treated, "no treated units");
  const std::size_t per_cluster = control_ids.size() / n1;
  if (per_cluster == 0) fail(errc::insufficient_data, "fewer controls than treated units");

  std::sort(control_ids.begin(), control_ids.end());
  Rng rng(splitmix64(seed));
  rng.shuffle(control_ids);

  Partition part;
  part.seed = seed;
  part.clusters.resize(n1);
  for (std::size_t k = 0; k < n1; ++k) {
    part.clusters[k].treated = treated_ids[k];
    part.clusters[k].controls.assign(control_ids.begin() + k * per_cluster,
                                     control_ids.begin() + (k + 1) * per_cluster);
  }
  part.discarded.assign(control_ids.begin() + n1 * per_cluster, control_ids.end());
  std::sort(part.discarded.begin(), part.discarded.end());
  return part;
}

Partition partition_controls(const CollapsedSample& sample, std::uint64_t seed) {
  return partition_controls(sample.treated_units(), sample.control_units(), seed);
}

std::vector<double> cluster_effects(const CollapsedSample& sample, const Partition& part) {
  std::vector<double> tau(part.n_clusters());
  for (std::size_t k = 0; k < part.n_clusters(); ++k) {
    const auto& cl = part.clusters[k];
    if (cl.controls.empty()) fail(errc::insufficient_data, "cluster without controls");
    double sum = 0.0;
    for (std::size_t j : cl.controls) sum += sample.w[j];
    tau[k] = sample.w[cl.treated] - sum / static_cast<double>(cl.controls.size());
  }
  return tau;
}

namespace {

TestResult signflip_on_deviations(const std::vector<double>& dev, const DrawOptions& opt) {
  const double m = static_cast<double>(dev.size());
  auto stat = [&](const std::vector<double>& g) {
    double sum = 0.0;
    for (std::size_t j = 0; j < dev.size(); ++j) sum += g[j] * dev[j];
    return sum / m;
  };
  return run_signflip_test(dev.size(), opt, stat);
}

}  // namespace

TestResult signchange_test(const PerUnitEstimates& est, double c, const DrawOptions& opt) {
  if (est.size() == 0) fail(errc::insufficient_data, "no per-unit estimates");
  std::vector<double> dev(est.size());
  for (std::size_t j = 0; j < est.size(); ++j) dev[j] = est.tau[j] - c;
  TestResult r = signflip_on_deviations(dev, opt);
  r.method = "signchange";
  r.estimate = kahan_mean(est.tau);
  r.c0 = c;
  return r;
}

double min_feasible_alpha(std::size_t n1) {
  if (n1 == 0) fail(errc::bad_argument, "n1 must be positive");
  if (n1 >= 64) return 0.0;
  return std::ldexp(1.0, -static_cast<int>(n1 - 1));
}

TestResult signchange_partitioned(const CollapsedSample& sample, const Partition& part,
                                  double c, const DrawOptions& opt) {
  const auto tau = cluster_effects(sample, part);
  std::vector<double> dev(tau.size());
  for (std::size_t k = 0; k < tau.size(); ++k) dev[k] = tau[k] - c;
  TestResult r = signflip_on_deviations(dev, opt);
  r.method = "signchange-part";
  r.estimate = kahan_mean(tau);
  r.c0 = c;
  r.metadata["n_clusters"] = static_cast<double>(part.n_clusters());
  r.metadata["discarded_controls"] = static_cast<double>(part.discarded.size());
  return r;
}

TestResult wildboot_null(const CollapsedSample& sample, double c, const DrawOptions& opt) {
  if (sample.n_treated() == 0) fail(errc::no_treated, "no treated units");
  if (sample.n_controls() == 0) fail(errc::no_controls, "no control units");
  const std::size_t n = sample.size();
  const auto resid = null_residuals(sample, c);
  const double d1 = static_cast<double>(sample.n_treated());
  const double d0 = static_cast<double>(sample.n_controls());

  // Re-estimated coefficient on the artificial data c*D + m~ + g*e~, minus
  // c. The fitted intercept and the imposed null cancel exactly in the
  // treated-minus-control difference, leaving the group means of the flipped
  // residuals; computing it this way keeps the all-minus draw the exact
  // negation of the identity.
  std::vector<double> flipped(n);
  auto stat = [&](const std::vector<double>& g) {
    for (std::size_t j = 0; j < n; ++j) flipped[j] = g[j] * resid[j];
    double sum_t = 0.0, sum_c = 0.0;
    for (std::size_t j = 0; j < n; ++j) (sample.treated[j] ? sum_t : sum_c) += flipped[j];
    return sum_t / d1 - sum_c / d0;
  };

  TestResult r = run_signflip_test(n, opt, stat);
  r.method = "wild";
  r.estimate = estimate_effect(sample).tau_hat;
  r.c0 = c;
  return r;
}

TestResult wildboot_null_clustered(const CollapsedSample& sample, const Partition& part,
                                   double c, const DrawOptions& opt) {
  const std::size_t n_cl = part.n_clusters();
  if (n_cl == 0) fail(errc::bad_argument, "empty partition");

  // Null-imposed residuals with cluster fixed effects: demean w - c*D within
  // each cluster.
  std::vector<double> resid_treated(n_cl);
  std::vector<std::vector<double>> resid_controls(n_cl);
  for (std::size_t k = 0; k < n_cl; ++k) {
    const auto& cl = part.clusters[k];
    if (cl.controls.empty()) fail(errc::insufficient_data, "cluster without controls");
    double sum = sample.w[cl.treated] - c;
    for (std::size_t j : cl.controls) sum += sample.w[j];
    const double m_k = sum / static_cast<double>(1 + cl.controls.size());
    resid_treated[k] = (sample.w[cl.treated] - c) - m_k;
    resid_controls[k].reserve(cl.controls.size());
    for (std::size_t j : cl.controls) resid_controls[k].push_back(sample.w[j] - m_k);
  }

  // Re-estimated coefficient on the artificial data. The cluster fixed
  // effects and the imposed c*D are partialled out exactly, leaving the
  // average within-cluster treated-minus-control mean of flipped residuals.
  auto stat = [&](const std::vector<double>& g) {
    double sum = 0.0;
    for (std::size_t k = 0; k < n_cl; ++k) {
      double csum = 0.0;
      for (double e : resid_controls[k]) csum += g[k] * e;
      sum += g[k] * resid_treated[k] - csum / static_cast<double>(resid_controls[k].size());
    }
    return sum / static_cast<double>(n_cl);
  };

  TestResult r = run_signflip_test(n_cl, opt, stat);
  r.method = "wild-cluster";
  r.estimate = r.statistic + c;
  r.c0 = c;
  r.metadata["n_clusters"] = static_cast<double>(n_cl);
  return r;
}

TestResult aggregate_partitions(const CollapsedSample& sample, double c,
                                std::size_t n_partitions, std::uint64_t seed,
                                const DrawOptions& opt) {
  if (n_partitions == 0) fail(errc::bad_argument, "need at least one partition");
  TestResult r;
  r.method = "signchange-agg";
  r.c0 = c;
  r.seed = seed;
  r.component_pvalues.reserve(n_partitions);
  double sum_p = 0.0;
  for (std::size_t s = 0; s < n_partitions; ++s) {
    const Partition part = partition_controls(sample, derive_seed(seed, s));
    DrawOptions sub = opt;
    sub.seed = derive_seed(seed, 0x8000000000000000ULL + s);
    const TestResult ps = signchange_partitioned(sample, part, c, sub);
    r.component_pvalues.push_back(ps.p_value);
    sum_p += ps.p_value;
    if (s == 0) {
      r.statistic = ps.statistic;
      r.estimate = ps.estimate;
      r.ref_size = ps.ref_size;
      r.enumerated = ps.enumerated;
    }
  }
  r.p_value = sum_p / static_cast<double>(n_partitions);
  r.metadata["n_partitions"] = static_cast<double>(n_partitions);
  return r;
}

}  // namespace fewtreat
