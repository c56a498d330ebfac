#ifndef FEWTREAT_NORMAL_HPP
#define FEWTREAT_NORMAL_HPP

#include <cstdint>
#include <vector>

#include "fewtreat/panel.hpp"
#include "fewtreat/result.hpp"
#include "fewtreat/signchange.hpp"

namespace fewtreat {

// Independent per-cluster effect estimates.
struct ClusterEstimates {
  std::vector<double> values;
  std::size_t size() const { return values.size(); }
};

// One-sample t-test on independent cluster estimates against the null value
// c, referred to t_{G-1}. The reported critical value (metadata
// "critical_value") is the two-sided threshold at `alpha`. Warns when G < 3.
TestResult im_ttest(const ClusterEstimates& est, double alpha = 0.05, double c = 0.0);

// t-test of (tau_hat - c) / sqrt(V_homosk) against t_{N-2}; exact under
// normal homoskedastic errors.
TestResult donald_lang(const CollapsedSample& sample, double c);

// Cluster-robust t-test at the coarse-cluster level. The sandwich variance
// is computed explicitly over cluster scores of the intercept-plus-dummy
// regression restricted to partitioned units, scaled by G/(G-1); under the
// required balance (equal cluster sizes, one treated unit each) the
// statistic and its t_{G-1} critical value coincide with im_ttest on the
// within-cluster estimates. Unbalanced clusters are a hard error.
TestResult bester_ttest(const CollapsedSample& sample, const Partition& part, double c,
                        double alpha = 0.05);

// Aggregated decision over S random partitions: the returned p-analog is the
// fraction of partitions whose |t| does not exceed its critical value;
// reject when it is at most alpha.
TestResult bester_aggregate(const CollapsedSample& sample, double c, std::size_t n_partitions,
                            std::uint64_t seed, double alpha = 0.05);

// Jackknife variance from leave-one-cluster-out estimates:
//   V = ((G-1)/G) sum_g (beta_{(-g)} - mean(beta_{(-.)}))^2.
VarianceEstimate jackknife_variance(double est_full,
                                    const std::vector<double>& est_leave_one_cluster);

// Leave-one-unit-out effect estimates (every unit is its own cluster).
// Requires at least two units in each group.
std::vector<double> leave_one_unit_out_effects(const CollapsedSample& sample);

// Leave-one-coarse-cluster-out effect estimates over a partition.
std::vector<double> leave_one_cluster_out_effects(const CollapsedSample& sample,
                                                  const Partition& part);

// t-test with the jackknife variance over coarse clusters and the scaled
// t_{G-1} reference: reject when |t| > sqrt(G/(G-1)) * t_{G-1}(1 - alpha/2).
TestResult jackknife_ttest(const CollapsedSample& sample, const Partition& part, double c,
                           double alpha = 0.05);

// Two-sample t statistic on r_a (r_b) draws with replacement from each
// cluster, standard normal reference. Valid under within-cluster CLTs while
// agnostic about the dependence structure.
TestResult leung_resampled_t(const std::vector<double>& cluster_a,
                             const std::vector<double>& cluster_b, std::size_t r_a,
                             std::size_t r_b, std::uint64_t seed, double c = 0.0);

// Heuristic resample size ceil(n^{2/3}).
std::size_t leung_default_r(std::size_t n);

}  // namespace fewtreat

#endif  // FEWTREAT_NORMAL_HPP
