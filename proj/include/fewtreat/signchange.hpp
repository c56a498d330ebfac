#ifndef FEWTREAT_SIGNCHANGE_HPP
#define FEWTREAT_SIGNCHANGE_HPP

#include <cstdint>
#include <vector>

#include "fewtreat/crosssec.hpp"
#include "fewtreat/panel.hpp"
#include "fewtreat/result.hpp"

namespace fewtreat {

// Per-treated-unit effect estimates tau_j (treated w minus the control mean).
struct PerUnitEstimates {
  std::vector<double> tau;
  std::size_t size() const { return tau.size(); }
};

PerUnitEstimates per_unit_effects(const CollapsedSample& sample);

// Disjoint coarse clusters, one treated unit plus an equal number of
// controls each. Controls that do not fit the equal-size requirement are
// discarded and reported.
struct Partition {
  struct Cluster {
    std::size_t treated;
    std::vector<std::size_t> controls;
  };
  std::vector<Cluster> clusters;
  std::vector<std::size_t> discarded;
  std::uint64_t seed = 0;

  std::size_t n_clusters() const { return clusters.size(); }
};

// Uniform random equal-size partition of the controls across the treated
// units. Requires at least one control per treated unit.
Partition partition_controls(const std::vector<std::size_t>& treated_ids,
                             std::vector<std::size_t> control_ids, std::uint64_t seed);
Partition partition_controls(const CollapsedSample& sample, std::uint64_t seed);

// Within-cluster treated-minus-controls differences tau~_k.
std::vector<double> cluster_effects(const CollapsedSample& sample, const Partition& part);

// Randomization test over sign flips of the centered per-unit estimates:
//   p = (1/|G|) sum_g 1{ |tau_hat - c| <= |(1/N1) sum_j g_j (tau_j - c)| },
// G = {-1,+1}^{N1}, fully enumerated when 2^{N1} <= budget, otherwise the
// identity plus sampled flips. Flip draws are indexed by position so they can
// be shared with the wild bootstrap.
TestResult signchange_test(const PerUnitEstimates& est, double c, const DrawOptions& opt = {});

// Smallest attainable two-sided sign-change p-value for generic data:
// 1 / 2^{n1-1}. Rejection at the 5% level is impossible for n1 <= 5.
double min_feasible_alpha(std::size_t n1);

// Sign-change test on within-cluster effect estimates; finite-N0 valid under
// cluster-level symmetry.
TestResult signchange_partitioned(const CollapsedSample& sample, const Partition& part,
                                  double c, const DrawOptions& opt = {});

// Wild bootstrap with the null imposed, flips at the unit level: null
// residuals of w - c*D are sign-flipped into artificial outcomes and the
// intercept-plus-dummy regression is re-estimated on each artificial
// dataset. Two-sided p compares |tau_hat - c| to |beta^g - c| over
// g in {-1,+1}^N.
TestResult wildboot_null(const CollapsedSample& sample, double c, const DrawOptions& opt = {});

// Wild bootstrap with the null imposed and cluster fixed effects, flips at
// the cluster level. Null residuals are computed within clusters; the
// re-estimated coefficient on the artificial data is the average of
// within-cluster treated-minus-control means of the flipped residuals (the
// fixed effects and the imposed null cancel exactly in the partialled
// regression). On balanced partitions this reproduces signchange_partitioned
// draw for draw.
TestResult wildboot_null_clustered(const CollapsedSample& sample, const Partition& part,
                                   double c, const DrawOptions& opt = {});

// Average of signchange_partitioned p-values over `n_partitions` uniformly
// drawn partitions; reject when the average is at most alpha. Per-partition
// p-values are kept in component_pvalues.
TestResult aggregate_partitions(const CollapsedSample& sample, double c,
                                std::size_t n_partitions, std::uint64_t seed,
                                const DrawOptions& opt = {});

}  // namespace fewtreat

#endif  // FEWTREAT_SIGNCHANGE_HPP
