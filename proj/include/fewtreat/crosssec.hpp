#ifndef FEWTREAT_CROSSSEC_HPP
#define FEWTREAT_CROSSSEC_HPP

#include <cstdint>
#include <vector>

#include "fewtreat/panel.hpp"
#include "fewtreat/result.hpp"

namespace fewtreat {

// Reference-set budget for randomization tests: the full transformation set
// is enumerated when its size is at most `budget`; otherwise the reference
// is the identity plus (budget - 1) iid uniform draws. `force_sampling`
// skips enumeration even when it would fit, so that two tests can be
// compared on one shared draw stream.
struct DrawOptions {
  std::size_t budget = 10000;  // 9,999 draws + identity by default
  std::uint64_t seed = 0;
  Tail tail = Tail::both;
  bool force_sampling = false;
};

// Demeaned control w (residuals of the controls), in control order.
std::vector<double> control_residuals(const CollapsedSample& sample);

// Asymptotic p-value from the cross-section of control residuals:
//   p = (1/N0) sum_j 1{ |W_j| >= |tau_hat - c| }.
TestResult ct_pvalue(const CollapsedSample& sample, double c, Tail tail = Tail::both);

// Interval from order-statistic quantiles of the control residuals:
//   [tau_hat - Q(1 - gamma/2), tau_hat - Q(gamma/2)], Q(u) the ceil(u*N0)-th
// smallest residual. `gamma` is the miscoverage, so level = 1 - gamma.
IntervalResult ct_confint(const CollapsedSample& sample, double gamma);

// Exact permutation version: null-imposed residuals are recombined over
// treatment assignments, and the observed effect is ranked in that
// reference. With full enumeration the test is finite-sample exact under
// iid collapsed errors; with N1 = 1 the p-value is at least 1/(N0+1).
TestResult ct_exact_permutation(const CollapsedSample& sample, double c,
                                const DrawOptions& opt = {});

// Covariate-adjusted permutation test: for each assignment, regress
// w - c*D on an intercept, the permuted treatment and the unit covariates,
// and rank the observed coefficient among the permuted ones. Assignments
// with rank-deficient designs are skipped and counted in metadata
// ("singular_skipped"). Falls back to ct_exact_permutation when the sample
// carries no covariates.
TestResult ct_exact_permutation_cov(const CollapsedSample& sample, double c,
                                    const DrawOptions& opt = {});

// Studentized permutation test. The statistic divides the effect by the
// unequal-variance standard error with 1/(N_a (N_a - 1)) normalization; the
// reference recomputes it from null-imposed residuals under each assignment
// (group-demeaned within the permuted groups, so the identity reproduces the
// observed statistic exactly). Requires N1 >= 2 and N0 >= 2.
TestResult permutation_tstat(const CollapsedSample& sample, double c,
                             const DrawOptions& opt = {});

struct FpRescaleResult {
  CollapsedSample rescaled;
  double a_hat = 0.0;  // intercept of the W^2 ~ 1 + 1/X fit on controls
  double b_hat = 0.0;  // slope on 1/X
  std::vector<double> fitted_variance;  // per unit, after clamping
  bool clamped = false;  // any fitted variance hit the floor
};

// Heteroskedasticity correction when unit sizes X_j are observed: fits
// V(W_j) = A + B / X_j on the squared control residuals and rescales each
// unit's within-group residual by sqrt(V_treated / V_j), where V_treated is
// the fitted variance at the treated units' mean 1/X. Group means (and hence
// tau_hat) are unchanged; the result feeds ct_pvalue / ct_exact_permutation.
FpRescaleResult fp_rescale(const CollapsedSample& sample);

// Design-based randomization test of the sharp null Y(1) = Y(0) + c: the
// difference in means of the null-imputed outcomes Y - c*D is recomputed
// under assignments with the observed number of treated units.
TestResult design_randomization_test(const std::vector<double>& outcomes,
                                     const std::vector<std::uint8_t>& treated, double c,
                                     const DrawOptions& opt = {});

// Same test restricted to assignments that reproduce the observed imbalance
// in a binary unit attribute (equal counts of the attribute among treated).
// A singleton restricted set yields p = 1 with a SINGLETON warning.
TestResult conditional_randomization_test(const std::vector<double>& outcomes,
                                          const std::vector<std::uint8_t>& treated,
                                          const std::vector<std::uint8_t>& balance, double c,
                                          const DrawOptions& opt = {});

}  // namespace fewtreat

#endif  // FEWTREAT_CROSSSEC_HPP
