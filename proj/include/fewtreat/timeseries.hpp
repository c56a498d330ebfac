#ifndef FEWTREAT_TIMESERIES_HPP
#define FEWTREAT_TIMESERIES_HPP

#include <functional>
#include <vector>

#include "fewtreat/panel.hpp"
#include "fewtreat/result.hpp"

namespace fewtreat {

// Residual path of the treated unit; the last `n_post` entries are the
// post-treatment block.
struct ResidualSeries {
  std::vector<double> values;
  std::size_t n_post = 1;

  std::size_t size() const { return values.size(); }
  std::size_t n_pre() const { return values.size() - n_post; }
};

ResidualSeries validate_residual_series(ResidualSeries series);

// Single-unit mean predictor: fitted values M_hat_{1,t} for all T periods of
// a (null-imputed) panel. Deterministic in its inputs.
using CounterfactualFn = std::function<std::vector<double>(const Panel&, std::size_t unit)>;

// Default predictor: the leave-one-period-out DiD imputation from panel-core.
CounterfactualFn did_counterfactual();

// Wraps an externally fitted series (e.g. a synthetic-control fit) as a
// CounterfactualFn. The series must have one value per period.
CounterfactualFn fixed_counterfactual(std::vector<double> fitted);

// End-of-sample rank test. With one post period,
//   p = (1/T) sum_t 1{ |e_t| >= |e_T| }.
// With n_post > 1 the statistic is the mean of the post block compared with
// all length-n_post rolling means of the series (an extension flagged in
// metadata as "rolling_extension").
TestResult eos_pvalue(const ResidualSeries& resid);

// Conformal test of the sharp null tau = c for a panel with one treated
// unit: impute Y - c*D, fit the counterfactual on all T periods, and rank
// the post-block residual in the full residual path. Exact in finite samples
// under time-exchangeable errors.
TestResult conformal_test(const Panel& panel, double c, const CounterfactualFn& cf = did_counterfactual());

struct PupResult {
  double tau_pup = 0.0;
  double rho_hat = 0.0;
};

// AR(1) correction of the effect estimate:
//   tau_pup = tau_hat - rho_hat * e_{T0},
// with rho_hat the no-intercept least-squares slope of e_t on e_{t-1} over
// the pre-treatment residuals.
PupResult pup_adjust(const std::vector<double>& resid_pre, double tau_hat, double eps_last_pre);

// Prediction interval for the effect at the post period from order-statistic
// quantiles of the pre-treatment residuals:
//   [y - m - Q(1 - alpha/2), y - m - Q(alpha/2)].
// Requires at least ceil(2/alpha) pre residuals.
IntervalResult prediction_interval(const std::vector<double>& resid_pre, double y_obs,
                                   double m_hat, double alpha);

}  // namespace fewtreat

#endif  // FEWTREAT_TIMESERIES_HPP
