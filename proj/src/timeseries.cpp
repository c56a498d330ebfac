#include "fewtreat/timeseries.hpp"

#include <algorithm>
#include <cmath>

#include "fewtreat/error.hpp"

namespace fewtreat {

ResidualSeries validate_residual_series(ResidualSeries series) {
  if (series.size() < 2) fail(errc::insufficient_data, "residual series needs T >= 2");
  if (series.n_post < 1 || series.n_post >= series.size())
    fail(errc::bad_argument, "n_post must satisfy 1 <= n_post < T");
  for (double v : series.values)
    if (!std::isfinite(v)) fail(errc::bad_argument, "non-finite residual");
  return series;
}

CounterfactualFn did_counterfactual() {
  return [](const Panel& panel, std::size_t unit) {
    std::vector<double> fitted(panel.n_periods);
    for (std::size_t t = 0; t < panel.n_periods; ++t)
      fitted[t] = impute_counterfactual_did(panel, unit, t);
    return fitted;
  };
}

CounterfactualFn fixed_counterfactual(std::vector<double> fitted) {
  return [fitted = std::move(fitted)](const Panel& panel, std::size_t) {
    if (fitted.size() != panel.n_periods)
      fail(errc::bad_argument, "fitted counterfactual length must equal the number of periods");
    return fitted;
  };
}

TestResult eos_pvalue(const ResidualSeries& resid_in) {
  const ResidualSeries resid = validate_residual_series(resid_in);
  const std::size_t t_total = resid.size();
  const std::size_t q = resid.n_post;
  TestResult r;
  r.method = "eos";
  r.enumerated = true;
  if (q == 1) {
    const double bench = resid.values.back();
    std::size_t count = 0;
    for (double v : resid.values)
      if (std::fabs(v) >= std::fabs(bench)) ++count;
    r.p_value = static_cast<double>(count) / static_cast<double>(t_total);
    r.statistic = bench;
    r.ref_size = t_total;
    return r;
  }
  // Multi-period post block: mean of the block against all rolling means of
  // the same length over the full series.
  const std::size_t n_windows = t_total - q + 1;
  double bench = 0.0;
  for (std::size_t t = t_total - q; t < t_total; ++t) bench += resid.values[t];
  bench /= static_cast<double>(q);
  std::size_t count = 0;
  double wsum = 0.0;
  for (std::size_t t = 0; t < q; ++t) wsum += resid.values[t];
  for (std::size_t start = 0;; ++start) {
    if (std::fabs(wsum / static_cast<double>(q)) >= std::fabs(bench)) ++count;
    if (start + q >= t_total) break;
    wsum += resid.values[start + q] - resid.values[start];
  }
  r.p_value = static_cast<double>(count) / static_cast<double>(n_windows);
  r.statistic = bench;
  r.ref_size = n_windows;
  r.metadata["rolling_extension"] = 1.0;
  return r;
}

TestResult conformal_test(const Panel& panel, double c, const CounterfactualFn& cf) {
  const auto treated = panel.treated_units();
  if (treated.size() != 1)
    fail(errc::bad_argument, "conformal test expects exactly one treated unit");
  if (panel.n_pre == 0) fail(errc::no_pre, "conformal test needs pre periods");
  const std::size_t unit = treated.front();

  Panel adjusted = panel;
  for (std::size_t t = adjusted.n_pre; t < adjusted.n_periods; ++t)
    adjusted.outcome(unit, t) -= c;

  const std::vector<double> fitted = cf(adjusted, unit);
  if (fitted.size() != panel.n_periods)
    fail(errc::bad_argument, "counterfactual returned wrong length");

  ResidualSeries resid;
  resid.values.resize(panel.n_periods);
  for (std::size_t t = 0; t < panel.n_periods; ++t)
    resid.values[t] = adjusted.outcome(unit, t) - fitted[t];
  resid.n_post = panel.n_post();

  TestResult r = eos_pvalue(resid);
  r.method = "conformal";
  r.c0 = c;
  return r;
}

PupResult pup_adjust(const std::vector<double>& resid_pre, double tau_hat, double eps_last_pre) {
  if (resid_pre.size() < 3) fail(errc::insufficient_data, "AR(1) fit needs at least 3 pre residuals");
  double num = 0.0, den = 0.0;
  for (std::size_t t = 1; t < resid_pre.size(); ++t) {
    num += resid_pre[t] * resid_pre[t - 1];
    den += resid_pre[t - 1] * resid_pre[t - 1];
  }
  if (den == 0.0) fail(errc::degenerate, "zero lagged sum of squares");
  PupResult out;
  out.rho_hat = num / den;
  out.tau_pup = tau_hat - out.rho_hat * eps_last_pre;
  return out;
}

IntervalResult prediction_interval(const std::vector<double>& resid_pre, double y_obs,
                                   double m_hat, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) fail(errc::bad_argument, "alpha must be in (0,1)");
  const std::size_t need = static_cast<std::size_t>(std::ceil(2.0 / alpha));
  if (resid_pre.size() < need)
    fail(errc::insufficient_data, "prediction interval needs at least ceil(2/alpha) pre residuals");
  std::vector<double> sorted(resid_pre);
  std::sort(sorted.begin(), sorted.end());
  auto quant = [&](double u) {
    std::size_t k = static_cast<std::size_t>(std::ceil(u * static_cast<double>(sorted.size())));
    if (k < 1) k = 1;
    if (k > sorted.size()) k = sorted.size();
    return sorted[k - 1];
  };
  IntervalResult out;
  out.method = "predint";
  out.lower = y_obs - m_hat - quant(1.0 - alpha / 2.0);
  out.upper = y_obs - m_hat - quant(alpha / 2.0);
  out.level = 1.0 - alpha;
  return out;
}

}  // namespace fewtreat
