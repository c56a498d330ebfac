#include "fewtreat/panel.hpp"

#include <cmath>

#include "fewtreat/error.hpp"

namespace fewtreat {

double kahan_sum(std::span<const double> values) {
  double sum = 0.0, comp = 0.0;
  for (double v : values) {
    const double y = v - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  return sum;
}

double kahan_mean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  return kahan_sum(values) / static_cast<double>(values.size());
}

namespace {

std::size_t count_treated(const std::vector<std::uint8_t>& flags) {
  std::size_t n = 0;
  for (auto f : flags) n += (f != 0);
  return n;
}

std::vector<std::size_t> indices_where(const std::vector<std::uint8_t>& flags, bool value) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < flags.size(); ++i)
    if ((flags[i] != 0) == value) out.push_back(i);
  return out;
}

double group_mean(const CollapsedSample& s, bool treated_group) {
  double sum = 0.0, comp = 0.0;
  std::size_t n = 0;
  for (std::size_t j = 0; j < s.size(); ++j) {
    if ((s.treated[j] != 0) != treated_group) continue;
    const double y = s.w[j] - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
    ++n;
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

}  // namespace

std::size_t Panel::n_treated() const { return count_treated(treated); }
std::vector<std::size_t> Panel::treated_units() const { return indices_where(treated, true); }
std::vector<std::size_t> Panel::control_units() const { return indices_where(treated, false); }

std::size_t CollapsedSample::n_treated() const { return count_treated(treated); }
std::vector<std::size_t> CollapsedSample::treated_units() const {
  return indices_where(treated, true);
}
std::vector<std::size_t> CollapsedSample::control_units() const {
  return indices_where(treated, false);
}
double CollapsedSample::treated_mean() const { return group_mean(*this, true); }
double CollapsedSample::control_mean() const { return group_mean(*this, false); }

Panel validate_panel(Panel panel) {
  const std::size_t n = panel.n_units;
  const std::size_t t = panel.n_periods;
  if (n < 2) fail(errc::insufficient_data, "panel needs at least 2 units");
  if (t < 1) fail(errc::insufficient_data, "panel needs at least 1 period");
  if (panel.outcomes.size() != n * t)
    fail(errc::unbalanced, "outcome matrix is not n_units x n_periods");
  for (double v : panel.outcomes)
    if (!std::isfinite(v)) fail(errc::unbalanced, "panel has missing or non-finite outcomes");
  if (panel.treated.size() != n) fail(errc::bad_argument, "treated flags must have one entry per unit");
  const std::size_t n1 = panel.n_treated();
  if (n1 == 0) fail(errc::no_treated, "no treated units");
  if (n1 == n) fail(errc::no_controls, "all units treated");
  if (panel.n_pre >= t) fail(errc::non_suffix_post, "post period block is empty");
  if (panel.n_covariates > 0 && panel.covariates.size() != n * panel.n_covariates)
    fail(errc::bad_argument, "covariate matrix is not n_units x n_covariates");
  if (!panel.unit_sizes.empty()) {
    if (panel.unit_sizes.size() != n) fail(errc::bad_argument, "unit_sizes must have one entry per unit");
    for (double x : panel.unit_sizes)
      if (!(x > 0.0)) fail(errc::bad_argument, "unit_sizes must be strictly positive");
  }
  return panel;
}

CollapsedSample collapse_prepost(const Panel& panel) {
  if (panel.n_pre == 0) fail(errc::no_pre, "no pre periods; use cross-section mode");
  CollapsedSample out;
  out.w.resize(panel.n_units);
  out.treated = panel.treated;
  out.covariates = panel.covariates;
  out.n_covariates = panel.n_covariates;
  out.unit_sizes = panel.unit_sizes;
  for (std::size_t j = 0; j < panel.n_units; ++j) {
    const double* row = panel.outcomes.data() + j * panel.n_periods;
    const double pre = kahan_mean({row, panel.n_pre});
    const double post = kahan_mean({row + panel.n_pre, panel.n_periods - panel.n_pre});
    out.w[j] = post - pre;
  }
  return out;
}

CollapsedSample to_collapsed(const Panel& panel) {
  if (panel.n_pre >= 1) return collapse_prepost(panel);
  CollapsedSample out;
  out.w.resize(panel.n_units);
  out.treated = panel.treated;
  out.covariates = panel.covariates;
  out.n_covariates = panel.n_covariates;
  out.unit_sizes = panel.unit_sizes;
  for (std::size_t j = 0; j < panel.n_units; ++j) {
    const double* row = panel.outcomes.data() + j * panel.n_periods;
    out.w[j] = kahan_mean({row, panel.n_periods});
  }
  return out;
}

EffectEstimate estimate_effect(const CollapsedSample& sample) {
  EffectEstimate est;
  est.method = "diff-in-means";
  est.n_treated = sample.n_treated();
  est.n_control = sample.n_controls();
  if (est.n_treated == 0 || est.n_control == 0)
    fail(errc::insufficient_data, "need at least one treated and one control unit");
  est.tau_hat = sample.treated_mean() - sample.control_mean();
  return est;
}

namespace {

// Within-group sums of squared demeaned w.
void group_ss(const CollapsedSample& s, double& ss1, double& ss0, std::size_t& n1, std::size_t& n0) {
  const double m1 = s.treated_mean();
  const double m0 = s.control_mean();
  ss1 = ss0 = 0.0;
  n1 = n0 = 0;
  for (std::size_t j = 0; j < s.size(); ++j) {
    if (s.treated[j]) {
      const double d = s.w[j] - m1;
      ss1 += d * d;
      ++n1;
    } else {
      const double d = s.w[j] - m0;
      ss0 += d * d;
      ++n0;
    }
  }
}

}  // namespace

VarianceEstimate var_heteroskedastic(const CollapsedSample& sample) {
  double ss1, ss0;
  std::size_t n1, n0;
  group_ss(sample, ss1, ss0, n1, n0);
  if (n1 == 0 || n0 == 0) fail(errc::insufficient_data, "both groups must be nonempty");
  const double s1 = ss1 / static_cast<double>(n1);
  const double s0 = ss0 / static_cast<double>(n0);
  return {s1 / static_cast<double>(n1) + s0 / static_cast<double>(n0),
          VarianceKind::heteroskedastic};
}

VarianceEstimate var_homoskedastic(const CollapsedSample& sample) {
  double ss1, ss0;
  std::size_t n1, n0;
  group_ss(sample, ss1, ss0, n1, n0);
  if (n1 == 0 || n0 == 0) fail(errc::insufficient_data, "both groups must be nonempty");
  const double pooled = (ss1 + ss0) / static_cast<double>(n1 + n0);
  return {pooled / static_cast<double>(n1) + pooled / static_cast<double>(n0),
          VarianceKind::homoskedastic};
}

std::vector<double> null_residuals(const CollapsedSample& sample, double c) {
  std::vector<double> v(sample.size());
  for (std::size_t j = 0; j < sample.size(); ++j)
    v[j] = sample.w[j] - (sample.treated[j] ? c : 0.0);
  const double m = kahan_mean(v);
  for (double& x : v) x -= m;
  return v;
}

double impute_counterfactual_did(const Panel& panel, std::size_t unit, std::size_t period) {
  if (panel.n_periods < 2) fail(errc::insufficient_data, "imputation needs T >= 2");
  if (unit >= panel.n_units || !panel.treated[unit])
    fail(errc::bad_argument, "imputation target must be a treated unit");
  if (period >= panel.n_periods) fail(errc::bad_argument, "period out of range");
  const auto controls = panel.control_units();
  if (controls.empty()) fail(errc::no_controls, "no control units");
  const double tm1 = static_cast<double>(panel.n_periods - 1);

  auto loo_time_avg = [&](std::size_t j) {
    double sum = 0.0, comp = 0.0;
    for (std::size_t t = 0; t < panel.n_periods; ++t) {
      if (t == period) continue;
      const double y = panel.outcome(j, t) - comp;
      const double s = sum + y;
      comp = (s - sum) - y;
      sum = s;
    }
    return sum / tm1;
  };

  double ctrl_term = 0.0;
  for (std::size_t j : controls) ctrl_term += panel.outcome(j, period) - loo_time_avg(j);
  ctrl_term /= static_cast<double>(controls.size());
  return loo_time_avg(unit) + ctrl_term;
}

}  // namespace fewtreat
