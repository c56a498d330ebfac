#ifndef FEWTREAT_PANEL_HPP
#define FEWTREAT_PANEL_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace fewtreat {

// Compensated (Kahan) mean; keeps enumeration oracles stable at 1e-12 scale.
double kahan_sum(std::span<const double> values);
double kahan_mean(std::span<const double> values);

// Balanced N x T outcome panel with a block treatment pattern: the units in
// `treated` are treated in every period from `n_pre` on. Covariates and unit
// sizes are optional and unit-level.
struct Panel {
  std::vector<double> outcomes;  // row-major, n_units x n_periods
  std::vector<std::uint8_t> treated;
  std::size_t n_units = 0;
  std::size_t n_periods = 0;
  std::size_t n_pre = 0;  // post periods are [n_pre, n_periods)
  std::vector<double> covariates;  // row-major, n_units x n_covariates
  std::size_t n_covariates = 0;
  std::vector<double> unit_sizes;  // empty, or one positive value per unit
  std::vector<std::string> unit_names;    // optional, from CSV ingestion
  std::vector<std::string> period_names;  // optional, from CSV ingestion

  double outcome(std::size_t unit, std::size_t period) const {
    return outcomes[unit * n_periods + period];
  }
  double& outcome(std::size_t unit, std::size_t period) {
    return outcomes[unit * n_periods + period];
  }
  bool is_post(std::size_t period) const { return period >= n_pre; }
  std::size_t n_post() const { return n_periods - n_pre; }
  std::size_t n_treated() const;
  std::size_t n_controls() const { return n_units - n_treated(); }
  std::vector<std::size_t> treated_units() const;
  std::vector<std::size_t> control_units() const;
};

// Per-unit reduction of a panel: post-mean minus pre-mean (or the raw
// single-period outcome in cross-section mode). Most tests run on this.
struct CollapsedSample {
  std::vector<double> w;
  std::vector<std::uint8_t> treated;
  std::vector<double> covariates;  // row-major, size() == w.size() * n_covariates
  std::size_t n_covariates = 0;
  std::vector<double> unit_sizes;

  std::size_t size() const { return w.size(); }
  std::size_t n_treated() const;
  std::size_t n_controls() const { return size() - n_treated(); }
  std::vector<std::size_t> treated_units() const;
  std::vector<std::size_t> control_units() const;
  double treated_mean() const;
  double control_mean() const;
};

struct EffectEstimate {
  double tau_hat = 0.0;
  std::string method;
  std::size_t n_treated = 0;
  std::size_t n_control = 0;
};

enum class VarianceKind { heteroskedastic, homoskedastic, jackknife, cluster };

struct VarianceEstimate {
  double value = 0.0;
  VarianceKind kind = VarianceKind::heteroskedastic;
};

// Checks all Panel invariants (N >= 2, nonempty treated and control groups,
// nonempty post block, balance, positive unit sizes) and returns the panel.
// Throws Error with a named code on the first violation.
Panel validate_panel(Panel panel);

// w_j = post mean - pre mean, per unit. Requires n_pre >= 1 (NO_PRE otherwise).
CollapsedSample collapse_prepost(const Panel& panel);

// collapse_prepost when pre periods exist; otherwise the cross-section
// reduction (per-unit mean of the post block, the raw outcome when T == 1).
CollapsedSample to_collapsed(const Panel& panel);

// Difference between treated and control means of w.
EffectEstimate estimate_effect(const CollapsedSample& sample);

// sigma1^2/N1 + sigma0^2/N0 with sigma_a^2 the within-group mean of squared
// demeaned w (1/N_a normalization; the treated term is exactly 0 when N1 = 1).
VarianceEstimate var_heteroskedastic(const CollapsedSample& sample);

// Pooled sigma^2 (mean over all units of squared within-group-demeaned w)
// times (1/N1 + 1/N0).
VarianceEstimate var_homoskedastic(const CollapsedSample& sample);

// Residuals of w - c*D after removing the grand mean of w - c*D. They sum to
// zero and, at c = tau_hat, coincide with the unrestricted residuals.
std::vector<double> null_residuals(const CollapsedSample& sample, double c);

// Leave-one-period-out DiD imputation of the untreated outcome for a treated
// unit at period t:
//   M_hat = avg_{t' != t} Y_{u,t'} + avg_{j in controls} (Y_{j,t} - avg_{t' != t} Y_{j,t'}).
double impute_counterfactual_did(const Panel& panel, std::size_t unit, std::size_t period);

}  // namespace fewtreat

#endif  // FEWTREAT_PANEL_HPP
