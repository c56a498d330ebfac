#ifndef FEWTREAT_MCLAB_HPP
#define FEWTREAT_MCLAB_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "fewtreat/panel.hpp"

namespace fewtreat {

// One Monte Carlo configuration: panel dimensions, AR(1) persistence of the
// untreated outcome errors, a constant treatment effect in units of sd(Y(0)),
// the methods to evaluate and the replication count. All randomness flows
// from `seed`; replication r uses derive_seed(seed, r), so results are
// identical for any worker count.
struct Scenario {
  std::size_t n0 = 30;
  std::size_t n1 = 2;
  std::size_t t0 = 5;
  std::size_t t1 = 5;
  double rho = 0.5;
  double effect_c = 0.0;
  double alpha = 0.05;
  std::vector<std::string> methods;
  std::size_t reps = 1000;
  std::uint64_t seed = 0;
  std::size_t budget = 10000;
  std::size_t n_partitions = 100;
  std::size_t n_threads = 0;  // 0: hardware concurrency
};

Scenario validate_scenario(Scenario scen);

// Method identifiers the simulation engine can run.
const std::vector<std::string>& known_methods();
bool method_known(const std::string& name);

// Balanced panel with units 0..n1-1 treated: per unit, a stationary Gaussian
// AR(1) error path with unit marginal variance (initial draw from the
// stationary law), plus effect_c added to treated post cells. Unit and time
// effects are zero.
Panel gen_ar1_panel(const Scenario& scen, std::uint64_t rep_seed);

// 100 + n1 iid standard normals, the first n1 flagged treated.
CollapsedSample gen_table1_sample(std::size_t n1, std::uint64_t rep_seed);

struct MCResult {
  struct Row {
    std::string method;
    double rejection_rate = 0.0;
    double mc_se = 0.0;
    std::size_t reps = 0;
    std::size_t errors = 0;
    bool failed = false;  // method errored on more than 1% of replications
  };
  std::vector<Row> rows;
  Scenario scenario;
  double wall_seconds = 0.0;
};

// Rejection rates of the scenario's methods at the sharp null c = 0 and
// level alpha, over `reps` independent panels. Replications run in parallel;
// per-replication outcomes are reduced in index order, so the result is
// bitwise identical regardless of the number of workers.
MCResult run_rejection_study(const Scenario& scen);

struct Table1Row {
  std::size_t n1 = 0;
  double rejection = 0.0;
  double mc_se = 0.0;
  double ratio_of_expectations = 0.0;  // MC variance of tau over mean variance estimate
  double mean_of_ratios = 0.0;         // MC variance of tau times mean of 1/V-hat
};

// Rejection rates of the robust t-test against +/-1.96 with N0 = 100 normal
// outcomes, for N1 = 1..5, plus both variance-ratio diagnostics.
std::vector<Table1Row> reproduce_table1(std::size_t reps, std::uint64_t seed,
                                        std::size_t n_threads = 0);

// Closed-form Gaussian approximation of the N1 = 1 rejection rate,
// 2*Phi(-1.96*sqrt(E[sigma0^2]/N0)/sqrt(1 + 1/N0)) with E[sigma0^2] = (N0-1)/N0.
double table1_analytic_rejection_n1_1();

struct Figure1Row {
  std::string method;
  std::size_t n1 = 0;
  double effect = 0.0;
  double rejection_rate = 0.0;
  double mc_se = 0.0;
  std::size_t reps = 0;
  std::uint64_t seed = 0;
  std::size_t errors = 0;
};

struct Figure1Options {
  std::size_t reps = 5000;
  std::uint64_t seed = 0;
  std::size_t budget = 10000;
  std::size_t n_partitions = 100;
  std::size_t n_threads = 0;
  std::vector<std::size_t> n1_grid = {2, 5, 6, 10};
  std::vector<double> effect_grid = {0.0, 0.25, 0.5, 0.75, 1.0};
  std::vector<std::string> methods = {"im", "ct-exact", "signchange-agg", "jackknife"};
};

// Power curves on the AR(1) DGP (N0 = 30, T0 = T1 = 5, rho = 0.5) over the
// N1 x effect grid.
std::vector<Figure1Row> reproduce_figure1(const Figure1Options& opt);

}  // namespace fewtreat

#endif  // FEWTREAT_MCLAB_HPP
