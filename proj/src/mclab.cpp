#include "fewtreat/mclab.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <thread>

#include "fewtreat/crosssec.hpp"
#include "fewtreat/error.hpp"
#include "fewtreat/normal.hpp"
#include "fewtreat/rng.hpp"
#include "fewtreat/signchange.hpp"
#include "fewtreat/special.hpp"
#include "fewtreat/timeseries.hpp"

namespace fewtreat {

namespace {

void parallel_for(std::size_t n_items, std::size_t n_threads,
                  const std::function<void(std::size_t)>& body) {
  if (n_threads == 0) n_threads = std::max(1u, std::thread::hardware_concurrency());
  n_threads = std::min(n_threads, n_items == 0 ? std::size_t{1} : n_items);
  if (n_threads <= 1) {
    for (std::size_t i = 0; i < n_items; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n_items) return;
      body(i);
    }
  };
  std::vector<std::thread> threads;
  threads.reserve(n_threads);
  for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
}

// Per-method substream indices, fixed so that adding methods to a scenario
// does not perturb the draws of the others.
enum MethodStream : std::uint64_t {
  stream_ct_exact = 11,
  stream_perm_t = 12,
  stream_im = 13,
  stream_bester = 14,
  stream_bester_agg = 15,
  stream_signchange = 16,
  stream_signchange_agg = 17,
  stream_jackknife = 18,
  stream_wild = 19,
};

bool run_method(const std::string& name, const Panel& panel, const CollapsedSample& sample,
                const Scenario& scen, std::uint64_t rep_seed) {
  const double c = 0.0;
  if (name == "ct") return ct_pvalue(sample, c).p_value <= scen.alpha;
  if (name == "ct-exact") {
    DrawOptions opt{scen.budget, derive_seed(rep_seed, stream_ct_exact), Tail::both};
    return ct_exact_permutation(sample, c, opt).p_value <= scen.alpha;
  }
  if (name == "perm-t") {
    DrawOptions opt{scen.budget, derive_seed(rep_seed, stream_perm_t), Tail::both};
    return permutation_tstat(sample, c, opt).p_value <= scen.alpha;
  }
  if (name == "dl") return donald_lang(sample, c).p_value <= scen.alpha;
  if (name == "im") {
    const Partition part = partition_controls(sample, derive_seed(rep_seed, stream_im));
    ClusterEstimates est{cluster_effects(sample, part)};
    return im_ttest(est, scen.alpha, c).p_value <= scen.alpha;
  }
  if (name == "bester") {
    const Partition part = partition_controls(sample, derive_seed(rep_seed, stream_bester));
    return bester_ttest(sample, part, c, scen.alpha).p_value <= scen.alpha;
  }
  if (name == "bester-agg") {
    return bester_aggregate(sample, c, scen.n_partitions,
                            derive_seed(rep_seed, stream_bester_agg), scen.alpha)
               .p_value <= scen.alpha;
  }
  if (name == "signchange") {
    DrawOptions opt{scen.budget, derive_seed(rep_seed, stream_signchange), Tail::both};
    return signchange_test(per_unit_effects(sample), c, opt).p_value <= scen.alpha;
  }
  if (name == "signchange-agg") {
    DrawOptions opt{scen.budget, 0, Tail::both};
    return aggregate_partitions(sample, c, scen.n_partitions,
                                derive_seed(rep_seed, stream_signchange_agg), opt)
               .p_value <= scen.alpha;
  }
  if (name == "jackknife") {
    const Partition part = partition_controls(sample, derive_seed(rep_seed, stream_jackknife));
    return jackknife_ttest(sample, part, c, scen.alpha).p_value <= scen.alpha;
  }
  if (name == "wild") {
    DrawOptions opt{scen.budget, derive_seed(rep_seed, stream_wild), Tail::both};
    return wildboot_null(sample, c, opt).p_value <= scen.alpha;
  }
  if (name == "conformal") return conformal_test(panel, c).p_value <= scen.alpha;
  fail(errc::bad_argument, "unknown method identifier: " + name);
}

}  // namespace

const std::vector<std::string>& known_methods() {
  static const std::vector<std::string> names = {
      "ct",   "ct-exact",   "perm-t",         "dl",        "im",  "bester",
      "bester-agg", "signchange", "signchange-agg", "jackknife", "wild", "conformal"};
  return names;
}

bool method_known(const std::string& name) {
  const auto& names = known_methods();
  return std::find(names.begin(), names.end(), name) != names.end();
}

Scenario validate_scenario(Scenario scen) {
  if (scen.reps < 1) fail(errc::bad_argument, "reps must be at least 1");
  if (!(scen.rho >= 0.0 && scen.rho < 1.0)) fail(errc::bad_argument, "rho must be in [0,1)");
  if (!(scen.alpha > 0.0 && scen.alpha < 1.0)) fail(errc::bad_argument, "alpha must be in (0,1)");
  if (scen.n1 < 1 || scen.n0 < 1) fail(errc::bad_argument, "need n1 >= 1 and n0 >= 1");
  if (scen.t0 + scen.t1 < 1 || scen.t1 < 1) fail(errc::bad_argument, "need t1 >= 1");
  if (scen.methods.empty()) fail(errc::bad_argument, "no methods requested");
  for (const auto& m : scen.methods)
    if (!method_known(m)) fail(errc::bad_argument, "unknown method identifier: " + m);
  return scen;
}

Panel gen_ar1_panel(const Scenario& scen, std::uint64_t rep_seed) {
  Panel p;
  p.n_units = scen.n1 + scen.n0;
  p.n_periods = scen.t0 + scen.t1;
  p.n_pre = scen.t0;
  p.outcomes.resize(p.n_units * p.n_periods);
  p.treated.assign(p.n_units, 0);
  for (std::size_t j = 0; j < scen.n1; ++j) p.treated[j] = 1;

  Rng rng(rep_seed);
  const double innov_sd = std::sqrt(1.0 - scen.rho * scen.rho);
  for (std::size_t j = 0; j < p.n_units; ++j) {
    double x = rng.normal();  // stationary start, unit marginal variance
    p.outcome(j, 0) = x;
    for (std::size_t t = 1; t < p.n_periods; ++t) {
      x = scen.rho * x + innov_sd * rng.normal();
      p.outcome(j, t) = x;
    }
  }
  if (scen.effect_c != 0.0) {
    for (std::size_t j = 0; j < scen.n1; ++j)
      for (std::size_t t = p.n_pre; t < p.n_periods; ++t)
        p.outcome(j, t) += scen.effect_c;  // sd(Y(0)) = 1 under this scaling
  }
  return p;
}

CollapsedSample gen_table1_sample(std::size_t n1, std::uint64_t rep_seed) {
  constexpr std::size_t n0 = 100;
  CollapsedSample s;
  s.w.resize(n0 + n1);
  s.treated.assign(n0 + n1, 0);
  Rng rng(rep_seed);
  for (std::size_t j = 0; j < s.w.size(); ++j) s.w[j] = rng.normal();
  for (std::size_t j = 0; j < n1; ++j) s.treated[j] = 1;
  return s;
}

MCResult run_rejection_study(const Scenario& scen_in) {
  const Scenario scen = validate_scenario(scen_in);
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t n_methods = scen.methods.size();

  // 0 = accept, 1 = reject, 2 = error; one row per replication.
  std::vector<std::uint8_t> outcomes(scen.reps * n_methods, 0);
  parallel_for(scen.reps, scen.n_threads, [&](std::size_t rep) {
    const std::uint64_t rep_seed = derive_seed(scen.seed, rep);
    const Panel panel = gen_ar1_panel(scen, rep_seed);
    const CollapsedSample sample = to_collapsed(panel);
    for (std::size_t m = 0; m < n_methods; ++m) {
      std::uint8_t& slot = outcomes[rep * n_methods + m];
      try {
        slot = run_method(scen.methods[m], panel, sample, scen, rep_seed) ? 1 : 0;
      } catch (const Error&) {
        slot = 2;
      }
    }
  });

  MCResult result;
  result.scenario = scen;
  result.rows.resize(n_methods);
  for (std::size_t m = 0; m < n_methods; ++m) {
    auto& row = result.rows[m];
    row.method = scen.methods[m];
    std::size_t rejections = 0, errors = 0;
    for (std::size_t rep = 0; rep < scen.reps; ++rep) {
      const std::uint8_t o = outcomes[rep * n_methods + m];
      rejections += (o == 1);
      errors += (o == 2);
    }
    const std::size_t valid = scen.reps - errors;
    row.reps = valid;
    row.errors = errors;
    row.failed = errors * 100 > scen.reps;  // > 1% of replications errored
    row.rejection_rate =
        valid == 0 ? 0.0 : static_cast<double>(rejections) / static_cast<double>(valid);
    row.mc_se = valid == 0 ? 0.0
                           : std::sqrt(row.rejection_rate * (1.0 - row.rejection_rate) /
                                       static_cast<double>(valid));
  }
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

std::vector<Table1Row> reproduce_table1(std::size_t reps, std::uint64_t seed,
                                        std::size_t n_threads) {
  if (reps < 2) fail(errc::bad_argument, "reps must be at least 2");
  std::vector<Table1Row> rows;
  for (std::size_t n1 = 1; n1 <= 5; ++n1) {
    const std::uint64_t cell_seed = derive_seed(seed, 100 + n1);
    std::vector<double> tau(reps), vhat(reps);
    std::vector<std::uint8_t> rej(reps, 0);
    parallel_for(reps, n_threads, [&](std::size_t rep) {
      const CollapsedSample s = gen_table1_sample(n1, derive_seed(cell_seed, rep));
      const double t = estimate_effect(s).tau_hat;
      const double v = var_heteroskedastic(s).value;
      tau[rep] = t;
      vhat[rep] = v;
      rej[rep] = std::fabs(t) > 1.96 * std::sqrt(v) ? 1 : 0;
    });

    Table1Row row;
    row.n1 = n1;
    const double rd = static_cast<double>(reps);
    std::size_t count = 0;
    for (auto b : rej) count += b;
    row.rejection = static_cast<double>(count) / rd;
    row.mc_se = std::sqrt(row.rejection * (1.0 - row.rejection) / rd);

    const double tau_mean = kahan_mean(tau);
    double ss = 0.0, v_mean_acc = 0.0, inv_v_acc = 0.0;
    for (std::size_t r = 0; r < reps; ++r) {
      ss += (tau[r] - tau_mean) * (tau[r] - tau_mean);
      v_mean_acc += vhat[r];
      inv_v_acc += 1.0 / vhat[r];
    }
    const double var_mc = ss / (rd - 1.0);
    row.ratio_of_expectations = var_mc / (v_mean_acc / rd);
    row.mean_of_ratios = var_mc * (inv_v_acc / rd);
    rows.push_back(row);
  }
  return rows;
}

double table1_analytic_rejection_n1_1() {
  constexpr double n0 = 100.0;
  const double e_sigma0 = (n0 - 1.0) / n0;
  const double true_sd = std::sqrt(1.0 + 1.0 / n0);
  return 2.0 * normal_cdf(-1.96 * std::sqrt(e_sigma0 / n0) / true_sd);
}

std::vector<Figure1Row> reproduce_figure1(const Figure1Options& opt) {
  std::vector<Figure1Row> rows;
  std::size_t cell = 0;
  for (std::size_t n1 : opt.n1_grid) {
    for (double effect : opt.effect_grid) {
      Scenario scen;
      scen.n0 = 30;
      scen.n1 = n1;
      scen.t0 = 5;
      scen.t1 = 5;
      scen.rho = 0.5;
      scen.effect_c = effect;
      scen.alpha = 0.05;
      scen.methods = opt.methods;
      scen.reps = opt.reps;
      scen.seed = derive_seed(opt.seed, 5000 + cell);
      scen.budget = opt.budget;
      scen.n_partitions = opt.n_partitions;
      scen.n_threads = opt.n_threads;
      const MCResult res = run_rejection_study(scen);
      for (const auto& r : res.rows) {
        Figure1Row out;
        out.method = r.method;
        out.n1 = n1;
        out.effect = effect;
        out.rejection_rate = r.rejection_rate;
        out.mc_se = r.mc_se;
        out.reps = r.reps;
        out.seed = scen.seed;
        out.errors = r.errors;
        rows.push_back(out);
      }
      ++cell;
    }
  }
  return rows;
}

}  // namespace fewtreat
