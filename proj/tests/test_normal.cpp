#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "fewtreat/error.hpp"
#include "fewtreat/mclab.hpp"
#include "fewtreat/normal.hpp"
#include "fewtreat/rng.hpp"
#include "fewtreat/special.hpp"

using namespace fewtreat;

namespace {

CollapsedSample make_sample(std::vector<double> w, std::vector<std::uint8_t> treated) {
  CollapsedSample s;
  s.w = std::move(w);
  s.treated = std::move(treated);
  return s;
}

// Explicit sandwich oracle for the coarse-cluster CRVE t-test: dense 2x2
// matrix algebra, no shared code with the implementation.
double bester_oracle_t(const CollapsedSample& s, const Partition& part, double c) {
  double n1 = 0.0, n0 = 0.0;
  std::vector<std::pair<double, double>> rows;  // (D_j, w_j), partition units only
  std::vector<std::size_t> cluster_of;
  for (std::size_t k = 0; k < part.n_clusters(); ++k) {
    rows.push_back({1.0, s.w[part.clusters[k].treated]});
    cluster_of.push_back(k);
    n1 += 1.0;
    for (std::size_t j : part.clusters[k].controls) {
      rows.push_back({0.0, s.w[j]});
      cluster_of.push_back(k);
      n0 += 1.0;
    }
  }
  const double n = n1 + n0;
  // X'X = [[n, n1], [n1, n1]] and its inverse
  const double det = n * n1 - n1 * n1;
  const double inv[2][2] = {{n1 / det, -n1 / det}, {-n1 / det, n / det}};
  // OLS coefficients
  double sy = 0.0, sdy = 0.0;
  for (const auto& [d, y] : rows) {
    sy += y;
    sdy += d * y;
  }
  const double a = inv[0][0] * sy + inv[0][1] * sdy;
  const double beta = inv[1][0] * sy + inv[1][1] * sdy;
  // cluster scores and meat
  const std::size_t g = part.n_clusters();
  std::vector<double> s0(g, 0.0), s1(g, 0.0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double resid = rows[i].second - a - beta * rows[i].first;
    s0[cluster_of[i]] += resid;
    s1[cluster_of[i]] += rows[i].first * resid;
  }
  double m00 = 0.0, m01 = 0.0, m11 = 0.0;
  for (std::size_t k = 0; k < g; ++k) {
    m00 += s0[k] * s0[k];
    m01 += s0[k] * s1[k];
    m11 += s1[k] * s1[k];
  }
  // V = inv * M * inv, take the (beta, beta) element
  const double r0 = inv[1][0] * m00 + inv[1][1] * m01;
  const double r1 = inv[1][0] * m01 + inv[1][1] * m11;
  const double v_raw = r0 * inv[1][0] + r1 * inv[1][1];
  const double gd = static_cast<double>(g);
  return (beta - c) / std::sqrt(v_raw * gd / (gd - 1.0));
}

}  // namespace

TEST_CASE("im_ttest basics and hand value") {
  CHECK(im_ttest(ClusterEstimates{{1.0, -1.0}}).p_value == doctest::Approx(1.0));

  // scale invariance
  ClusterEstimates e{{0.4, 1.1, -0.3, 2.2}};
  ClusterEstimates e10{{4.0, 11.0, -3.0, 22.0}};
  CHECK(im_ttest(e).p_value == doctest::Approx(im_ttest(e10).p_value).epsilon(1e-12));

  // {1,2,3,4}: t = 2.5 / sqrt((5/3)/4), checked against a frozen reference
  auto r = im_ttest(ClusterEstimates{{1, 2, 3, 4}});
  CHECK(r.statistic == doctest::Approx(3.87298334620741688518).epsilon(1e-12));
  CHECK(r.p_value == doctest::Approx(0.03046629166217099125).epsilon(1e-10));

  CHECK_THROWS_AS(im_ttest(ClusterEstimates{{2.0, 2.0}}), Error);
  CHECK_THROWS_AS(im_ttest(ClusterEstimates{{2.0}}), Error);
  CHECK_FALSE(im_ttest(ClusterEstimates{{1.0, 2.0}}).warnings.empty());  // G < 3 caution
}

TEST_CASE("donald_lang matches direct evaluation") {
  auto s = make_sample({0, 2, 0, 2}, {1, 1, 0, 0});
  CHECK(donald_lang(s, 0.0).p_value == doctest::Approx(1.0));  // tau = 0 = c

  auto r = donald_lang(s, 1.0);
  CHECK(r.statistic == doctest::Approx(-1.0));
  CHECK(r.p_value == doctest::Approx(0.42264973081037423549).epsilon(1e-10));

  CHECK_THROWS_AS(donald_lang(make_sample({1, 1, 1, 1}, {1, 1, 0, 0}), 0.0), Error);
}

TEST_CASE("donald_lang is near-exact under normal homoskedastic errors") {
  // N1 = 1, N0 = 100, iid standard normal outcomes: 5% rejection within
  // 0.05 +/- 0.01, and the p-values are uniform (KS distance < 0.02).
  const std::size_t reps = 50000;
  std::size_t rej = 0;
  std::vector<double> pvals;
  pvals.reserve(20000);
  for (std::size_t r = 0; r < reps; ++r) {
    const CollapsedSample s = gen_table1_sample(1, derive_seed(612, r));
    const double p = donald_lang(s, 0.0).p_value;
    rej += p <= 0.05;
    if (r < 20000) pvals.push_back(p);
  }
  const double rate = static_cast<double>(rej) / static_cast<double>(reps);
  CHECK(std::fabs(rate - 0.05) <= 0.01);

  std::sort(pvals.begin(), pvals.end());
  double ks = 0.0;
  for (std::size_t i = 0; i < pvals.size(); ++i) {
    const double ecdf_hi = static_cast<double>(i + 1) / static_cast<double>(pvals.size());
    const double ecdf_lo = static_cast<double>(i) / static_cast<double>(pvals.size());
    ks = std::max({ks, std::fabs(ecdf_hi - pvals[i]), std::fabs(ecdf_lo - pvals[i])});
  }
  CHECK(ks < 0.02);
}

TEST_CASE("bester_ttest coincides with im_ttest on balanced clusters") {
  Rng rng(606);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t g = 2 + static_cast<std::size_t>(rng.below(4));
    const std::size_t per = 1 + static_cast<std::size_t>(rng.below(3));
    const std::size_t n = g * (1 + per);
    std::vector<double> w(n);
    for (auto& v : w) v = rng.normal();
    std::vector<std::uint8_t> d(n, 0);
    for (std::size_t j = 0; j < g; ++j) d[j] = 1;
    auto s = make_sample(w, d);
    const Partition part = partition_controls(s, derive_seed(7, trial));
    const double c = 0.15;

    const auto bt = bester_ttest(s, part, c);
    const auto im = im_ttest(ClusterEstimates{cluster_effects(s, part)}, 0.05, c);
    CHECK(std::fabs(bt.statistic - im.statistic) < 1e-10);
    CHECK(std::fabs(bt.metadata.at("critical_value") - im.metadata.at("critical_value")) < 1e-10);
    CHECK(bt.p_value == doctest::Approx(im.p_value).epsilon(1e-10));

    // and against the explicit sandwich oracle
    CHECK(bt.statistic == doctest::Approx(bester_oracle_t(s, part, c)).epsilon(1e-10));
  }
}

TEST_CASE("bester_ttest ties at the null and rejects unbalanced clusters") {
  auto s = make_sample({3, 5, 1, 2, 2, 3}, {1, 1, 0, 0, 0, 0});
  Partition part;
  part.clusters = {{0, {2, 3}}, {1, {4, 5}}};
  const double tau = bester_ttest(s, part, 0.0).estimate;
  CHECK(bester_ttest(s, part, tau).p_value == doctest::Approx(1.0));

  Partition bad;
  bad.clusters = {{0, {2}}, {1, {3, 4}}};
  try {
    bester_ttest(s, bad, 0.0);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.code() == errc::bester_balance);
  }
}

TEST_CASE("bester_aggregate reduces to the single decision") {
  Rng rng(607);
  std::vector<double> w(12);
  for (auto& v : w) v = rng.normal();
  auto s = make_sample(w, {1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0});
  const std::uint64_t seed = 4;
  auto agg1 = bester_aggregate(s, 0.0, 1, seed);
  auto single = bester_ttest(s, partition_controls(s, derive_seed(seed, 0)), 0.0);
  const bool rejected = std::fabs(single.statistic) > single.metadata.at("critical_value");
  CHECK(agg1.p_value == doctest::Approx(rejected ? 0.0 : 1.0));

  auto agg = bester_aggregate(s, 0.0, 20, seed);
  CHECK(agg.component_pvalues.size() == 20);
  CHECK(agg.p_value >= 0.0);
  CHECK(agg.p_value <= 1.0);
}

TEST_CASE("jackknife_variance hand values and invariances") {
  CHECK(jackknife_variance(1.0, {2.0, 2.0, 2.0}).value == 0.0);
  CHECK(jackknife_variance(1.0, {0.0, 2.0}).value == doctest::Approx(1.0));

  Rng rng(608);
  std::vector<double> loo(6);
  for (auto& v : loo) v = rng.normal();
  const double base = jackknife_variance(0.0, loo).value;
  std::vector<double> perm = {loo[3], loo[0], loo[5], loo[1], loo[4], loo[2]};
  CHECK(jackknife_variance(0.0, perm).value == doctest::Approx(base).epsilon(1e-12));
  std::vector<double> scaled(loo);
  for (auto& v : scaled) v *= 3.0;
  CHECK(jackknife_variance(0.0, scaled).value == doctest::Approx(9.0 * base).epsilon(1e-12));

  CHECK_THROWS_AS(jackknife_variance(0.0, {1.0}), Error);
}

TEST_CASE("leave-one-out effect helpers agree with direct recomputation") {
  Rng rng(609);
  std::vector<double> w(9);
  for (auto& v : w) v = rng.normal();
  auto s = make_sample(w, {1, 1, 1, 0, 0, 0, 0, 0, 0});
  const auto loo = leave_one_unit_out_effects(s);
  for (std::size_t drop = 0; drop < 9; ++drop) {
    CollapsedSample sub;
    for (std::size_t j = 0; j < 9; ++j) {
      if (j == drop) continue;
      sub.w.push_back(s.w[j]);
      sub.treated.push_back(s.treated[j]);
    }
    CHECK(loo[drop] == doctest::Approx(estimate_effect(sub).tau_hat).epsilon(1e-12));
  }

  const Partition part = partition_controls(s, 3);
  const auto cloo = leave_one_cluster_out_effects(s, part);
  for (std::size_t k = 0; k < part.n_clusters(); ++k) {
    CollapsedSample sub;
    for (std::size_t q = 0; q < part.n_clusters(); ++q) {
      if (q == k) continue;
      sub.w.push_back(s.w[part.clusters[q].treated]);
      sub.treated.push_back(1);
      for (std::size_t j : part.clusters[q].controls) {
        sub.w.push_back(s.w[j]);
        sub.treated.push_back(0);
      }
    }
    CHECK(cloo[k] == doctest::Approx(estimate_effect(sub).tau_hat).epsilon(1e-12));
  }
}

TEST_CASE("jackknife_ttest matches the IM statistic on balanced partitions") {
  Rng rng(610);
  std::vector<double> w(15);
  for (auto& v : w) v = rng.normal();
  auto s = make_sample(w, {1, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0});
  const Partition part = partition_controls(s, 11);
  const auto jk = jackknife_ttest(s, part, 0.2);
  const auto im = im_ttest(ClusterEstimates{cluster_effects(s, part)}, 0.05, 0.2);
  CHECK(jk.statistic == doctest::Approx(im.statistic).epsilon(1e-10));
  // but with the scaled critical value
  const double gd = 3.0;
  CHECK(jk.metadata.at("critical_value") ==
        doctest::Approx(std::sqrt(gd / (gd - 1.0)) * im.metadata.at("critical_value")));
  CHECK(jk.p_value >= im.p_value);  // strictly more conservative reference
}

TEST_CASE("leung_resampled_t behaviour") {
  // identical constant clusters: zero spread is DEGENERATE
  try {
    leung_resampled_t({1, 1, 1, 1, 1, 1}, {1, 1, 1, 1, 1, 1}, 3, 3, 5);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.code() == errc::degenerate);
  }

  // shifted clusters with a large resample: small p, estimate near the shift
  Rng rng(611);
  std::vector<double> a(4000), b(4000);
  for (auto& v : a) v = rng.normal() + 2.0;
  for (auto& v : b) v = rng.normal();
  const auto r = leung_resampled_t(a, b, leung_default_r(a.size()), leung_default_r(b.size()), 17);
  CHECK(r.p_value < 0.01);
  CHECK(r.estimate == doctest::Approx(2.0).epsilon(0.25));

  // determinism under a shared seed
  const auto r2 = leung_resampled_t(a, b, 252, 252, 17);
  const auto r3 = leung_resampled_t(a, b, 252, 252, 17);
  CHECK(r2.p_value == r3.p_value);

  // out-of-range resample sizes
  CHECK_THROWS_AS(leung_resampled_t({1, 2}, {3, 4}, 3, 2, 1), Error);
  CHECK_THROWS_AS(leung_resampled_t({1, 2}, {3, 4}, 1, 2, 1), Error);
}

TEST_CASE("leung with r = N reproduces the plain two-sample t on its resample") {
  // definitional identity: the statistic is the Welch t of whatever multiset
  // was drawn; with a fixed seed we recompute it independently
  std::vector<double> a = {1.0, 2.0, 3.0, 4.0, 5.0};
  std::vector<double> b = {0.5, 1.5, 2.5};
  const auto r = leung_resampled_t(a, b, a.size(), b.size(), 23);
  // independent recomputation from the same stream
  Rng rng(splitmix64(23));
  auto redraw = [&](const std::vector<double>& x, std::size_t n) {
    std::vector<double> d(n);
    for (auto& v : d) v = x[static_cast<std::size_t>(rng.below(x.size()))];
    return d;
  };
  const auto da = redraw(a, a.size());
  const auto db = redraw(b, b.size());
  auto moments = [](const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::pair<double, double>{m, ss / static_cast<double>(v.size() - 1)};
  };
  const auto [ma, va] = moments(da);
  const auto [mb, vb] = moments(db);
  const double t = (ma - mb) / std::sqrt(va / static_cast<double>(da.size()) +
                                         vb / static_cast<double>(db.size()));
  CHECK(r.statistic == doctest::Approx(t).epsilon(1e-12));
  CHECK(r.p_value == doctest::Approx(2.0 * normal_cdf(-std::fabs(t))).epsilon(1e-12));
}
