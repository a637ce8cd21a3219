#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "hteval/glm.hpp"
#include "hteval/simulation.hpp"

using namespace hteval;

TEST_CASE("population marginals match the quadrature oracle") {
  SUBCASE("development mechanism") {
    const DGMSpec dgm{{-1.0, -0.75, 1.0, 0.0, 0.0, 0.5}, 100000};
    const auto pop = generate_population(dgm, 701);
    double p0 = 0.0, p1 = 0.0, y0 = 0.0, y1 = 0.0;
    for (std::size_t i = 0; i < pop.size(); ++i) {
      p0 += pop.p0[i];
      p1 += pop.p1[i];
      y0 += pop.y0[i];
      y1 += pop.y1[i];
    }
    const double n = static_cast<double>(pop.size());
    // control linear predictor is -1 + x1; treated is -1.75 + sqrt(1.25) z
    const double oracle_p0 = testutil::logistic_normal_mean(-1.0, 1.0);
    const double oracle_p1 = testutil::logistic_normal_mean(-1.75, std::sqrt(1.25));
    CHECK(std::abs(p0 / n - oracle_p0) <= 0.006);
    CHECK(std::abs(p1 / n - oracle_p1) <= 0.006);
    CHECK(std::abs(y0 / n - oracle_p0) <= 0.008);
    CHECK(std::abs(y1 / n - oracle_p1) <= 0.008);
    // and the coarse two-decimal bands
    CHECK(std::abs(p0 / n - 0.31) <= 0.01);
    CHECK(std::abs(p1 / n - 0.20) <= 0.01);
  }
  SUBCASE("external mechanism") {
    const DGMSpec dgm{{-0.5, -0.5, 0.75, 0.25, 0.25, 0.25}, 100000};
    const auto pop = generate_population(dgm, 703);
    double p0 = 0.0, p1 = 0.0;
    for (std::size_t i = 0; i < pop.size(); ++i) {
      p0 += pop.p0[i];
      p1 += pop.p1[i];
    }
    const double n = static_cast<double>(pop.size());
    const double oracle_p0 = testutil::logistic_normal_mean(-0.5, std::sqrt(0.625));
    const double oracle_p1 = testutil::logistic_normal_mean(-1.0, std::sqrt(1.25));
    CHECK(std::abs(p0 / n - oracle_p0) <= 0.006);
    CHECK(std::abs(p1 / n - oracle_p1) <= 0.006);
    CHECK(std::abs(p0 / n - 0.39) <= 0.01);
    CHECK(std::abs(p1 / n - 0.31) <= 0.01);
  }
}

TEST_CASE("zero coefficients give one-half risks everywhere") {
  const DGMSpec dgm{{0, 0, 0, 0}, 500};
  const auto pop = generate_population(dgm, 5);
  for (std::size_t i = 0; i < pop.size(); ++i) {
    CHECK(pop.p0[i] == 0.5);
    CHECK(pop.p1[i] == 0.5);
  }
}

TEST_CASE("population generation is deterministic and consistent") {
  const DGMSpec dgm{{-1.0, -0.75, 1.0, 0.0, 0.0, 0.5}, 2000};
  const auto a = generate_population(dgm, 11);
  const auto b = generate_population(dgm, 11);
  CHECK(a.x.data() == b.x.data());
  CHECK(a.y0 == b.y0);
  CHECK(a.a == b.a);
  // exact 1:1 allocation
  std::size_t treated = 0;
  for (int arm : a.a) treated += arm;
  CHECK(treated == 1000);
  // observed outcomes follow assignment
  const auto trial = a.observed_trial();
  for (std::size_t i = 0; i < a.size(); ++i)
    CHECK(trial.y[i] == (a.a[i] == 1 ? a.y1[i] : a.y0[i]));
}

TEST_CASE("references from true predictions are perfectly calibrated") {
  const DGMSpec dgm{{-1.0, -0.75, 1.0, 0.0, 0.0, 0.5}, 4000};
  const auto pop = generate_population(dgm, 707);
  const auto preds = RiskPredictionSet::from_probabilities(pop.p0, pop.p1);
  const auto refs = compute_references(pop, preds);
  CHECK(std::abs(refs.cal_intercept_true.value) <= 1e-6);
  CHECK(std::abs(refs.cal_slope_true.value - 1.0) <= 1e-6);
  CHECK(std::abs(refs.cal_intercept_naive.value) <= 1e-6);
  CHECK(std::abs(refs.cal_slope_naive.value - 1.0) <= 1e-6);
  CHECK(refs.mbcb_true.context == EvalContext::sample_reference);
  CHECK(refs.mbcb_true.value > 0.5);
  CHECK(refs.c_delta_ben_realized.context == EvalContext::population_reference);
  CHECK(std::abs(refs.c_delta_ben_realized.value - refs.mbcb_true.value) <= 0.02);
}

TEST_CASE("performance summary algebra") {
  SimulationResult result;
  result.config.sample_sizes = {100};
  result.config.n_sim = 3;
  const auto mi = static_cast<std::size_t>(MetricName::mbcb);
  const auto si = static_cast<std::size_t>(Setting::apparent);
  for (std::size_t r = 0; r < 3; ++r) {
    RunRecord rec;
    rec.ok = true;
    rec.sample_size = 100;
    rec.run_index = r;
    rec.estimates[mi][si] = 0.6 + 0.01 * static_cast<double>(r);
    rec.discr_pop_ref[0] = *rec.estimates[mi][si];  // estimate equals reference
    result.runs.push_back(rec);
  }
  auto summary = performance_summary(result);
  REQUIRE(summary.rows.size() == 1);
  CHECK(summary.rows[0].bias == doctest::Approx(0.0));
  CHECK(summary.rows[0].rmse == doctest::Approx(0.0));

  // constant estimation error +0.1: bias is -0.1 under reference-minus-estimate
  for (auto& rec : result.runs) {
    rec.estimates[mi][si] = *rec.discr_pop_ref[0] + 0.1;
  }
  summary = performance_summary(result);
  CHECK(summary.rows[0].bias == doctest::Approx(-0.1));
  CHECK(summary.rows[0].rmse == doctest::Approx(0.1));
  // bias + mean(estimates) = mean(references) exactly
  CHECK(summary.rows[0].bias + summary.rows[0].mean ==
        doctest::Approx(summary.rows[0].mean_reference).epsilon(1e-15));
}

TEST_CASE("a small study runs, is deterministic, and fills every setting") {
  StudyConfig cfg;
  cfg.n_sim = 2;
  cfg.sample_sizes = {150};
  cfg.v2_size = 150;
  cfg.bootstrap_B = 8;
  cfg.seed = 909;
  cfg.development_dgm.population_size = 4000;
  cfg.external_dgm.population_size = 4000;
  cfg.subsample_repeats = 20;
  cfg.bootstrap_subsample_repeats = 8;
  cfg.n_threads = 1;

  const auto a = run_study(cfg);
  const auto b = run_study(cfg);
  CHECK(a.failed_runs == 0);
  REQUIRE(a.runs.size() == 2);
  for (std::size_t r = 0; r < a.runs.size(); ++r) {
    for (std::size_t m = 0; m < 8; ++m) {
      for (std::size_t s = 0; s < kSettingCount; ++s) {
        CHECK(a.runs[r].estimates[m][s].has_value() ==
              b.runs[r].estimates[m][s].has_value());
        if (a.runs[r].estimates[m][s])
          CHECK(*a.runs[r].estimates[m][s] == *b.runs[r].estimates[m][s]);
      }
    }
  }

  const auto& rec = a.runs[0];
  using M = MetricName;
  using S = Setting;
  auto has = [&](M m, S s) {
    return rec.estimates[static_cast<std::size_t>(m)][static_cast<std::size_t>(s)]
        .has_value();
  };
  for (M m : {M::cben_delta, M::cben_y0, M::mbcb, M::cal_intercept, M::cal_slope}) {
    CHECK(has(m, S::apparent));
    CHECK(has(m, S::optimism_corrected));
    CHECK(has(m, S::external_v1));
    CHECK(has(m, S::external_v2));
  }
  // 0.632+ exists except for the intercept
  CHECK(has(M::mbcb, S::boot632plus));
  CHECK(has(M::cal_slope, S::boot632plus));
  CHECK(!has(M::cal_intercept, S::boot632plus));
  // starred settings exclude cben_delta
  CHECK(!has(M::cben_delta, S::external_v1_local));
  CHECK(has(M::cben_y0, S::external_v1_local));
  CHECK(has(M::mbcb, S::external_v2_local));
  // references present
  CHECK(rec.discr_pop_ref[0].has_value());
  CHECK(rec.discr_pop_ref[1].has_value());
  CHECK(rec.discr_sample_ref[0].has_value());
  CHECK(rec.cal_slope_pop_ref[1].has_value());
  CHECK(rec.cal_slope_naive_ref[0].has_value());

  // the apparent calibration fixed point holds in every run
  for (const auto& run : a.runs) {
    CHECK(std::abs(*run.estimates[static_cast<std::size_t>(M::cal_intercept)]
                                 [static_cast<std::size_t>(S::apparent)]) <= 1e-6);
    CHECK(std::abs(*run.estimates[static_cast<std::size_t>(M::cal_slope)]
                                 [static_cast<std::size_t>(S::apparent)] -
                   1.0) <= 1e-6);
  }

  const auto summary = performance_summary(a);
  CHECK(!summary.rows.empty());
  CHECK(!summary.references.empty());
}
