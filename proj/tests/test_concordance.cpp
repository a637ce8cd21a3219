#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "helpers.hpp"
#include "hteval/concordance.hpp"
#include "hteval/rng.hpp"
#include "hteval/simulation.hpp"

using namespace hteval;

namespace {

TrialDataset two_pair_trial(double y_c1, double y_t1, double y_c2, double y_t2) {
  TrialDataset d;
  d.y = {y_c1, y_c2, y_t1, y_t2};
  d.a = {0, 0, 1, 1};
  d.x = Matrix(4, 0);
  return d;
}

RiskPredictionSet preds_with_delta(const std::vector<double>& g0,
                                   const std::vector<double>& g1) {
  return RiskPredictionSet::from_probabilities(g0, g1);
}

}  // namespace

TEST_CASE("pair_benefit_prob: certain benefit vs certain no-effect") {
  CHECK(pair_benefit_prob(1.0, 0.0, 0.0, 0.0) == doctest::Approx(1.0));
}

TEST_CASE("pair_benefit_prob matches the joint-outcome enumeration") {
  // per-individual joint probabilities for g0=0.25, g1=0.20
  const double g0 = 0.25, g1 = 0.20;
  CHECK((1 - g0) * (1 - g1) == doctest::Approx(0.6));    // P(Y0=0, Y1=0)
  CHECK((1 - g0) * g1 == doctest::Approx(0.15));         // P(Y0=0, Y1=1)
  CHECK(g0 * (1 - g1) == doctest::Approx(0.2));          // P(Y0=1, Y1=0)
  CHECK(g0 * g1 == doctest::Approx(0.05));               // P(Y0=1, Y1=1)
  const double oracle = testutil::benefit_prob_enumeration(g0, g1, g0, g1);
  CHECK(oracle == doctest::Approx(0.2575).epsilon(1e-12));
  CHECK(pair_benefit_prob(g0, g1, g0, g1) == doctest::Approx(oracle).epsilon(1e-12));

  Rng rng(71);
  for (int i = 0; i < 200; ++i) {
    const double a0 = rng.uniform(), a1 = rng.uniform();
    const double b0 = rng.uniform(), b1 = rng.uniform();
    CHECK(pair_benefit_prob(a0, a1, b0, b1) ==
          doctest::Approx(testutil::benefit_prob_enumeration(a0, a1, b0, b1))
              .epsilon(1e-12));
  }
}

TEST_CASE("benefit, harm and no-effect masses are a partition") {
  Rng rng(73);
  for (int i = 0; i < 300; ++i) {
    const double a0 = rng.uniform(), a1 = rng.uniform();
    const double b0 = rng.uniform(), b1 = rng.uniform();
    const double p_ben = pair_benefit_prob(a0, a1, b0, b1);
    const double p_harm = pair_benefit_prob(b0, b1, a0, a1);
    // no-effect mass: both individuals' patterns tie
    const double pb_a = (1 - a1) * a0, ph_a = a1 * (1 - a0);
    const double pb_b = (1 - b1) * b0, ph_b = b1 * (1 - b0);
    const double pz_a = 1 - pb_a - ph_a, pz_b = 1 - pb_b - ph_b;
    const double p_same = pb_a * pb_b + pz_a * pz_b + ph_a * ph_b;
    CHECK(std::abs(p_ben + p_harm + p_same - 1.0) <= 1e-12);
  }
}

TEST_CASE("anti-symmetry of harm and benefit") {
  Rng rng(79);
  for (int i = 0; i < 100; ++i) {
    const double a0 = rng.uniform(), a1 = rng.uniform();
    const double b0 = rng.uniform(), b1 = rng.uniform();
    // P_harm(k,l) is P_benefit with the pair swapped; against enumeration
    const double lhs = pair_benefit_prob(b0, b1, a0, a1);
    double rhs = 0.0;
    for (int y0k = 0; y0k <= 1; ++y0k)
      for (int y1k = 0; y1k <= 1; ++y1k)
        for (int y0l = 0; y0l <= 1; ++y0l)
          for (int y1l = 0; y1l <= 1; ++y1l) {
            if (y1k - y0k <= y1l - y0l) continue;  // harm for k relative to l
            rhs += (y0k ? a0 : 1 - a0) * (y1k ? a1 : 1 - a1) *
                   (y0l ? b0 : 1 - b0) * (y1l ? b1 : 1 - b1);
          }
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }
}

TEST_CASE("mbcb tie and certainty cases") {
  // equal deltas, positive shared benefit mass: ties give exactly one half
  const auto tie = mbcb({0.1, 0.1}, {0.5, 0.5}, {0.4, 0.4});
  CHECK(tie.estimable);
  CHECK(tie.value == doctest::Approx(0.5));

  // individual 1 certain benefit, individual 2 certain no-effect
  const auto sure = mbcb({-1.0, 0.0}, {1.0, 0.0}, {0.0, 0.0});
  CHECK(sure.value == doctest::Approx(1.0));
}

TEST_CASE("mbcb equals the brute-force double loop") {
  Rng rng(83);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.uniform_index(49);
    std::vector<double> delta(n), g0(n), g1(n);
    for (std::size_t i = 0; i < n; ++i) {
      g0[i] = rng.uniform();
      g1[i] = rng.uniform();
      delta[i] = g1[i] - g0[i];
      if (rng.bernoulli(0.2) && i > 0) delta[i] = delta[i - 1];  // force ties
    }
    const auto fast = mbcb(delta, g0, g1);
    CHECK(std::abs(fast.value - testutil::mbcb_brute(delta, g0, g1)) <= 1e-12);
  }
}

TEST_CASE("mbcb is invariant under increasing transforms of delta") {
  Rng rng(89);
  std::vector<double> delta(40), g0(40), g1(40);
  for (std::size_t i = 0; i < 40; ++i) {
    g0[i] = rng.uniform();
    g1[i] = rng.uniform();
    delta[i] = g1[i] - g0[i];
  }
  auto transformed = delta;
  for (auto& v : transformed) v = std::atan(3.0 * v) + 7.0;
  CHECK(mbcb(delta, g0, g1).value ==
        doctest::Approx(mbcb(transformed, g0, g1).value).epsilon(1e-15));
}

TEST_CASE("reversing delta maps mbcb to its complement when tie-free") {
  Rng rng(97);
  std::vector<double> delta(30), g0(30), g1(30);
  for (std::size_t i = 0; i < 30; ++i) {
    g0[i] = rng.uniform();
    g1[i] = rng.uniform();
    delta[i] = g1[i] - g0[i];
  }
  auto neg = delta;
  for (auto& v : neg) v = -v;
  CHECK(mbcb(neg, g0, g1).value ==
        doctest::Approx(1.0 - mbcb(delta, g0, g1).value).epsilon(1e-12));
}

TEST_CASE("zero benefit mass is flagged non-estimable") {
  // certain no-effect for everyone: every pattern difference has zero mass
  const auto e = mbcb({0.1, 0.2}, {0.0, 0.0}, {0.0, 0.0});
  CHECK(!e.estimable);
}

TEST_CASE("cben_delta on two constructed pairs") {
  MatchSpec spec;
  // pair 1: delta -0.5 both members, observed benefit (control event, treated none)
  // pair 2: delta 0.0 both members, no observed difference
  auto d = two_pair_trial(1, 0, 0, 0);
  auto preds =
      preds_with_delta({0.5, 0.5, 0.5, 0.5}, {0.0, 0.5, 0.0, 0.5});
  // deltas: c1=-0.5, c2=0, t1=-0.5, t2=0 -> rank pairing keeps intended pairs
  auto est = cben_delta(d, preds, spec);
  CHECK(est.estimable);
  CHECK(est.value == doctest::Approx(1.0));

  // swap the deltas: the benefit pair now carries the higher delta
  auto preds_swapped =
      preds_with_delta({0.5, 0.5, 0.5, 0.5}, {0.5, 0.0, 0.5, 0.0});
  est = cben_delta(d, preds_swapped, spec);
  CHECK(est.value == doctest::Approx(0.0));
}

TEST_CASE("cben_delta is non-estimable when all pair outcomes agree") {
  MatchSpec spec;
  auto d = two_pair_trial(0, 0, 0, 0);
  const auto preds =
      preds_with_delta({0.5, 0.6, 0.5, 0.6}, {0.3, 0.5, 0.3, 0.5});
  const auto est = cben_delta(d, preds, spec);
  CHECK(!est.estimable);
}

TEST_CASE("cben matched statistics are permutation invariant") {
  const DGMSpec dgm{{-1.0, -0.75, 1.0, 0.0, 0.0, 0.5}, 300};
  auto pop = generate_population(dgm, 15);
  // force balanced arms so the analysis is deterministic
  for (std::size_t i = 0; i < pop.size(); ++i) pop.a[i] = i % 2 == 0 ? 0 : 1;
  const auto trial = pop.observed_trial();
  const auto preds = RiskPredictionSet::from_probabilities(pop.p0, pop.p1);

  MatchSpec spec;
  const auto base_d = cben_delta(trial, preds, spec).value;
  const auto base_y0 = cben_y0(trial, preds, preds.g0, spec).value;

  Rng rng(7);
  std::vector<std::size_t> perm(pop.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  rng.shuffle(perm);
  const auto pop_p = pop.subset(perm);
  const auto trial_p = pop_p.observed_trial();
  const auto preds_p = preds.subset(perm);
  CHECK(cben_delta(trial_p, preds_p, spec).value == doctest::Approx(base_d).epsilon(1e-15));
  CHECK(cben_y0(trial_p, preds_p, preds_p.g0, spec).value ==
        doctest::Approx(base_y0).epsilon(1e-15));
}

TEST_CASE("balanced arms collapse subsample averaging to one analysis") {
  const DGMSpec dgm{{-0.8, -0.5, 0.9, 0.1, 0.0, 0.4}, 200};
  auto pop = generate_population(dgm, 21);
  for (std::size_t i = 0; i < pop.size(); ++i) pop.a[i] = i % 2;
  const auto trial = pop.observed_trial();
  const auto preds = RiskPredictionSet::from_probabilities(pop.p0, pop.p1);
  MatchSpec spec;
  const auto one = cben_delta(trial, preds, spec, 1);
  const auto many = cben_delta(trial, preds, spec, 1000);
  CHECK(one.value == many.value);
  CHECK(many.meta.at("repeats_used") == 1.0);
}

TEST_CASE("cben agrees with a hand-rolled matched analysis") {
  const DGMSpec dgm{{-1.0, -0.75, 1.0, 0.0, 0.0, 0.5}, 240};
  auto pop = generate_population(dgm, 33);
  for (std::size_t i = 0; i < pop.size(); ++i) pop.a[i] = i % 2;
  const auto trial = pop.observed_trial();
  const auto preds = RiskPredictionSet::from_probabilities(pop.p0, pop.p1);
  MatchSpec spec;
  const auto est = cben_delta(trial, preds, spec);

  // oracle: sort each arm by delta, pair by rank, brute-force concordance
  // between pair means and observed differences
  std::vector<std::size_t> ctrl = trial.arm_indices(0), trt = trial.arm_indices(1);
  std::sort(ctrl.begin(), ctrl.end(),
            [&](auto a, auto b) { return preds.delta[a] < preds.delta[b]; });
  std::sort(trt.begin(), trt.end(),
            [&](auto a, auto b) { return preds.delta[a] < preds.delta[b]; });
  std::vector<double> pair_pred;
  std::vector<int> harm;
  for (std::size_t k = 0; k < ctrl.size(); ++k) {
    pair_pred.push_back(0.5 * (preds.delta[ctrl[k]] + preds.delta[trt[k]]));
    harm.push_back(static_cast<int>(trial.y[trt[k]] - trial.y[ctrl[k]]));
  }
  CHECK(est.value ==
        doctest::Approx(testutil::concordance_brute(pair_pred, harm)).epsilon(1e-12));
}

TEST_CASE("perfectly matched twins reproduce the true-pattern reference") {
  // duplicate covariates across arms with the correct model: each control is
  // an exact twin of a treated individual, so the observed within-pair
  // difference carries exactly the treated member's effect
  const std::size_t n_pairs = 4000;
  Rng rng(119);
  std::vector<double> p0(n_pairs), p1(n_pairs);
  TrialDataset d;
  d.x = Matrix(2 * n_pairs, 1);
  d.y.resize(2 * n_pairs);
  d.a.resize(2 * n_pairs);
  std::vector<double> g0_all(2 * n_pairs), g1_all(2 * n_pairs);
  for (std::size_t k = 0; k < n_pairs; ++k) {
    const double x = rng.normal();
    p0[k] = expit(-1.0 + x);
    p1[k] = expit(-1.75 + x);  // distinct, strictly monotone in x
    // control twin in the first block, treated twin in the second
    d.x(k, 0) = x;
    d.y[k] = rng.bernoulli(p0[k]) ? 1.0 : 0.0;
    d.a[k] = 0;
    d.x(n_pairs + k, 0) = x;
    d.y[n_pairs + k] = rng.bernoulli(p1[k]) ? 1.0 : 0.0;
    d.a[n_pairs + k] = 1;
    g0_all[k] = g0_all[n_pairs + k] = p0[k];
    g1_all[k] = g1_all[n_pairs + k] = p1[k];
  }
  const auto preds = RiskPredictionSet::from_probabilities(g0_all, g1_all);

  MatchSpec spec;
  const auto est = cben_y0(d, preds, preds.g0, spec);
  std::vector<double> delta_true(n_pairs);
  for (std::size_t k = 0; k < n_pairs; ++k) delta_true[k] = p1[k] - p0[k];
  const double sample_ref = mbcb(delta_true, p0, p1).value;
  REQUIRE(est.estimable);
  CHECK(std::abs(est.value - sample_ref) <= 0.02);
}

TEST_CASE("c_delta_ben basics") {
  // constant potential-outcome difference: no benefit-ordered pairs
  CHECK(!c_delta_ben({0.1, 0.2, 0.3}, {0, 0, 0}, {0, 0, 0}).estimable);
  CHECK(!c_delta_ben({0.1, 0.2}, {1, 1}, {0, 0}).estimable);

  // a perfectly ordered instance
  const auto e = c_delta_ben({-0.5, 0.0}, {1, 0}, {0, 0});
  CHECK(e.value == doctest::Approx(1.0));
}

TEST_CASE("c_delta_ben equals the brute-force concordance") {
  Rng rng(101);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 5 + rng.uniform_index(60);
    std::vector<double> delta(n), y0(n), y1(n);
    std::vector<int> level(n);
    for (std::size_t i = 0; i < n; ++i) {
      delta[i] = rng.bernoulli(0.2) ? 0.0 : rng.normal();
      y0[i] = rng.bernoulli(0.4) ? 1.0 : 0.0;
      y1[i] = rng.bernoulli(0.3) ? 1.0 : 0.0;
      level[i] = static_cast<int>(y1[i] - y0[i]);
    }
    bool informative = false;
    for (std::size_t i = 1; i < n; ++i) informative |= level[i] != level[0];
    if (!informative) continue;
    const auto fast = c_delta_ben(delta, y0, y1);
    CHECK(fast.value ==
          doctest::Approx(testutil::concordance_brute(delta, level)).epsilon(1e-12));
  }
}

TEST_CASE("expectation identity: realized-outcome concordance vs true-pattern mbcb") {
  // fixed n=100 sample; mean of c_delta_ben over repeated potential-outcome
  // draws approaches the mbcb with true pattern probabilities
  const DGMSpec dgm{{-1.0, -0.75, 1.0, 0.0, 0.0, 0.5}, 100};
  const auto pop = generate_population(dgm, 55);
  const auto preds = RiskPredictionSet::from_probabilities(pop.p0, pop.p1);
  const double sample_ref = mbcb(preds.delta, pop.p0, pop.p1).value;

  Rng rng(4242);
  KahanSum mean;
  std::size_t used = 0;
  const int redraws = 2000;
  for (int r = 0; r < redraws; ++r) {
    std::vector<double> y0(100), y1(100);
    for (std::size_t i = 0; i < 100; ++i) {
      y0[i] = rng.bernoulli(pop.p0[i]) ? 1.0 : 0.0;
      y1[i] = rng.bernoulli(pop.p1[i]) ? 1.0 : 0.0;
    }
    const auto e = c_delta_ben(preds.delta, y0, y1);
    if (e.estimable) {
      mean.add(e.value);
      ++used;
    }
  }
  CHECK(used > 1900);
  CHECK(std::abs(mean.value() / used - sample_ref) <= 0.005);
}

TEST_CASE("c_outcome and brier") {
  CHECK(c_outcome({0, 0, 1, 1}, {0.1, 0.2, 0.8, 0.9}).value == doctest::Approx(1.0));
  CHECK(!c_outcome({1, 1, 1}, {0.2, 0.3, 0.4}).estimable);
  CHECK(brier({0, 1, 0, 1}, {0.5, 0.5, 0.5, 0.5}).value == doctest::Approx(0.25));

  Rng rng(103);
  std::vector<double> y(200), risk(200);
  std::vector<int> level(200);
  for (std::size_t i = 0; i < 200; ++i) {
    y[i] = rng.bernoulli(0.35) ? 1.0 : 0.0;
    risk[i] = rng.bernoulli(0.1) ? 0.5 : rng.uniform();
    level[i] = static_cast<int>(y[i]);
  }
  CHECK(c_outcome(y, risk).value ==
        doctest::Approx(testutil::concordance_brute(risk, level)).epsilon(1e-12));
}

TEST_CASE("strict-denominator variant stays close to the tie-tolerant form") {
  Rng rng(107);
  std::vector<double> delta(30), g0(30), g1(30);
  for (std::size_t i = 0; i < 30; ++i) {
    g0[i] = rng.uniform();
    g1[i] = rng.uniform();
    delta[i] = g1[i] - g0[i];
  }
  const auto a = mbcb(delta, g0, g1);
  const auto b = mbcb_strict(delta, g0, g1);
  CHECK(a.estimable);
  CHECK(b.estimable);
  // tie-free deltas with symmetric denominators: both orderings agree on rank
  CHECK(std::abs(a.value - b.value) < 0.2);
}
