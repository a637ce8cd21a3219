#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "hteval/glm.hpp"
#include "hteval/rng.hpp"
#include "hteval/simulation.hpp"

using namespace hteval;

namespace {

Matrix random_design(std::size_t n, std::size_t p, Rng& rng) {
  Matrix x(n, p);
  for (std::size_t i = 0; i < n; ++i) {
    x(i, 0) = 1.0;
    for (std::size_t j = 1; j < p; ++j) x(i, j) = rng.normal();
  }
  return x;
}

}  // namespace

TEST_CASE("intercept-only fit returns logit of the outcome mean") {
  Matrix design(4, 1, 1.0);
  const auto fit = fit_logistic(design, {0, 1, 0, 1});
  CHECK(fit.converged);
  CHECK(std::abs(fit.coefficients[0]) <= 1e-8);
}

TEST_CASE("an offset holding the true logits absorbs all signal") {
  Rng rng(42);
  const std::size_t n = 100000;
  Matrix design(n, 1, 1.0);
  std::vector<double> offset(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    offset[i] = -1.0 + rng.normal();
    y[i] = rng.bernoulli(expit(offset[i])) ? 1.0 : 0.0;
  }
  const auto fit = fit_logistic(design, y, &offset);
  CHECK(fit.converged);
  CHECK(std::abs(fit.coefficients[0]) <= 0.05);
}

TEST_CASE("matches an independent Newton-Raphson solver") {
  Rng rng(7);
  const auto design = random_design(20, 3, rng);
  std::vector<double> y(20);
  for (auto& v : y) v = rng.bernoulli(0.4) ? 1.0 : 0.0;
  const auto fit = fit_logistic(design, y);
  const auto oracle = testutil::newton_logistic(design, y);
  for (std::size_t j = 0; j < 3; ++j)
    CHECK(std::abs(fit.coefficients[j] - oracle[j]) <= 1e-6);

  // with offset and fractional responses
  std::vector<double> offset(20), yf(20);
  for (auto& v : offset) v = 0.3 * rng.normal();
  for (auto& v : yf) v = rng.uniform();
  const auto fit2 = fit_logistic(design, yf, &offset);
  const auto oracle2 = testutil::newton_logistic(design, yf, &offset);
  for (std::size_t j = 0; j < 3; ++j)
    CHECK(std::abs(fit2.coefficients[j] - oracle2[j]) <= 1e-6);
}

TEST_CASE("treatment-effect design layout") {
  Matrix x(2, 2);
  x(0, 0) = 3.0;
  x(0, 1) = 4.0;
  x(1, 0) = 1.0;
  x(1, 1) = 2.0;
  const auto d = build_ite_design(x, {0, 1});
  REQUIRE(d.cols() == 6);
  // control row: interactions are zero
  CHECK(d(0, 0) == 1.0);
  CHECK(d(0, 1) == 0.0);
  CHECK(d(0, 4) == 0.0);
  CHECK(d(0, 5) == 0.0);
  // treated row with x=(1,2): (1, 1, 1, 2, 1, 2)
  CHECK(d(1, 0) == 1.0);
  CHECK(d(1, 1) == 1.0);
  CHECK(d(1, 2) == 1.0);
  CHECK(d(1, 3) == 2.0);
  CHECK(d(1, 4) == 1.0);
  CHECK(d(1, 5) == 2.0);
}

TEST_CASE("recovers the generating coefficients on a large population") {
  const DGMSpec dgm{{-1.0, -0.75, 1.0, 0.0, 0.0, 0.5}, 100000};
  const auto pop = generate_population(dgm, 99);
  const auto trial = pop.observed_trial();
  const auto fit = fit_logistic(build_ite_design(trial.x, trial.a), trial.y);
  REQUIRE(fit.converged);
  for (std::size_t j = 0; j < 6; ++j)
    CHECK(std::abs(fit.coefficients[j] - dgm.beta[j]) <= 0.05);
}

TEST_CASE("potential-risk predictions") {
  const DesignSpec spec{2, true};
  LogisticFit fit;
  fit.coefficients = {0, 0, 0, 0, 0, 0};
  fit.converged = true;
  Matrix x(1, 2);
  x(0, 0) = 0.7;
  x(0, 1) = -0.3;
  auto preds = predict_potential_risks(fit, spec, x);
  CHECK(preds.g0[0] == doctest::Approx(0.5));
  CHECK(preds.g1[0] == doctest::Approx(0.5));
  CHECK(preds.delta[0] == doctest::Approx(0.0));

  fit.coefficients = {-1.0, -0.75, 1.0, 0.0, 0.0, 0.5};
  Matrix origin(1, 2);
  preds = predict_potential_risks(fit, spec, origin);
  CHECK(preds.g0[0] == doctest::Approx(0.2689414).epsilon(1e-6));
  CHECK(preds.g1[0] == doctest::Approx(0.1480472).epsilon(1e-6));
}

TEST_CASE("control-arm refit equals a plain prognostic fit on controls") {
  const DGMSpec dgm{{-0.4, -0.5, 0.8, 0.2, 0.1, 0.3}, 4000};
  const auto pop = generate_population(dgm, 3);
  const auto trial = pop.observed_trial();
  const DesignSpec spec{2, true};
  const auto refit = fit_control_arm(trial, spec);
  REQUIRE(refit.coefficients.size() == 3);

  const auto controls = trial.arm_indices(0);
  const auto sub = trial.subset(controls);
  Matrix d(sub.size(), 3);
  for (std::size_t i = 0; i < sub.size(); ++i) {
    d(i, 0) = 1.0;
    d(i, 1) = sub.x(i, 0);
    d(i, 2) = sub.x(i, 1);
  }
  const auto direct = fit_logistic(d, sub.y);
  for (std::size_t j = 0; j < 3; ++j)
    CHECK(refit.coefficients[j] == doctest::Approx(direct.coefficients[j]));
}

TEST_CASE("score equations hold at convergence") {
  Rng rng(13);
  const auto design = random_design(300, 4, rng);
  std::vector<double> y(300), offset(300), w(300);
  for (auto& v : offset) v = 0.2 * rng.normal();
  for (auto& v : w) v = 0.5 + rng.uniform();
  for (std::size_t i = 0; i < 300; ++i)
    y[i] = rng.bernoulli(expit(design(i, 1) + offset[i])) ? 1.0 : 0.0;
  const auto fit = fit_logistic(design, y, &offset, &w);
  REQUIRE(fit.converged);
  std::vector<double> score(4, 0.0);
  for (std::size_t i = 0; i < 300; ++i) {
    double eta = offset[i];
    for (std::size_t j = 0; j < 4; ++j) eta += design(i, j) * fit.coefficients[j];
    const double mu = expit(eta);
    for (std::size_t j = 0; j < 4; ++j) score[j] += w[i] * (y[i] - mu) * design(i, j);
  }
  for (double s : score) CHECK(std::abs(s) <= 1e-6);
}

TEST_CASE("fractional self-consistency") {
  Rng rng(23);
  const auto design = random_design(120, 3, rng);
  std::vector<double> y(120);
  for (std::size_t i = 0; i < 120; ++i)
    y[i] = rng.bernoulli(expit(0.3 + 0.7 * design(i, 1))) ? 1.0 : 0.0;
  const auto fit = fit_logistic(design, y);
  std::vector<double> mu(120);
  for (std::size_t i = 0; i < 120; ++i) {
    double eta = 0.0;
    for (std::size_t j = 0; j < 3; ++j) eta += design(i, j) * fit.coefficients[j];
    mu[i] = expit(eta);
  }
  const auto refit = fit_logistic(design, mu);
  for (std::size_t j = 0; j < 3; ++j)
    CHECK(std::abs(refit.coefficients[j] - fit.coefficients[j]) <= 1e-6);
}

TEST_CASE("constant offset shifts only the intercept") {
  Rng rng(31);
  const auto design = random_design(200, 3, rng);
  std::vector<double> y(200), off(200, 0.0), off_c(200, 0.7);
  for (std::size_t i = 0; i < 200; ++i)
    y[i] = rng.bernoulli(expit(-0.2 + 0.5 * design(i, 2))) ? 1.0 : 0.0;
  const auto f0 = fit_logistic(design, y, &off);
  const auto f1 = fit_logistic(design, y, &off_c);
  CHECK(std::abs(f1.coefficients[0] - (f0.coefficients[0] - 0.7)) <= 1e-6);
  for (std::size_t j = 1; j < 3; ++j)
    CHECK(std::abs(f1.coefficients[j] - f0.coefficients[j]) <= 1e-6);
}

TEST_CASE("rank deficiency is reported with the offending column") {
  Matrix design(10, 3);
  Rng rng(3);
  for (std::size_t i = 0; i < 10; ++i) {
    design(i, 0) = 1.0;
    design(i, 1) = rng.normal();
    design(i, 2) = 2.0 * design(i, 1);  // collinear
  }
  std::vector<double> y(10, 0.0);
  y[0] = y[3] = 1.0;
  CHECK_THROWS_WITH_AS(fit_logistic(design, y),
                       doctest::Contains("column 2"), std::invalid_argument);
}

TEST_CASE("separation sets a warning flag instead of aborting") {
  Matrix design(8, 2);
  std::vector<double> y(8);
  for (std::size_t i = 0; i < 8; ++i) {
    design(i, 0) = 1.0;
    design(i, 1) = static_cast<double>(i) - 3.5;
    y[i] = i >= 4 ? 1.0 : 0.0;
  }
  const auto fit = fit_logistic(design, y);
  CHECK(fit.separation);
}

TEST_CASE("responses outside the unit interval are rejected") {
  Matrix design(3, 1, 1.0);
  CHECK_THROWS_AS(fit_logistic(design, {0.0, 1.5, 0.2}), std::invalid_argument);
}
