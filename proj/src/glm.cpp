#include "hteval/glm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hteval {

namespace {

constexpr double kWeightFloor = 1e-10;

// Cholesky factorization of a symmetric positive-definite matrix (in place,
// lower triangle). Returns the index of the first non-positive pivot, or -1.
int cholesky(std::vector<double>& m, std::size_t p, double rel_tol) {
  double max_diag = 0.0;
  for (std::size_t j = 0; j < p; ++j) max_diag = std::max(max_diag, m[j * p + j]);
  const double floor = std::max(rel_tol * max_diag, 1e-300);
  for (std::size_t j = 0; j < p; ++j) {
    double d = m[j * p + j];
    for (std::size_t k = 0; k < j; ++k) d -= m[j * p + k] * m[j * p + k];
    if (d <= floor) return static_cast<int>(j);
    d = std::sqrt(d);
    m[j * p + j] = d;
    for (std::size_t i = j + 1; i < p; ++i) {
      double s = m[i * p + j];
      for (std::size_t k = 0; k < j; ++k) s -= m[i * p + k] * m[j * p + k];
      m[i * p + j] = s / d;
    }
  }
  return -1;
}

// Solve L L^T x = b given the Cholesky factor L (lower triangle of m).
void cholesky_solve(const std::vector<double>& m, std::size_t p,
                    std::vector<double>& b) {
  for (std::size_t i = 0; i < p; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= m[i * p + k] * b[k];
    b[i] = s / m[i * p + i];
  }
  for (std::size_t ii = p; ii-- > 0;) {
    double s = b[ii];
    for (std::size_t k = ii + 1; k < p; ++k) s -= m[k * p + ii] * b[k];
    b[ii] = s / m[ii * p + ii];
  }
}

double quasi_deviance(const std::vector<double>& y, const std::vector<double>& mu,
                      const std::vector<double>* weights) {
  double dev = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double w = weights ? (*weights)[i] : 1.0;
    const double m = clamp_prob(mu[i]);
    dev += w * (y[i] * std::log(m) + (1.0 - y[i]) * std::log(1.0 - m));
  }
  return -2.0 * dev;
}

void check_rank(const Matrix& design, const DesignSpec* spec_for_names) {
  const std::size_t n = design.rows(), p = design.cols();
  std::vector<double> xtx(p * p, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* r = design.row(i);
    for (std::size_t a = 0; a < p; ++a) {
      for (std::size_t b = 0; b <= a; ++b) xtx[a * p + b] += r[a] * r[b];
    }
  }
  for (std::size_t a = 0; a < p; ++a) {
    for (std::size_t b = a + 1; b < p; ++b) xtx[a * p + b] = xtx[b * p + a];
  }
  const int bad = cholesky(xtx, p, 1e-10);
  if (bad >= 0) {
    std::string col = spec_for_names
                          ? spec_for_names->column_names()[bad]
                          : ("column " + std::to_string(bad));
    throw std::invalid_argument("design is rank deficient: " + col +
                                " is collinear with earlier columns");
  }
}

}  // namespace

std::vector<std::string> DesignSpec::column_names() const {
  std::vector<std::string> names;
  names.push_back("intercept");
  if (treatment_terms) names.push_back("a");
  for (std::size_t j = 0; j < n_covariates; ++j)
    names.push_back("x" + std::to_string(j + 1));
  if (treatment_terms) {
    for (std::size_t j = 0; j < n_covariates; ++j)
      names.push_back("a:x" + std::to_string(j + 1));
  }
  return names;
}

Matrix DesignSpec::build(const Matrix& x, const std::vector<int>& a) const {
  if (x.rows() != a.size())
    throw std::invalid_argument("covariate and treatment dimensions disagree");
  if (x.cols() != n_covariates)
    throw std::invalid_argument("covariate count does not match design spec");
  const std::size_t n = x.rows(), p = n_covariates;
  Matrix d(n, column_count());
  for (std::size_t i = 0; i < n; ++i) {
    double* r = d.row(i);
    std::size_t c = 0;
    r[c++] = 1.0;
    if (treatment_terms) r[c++] = static_cast<double>(a[i]);
    for (std::size_t j = 0; j < p; ++j) r[c++] = x(i, j);
    if (treatment_terms) {
      for (std::size_t j = 0; j < p; ++j) r[c++] = a[i] * x(i, j);
    }
  }
  return d;
}

Matrix DesignSpec::build_fixed_arm(const Matrix& x, int arm) const {
  std::vector<int> a(x.rows(), arm);
  return build(x, a);
}

Matrix build_ite_design(const Matrix& x, const std::vector<int>& a) {
  DesignSpec spec{x.cols(), true};
  return spec.build(x, a);
}

std::vector<double> linear_predictor(const Matrix& design,
                                     const std::vector<double>& coef) {
  if (design.cols() != coef.size())
    throw std::invalid_argument("coefficient length does not match design");
  std::vector<double> eta(design.rows());
  for (std::size_t i = 0; i < design.rows(); ++i) {
    const double* r = design.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < coef.size(); ++j) s += r[j] * coef[j];
    eta[i] = s;
  }
  return eta;
}

LogisticFit fit_logistic(const Matrix& design, const std::vector<double>& y,
                         const std::vector<double>* offset,
                         const std::vector<double>* weights,
                         const FitOptions& opts) {
  const std::size_t n = design.rows(), p = design.cols();
  if (y.size() != n) throw std::invalid_argument("response length mismatch");
  if (offset && offset->size() != n)
    throw std::invalid_argument("offset length mismatch");
  if (weights && weights->size() != n)
    throw std::invalid_argument("weights length mismatch");
  if (n < p) throw std::invalid_argument("fewer rows than design columns");
  for (double v : y) {
    if (!(v >= 0.0 && v <= 1.0))
      throw std::invalid_argument("responses must lie in [0,1]");
  }
  check_rank(design, nullptr);

  LogisticFit fit;
  fit.coefficients.assign(p, 0.0);
  std::vector<double> eta(n), mu(n);
  auto update_mu = [&](const std::vector<double>& beta) {
    for (std::size_t i = 0; i < n; ++i) {
      const double* r = design.row(i);
      double s = offset ? (*offset)[i] : 0.0;
      for (std::size_t j = 0; j < p; ++j) s += r[j] * beta[j];
      eta[i] = s;
      mu[i] = expit(s);
    }
  };

  update_mu(fit.coefficients);
  double dev = quasi_deviance(y, mu, weights);

  std::vector<double> xtwx(p * p), xtwz(p), step(p), candidate(p);
  for (int it = 0; it < opts.max_iterations; ++it) {
    std::fill(xtwx.begin(), xtwx.end(), 0.0);
    std::fill(xtwz.begin(), xtwz.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double* r = design.row(i);
      const double w0 = weights ? (*weights)[i] : 1.0;
      const double wi = std::max(w0 * mu[i] * (1.0 - mu[i]), kWeightFloor);
      const double resid = w0 * (y[i] - mu[i]);
      for (std::size_t a = 0; a < p; ++a) {
        xtwz[a] += r[a] * resid;
        for (std::size_t b = 0; b <= a; ++b) xtwx[a * p + b] += wi * r[a] * r[b];
      }
    }
    for (std::size_t a = 0; a < p; ++a) {
      for (std::size_t b = a + 1; b < p; ++b) xtwx[a * p + b] = xtwx[b * p + a];
    }
    const int bad = cholesky(xtwx, p, 1e-14);
    if (bad >= 0)
      throw std::runtime_error(
          "working information matrix is singular at column " +
          std::to_string(bad));
    step = xtwz;
    cholesky_solve(xtwx, p, step);

    // step-halving if the deviance does not improve
    double new_dev = dev;
    for (int h = 0; h < 12; ++h) {
      for (std::size_t j = 0; j < p; ++j)
        candidate[j] = fit.coefficients[j] + step[j];
      update_mu(candidate);
      new_dev = quasi_deviance(y, mu, weights);
      if (std::isfinite(new_dev) && new_dev <= dev + 1e-12) break;
      for (std::size_t j = 0; j < p; ++j) step[j] *= 0.5;
    }
    fit.coefficients = candidate;
    fit.iterations = it + 1;
    const double change = std::abs(dev - new_dev);
    dev = new_dev;
    if (change < opts.tolerance) {
      fit.converged = true;
      break;
    }
  }
  update_mu(fit.coefficients);
  fit.deviance = dev;
  for (double e : eta) {
    if (std::abs(e) > opts.separation_threshold) {
      fit.separation = true;
      break;
    }
  }
  return fit;
}

RiskPredictionSet predict_potential_risks(const LogisticFit& fit,
                                          const DesignSpec& spec,
                                          const Matrix& x) {
  if (!spec.treatment_terms)
    throw std::invalid_argument(
        "potential-risk prediction needs a design with treatment terms");
  const auto lp0 = linear_predictor(spec.build_fixed_arm(x, 0), fit.coefficients);
  const auto lp1 = linear_predictor(spec.build_fixed_arm(x, 1), fit.coefficients);
  return RiskPredictionSet::from_logits(lp0, lp1);
}

LogisticFit fit_control_arm(const TrialDataset& d, const DesignSpec& spec,
                            const FitOptions& opts) {
  const auto ctrl = d.arm_indices(0);
  if (ctrl.empty()) throw std::invalid_argument("empty control arm");
  const auto sub = d.subset(ctrl);
  const DesignSpec cspec = spec.control_restriction();
  return fit_logistic(cspec.build(sub.x, sub.a), sub.y, nullptr, nullptr, opts);
}

std::vector<double> predict_control_logits(const LogisticFit& fit,
                                           const DesignSpec& control_spec,
                                           const Matrix& x) {
  return linear_predictor(control_spec.build_fixed_arm(x, 0), fit.coefficients);
}

}  // namespace hteval
