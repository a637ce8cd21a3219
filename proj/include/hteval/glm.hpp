#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hteval/types.hpp"

namespace hteval {

// Column layout of the treatment-effect model:
//   [1, a, x1..xp, a*x1..a*xp]          (treatment_terms = true)
//   [1, x1..xp]                          (treatment_terms = false; control-arm
//                                         restriction drops exactly the
//                                         treatment-dependent columns)
struct DesignSpec {
  std::size_t n_covariates = 0;
  bool treatment_terms = true;

  std::size_t column_count() const {
    return treatment_terms ? 2 * n_covariates + 2 : n_covariates + 1;
  }
  std::vector<std::string> column_names() const;

  Matrix build(const Matrix& x, const std::vector<int>& a) const;
  // design with every row forced to treatment value `arm`
  Matrix build_fixed_arm(const Matrix& x, int arm) const;

  DesignSpec control_restriction() const { return {n_covariates, false}; }
};

struct LogisticFit {
  std::vector<double> coefficients;
  bool converged = false;
  double deviance = 0.0;
  int iterations = 0;
  bool separation = false;  // |linear predictor| > 30 at convergence
};

struct FitOptions {
  double tolerance = 1e-8;  // on |deviance change|
  int max_iterations = 25;
  double separation_threshold = 30.0;
};

// Maximum (quasi-)binomial likelihood via IRLS. Responses may be fractional
// (in [0,1]); offset is added to the linear predictor and not estimated.
// Throws on rank-deficient designs, naming the collinear column.
LogisticFit fit_logistic(const Matrix& design, const std::vector<double>& y,
                         const std::vector<double>* offset = nullptr,
                         const std::vector<double>* weights = nullptr,
                         const FitOptions& opts = FitOptions{});

Matrix build_ite_design(const Matrix& x, const std::vector<int>& a);

std::vector<double> linear_predictor(const Matrix& design,
                                     const std::vector<double>& coef);

// g0 from the design with a forced to 0, g1 with a forced to 1.
RiskPredictionSet predict_potential_risks(const LogisticFit& fit,
                                          const DesignSpec& spec,
                                          const Matrix& x);

// Prognostic control-arm model: spec minus treatment terms, fitted on the
// control arm only.
LogisticFit fit_control_arm(const TrialDataset& d, const DesignSpec& spec,
                            const FitOptions& opts = FitOptions{});

// Control-risk logits for every row of x under a control-arm fit.
std::vector<double> predict_control_logits(const LogisticFit& fit,
                                           const DesignSpec& control_spec,
                                           const Matrix& x);

}  // namespace hteval
