#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace hteval {

constexpr double kProbClamp = 1e-12;  // probabilities clamped to [eps, 1-eps]

inline double expit(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double clamp_prob(double p) {
  if (p < kProbClamp) return kProbClamp;
  if (p > 1.0 - kProbClamp) return 1.0 - kProbClamp;
  return p;
}

inline double logit(double p) {
  p = clamp_prob(p);
  return std::log(p / (1.0 - p));
}

// Minimal row-major dense matrix; covariate blocks and GLM designs are small.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  const double* row(std::size_t i) const { return data_.data() + i * cols_; }
  double* row(std::size_t i) { return data_.data() + i * cols_; }
  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  Matrix take_rows(const std::vector<std::size_t>& idx) const {
    Matrix out(idx.size(), cols_);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      for (std::size_t c = 0; c < cols_; ++c) out(r, c) = (*this)(idx[r], c);
    }
    return out;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

template <typename T>
std::vector<T> take(const std::vector<T>& v, const std::vector<std::size_t>& idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(v[i]);
  return out;
}

enum class OutcomeKind { binary, continuous };

// One two-arm study: outcome, treatment indicator, covariates.
struct TrialDataset {
  std::vector<double> y;
  std::vector<int> a;  // 0 = control, 1 = treated
  Matrix x;
  OutcomeKind outcome_kind = OutcomeKind::binary;

  std::size_t size() const { return y.size(); }
  std::size_t n_covariates() const { return x.cols(); }

  std::vector<std::size_t> arm_indices(int arm) const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i] == arm) idx.push_back(i);
    }
    return idx;
  }

  TrialDataset subset(const std::vector<std::size_t>& idx) const {
    TrialDataset out;
    out.y = take(y, idx);
    out.a = take(a, idx);
    out.x = x.take_rows(idx);
    out.outcome_kind = outcome_kind;
    return out;
  }
};

// Throws std::invalid_argument naming the first violated invariant.
const TrialDataset& validate_dataset(const TrialDataset& d);

// Per-individual potential-outcome risk predictions on both scales.
// Construction canonicalizes: probabilities are clamped, logits recomputed
// from the clamped probabilities, so both constructors agree.
struct RiskPredictionSet {
  std::vector<double> g0, g1, delta;
  std::vector<double> lp0, lp1, delta_lp;

  std::size_t size() const { return g0.size(); }

  static RiskPredictionSet from_probabilities(std::vector<double> p0,
                                              std::vector<double> p1);
  static RiskPredictionSet from_logits(const std::vector<double>& l0,
                                       const std::vector<double>& l1);

  RiskPredictionSet subset(const std::vector<std::size_t>& idx) const {
    RiskPredictionSet out;
    out.g0 = take(g0, idx);
    out.g1 = take(g1, idx);
    out.delta = take(delta, idx);
    out.lp0 = take(lp0, idx);
    out.lp1 = take(lp1, idx);
    out.delta_lp = take(delta_lp, idx);
    return out;
  }
};

// 1:1 control-treated pairing.
struct MatchedPairSet {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (control, treated)
  std::string match_scalar;  // what was matched on, e.g. "delta", "g0"
  double total_distance = 0.0;
};

enum class MetricName {
  cben_delta,
  cben_y0,
  mbcb,
  cal_intercept,
  cal_slope,
  ate_error,
  c_outcome,
  brier,
};

enum class EvalContext {
  apparent,
  boot632plus,
  optimism_corrected,
  external,
  sample_reference,
  population_reference,
  naive_reference,
};

std::string to_string(MetricName m);
std::string to_string(EvalContext c);
MetricName metric_from_string(const std::string& s);
EvalContext context_from_string(const std::string& s);

// A named statistic with its evaluation context and free-form diagnostics.
struct MetricEstimate {
  MetricName name = MetricName::mbcb;
  double value = std::nan("");
  EvalContext context = EvalContext::apparent;
  bool estimable = true;
  std::string detail;                    // e.g. "naive", "local_refit"
  std::map<std::string, double> meta;    // pair counts, denominator mass, B, ...

  static MetricEstimate non_estimable(MetricName n, EvalContext c) {
    MetricEstimate e;
    e.name = n;
    e.context = c;
    e.estimable = false;
    return e;
  }
};

// Simulated population with both potential outcomes and their true
// event probabilities.
struct PopulationWithTruth {
  Matrix x;
  std::vector<double> p0, p1;  // true event probabilities
  std::vector<double> y0, y1;  // one realized draw of each potential outcome
  std::vector<int> a;          // randomized 1:1 assignment

  std::size_t size() const { return p0.size(); }

  // observed outcome under consistency
  std::vector<double> observed_y() const {
    std::vector<double> y(size());
    for (std::size_t i = 0; i < size(); ++i) y[i] = a[i] == 1 ? y1[i] : y0[i];
    return y;
  }

  TrialDataset observed_trial() const {
    TrialDataset d;
    d.y = observed_y();
    d.a = a;
    d.x = x;
    d.outcome_kind = OutcomeKind::binary;
    return d;
  }

  PopulationWithTruth subset(const std::vector<std::size_t>& idx) const {
    PopulationWithTruth out;
    out.x = x.take_rows(idx);
    out.p0 = take(p0, idx);
    out.p1 = take(p1, idx);
    out.y0 = take(y0, idx);
    out.y1 = take(y1, idx);
    out.a = take(a, idx);
    return out;
  }
};

}  // namespace hteval
