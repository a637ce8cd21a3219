#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "hteval/matching.hpp"
#include "hteval/types.hpp"

namespace hteval {

// Sign conventions, used consistently by every metric here. Y=1 is harmful,
// so negative delta = g1 - g0 means predicted benefit. For a matched pair
// (control i, treated j) the observed benefit is O_ij = Y_i - Y_j, and
// concordance is computed between -delta and O_ij; equivalently, between
// delta and the observed harm Y_j - Y_i, which is how the kernels below are
// oriented (larger level should go with larger prediction).

struct KahanSum {
  double sum = 0.0;
  double carry = 0.0;
  void add(double v) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v)) {
      carry += (sum - t) + v;
    } else {
      carry += (v - t) + sum;
    }
    sum = t;
  }
  double value() const { return sum + carry; }
};

struct ConcordanceCounts {
  double concordant = 0.0;
  double tied_prediction = 0.0;
  double informative = 0.0;  // pairs with unequal level
  bool estimable() const { return informative > 0.0; }
  double c_statistic() const {
    return (concordant + 0.5 * tied_prediction) / informative;
  }
};

// Harrell-style counts between predictions and a small set of ordered
// outcome levels: over all pairs with unequal level, concordant means the
// higher level carries the strictly higher prediction; prediction ties get
// half credit. O(n log n) via per-level sorting.
ConcordanceCounts concordance_vs_levels(const std::vector<double>& pred,
                                        const std::vector<int>& level);

// Probability that individual k's potential-outcome pattern shows more
// benefit than l's: the sum of the five concordant patterns, e.g. pattern 1
// is (1-g1_k) g0_k (1-g1_l) (1-g0_l). P_harm(k,l) = pair_benefit_prob with
// k and l swapped.
double pair_benefit_prob(double g0_k, double g1_k, double g0_l, double g1_l);

// Model-based c-for-benefit: tie-tolerant concordance between delta ranks
// and pattern probabilities, over ordered pairs k != l. `delta` may come
// from a different model than (g0, g1) (validation mode).
MetricEstimate mbcb(const std::vector<double>& delta,
                    const std::vector<double>& g0,
                    const std::vector<double>& g1);

// Diagnostic alternative with P_benefit + P_harm in the denominator and no
// tie credit (the strict-inequality formulation).
MetricEstimate mbcb_strict(const std::vector<double>& delta,
                           const std::vector<double>& g0,
                           const std::vector<double>& g1);

// C-for-benefit with 1:1 matching on predicted treatment effect; the pair
// prediction is the within-pair mean of delta. Unequal arms are balanced by
// subsampling the larger arm `subsample_repeats` times and averaging.
MetricEstimate cben_delta(const TrialDataset& d, const RiskPredictionSet& preds,
                          const MatchSpec& spec,
                          std::size_t subsample_repeats = 1000);

// C-for-benefit with 1:1 matching on control risk; the pair prediction is
// delta of the treated member. The matching anchor may come from a locally
// refit control-arm model.
MetricEstimate cben_y0(const TrialDataset& d,
                       const RiskPredictionSet& preds_for_delta,
                       const std::vector<double>& matching_g0,
                       const MatchSpec& spec,
                       std::size_t subsample_repeats = 1000);

MetricEstimate cben_y0(const TrialDataset& d,
                       const RiskPredictionSet& preds_for_delta,
                       const RiskPredictionSet& preds_for_matching,
                       const MatchSpec& spec,
                       std::size_t subsample_repeats = 1000);

// Concordance between delta and realized within-individual differences in
// potential outcomes (simulation only); the population reference.
MetricEstimate c_delta_ben(const std::vector<double>& delta,
                           const std::vector<double>& y0,
                           const std::vector<double>& y1);

// Outcome-level concordance and Brier score.
MetricEstimate c_outcome(const std::vector<double>& y,
                         const std::vector<double>& risk);
MetricEstimate brier(const std::vector<double>& y,
                     const std::vector<double>& risk);

}  // namespace hteval
