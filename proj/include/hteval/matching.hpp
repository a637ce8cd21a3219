#pragma once

#include <cstdint>
#include <vector>

#include "hteval/types.hpp"

namespace hteval {

enum class MatchMode { scalar, mahalanobis };
enum class MatchAlgorithm { optimal, greedy };

struct MatchSpec {
  MatchMode mode = MatchMode::scalar;
  MatchAlgorithm algorithm = MatchAlgorithm::optimal;
  std::uint64_t seed = 0;  // used by balance_subsample, not by matching itself
};

// 1:1 matching on a scalar score. Both arms must have equal size; callers
// balance first (see balance_subsample). `optimal` minimizes the total
// absolute distance; in one dimension the sorted rank-pairing achieves this,
// so optimal and greedy coincide here. Ties are broken by original index.
MatchedPairSet match_pairs(const MatchSpec& spec,
                           const std::vector<double>& control_scores,
                           const std::vector<double>& treated_scores);

// 1:1 matching on covariate rows via Mahalanobis distance
// d(x_i, x_j) = sqrt((x_i - x_j)' S^{-1} (x_i - x_j)), with S the covariance
// of the pooled covariates. `optimal` solves the assignment problem;
// `greedy` pairs each control (input order) with its nearest unused treated.
MatchedPairSet match_pairs(const MatchSpec& spec, const Matrix& control_x,
                           const Matrix& treated_x);

// Minimum-cost solution of the square assignment problem; returns the column
// assigned to each row. Shortest-augmenting-path, O(n^3).
std::vector<std::size_t> solve_assignment(const Matrix& cost);

// Balanced index sets: the smaller arm kept whole, the larger arm uniformly
// subsampled to the same size, `repeats` times. Already balanced arms yield
// the full index set once.
std::vector<std::vector<std::size_t>> balance_subsample(const TrialDataset& d,
                                                        std::uint64_t seed,
                                                        std::size_t repeats);

}  // namespace hteval
