#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rankmatch/matrix.hpp"

namespace rankmatch {

enum class MatchBackend { brute, spatial_index };

// M-nearest-neighbor matching with replacement against the opposite
// treatment group. match_sets[i] holds the M matched unit indices of
// unit i in ascending (squared distance, index) order, with distances
// mirrored in match_dist2. k_counts[i] is the number of times unit i
// appears in opposite-group match sets (the recount identity).
struct MatchOutput {
    std::size_t m = 0;
    std::vector<std::vector<std::uint32_t>> match_sets;
    std::vector<std::vector<double>> match_dist2;
    std::vector<std::uint32_t> k_counts;
};

// Matching on one common point representation. Ties at the M-th distance
// are broken by ascending unit index, so reruns are bit-identical. Both
// backends produce identical output.
MatchOutput match_nn(const Matrix& points, const std::vector<std::uint8_t>& treated,
                     std::size_t m, MatchBackend backend = MatchBackend::spatial_index);

// Two-representation variant: a unit's matches are found among the
// opposite group using the representation fitted for that group
// (treated_space for control queries, control_space for treated
// queries). match_nn(points, ...) is the special case where both
// representations coincide.
MatchOutput match_nn_two_spaces(const Matrix& control_space, const Matrix& treated_space,
                                const std::vector<std::uint8_t>& treated, std::size_t m,
                                MatchBackend backend = MatchBackend::spatial_index);

// Density ratio at a query point from two samples: the count of target
// points whose catchment ball (radius = M-th order statistic of the
// distances from the target point to the base sample) contains the
// query, scaled by (N0/N1)/M.
struct RatioEstimate {
    double value = 0.0;
    std::uint32_t k_matched = 0;
    std::size_t m = 0;
};

RatioEstimate density_ratio_at(std::span<const double> query, const Matrix& base_points,
                               const Matrix& target_points, std::size_t m);

// Batch variant computing the catchment radii once for all queries.
std::vector<RatioEstimate> density_ratio_batch(const Matrix& queries, const Matrix& base_points,
                                               const Matrix& target_points, std::size_t m);

// Converts a density-ratio estimate into treatment odds via Bayes
// inversion: with base = the n0-sample of one group and target = the
// n1-sample of the other, value * n1/n0 estimates the propensity odds
// at the query point.
double odds_from_ratio(const RatioEstimate& estimate, std::size_t n0, std::size_t n1);

}  // namespace rankmatch
