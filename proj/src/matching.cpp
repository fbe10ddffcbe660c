#include "rankmatch/matching.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rankmatch/errors.hpp"
#include "rankmatch/kdtree.hpp"

namespace rankmatch {

namespace {

void check_finite(const Matrix& points, const char* who) {
    for (std::size_t i = 0; i < points.rows(); ++i)
        for (std::size_t k = 0; k < points.cols(); ++k)
            if (!std::isfinite(points(i, k)))
                throw InputError(std::string(who) + ": non-finite coordinate at row " +
                                 std::to_string(i) + ", column " + std::to_string(k));
}

// Exact m-NN of `query` among the rows of `points` listed in `ids`,
// by full scan with a bounded max-heap on (dist2, id).
void brute_knn(const Matrix& points, const std::vector<std::uint32_t>& ids,
               std::span<const double> query, std::size_t m, std::vector<Neighbor>& out) {
    out.clear();
    out.reserve(m);
    auto cmp = [](const Neighbor& a, const Neighbor& b) { return neighbor_less(a, b); };
    for (const std::uint32_t id : ids) {
        const Neighbor cand{squared_distance(query, points.row(id)), id};
        if (out.size() < m) {
            out.push_back(cand);
            std::push_heap(out.begin(), out.end(), cmp);
        } else if (neighbor_less(cand, out.front())) {
            std::pop_heap(out.begin(), out.end(), cmp);
            out.back() = cand;
            std::push_heap(out.begin(), out.end(), cmp);
        }
    }
    std::sort(out.begin(), out.end(), neighbor_less);
}

std::vector<std::uint32_t> group_indices(const std::vector<std::uint8_t>& treated, bool want) {
    std::vector<std::uint32_t> out;
    for (std::uint32_t i = 0; i < treated.size(); ++i)
        if ((treated[i] != 0) == want) out.push_back(i);
    return out;
}

}  // namespace

MatchOutput match_nn_two_spaces(const Matrix& control_space, const Matrix& treated_space,
                                const std::vector<std::uint8_t>& treated, std::size_t m,
                                MatchBackend backend) {
    const std::size_t n = treated.size();
    if (control_space.rows() != n || treated_space.rows() != n)
        throw ConfigError("match_nn: point rows must match the number of treatment flags");
    check_finite(control_space, "match_nn");
    if (&control_space != &treated_space) check_finite(treated_space, "match_nn");

    const auto controls = group_indices(treated, false);
    const auto treateds = group_indices(treated, true);
    if (controls.empty() || treateds.empty())
        throw ConfigError("match_nn: both treatment groups must be non-empty");
    if (m < 1) throw ConfigError("match_nn: m must be positive");
    if (m > controls.size() || m > treateds.size())
        throw ConfigError("match_nn: m = " + std::to_string(m) +
                          " exceeds a group size (control " + std::to_string(controls.size()) +
                          ", treated " + std::to_string(treateds.size()) + ")");

    MatchOutput out;
    out.m = m;
    out.match_sets.resize(n);
    out.match_dist2.resize(n);
    out.k_counts.assign(n, 0);

    // For control units i: query in the treated representation among
    // treated units. For treated units: query in the control
    // representation among controls.
    auto run_side = [&](const Matrix& space, const std::vector<std::uint32_t>& queries,
                        const std::vector<std::uint32_t>& candidates) {
        std::vector<Neighbor> found;
        if (backend == MatchBackend::spatial_index) {
            Matrix cand_points(candidates.size(), space.cols());
            for (std::size_t r = 0; r < candidates.size(); ++r) {
                const auto src = space.row(candidates[r]);
                std::copy(src.begin(), src.end(), cand_points.row(r).begin());
            }
            KdTree tree(cand_points, candidates);
            for (const std::uint32_t i : queries) {
                tree.knn(space.row(i), m, found);
                auto& set = out.match_sets[i];
                auto& d2 = out.match_dist2[i];
                set.reserve(m);
                d2.reserve(m);
                for (const Neighbor& nb : found) {
                    set.push_back(nb.id);
                    d2.push_back(nb.dist2);
                    ++out.k_counts[nb.id];
                }
            }
        } else {
            for (const std::uint32_t i : queries) {
                brute_knn(space, candidates, space.row(i), m, found);
                auto& set = out.match_sets[i];
                auto& d2 = out.match_dist2[i];
                set.reserve(m);
                d2.reserve(m);
                for (const Neighbor& nb : found) {
                    set.push_back(nb.id);
                    d2.push_back(nb.dist2);
                    ++out.k_counts[nb.id];
                }
            }
        }
    };

    run_side(treated_space, controls, treateds);
    run_side(control_space, treateds, controls);
    return out;
}

MatchOutput match_nn(const Matrix& points, const std::vector<std::uint8_t>& treated,
                     std::size_t m, MatchBackend backend) {
    return match_nn_two_spaces(points, points, treated, m, backend);
}

namespace {

// Squared catchment radii: for each target row, the m-th smallest
// squared distance to the base sample.
std::vector<double> catchment_radii2(const Matrix& base_points, const Matrix& target_points,
                                     std::size_t m) {
    std::vector<std::uint32_t> base_ids(base_points.rows());
    for (std::uint32_t i = 0; i < base_ids.size(); ++i) base_ids[i] = i;
    KdTree tree(base_points, base_ids);

    std::vector<double> radii2(target_points.rows());
    std::vector<Neighbor> found;
    for (std::size_t j = 0; j < target_points.rows(); ++j) {
        tree.knn(target_points.row(j), m, found);
        radii2[j] = found.back().dist2;
    }
    return radii2;
}

RatioEstimate ratio_from_radii(std::span<const double> query, const Matrix& target_points,
                               std::span<const double> radii2, std::size_t n0, std::size_t m) {
    std::uint32_t k = 0;
    for (std::size_t j = 0; j < target_points.rows(); ++j)
        if (squared_distance(query, target_points.row(j)) <= radii2[j]) ++k;
    RatioEstimate est;
    est.k_matched = k;
    est.m = m;
    est.value = static_cast<double>(n0) / static_cast<double>(target_points.rows()) *
                static_cast<double>(k) / static_cast<double>(m);
    return est;
}

void check_ratio_inputs(const Matrix& base_points, const Matrix& target_points, std::size_t m) {
    if (base_points.rows() < 1 || target_points.rows() < 1)
        throw ConfigError("density_ratio: base and target samples must be non-empty");
    if (m < 1 || m > base_points.rows())
        throw ConfigError("density_ratio: need 1 <= m <= base sample size");
    if (base_points.cols() != target_points.cols())
        throw ConfigError("density_ratio: base and target dimensions differ");
    check_finite(base_points, "density_ratio");
    check_finite(target_points, "density_ratio");
}

}  // namespace

RatioEstimate density_ratio_at(std::span<const double> query, const Matrix& base_points,
                               const Matrix& target_points, std::size_t m) {
    check_ratio_inputs(base_points, target_points, m);
    if (query.size() != base_points.cols())
        throw InputError("density_ratio_at: query dimension mismatch");
    const auto radii2 = catchment_radii2(base_points, target_points, m);
    return ratio_from_radii(query, target_points, radii2, base_points.rows(), m);
}

std::vector<RatioEstimate> density_ratio_batch(const Matrix& queries, const Matrix& base_points,
                                               const Matrix& target_points, std::size_t m) {
    check_ratio_inputs(base_points, target_points, m);
    if (queries.rows() > 0 && queries.cols() != base_points.cols())
        throw InputError("density_ratio_batch: query dimension mismatch");
    const auto radii2 = catchment_radii2(base_points, target_points, m);
    std::vector<RatioEstimate> out;
    out.reserve(queries.rows());
    for (std::size_t q = 0; q < queries.rows(); ++q)
        out.push_back(ratio_from_radii(queries.row(q), target_points, radii2,
                                       base_points.rows(), m));
    return out;
}

double odds_from_ratio(const RatioEstimate& estimate, std::size_t n0, std::size_t n1) {
    if (n0 < 1 || n1 < 1) throw ConfigError("odds_from_ratio: group sizes must be positive");
    // value = (n0/n1) * K/M, so value * n1/n0 = K/M, the odds estimate.
    return estimate.value * static_cast<double>(n1) / static_cast<double>(n0);
}

}  // namespace rankmatch
