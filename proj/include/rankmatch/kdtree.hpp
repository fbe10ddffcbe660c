#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rankmatch/matrix.hpp"

namespace rankmatch {

struct Neighbor {
    double dist2;      // squared Euclidean distance
    std::uint32_t id;  // caller-supplied identifier
};

inline bool neighbor_less(const Neighbor& a, const Neighbor& b) {
    return a.dist2 != b.dist2 ? a.dist2 < b.dist2 : a.id < b.id;
}

// Shared squared-distance kernel. Every matching code path (brute force,
// k-d tree, catchment radii) must call this so distance values compare
// bit-identically across backends.
inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double diff = a[k] - b[k];
        s += diff * diff;
    }
    return s;
}

// Static k-d tree for exact k-nearest-neighbor queries. Construction is
// deterministic (split axis = widest bounding-box extent, median element
// chosen with (coordinate, id) ordering). Queries return the m smallest
// (dist2, id) pairs in ascending lexicographic order; that set is unique,
// so results never depend on traversal order. Subtrees are pruned only
// when the bounding-box distance strictly exceeds the current worst
// candidate, which keeps tie handling exact.
class KdTree {
public:
    // Keeps a copy of the given rows; ids[i] labels row i.
    KdTree(const Matrix& points, std::vector<std::uint32_t> ids);

    std::size_t size() const { return ids_.size(); }

    // Exact m-NN; m must be <= size(). Results appended in ascending
    // (dist2, id) order into out (cleared first).
    void knn(std::span<const double> query, std::size_t m, std::vector<Neighbor>& out) const;

private:
    struct Node {
        std::uint32_t begin, end;           // range into order_
        std::int32_t left = -1, right = -1; // child node indices, -1 = leaf
        std::uint32_t axis = 0;
        std::vector<double> box_lo, box_hi; // bounding box of the range
    };

    std::size_t dim_ = 0;
    std::vector<double> coords_;        // row-major copy of the points
    std::vector<std::uint32_t> ids_;
    std::vector<std::uint32_t> order_;  // permutation of local indices
    std::vector<Node> nodes_;

    std::span<const double> point(std::uint32_t local) const {
        return {coords_.data() + static_cast<std::size_t>(local) * dim_, dim_};
    }
    std::int32_t build(std::uint32_t begin, std::uint32_t end);
    double box_dist2(const Node& node, std::span<const double> query) const;
    void search(std::int32_t node_idx, std::span<const double> query, std::size_t m,
                std::vector<Neighbor>& heap) const;
};

}  // namespace rankmatch
