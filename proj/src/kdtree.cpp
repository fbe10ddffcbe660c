#include "rankmatch/kdtree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rankmatch/errors.hpp"

namespace rankmatch {

namespace {
constexpr std::uint32_t kLeafSize = 16;

// Max-heap order: the worst (largest) candidate sits at the front.
inline bool heap_cmp(const Neighbor& a, const Neighbor& b) { return neighbor_less(a, b); }
}  // namespace

KdTree::KdTree(const Matrix& points, std::vector<std::uint32_t> ids) {
    if (points.rows() != ids.size())
        throw ConfigError("KdTree: ids size does not match point count");
    dim_ = points.cols();
    coords_ = points.data();
    ids_ = std::move(ids);
    order_.resize(ids_.size());
    for (std::uint32_t i = 0; i < order_.size(); ++i) order_[i] = i;
    if (!order_.empty()) {
        nodes_.reserve(2 * order_.size() / kLeafSize + 2);
        build(0, static_cast<std::uint32_t>(order_.size()));
    }
}

std::int32_t KdTree::build(std::uint32_t begin, std::uint32_t end) {
    Node node;
    node.begin = begin;
    node.end = end;
    node.box_lo.assign(dim_, std::numeric_limits<double>::infinity());
    node.box_hi.assign(dim_, -std::numeric_limits<double>::infinity());
    for (std::uint32_t i = begin; i < end; ++i) {
        const auto p = point(order_[i]);
        for (std::size_t k = 0; k < dim_; ++k) {
            node.box_lo[k] = std::min(node.box_lo[k], p[k]);
            node.box_hi[k] = std::max(node.box_hi[k], p[k]);
        }
    }

    const std::int32_t index = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back(node);

    if (end - begin > kLeafSize) {
        // Split along the widest extent; degenerate boxes stay leaves.
        std::uint32_t axis = 0;
        double extent = -1.0;
        for (std::size_t k = 0; k < dim_; ++k) {
            const double e = node.box_hi[k] - node.box_lo[k];
            if (e > extent) {
                extent = e;
                axis = static_cast<std::uint32_t>(k);
            }
        }
        if (extent > 0.0) {
            const std::uint32_t mid = begin + (end - begin) / 2;
            std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                             [&](std::uint32_t a, std::uint32_t b) {
                                 const double ca = point(a)[axis], cb = point(b)[axis];
                                 return ca != cb ? ca < cb : ids_[a] < ids_[b];
                             });
            const std::int32_t left = build(begin, mid);
            const std::int32_t right = build(mid, end);
            nodes_[index].axis = axis;
            nodes_[index].left = left;
            nodes_[index].right = right;
        }
    }
    return index;
}

double KdTree::box_dist2(const Node& node, std::span<const double> query) const {
    double s = 0.0;
    for (std::size_t k = 0; k < dim_; ++k) {
        double gap = 0.0;
        if (query[k] < node.box_lo[k]) gap = node.box_lo[k] - query[k];
        else if (query[k] > node.box_hi[k]) gap = query[k] - node.box_hi[k];
        s += gap * gap;
    }
    return s;
}

void KdTree::search(std::int32_t node_idx, std::span<const double> query, std::size_t m,
                    std::vector<Neighbor>& heap) const {
    const Node& node = nodes_[static_cast<std::size_t>(node_idx)];

    // A full heap lets us skip boxes strictly farther than the current
    // worst; equal box distance must still be explored so that equal
    // point distances can win on the id tie-break.
    if (heap.size() == m && box_dist2(node, query) > heap.front().dist2) return;

    if (node.left < 0) {
        for (std::uint32_t i = node.begin; i < node.end; ++i) {
            const std::uint32_t local = order_[i];
            const Neighbor cand{squared_distance(query, point(local)), ids_[local]};
            if (heap.size() < m) {
                heap.push_back(cand);
                std::push_heap(heap.begin(), heap.end(), heap_cmp);
            } else if (neighbor_less(cand, heap.front())) {
                std::pop_heap(heap.begin(), heap.end(), heap_cmp);
                heap.back() = cand;
                std::push_heap(heap.begin(), heap.end(), heap_cmp);
            }
        }
        return;
    }

    // Visit the child whose box is nearer first; ties go left.
    const double dl = box_dist2(nodes_[static_cast<std::size_t>(node.left)], query);
    const double dr = box_dist2(nodes_[static_cast<std::size_t>(node.right)], query);
    if (dl <= dr) {
        search(node.left, query, m, heap);
        search(node.right, query, m, heap);
    } else {
        search(node.right, query, m, heap);
        search(node.left, query, m, heap);
    }
}

void KdTree::knn(std::span<const double> query, std::size_t m, std::vector<Neighbor>& out) const {
    out.clear();
    if (m == 0) return;
    if (m > size()) throw ConfigError("KdTree::knn: m exceeds the number of stored points");
    out.reserve(m);
    search(0, query, m, out);
    std::sort(out.begin(), out.end(), neighbor_less);
}

}  // namespace rankmatch
