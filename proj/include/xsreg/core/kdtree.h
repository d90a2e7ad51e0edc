// Copyright 2026 The xsreg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "xsreg/core/error.h"
#include "xsreg/core/geometry.h"

namespace xsreg {

struct Neighbor {
    std::size_t index;
    double distance;
};

/// Exact k-d tree over Dim-dimensional points.
///
/// Results are ordered by (distance, index), so equidistant points resolve to
/// the lower index and every query returns the same set an exhaustive scan
/// would. The tree is immutable after construction and safe for concurrent
/// queries.
template <int Dim>
class KdTree {
public:
    using Point = Eigen::Matrix<double, Dim, 1>;

    KdTree() = default;

    explicit KdTree(std::span<const Point> points, std::size_t leaf_size = 12)
        : points_(points.begin(), points.end()), leaf_size_(std::max<std::size_t>(leaf_size, 1)) {
        order_.resize(points_.size());
        for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<uint32_t>(i);
        if (!points_.empty()) {
            nodes_.reserve(2 * points_.size() / leaf_size_ + 1);
            build(0, static_cast<uint32_t>(points_.size()));
        }
    }

    std::size_t size() const { return points_.size(); }
    bool empty() const { return points_.empty(); }
    const Point &point(std::size_t i) const { return points_[i]; }

    /// min(k, n) nearest points, ascending.
    std::vector<Neighbor> knn(const Point &query, std::size_t k) const {
        require_nonempty();
        if (k == 0) throw PreconditionError("knn requires k >= 1");
        KnnState state{query, std::min(k, points_.size()), {}};
        state.best.reserve(state.k + 1);
        search_knn(0, state);
        std::vector<Neighbor> out;
        out.reserve(state.best.size());
        for (const auto &c : state.best) out.push_back({c.index, std::sqrt(c.dist2)});
        return out;
    }

    /// Nearest point only; avoids the result allocation of knn().
    Neighbor nearest(const Point &query) const {
        require_nonempty();
        KnnState state{query, 1, {}};
        state.best.reserve(2);
        search_knn(0, state);
        return {state.best[0].index, std::sqrt(state.best[0].dist2)};
    }

    /// All points with distance <= radius, ascending.
    std::vector<Neighbor> radius_search(const Point &query, double radius) const {
        require_nonempty();
        if (!(radius > 0.0)) throw PreconditionError("radius must be positive");
        std::vector<Candidate> found;
        search_radius(0, query, radius * radius, found);
        std::sort(found.begin(), found.end());
        std::vector<Neighbor> out;
        out.reserve(found.size());
        for (const auto &c : found) out.push_back({c.index, std::sqrt(c.dist2)});
        return out;
    }

    /// Number of points within radius, stopping early once `cap` is reached.
    std::size_t count_within(const Point &query, double radius, std::size_t cap) const {
        require_nonempty();
        if (!(radius > 0.0)) throw PreconditionError("radius must be positive");
        std::size_t count = 0;
        if (cap > 0) count_radius(0, query, radius * radius, cap, count);
        return count;
    }

private:
    struct Node {
        uint32_t begin = 0;
        uint32_t end = 0;
        int32_t left = -1;
        int32_t right = -1;
        int axis = -1;
        double split = 0.0;
    };

    struct Candidate {
        double dist2;
        std::size_t index;
        bool operator<(const Candidate &o) const {
            return dist2 < o.dist2 || (dist2 == o.dist2 && index < o.index);
        }
    };

    struct KnnState {
        const Point &query;
        std::size_t k;
        std::vector<Candidate> best;  // sorted ascending
    };

    void require_nonempty() const {
        if (points_.empty()) throw PreconditionError("empty cloud");
    }

    // Partial sum with early exit; returns a value > bound when the point cannot qualify.
    static double dist2_bounded(const Point &a, const Point &b, double bound) {
        double s = 0.0;
        for (int d = 0; d < Dim; ++d) {
            const double diff = a[d] - b[d];
            s += diff * diff;
            if (s > bound) return s;
        }
        return s;
    }

    int32_t build(uint32_t begin, uint32_t end) {
        const auto id = static_cast<int32_t>(nodes_.size());
        nodes_.push_back(Node{begin, end});
        if (end - begin <= leaf_size_) return id;

        Point lo = points_[order_[begin]];
        Point hi = lo;
        for (uint32_t i = begin + 1; i < end; ++i) {
            lo = lo.cwiseMin(points_[order_[i]]);
            hi = hi.cwiseMax(points_[order_[i]]);
        }
        int axis = 0;
        (hi - lo).maxCoeff(&axis);
        if (hi[axis] == lo[axis]) return id;  // all coincident: keep as leaf

        const uint32_t mid = begin + (end - begin) / 2;
        std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                         [&](uint32_t a, uint32_t b) { return points_[a][axis] < points_[b][axis]; });
        const double split = points_[order_[mid]][axis];
        const int32_t left = build(begin, mid);
        const int32_t right = build(mid, end);
        Node &node = nodes_[id];
        node.axis = axis;
        node.split = split;
        node.left = left;
        node.right = right;
        return id;
    }

    void search_knn(int32_t id, KnnState &s) const {
        const Node &node = nodes_[id];
        if (node.axis < 0) {
            for (uint32_t i = node.begin; i < node.end; ++i) {
                const uint32_t idx = order_[i];
                const bool full = s.best.size() == s.k;
                const double bound = full ? s.best.back().dist2 : std::numeric_limits<double>::infinity();
                const double d2 = dist2_bounded(s.query, points_[idx], bound);
                if (d2 > bound) continue;
                const Candidate c{d2, idx};
                if (full && !(c < s.best.back())) continue;
                auto pos = std::upper_bound(s.best.begin(), s.best.end(), c);
                s.best.insert(pos, c);
                if (s.best.size() > s.k) s.best.pop_back();
            }
            return;
        }
        const double diff = s.query[node.axis] - node.split;
        const int32_t near = diff < 0.0 ? node.left : node.right;
        const int32_t far = diff < 0.0 ? node.right : node.left;
        search_knn(near, s);
        if (s.best.size() < s.k || diff * diff <= s.best.back().dist2) search_knn(far, s);
    }

    void search_radius(int32_t id, const Point &q, double r2, std::vector<Candidate> &out) const {
        const Node &node = nodes_[id];
        if (node.axis < 0) {
            for (uint32_t i = node.begin; i < node.end; ++i) {
                const uint32_t idx = order_[i];
                const double d2 = dist2_bounded(q, points_[idx], r2);
                if (d2 <= r2) out.push_back({d2, idx});
            }
            return;
        }
        const double diff = q[node.axis] - node.split;
        const int32_t near = diff < 0.0 ? node.left : node.right;
        const int32_t far = diff < 0.0 ? node.right : node.left;
        search_radius(near, q, r2, out);
        if (diff * diff <= r2) search_radius(far, q, r2, out);
    }

    void count_radius(int32_t id, const Point &q, double r2, std::size_t cap,
                      std::size_t &count) const {
        const Node &node = nodes_[id];
        if (node.axis < 0) {
            for (uint32_t i = node.begin; i < node.end && count < cap; ++i) {
                if (dist2_bounded(q, points_[order_[i]], r2) <= r2) ++count;
            }
            return;
        }
        const double diff = q[node.axis] - node.split;
        const int32_t near = diff < 0.0 ? node.left : node.right;
        const int32_t far = diff < 0.0 ? node.right : node.left;
        count_radius(near, q, r2, cap, count);
        if (count < cap && diff * diff <= r2) count_radius(far, q, r2, cap, count);
    }

    std::vector<Point> points_;
    std::vector<uint32_t> order_;
    std::vector<Node> nodes_;
    std::size_t leaf_size_ = 12;
};

/// Spatial index over the points of a cloud.
using NeighborIndex = KdTree<3>;

inline NeighborIndex build_index(const PointCloud &cloud) {
    return NeighborIndex(std::span<const Vec3>(cloud.points()));
}

}  // namespace xsreg
