#include "bimslam/kdtree.hpp"

#include <algorithm>
#include <numeric>

namespace bimslam {

KdTree::KdTree(std::vector<Eigen::Vector3d> points, std::size_t leaf_size)
    : points_(std::move(points)), leaf_size_(std::max<std::size_t>(1, leaf_size)) {
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), 0);
    if (!points_.empty()) {
        nodes_.reserve(2 * points_.size() / leaf_size_ + 1);
        build(0, points_.size());
    }
}

std::size_t KdTree::build(std::size_t begin, std::size_t end) {
    const std::size_t id = nodes_.size();
    nodes_.push_back({begin, end});
    if (end - begin <= leaf_size_) return id;

    Eigen::Vector3d lo = points_[order_[begin]];
    Eigen::Vector3d hi = lo;
    for (std::size_t i = begin; i < end; ++i) {
        lo = lo.cwiseMin(points_[order_[i]]);
        hi = hi.cwiseMax(points_[order_[i]]);
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    if (hi[axis] - lo[axis] <= 0.0) return id;  // all coincident

    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                     order_.begin() + static_cast<std::ptrdiff_t>(mid),
                     order_.begin() + static_cast<std::ptrdiff_t>(end), [&](std::size_t a, std::size_t b) {
                         return points_[a][axis] < points_[b][axis];
                     });
    const double split = points_[order_[mid]][axis];
    const std::size_t left = build(begin, mid);
    const std::size_t right = build(mid, end);
    Node& n = nodes_[id];
    n.axis = axis;
    n.split = split;
    n.left = left;
    n.right = right;
    return id;
}

KdTree::Neighbor KdTree::nearest(const Eigen::Vector3d& query) const {
    Neighbor best;
    if (!nodes_.empty()) nearest_impl(0, query, best);
    return best;
}

void KdTree::nearest_impl(std::size_t node, const Eigen::Vector3d& q, Neighbor& best) const {
    const Node& n = nodes_[node];
    if (n.axis < 0) {
        for (std::size_t i = n.begin; i < n.end; ++i) {
            const std::size_t idx = order_[i];
            const double d = (points_[idx] - q).squaredNorm();
            if (d < best.sq_dist || (d == best.sq_dist && idx < best.index)) best = {idx, d};
        }
        return;
    }
    const double diff = q[n.axis] - n.split;
    const std::size_t first = diff < 0.0 ? n.left : n.right;
    const std::size_t second = diff < 0.0 ? n.right : n.left;
    nearest_impl(first, q, best);
    if (diff * diff <= best.sq_dist) nearest_impl(second, q, best);
}

std::vector<std::size_t> KdTree::radius_search(const Eigen::Vector3d& query, double radius) const {
    std::vector<std::size_t> out;
    if (!nodes_.empty()) radius_impl(0, query, radius * radius, out);
    std::sort(out.begin(), out.end());
    return out;
}

void KdTree::radius_impl(std::size_t node, const Eigen::Vector3d& q, double r2, std::vector<std::size_t>& out) const {
    const Node& n = nodes_[node];
    if (n.axis < 0) {
        for (std::size_t i = n.begin; i < n.end; ++i) {
            if ((points_[order_[i]] - q).squaredNorm() <= r2) out.push_back(order_[i]);
        }
        return;
    }
    const double diff = q[n.axis] - n.split;
    if (diff <= 0.0 || diff * diff <= r2) radius_impl(n.left, q, r2, out);
    if (diff >= 0.0 || diff * diff <= r2) radius_impl(n.right, q, r2, out);
}

}  // namespace bimslam
