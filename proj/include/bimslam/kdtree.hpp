#pragma once

#include <cstddef>
#include <limits>
#include <vector>

#include <Eigen/Core>

namespace bimslam {

/// Static 3D kd-tree for nearest-neighbour and fixed-radius queries.
class KdTree {
public:
    KdTree() = default;
    explicit KdTree(std::vector<Eigen::Vector3d> points, std::size_t leaf_size = 8);

    struct Neighbor {
        std::size_t index = std::numeric_limits<std::size_t>::max();
        double sq_dist = std::numeric_limits<double>::infinity();
    };

    /// Nearest point; ties resolve to the lowest index.
    Neighbor nearest(const Eigen::Vector3d& query) const;
    /// Indices of all points with distance <= radius, ascending.
    std::vector<std::size_t> radius_search(const Eigen::Vector3d& query, double radius) const;

    std::size_t size() const { return points_.size(); }
    bool empty() const { return points_.empty(); }
    const Eigen::Vector3d& point(std::size_t i) const { return points_[i]; }

private:
    struct Node {
        std::size_t begin = 0;
        std::size_t end = 0;
        int axis = -1;  // -1 marks a leaf
        double split = 0.0;
        std::size_t left = 0;
        std::size_t right = 0;
    };

    std::size_t build(std::size_t begin, std::size_t end);
    void nearest_impl(std::size_t node, const Eigen::Vector3d& q, Neighbor& best) const;
    void radius_impl(std::size_t node, const Eigen::Vector3d& q, double r2, std::vector<std::size_t>& out) const;

    std::vector<Eigen::Vector3d> points_;
    std::vector<std::size_t> order_;
    std::vector<Node> nodes_;
    std::size_t leaf_size_ = 8;
};

}  // namespace bimslam
