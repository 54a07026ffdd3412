#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace bimslam {

struct Triangle {
    Eigen::Vector3d a, b, c;

    double area() const { return 0.5 * (b - a).cross(c - a).norm(); }
    Eigen::Vector3d normal() const { return (b - a).cross(c - a).normalized(); }
};

struct TriangleMesh {
    std::vector<Eigen::Vector3d> vertices;
    std::vector<std::array<std::uint32_t, 3>> faces;

    std::size_t triangle_count() const { return faces.size(); }
    Triangle triangle(std::size_t i) const {
        const auto& f = faces[i];
        return {vertices[f[0]], vertices[f[1]], vertices[f[2]]};
    }
    bool empty() const { return faces.empty(); }
    double surface_area() const;
    /// Appends `other`, re-indexing its faces.
    void merge(const TriangleMesh& other);
};

/// The building reference: triangle soup of permanent structures, world frame.
using BuildingModel = TriangleMesh;

/// Throws PreconditionViolation on non-finite vertices or degenerate triangles.
void validate_model(const BuildingModel& model);

/// OBJ subset: `v x y z` and triangulated `f a b c` lines (`a/b/c` forms
/// accepted, only the vertex index is used). Other lines are ignored.
TriangleMesh load_obj(const std::filesystem::path& file);
void save_obj(const TriangleMesh& mesh, const std::filesystem::path& file);

/// Closest point on a triangle to p (Ericson's region test).
Eigen::Vector3d closest_point_on_triangle(const Eigen::Vector3d& p, const Triangle& t);

/// Möller-Trumbore; returns the ray parameter of the hit, if any, for t in (t_min, t_max).
std::optional<double> intersect_ray_triangle(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
                                             const Triangle& t, double t_min, double t_max);

/// Separating-axis overlap test of a triangle and an axis-aligned box.
bool triangle_box_overlap(const Triangle& t, const Eigen::Vector3d& box_min, const Eigen::Vector3d& box_max);

/// Bounding volume hierarchy over the triangles of a mesh. Queries are exact:
/// the tree only prunes, it never approximates.
class MeshIndex {
public:
    explicit MeshIndex(const TriangleMesh& mesh);

    struct Hit {
        double distance = 0.0;
        std::size_t triangle = 0;
    };
    struct Closest {
        double distance = 0.0;
        Eigen::Vector3d point = Eigen::Vector3d::Zero();
        std::size_t triangle = 0;
    };

    /// Nearest hit along a unit-length direction within (0, max_range].
    std::optional<Hit> raycast(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir, double max_range) const;
    /// Unsigned distance to the closest triangle. Empty mesh yields +inf.
    Closest closest(const Eigen::Vector3d& p) const;
    double distance(const Eigen::Vector3d& p) const { return closest(p).distance; }

    std::size_t size() const { return tris_.size(); }
    const Triangle& triangle(std::size_t i) const { return tris_[i]; }

private:
    struct Node {
        Eigen::Vector3d lo, hi;
        std::uint32_t begin = 0, end = 0;
        std::int32_t left = -1, right = -1;
    };

    std::int32_t build(std::uint32_t begin, std::uint32_t end);

    std::vector<Triangle> tris_;
    std::vector<std::size_t> ids_;
    std::vector<Node> nodes_;
};

}  // namespace bimslam
