#pragma once

#include <iosfwd>
#include <string>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace bimslam {

using Vector6d = Eigen::Matrix<double, 6, 1>;
using Matrix6d = Eigen::Matrix<double, 6, 6>;

/// Rigid body transform. The quaternion is renormalized on construction and
/// kept in the w >= 0 hemisphere, so q and -q produce the same Pose.
class Pose {
public:
    Pose() = default;
    Pose(const Eigen::Vector3d& t, const Eigen::Quaterniond& q);
    explicit Pose(const Eigen::Vector3d& t) : t_(t) {}

    static Pose identity() { return {}; }
    static Pose from_matrix(const Eigen::Matrix4d& m);
    /// Planar pose: translation (x, y, z) and rotation about +z.
    static Pose from_xyz_yaw(double x, double y, double z, double yaw);

    const Eigen::Vector3d& translation() const { return t_; }
    const Eigen::Quaterniond& rotation() const { return q_; }
    Eigen::Matrix3d rotation_matrix() const { return q_.toRotationMatrix(); }
    Eigen::Matrix4d matrix() const;
    double yaw() const;

    Pose inverse() const;
    Eigen::Vector3d operator*(const Eigen::Vector3d& p) const { return q_ * p + t_; }

private:
    Eigen::Vector3d t_ = Eigen::Vector3d::Zero();
    Eigen::Quaterniond q_ = Eigen::Quaterniond::Identity();
};

/// Tangent vector of SE(3), translational part first.
struct Twist {
    Eigen::Vector3d rho = Eigen::Vector3d::Zero();
    Eigen::Vector3d phi = Eigen::Vector3d::Zero();

    Vector6d vector() const;
    static Twist from_vector(const Vector6d& v);
};

/// a ⊕ b, the homogeneous product T(a)·T(b).
Pose compose(const Pose& a, const Pose& b);
Pose inverse(const Pose& p);
/// Pose of b expressed in the frame of a: inverse(a) ⊕ b.
Pose between(const Pose& a, const Pose& b);

Pose exp(const Twist& v);
/// Throws GimbalBoundary when the rotation angle is within 1e-6 of pi.
Twist log(const Pose& p);

/// Retraction used by the solver: p ⊕ exp(delta).
Pose retract(const Pose& p, const Vector6d& delta);

double translation_error_m(const Pose& a, const Pose& b);
/// Angle of the rotation of between(a, b), in [0, 180].
double rotation_error_deg(const Pose& a, const Pose& b);
/// Angle of a rotation quaternion, radians in [0, pi].
double rotation_angle(const Eigen::Quaterniond& q);

Eigen::Matrix3d skew(const Eigen::Vector3d& v);

/// `x y z qx qy qz qw`, 9 significant digits.
std::string format_pose(const Pose& p);
/// Parses the seven fields written by format_pose; returns false on failure.
bool parse_pose(const std::string& text, Pose& out);

std::ostream& operator<<(std::ostream& os, const Pose& p);

}  // namespace bimslam
