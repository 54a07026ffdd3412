#include "bimslam/se3.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <sstream>

#include "bimslam/error.hpp"

namespace bimslam {

namespace {

constexpr double kSmallAngle = 1e-2;
constexpr double kGimbalMargin = 1e-6;

Eigen::Quaterniond canonical(Eigen::Quaterniond q) {
    q.normalize();
    if (q.w() < 0.0) q.coeffs() = -q.coeffs();
    return q;
}

}  // namespace

Pose::Pose(const Eigen::Vector3d& t, const Eigen::Quaterniond& q) : t_(t), q_(canonical(q)) {}

Pose Pose::from_matrix(const Eigen::Matrix4d& m) {
    return {m.block<3, 1>(0, 3), Eigen::Quaterniond(Eigen::Matrix3d(m.block<3, 3>(0, 0)))};
}

Pose Pose::from_xyz_yaw(double x, double y, double z, double yaw) {
    return {Eigen::Vector3d(x, y, z), Eigen::Quaterniond(Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()))};
}

Eigen::Matrix4d Pose::matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.block<3, 3>(0, 0) = rotation_matrix();
    m.block<3, 1>(0, 3) = t_;
    return m;
}

double Pose::yaw() const {
    const Eigen::Matrix3d r = rotation_matrix();
    return std::atan2(r(1, 0), r(0, 0));
}

Pose Pose::inverse() const {
    const Eigen::Quaterniond qi = q_.conjugate();
    return {-(qi * t_), qi};
}

Vector6d Twist::vector() const {
    Vector6d v;
    v << rho, phi;
    return v;
}

Twist Twist::from_vector(const Vector6d& v) {
    return {v.head<3>(), v.tail<3>()};
}

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
    Eigen::Matrix3d k;
    k << 0.0, -v.z(), v.y(),
         v.z(), 0.0, -v.x(),
         -v.y(), v.x(), 0.0;
    return k;
}

Pose compose(const Pose& a, const Pose& b) {
    return {a.rotation() * b.translation() + a.translation(), a.rotation() * b.rotation()};
}

Pose inverse(const Pose& p) { return p.inverse(); }

Pose between(const Pose& a, const Pose& b) {
    const Eigen::Quaterniond qa_inv = a.rotation().conjugate();
    return {qa_inv * (b.translation() - a.translation()), qa_inv * b.rotation()};
}

Pose exp(const Twist& v) {
    const double theta = v.phi.norm();
    const Eigen::Matrix3d k = skew(v.phi);
    double b;  // (1 - cos) / theta^2
    double c;  // (theta - sin) / theta^3
    Eigen::Quaterniond q;
    if (theta < kSmallAngle) {
        const double t2 = theta * theta;
        b = 0.5 - t2 / 24.0 + t2 * t2 / 720.0;
        c = 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0;
    } else {
        b = (1.0 - std::cos(theta)) / (theta * theta);
        c = (theta - std::sin(theta)) / (theta * theta * theta);
    }
    if (theta > 0.0) {
        q = Eigen::Quaterniond(Eigen::AngleAxisd(theta, v.phi / theta));
    } else {
        q = Eigen::Quaterniond::Identity();
    }
    const Eigen::Matrix3d jl = Eigen::Matrix3d::Identity() + b * k + c * k * k;
    return {jl * v.rho, q};
}

Twist log(const Pose& p) {
    const Eigen::Quaterniond& q = p.rotation();  // canonical, w >= 0
    const double sin_half = q.vec().norm();
    const double theta = 2.0 * std::atan2(sin_half, q.w());
    if (theta > std::numbers::pi - kGimbalMargin) {
        throw GimbalBoundary("log: rotation angle " + std::to_string(theta) + " rad is at the pi boundary");
    }
    Eigen::Vector3d phi;
    if (sin_half < 1e-12) {
        phi = 2.0 * q.vec() / q.w();
    } else {
        phi = theta * q.vec() / sin_half;
    }
    const Eigen::Matrix3d k = skew(phi);
    double d;
    if (theta < kSmallAngle) {
        d = 1.0 / 12.0 + theta * theta / 720.0 + theta * theta * theta * theta / 30240.0;
    } else {
        d = (1.0 - theta * std::sin(theta) / (2.0 * (1.0 - std::cos(theta)))) / (theta * theta);
    }
    const Eigen::Matrix3d jl_inv = Eigen::Matrix3d::Identity() - 0.5 * k + d * k * k;
    return {jl_inv * p.translation(), phi};
}

Pose retract(const Pose& p, const Vector6d& delta) {
    return compose(p, exp(Twist::from_vector(delta)));
}

double rotation_angle(const Eigen::Quaterniond& q) {
    return 2.0 * std::atan2(q.vec().norm(), std::abs(q.w()));
}

double translation_error_m(const Pose& a, const Pose& b) {
    return (a.translation() - b.translation()).norm();
}

double rotation_error_deg(const Pose& a, const Pose& b) {
    return rotation_angle(between(a, b).rotation()) * 180.0 / std::numbers::pi;
}

std::string format_pose(const Pose& p) {
    const auto& t = p.translation();
    const auto& q = p.rotation();
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%.9g %.9g %.9g %.9g %.9g %.9g %.9g", t.x(), t.y(), t.z(), q.x(), q.y(),
                  q.z(), q.w());
    return buf;
}

bool parse_pose(const std::string& text, Pose& out) {
    std::istringstream is(text);
    double v[7];
    for (double& x : v) {
        if (!(is >> x) || !std::isfinite(x)) return false;
    }
    const Eigen::Quaterniond q(v[6], v[3], v[4], v[5]);
    if (q.norm() < 1e-6) return false;
    out = Pose(Eigen::Vector3d(v[0], v[1], v[2]), q);
    return true;
}

std::ostream& operator<<(std::ostream& os, const Pose& p) { return os << format_pose(p); }

}  // namespace bimslam
