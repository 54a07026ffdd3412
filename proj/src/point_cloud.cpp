#include "bimslam/point_cloud.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <tuple>

#include "bimslam/binary_io.hpp"
#include "bimslam/error.hpp"

namespace bimslam {

namespace {
constexpr char kCloudMagic[8] = {'P', 'C', 'X', 'Y', 'Z', '0', '0', '1'};
}

PointCloud transform_cloud(const PointCloud& cloud, const Pose& pose) {
    const Eigen::Matrix3d r = pose.rotation_matrix();
    const Eigen::Vector3d& t = pose.translation();
    PointCloud out;
    out.points.reserve(cloud.size());
    for (const Point& p : cloud.points) out.points.push_back((r * p.cast<double>() + t).cast<float>());
    return out;
}

void append(PointCloud& dst, const PointCloud& src) {
    dst.points.insert(dst.points.end(), src.points.begin(), src.points.end());
}

std::vector<Eigen::Vector3d> to_double(const PointCloud& cloud) {
    std::vector<Eigen::Vector3d> out;
    out.reserve(cloud.size());
    for (const Point& p : cloud.points) out.push_back(p.cast<double>());
    return out;
}

PointCloud voxel_downsample(const PointCloud& cloud, double leaf) {
    if (leaf <= 0.0) return cloud;
    using Key = std::tuple<std::int64_t, std::int64_t, std::int64_t>;
    std::map<Key, std::pair<Eigen::Vector3d, std::size_t>> cells;
    for (const Point& p : cloud.points) {
        const Key k{static_cast<std::int64_t>(std::floor(p.x() / leaf)),
                    static_cast<std::int64_t>(std::floor(p.y() / leaf)),
                    static_cast<std::int64_t>(std::floor(p.z() / leaf))};
        auto& cell = cells[k];
        if (cell.second == 0) cell.first.setZero();
        cell.first += p.cast<double>();
        ++cell.second;
    }
    PointCloud out;
    out.points.reserve(cells.size());
    for (const auto& [key, cell] : cells) {
        out.points.push_back((cell.first / static_cast<double>(cell.second)).cast<float>());
    }
    return out;
}

void save_cloud(const PointCloud& cloud, const std::filesystem::path& file) {
    std::ofstream os(file, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot write " + file.string());
    os.write(kCloudMagic, sizeof(kCloudMagic));
    binary::write_u32(os, static_cast<std::uint32_t>(cloud.size()));
    for (const Point& p : cloud.points) {
        binary::write_f32(os, p.x());
        binary::write_f32(os, p.y());
        binary::write_f32(os, p.z());
    }
    if (!os) throw Error("write failed: " + file.string());
}

PointCloud load_cloud(const std::filesystem::path& file) {
    std::ifstream is(file, std::ios::binary);
    if (!is) throw Error("cannot read " + file.string());
    char magic[8];
    if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kCloudMagic, sizeof(magic)) != 0) {
        throw FormatError(file.string(), 0, "bad cloud magic");
    }
    std::uint32_t count = 0;
    if (!binary::read_u32(is, count)) throw FormatError(file.string(), 0, "truncated header");
    PointCloud cloud;
    cloud.points.resize(count);
    for (Point& p : cloud.points) {
        if (!binary::read_f32(is, p.x()) || !binary::read_f32(is, p.y()) || !binary::read_f32(is, p.z())) {
            throw FormatError(file.string(), 0, "truncated point data");
        }
        if (!p.allFinite()) throw FormatError(file.string(), 0, "non-finite coordinate");
    }
    return cloud;
}

}  // namespace bimslam
