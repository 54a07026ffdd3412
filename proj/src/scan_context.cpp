#include "bimslam/scan_context.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <numeric>

#include "bimslam/binary_io.hpp"
#include "bimslam/error.hpp"

namespace bimslam {

namespace {
constexpr char kDescMagic[8] = {'S', 'C', 'D', 'E', 'S', 'C', '0', '1'};
constexpr double kTwoPi = 2.0 * std::numbers::pi;

Eigen::VectorXf ring_key_of(const Eigen::MatrixXf& m) {
    Eigen::VectorXf key(m.rows());
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        key[r] = static_cast<float>((m.row(r).array() != 0.0f).count()) / static_cast<float>(m.cols());
    }
    return key;
}
}  // namespace

Descriptor compute_descriptor(const PointCloud& cloud, const ScanContextParams& params) {
    Descriptor d;
    d.max_radius = params.max_radius;
    d.matrix = Eigen::MatrixXf::Zero(params.rings, params.sectors);
    const double ring_width = params.max_radius / params.rings;
    const double sector_width = kTwoPi / params.sectors;
    for (const Point& p : cloud.points) {
        const double x = p.x();
        const double y = p.y();
        const double range = std::hypot(x, y);
        if (range >= params.max_radius) continue;
        double az = std::atan2(y, x);
        if (az < 0.0) az += kTwoPi;
        const int ring = std::min(params.rings - 1, static_cast<int>(range / ring_width));
        const int sector = std::min(params.sectors - 1, static_cast<int>(az / sector_width));
        const float h = std::max(0.0f, static_cast<float>(p.z() + params.sensor_height));
        float& cell = d.matrix(ring, sector);
        cell = std::max(cell, h);
    }
    d.ring_key = ring_key_of(d.matrix);
    return d;
}

Descriptor shift_columns(const Descriptor& d, int shift) {
    Descriptor out = d;
    const int n = d.sectors();
    for (int c = 0; c < n; ++c) out.matrix.col(((c + shift) % n + n) % n) = d.matrix.col(c);
    return out;
}

DescriptorMatch descriptor_distance(const Descriptor& a, const Descriptor& b) {
    if (a.matrix.rows() != b.matrix.rows() || a.matrix.cols() != b.matrix.cols()) {
        throw DimensionMismatch("descriptor shapes differ");
    }
    const Eigen::Index n = a.matrix.cols();
    Eigen::VectorXd na(n), nb(n);
    for (Eigen::Index c = 0; c < n; ++c) {
        na[c] = a.matrix.col(c).cast<double>().squaredNorm();
        nb[c] = b.matrix.col(c).cast<double>().squaredNorm();
    }
    DescriptorMatch best;
    best.distance = 1.0;
    best.shift = 0;
    bool found = false;
    for (Eigen::Index s = 0; s < n; ++s) {
        double sum = 0.0;
        std::size_t count = 0;
        for (Eigen::Index c = 0; c < n; ++c) {
            const Eigen::Index cb = (c + s) % n;
            if (na[c] == 0.0 || nb[cb] == 0.0) continue;
            const double cos = a.matrix.col(c).cast<double>().dot(b.matrix.col(cb).cast<double>()) / std::sqrt(na[c] * nb[cb]);
            sum += 1.0 - cos;
            ++count;
        }
        if (count == 0) continue;
        const double dist = std::clamp(sum / static_cast<double>(count), 0.0, 1.0);
        if (!found || dist < best.distance) {
            best = {dist, static_cast<int>(s)};
            found = true;
        }
    }
    return best;
}

double shift_to_yaw(int shift, int sectors) {
    double yaw = -kTwoPi * shift / sectors;
    if (yaw <= -std::numbers::pi) yaw += kTwoPi;
    return yaw;
}

std::vector<Candidate> query(const std::vector<Descriptor>& db, const Descriptor& probe, const QueryParams& params) {
    std::vector<std::pair<double, std::size_t>> keyed;
    keyed.reserve(db.size());
    for (std::size_t i = 0; i < db.size(); ++i) {
        if (db[i].ring_key.size() != probe.ring_key.size()) throw DimensionMismatch("ring key sizes differ");
        keyed.emplace_back((db[i].ring_key - probe.ring_key).cast<double>().norm(), i);
    }
    std::sort(keyed.begin(), keyed.end());
    // Keep ties with the last retained key distance so exact duplicates are never cut.
    std::size_t keep = std::min(params.ring_key_neighbors, keyed.size());
    while (keep > 0 && keep < keyed.size() && keyed[keep].first == keyed[keep - 1].first) ++keep;

    std::vector<Candidate> out;
    for (std::size_t k = 0; k < keep; ++k) {
        const std::size_t i = keyed[k].second;
        const DescriptorMatch m = descriptor_distance(db[i], probe);
        const double sim = 1.0 - m.distance;
        if (sim >= params.sim_threshold) out.push_back({i, sim, m.shift});
    }
    std::sort(out.begin(), out.end(), [](const Candidate& x, const Candidate& y) {
        return x.similarity > y.similarity || (x.similarity == y.similarity && x.index < y.index);
    });
    if (out.size() > params.top_k) out.resize(params.top_k);
    return out;
}

void save_descriptor(const Descriptor& d, const std::filesystem::path& file) {
    std::ofstream os(file, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot write " + file.string());
    os.write(kDescMagic, sizeof(kDescMagic));
    binary::write_u32(os, static_cast<std::uint32_t>(d.rings()));
    binary::write_u32(os, static_cast<std::uint32_t>(d.sectors()));
    for (int r = 0; r < d.rings(); ++r) {
        for (int c = 0; c < d.sectors(); ++c) binary::write_f32(os, d.matrix(r, c));
    }
    for (int r = 0; r < d.rings(); ++r) binary::write_f32(os, d.ring_key[r]);
    if (!os) throw Error("write failed: " + file.string());
}

Descriptor load_descriptor(const std::filesystem::path& file, double max_radius) {
    std::ifstream is(file, std::ios::binary);
    if (!is) throw Error("cannot read " + file.string());
    char magic[8];
    if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kDescMagic, sizeof(magic)) != 0) {
        throw FormatError(file.string(), 0, "bad descriptor magic");
    }
    std::uint32_t rings = 0, sectors = 0;
    if (!binary::read_u32(is, rings) || !binary::read_u32(is, sectors) || rings == 0 || sectors == 0 ||
        rings > 4096 || sectors > 4096) {
        throw FormatError(file.string(), 0, "bad descriptor header");
    }
    Descriptor d;
    d.max_radius = max_radius;
    d.matrix.resize(rings, sectors);
    d.ring_key.resize(rings);
    for (std::uint32_t r = 0; r < rings; ++r) {
        for (std::uint32_t c = 0; c < sectors; ++c) {
            if (!binary::read_f32(is, d.matrix(r, c))) throw FormatError(file.string(), 0, "truncated matrix");
        }
    }
    for (std::uint32_t r = 0; r < rings; ++r) {
        if (!binary::read_f32(is, d.ring_key[r])) throw FormatError(file.string(), 0, "truncated ring key");
    }
    return d;
}

}  // namespace bimslam
