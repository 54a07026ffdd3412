#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include <Eigen/Core>

#include "bimslam/point_cloud.hpp"

namespace bimslam {

struct ScanContextParams {
    int rings = 20;
    int sectors = 60;
    double max_radius = 10.0;
    /// Added to z before max-binning so that empty cells (0) sit below every return.
    double sensor_height = 0.5;
};

/// Polar context: rings x sectors matrix of maximum shifted point height.
struct Descriptor {
    Eigen::MatrixXf matrix;   // rings x sectors
    Eigen::VectorXf ring_key; // per-ring fraction of nonzero cells
    double max_radius = 10.0;

    int rings() const { return static_cast<int>(matrix.rows()); }
    int sectors() const { return static_cast<int>(matrix.cols()); }
    bool operator==(const Descriptor& o) const {
        return matrix.rows() == o.matrix.rows() && matrix.cols() == o.matrix.cols() && matrix == o.matrix &&
               ring_key.size() == o.ring_key.size() && ring_key == o.ring_key;
    }
};

Descriptor compute_descriptor(const PointCloud& cloud, const ScanContextParams& params = {});

/// Descriptor with its columns cyclically moved `shift` sectors forward, the
/// effect of rotating the source cloud by shift * 360/sectors degrees about z.
Descriptor shift_columns(const Descriptor& d, int shift);

struct DescriptorMatch {
    double distance = 1.0;  // in [0, 1]
    int shift = 0;          // column shift of b that best matches a
};

/// Minimum over cyclic column shifts of the mean column cosine distance.
/// Throws DimensionMismatch when matrix shapes differ.
DescriptorMatch descriptor_distance(const Descriptor& a, const Descriptor& b);

/// Yaw (radians) of the relative rotation that maps the scan behind `b` onto
/// the scan behind `a`, given the best shift from descriptor_distance(a, b).
double shift_to_yaw(int shift, int sectors);

struct Candidate {
    std::size_t index = 0;
    double similarity = 0.0;
    int shift = 0;
};

struct QueryParams {
    double sim_threshold = 0.6;
    std::size_t top_k = 10;
    std::size_t ring_key_neighbors = 10;
};

/// Ring-key prefilter then exact matching. Candidates with similarity
/// 1 - distance >= sim_threshold, sorted by similarity descending, then index.
std::vector<Candidate> query(const std::vector<Descriptor>& db, const Descriptor& probe,
                             const QueryParams& params = {});

/// `.dsc`: magic "SCDESC01", u32 rings, u32 sectors, float32 matrix
/// row-major, float32 ring_key; little-endian.
void save_descriptor(const Descriptor& d, const std::filesystem::path& file);
Descriptor load_descriptor(const std::filesystem::path& file, double max_radius = 10.0);

}  // namespace bimslam
