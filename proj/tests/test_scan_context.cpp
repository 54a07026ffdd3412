#include <cmath>
#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "bimslam/error.hpp"
#include "bimslam/scan_context.hpp"
#include "bimslam/simulator.hpp"
#include "fixtures.hpp"

using namespace bimslam;

namespace {

constexpr double kPi = 3.14159265358979323846;

PointCloud rotate_z(const PointCloud& c, double yaw) {
    return transform_cloud(c, Pose::from_xyz_yaw(0, 0, 0, yaw));
}

// Points placed at sector and ring centres so integer-sector rotations cannot change bins.
PointCloud centred_cloud(std::mt19937_64& rng, std::size_t n) {
    std::uniform_int_distribution<int> ring(0, 19), sector(0, 59);
    std::uniform_real_distribution<double> z(-0.4, 2.0);
    PointCloud c;
    for (std::size_t k = 0; k < n; ++k) {
        const double r = (ring(rng) + 0.5) * 0.5;
        const double a = (sector(rng) + 0.5) * 2.0 * kPi / 60.0;
        c.points.emplace_back(static_cast<float>(r * std::cos(a)), static_cast<float>(r * std::sin(a)),
                              static_cast<float>(z(rng)));
    }
    return c;
}

Descriptor random_descriptor(std::mt19937_64& rng) {
    Descriptor d;
    d.matrix = Eigen::MatrixXf::Zero(20, 60);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    for (int r = 0; r < 20; ++r)
        for (int c = 0; c < 60; ++c)
            if (u(rng) < 0.4f) d.matrix(r, c) = 3.0f * u(rng);
    d.ring_key = Eigen::VectorXf(20);
    for (int r = 0; r < 20; ++r) d.ring_key[r] = static_cast<float>((d.matrix.row(r).array() != 0.0f).count()) / 60.0f;
    return d;
}

}  // namespace

TEST(Descriptor, EmptyCloud) {
    const Descriptor d = compute_descriptor(PointCloud{});
    EXPECT_EQ(d.rings(), 20);
    EXPECT_EQ(d.sectors(), 60);
    EXPECT_TRUE((d.matrix.array() == 0.0f).all());
    EXPECT_TRUE((d.ring_key.array() == 0.0f).all());
}

TEST(Descriptor, SinglePointBinning) {
    PointCloud c;
    c.points.emplace_back(5.0f, 0.0f, 0.0f);
    const Descriptor d = compute_descriptor(c);
    EXPECT_EQ((d.matrix.array() != 0.0f).count(), 1);
    EXPECT_FLOAT_EQ(d.matrix(10, 0), 0.5f);
    EXPECT_FLOAT_EQ(d.ring_key[10], 1.0f / 60.0f);

    PointCloud far;
    far.points.emplace_back(11.0f, 0.0f, 0.0f);
    EXPECT_TRUE((compute_descriptor(far).matrix.array() == 0.0f).all());
}

TEST(Descriptor, DefaultRadiusIsTenMetres) {
    EXPECT_EQ(ScanContextParams{}.max_radius, 10.0);
    EXPECT_EQ(QueryParams{}.sim_threshold, 0.6);
}

TEST(Descriptor, MaxHeightAndClamp) {
    PointCloud c;
    c.points = {{1.0f, 0.1f, 0.2f}, {1.1f, 0.1f, 1.0f}, {3.0f, 0.0f, -2.0f}};
    const Descriptor d = compute_descriptor(c);
    EXPECT_FLOAT_EQ(d.matrix(2, 0), 1.5f);
    EXPECT_FLOAT_EQ(d.matrix(6, 0), 0.0f);
}

TEST(Distance, SelfAndShift) {
    std::mt19937_64 rng(31);
    const Descriptor d = random_descriptor(rng);
    const auto self = descriptor_distance(d, d);
    EXPECT_EQ(self.distance, 0.0);
    EXPECT_EQ(self.shift, 0);
    for (int k : {1, 7, 30, 59}) {
        const auto m = descriptor_distance(d, shift_columns(d, k));
        EXPECT_EQ(m.distance, 0.0);
        EXPECT_EQ(m.shift, k);
    }
}

TEST(Distance, DisjointSupportIsOne) {
    Descriptor a, b;
    a.matrix = Eigen::MatrixXf::Zero(20, 60);
    b.matrix = Eigen::MatrixXf::Zero(20, 60);
    a.matrix.row(0).setConstant(1.0f);
    b.matrix.row(5).setConstant(1.0f);
    a.ring_key = b.ring_key = Eigen::VectorXf::Zero(20);
    EXPECT_DOUBLE_EQ(descriptor_distance(a, b).distance, 1.0);
    Descriptor z = a;
    z.matrix.setZero();
    EXPECT_DOUBLE_EQ(descriptor_distance(z, b).distance, 1.0);
}

TEST(Distance, DimensionMismatch) {
    Descriptor a = compute_descriptor(PointCloud{});
    Descriptor b = compute_descriptor(PointCloud{}, {20, 30, 10.0, 0.5});
    EXPECT_THROW(descriptor_distance(a, b), DimensionMismatch);
}

TEST(Distance, ShiftToYawRecoversRotation) {
    // Rotating the cloud by +k sectors moves its columns forward by k; the
    // returned yaw maps b's scan back onto a's.
    std::mt19937_64 rng(32);
    const PointCloud c = centred_cloud(rng, 500);
    for (int k : {3, 15, 45}) {
        const Descriptor a = compute_descriptor(c);
        const Descriptor b = compute_descriptor(rotate_z(c, k * 2.0 * kPi / 60.0));
        const auto m = descriptor_distance(a, b);
        EXPECT_EQ(m.distance, 0.0);
        EXPECT_EQ(m.shift, k);
        const double yaw = shift_to_yaw(m.shift, 60);
        EXPECT_NEAR(std::remainder(yaw + k * 2.0 * kPi / 60.0, 2.0 * kPi), 0.0, 1e-12);
    }
}

TEST(Query, IdenticalAndRotatedProbe) {
    std::mt19937_64 rng(33);
    std::vector<Descriptor> db;
    for (int i = 0; i < 20; ++i) db.push_back(random_descriptor(rng));
    auto top = query(db, db[7]);
    ASSERT_FALSE(top.empty());
    EXPECT_EQ(top[0].index, 7u);
    EXPECT_DOUBLE_EQ(top[0].similarity, 1.0);

    const auto rotated = query(db, shift_columns(db[3], 12));
    ASSERT_FALSE(rotated.empty());
    EXPECT_EQ(rotated[0].index, 3u);
    EXPECT_EQ(rotated[0].shift, 12);

    QueryParams strict;
    strict.sim_threshold = 1.01;
    EXPECT_TRUE(query(db, db[7], strict).empty());
}

TEST(Query, ResultsSortedAndThresholded) {
    std::mt19937_64 rng(34);
    std::vector<Descriptor> db;
    for (int i = 0; i < 50; ++i) db.push_back(random_descriptor(rng));
    QueryParams qp;
    qp.sim_threshold = 0.0;
    qp.top_k = 50;
    qp.ring_key_neighbors = 50;
    const auto out = query(db, db[0], qp);
    for (std::size_t k = 1; k < out.size(); ++k) EXPECT_GE(out[k - 1].similarity, out[k].similarity);
    qp.sim_threshold = 0.6;
    for (const auto& c : query(db, db[0], qp)) EXPECT_GE(c.similarity, 0.6);
}

TEST(DescriptorFile, RoundTripAndErrors) {
    const auto dir = std::filesystem::temp_directory_path() / "bimslam_dsc";
    std::filesystem::create_directories(dir);
    std::mt19937_64 rng(35);
    const Descriptor d = random_descriptor(rng);
    save_descriptor(d, dir / "d.dsc");
    EXPECT_EQ(std::filesystem::file_size(dir / "d.dsc"), 8u + 8u + 4u * (20u * 60u + 20u));
    EXPECT_EQ(load_descriptor(dir / "d.dsc"), d);
    std::filesystem::resize_file(dir / "d.dsc", 100);
    EXPECT_THROW(load_descriptor(dir / "d.dsc"), FormatError);
}

TEST(ScanContextProperty, SymmetricDistance) {
    std::mt19937_64 rng(36);
    for (int k = 0; k < 200; ++k) {
        const Descriptor a = random_descriptor(rng);
        const Descriptor b = random_descriptor(rng);
        EXPECT_NEAR(descriptor_distance(a, b).distance, descriptor_distance(b, a).distance, 1e-12);
        EXPECT_GT(descriptor_distance(a, b).distance, 0.0);
    }
}

TEST(ScanContextProperty, IntegerSectorRotationsAreExact) {
    std::mt19937_64 rng(37);
    for (int trial = 0; trial < 50; ++trial) {
        const PointCloud c = centred_cloud(rng, 300);
        const int k = std::uniform_int_distribution<int>(0, 59)(rng);
        EXPECT_EQ(descriptor_distance(compute_descriptor(c), compute_descriptor(rotate_z(c, k * kPi / 30.0))).distance,
                  0.0);
    }
}

TEST(ScanContextProperty, SimulatedScanYawInvariance) {
    const BuildingModel m = fixtures::two_room_model();
    const MeshIndex index(m);
    const PointCloud c = raycast_scan(index, Pose::from_xyz_yaw(6, 5, 0.5, 0.0), LidarSpec{}, 1);
    const Descriptor a = compute_descriptor(c);
    for (int k = 1; k < 60; k += 4) {
        const double yaw = k * kPi / 30.0;
        EXPECT_LE(descriptor_distance(a, compute_descriptor(rotate_z(c, yaw))).distance, 0.05) << yaw;
    }
}

TEST(ScanContextProperty, DuplicateRecall) {
    std::mt19937_64 rng(38);
    for (int trial = 0; trial < 5; ++trial) {
        const std::size_t n = std::uniform_int_distribution<std::size_t>(10, 1000)(rng);
        std::vector<Descriptor> db;
        for (std::size_t i = 0; i < n; ++i) db.push_back(random_descriptor(rng));
        for (int q = 0; q < 20; ++q) {
            const std::size_t i = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
            const auto out = query(db, db[i]);
            bool found = false;
            for (const auto& c : out) found |= c.index == i;
            EXPECT_TRUE(found);
        }
    }
}
