#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "radarseg4d/pointcloud.hpp"

using namespace radarseg4d;

namespace {

std::string header(std::size_t n) {
    return "# .PCD v0.7\nVERSION 0.7\nFIELDS x y z doppler power\nSIZE 4 4 4 4 4\nTYPE F F F F F\n"
           "COUNT 1 1 1 1 1\nWIDTH " + std::to_string(n) + "\nHEIGHT 1\nVIEWPOINT 0 0 0 1 0 0 0\nPOINTS " +
           std::to_string(n) + "\nDATA ascii\n";
}

std::size_t error_line(const std::string& text) {
    try {
        parse_pcd(text);
    } catch (const PcdError& e) {
        return e.line();
    }
    return 0;
}

}  // namespace

TEST(Pcd, EmptyCloud) {
    const PointCloud c = parse_pcd(header(0));
    EXPECT_TRUE(c.points.empty());
}

TEST(Pcd, SingleRow) {
    const PointCloud c = parse_pcd(header(1) + "1.0 0.0 0.0 0.0 63.0\n");
    ASSERT_EQ(c.points.size(), 1u);
    EXPECT_EQ(c.points[0].x, 1.0f);
    EXPECT_EQ(c.points[0].power, 63.0f);
}

TEST(Pcd, RoundTripIsBitExact) {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<float> u(-1e4f, 1e4f);
    std::uniform_int_distribution<int> e(-30, 30);
    PointCloud c;
    for (int i = 0; i < 1000; ++i) {
        c.points.push_back({std::ldexp(u(rng), e(rng)), u(rng), std::ldexp(u(rng), e(rng)), u(rng), u(rng)});
    }
    const PointCloud back = parse_pcd(serialize_pcd(c));
    ASSERT_EQ(back.points.size(), c.points.size());
    for (std::size_t i = 0; i < c.points.size(); ++i) {
        ASSERT_EQ(std::memcmp(&back.points[i], &c.points[i], sizeof(RadarPoint)), 0) << i;
    }
}

TEST(Pcd, ErrorsNameTheLine) {
    EXPECT_EQ(error_line(header(2) + "1 2 3 4 5\n1 2 3 4\n"), 13u);         // short row
    EXPECT_EQ(error_line(header(1) + "1 2 nan 4 5\n"), 12u);                // non-finite
    EXPECT_EQ(error_line(header(1) + "1 2 3 4 5 6\n"), 12u);                // extra field
    EXPECT_EQ(error_line(header(2) + "1 2 3 4 5\n"), 12u);                  // missing row: last line read
    std::string bad = header(1);
    bad.replace(bad.find("FIELDS x y z doppler power"), 26, "FIELDS x y z power doppler");
    EXPECT_EQ(error_line(bad + "1 2 3 4 5\n"), 3u);
    bad = header(1);
    bad.replace(bad.find("DATA ascii"), 10, "DATA binary");
    EXPECT_EQ(error_line(bad + "1 2 3 4 5\n"), 11u);
    EXPECT_GT(error_line(header(1) + "1 2 3 4 5\n9 9 9 9 9\n"), 0u);        // trailing data
}

TEST(Pcd, ArbitraryBytesNeverCrash) {
    std::mt19937_64 rng(7);
    const std::string valid = header(3) + "1 2 3 4 70\n5 6 7 8 80\n9 10 11 12 90\n";
    std::uniform_int_distribution<int> byte(0, 255);
    for (int trial = 0; trial < 2000; ++trial) {
        std::string s = valid;
        std::uniform_int_distribution<std::size_t> pos(0, s.size() - 1);
        const int edits = 1 + trial % 4;
        for (int k = 0; k < edits; ++k) s[pos(rng)] = static_cast<char>(byte(rng));
        try {
            parse_pcd(s);
        } catch (const PcdError&) {
        }
    }
    for (int trial = 0; trial < 500; ++trial) {
        std::string s(trial % 200, '\0');
        for (char& c : s) c = static_cast<char>(byte(rng));
        try {
            parse_pcd(s);
        } catch (const PcdError&) {
        }
    }
    SUCCEED();
}

TEST(Pcd, FileTimestamp) {
    oracle::TempDir dir("pcd");
    PointCloud c;
    c.timestamp_ns = 1234567890123;
    c.points.push_back({1, 2, 3, 4, 100});
    const auto path = dir.path / timestamp_filename(c.timestamp_ns, ".pcd");
    write_pcd_file(path, c);
    EXPECT_EQ(read_pcd_file(path), c);
    EXPECT_FALSE(timestamp_from_filename("abc.pcd").has_value());
}

TEST(Spherical, OnAxisAndZenith) {
    const SphericalPoint a = to_spherical(RadarPoint{1, 0, 0, 0, 63});
    EXPECT_DOUBLE_EQ(a.range, 1.0);
    EXPECT_DOUBLE_EQ(a.azimuth, 0.0);
    EXPECT_DOUBLE_EQ(a.elevation, 0.0);
    const SphericalPoint z = to_spherical(RadarPoint{0, 0, 2, 0, 63});
    EXPECT_DOUBLE_EQ(z.range, 2.0);
    EXPECT_DOUBLE_EQ(z.elevation, std::numbers::pi / 2);
    const SphericalPoint o = to_spherical(RadarPoint{0, 0, 0, 1.5f, 70});
    EXPECT_EQ(o.range, 0.0);
    EXPECT_EQ(o.azimuth, 0.0);
    EXPECT_EQ(o.elevation, 0.0);
    EXPECT_EQ(o.doppler, 1.5);
    EXPECT_EQ(o.power, 70.0);
}

TEST(Spherical, InverseRecoversInput) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<float> u(-40.0f, 40.0f);
    for (int i = 0; i < 100; ++i) {
        const RadarPoint p{u(rng), u(rng), u(rng), 0, 80};
        const auto xyz = to_cartesian(to_spherical(p));
        const double norm = std::sqrt(double(p.x) * p.x + double(p.y) * p.y + double(p.z) * p.z);
        EXPECT_LE(std::abs(xyz[0] - p.x), 1e-9 * norm);
        EXPECT_LE(std::abs(xyz[1] - p.y), 1e-9 * norm);
        EXPECT_LE(std::abs(xyz[2] - p.z), 1e-9 * norm);
    }
}

TEST(ValidateCloud, Counts) {
    const FieldOfView fov;
    const CloudReport empty = validate_cloud(PointCloud{}, fov);
    EXPECT_EQ(empty.total, 0u);
    for (ViewId v : kAllViews) EXPECT_EQ(empty.inside(v), 0u);

    PointCloud one;
    one.points.push_back({10, 0, 0, 0, 80});
    const CloudReport r1 = validate_cloud(one, fov);
    for (ViewId v : kAllViews) EXPECT_EQ(r1.inside(v), 1u) << view_name(v);

    PointCloud far;
    far.points.push_back({100, 0, 0, 0, 200});
    const CloudReport r2 = validate_cloud(far, fov);
    EXPECT_EQ(r2.outside(Axis::Range), 1u);
    EXPECT_EQ(r2.power_out_of_range, 1u);
    EXPECT_EQ(r2.inside(ViewId::EA), 1u);
    EXPECT_EQ(r2.inside(ViewId::ER), 0u);
    EXPECT_EQ(r2.inside(ViewId::RA), 0u);
    EXPECT_EQ(r2.inside(ViewId::DA), 1u);
}
