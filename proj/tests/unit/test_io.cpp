// Copyright 2026 The xsreg Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cstring>
#include <fstream>
#include <string>

#include "test_util.h"
#include "xsreg/core/error.h"
#include "xsreg/io/depth.h"
#include "xsreg/io/ply.h"
#include "xsreg/io/transform_io.h"
#include "xsreg/io/volume.h"

using namespace xsreg;
using namespace xsreg::io;

namespace {

void write_bytes(const std::filesystem::path &p, const std::string &bytes) {
    std::ofstream out(p, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::string le16(uint16_t v) {
    return std::string{static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
}

CameraIntrinsics small_camera(std::size_t w, std::size_t h) {
    CameraIntrinsics c;
    c.width = w;
    c.height = h;
    c.fx = c.fy = 100.0;
    c.cx = static_cast<double>(w) / 2;
    c.cy = static_cast<double>(h) / 2;
    return c;
}

ScalarVolume sample_volume(std::array<std::size_t, 3> dims, double spacing, const Vec3 &origin,
                           const std::function<double(const Vec3 &)> &f) {
    std::vector<double> values(dims[0] * dims[1] * dims[2]);
    for (std::size_t z = 0; z < dims[2]; ++z)
        for (std::size_t y = 0; y < dims[1]; ++y)
            for (std::size_t x = 0; x < dims[0]; ++x) {
                const Vec3 p = origin + spacing * Vec3(x, y, z);
                values[x + dims[0] * (y + dims[1] * z)] = f(p);
            }
    return ScalarVolume(dims, Vec3::Constant(spacing), origin, std::move(values));
}

bool same_as_float(const Vec3 &a, const Vec3 &b) {
    for (int d = 0; d < 3; ++d) {
        const float fa = static_cast<float>(a[d]);
        const float fb = static_cast<float>(b[d]);
        if (std::memcmp(&fa, &fb, sizeof(float)) != 0) return false;
    }
    return true;
}

}  // namespace

TEST(Reproject, PrincipalPointMapsToOpticalAxis) {
    auto cam = small_camera(4, 4);
    std::vector<uint16_t> d(16, 0);
    d[2 * 4 + 2] = 500;
    auto cloud = reproject_depth(DepthFrame(cam, d), 0.1, 2.0);
    ASSERT_EQ(cloud.size(), 1u);
    EXPECT_EQ(cloud.point(0), Vec3(0, 0, 0.5));
}

TEST(Reproject, ZeroDepthAndRangeFiltered) {
    auto cam = small_camera(3, 2);
    std::vector<uint16_t> d = {0, 100, 400, 0, 900, 2500};
    auto rc = reproject_depth_indexed(DepthFrame(cam, d), 0.3, 1.0);
    ASSERT_EQ(rc.cloud.size(), 2u);
    EXPECT_EQ(rc.pixel, (std::vector<std::size_t>{2, 4}));
    // Pixel 4 is (u=1, v=1).
    EXPECT_NEAR(rc.cloud.point(1).x(), (1 - 1.5) * 0.9 / 100.0, 1e-15);
    EXPECT_NEAR(rc.cloud.point(1).y(), (1 - 1.0) * 0.9 / 100.0, 1e-15);
    EXPECT_THROW(reproject_depth(DepthFrame(cam, d), 1.0, 1.0), PreconditionError);
    EXPECT_THROW(reproject_depth(DepthFrame(cam, d), -0.1, 1.0), PreconditionError);
}

TEST(Reproject, MalformedFrameRejected) {
    EXPECT_THROW(DepthFrame(small_camera(4, 4), std::vector<uint16_t>(15)), FormatError);
    auto bad = small_camera(4, 4);
    bad.cx = 4.0;
    EXPECT_THROW(DepthFrame(bad, std::vector<uint16_t>(16)), PreconditionError);
}

TEST(Reproject, InvertsProjectionWithinQuantisation) {
    std::mt19937_64 rng(21);
    CameraIntrinsics cam = small_camera(320, 240);
    cam.fx = 250;
    cam.fy = 260;
    std::uniform_real_distribution<double> uz(0.3, 1.5), uu(0.0, 319.4), uv(0.0, 239.4);
    for (int i = 0; i < 2000; ++i) {
        const double z = uz(rng);
        const Vec3 p((uu(rng) - cam.cx) * z / cam.fx, (uv(rng) - cam.cy) * z / cam.fy, z);
        const auto px = cam.project(p);
        ASSERT_TRUE(px.has_value());
        // Pixel centres sit at integer coordinates.
        const auto u = static_cast<std::size_t>(std::lround(px->x()));
        const auto v = static_cast<std::size_t>(std::lround(px->y()));
        std::vector<uint16_t> d(cam.width * cam.height, 0);
        d[v * cam.width + u] = static_cast<uint16_t>(std::lround(z / cam.depth_scale));
        auto cloud = reproject_depth(DepthFrame(cam, d), 0.2, 2.0);
        ASSERT_EQ(cloud.size(), 1u);
        const Vec3 q = cloud.point(0);
        ASSERT_LE(std::abs(q.z() - z), cam.depth_scale / 2 + 1e-12);
        ASSERT_LE(std::abs(q.x() - p.x()), z / cam.fx + 1e-12);
        ASSERT_LE(std::abs(q.y() - p.y()), z / cam.fy + 1e-12);
    }
}

TEST(DepthPair, DecodesLittleEndian) {
    auto dir = test::scratch_dir("depth_decode");
    write_bytes(dir / "f.json", R"({"width":2,"height":2,"fx":1,"fy":1,"cx":1,"cy":1,"depth_scale":0.001})");
    write_bytes(dir / "f.raw", le16(0) + le16(1000) + le16(2000) + le16(3000));
    auto frame = read_depth_pair(dir / "f.json", dir / "f.raw");
    EXPECT_EQ(frame.depth(), (std::vector<uint16_t>{0, 1000, 2000, 3000}));
    EXPECT_EQ(frame.valid_count(), 3u);
    auto cloud = reproject_depth(frame, 0.0, 10.0);
    ASSERT_EQ(cloud.size(), 3u);
    EXPECT_DOUBLE_EQ(cloud.point(0).z(), 1.0);
    EXPECT_DOUBLE_EQ(cloud.point(1).z(), 2.0);
    EXPECT_DOUBLE_EQ(cloud.point(2).z(), 3.0);
}

TEST(DepthPair, ShortRawReportsByteCounts) {
    auto dir = test::scratch_dir("depth_short");
    write_bytes(dir / "f.json", R"({"width":2,"height":2,"fx":1,"fy":1,"cx":1,"cy":1,"depth_scale":0.001})");
    write_bytes(dir / "f.raw", std::string(7, '\0'));
    try {
        read_depth_pair(dir / "f.json", dir / "f.raw");
        FAIL() << "expected FormatError";
    } catch (const FormatError &e) {
        EXPECT_NE(std::string(e.what()).find("expected 8 bytes, got 7"), std::string::npos) << e.what();
    }
}

TEST(DepthPair, MissingFieldIsFormatError) {
    auto dir = test::scratch_dir("depth_missing");
    write_bytes(dir / "f.json", R"({"width":2,"height":2,"fx":1,"fy":1,"cx":1})");
    write_bytes(dir / "f.raw", std::string(8, '\0'));
    EXPECT_THROW(read_depth_pair(dir / "f.json", dir / "f.raw"), FormatError);
}

TEST(DepthPair, RoundTrip) {
    auto dir = test::scratch_dir("depth_roundtrip");
    std::mt19937_64 rng(22);
    std::uniform_int_distribution<int> u(0, 65535);
    auto cam = small_camera(17, 9);
    std::vector<uint16_t> d(17 * 9);
    for (auto &v : d) v = static_cast<uint16_t>(u(rng));
    write_depth_pair(DepthFrame(cam, d), dir / "a.json", dir / "a.raw");
    auto back = read_depth_pair(dir / "a.json", dir / "a.raw");
    EXPECT_EQ(back.depth(), d);
    EXPECT_EQ(back.intrinsics().fx, cam.fx);
    EXPECT_EQ(back.intrinsics().cx, cam.cx);
}

TEST(Isosurface, SphereWithinHalfVoxelDiagonal) {
    const double spacing = 0.01;
    const Vec3 centre(0.013, -0.004, 0.021);
    auto vol = sample_volume({31, 31, 31}, spacing, Vec3::Constant(-0.15),
                             [&](const Vec3 &p) { return (p - centre).norm() - 0.1; });
    auto res = extract_isosurface_points(vol, 0.0);
    EXPECT_FALSE(res.iso_out_of_range);
    ASSERT_GT(res.cloud.size(), 500u);
    const double tol = 0.5 * spacing * std::sqrt(3.0);
    for (const auto &p : res.cloud.points()) ASSERT_NEAR((p - centre).norm(), 0.1, tol);
}

TEST(Isosurface, ConstantVolumeIsEmpty) {
    auto vol = sample_volume({4, 4, 4}, 0.1, Vec3::Zero(), [](const Vec3 &) { return 2.0; });
    auto res = extract_isosurface_points(vol, 1.0);
    EXPECT_TRUE(res.cloud.empty());
    EXPECT_TRUE(res.iso_out_of_range);
}

TEST(Isosurface, HalfSpaceIsExactPlane) {
    auto vol = sample_volume({6, 5, 9}, 0.0125, Vec3::Zero(), [](const Vec3 &p) { return p.z() - 0.05; });
    auto res = extract_isosurface_points(vol, 0.0);
    ASSERT_FALSE(res.cloud.empty());
    for (const auto &p : res.cloud.points()) ASSERT_NEAR(p.z(), 0.05, 1e-9);
}

TEST(Isosurface, ObliqueLinearFieldSatisfiesPlaneEquation) {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 10; ++trial) {
        const Vec3 n = test::random_unit(rng);
        const double c = std::uniform_real_distribution<double>(0.1, 0.2)(rng);
        auto vol = sample_volume({12, 12, 12}, 0.03, Vec3::Zero(), [&](const Vec3 &p) { return n.dot(p) - c; });
        auto res = extract_isosurface_points(vol, 0.0);
        for (const auto &p : res.cloud.points()) ASSERT_NEAR(n.dot(p) - c, 0.0, 1e-9);
        // No two emitted vertices coincide.
        for (std::size_t i = 0; i < res.cloud.size(); ++i)
            for (std::size_t j = i + 1; j < res.cloud.size(); ++j)
                ASSERT_GT((res.cloud.point(i) - res.cloud.point(j)).norm(), 1e-9);
    }
}

TEST(Isosurface, TooFewSamplesRejected) {
    auto vol = sample_volume({1, 4, 4}, 0.1, Vec3::Zero(), [](const Vec3 &p) { return p.y(); });
    EXPECT_THROW(extract_isosurface_points(vol, 0.1), PreconditionError);
}

TEST(Volume, FileRoundTrip) {
    auto dir = test::scratch_dir("volume_roundtrip");
    auto vol = sample_volume({3, 4, 5}, 0.5, Vec3(1, 2, 3), [](const Vec3 &p) { return p.x() + 2 * p.y() - p.z(); });
    write_volume(vol, dir / "v.json", dir / "v.raw");
    EXPECT_EQ(std::filesystem::file_size(dir / "v.raw"), 4u * 60u);
    auto back = read_volume(dir / "v.json", dir / "v.raw");
    EXPECT_EQ(back.dims(), vol.dims());
    EXPECT_EQ(back.origin(), vol.origin());
    for (std::size_t i = 0; i < 60; ++i) EXPECT_EQ(back.values()[i], static_cast<float>(vol.values()[i]));
}

TEST(Ply, BinaryRoundTripBitIdentical) {
    auto dir = test::scratch_dir("ply_binary");
    std::mt19937_64 rng(24);
    PointCloud c(test::random_points(rng, 1000, 3.0));
    write_ply(c, dir / "a.ply", true);
    auto back = read_ply(dir / "a.ply");
    ASSERT_EQ(back.size(), 1000u);
    EXPECT_FALSE(back.has_normals());
    for (std::size_t i = 0; i < c.size(); ++i) ASSERT_TRUE(same_as_float(back.point(i), c.point(i)));
}

TEST(Ply, AsciiRoundTripWithNormals) {
    auto dir = test::scratch_dir("ply_ascii");
    std::mt19937_64 rng(25);
    auto pts = test::random_points(rng, 200);
    std::vector<Vec3> nrm;
    for (std::size_t i = 0; i < pts.size(); ++i) nrm.push_back(test::random_unit(rng));
    PointCloud c(pts, nrm);
    write_ply(c, dir / "a.ply", false);
    write_ply(c, dir / "b.ply", true);
    auto a = read_ply(dir / "a.ply");
    auto b = read_ply(dir / "b.ply");
    ASSERT_TRUE(a.has_normals());
    for (std::size_t i = 0; i < c.size(); ++i) {
        ASSERT_TRUE(same_as_float(a.point(i), c.point(i)));
        ASSERT_EQ(a.point(i), b.point(i));
        ASSERT_LT((a.normal(i) - c.normal(i)).norm(), 1e-6);
    }
}

TEST(Ply, HandWrittenAscii) {
    auto dir = test::scratch_dir("ply_hand");
    write_bytes(dir / "h.ply",
                "ply\nformat ascii 1.0\ncomment three points\nelement vertex 3\n"
                "property float x\nproperty float y\nproperty float z\nend_header\n"
                "0 0 0\n1 0 0\n0.5 2 -1\n");
    auto c = read_ply(dir / "h.ply");
    ASSERT_EQ(c.size(), 3u);
    EXPECT_EQ(c.point(1), Vec3(1, 0, 0));
    EXPECT_EQ(c.point(2), Vec3(0.5, 2, -1));
}

TEST(Ply, TruncatedPayloadNamesOffset) {
    auto dir = test::scratch_dir("ply_truncated");
    const std::string header =
        "ply\nformat binary_little_endian 1.0\nelement vertex 5\n"
        "property float x\nproperty float y\nproperty float z\nend_header\n";
    // Three complete records then half of the fourth.
    write_bytes(dir / "t.ply", header + std::string(3 * 12 + 6, '\0'));
    try {
        read_ply(dir / "t.ply");
        FAIL() << "expected FormatError";
    } catch (const FormatError &e) {
        const std::string expect = "byte offset " + std::to_string(header.size() + 36);
        EXPECT_NE(std::string(e.what()).find(expect), std::string::npos) << e.what();
    }
}

TEST(Ply, MalformedInputsRejected) {
    auto dir = test::scratch_dir("ply_bad");
    write_bytes(dir / "a.ply", "plyx\n");
    EXPECT_THROW(read_ply(dir / "a.ply"), FormatError);
    write_bytes(dir / "b.ply", "ply\nformat binary_big_endian 1.0\nelement vertex 0\nend_header\n");
    EXPECT_THROW(read_ply(dir / "b.ply"), FormatError);
    write_bytes(dir / "c.ply",
                "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nend_header\n1 2\n");
    EXPECT_THROW(read_ply(dir / "c.ply"), FormatError);
    write_bytes(dir / "d.ply",
                "ply\nformat binary_little_endian 1.0\nelement face 1\nproperty list uchar int vertex_indices\n"
                "element vertex 1\nproperty float x\nproperty float y\nproperty float z\nend_header\n");
    try {
        read_ply(dir / "d.ply");
        FAIL();
    } catch (const FormatError &e) {
        EXPECT_NE(std::string(e.what()).find("unknown element layout"), std::string::npos);
    }
    EXPECT_THROW(read_ply(dir / "missing.ply"), FormatError);
}

TEST(TransformIo, JsonAndTextRoundTrip) {
    auto dir = test::scratch_dir("transform_io");
    std::mt19937_64 rng(26);
    auto t = test::random_transform(rng, 2.0);
    write_transform(t, dir / "t.json");
    write_transform(t, dir / "t.txt");
    EXPECT_EQ(read_transform(dir / "t.json").matrix(), t.matrix());
    EXPECT_EQ(read_transform(dir / "t.txt").matrix(), t.matrix());
    write_bytes(dir / "bad.txt", "1 0 0 0\n0 1 0 0\n0 0 1 0\n");
    EXPECT_THROW(read_transform(dir / "bad.txt"), FormatError);
}
