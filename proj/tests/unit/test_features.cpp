// Copyright 2026 The xsreg Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "fpfh_oracle.h"
#include "test_util.h"
#include "xsreg/core/error.h"
#include "xsreg/features/fpfh.h"

using namespace xsreg;
using namespace xsreg::features;

namespace {

// Points on a gently curved sheet with unit normals of random tilt.
PointCloud sheet_with_normals(std::mt19937_64 &rng, std::size_t n, double extent) {
    std::uniform_real_distribution<double> u(-extent, extent);
    std::vector<Vec3> pts, nrm;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = u(rng), y = u(rng);
        pts.emplace_back(x, y, 0.3 * x * x - 0.2 * x * y);
        nrm.push_back((Vec3(0, 0, 1) + 0.4 * test::random_unit(rng)).normalized());
    }
    return PointCloud(pts, nrm);
}

}  // namespace

TEST(PairFeatures, CoplanarPairIsZero) {
    const Vec3 n(0, 0, 1);
    auto f = pair_features(Vec3(0, 0, 0), n, Vec3(0.3, 0.1, 0), n);
    ASSERT_TRUE(f.has_value());
    EXPECT_NEAR(f->alpha, 0.0, 1e-15);
    EXPECT_NEAR(f->phi, 0.0, 1e-15);
    EXPECT_NEAR(f->theta, 0.0, 1e-15);
    EXPECT_NEAR(f->distance, std::sqrt(0.1), 1e-15);
}

TEST(PairFeatures, LineAlongNormalsIsDegenerate) {
    const Vec3 n(0, 0, 1);
    EXPECT_FALSE(pair_features(Vec3(0, 0, 0), n, Vec3(0, 0, 0.5), n).has_value());
    EXPECT_FALSE(pair_features(Vec3(1, 2, 3), n, Vec3(1, 2, 3), n).has_value());
}

TEST(PairFeatures, RangesAndArgumentOrderSymmetry) {
    std::mt19937_64 rng(41);
    for (int i = 0; i < 5000; ++i) {
        const Vec3 p1 = test::random_points(rng, 1)[0], p2 = test::random_points(rng, 1)[0];
        const Vec3 n1 = test::random_unit(rng), n2 = test::random_unit(rng);
        auto a = pair_features(p1, n1, p2, n2);
        auto b = pair_features(p2, n2, p1, n1);
        ASSERT_TRUE(a && b);
        EXPECT_EQ(a->alpha, b->alpha);
        EXPECT_EQ(a->phi, b->phi);
        EXPECT_EQ(a->theta, b->theta);
        EXPECT_GE(a->alpha, -1.0);
        EXPECT_LE(a->alpha, 1.0);
        EXPECT_GE(a->phi, -1.0);
        EXPECT_LE(a->phi, 1.0);
        EXPECT_GT(a->theta, -M_PI);
        EXPECT_LE(a->theta, M_PI);
    }
}

TEST(PairFeatures, TieResolvesByCoordinateOrder) {
    // Both normals perpendicular to the line: roles fall back to the lexicographic rule.
    const Vec3 n1 = Vec3(0, 1, 1).normalized(), n2 = Vec3(0, 1, -1).normalized();
    auto a = pair_features(Vec3(0, 0, 0), n1, Vec3(1, 0, 0), n2);
    auto b = pair_features(Vec3(1, 0, 0), n2, Vec3(0, 0, 0), n1);
    ASSERT_TRUE(a && b);
    EXPECT_EQ(a->theta, b->theta);
    EXPECT_EQ(a->alpha, b->alpha);
}

TEST(PairFeatures, InvariantUnderRigidMotion) {
    std::mt19937_64 rng(42);
    for (int i = 0; i < 2000; ++i) {
        const Vec3 p1 = test::random_points(rng, 1)[0], p2 = test::random_points(rng, 1)[0];
        const Vec3 n1 = test::random_unit(rng), n2 = test::random_unit(rng);
        const auto t = test::random_transform(rng);
        auto a = pair_features(p1, n1, p2, n2);
        auto b = pair_features(t.apply(p1), t.rotation() * n1, t.apply(p2), t.rotation() * n2);
        ASSERT_TRUE(a && b);
        EXPECT_NEAR(a->alpha, b->alpha, 1e-6);
        EXPECT_NEAR(a->phi, b->phi, 1e-6);
        EXPECT_NEAR(std::remainder(a->theta - b->theta, 2 * M_PI), 0.0, 1e-6);
    }
}

TEST(Fpfh, PlaneConcentratesInCentreBins) {
    std::vector<Vec3> pts, nrm;
    for (int i = 0; i < 20; ++i)
        for (int j = 0; j < 20; ++j) {
            pts.emplace_back(0.005 * i, 0.005 * j, 0.0);
            nrm.emplace_back(0, 0, 1);
        }
    FeatureParams fp;
    fp.feature_radius = 0.012;
    auto res = compute_fpfh(PointCloud(pts, nrm), fp);
    EXPECT_EQ(res.empty_count, 0u);
    for (const auto &d : res.descriptors) {
        EXPECT_NEAR(d[5], 100.0, 1e-9);
        EXPECT_NEAR(d[11 + 5], 100.0, 1e-9);
        EXPECT_NEAR(d[22 + 5], 100.0, 1e-9);
    }
}

TEST(Fpfh, IsolatedPointFlagged) {
    PointCloud c({Vec3(0, 0, 0), Vec3(0.01, 0, 0), Vec3(0, 0.01, 0.002), Vec3(5, 5, 5)},
                 {Vec3(0, 0, 1), Vec3(0, 0.6, 0.8), Vec3(0.6, 0, 0.8), Vec3(0, 0, 1)});
    FeatureParams fp;
    auto res = compute_fpfh(c, fp);
    EXPECT_TRUE(res.empty[3]);
    EXPECT_EQ(res.descriptors[3], FpfhDescriptor::Zero());
    EXPECT_FALSE(res.empty[0]);
    EXPECT_EQ(res.empty_count, 1u);
}

TEST(Fpfh, RequiresNormals) {
    try {
        compute_fpfh(PointCloud({Vec3::Zero(), Vec3::Ones()}), FeatureParams{});
        FAIL();
    } catch (const PreconditionError &e) {
        EXPECT_STREQ(e.what(), "normals required");
    }
}

TEST(Fpfh, BlocksSumToHundred) {
    std::mt19937_64 rng(43);
    auto c = sheet_with_normals(rng, 800, 0.1);
    auto res = compute_fpfh(c, FeatureParams{});
    for (std::size_t i = 0; i < c.size(); ++i) {
        if (res.empty[i]) continue;
        for (int b = 0; b < 3; ++b) ASSERT_NEAR(res.descriptors[i].segment<11>(11 * b).sum(), 100.0, 1e-6);
        ASSERT_TRUE(res.descriptors[i].allFinite());
        ASSERT_GE(res.descriptors[i].minCoeff(), 0.0);
    }
}

TEST(Fpfh, InvariantUnderRigidMotion) {
    std::mt19937_64 rng(44);
    auto c = sheet_with_normals(rng, 500, 0.08);
    FeatureParams fp;
    const auto base = compute_fpfh(c, fp);
    for (int trial = 0; trial < 20; ++trial) {
        const auto moved = compute_fpfh(apply_transform(c, test::random_transform(rng)), fp);
        for (std::size_t i = 0; i < c.size(); ++i) {
            const double l1 = (base.descriptors[i] - moved.descriptors[i]).lpNorm<1>();
            ASSERT_LE(l1, 1e-5 * base.descriptors[i].lpNorm<1>()) << "point " << i;
        }
    }
}

TEST(Fpfh, MatchesBruteForceReference) {
    std::mt19937_64 rng(45);
    for (int trial = 0; trial < 5; ++trial) {
        auto c = sheet_with_normals(rng, 200, 0.06);
        const double radius = 0.025;
        auto res = compute_fpfh(c, build_index(c), radius);
        const auto oracle = test::brute_force_fpfh(c, radius);
        for (std::size_t i = 0; i < c.size(); ++i) {
            for (int k = 0; k < kDescriptorSize; ++k) ASSERT_NEAR(res.descriptors[i][k], oracle.fpfh[i][k], 1e-9);
        }
        // Bin assignment of every pair agrees with the reference.
        for (const auto &pb : oracle.pair_bins) {
            auto f = pair_features(c.point(pb.i), c.normal(pb.i), c.point(pb.j), c.normal(pb.j));
            ASSERT_TRUE(f.has_value());
            ASSERT_EQ(feature_bins(*f), pb.bins);
        }
        auto spfh = compute_spfh(c, build_index(c), radius);
        for (std::size_t i = 0; i < c.size(); ++i) {
            for (int k = 0; k < kDescriptorSize; ++k) ASSERT_NEAR(spfh[i][k], oracle.spfh[i][k], 1e-9);
        }
    }
}
