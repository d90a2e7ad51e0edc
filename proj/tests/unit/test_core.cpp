// Copyright 2026 The xsreg Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <map>
#include <set>
#include <tuple>

#include "test_util.h"
#include "xsreg/core/error.h"
#include "xsreg/core/geometry.h"
#include "xsreg/core/kdtree.h"
#include "xsreg/core/normals.h"
#include "xsreg/core/sampling.h"

using namespace xsreg;
using xsreg::test::random_points;
using xsreg::test::random_transform;

namespace {

// Exhaustive reference ordering by (distance^2, index).
std::vector<std::pair<double, std::size_t>> brute_sorted(const std::vector<Vec3> &pts, const Vec3 &q) {
    std::vector<std::pair<double, std::size_t>> all;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        double s = 0.0;
        for (int d = 0; d < 3; ++d) s += (q[d] - pts[i][d]) * (q[d] - pts[i][d]);
        all.emplace_back(s, i);
    }
    std::sort(all.begin(), all.end());
    return all;
}

}  // namespace

TEST(PointCloud, RejectsNonFiniteAndNonUnitNormals) {
    EXPECT_THROW(PointCloud({Vec3(0, 0, NAN)}), PreconditionError);
    EXPECT_THROW(PointCloud({Vec3(0, 0, 0)}, {Vec3(0, 0, 2)}), PreconditionError);
    EXPECT_THROW(PointCloud({Vec3(0, 0, 0)}, {}), PreconditionError);
    PointCloud ok({Vec3(1, 2, 3)}, {Vec3(0, 1, 0)});
    EXPECT_TRUE(ok.has_normals());
    EXPECT_FALSE(PointCloud({Vec3(1, 2, 3)}).has_normals());
}

TEST(RigidTransform, RejectsImproperRotation) {
    Mat3 reflect = Mat3::Identity();
    reflect(0, 0) = -1;
    EXPECT_THROW(RigidTransform(reflect, Vec3::Zero()), PreconditionError);
    EXPECT_THROW(RigidTransform(2.0 * Mat3::Identity(), Vec3::Zero()), PreconditionError);
}

TEST(ApplyTransform, IdentityLeavesCloudUnchanged) {
    std::mt19937_64 rng(1);
    PointCloud c(random_points(rng, 20));
    PointCloud out = apply_transform(c, RigidTransform::identity());
    for (std::size_t i = 0; i < c.size(); ++i) EXPECT_EQ(out.point(i), c.point(i));
}

TEST(ApplyTransform, QuarterTurnAboutZ) {
    PointCloud c({Vec3(1, 0, 0)}, {Vec3(1, 0, 0)});
    auto t = RigidTransform::from_axis_angle(Vec3::UnitZ(), M_PI / 2);
    PointCloud out = apply_transform(c, t);
    EXPECT_NEAR((out.point(0) - Vec3(0, 1, 0)).norm(), 0.0, 1e-9);
    EXPECT_NEAR((out.normal(0) - Vec3(0, 1, 0)).norm(), 0.0, 1e-9);
}

TEST(ApplyTransform, PreservesDistanceMatrix) {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        PointCloud c(random_points(rng, 50));
        PointCloud out = apply_transform(c, random_transform(rng));
        for (std::size_t i = 0; i < c.size(); ++i) {
            for (std::size_t j = 0; j < c.size(); ++j) {
                const double before = (c.point(i) - c.point(j)).norm();
                const double after = (out.point(i) - out.point(j)).norm();
                ASSERT_NEAR(before, after, 1e-9);
            }
        }
    }
}

TEST(Compose, InverseOfIdentityIsIdentity) {
    auto inv = invert(RigidTransform::identity());
    EXPECT_TRUE(inv.matrix().isApprox(Mat4::Identity(), 1e-15));
}

TEST(Compose, TimesInverseIsIdentity) {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 100; ++i) {
        auto t = random_transform(rng, 5.0);
        EXPECT_LT((compose(t, invert(t)).matrix() - Mat4::Identity()).cwiseAbs().maxCoeff(), 1e-9);
        EXPECT_LT((compose(invert(t), t).matrix() - Mat4::Identity()).cwiseAbs().maxCoeff(), 1e-9);
    }
}

TEST(Compose, ZRotationsAdd) {
    auto a = RigidTransform::from_axis_angle(Vec3::UnitZ(), test::deg2rad(30));
    auto b = RigidTransform::from_axis_angle(Vec3::UnitZ(), test::deg2rad(60));
    auto c = RigidTransform::from_axis_angle(Vec3::UnitZ(), test::deg2rad(90));
    EXPECT_LT((compose(a, b).matrix() - c.matrix()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Compose, AppliesRightOperandFirstAndIsAssociative) {
    std::mt19937_64 rng(4);
    for (int i = 0; i < 100; ++i) {
        auto a = random_transform(rng), b = random_transform(rng), c = random_transform(rng);
        Vec3 p = random_points(rng, 1)[0];
        EXPECT_LT((compose(a, b).apply(p) - a.apply(b.apply(p))).norm(), 1e-9);
        EXPECT_LT((compose(compose(a, b), c).matrix() - compose(a, compose(b, c)).matrix())
                          .cwiseAbs()
                          .maxCoeff(),
                  1e-9);
        EXPECT_LT((compose(a, RigidTransform::identity()).matrix() - a.matrix()).cwiseAbs().maxCoeff(),
                  1e-15);
    }
}

TEST(KdTree, SmallExamples) {
    std::vector<Vec3> pts = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0)};
    NeighborIndex index{std::span<const Vec3>(pts)};
    auto nn = index.knn(Vec3(0.4, 0, 0), 1);
    ASSERT_EQ(nn.size(), 1u);
    EXPECT_EQ(nn[0].index, 0u);
    auto within = index.radius_search(Vec3(0, 0, 0), 1.5);
    ASSERT_EQ(within.size(), 2u);
    EXPECT_EQ(within[0].index, 0u);
    EXPECT_EQ(within[1].index, 1u);
    EXPECT_EQ(index.knn(Vec3(0, 0, 0), 10).size(), 3u);
}

TEST(KdTree, EmptyIndexThrows) {
    NeighborIndex empty;
    EXPECT_THROW(empty.knn(Vec3::Zero(), 1), PreconditionError);
    EXPECT_THROW(empty.radius_search(Vec3::Zero(), 1.0), PreconditionError);
}

TEST(KdTree, TiesResolveToLowerIndex) {
    // Four points equidistant from the query, inserted in scrambled order.
    std::vector<Vec3> pts = {Vec3(0, 1, 0), Vec3(1, 0, 0), Vec3(0, -1, 0), Vec3(-1, 0, 0), Vec3(5, 5, 5)};
    NeighborIndex index{std::span<const Vec3>(pts), 1};
    auto nn = index.knn(Vec3::Zero(), 2);
    EXPECT_EQ(nn[0].index, 0u);
    EXPECT_EQ(nn[1].index, 1u);
    // Duplicate coordinates.
    std::vector<Vec3> dup(40, Vec3(1, 1, 1));
    NeighborIndex dindex{std::span<const Vec3>(dup), 4};
    auto d = dindex.knn(Vec3::Zero(), 3);
    EXPECT_EQ(d[0].index, 0u);
    EXPECT_EQ(d[1].index, 1u);
    EXPECT_EQ(d[2].index, 2u);
}

TEST(KdTree, MatchesExhaustiveSearch) {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> kdist(1, 20);
    std::uniform_real_distribution<double> rdist(0.05, 0.6);
    for (int inst = 0; inst < 10; ++inst) {
        auto pts = random_points(rng, 1000);
        NeighborIndex index{std::span<const Vec3>(pts)};
        for (int q = 0; q < 100; ++q) {
            const Vec3 query = random_points(rng, 1, 1.2)[0];
            const auto ref = brute_sorted(pts, query);
            const std::size_t k = inst == 0 ? 8 : static_cast<std::size_t>(kdist(rng));
            const auto got = index.knn(query, k);
            ASSERT_EQ(got.size(), k);
            for (std::size_t i = 0; i < k; ++i) ASSERT_EQ(got[i].index, ref[i].second);
            const double r = rdist(rng);
            const auto in_r = index.radius_search(query, r);
            std::vector<std::size_t> expect;
            for (const auto &[d2, i] : ref) {
                if (d2 <= r * r) expect.push_back(i);
            }
            ASSERT_EQ(in_r.size(), expect.size());
            for (std::size_t i = 0; i < expect.size(); ++i) ASSERT_EQ(in_r[i].index, expect[i]);
            ASSERT_EQ(index.count_within(query, r, 1000000), expect.size());
            ASSERT_EQ(index.count_within(query, r, 3), std::min<std::size_t>(3, expect.size()));
        }
    }
}

TEST(KdTree, HighDimensionalMatchesExhaustiveSearch) {
    std::mt19937_64 rng(6);
    using P = KdTree<33>::Point;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<P> pts(300);
    for (auto &p : pts) {
        for (int d = 0; d < 33; ++d) p[d] = u(rng);
    }
    KdTree<33> index{std::span<const P>(pts)};
    for (int q = 0; q < 50; ++q) {
        P query;
        for (int d = 0; d < 33; ++d) query[d] = u(rng);
        std::size_t best = 0;
        double best_d = 1e300;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            double s = 0.0;
            for (int d = 0; d < 33; ++d) s += (query[d] - pts[i][d]) * (query[d] - pts[i][d]);
            if (s < best_d) best_d = s, best = i;
        }
        EXPECT_EQ(index.nearest(query).index, best);
        EXPECT_EQ(index.knn(query, 1)[0].index, best);
    }
}

TEST(Normals, PlaneFacesViewpoint) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<Vec3> pts;
    for (int i = 0; i < 100; ++i) pts.emplace_back(u(rng), u(rng), 0.0);
    auto est = estimate_normals(PointCloud(pts), 10, Vec3(0, 0, 5));
    EXPECT_EQ(est.degenerate_count, 0u);
    for (const auto &n : est.cloud.normals()) EXPECT_LT((n - Vec3::UnitZ()).norm(), 1e-6);
}

TEST(Normals, SphereFromCentreViewpointPointsInward) {
    std::mt19937_64 rng(8);
    std::vector<Vec3> pts;
    for (int i = 0; i < 500; ++i) pts.push_back(test::random_unit(rng));
    auto est = estimate_normals(PointCloud(pts), 12, Vec3::Zero());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        EXPECT_GE(est.cloud.normal(i).dot(-pts[i]), 0.0);
        EXPECT_GT(std::abs(est.cloud.normal(i).dot(pts[i])), 0.95);  // close to radial
    }
    auto out = estimate_normals_outward(PointCloud(pts), 12);
    for (std::size_t i = 0; i < pts.size(); ++i) EXPECT_GE(out.cloud.normal(i).dot(pts[i]), 0.0);
}

TEST(Normals, CoincidentPointsAreDegenerate) {
    std::vector<Vec3> pts(6, Vec3(0.3, -0.2, 1.0));
    auto est = estimate_normals(PointCloud(pts), 6, Vec3::Zero());
    EXPECT_EQ(est.degenerate_count, 6u);
    for (const auto &n : est.cloud.normals()) EXPECT_EQ(n, Vec3::UnitZ());
}

TEST(Normals, PreconditionsEnforced) {
    std::vector<Vec3> pts(5, Vec3::Zero());
    EXPECT_THROW(estimate_normals(PointCloud(pts), 2, Vec3::Zero()), PreconditionError);
    EXPECT_THROW(estimate_normals(PointCloud(pts), 6, Vec3::Zero()), PreconditionError);
}

TEST(Normals, CommuteWithRigidMotion) {
    std::mt19937_64 rng(9);
    // Smooth bumpy surface so every neighbourhood has a well-separated normal.
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<Vec3> pts;
    for (int i = 0; i < 400; ++i) {
        const double x = u(rng), y = u(rng);
        pts.emplace_back(x, y, 0.2 * std::sin(2 * x) * std::cos(y));
    }
    const Vec3 view(0.1, -0.2, 4.0);
    for (int trial = 0; trial < 10; ++trial) {
        auto t = random_transform(rng);
        auto a = estimate_normals(PointCloud(pts), 15, view).cloud;
        auto b = estimate_normals(apply_transform(PointCloud(pts), t), 15, t.apply(view)).cloud;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            ASSERT_LT((t.rotation() * a.normal(i) - b.normal(i)).norm(), 1e-6);
        }
    }
}

TEST(RandomSubsample, SmallCloudReturnedWhole) {
    std::mt19937_64 rng(10);
    PointCloud c(random_points(rng, 5));
    auto s = random_subsample(c, 10, 1);
    ASSERT_EQ(s.size(), 5u);
    for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(s.point(i), c.point(i));
}

TEST(RandomSubsample, TenThousandMembersOfInput) {
    std::mt19937_64 rng(11);
    PointCloud c(random_points(rng, 25000));
    auto idx = random_subsample_indices(c.size(), 10000, 42);
    ASSERT_EQ(idx.size(), 10000u);
    EXPECT_TRUE(std::is_sorted(idx.begin(), idx.end()));
    EXPECT_EQ(std::set<std::size_t>(idx.begin(), idx.end()).size(), 10000u);
    auto s = random_subsample(c, 10000, 42);
    for (std::size_t i = 0; i < idx.size(); ++i) EXPECT_EQ(s.point(i), c.point(idx[i]));
}

TEST(RandomSubsample, DeterministicPerSeed) {
    std::mt19937_64 rng(12);
    PointCloud c(random_points(rng, 1000));
    auto a = random_subsample(c, 100, 7);
    auto b = random_subsample(c, 100, 7);
    auto d = random_subsample(c, 100, 8);
    ASSERT_EQ(a.points(), b.points());
    EXPECT_NE(a.points(), d.points());
    EXPECT_THROW(random_subsample(c, 0, 1), PreconditionError);
}

TEST(RandomSubsample, UniformAcrossSeeds) {
    // 20 points, choose 5, 10k seeds: every point expected 2500 times.
    constexpr std::size_t kN = 20, kPick = 5, kTrials = 10000;
    std::vector<double> counts(kN, 0.0);
    for (std::size_t s = 0; s < kTrials; ++s) {
        for (auto i : random_subsample_indices(kN, kPick, derive_seed(99, s))) counts[i] += 1;
    }
    const double expected = static_cast<double>(kTrials * kPick) / kN;
    double chi2 = 0.0;
    for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
    boost::math::chi_squared dist(kN - 1);
    const double p = 1.0 - boost::math::cdf(dist, chi2);
    EXPECT_GT(p, 0.01) << "chi2=" << chi2;
}

TEST(VoxelDownsample, MergesCloseNeighbours) {
    PointCloud c({Vec3(0.0011, 0.002, 0.002), Vec3(0.0021, 0.002, 0.002)});
    auto out = voxel_downsample(c, 0.005);
    ASSERT_EQ(out.size(), 1u);
    EXPECT_LT((out.point(0) - Vec3(0.0016, 0.002, 0.002)).norm(), 1e-15);
}

TEST(VoxelDownsample, CoarseGridUnchanged) {
    std::vector<Vec3> pts;
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j)
            for (int k = 0; k < 5; ++k) pts.emplace_back(0.01 * i + 0.001, 0.01 * j + 0.001, 0.01 * k + 0.001);
    auto out = voxel_downsample(PointCloud(pts), 0.005);
    ASSERT_EQ(out.size(), pts.size());
    auto sorted = [](std::vector<Vec3> v) {
        std::sort(v.begin(), v.end(), [](const Vec3 &a, const Vec3 &b) {
            return std::tie(a.x(), a.y(), a.z()) < std::tie(b.x(), b.y(), b.z());
        });
        return v;
    };
    EXPECT_EQ(sorted(out.points()), sorted(pts));
}

TEST(VoxelDownsample, OneOutputPerOccupiedCell) {
    std::mt19937_64 rng(13);
    for (double voxel : {0.05, 0.13, 0.4}) {
        auto pts = random_points(rng, 3000);
        std::set<std::tuple<long, long, long>> cells;
        for (const auto &p : pts) {
            cells.emplace(static_cast<long>(std::floor(p.x() / voxel)), static_cast<long>(std::floor(p.y() / voxel)),
                          static_cast<long>(std::floor(p.z() / voxel)));
        }
        auto out = voxel_downsample(PointCloud(pts), voxel);
        EXPECT_EQ(out.size(), cells.size());
        std::set<std::tuple<long, long, long>> out_cells;
        for (const auto &p : out.points()) {
            out_cells.emplace(static_cast<long>(std::floor(p.x() / voxel)),
                              static_cast<long>(std::floor(p.y() / voxel)),
                              static_cast<long>(std::floor(p.z() / voxel)));
        }
        EXPECT_EQ(out_cells, cells);
    }
}

TEST(RotationAngle, MatchesConstructionAcrossRange) {
    std::mt19937_64 rng(14);
    for (double angle : {0.0, 1e-12, 1e-9, 1e-6, 0.3, 1.5, 3.0, M_PI - 1e-9, M_PI}) {
        const auto t = RigidTransform::from_axis_angle(test::random_unit(rng), angle);
        EXPECT_NEAR(t.angle(), angle, 1e-14 + 1e-12 * angle);
    }
}

TEST(StableHash, KnownFnvVectors) {
    EXPECT_EQ(stable_hash(""), 0xcbf29ce484222325ULL);
    EXPECT_EQ(stable_hash("a"), 0xaf63dc4c8601ec8cULL);
    EXPECT_EQ(stable_hash("foobar"), 0x85944171f73967e8ULL);
}
