// Copyright 2026 The xsreg Authors
// SPDX-License-Identifier: Apache-2.0

#include "xsreg/core/normals.h"

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include "xsreg/core/error.h"

namespace xsreg {

NormalEstimate estimate_normals(const PointCloud &cloud, std::size_t k, const Vec3 &viewpoint) {
    if (k < 3) throw PreconditionError("normal estimation needs k >= 3");
    if (cloud.size() < k) {
        throw PreconditionError(
                fmt::format("normal estimation needs at least k={} points, got {}", k, cloud.size()));
    }
    return estimate_normals(cloud, build_index(cloud), k, viewpoint);
}

namespace {

NormalEstimate estimate_impl(const PointCloud &cloud, const NeighborIndex &index, std::size_t k,
                             const Vec3 &viewpoint, bool away) {
    if (k < 3) throw PreconditionError("normal estimation needs k >= 3");
    if (cloud.size() < k) {
        throw PreconditionError(
                fmt::format("normal estimation needs at least k={} points, got {}", k, cloud.size()));
    }
    if (index.size() != cloud.size()) throw PreconditionError("index does not match cloud");

    std::vector<Vec3> normals(cloud.size());
    std::size_t degenerate = 0;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const auto nbrs = index.knn(cloud.point(i), k);
        Vec3 mean = Vec3::Zero();
        for (const auto &nb : nbrs) mean += cloud.point(nb.index);
        mean /= static_cast<double>(nbrs.size());
        Mat3 cov = Mat3::Zero();
        double spread = 0.0;
        for (const auto &nb : nbrs) {
            const Vec3 d = cloud.point(nb.index) - mean;
            cov += d * d.transpose();
            spread = std::max(spread, d.squaredNorm());
        }
        if (spread <= 1e-20) {
            normals[i] = Vec3::UnitZ();
            ++degenerate;
            continue;
        }
        Eigen::SelfAdjointEigenSolver<Mat3> solver(cov);
        Vec3 n = solver.eigenvectors().col(0).normalized();
        const double facing = n.dot(viewpoint - cloud.point(i));
        if (away ? facing > 0.0 : facing < 0.0) n = -n;
        normals[i] = n;
    }
    return {PointCloud(cloud.points(), std::move(normals)), degenerate};
}

}  // namespace

NormalEstimate estimate_normals(const PointCloud &cloud, const NeighborIndex &index, std::size_t k,
                                const Vec3 &viewpoint) {
    return estimate_impl(cloud, index, k, viewpoint, false);
}

NormalEstimate estimate_normals_outward(const PointCloud &cloud, std::size_t k) {
    if (cloud.size() < k) {
        throw PreconditionError(
                fmt::format("normal estimation needs at least k={} points, got {}", k, cloud.size()));
    }
    return estimate_impl(cloud, build_index(cloud), k, cloud.centroid(), true);
}

}  // namespace xsreg
