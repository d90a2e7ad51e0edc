// Copyright 2026 The xsreg Authors
// SPDX-License-Identifier: Apache-2.0

#include "xsreg/preprocess/preprocess.h"

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "xsreg/core/kdtree.h"
#include "xsreg/core/sampling.h"

namespace xsreg::preprocess {

namespace {

std::vector<std::size_t> compose_indices(const std::vector<std::size_t> &outer,
                                         const std::vector<std::size_t> &inner) {
    std::vector<std::size_t> out(inner.size());
    for (std::size_t i = 0; i < inner.size(); ++i) out[i] = outer[inner[i]];
    return out;
}

void check_fraction(double f, const char *name) {
    if (!(f >= 0.0 && f < 0.5)) throw PreconditionError(fmt::format("{} must be in [0, 0.5), got {}", name, f));
}

// Least-squares plane through the given points: smallest eigenvector of the covariance.
std::optional<PlaneModel> refit(const PointCloud &cloud, const std::vector<std::size_t> &idx) {
    Vec3 mean = Vec3::Zero();
    for (auto i : idx) mean += cloud.point(i);
    mean /= static_cast<double>(idx.size());
    Mat3 cov = Mat3::Zero();
    for (auto i : idx) {
        const Vec3 d = cloud.point(i) - mean;
        cov += d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    if (eig.info() != Eigen::Success) return std::nullopt;
    // Rank < 2 means the points are collinear or coincident.
    if (!(eig.eigenvalues()(1) > 1e-12 * eig.eigenvalues()(2))) return std::nullopt;
    PlaneModel m;
    m.normal = eig.eigenvectors().col(0).normalized();
    m.offset = -m.normal.dot(mean);
    return m;
}

// Canonical sign: camera origin on the positive side.
void orient(PlaneModel &m) {
    bool flip = m.offset < 0.0;
    if (m.offset == 0.0) {
        Eigen::Index k;
        m.normal.cwiseAbs().maxCoeff(&k);
        flip = m.normal[k] < 0.0;
    }
    if (flip) {
        m.normal = -m.normal;
        m.offset = -m.offset;
    }
}

std::size_t count_inliers(const PointCloud &cloud, const Vec3 &n, double d, double dist) {
    std::size_t count = 0;
    for (const auto &p : cloud.points()) count += std::abs(n.dot(p) + d) <= dist;
    return count;
}

}  // namespace

EmptyStageError::EmptyStageError(std::string stage)
    : Error(fmt::format("stage '{}' removed every point", stage)), stage_(std::move(stage)) {}

EmptyStageError::EmptyStageError(std::string stage, const std::string &message)
    : Error(message), stage_(std::move(stage)) {}

void PreprocessParams::validate() const {
    if (!(clamp_min >= 0.0 && clamp_min < clamp_max)) {
        throw PreconditionError(fmt::format("need 0 <= clamp_min < clamp_max, got {} and {}", clamp_min, clamp_max));
    }
    if (!(plane_dist > 0.0)) throw PreconditionError("plane_dist must be positive");
    if (!(outlier_radius > 0.0)) throw PreconditionError("outlier_radius must be positive");
    if (plane_iters == 0) throw PreconditionError("plane_iters must be >= 1");
    if (!(plane_min_inlier_frac >= 0.0 && plane_min_inlier_frac <= 1.0)) {
        throw PreconditionError("plane_min_inlier_frac must be in [0, 1]");
    }
    check_fraction(crop_z_frac, "crop_z_frac");
    check_fraction(crop_y_frac, "crop_y_frac");
    if (subsample_n == 0) throw PreconditionError("subsample_n must be >= 1");
}

std::vector<std::size_t> clamp_range_indices(const PointCloud &cloud, double min_m, double max_m) {
    if (!(min_m >= 0.0 && min_m < max_m)) {
        throw PreconditionError(fmt::format("invalid clamp range [{}, {}]", min_m, max_m));
    }
    std::vector<std::size_t> keep;
    keep.reserve(cloud.size());
    const double lo2 = min_m * min_m;
    const double hi2 = max_m * max_m;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const double r2 = cloud.point(i).squaredNorm();
        if (r2 >= lo2 && r2 <= hi2) keep.push_back(i);
    }
    return keep;
}

PointCloud clamp_range(const PointCloud &cloud, double min_m, double max_m) {
    return cloud.select(clamp_range_indices(cloud, min_m, max_m));
}

PlaneModel fit_plane_ransac(const PointCloud &cloud, double dist, std::size_t iters, uint64_t seed) {
    const std::size_t n = cloud.size();
    if (n < 3) throw PreconditionError("plane fit needs at least 3 points");
    if (!(dist > 0.0)) throw PreconditionError("plane distance must be positive");

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::size_t best_count = 0;
    Vec3 best_n = Vec3::Zero();
    double best_d = 0.0;
    // Bounded retries for collinear draws so a degenerate cloud terminates.
    const std::size_t max_draws = iters * 10 + 100;
    std::size_t accepted = 0;
    for (std::size_t draw = 0; draw < max_draws && accepted < iters; ++draw) {
        const std::size_t a = pick(rng), b = pick(rng), c = pick(rng);
        if (a == b || b == c || a == c) continue;
        const Vec3 &pa = cloud.point(a);
        const Vec3 ab = cloud.point(b) - pa;
        const Vec3 ac = cloud.point(c) - pa;
        const Vec3 cross = ab.cross(ac);
        const double len = cross.norm();
        // sin of the angle at pa; rejects collinear and near-collinear triples.
        if (!(len > 1e-9 * ab.norm() * ac.norm())) continue;
        ++accepted;
        const Vec3 normal = cross / len;
        const double d = -normal.dot(pa);
        const std::size_t count = count_inliers(cloud, normal, d, dist);
        if (count > best_count) {
            best_count = count;
            best_n = normal;
            best_d = d;
        }
    }
    if (best_count == 0) {
        // Random draws found nothing usable; fall back to a global fit.
        std::vector<std::size_t> all(n);
        std::iota(all.begin(), all.end(), 0);
        auto m = refit(cloud, all);
        if (!m) throw DegenerateError("degenerate plane fit");
        best_n = m->normal;
        best_d = m->offset;
    }

    std::vector<std::size_t> inliers;
    for (std::size_t i = 0; i < n; ++i) {
        if (std::abs(best_n.dot(cloud.point(i)) + best_d) <= dist) inliers.push_back(i);
    }
    PlaneModel model;
    auto fitted = inliers.size() >= 3 ? refit(cloud, inliers) : std::nullopt;
    if (fitted) {
        model = *fitted;
    } else {
        model.normal = best_n;
        model.offset = best_d;
    }
    orient(model);
    model.inlier_count = count_inliers(cloud, model.normal, model.offset, dist);
    return model;
}

std::vector<std::size_t> remove_plane_indices(const PointCloud &cloud, const PlaneModel &model, double dist) {
    if (std::abs(model.normal.norm() - 1.0) > 1e-9) throw PreconditionError("plane normal must be unit length");
    std::vector<std::size_t> keep;
    keep.reserve(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        if (std::abs(model.signed_distance(cloud.point(i))) > dist) keep.push_back(i);
    }
    return keep;
}

PointCloud remove_plane(const PointCloud &cloud, const PlaneModel &model, double dist) {
    return cloud.select(remove_plane_indices(cloud, model, dist));
}

std::vector<std::size_t> remove_sparse_outliers_indices(const PointCloud &cloud, double radius,
                                                        std::size_t min_neighbors) {
    if (!(radius > 0.0)) throw PreconditionError("outlier radius must be positive");
    std::vector<std::size_t> keep;
    keep.reserve(cloud.size());
    if (min_neighbors == 0) {
        for (std::size_t i = 0; i < cloud.size(); ++i) keep.push_back(i);
        return keep;
    }
    if (cloud.empty()) return keep;
    const NeighborIndex index = build_index(cloud);
    // The query point counts itself, hence the +1.
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        if (index.count_within(cloud.point(i), radius, min_neighbors + 1) > min_neighbors) keep.push_back(i);
    }
    return keep;
}

PointCloud remove_sparse_outliers(const PointCloud &cloud, double radius, std::size_t min_neighbors) {
    return cloud.select(remove_sparse_outliers_indices(cloud, radius, min_neighbors));
}

std::vector<std::size_t> crop_percentile_indices(const PointCloud &cloud, Axis axis, double lo_frac,
                                                 double hi_frac) {
    if (!(lo_frac >= 0.0 && lo_frac < 1.0 && hi_frac >= 0.0 && hi_frac < 1.0 && lo_frac + hi_frac < 1.0)) {
        throw PreconditionError(fmt::format("invalid crop fractions {} and {}", lo_frac, hi_frac));
    }
    const std::size_t n = cloud.size();
    const auto drop_lo = static_cast<std::size_t>(std::floor(lo_frac * static_cast<double>(n)));
    const auto drop_hi = static_cast<std::size_t>(std::floor(hi_frac * static_cast<double>(n)));
    const int a = static_cast<int>(axis);
    std::vector<std::size_t> rank(n);
    std::iota(rank.begin(), rank.end(), 0);
    std::sort(rank.begin(), rank.end(), [&](std::size_t i, std::size_t j) {
        const double vi = cloud.point(i)[a], vj = cloud.point(j)[a];
        return vi < vj || (vi == vj && i < j);
    });
    std::vector<std::size_t> keep(rank.begin() + static_cast<std::ptrdiff_t>(drop_lo),
                                  rank.end() - static_cast<std::ptrdiff_t>(drop_hi));
    std::sort(keep.begin(), keep.end());
    return keep;
}

PointCloud crop_percentile(const PointCloud &cloud, Axis axis, double lo_frac, double hi_frac) {
    return cloud.select(crop_percentile_indices(cloud, axis, lo_frac, hi_frac));
}

PreparedSource prepare_source_detailed(const PointCloud &vol_cloud, const PreprocessParams &params) {
    params.validate();
    PreparedSource out;
    PointCloud cur = vol_cloud;
    out.stages.push_back({"input", cur.size()});
    if (cur.empty()) throw EmptyStageError("input");
    auto stage = [&](const char *name, PointCloud next) {
        cur = std::move(next);
        out.stages.push_back({name, cur.size()});
        if (cur.empty()) throw EmptyStageError(name);
    };
    auto crops = [&] {
        stage("crop_z", crop_percentile(cur, params.crop_z_axis, params.crop_z_frac, params.crop_z_frac));
        stage("crop_y", crop_percentile(cur, params.crop_y_axis, 0.0, params.crop_y_frac));
    };
    if (params.subsample_before_crop) {
        stage("subsample", random_subsample(cur, params.subsample_n, params.seed));
        crops();
    } else {
        crops();
        stage("subsample", random_subsample(cur, params.subsample_n, params.seed));
    }
    out.cloud = std::move(cur);
    return out;
}

PointCloud prepare_source(const PointCloud &vol_cloud, const PreprocessParams &params) {
    return prepare_source_detailed(vol_cloud, params).cloud;
}

PreparedTarget prepare_target(const io::DepthFrame &frame, const PreprocessParams &params) {
    params.validate();
    const auto t0 = std::chrono::steady_clock::now();
    PreparedTarget out;

    auto rc = io::reproject_depth_indexed(frame, 0.0, std::numeric_limits<double>::infinity());
    if (rc.cloud.empty()) throw EmptyStageError("reproject", "no valid depth");
    out.stages.push_back({"reproject", rc.cloud.size()});
    PointCloud cur = std::move(rc.cloud);
    std::vector<std::size_t> pixel = std::move(rc.pixel);

    auto apply = [&](const char *name, const std::vector<std::size_t> &keep) {
        cur = cur.select(keep);
        pixel = compose_indices(pixel, keep);
        out.stages.push_back({name, cur.size()});
        if (cur.empty()) throw EmptyStageError(name);
    };

    apply("clamp_range", clamp_range_indices(cur, params.clamp_min, params.clamp_max));

    if (cur.size() >= 3) {
        try {
            const PlaneModel plane = fit_plane_ransac(cur, params.plane_dist, params.plane_iters, params.seed);
            out.plane = plane;
            const double frac = static_cast<double>(plane.inlier_count) / static_cast<double>(cur.size());
            if (frac >= params.plane_min_inlier_frac) {
                apply("remove_plane", remove_plane_indices(cur, plane, params.plane_dist));
                out.plane_removed = true;
            }
        } catch (const DegenerateError &) {
            // Collinear remnant: nothing plane-like to remove.
        }
    }
    if (!out.plane_removed) out.stages.push_back({"remove_plane", cur.size()});

    apply("remove_sparse_outliers",
          remove_sparse_outliers_indices(cur, params.outlier_radius, params.outlier_min_neighbors));

    out.cloud = std::move(cur);
    out.pixel = std::move(pixel);
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

}  // namespace xsreg::preprocess
