// Copyright 2026 The xsreg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "xsreg/core/error.h"
#include "xsreg/core/geometry.h"
#include "xsreg/io/depth.h"

namespace xsreg::preprocess {

/// Plane {p : normal . p + offset = 0}.
struct PlaneModel {
    Vec3 normal = Vec3::UnitZ();
    double offset = 0.0;
    std::size_t inlier_count = 0;

    double signed_distance(const Vec3 &p) const { return normal.dot(p) + offset; }
};

enum class Axis { kX = 0, kY = 1, kZ = 2 };

struct PreprocessParams {
    double clamp_min = 0.25;
    double clamp_max = 1.5;
    double plane_dist = 0.01;
    std::size_t plane_iters = 100;
    double plane_min_inlier_frac = 0.20;  // below this the plane is left in place
    double outlier_radius = 0.02;
    std::size_t outlier_min_neighbors = 3;
    Axis crop_z_axis = Axis::kZ;  // both ends cropped by crop_z_frac
    double crop_z_frac = 0.10;
    Axis crop_y_axis = Axis::kY;  // high end cropped by crop_y_frac
    double crop_y_frac = 0.35;
    std::size_t subsample_n = 10000;
    uint64_t seed = 0;
    bool subsample_before_crop = false;

    void validate() const;
};

/// A pipeline stage removed every remaining point.
class EmptyStageError : public Error {
public:
    explicit EmptyStageError(std::string stage);
    EmptyStageError(std::string stage, const std::string &message);
    const std::string &stage() const { return stage_; }

private:
    std::string stage_;
};

struct StageCount {
    std::string stage;
    std::size_t points = 0;
};

// Each filter comes in two forms: one returning the kept indices (ascending),
// one returning the filtered cloud.

std::vector<std::size_t> clamp_range_indices(const PointCloud &cloud, double min_m, double max_m);
PointCloud clamp_range(const PointCloud &cloud, double min_m, double max_m);

/// Deterministic per seed. Throws DegenerateError when no non-collinear triple exists.
PlaneModel fit_plane_ransac(const PointCloud &cloud, double dist, std::size_t iters, uint64_t seed);

std::vector<std::size_t> remove_plane_indices(const PointCloud &cloud, const PlaneModel &model, double dist);
PointCloud remove_plane(const PointCloud &cloud, const PlaneModel &model, double dist);

/// Keeps points with at least min_neighbors other points within radius.
std::vector<std::size_t> remove_sparse_outliers_indices(const PointCloud &cloud, double radius,
                                                        std::size_t min_neighbors);
PointCloud remove_sparse_outliers(const PointCloud &cloud, double radius, std::size_t min_neighbors);

/// Rank-based crop: drops floor(lo_frac*n) lowest and floor(hi_frac*n) highest
/// points along axis. Ties are ranked by index.
std::vector<std::size_t> crop_percentile_indices(const PointCloud &cloud, Axis axis, double lo_frac,
                                                 double hi_frac);
PointCloud crop_percentile(const PointCloud &cloud, Axis axis, double lo_frac, double hi_frac);

struct PreparedSource {
    PointCloud cloud;
    std::vector<StageCount> stages;
};

PreparedSource prepare_source_detailed(const PointCloud &vol_cloud, const PreprocessParams &params);
PointCloud prepare_source(const PointCloud &vol_cloud, const PreprocessParams &params);

struct PreparedTarget {
    PointCloud cloud;
    std::vector<std::size_t> pixel;  // source pixel of each output point
    std::vector<StageCount> stages;
    std::optional<PlaneModel> plane;
    bool plane_removed = false;
    double seconds = 0.0;
};

PreparedTarget prepare_target(const io::DepthFrame &frame, const PreprocessParams &params);

}  // namespace xsreg::preprocess
