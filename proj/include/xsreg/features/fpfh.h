// Copyright 2026 The xsreg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <vector>

#include "xsreg/core/geometry.h"
#include "xsreg/core/kdtree.h"

namespace xsreg::features {

inline constexpr int kBinsPerFeature = 11;
inline constexpr int kDescriptorSize = 3 * kBinsPerFeature;

/// Blocks: [0, 11) alpha, [11, 22) phi, [22, 33) theta.
using FpfhDescriptor = Eigen::Matrix<double, kDescriptorSize, 1>;

enum class NormalOrientation {
    kViewpoint,         // flip toward FeatureParams::viewpoint
    kAwayFromCentroid,  // flip away from the cloud centroid (closed or convex-ish surfaces)
};

struct FeatureParams {
    std::size_t normal_k = 30;
    double feature_radius = 0.025;
    /// Grid size used to thin both clouds before feature matching; 0 disables.
    double voxel_size = 0.004;
    NormalOrientation source_orientation = NormalOrientation::kAwayFromCentroid;
    NormalOrientation target_orientation = NormalOrientation::kViewpoint;
    Vec3 viewpoint = Vec3::Zero();

    void validate() const;
};

struct PairFeatures {
    double alpha;
    double phi;
    double theta;
    double distance;
};

/// Darboux-frame features of a point pair. The point whose normal makes the
/// smaller angle with the connecting line is taken as the frame origin, so the
/// result does not depend on argument order. Returns nullopt for coincident
/// points or a frame that is undefined (line parallel to the source normal).
std::optional<PairFeatures> pair_features(const Vec3 &p1, const Vec3 &n1, const Vec3 &p2, const Vec3 &n2);

/// Bin of each feature, each in [0, 11).
std::array<int, 3> feature_bins(const PairFeatures &f);

struct FpfhResult {
    std::vector<FpfhDescriptor> descriptors;
    std::vector<bool> empty;  // true where the point had no usable neighbours
    std::size_t empty_count = 0;
};

/// Single-point histograms, each block normalised to 100 (all zero when no valid pair).
std::vector<FpfhDescriptor> compute_spfh(const PointCloud &cloud, const NeighborIndex &index, double radius);

FpfhResult compute_fpfh(const PointCloud &cloud, const FeatureParams &params);
FpfhResult compute_fpfh(const PointCloud &cloud, const NeighborIndex &index, double radius);

/// Debug dump: n x 33 little-endian float32 plus a JSON sidecar with n and the radius.
void write_descriptors(const FpfhResult &result, double radius, const std::filesystem::path &meta_path,
                       const std::filesystem::path &raw_path);

}  // namespace xsreg::features
