// Copyright 2026 The xsreg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <vector>

#include "xsreg/core/geometry.h"

namespace xsreg::io {

/// Scalar field sampled on a regular grid (for example CT intensities).
///
/// Values are stored x-fastest: value(x, y, z) = values[x + nx * (y + ny * z)].
/// Voxel (x, y, z) sits at origin + (x * sx, y * sy, z * sz).
class ScalarVolume {
public:
    ScalarVolume(std::array<std::size_t, 3> dims, Vec3 spacing, Vec3 origin,
                 std::vector<double> values);

    const std::array<std::size_t, 3> &dims() const { return dims_; }
    const Vec3 &spacing() const { return spacing_; }
    const Vec3 &origin() const { return origin_; }
    const std::vector<double> &values() const { return values_; }

    double at(std::size_t x, std::size_t y, std::size_t z) const {
        return values_[x + dims_[0] * (y + dims_[1] * z)];
    }
    Vec3 position(std::size_t x, std::size_t y, std::size_t z) const {
        return origin_ + Vec3(spacing_.x() * static_cast<double>(x),
                              spacing_.y() * static_cast<double>(y),
                              spacing_.z() * static_cast<double>(z));
    }

private:
    std::array<std::size_t, 3> dims_;
    Vec3 spacing_;
    Vec3 origin_;
    std::vector<double> values_;
};

struct IsosurfaceResult {
    PointCloud cloud;
    bool iso_out_of_range = false;  // iso outside [min, max]; cloud is empty
};

/// Marching-cubes vertices of the surface value == iso, as world-space points.
///
/// A voxel corner is "inside" when its value is below iso. Each cube edge whose
/// corners disagree contributes one linearly interpolated vertex; vertices on
/// edges shared between cubes, and vertices landing on a grid corner, are
/// emitted once.
IsosurfaceResult extract_isosurface_points(const ScalarVolume &volume, double iso);

/// `<name>.json` (dims, spacing, origin) + `<name>.raw` little-endian float32.
ScalarVolume read_volume(const std::filesystem::path &meta_path,
                         const std::filesystem::path &raw_path);
void write_volume(const ScalarVolume &volume, const std::filesystem::path &meta_path,
                  const std::filesystem::path &raw_path);

}  // namespace xsreg::io
