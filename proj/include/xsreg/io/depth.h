// Copyright 2026 The xsreg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "xsreg/core/geometry.h"

namespace xsreg::io {

/// Pinhole camera without distortion. Pixel (u, v) has its centre at integer
/// coordinates; the camera looks along +z with v growing downwards.
struct CameraIntrinsics {
    std::size_t width = 0;
    std::size_t height = 0;
    double fx = 0.0;
    double fy = 0.0;
    double cx = 0.0;
    double cy = 0.0;
    double depth_scale = 0.001;  // meters per stored unit

    void validate() const;
    /// Projects a camera-frame point to continuous pixel coordinates.
    std::optional<Eigen::Vector2d> project(const Vec3 &p) const;
};

/// Row-major u16 range image; 0 marks a pixel without a return.
class DepthFrame {
public:
    DepthFrame(CameraIntrinsics intrinsics, std::vector<uint16_t> depth);

    const CameraIntrinsics &intrinsics() const { return intrinsics_; }
    const std::vector<uint16_t> &depth() const { return depth_; }
    uint16_t at(std::size_t u, std::size_t v) const { return depth_[v * intrinsics_.width + u]; }
    std::size_t valid_count() const;

private:
    CameraIntrinsics intrinsics_;
    std::vector<uint16_t> depth_;
};

struct ReprojectedCloud {
    PointCloud cloud;
    std::vector<std::size_t> pixel;  // row-major pixel index of each point
};

/// Back-projects every valid pixel whose depth lies in [min_m, max_m].
PointCloud reproject_depth(const DepthFrame &frame, double min_m, double max_m);
ReprojectedCloud reproject_depth_indexed(const DepthFrame &frame, double min_m, double max_m);

/// `<name>.json` metadata + `<name>.raw` little-endian u16 payload.
DepthFrame read_depth_pair(const std::filesystem::path &meta_path,
                           const std::filesystem::path &raw_path);
void write_depth_pair(const DepthFrame &frame, const std::filesystem::path &meta_path,
                      const std::filesystem::path &raw_path);

}  // namespace xsreg::io
