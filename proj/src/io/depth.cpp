// Copyright 2026 The xsreg Authors
// SPDX-License-Identifier: Apache-2.0

#include "xsreg/io/depth.h"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <cmath>

#include "byte_io.h"
#include "xsreg/core/error.h"

namespace xsreg::io {

void CameraIntrinsics::validate() const {
    if (width == 0 || height == 0) throw PreconditionError("camera width/height must be positive");
    if (!(fx > 0.0) || !(fy > 0.0)) throw PreconditionError("focal lengths must be positive");
    if (!(cx >= 0.0 && cx < static_cast<double>(width)) ||
        !(cy >= 0.0 && cy < static_cast<double>(height))) {
        throw PreconditionError(fmt::format("principal point ({}, {}) outside {}x{} image", cx, cy,
                                            width, height));
    }
    if (!(depth_scale > 0.0)) throw PreconditionError("depth_scale must be positive");
}

std::optional<Eigen::Vector2d> CameraIntrinsics::project(const Vec3 &p) const {
    if (!(p.z() > 0.0)) return std::nullopt;
    return Eigen::Vector2d(fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy);
}

DepthFrame::DepthFrame(CameraIntrinsics intrinsics, std::vector<uint16_t> depth)
    : intrinsics_(intrinsics), depth_(std::move(depth)) {
    intrinsics_.validate();
    if (depth_.size() != intrinsics_.width * intrinsics_.height) {
        throw FormatError(fmt::format("depth array has {} values, expected {}x{}={}", depth_.size(),
                                      intrinsics_.width, intrinsics_.height,
                                      intrinsics_.width * intrinsics_.height));
    }
}

std::size_t DepthFrame::valid_count() const {
    std::size_t n = 0;
    for (uint16_t d : depth_) n += d != 0;
    return n;
}

ReprojectedCloud reproject_depth_indexed(const DepthFrame &frame, double min_m, double max_m) {
    if (!(min_m >= 0.0) || !(min_m < max_m)) {
        throw PreconditionError(fmt::format("invalid depth range [{}, {}]", min_m, max_m));
    }
    const auto &k = frame.intrinsics();
    ReprojectedCloud out;
    std::vector<Vec3> pts;
    pts.reserve(frame.valid_count());
    out.pixel.reserve(pts.capacity());
    const auto &depth = frame.depth();
    for (std::size_t v = 0; v < k.height; ++v) {
        for (std::size_t u = 0; u < k.width; ++u) {
            const std::size_t idx = v * k.width + u;
            const uint16_t d = depth[idx];
            if (d == 0) continue;
            const double z = d * k.depth_scale;
            if (z < min_m || z > max_m) continue;
            pts.emplace_back((static_cast<double>(u) - k.cx) * z / k.fx,
                             (static_cast<double>(v) - k.cy) * z / k.fy, z);
            out.pixel.push_back(idx);
        }
    }
    out.cloud = PointCloud(std::move(pts));
    return out;
}

PointCloud reproject_depth(const DepthFrame &frame, double min_m, double max_m) {
    return reproject_depth_indexed(frame, min_m, max_m).cloud;
}

DepthFrame read_depth_pair(const std::filesystem::path &meta_path,
                           const std::filesystem::path &raw_path) {
    CameraIntrinsics k;
    try {
        const auto meta = nlohmann::json::parse(detail::read_file(meta_path));
        k.width = meta.at("width").get<std::size_t>();
        k.height = meta.at("height").get<std::size_t>();
        k.fx = meta.at("fx").get<double>();
        k.fy = meta.at("fy").get<double>();
        k.cx = meta.at("cx").get<double>();
        k.cy = meta.at("cy").get<double>();
        k.depth_scale = meta.at("depth_scale").get<double>();
        k.validate();
    } catch (const nlohmann::json::exception &e) {
        throw FormatError(fmt::format("{}: {}", meta_path.string(), e.what()));
    } catch (const PreconditionError &e) {
        throw FormatError(fmt::format("{}: {}", meta_path.string(), e.what()));
    }
    const std::string raw = detail::read_file(raw_path);
    const std::size_t expected = 2 * k.width * k.height;
    if (raw.size() != expected) {
        throw FormatError(fmt::format("{}: expected {} bytes, got {}", raw_path.string(), expected,
                                      raw.size()));
    }
    std::vector<uint16_t> depth(k.width * k.height);
    const auto *bytes = reinterpret_cast<const unsigned char *>(raw.data());
    for (std::size_t i = 0; i < depth.size(); ++i) depth[i] = detail::load_le<uint16_t>(bytes + 2 * i);
    return {k, std::move(depth)};
}

void write_depth_pair(const DepthFrame &frame, const std::filesystem::path &meta_path,
                      const std::filesystem::path &raw_path) {
    const auto &k = frame.intrinsics();
    nlohmann::json meta = {{"width", k.width}, {"height", k.height}, {"fx", k.fx},
                           {"fy", k.fy},       {"cx", k.cx},         {"cy", k.cy},
                           {"depth_scale", k.depth_scale}};
    detail::write_file(meta_path, meta.dump(2) + "\n");
    std::string raw;
    raw.reserve(frame.depth().size() * 2);
    for (uint16_t d : frame.depth()) detail::store_le(d, raw);
    detail::write_file(raw_path, raw);
}

}  // namespace xsreg::io
