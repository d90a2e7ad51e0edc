// Copyright 2026 The xsreg Authors
// SPDX-License-Identifier: Apache-2.0

#include "xsreg/io/volume.h"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "byte_io.h"
#include "xsreg/core/error.h"

namespace xsreg::io {

namespace {

// Cube corners in the usual marching-cubes numbering.
constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                               {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
constexpr int kEdge[12][2] = {{0, 1}, {1, 2}, {3, 2}, {0, 3}, {4, 5}, {5, 6},
                              {7, 6}, {4, 7}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};

// edge_table[cube] has bit e set when edge e straddles the surface. This is
// the classic 256-entry edge table, derived from the corner classification.
constexpr std::array<uint16_t, 256> make_edge_table() {
    std::array<uint16_t, 256> table{};
    for (int cube = 0; cube < 256; ++cube) {
        uint16_t mask = 0;
        for (int e = 0; e < 12; ++e) {
            const bool a = (cube >> kEdge[e][0]) & 1;
            const bool b = (cube >> kEdge[e][1]) & 1;
            if (a != b) mask |= static_cast<uint16_t>(1u << e);
        }
        table[cube] = mask;
    }
    return table;
}
constexpr auto kEdgeTable = make_edge_table();
static_assert(kEdgeTable[1] == 0x109 && kEdgeTable[255] == 0 && kEdgeTable[0x0f] == 0xf00);

int edge_axis(int e) {
    for (int a = 0; a < 3; ++a) {
        if (kCorner[kEdge[e][0]][a] != kCorner[kEdge[e][1]][a]) return a;
    }
    return -1;
}

}  // namespace

ScalarVolume::ScalarVolume(std::array<std::size_t, 3> dims, Vec3 spacing, Vec3 origin,
                           std::vector<double> values)
    : dims_(dims), spacing_(spacing), origin_(origin), values_(std::move(values)) {
    if (!(spacing_.x() > 0.0 && spacing_.y() > 0.0 && spacing_.z() > 0.0)) {
        throw PreconditionError("volume spacing must be positive");
    }
    if (!origin_.allFinite()) throw PreconditionError("volume origin must be finite");
    const std::size_t n = dims_[0] * dims_[1] * dims_[2];
    if (values_.size() != n) {
        throw FormatError(fmt::format("volume has {} values, expected {}x{}x{}={}", values_.size(),
                                      dims_[0], dims_[1], dims_[2], n));
    }
}

IsosurfaceResult extract_isosurface_points(const ScalarVolume &volume, double iso) {
    const auto [nx, ny, nz] = volume.dims();
    if (nx < 2 || ny < 2 || nz < 2) throw PreconditionError("volume needs >= 2 samples per axis");

    const auto [lo, hi] = std::minmax_element(volume.values().begin(), volume.values().end());
    if (iso < *lo || iso > *hi) return {PointCloud(), true};

    int axis_of[12];
    for (int e = 0; e < 12; ++e) axis_of[e] = edge_axis(e);

    // Key: 4 * linear voxel index + slot, slot 0..2 = edge axis, 3 = the voxel corner itself.
    std::unordered_map<uint64_t, std::size_t> emitted;
    std::vector<Vec3> pts;
    auto linear = [&](std::size_t x, std::size_t y, std::size_t z) {
        return static_cast<uint64_t>(x + nx * (y + ny * z));
    };
    auto emit = [&](uint64_t key, const auto &make_point) {
        if (emitted.try_emplace(key, pts.size()).second) pts.push_back(make_point());
    };

    double corner_value[8];
    for (std::size_t z = 0; z + 1 < nz; ++z) {
        for (std::size_t y = 0; y + 1 < ny; ++y) {
            for (std::size_t x = 0; x + 1 < nx; ++x) {
                int cube = 0;
                for (int c = 0; c < 8; ++c) {
                    corner_value[c] = volume.at(x + kCorner[c][0], y + kCorner[c][1], z + kCorner[c][2]);
                    if (corner_value[c] < iso) cube |= 1 << c;
                }
                const uint16_t mask = kEdgeTable[cube];
                if (mask == 0) continue;
                for (int e = 0; e < 12; ++e) {
                    if (!(mask & (1u << e))) continue;
                    const int c0 = kEdge[e][0];
                    const int c1 = kEdge[e][1];
                    const std::size_t x0 = x + kCorner[c0][0], y0 = y + kCorner[c0][1],
                                      z0 = z + kCorner[c0][2];
                    const std::size_t x1 = x + kCorner[c1][0], y1 = y + kCorner[c1][1],
                                      z1 = z + kCorner[c1][2];
                    const double v0 = corner_value[c0];
                    const double v1 = corner_value[c1];
                    const double t = (iso - v0) / (v1 - v0);
                    const Vec3 p0 = volume.position(x0, y0, z0);
                    const Vec3 p1 = volume.position(x1, y1, z1);
                    const double len = (p1 - p0).norm();
                    if (t * len < 1e-9) {
                        emit(4 * linear(x0, y0, z0) + 3, [&] { return p0; });
                    } else if ((1.0 - t) * len < 1e-9) {
                        emit(4 * linear(x1, y1, z1) + 3, [&] { return p1; });
                    } else {
                        emit(4 * linear(x0, y0, z0) + static_cast<uint64_t>(axis_of[e]),
                             [&] { return Vec3(p0 + t * (p1 - p0)); });
                    }
                }
            }
        }
    }
    return {PointCloud(std::move(pts)), false};
}

ScalarVolume read_volume(const std::filesystem::path &meta_path,
                         const std::filesystem::path &raw_path) {
    std::array<std::size_t, 3> dims{};
    Vec3 spacing, origin;
    try {
        const auto meta = nlohmann::json::parse(detail::read_file(meta_path));
        const auto d = meta.at("dims").get<std::vector<std::size_t>>();
        const auto s = meta.at("spacing").get<std::vector<double>>();
        const auto o = meta.at("origin").get<std::vector<double>>();
        if (d.size() != 3 || s.size() != 3 || o.size() != 3) {
            throw FormatError(fmt::format("{}: dims/spacing/origin need 3 entries", meta_path.string()));
        }
        dims = {d[0], d[1], d[2]};
        spacing = Vec3(s[0], s[1], s[2]);
        origin = Vec3(o[0], o[1], o[2]);
    } catch (const nlohmann::json::exception &e) {
        throw FormatError(fmt::format("{}: {}", meta_path.string(), e.what()));
    }
    const std::string raw = detail::read_file(raw_path);
    const std::size_t n = dims[0] * dims[1] * dims[2];
    if (raw.size() != 4 * n) {
        throw FormatError(fmt::format("{}: expected {} bytes, got {}", raw_path.string(), 4 * n,
                                      raw.size()));
    }
    std::vector<double> values(n);
    const auto *bytes = reinterpret_cast<const unsigned char *>(raw.data());
    for (std::size_t i = 0; i < n; ++i) values[i] = detail::load_le<float>(bytes + 4 * i);
    try {
        return {dims, spacing, origin, std::move(values)};
    } catch (const PreconditionError &e) {
        throw FormatError(fmt::format("{}: {}", meta_path.string(), e.what()));
    }
}

void write_volume(const ScalarVolume &volume, const std::filesystem::path &meta_path,
                  const std::filesystem::path &raw_path) {
    const auto &s = volume.spacing();
    const auto &o = volume.origin();
    nlohmann::json meta = {{"dims", volume.dims()},
                           {"spacing", {s.x(), s.y(), s.z()}},
                           {"origin", {o.x(), o.y(), o.z()}}};
    detail::write_file(meta_path, meta.dump(2) + "\n");
    std::string raw;
    raw.reserve(volume.values().size() * 4);
    for (double v : volume.values()) detail::store_le(static_cast<float>(v), raw);
    detail::write_file(raw_path, raw);
}

}  // namespace xsreg::io
