// Copyright 2026 The xsreg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>

#include "xsreg/core/geometry.h"

namespace xsreg::io {

/// Reads the vertex element of an ASCII or binary_little_endian PLY file.
///
/// x, y, z are required (float or double); nx, ny, nz are picked up when all
/// three are present. Other vertex properties are skipped. Elements after the
/// vertex element are ignored; list-typed elements before it are rejected.
/// Malformed input raises FormatError naming the byte offset.
PointCloud read_ply(const std::filesystem::path &path);

/// Writes float32 x, y, z (+ nx, ny, nz when the cloud has normals).
void write_ply(const PointCloud &cloud, const std::filesystem::path &path, bool binary = true);

}  // namespace xsreg::io
