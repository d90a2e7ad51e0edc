// Copyright 2026 The xsreg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "xsreg/core/geometry.h"

namespace xsreg {

/// min(n, size) distinct indices drawn uniformly without replacement,
/// returned in ascending order. Deterministic for a fixed seed.
std::vector<std::size_t> random_subsample_indices(std::size_t size, std::size_t n, uint64_t seed);

/// Uniform subsample without replacement; input order is preserved.
PointCloud random_subsample(const PointCloud &cloud, std::size_t n, uint64_t seed);

/// One point per occupied voxel (the centroid of its members), in order of
/// first occupancy. Normals, when present, are averaged and renormalised.
PointCloud voxel_downsample(const PointCloud &cloud, double voxel);

/// Stateless seed derivation (SplitMix64 finaliser) for reproducible
/// per-item random streams.
uint64_t derive_seed(uint64_t base, uint64_t a, uint64_t b = 0);

/// FNV-1a; stable across platforms, unlike std::hash.
uint64_t stable_hash(std::string_view text);

}  // namespace xsreg
