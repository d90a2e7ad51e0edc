// Copyright 2026 The xsreg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>

#include "xsreg/core/geometry.h"
#include "xsreg/core/kdtree.h"

namespace xsreg {

struct NormalEstimate {
    PointCloud cloud;  // input points with normals attached
    std::size_t degenerate_count = 0;
};

/// PCA normals from k nearest neighbours (the point itself included), oriented
/// so that normal . (viewpoint - p) >= 0. Neighbourhoods whose points all
/// coincide get (0, 0, 1) and are counted as degenerate.
NormalEstimate estimate_normals(const PointCloud &cloud, std::size_t k, const Vec3 &viewpoint);
NormalEstimate estimate_normals(const PointCloud &cloud, const NeighborIndex &index, std::size_t k,
                                const Vec3 &viewpoint);

/// Same as estimate_normals with the viewpoint at the centroid, then every
/// normal flipped: normals point away from the cloud's centre. This rule
/// commutes with rigid motion without needing a transformed viewpoint.
NormalEstimate estimate_normals_outward(const PointCloud &cloud, std::size_t k);

}  // namespace xsreg
