// Copyright 2026 The xsreg Authors
// SPDX-License-Identifier: Apache-2.0

#include "xsreg/core/sampling.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_map>

#include "xsreg/core/error.h"

namespace xsreg {

namespace {

uint64_t splitmix(uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

struct CellKey {
    int64_t x, y, z;
    bool operator==(const CellKey &) const = default;
};

struct CellHash {
    std::size_t operator()(const CellKey &k) const {
        return splitmix(static_cast<uint64_t>(k.x) ^ splitmix(static_cast<uint64_t>(k.y) ^
                                                               splitmix(static_cast<uint64_t>(k.z))));
    }
};

}  // namespace

uint64_t derive_seed(uint64_t base, uint64_t a, uint64_t b) {
    return splitmix(splitmix(splitmix(base) ^ a) ^ b);
}

uint64_t stable_hash(std::string_view text) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::vector<std::size_t> random_subsample_indices(std::size_t size, std::size_t n, uint64_t seed) {
    if (n == 0) throw PreconditionError("subsample size must be >= 1");
    std::vector<std::size_t> idx(size);
    std::iota(idx.begin(), idx.end(), 0);
    if (n >= size) return idx;
    std::mt19937_64 rng(seed);
    // Partial Fisher-Yates: the first n slots end up a uniform n-subset.
    for (std::size_t i = 0; i < n; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, size - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(n);
    std::sort(idx.begin(), idx.end());
    return idx;
}

PointCloud random_subsample(const PointCloud &cloud, std::size_t n, uint64_t seed) {
    if (n >= cloud.size()) {
        if (n == 0) throw PreconditionError("subsample size must be >= 1");
        return cloud;
    }
    return cloud.select(random_subsample_indices(cloud.size(), n, seed));
}

PointCloud voxel_downsample(const PointCloud &cloud, double voxel) {
    if (!(voxel > 0.0)) throw PreconditionError("voxel size must be positive");
    struct Acc {
        Vec3 sum = Vec3::Zero();
        Vec3 nsum = Vec3::Zero();
        std::size_t count = 0;
    };
    std::unordered_map<CellKey, std::size_t, CellHash> slot;
    std::vector<Acc> acc;
    slot.reserve(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const Vec3 &p = cloud.point(i);
        const CellKey key{static_cast<int64_t>(std::floor(p.x() / voxel)),
                          static_cast<int64_t>(std::floor(p.y() / voxel)),
                          static_cast<int64_t>(std::floor(p.z() / voxel))};
        auto [it, inserted] = slot.try_emplace(key, acc.size());
        if (inserted) acc.emplace_back();
        Acc &a = acc[it->second];
        a.sum += p;
        if (cloud.has_normals()) a.nsum += cloud.normal(i);
        ++a.count;
    }
    std::vector<Vec3> pts;
    pts.reserve(acc.size());
    for (const auto &a : acc) pts.push_back(a.sum / static_cast<double>(a.count));
    if (!cloud.has_normals()) return PointCloud(std::move(pts));

    std::vector<Vec3> nrm;
    nrm.reserve(acc.size());
    for (const auto &a : acc) {
        const double len = a.nsum.norm();
        nrm.push_back(len > 1e-12 ? Vec3(a.nsum / len) : Vec3::UnitZ());
    }
    return PointCloud(std::move(pts), std::move(nrm));
}

}  // namespace xsreg
