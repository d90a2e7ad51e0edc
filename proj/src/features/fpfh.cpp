// Copyright 2026 The xsreg Authors
// SPDX-License-Identifier: Apache-2.0

#include "xsreg/features/fpfh.h"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "xsreg/core/error.h"

namespace xsreg::features {

namespace {

bool lex_less(const Vec3 &a, const Vec3 &b) {
    if (a.x() != b.x()) return a.x() < b.x();
    if (a.y() != b.y()) return a.y() < b.y();
    return a.z() < b.z();
}

int bin_of(double f, double lo, double hi) {
    const int b = static_cast<int>(std::floor((f - lo) / (hi - lo) * kBinsPerFeature));
    return std::clamp(b, 0, kBinsPerFeature - 1);
}

void normalize_blocks(FpfhDescriptor &d) {
    for (int b = 0; b < 3; ++b) {
        auto block = d.segment<kBinsPerFeature>(b * kBinsPerFeature);
        const double s = block.sum();
        if (s > 0.0) block *= 100.0 / s;
    }
}

struct Neighbourhood {
    std::vector<std::vector<Neighbor>> lists;  // zero-distance entries removed
};

Neighbourhood gather(const PointCloud &cloud, const NeighborIndex &index, double radius) {
    Neighbourhood nb;
    nb.lists.resize(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        auto found = index.radius_search(cloud.point(i), radius);
        auto &dst = nb.lists[i];
        dst.reserve(found.size());
        for (const auto &n : found) {
            if (n.distance > 0.0) dst.push_back(n);
        }
    }
    return nb;
}

std::vector<FpfhDescriptor> spfh_from(const PointCloud &cloud, const Neighbourhood &nb) {
    std::vector<FpfhDescriptor> out(cloud.size(), FpfhDescriptor::Zero());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        FpfhDescriptor &h = out[i];
        std::size_t valid = 0;
        for (const auto &n : nb.lists[i]) {
            const auto f = pair_features(cloud.point(i), cloud.normal(i), cloud.point(n.index), cloud.normal(n.index));
            if (!f) continue;
            const auto bins = feature_bins(*f);
            h[bins[0]] += 1.0;
            h[kBinsPerFeature + bins[1]] += 1.0;
            h[2 * kBinsPerFeature + bins[2]] += 1.0;
            ++valid;
        }
        if (valid > 0) h *= 100.0 / static_cast<double>(valid);
    }
    return out;
}

void require_input(const PointCloud &cloud, double radius) {
    if (!cloud.has_normals()) throw PreconditionError("normals required");
    if (cloud.size() < 2) throw PreconditionError("FPFH needs at least 2 points");
    if (!(radius > 0.0)) throw PreconditionError("feature radius must be positive");
}

}  // namespace

void FeatureParams::validate() const {
    if (normal_k < 3) throw PreconditionError(fmt::format("normal_k must be >= 3, got {}", normal_k));
    if (!(feature_radius > 0.0)) throw PreconditionError("feature_radius must be positive");
    if (!(voxel_size >= 0.0)) throw PreconditionError("voxel_size must be >= 0");
    if (!viewpoint.allFinite()) throw PreconditionError("viewpoint must be finite");
}

std::optional<PairFeatures> pair_features(const Vec3 &p1, const Vec3 &n1, const Vec3 &p2, const Vec3 &n2) {
    Vec3 d = p2 - p1;
    const double len = d.norm();
    if (!(len > 0.0)) return std::nullopt;
    d /= len;

    const double c1 = std::abs(n1.dot(d));
    const double c2 = std::abs(n2.dot(d));
    const bool first_is_source = c1 > c2 || (c1 == c2 && !lex_less(p2, p1));
    const Vec3 &ns = first_is_source ? n1 : n2;
    const Vec3 &nt = first_is_source ? n2 : n1;
    if (!first_is_source) d = -d;

    const Vec3 &u = ns;
    Vec3 v = d.cross(u);
    const double vn = v.norm();
    if (vn < 1e-9) return std::nullopt;
    v /= vn;
    const Vec3 w = u.cross(v);

    PairFeatures f;
    f.alpha = v.dot(nt);
    f.phi = u.dot(d);
    f.theta = std::atan2(w.dot(nt), u.dot(nt));
    if (f.theta == -M_PI) f.theta = M_PI;
    f.distance = len;
    return f;
}

std::array<int, 3> feature_bins(const PairFeatures &f) {
    return {bin_of(f.alpha, -1.0, 1.0), bin_of(f.phi, -1.0, 1.0), bin_of(f.theta, -M_PI, M_PI)};
}

std::vector<FpfhDescriptor> compute_spfh(const PointCloud &cloud, const NeighborIndex &index, double radius) {
    require_input(cloud, radius);
    return spfh_from(cloud, gather(cloud, index, radius));
}

FpfhResult compute_fpfh(const PointCloud &cloud, const NeighborIndex &index, double radius) {
    require_input(cloud, radius);
    const Neighbourhood nb = gather(cloud, index, radius);
    const auto spfh = spfh_from(cloud, nb);

    FpfhResult res;
    res.descriptors.assign(cloud.size(), FpfhDescriptor::Zero());
    res.empty.assign(cloud.size(), false);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const auto &list = nb.lists[i];
        FpfhDescriptor &d = res.descriptors[i];
        if (!list.empty()) {
            FpfhDescriptor acc = FpfhDescriptor::Zero();
            for (const auto &n : list) acc += spfh[n.index] / n.distance;
            d = spfh[i] + acc / static_cast<double>(list.size());
            normalize_blocks(d);
        }
        if (!(d.sum() > 0.0)) {
            d.setZero();
            res.empty[i] = true;
            ++res.empty_count;
        }
    }
    return res;
}

FpfhResult compute_fpfh(const PointCloud &cloud, const FeatureParams &params) {
    params.validate();
    require_input(cloud, params.feature_radius);
    return compute_fpfh(cloud, build_index(cloud), params.feature_radius);
}

void write_descriptors(const FpfhResult &result, double radius, const std::filesystem::path &meta_path,
                       const std::filesystem::path &raw_path) {
    nlohmann::json meta = {{"n", result.descriptors.size()}, {"dims", kDescriptorSize}, {"radius", radius},
                           {"empty_count", result.empty_count}};
    std::ofstream m(meta_path);
    m << meta.dump(2) << "\n";
    std::ofstream raw(raw_path, std::ios::binary);
    for (const auto &d : result.descriptors) {
        for (int k = 0; k < kDescriptorSize; ++k) {
            const auto v = static_cast<float>(d[k]);
            unsigned char bytes[4];
            std::memcpy(bytes, &v, 4);
            if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + 4);
            raw.write(reinterpret_cast<const char *>(bytes), 4);
        }
    }
    if (!m || !raw) throw FormatError(fmt::format("cannot write descriptors to {}", raw_path.string()));
}

}  // namespace xsreg::features
