// Copyright 2026 The xsreg Authors
// SPDX-License-Identifier: Apache-2.0

#include "xsreg/registration/registration.h"

#include <Eigen/Cholesky>
#include <Eigen/SVD>
#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>

#include "xsreg/core/normals.h"
#include "xsreg/core/sampling.h"

namespace xsreg::registration {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Hypothesis {
    RigidTransform transform;
    std::size_t inliers = 0;
    double rmse = std::numeric_limits<double>::infinity();
};

Hypothesis score(const PointCloud &source, const PointCloud &target, const std::vector<Correspondence> &corrs,
                 const RigidTransform &t, double gate2, std::vector<std::size_t> *inlier_ids = nullptr) {
    Hypothesis h{t, 0, 0.0};
    double sum = 0.0;
    for (std::size_t i = 0; i < corrs.size(); ++i) {
        const double d2 = (t.apply(source.point(corrs[i].source)) - target.point(corrs[i].target)).squaredNorm();
        if (d2 <= gate2) {
            ++h.inliers;
            sum += d2;
            if (inlier_ids) inlier_ids->push_back(i);
        }
    }
    h.rmse = h.inliers ? std::sqrt(sum / static_cast<double>(h.inliers)) : std::numeric_limits<double>::infinity();
    return h;
}

bool better(const Hypothesis &a, const Hypothesis &b) {
    return a.inliers > b.inliers || (a.inliers == b.inliers && a.rmse < b.rmse);
}

bool edges_agree(const PointCloud &source, const PointCloud &target, const std::vector<Correspondence> &corrs,
                 const std::vector<std::size_t> &sample, double ratio) {
    for (std::size_t a = 0; a < sample.size(); ++a) {
        for (std::size_t b = a + 1; b < sample.size(); ++b) {
            const auto &ca = corrs[sample[a]];
            const auto &cb = corrs[sample[b]];
            const double ls = (source.point(ca.source) - source.point(cb.source)).norm();
            const double lt = (target.point(ca.target) - target.point(cb.target)).norm();
            if (std::min(ls, lt) < ratio * std::max(ls, lt)) return false;
        }
    }
    return true;
}

// Rotation of the small-angle vector w applied exactly (Rodrigues).
RigidTransform from_twist(const Eigen::Matrix<double, 6, 1> &x) {
    const Vec3 w = x.head<3>();
    const double angle = w.norm();
    if (angle == 0.0) return RigidTransform(Mat3::Identity(), x.tail<3>());
    return RigidTransform::from_axis_angle(w / angle, angle, x.tail<3>());
}

struct IcpPairs {
    std::vector<Vec3> src;
    std::vector<Vec3> tgt;
    std::vector<std::size_t> tgt_index;
    double rmse = 0.0;
};

IcpPairs gather_pairs(const PointCloud &source, const PointCloud &target, const NeighborIndex &index,
                      const RigidTransform &t, double gate) {
    IcpPairs p;
    double sum = 0.0;
    for (const auto &s : source.points()) {
        const Vec3 q = t.apply(s);
        const Neighbor nb = index.nearest(q);
        if (nb.distance <= gate) {
            p.src.push_back(q);
            p.tgt.push_back(target.point(nb.index));
            p.tgt_index.push_back(nb.index);
            sum += nb.distance * nb.distance;
        }
    }
    if (!p.src.empty()) p.rmse = std::sqrt(sum / static_cast<double>(p.src.size()));
    return p;
}

RigidTransform point_to_plane_step(const IcpPairs &p, const PointCloud &target) {
    Eigen::Matrix<double, 6, 6> ata = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> atb = Eigen::Matrix<double, 6, 1>::Zero();
    for (std::size_t i = 0; i < p.src.size(); ++i) {
        const Vec3 &n = target.normal(p.tgt_index[i]);
        Eigen::Matrix<double, 6, 1> row;
        row.head<3>() = p.src[i].cross(n);
        row.tail<3>() = n;
        const double r = (p.tgt[i] - p.src[i]).dot(n);
        ata += row * row.transpose();
        atb += row * r;
    }
    Eigen::LDLT<Eigen::Matrix<double, 6, 6>> ldlt(ata);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
        throw DegenerateError("degenerate correspondence set");
    }
    const Eigen::Matrix<double, 6, 1> x = ldlt.solve(atb);
    if (!x.allFinite()) throw DegenerateError("degenerate correspondence set");
    return from_twist(x);
}

PointCloud with_normals(const PointCloud &cloud, const features::FeatureParams &fp,
                        features::NormalOrientation orientation) {
    if (cloud.size() < 3) throw PreconditionError("at least 3 points are needed for normals");
    const std::size_t k = std::min(fp.normal_k, cloud.size());
    if (orientation == features::NormalOrientation::kAwayFromCentroid) {
        return estimate_normals_outward(cloud, k).cloud;
    }
    return estimate_normals(cloud, k, fp.viewpoint).cloud;
}

}  // namespace

RegistrationError::RegistrationError(std::string stage, const std::string &message, double best_fitness)
    : Error(fmt::format("{}: {}", stage, message)), stage_(std::move(stage)), best_fitness_(best_fitness) {}

IcpLostTrack::IcpLostTrack(const RigidTransform &last, std::size_t iteration)
    : Error(fmt::format("icp lost track at iteration {}", iteration)), last_(last), iteration_(iteration) {}

void RansacParams::validate() const {
    if (!(max_corr_dist > 0.0)) throw PreconditionError("ransac max_corr_dist must be positive");
    if (sample_size < 3) throw PreconditionError("ransac sample_size must be >= 3");
    if (max_iters == 0) throw PreconditionError("ransac max_iters must be >= 1");
    if (!(confidence > 0.0 && confidence < 1.0)) throw PreconditionError("ransac confidence must be in (0, 1)");
    if (!(edge_ratio > 0.0 && edge_ratio <= 1.0)) throw PreconditionError("ransac edge_ratio must be in (0, 1]");
}

void IcpParams::validate() const {
    if (!(max_corr_dist > 0.0)) throw PreconditionError("icp max_corr_dist must be positive");
    if (max_iters == 0) throw PreconditionError("icp max_iters must be >= 1");
    if (!(rel_rmse_tol >= 0.0)) throw PreconditionError("icp rel_rmse_tol must be >= 0");
}

RigidTransform fit_rigid(std::span<const Vec3> source, std::span<const Vec3> target,
                         std::span<const double> weights) {
    const std::size_t n = source.size();
    if (n != target.size()) throw PreconditionError("fit_rigid needs equal-length point lists");
    if (!weights.empty() && weights.size() != n) throw PreconditionError("fit_rigid weight count mismatch");
    if (n < 3) throw PreconditionError("fit_rigid needs at least 3 correspondences");

    double wsum = 0.0;
    Vec3 cs = Vec3::Zero(), ct = Vec3::Zero();
    for (std::size_t i = 0; i < n; ++i) {
        const double w = weights.empty() ? 1.0 : weights[i];
        if (!(w >= 0.0)) throw PreconditionError("fit_rigid weights must be non-negative");
        wsum += w;
        cs += w * source[i];
        ct += w * target[i];
    }
    if (!(wsum > 0.0)) throw PreconditionError("fit_rigid weights sum to zero");
    cs /= wsum;
    ct /= wsum;

    Mat3 h = Mat3::Zero();
    for (std::size_t i = 0; i < n; ++i) {
        const double w = weights.empty() ? 1.0 : weights[i];
        h += w * (source[i] - cs) * (target[i] - ct).transpose();
    }
    Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vec3 sv = svd.singularValues();
    if (!(sv(1) > 1e-12 * std::max(sv(0), 1e-300))) throw DegenerateError("degenerate correspondence set");
    const Mat3 &u = svd.matrixU();
    const Mat3 &v = svd.matrixV();
    Mat3 d = Mat3::Identity();
    if ((v * u.transpose()).determinant() < 0.0) d(2, 2) = -1.0;
    const Mat3 r = v * d * u.transpose();
    return RigidTransform(r, ct - r * cs);
}

std::vector<Correspondence> match_features(const std::vector<features::FpfhDescriptor> &source,
                                           const std::vector<features::FpfhDescriptor> &target, bool mutual) {
    if (source.empty() || target.empty()) throw PreconditionError("match_features needs non-empty descriptor lists");
    using Tree = KdTree<features::kDescriptorSize>;
    const Tree tindex{std::span<const features::FpfhDescriptor>(target)};
    std::vector<Correspondence> out;
    out.reserve(source.size());
    for (std::size_t i = 0; i < source.size(); ++i) {
        const Neighbor nb = tindex.nearest(source[i]);
        out.push_back({i, nb.index, nb.distance});
    }
    if (!mutual) return out;
    const Tree sindex{std::span<const features::FpfhDescriptor>(source)};
    std::vector<Correspondence> kept;
    for (const auto &c : out) {
        if (sindex.nearest(target[c.target]).index == c.source) kept.push_back(c);
    }
    return kept;
}

AlignmentQuality evaluate_alignment(const PointCloud &source, const NeighborIndex &target_index,
                                    const RigidTransform &t, double max_dist) {
    AlignmentQuality q;
    if (source.empty()) return q;
    double sum = 0.0;
    for (const auto &p : source.points()) {
        const Neighbor nb = target_index.nearest(t.apply(p));
        if (nb.distance <= max_dist) {
            ++q.inliers;
            sum += nb.distance * nb.distance;
        }
    }
    q.fitness = static_cast<double>(q.inliers) / static_cast<double>(source.size());
    q.inlier_rmse = q.inliers ? std::sqrt(sum / static_cast<double>(q.inliers)) : 0.0;
    return q;
}

RegistrationResult ransac_global(const PointCloud &source, const PointCloud &target,
                                 const std::vector<Correspondence> &corrs, const RansacParams &params) {
    params.validate();
    const auto t0 = Clock::now();
    const std::size_t n = corrs.size();
    const std::size_t s = params.sample_size;
    if (n < s) {
        throw PreconditionError(fmt::format("ransac needs at least {} correspondences, got {}", s, n));
    }
    for (const auto &c : corrs) {
        if (c.source >= source.size() || c.target >= target.size()) {
            throw PreconditionError("correspondence index out of range");
        }
    }

    const uint64_t seed = params.entropy ? (uint64_t{std::random_device{}()} << 32) ^ std::random_device{}()
                                         : params.seed;
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    const double gate2 = params.max_corr_dist * params.max_corr_dist;

    Hypothesis best;
    std::size_t needed = params.max_iters;
    std::size_t iter = 0;
    std::vector<std::size_t> sample(s);
    std::vector<Vec3> ps(s), pt(s);
    for (; iter < std::min(needed, params.max_iters); ++iter) {
        // Distinct indices by rejection; s is tiny relative to n.
        for (std::size_t k = 0; k < s; ++k) {
            std::size_t c;
            do {
                c = pick(rng);
            } while (std::find(sample.begin(), sample.begin() + static_cast<std::ptrdiff_t>(k), c) !=
                     sample.begin() + static_cast<std::ptrdiff_t>(k));
            sample[k] = c;
        }
        if (!edges_agree(source, target, corrs, sample, params.edge_ratio)) continue;
        for (std::size_t k = 0; k < s; ++k) {
            ps[k] = source.point(corrs[sample[k]].source);
            pt[k] = target.point(corrs[sample[k]].target);
        }
        RigidTransform t;
        try {
            t = fit_rigid(ps, pt);
        } catch (const DegenerateError &) {
            continue;
        }
        const Hypothesis h = score(source, target, corrs, t, gate2);
        if (h.inliers == 0 || !better(h, best)) continue;
        best = h;
        const double w = static_cast<double>(best.inliers) / static_cast<double>(n);
        const double ws = std::pow(w, static_cast<double>(s));
        if (ws >= 1.0) {
            needed = iter + 1;
        } else if (ws > 0.0) {
            const double k = std::log(1.0 - params.confidence) / std::log1p(-ws);
            if (k < static_cast<double>(params.max_iters)) needed = static_cast<std::size_t>(std::ceil(k));
        }
    }
    if (best.inliers < s) {
        throw RegistrationError("global", fmt::format("global registration failed: best hypothesis had {} inliers "
                                                      "of {} correspondences",
                                                      best.inliers, n),
                                static_cast<double>(best.inliers) / static_cast<double>(n));
    }

    std::vector<std::size_t> inlier_ids;
    score(source, target, corrs, best.transform, gate2, &inlier_ids);
    std::vector<Vec3> is, it;
    for (auto i : inlier_ids) {
        is.push_back(source.point(corrs[i].source));
        it.push_back(target.point(corrs[i].target));
    }
    try {
        const Hypothesis refit = score(source, target, corrs, fit_rigid(is, it), gate2);
        if (refit.inliers >= best.inliers) best = refit;
    } catch (const DegenerateError &) {
    }

    RegistrationResult r;
    r.transform = best.transform;
    r.fitness = static_cast<double>(best.inliers) / static_cast<double>(n);
    r.inlier_rmse = best.rmse;
    r.iterations = iter;
    r.wall_time = seconds_since(t0);
    return r;
}

RegistrationResult icp(const PointCloud &source, const PointCloud &target, const RigidTransform &init,
                       const IcpParams &params) {
    if (target.empty()) throw PreconditionError("icp needs a non-empty target");
    return icp(source, target, build_index(target), init, params);
}

RegistrationResult icp(const PointCloud &source, const PointCloud &target, const NeighborIndex &target_index,
                       const RigidTransform &init, const IcpParams &params) {
    params.validate();
    const auto t0 = Clock::now();
    if (source.empty() || target.empty()) throw PreconditionError("icp needs non-empty clouds");
    if (params.variant == IcpVariant::kPointToPlane && !target.has_normals()) {
        throw PreconditionError("point-to-plane icp requires target normals");
    }

    RigidTransform t = init;
    IcpPairs pairs = gather_pairs(source, target, target_index, t, params.max_corr_dist);
    if (pairs.src.size() < 3) throw IcpLostTrack(t, 0);

    RegistrationResult r;
    r.rmse_history.push_back(pairs.rmse);
    for (std::size_t it = 1; it <= params.max_iters; ++it) {
        RigidTransform delta;
        try {
            delta = params.variant == IcpVariant::kPointToPoint ? fit_rigid(pairs.src, pairs.tgt)
                                                                : point_to_plane_step(pairs, target);
        } catch (const DegenerateError &) {
            throw IcpLostTrack(t, it);
        }
        t = delta * t;
        const double prev = pairs.rmse;
        pairs = gather_pairs(source, target, target_index, t, params.max_corr_dist);
        r.iterations = it;
        if (pairs.src.size() < 3) throw IcpLostTrack(t, it);
        r.rmse_history.push_back(pairs.rmse);
        if (pairs.rmse <= 1e-12 || std::abs(prev - pairs.rmse) <= params.rel_rmse_tol * prev) break;
    }

    r.transform = t;
    r.fitness = static_cast<double>(pairs.src.size()) / static_cast<double>(source.size());
    r.inlier_rmse = pairs.rmse;
    r.wall_time = seconds_since(t0);
    return r;
}

RegistrationResult register_global(const PointCloud &source, const PointCloud &target, const RansacParams &rp,
                                   const features::FeatureParams &fp, double eval_dist) {
    rp.validate();
    fp.validate();
    if (source.empty()) throw PreconditionError("empty source cloud");
    if (target.empty()) throw PreconditionError("empty target cloud");
    const auto t0 = Clock::now();
    RegistrationResult r;
    auto lap = [&, t = Clock::now()](const char *stage) mutable {
        r.stages.push_back({stage, seconds_since(t)});
        t = Clock::now();
    };

    PointCloud src = fp.voxel_size > 0.0 ? voxel_downsample(source.without_normals(), fp.voxel_size)
                                         : source.without_normals();
    PointCloud tgt = fp.voxel_size > 0.0 ? voxel_downsample(target.without_normals(), fp.voxel_size)
                                         : target.without_normals();
    lap("downsample");
    src = with_normals(src, fp, fp.source_orientation);
    tgt = with_normals(tgt, fp, fp.target_orientation);
    lap("normals");
    const NeighborIndex src_index = build_index(src);
    const NeighborIndex tgt_index = build_index(tgt);
    const auto fs = features::compute_fpfh(src, src_index, fp.feature_radius);
    const auto ft = features::compute_fpfh(tgt, tgt_index, fp.feature_radius);
    lap("features");

    // Points without a descriptor cannot be matched meaningfully.
    std::vector<std::size_t> smap, tmap;
    std::vector<features::FpfhDescriptor> ds, dt;
    for (std::size_t i = 0; i < src.size(); ++i) {
        if (!fs.empty[i]) smap.push_back(i), ds.push_back(fs.descriptors[i]);
    }
    for (std::size_t i = 0; i < tgt.size(); ++i) {
        if (!ft.empty[i]) tmap.push_back(i), dt.push_back(ft.descriptors[i]);
    }
    if (ds.size() < rp.sample_size || dt.empty()) {
        throw RegistrationError("features", "too few points with usable descriptors");
    }
    auto corrs = match_features(ds, dt, rp.mutual_filter);
    for (auto &c : corrs) {
        c.source = smap[c.source];
        c.target = tmap[c.target];
    }
    lap("matching");
    if (corrs.size() < rp.sample_size) throw RegistrationError("matching", "too few correspondences");

    RegistrationResult g;
    try {
        g = ransac_global(src, tgt, corrs, rp);
    } catch (const PreconditionError &e) {
        throw RegistrationError("global", e.what());
    }
    lap("ransac");

    r.transform = g.transform;
    r.iterations = g.iterations;
    const auto q = evaluate_alignment(source, build_index(target), r.transform, eval_dist);
    r.fitness = q.fitness;
    r.inlier_rmse = q.inlier_rmse;
    r.wall_time = seconds_since(t0);
    return r;
}

RegistrationResult register_global_icp(const PointCloud &source, const PointCloud &target, const RansacParams &rp,
                                       const IcpParams &ip, const features::FeatureParams &fp) {
    ip.validate();
    const auto t0 = Clock::now();
    RegistrationResult global = register_global(source, target, rp, fp, ip.max_corr_dist);

    const auto t_icp = Clock::now();
    PointCloud tgt = target;
    if (ip.variant == IcpVariant::kPointToPlane && !tgt.has_normals()) {
        tgt = with_normals(target, fp, fp.target_orientation);
    }
    const NeighborIndex index = build_index(tgt);
    RegistrationResult refined;
    try {
        refined = icp(source, tgt, index, global.transform, ip);
    } catch (const IcpLostTrack &e) {
        throw RegistrationError("icp", e.what());
    }

    RegistrationResult r = refined;
    r.stages = global.stages;
    r.stages.push_back({"icp", seconds_since(t_icp)});
    const auto after = evaluate_alignment(source, index, refined.transform, ip.max_corr_dist);
    r.fitness = after.fitness;
    r.inlier_rmse = after.inlier_rmse;
    if (global.fitness > 0.0 && (after.fitness == 0.0 || after.inlier_rmse > global.inlier_rmse)) {
        r.transform = global.transform;
        r.fitness = global.fitness;
        r.inlier_rmse = global.inlier_rmse;
        r.refinement_rejected = true;
    }
    r.wall_time = seconds_since(t0);
    return r;
}

}  // namespace xsreg::registration
