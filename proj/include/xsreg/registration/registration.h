// Copyright 2026 The xsreg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "xsreg/core/error.h"
#include "xsreg/core/geometry.h"
#include "xsreg/core/kdtree.h"
#include "xsreg/features/fpfh.h"

namespace xsreg::registration {

struct Correspondence {
    std::size_t source;
    std::size_t target;
    double distance;  // descriptor distance
};

struct RansacParams {
    double max_corr_dist = 0.015;
    std::size_t sample_size = 3;
    std::size_t max_iters = 100000;
    double confidence = 0.999;
    double edge_ratio = 0.9;
    uint64_t seed = 0;
    bool entropy = false;        // seed from the OS instead of `seed`
    bool mutual_filter = false;  // keep only mutually nearest descriptor matches

    void validate() const;
};

enum class IcpVariant { kPointToPoint, kPointToPlane };

struct IcpParams {
    double max_corr_dist = 0.005;
    std::size_t max_iters = 50;
    double rel_rmse_tol = 1e-6;
    IcpVariant variant = IcpVariant::kPointToPoint;

    void validate() const;
};

struct StageTime {
    std::string stage;
    double seconds = 0.0;
};

struct RegistrationResult {
    RigidTransform transform;
    double fitness = 0.0;      // fraction of source points with a target neighbour within the gate
    double inlier_rmse = 0.0;  // over those points, meters
    std::size_t iterations = 0;
    double wall_time = 0.0;
    std::vector<double> rmse_history;  // ICP: one entry per evaluation, starting with the initial pose
    std::vector<StageTime> stages;
    bool refinement_rejected = false;  // combined pipeline kept the global pose
};

/// A registration stage failed; `stage` names it.
class RegistrationError : public Error {
public:
    RegistrationError(std::string stage, const std::string &message, double best_fitness = 0.0);
    const std::string &stage() const { return stage_; }
    double best_fitness() const { return best_fitness_; }

private:
    std::string stage_;
    double best_fitness_;
};

/// ICP found no correspondence within the gate.
class IcpLostTrack : public Error {
public:
    IcpLostTrack(const RigidTransform &last, std::size_t iteration);
    const RigidTransform &last_transform() const { return last_; }
    std::size_t iteration() const { return iteration_; }

private:
    RigidTransform last_;
    std::size_t iteration_;
};

/// Weighted least-squares rigid fit (cross-covariance SVD with reflection fix).
RigidTransform fit_rigid(std::span<const Vec3> source, std::span<const Vec3> target,
                         std::span<const double> weights = {});

std::vector<Correspondence> match_features(const std::vector<features::FpfhDescriptor> &source,
                                           const std::vector<features::FpfhDescriptor> &target, bool mutual);

struct AlignmentQuality {
    double fitness = 0.0;
    double inlier_rmse = 0.0;
    std::size_t inliers = 0;
};

AlignmentQuality evaluate_alignment(const PointCloud &source, const NeighborIndex &target_index,
                                    const RigidTransform &t, double max_dist);

RegistrationResult ransac_global(const PointCloud &source, const PointCloud &target,
                                 const std::vector<Correspondence> &corrs, const RansacParams &params);

RegistrationResult icp(const PointCloud &source, const PointCloud &target, const RigidTransform &init,
                       const IcpParams &params);
RegistrationResult icp(const PointCloud &source, const PointCloud &target, const NeighborIndex &target_index,
                       const RigidTransform &init, const IcpParams &params);

/// Features, matching and RANSAC. Fitness and RMSE are reported at `eval_dist`
/// so that this result is comparable with the refined one.
RegistrationResult register_global(const PointCloud &source, const PointCloud &target, const RansacParams &rp,
                                   const features::FeatureParams &fp, double eval_dist);

/// register_global followed by ICP on the full clouds. If ICP ends with a larger
/// RMSE than the global pose at the ICP gate, the global pose is returned.
RegistrationResult register_global_icp(const PointCloud &source, const PointCloud &target, const RansacParams &rp,
                                       const IcpParams &ip, const features::FeatureParams &fp);

}  // namespace xsreg::registration
