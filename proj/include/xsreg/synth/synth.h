// Copyright 2026 The xsreg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "xsreg/core/geometry.h"
#include "xsreg/eval/evaluation.h"
#include "xsreg/io/depth.h"
#include "xsreg/io/volume.h"
#include "xsreg/preprocess/preprocess.h"

namespace xsreg::synth {

struct Aabb {
    Vec3 min;
    Vec3 max;
};

/// Closed surface given as the zero set of a field that is negative inside.
/// The field is 1-Lipschitz, so |value(p)| never exceeds the distance from p
/// to the surface and can drive sphere tracing.
class ImplicitSurface {
public:
    virtual ~ImplicitSurface() = default;
    virtual double value(const Vec3 &p) const = 0;
    /// Box containing the whole surface.
    virtual Aabb bounds() const = 0;
};

std::shared_ptr<const ImplicitSurface> make_sphere(const Vec3 &center, double radius);

/// Head-like composite: cranium and jaw ellipsoids fused with smooth unions,
/// a nose wedge, brow, cheeks, ears and carved eye sockets.
/// Frame: x left to right, y towards the back of the head, z towards the top.
struct HeadShape {
    Vec3 scale = Vec3::Ones();
    Vec3 nose_offset = Vec3::Zero();
    Vec3 eye_offset = Vec3::Zero();
    Vec3 jaw_offset = Vec3::Zero();
};

/// Per-subject variation: axis scales in [0.92, 1.08], feature offsets up to 3 mm.
HeadShape random_head_shape(uint64_t seed);
std::shared_ptr<const ImplicitSurface> make_head(const HeadShape &shape = {});

/// Samples `surface` on a regular grid of `spacing` over its bounds.
io::ScalarVolume sample_volume(const ImplicitSurface &surface, double spacing);

/// Either an implicit surface (rendered exactly by ray marching) or a point
/// set (rendered by 3x3 pixel splats).
struct Subject {
    std::shared_ptr<const ImplicitSurface> implicit;
    PointCloud cloud;

    static Subject from_implicit(std::shared_ptr<const ImplicitSurface> s);
    static Subject from_cloud(PointCloud c);
    bool is_implicit() const { return static_cast<bool>(implicit); }
};

/// Horizontal square table top z = height (world frame).
struct TableSpec {
    double height = 0.0;
    Vec3 center = Vec3::Zero();  // z ignored
    double half_extent = 0.3;
};

struct NoiseSpec {
    double sigma = 0.0;             // depth noise, meters
    std::size_t outlier_count = 0;  // pixels replaced by uniform depths in [0.1, 1.5] m
    double dropout = 0.0;           // probability of zeroing a pixel
};

struct SceneSpec {
    Subject subject;
    RigidTransform subject_pose;  // subject frame -> world
    std::optional<TableSpec> table;
    io::CameraIntrinsics intrinsics;
    RigidTransform camera_pose;  // camera frame -> world
    NoiseSpec noise;
    uint64_t seed = 0;
    /// Table pixels pushed further than this from the plane by noise are
    /// labelled as outliers.
    double table_label_dist = 0.01;

    void validate() const;
};

enum class PixelLabel : uint8_t { kNone = 0, kSubject = 1, kTable = 2, kOutlier = 3 };

struct RenderResult {
    io::DepthFrame frame;
    std::vector<PixelLabel> labels;  // one per pixel, row-major
};

/// Camera looking from `eye` at `target`; the image "up" follows `up`.
RigidTransform look_at(const Vec3 &eye, const Vec3 &target, const Vec3 &up);

/// Noiseless camera-frame depth per pixel (0 where nothing is hit), and labels.
struct CleanDepth {
    std::vector<double> depth;
    std::vector<PixelLabel> labels;
};
CleanDepth render_clean(const SceneSpec &scene);

/// Z-buffered subject and table, then Gaussian noise, u16 quantisation,
/// dropout and outliers. Deterministic for a fixed scene seed.
/// Throws PreconditionError when no subject pixel is visible.
RenderResult render_depth(const SceneSpec &scene);

struct SynthPair {
    std::string id;
    PointCloud source;
    io::DepthFrame target;
    RigidTransform gt;  // source frame -> camera frame
    std::vector<PixelLabel> labels;
};

/// Dense source sampling of the unposed subject plus the rendered target.
/// Implicit subjects are sampled through a 2 mm volume and its isosurface.
PointCloud dense_source(const Subject &subject, double volume_spacing = 0.002);
SynthPair make_pair(const SceneSpec &scene, std::size_t source_n);

/// Labels of the points of a reprojected frame, via their pixel indices.
std::vector<PixelLabel> point_labels(const std::vector<PixelLabel> &pixel_labels,
                                     const std::vector<std::size_t> &pixels);

enum class Difficulty { kEasy, kPaperLike };

struct DifficultyPreset {
    double max_rotation_deg = 10.0;
    double max_translation_m = 0.05;
    double sigma = 0.001;
    std::size_t outlier_count = 0;
    double dropout = 0.0;
    bool table = false;
    bool crop_source = false;
};

DifficultyPreset preset(Difficulty d);
Difficulty parse_difficulty(const std::string &name);
std::string to_string(Difficulty d);

/// 512x512, f = 220 px, principal point at the centre, 1 mm depth units.
io::CameraIntrinsics default_intrinsics();

struct SuiteOptions {
    std::size_t subjects = 10;
    std::size_t views = 3;
    Difficulty difficulty = Difficulty::kPaperLike;
    uint64_t seed = 0;
    std::size_t source_n = 10000;
    std::size_t workers = 1;
    io::CameraIntrinsics intrinsics = default_intrinsics();

    void validate() const;
};

struct Suite {
    std::vector<SynthPair> pairs;
    std::vector<std::size_t> subject_of;  // subject index of each pair
    std::vector<std::size_t> view_of;
    std::vector<std::optional<TableSpec>> tables;
    std::vector<RigidTransform> camera_poses;  // camera -> world, per pair
};

/// Subject s, view v: one head shape and one prepared source per subject,
/// shared by its views. The subject rests on the table with a random
/// perturbation of the face-up pose (rotation and in-plane translation
/// bounded by the preset); cameras sit 0.45 m from the scene centre.
Suite generate_suite(const SuiteOptions &options);

/// Writes subject_XX/source.ply, subject_XX/view_Y.{json,raw},
/// subject_XX/view_Y_labels.raw, the prepared target subject_XX/view_Y_target.ply
/// and manifest.json. Returns the manifest entries.
std::vector<eval::PairEntry> write_suite(const Suite &suite, const std::filesystem::path &dir,
                                         const preprocess::PreprocessParams &target_params,
                                         std::size_t workers = 1);

}  // namespace xsreg::synth
