// Copyright 2026 The xsreg Authors
// SPDX-License-Identifier: Apache-2.0

#include "xsreg/synth/synth.h"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <random>

#include "xsreg/core/error.h"
#include "xsreg/core/parallel.h"
#include "xsreg/core/sampling.h"
#include "xsreg/io/ply.h"

namespace xsreg::synth {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kOutlierMin = 0.1;
constexpr double kOutlierMax = 1.5;

double deg(double d) { return d * kPi / 180.0; }

// Polynomial smooth minimum; 1-Lipschitz when both inputs are.
double smin(double a, double b, double k) {
    const double h = std::max(k - std::abs(a - b), 0.0) / k;
    return std::min(a, b) - h * h * k * 0.25;
}

double smax(double a, double b, double k) { return -smin(-a, -b, k); }

// Lower bound on the distance to an axis-aligned ellipsoid, signed.
double ellipsoid(const Vec3 &p, const Vec3 &c, const Vec3 &r) {
    const double k = (p - c).cwiseQuotient(r).norm();
    return (k - 1.0) * r.minCoeff();
}

class Sphere final : public ImplicitSurface {
public:
    Sphere(const Vec3 &c, double r) : c_(c), r_(r) {}
    double value(const Vec3 &p) const override { return (p - c_).norm() - r_; }
    Aabb bounds() const override { return {c_ - Vec3::Constant(r_), c_ + Vec3::Constant(r_)}; }

private:
    Vec3 c_;
    double r_;
};

class Head final : public ImplicitSurface {
public:
    explicit Head(const HeadShape &s) : s_(s), k_(s.scale.minCoeff()) {}

    double value(const Vec3 &p) const override {
        const Vec3 q = p.cwiseQuotient(s_.scale);
        return base(q) * k_;
    }

    Aabb bounds() const override {
        const Vec3 lo(-0.095, -0.13, -0.125);
        const Vec3 hi(0.095, 0.11, 0.13);
        const Vec3 pad = Vec3::Constant(0.01);
        return {lo.cwiseProduct(s_.scale) - pad, hi.cwiseProduct(s_.scale) + pad};
    }

private:
    double base(const Vec3 &q) const {
        const Vec3 &jaw = s_.jaw_offset;
        const Vec3 &eye = s_.eye_offset;
        double f = ellipsoid(q, {0, 0.01, 0.03}, {0.075, 0.095, 0.095});
        f = smin(f, ellipsoid(q, Vec3(0, -0.035, -0.045) + jaw, {0.062, 0.065, 0.07}), 0.03);
        f = smin(f, ellipsoid(q, Vec3(0, -0.075, -0.095) + jaw, {0.025, 0.02, 0.02}), 0.015);
        f = smin(f, ellipsoid(q, Vec3(0, -0.082, 0.035) + eye, {0.055, 0.018, 0.015}), 0.015);
        for (double side : {-1.0, 1.0}) {
            f = smin(f, ellipsoid(q, {side * 0.045, -0.06, -0.015}, {0.022, 0.022, 0.018}), 0.015);
            f = smin(f, ellipsoid(q, {side * 0.078, 0.01, 0.0}, {0.012, 0.025, 0.032}), 0.006);
        }
        f = smin(f, nose(q), 0.006);
        for (double side : {-1.0, 1.0}) {
            const double socket = (q - (Vec3(side * 0.032, -0.095, 0.012) + eye)).norm() - 0.017;
            f = smax(f, -socket, 0.006);
        }
        return f;
    }

    // Ellipsoid trimmed by two slanted planes meeting in a ridge at the front.
    double nose(const Vec3 &q) const {
        const Vec3 c = Vec3(0, -0.097, -0.02) + s_.nose_offset;
        const Vec3 r(0.014, 0.024, 0.03);
        const Vec3 tip = c - Vec3(0, r.y(), 0);
        const Vec3 n1 = Vec3(0.85, -0.53, 0).normalized();
        const Vec3 n2 = Vec3(-0.85, -0.53, 0).normalized();
        return std::max({ellipsoid(q, c, r), n1.dot(q - tip), n2.dot(q - tip)});
    }

    HeadShape s_;
    double k_;
};

Vec3 ray_direction(const io::CameraIntrinsics &k, std::size_t u, std::size_t v) {
    return {(static_cast<double>(u) - k.cx) / k.fx, (static_cast<double>(v) - k.cy) / k.fy, 1.0};
}

uint16_t quantize(double z, double scale) {
    const double q = std::round(z / scale);
    return static_cast<uint16_t>(std::clamp(q, 1.0, 65535.0));
}

void render_implicit(const SceneSpec &scene, const RigidTransform &cam_from_subject, CleanDepth &out) {
    const auto &k = scene.intrinsics;
    const ImplicitSurface &surface = *scene.subject.implicit;
    const Aabb box = surface.bounds();
    const Vec3 center_s = 0.5 * (box.min + box.max);
    const double radius = 0.5 * (box.max - box.min).norm();
    const Vec3 center_c = cam_from_subject.apply(center_s);
    const RigidTransform subject_from_cam = cam_from_subject.inverse();
    const Vec3 origin_s = subject_from_cam.translation();
    const Mat3 &rot = subject_from_cam.rotation();

    for (std::size_t v = 0; v < k.height; ++v) {
        for (std::size_t u = 0; u < k.width; ++u) {
            const Vec3 d = ray_direction(k, u, v);
            const double dlen = d.norm();
            const Vec3 dn = d / dlen;
            const double b = dn.dot(center_c);
            const double disc = b * b - (center_c.squaredNorm() - radius * radius);
            if (disc < 0.0) continue;
            const double sq = std::sqrt(disc);
            double t = std::max(b - sq, 0.0);
            const double t_end = b + sq;
            if (t_end <= 0.0) continue;
            const Vec3 dir_s = rot * dn;
            bool hit = false;
            for (int step = 0; step < 2000 && t <= t_end; ++step) {
                const double f = surface.value(origin_s + t * dir_s);
                if (f < 1e-7) {
                    hit = true;
                    break;
                }
                t += f;
            }
            if (!hit) continue;
            const double z = t / dlen;
            const std::size_t idx = v * k.width + u;
            if (out.depth[idx] == 0.0 || z < out.depth[idx]) {
                out.depth[idx] = z;
                out.labels[idx] = PixelLabel::kSubject;
            }
        }
    }
}

void render_points(const SceneSpec &scene, const RigidTransform &cam_from_subject, CleanDepth &out) {
    const auto &k = scene.intrinsics;
    const auto w = static_cast<long>(k.width);
    const auto h = static_cast<long>(k.height);
    for (const Vec3 &p : scene.subject.cloud.points()) {
        const Vec3 c = cam_from_subject.apply(p);
        if (c.z() <= 0.0) continue;
        const long iu = std::lround(k.fx * c.x() / c.z() + k.cx);
        const long iv = std::lround(k.fy * c.y() / c.z() + k.cy);
        for (long dv = -1; dv <= 1; ++dv) {
            for (long du = -1; du <= 1; ++du) {
                const long uu = iu + du;
                const long vv = iv + dv;
                if (uu < 0 || vv < 0 || uu >= w || vv >= h) continue;
                const auto idx = static_cast<std::size_t>(vv * w + uu);
                if (out.depth[idx] == 0.0 || c.z() < out.depth[idx]) {
                    out.depth[idx] = c.z();
                    out.labels[idx] = PixelLabel::kSubject;
                }
            }
        }
    }
}

struct CameraPlane {
    Vec3 normal;
    double offset;  // normal . p == offset on the plane
};

CameraPlane table_plane_in_camera(const TableSpec &table, const RigidTransform &camera_pose) {
    const RigidTransform cam_from_world = camera_pose.inverse();
    const Vec3 n = cam_from_world.rotation() * Vec3::UnitZ();
    const Vec3 p0 = cam_from_world.apply(Vec3(table.center.x(), table.center.y(), table.height));
    return {n, n.dot(p0)};
}

void render_table(const SceneSpec &scene, CleanDepth &out) {
    const auto &k = scene.intrinsics;
    const TableSpec &table = *scene.table;
    const CameraPlane plane = table_plane_in_camera(table, scene.camera_pose);
    for (std::size_t v = 0; v < k.height; ++v) {
        for (std::size_t u = 0; u < k.width; ++u) {
            const Vec3 d = ray_direction(k, u, v);
            const double denom = plane.normal.dot(d);
            if (std::abs(denom) < 1e-12) continue;
            const double z = plane.offset / denom;  // d has unit z, so this is the depth
            if (z <= 0.0) continue;
            const Vec3 w = scene.camera_pose.apply(z * d);
            if (std::abs(w.x() - table.center.x()) > table.half_extent ||
                std::abs(w.y() - table.center.y()) > table.half_extent) {
                continue;
            }
            const std::size_t idx = v * k.width + u;
            if (out.depth[idx] == 0.0 || z < out.depth[idx]) {
                out.depth[idx] = z;
                out.labels[idx] = PixelLabel::kTable;
            }
        }
    }
}

}  // namespace

std::shared_ptr<const ImplicitSurface> make_sphere(const Vec3 &center, double radius) {
    if (!(radius > 0.0)) throw PreconditionError("sphere radius must be positive");
    return std::make_shared<Sphere>(center, radius);
}

HeadShape random_head_shape(uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> scale(0.92, 1.08);
    std::uniform_real_distribution<double> off(-0.003, 0.003);
    HeadShape s;
    s.scale = Vec3(scale(rng), scale(rng), scale(rng));
    s.nose_offset = Vec3(0.0, off(rng), off(rng));
    s.eye_offset = Vec3(0.0, off(rng), off(rng));
    s.jaw_offset = Vec3(0.0, off(rng), off(rng));
    return s;
}

std::shared_ptr<const ImplicitSurface> make_head(const HeadShape &shape) {
    if (!(shape.scale.minCoeff() > 0.0)) throw PreconditionError("head scale must be positive");
    return std::make_shared<Head>(shape);
}

io::ScalarVolume sample_volume(const ImplicitSurface &surface, double spacing) {
    if (!(spacing > 0.0)) throw PreconditionError("volume spacing must be positive");
    const Aabb box = surface.bounds();
    std::array<std::size_t, 3> dims{};
    for (int a = 0; a < 3; ++a) {
        dims[a] = static_cast<std::size_t>(std::ceil((box.max[a] - box.min[a]) / spacing)) + 1;
    }
    std::vector<double> values(dims[0] * dims[1] * dims[2]);
    std::size_t i = 0;
    for (std::size_t z = 0; z < dims[2]; ++z) {
        for (std::size_t y = 0; y < dims[1]; ++y) {
            for (std::size_t x = 0; x < dims[0]; ++x) {
                const Vec3 p = box.min + spacing * Vec3(static_cast<double>(x), static_cast<double>(y),
                                                        static_cast<double>(z));
                values[i++] = surface.value(p);
            }
        }
    }
    return io::ScalarVolume(dims, Vec3::Constant(spacing), box.min, std::move(values));
}

Subject Subject::from_implicit(std::shared_ptr<const ImplicitSurface> s) {
    if (!s) throw PreconditionError("null implicit surface");
    Subject out;
    out.implicit = std::move(s);
    return out;
}

Subject Subject::from_cloud(PointCloud c) {
    if (c.empty()) throw PreconditionError("subject cloud is empty");
    Subject out;
    out.cloud = std::move(c);
    return out;
}

void SceneSpec::validate() const {
    intrinsics.validate();
    if (!subject.is_implicit() && subject.cloud.empty()) throw PreconditionError("scene has no subject");
    if (!(noise.sigma >= 0.0)) throw PreconditionError("noise sigma must be >= 0");
    if (!(noise.dropout >= 0.0 && noise.dropout <= 1.0)) throw PreconditionError("dropout must be in [0, 1]");
    if (table && !(table->half_extent > 0.0)) throw PreconditionError("table half_extent must be positive");
    if (!(table_label_dist > 0.0)) throw PreconditionError("table_label_dist must be positive");
}

RigidTransform look_at(const Vec3 &eye, const Vec3 &target, const Vec3 &up) {
    const Vec3 z = target - eye;
    if (z.norm() < 1e-12) throw PreconditionError("look_at: eye and target coincide");
    const Vec3 zn = z.normalized();
    const Vec3 x = zn.cross(up);
    if (x.norm() < 1e-9) throw PreconditionError("look_at: up is parallel to the view direction");
    const Vec3 xn = x.normalized();
    const Vec3 yn = zn.cross(xn);
    Mat3 r;
    r.col(0) = xn;
    r.col(1) = yn;
    r.col(2) = zn;
    return {r, eye};
}

CleanDepth render_clean(const SceneSpec &scene) {
    scene.validate();
    const auto &k = scene.intrinsics;
    CleanDepth out;
    out.depth.assign(k.width * k.height, 0.0);
    out.labels.assign(k.width * k.height, PixelLabel::kNone);
    const RigidTransform cam_from_subject = compose(scene.camera_pose.inverse(), scene.subject_pose);
    if (scene.subject.is_implicit()) {
        render_implicit(scene, cam_from_subject, out);
    } else {
        render_points(scene, cam_from_subject, out);
    }
    if (scene.table) render_table(scene, out);
    return out;
}

RenderResult render_depth(const SceneSpec &scene) {
    CleanDepth clean = render_clean(scene);
    if (std::none_of(clean.labels.begin(), clean.labels.end(),
                     [](PixelLabel l) { return l == PixelLabel::kSubject; })) {
        throw PreconditionError("subject entirely outside the camera frustum");
    }
    const auto &k = scene.intrinsics;
    const std::size_t n = k.width * k.height;
    std::vector<uint16_t> depth(n, 0);
    std::vector<PixelLabel> labels = std::move(clean.labels);

    std::optional<CameraPlane> plane;
    if (scene.table) plane = table_plane_in_camera(*scene.table, scene.camera_pose);

    std::mt19937_64 rng(derive_seed(scene.seed, 0));
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (clean.depth[i] == 0.0) continue;
        double z = clean.depth[i];
        if (scene.noise.sigma > 0.0) z += scene.noise.sigma * gauss(rng);
        if (z <= 0.0) {
            labels[i] = PixelLabel::kNone;
            continue;
        }
        depth[i] = quantize(z, k.depth_scale);
        if (labels[i] == PixelLabel::kTable && plane) {
            const double zq = depth[i] * k.depth_scale;
            const Vec3 p = zq * ray_direction(k, i % k.width, i / k.width);
            if (std::abs(plane->normal.dot(p) - plane->offset) > scene.table_label_dist) {
                labels[i] = PixelLabel::kOutlier;
            }
        }
    }

    if (scene.noise.dropout > 0.0) {
        std::mt19937_64 drop_rng(derive_seed(scene.seed, 1));
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        for (std::size_t i = 0; i < n; ++i) {
            if (uni(drop_rng) < scene.noise.dropout) {
                depth[i] = 0;
                labels[i] = PixelLabel::kNone;
            }
        }
    }

    if (scene.noise.outlier_count > 0) {
        std::mt19937_64 out_rng(derive_seed(scene.seed, 2));
        std::uniform_real_distribution<double> range(kOutlierMin, kOutlierMax);
        for (std::size_t i : random_subsample_indices(n, scene.noise.outlier_count, derive_seed(scene.seed, 3))) {
            depth[i] = quantize(range(out_rng), k.depth_scale);
            labels[i] = PixelLabel::kOutlier;
        }
    }
    return {io::DepthFrame(k, std::move(depth)), std::move(labels)};
}

PointCloud dense_source(const Subject &subject, double volume_spacing) {
    if (!subject.is_implicit()) return subject.cloud.without_normals();
    return io::extract_isosurface_points(sample_volume(*subject.implicit, volume_spacing), 0.0).cloud;
}

SynthPair make_pair(const SceneSpec &scene, std::size_t source_n) {
    if (source_n == 0) throw PreconditionError("source_n must be >= 1");
    RenderResult r = render_depth(scene);
    SynthPair pair{"", random_subsample(dense_source(scene.subject), source_n, derive_seed(scene.seed, 4)),
                   std::move(r.frame), compose(scene.camera_pose.inverse(), scene.subject_pose),
                   std::move(r.labels)};
    return pair;
}

std::vector<PixelLabel> point_labels(const std::vector<PixelLabel> &pixel_labels,
                                     const std::vector<std::size_t> &pixels) {
    std::vector<PixelLabel> out;
    out.reserve(pixels.size());
    for (std::size_t p : pixels) {
        if (p >= pixel_labels.size()) throw PreconditionError("pixel index out of range");
        out.push_back(pixel_labels[p]);
    }
    return out;
}

DifficultyPreset preset(Difficulty d) {
    DifficultyPreset p;
    if (d == Difficulty::kPaperLike) {
        p.max_rotation_deg = 45.0;
        p.max_translation_m = 0.30;
        p.sigma = 0.003;
        p.outlier_count = 200;
        p.dropout = 0.01;
        p.table = true;
        p.crop_source = true;
    }
    return p;
}

Difficulty parse_difficulty(const std::string &name) {
    if (name == "easy") return Difficulty::kEasy;
    if (name == "paper-like") return Difficulty::kPaperLike;
    throw PreconditionError(fmt::format("unknown difficulty '{}' (expected easy or paper-like)", name));
}

std::string to_string(Difficulty d) { return d == Difficulty::kEasy ? "easy" : "paper-like"; }

io::CameraIntrinsics default_intrinsics() {
    io::CameraIntrinsics k;
    k.width = 512;
    k.height = 512;
    k.fx = 220.0;
    k.fy = 220.0;
    k.cx = 256.0;
    k.cy = 256.0;
    k.depth_scale = 0.001;
    return k;
}

void SuiteOptions::validate() const {
    if (subjects == 0) throw PreconditionError("subjects must be >= 1");
    if (views == 0) throw PreconditionError("views must be >= 1");
    if (source_n == 0) throw PreconditionError("source_n must be >= 1");
    intrinsics.validate();
}

namespace {

// Look-at point of every view; the subject is displaced from it by the preset translation.
const Vec3 kSceneCenter(0.0, 0.0, 0.08);
constexpr double kCameraDistance = 0.5;

struct SubjectSetup {
    Subject subject;
    PointCloud source;
    RigidTransform pose;
};

SubjectSetup setup_subject(const SuiteOptions &opt, const DifficultyPreset &pre, std::size_t s) {
    const uint64_t sseed = derive_seed(opt.seed, s);
    SubjectSetup out;
    out.subject = Subject::from_implicit(make_head(random_head_shape(derive_seed(sseed, 1))));
    const PointCloud dense = dense_source(out.subject);

    preprocess::PreprocessParams pp;
    pp.subsample_n = opt.source_n;
    pp.seed = derive_seed(sseed, 2);
    if (!pre.crop_source) {
        pp.crop_z_frac = 0.0;
        pp.crop_y_frac = 0.0;
    }
    out.source = preprocess::prepare_source(dense, pp);

    std::mt19937_64 rng(derive_seed(sseed, 3));
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    Vec3 axis;
    do {
        axis = Vec3(g(rng), g(rng), g(rng));
    } while (axis.norm() < 1e-6);
    const double angle = deg(pre.max_rotation_deg) * uni(rng);
    const double heading = 2.0 * kPi * uni(rng);
    const double shift = pre.max_translation_m * uni(rng);

    // Face up: the back of the head (+y) points down, the top (+z) along world +y.
    const Mat3 face_up = Eigen::AngleAxisd(-kPi / 2.0, Vec3::UnitX()).toRotationMatrix();
    const Mat3 rot = Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix() * face_up;
    double zmin = std::numeric_limits<double>::infinity();
    for (const Vec3 &p : dense.points()) zmin = std::min(zmin, (rot * p).z());
    out.pose = RigidTransform(rot, Vec3(shift * std::cos(heading), shift * std::sin(heading), -zmin));
    return out;
}

RigidTransform view_camera(uint64_t sseed, std::size_t v) {
    static const double kElevation[] = {70.0, 55.0, 55.0};
    static const double kAzimuth[] = {-90.0, -130.0, -50.0};
    std::mt19937_64 rng(derive_seed(sseed, 10 + v));
    std::uniform_real_distribution<double> jitter(-1.0, 1.0);
    const double el = deg(kElevation[v % 3] + 5.0 * jitter(rng));
    const double az = deg(kAzimuth[v % 3] + 10.0 * jitter(rng) + 20.0 * static_cast<double>(v / 3));
    const double dist = kCameraDistance + 0.03 * jitter(rng);
    const Vec3 eye = kSceneCenter + dist * Vec3(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
    return look_at(eye, kSceneCenter, Vec3::UnitY());
}

template <typename Fn>
void parallel_for_rethrow(std::size_t count, std::size_t workers, Fn &&fn) {
    std::vector<std::exception_ptr> errors(count);
    parallel_for(count, workers, [&](std::size_t i) {
        try {
            fn(i);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    });
    for (auto &e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace

Suite generate_suite(const SuiteOptions &options) {
    options.validate();
    const DifficultyPreset pre = preset(options.difficulty);

    std::vector<SubjectSetup> subjects(options.subjects);
    parallel_for_rethrow(options.subjects, options.workers,
                         [&](std::size_t s) { subjects[s] = setup_subject(options, pre, s); });

    const std::size_t total = options.subjects * options.views;
    Suite suite;
    std::vector<std::optional<SynthPair>> pairs(total);
    suite.subject_of.resize(total);
    suite.view_of.resize(total);
    suite.tables.resize(total);
    suite.camera_poses.resize(total);
    parallel_for_rethrow(total, options.workers, [&](std::size_t i) {
        const std::size_t s = i / options.views;
        const std::size_t v = i % options.views;
        const uint64_t sseed = derive_seed(options.seed, s);
        SceneSpec scene;
        scene.subject = subjects[s].subject;
        scene.subject_pose = subjects[s].pose;
        if (pre.table) {
            TableSpec t;
            t.height = 0.0;
            t.center = kSceneCenter;
            t.half_extent = pre.max_translation_m + 0.15;
            scene.table = t;
        }
        scene.intrinsics = options.intrinsics;
        scene.camera_pose = view_camera(sseed, v);
        scene.noise = {pre.sigma, pre.outlier_count, pre.dropout};
        scene.seed = derive_seed(sseed, 100 + v);
        RenderResult r = render_depth(scene);
        pairs[i] = SynthPair{fmt::format("s{:02}_v{}", s, v), subjects[s].source, std::move(r.frame),
                                   compose(scene.camera_pose.inverse(), scene.subject_pose), std::move(r.labels)};
        suite.subject_of[i] = s;
        suite.view_of[i] = v;
        suite.tables[i] = scene.table;
        suite.camera_poses[i] = scene.camera_pose;
    });
    suite.pairs.reserve(total);
    for (auto &p : pairs) suite.pairs.push_back(std::move(*p));
    return suite;
}

std::vector<eval::PairEntry> write_suite(const Suite &suite, const std::filesystem::path &dir,
                                         const preprocess::PreprocessParams &target_params, std::size_t workers) {
    target_params.validate();
    const std::size_t n = suite.pairs.size();
    std::vector<eval::PairEntry> entries(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::filesystem::create_directories(dir / fmt::format("subject_{:02}", suite.subject_of[i]));
    }
    parallel_for_rethrow(n, workers, [&](std::size_t i) {
        const SynthPair &pair = suite.pairs[i];
        const auto sub = dir / fmt::format("subject_{:02}", suite.subject_of[i]);
        const std::string view = fmt::format("view_{}", suite.view_of[i]);
        const bool first_view = i == 0 || suite.subject_of[i - 1] != suite.subject_of[i];
        if (first_view) io::write_ply(pair.source, sub / "source.ply");
        io::write_depth_pair(pair.target, sub / (view + ".json"), sub / (view + ".raw"));
        {
            std::ofstream out(sub / (view + "_labels.raw"), std::ios::binary);
            out.write(reinterpret_cast<const char *>(pair.labels.data()),
                      static_cast<std::streamsize>(pair.labels.size()));
            if (!out) throw FormatError(fmt::format("{}: write failed", (sub / (view + "_labels.raw")).string()));
        }
        preprocess::PreprocessParams params = target_params;
        params.seed = derive_seed(target_params.seed, i);
        const auto prepared = preprocess::prepare_target(pair.target, params);
        io::write_ply(prepared.cloud, sub / (view + "_target.ply"));
        entries[i] = eval::PairEntry{pair.id, sub / "source.ply", sub / (view + "_target.ply"), pair.gt};
    });
    eval::write_manifest(entries, dir / "manifest.json");
    return entries;
}

}  // namespace xsreg::synth
