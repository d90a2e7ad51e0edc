// Copyright 2026 The xsreg Authors
// SPDX-License-Identifier: Apache-2.0

#include "xsreg/core/geometry.h"

#include <Eigen/SVD>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "xsreg/core/error.h"

namespace xsreg {

namespace {

void check_points(const std::vector<Vec3> &points) {
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (!points[i].allFinite()) {
            throw PreconditionError(fmt::format("point {} is not finite", i));
        }
    }
}

}  // namespace

PointCloud::PointCloud(std::vector<Vec3> points) : points_(std::move(points)) {
    check_points(points_);
}

PointCloud::PointCloud(std::vector<Vec3> points, std::vector<Vec3> normals)
    : points_(std::move(points)), normals_(std::move(normals)), has_normals_(true) {
    check_points(points_);
    if (normals_.size() != points_.size()) {
        throw PreconditionError(fmt::format("{} normals for {} points", normals_.size(),
                                            points_.size()));
    }
    for (std::size_t i = 0; i < normals_.size(); ++i) {
        if (!normals_[i].allFinite() || std::abs(normals_[i].norm() - 1.0) > 1e-6) {
            throw PreconditionError(fmt::format("normal {} is not unit length", i));
        }
    }
}

PointCloud PointCloud::select(std::span<const std::size_t> indices) const {
    std::vector<Vec3> pts;
    pts.reserve(indices.size());
    for (std::size_t i : indices) pts.push_back(points_.at(i));
    if (!has_normals_) return PointCloud(std::move(pts));
    std::vector<Vec3> nrm;
    nrm.reserve(indices.size());
    for (std::size_t i : indices) nrm.push_back(normals_[i]);
    return PointCloud(std::move(pts), std::move(nrm));
}

Vec3 PointCloud::centroid() const {
    Vec3 c = Vec3::Zero();
    for (const auto &p : points_) c += p;
    return points_.empty() ? c : Vec3(c / static_cast<double>(points_.size()));
}

bool is_proper_rotation(const Mat3 &r, double tol) {
    if (!r.allFinite()) return false;
    const double ortho = (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
    return ortho <= tol && std::abs(r.determinant() - 1.0) <= tol;
}

RigidTransform::RigidTransform(const Mat3 &rotation, const Vec3 &translation)
    : rotation_(rotation), translation_(translation) {
    if (!is_proper_rotation(rotation_)) {
        throw PreconditionError("rotation is not orthonormal with det +1");
    }
    if (!translation_.allFinite()) {
        throw PreconditionError("translation is not finite");
    }
}

RigidTransform RigidTransform::from_matrix(const Mat4 &m) {
    if (std::abs(m(3, 0)) > 1e-9 || std::abs(m(3, 1)) > 1e-9 ||
        std::abs(m(3, 2)) > 1e-9 || std::abs(m(3, 3) - 1.0) > 1e-9) {
        throw PreconditionError("bottom row of a rigid transform must be 0 0 0 1");
    }
    return {m.topLeftCorner<3, 3>(), m.topRightCorner<3, 1>()};
}

RigidTransform RigidTransform::from_matrix_projected(const Mat4 &m) {
    if (!m.allFinite()) throw PreconditionError("transform is not finite");
    const Mat3 a = m.topLeftCorner<3, 3>();
    Eigen::JacobiSVD<Mat3> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 d = Mat3::Identity();
    d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0 ? -1.0 : 1.0;
    Mat3 r = svd.matrixU() * d * svd.matrixV().transpose();
    Mat4 fixed = m;
    fixed.topLeftCorner<3, 3>() = r;
    return from_matrix(fixed);
}

RigidTransform RigidTransform::from_axis_angle(const Vec3 &axis, double angle_rad,
                                               const Vec3 &translation) {
    if (axis.norm() == 0.0) throw PreconditionError("rotation axis is zero");
    return {Eigen::AngleAxisd(angle_rad, axis.normalized()).toRotationMatrix(), translation};
}

Mat4 RigidTransform::matrix() const {
    Mat4 m = Mat4::Identity();
    m.topLeftCorner<3, 3>() = rotation_;
    m.topRightCorner<3, 1>() = translation_;
    return m;
}

double rotation_angle(const Mat3 &r) {
    // atan2 of (sin, cos) keeps full precision near 0 and pi, where acos of the
    // trace alone cannot resolve angles below about 1e-8 rad.
    const Vec3 axis(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
    const double s = 0.5 * axis.norm();
    const double c = std::clamp((r.trace() - 1.0) / 2.0, -1.0, 1.0);
    return std::atan2(s, c);
}

double RigidTransform::angle() const { return rotation_angle(rotation_); }

RigidTransform RigidTransform::operator*(const RigidTransform &rhs) const {
    return {rotation_ * rhs.rotation_, rotation_ * rhs.translation_ + translation_};
}

RigidTransform RigidTransform::inverse() const {
    const Mat3 rt = rotation_.transpose();
    return {rt, -(rt * translation_)};
}

PointCloud apply_transform(const PointCloud &cloud, const RigidTransform &t) {
    std::vector<Vec3> pts;
    pts.reserve(cloud.size());
    for (const auto &p : cloud.points()) pts.push_back(t.apply(p));
    if (!cloud.has_normals()) return PointCloud(std::move(pts));
    std::vector<Vec3> nrm;
    nrm.reserve(cloud.size());
    for (const auto &n : cloud.normals()) nrm.push_back(t.rotation() * n);
    return PointCloud(std::move(pts), std::move(nrm));
}

}  // namespace xsreg
