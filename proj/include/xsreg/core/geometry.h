// Copyright 2026 The xsreg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstddef>
#include <span>
#include <vector>

namespace xsreg {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

/// Ordered 3D points (meters) with optional unit normals.
///
/// Every point is finite. When normals are present there is exactly one per
/// point and each has unit length within 1e-6. Instances are immutable once
/// constructed; operations produce new clouds.
class PointCloud {
public:
    PointCloud() = default;
    explicit PointCloud(std::vector<Vec3> points);
    PointCloud(std::vector<Vec3> points, std::vector<Vec3> normals);

    const std::vector<Vec3> &points() const { return points_; }
    const std::vector<Vec3> &normals() const { return normals_; }
    const Vec3 &point(std::size_t i) const { return points_[i]; }
    const Vec3 &normal(std::size_t i) const { return normals_[i]; }

    bool has_normals() const { return has_normals_; }
    std::size_t size() const { return points_.size(); }
    bool empty() const { return points_.empty(); }

    /// Subset in the given index order; normals follow their points.
    PointCloud select(std::span<const std::size_t> indices) const;

    /// Same points, normals discarded.
    PointCloud without_normals() const { return PointCloud(points_); }

    Vec3 centroid() const;

private:
    std::vector<Vec3> points_;
    std::vector<Vec3> normals_;
    bool has_normals_ = false;
};

/// Proper rigid motion p -> R p + t.
///
/// The rotation is checked to be orthonormal with determinant +1 (1e-6).
class RigidTransform {
public:
    RigidTransform() : rotation_(Mat3::Identity()), translation_(Vec3::Zero()) {}
    RigidTransform(const Mat3 &rotation, const Vec3 &translation);

    static RigidTransform identity() { return {}; }
    static RigidTransform from_matrix(const Mat4 &m);
    static RigidTransform from_axis_angle(const Vec3 &axis, double angle_rad,
                                          const Vec3 &translation = Vec3::Zero());
    /// Nearest proper rotation (SVD projection) paired with the translation.
    /// Used for transforms that arrive from outside with rounding noise.
    static RigidTransform from_matrix_projected(const Mat4 &m);

    const Mat3 &rotation() const { return rotation_; }
    const Vec3 &translation() const { return translation_; }
    Mat4 matrix() const;

    /// Rotation angle of R in radians, in [0, pi].
    double angle() const;

    Vec3 apply(const Vec3 &p) const { return rotation_ * p + translation_; }
    Vec3 operator*(const Vec3 &p) const { return apply(p); }

    /// (*this) applied after rhs.
    RigidTransform operator*(const RigidTransform &rhs) const;
    RigidTransform inverse() const;

private:
    Mat3 rotation_;
    Vec3 translation_;
};

/// compose(a, b) applies b first, then a.
inline RigidTransform compose(const RigidTransform &a, const RigidTransform &b) {
    return a * b;
}
inline RigidTransform invert(const RigidTransform &t) { return t.inverse(); }

PointCloud apply_transform(const PointCloud &cloud, const RigidTransform &t);

/// True if R is orthonormal with det +1 within tol.
bool is_proper_rotation(const Mat3 &r, double tol = 1e-6);

/// Geodesic angle of a rotation matrix in radians, in [0, pi].
double rotation_angle(const Mat3 &r);

}  // namespace xsreg
