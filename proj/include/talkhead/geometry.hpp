#pragma once

#include <Eigen/Geometry>

#include "talkhead/types.hpp"

namespace talkhead {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Rigid head pose: Euler rotation (radians) and translation.
struct HeadPose {
    Vec3 r = Vec3::Zero();
    Vec3 t = Vec3::Zero();

    Eigen::Matrix<double, 6, 1> as_vector() const {
        Eigen::Matrix<double, 6, 1> v;
        v << r, t;
        return v;
    }
    static HeadPose from_vector(const Eigen::Ref<const Eigen::Matrix<double, 6, 1>>& v) {
        return {v.head<3>(), v.tail<3>()};
    }
};

// Rz(r_z) * Ry(r_y) * Rx(r_x): rotate about the fixed x axis, then y, then z. Right-handed,
// camera looks down +z, image y points down.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, 3, 3> rotation_matrix(const Eigen::MatrixBase<Derived>& r) {
    using S = typename Derived::Scalar;
    using Axis = Eigen::AngleAxis<S>;
    using V = Eigen::Matrix<S, 3, 1>;
    return (Axis(r[2], V::UnitZ()) * Axis(r[1], V::UnitY()) * Axis(r[0], V::UnitX())).toRotationMatrix();
}

// p' = Rot(r) p + t for every row.
Points3 apply_pose(const Points3& points, const HeadPose& pose);

struct CameraIntrinsics {
    double focal_px = 800.0;
    double cx = 256.0;
    double cy = 256.0;

    void validate() const;
};

// (u, v) = (f x / z + cx, f y / z + cy). Throws ProjectionError naming the
// first point with z <= 0.
Points2 project(const Points3& camera_points, const CameraIntrinsics& cam);

}  // namespace talkhead
