#include "talkhead/geometry.hpp"

#include <cmath>

namespace talkhead {

Points3 apply_pose(const Points3& points, const HeadPose& pose) {
    const Mat3 rot = rotation_matrix(pose.r);
    Points3 out = points * rot.transpose();
    out.rowwise() += pose.t.transpose();
    return out;
}

void CameraIntrinsics::validate() const {
    if (!(focal_px > 0.0) || !std::isfinite(focal_px)) throw ConfigError("camera: focal_px must be > 0");
    if (!std::isfinite(cx) || !std::isfinite(cy)) throw ConfigError("camera: principal point must be finite");
}

Points2 project(const Points3& camera_points, const CameraIntrinsics& cam) {
    Points2 out(camera_points.rows(), 2);
    for (Eigen::Index i = 0; i < camera_points.rows(); ++i) {
        const double z = camera_points(i, 2);
        if (!(z > 0.0))
            throw ProjectionError("project: point " + std::to_string(i) + " has non-positive depth " + std::to_string(z),
                                  static_cast<std::size_t>(i));
        out(i, 0) = cam.focal_px * camera_points(i, 0) / z + cam.cx;
        out(i, 1) = cam.focal_px * camera_points(i, 1) / z + cam.cy;
    }
    return out;
}

}  // namespace talkhead
