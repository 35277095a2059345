#pragma once

#include "dgs/core/types.hpp"

namespace dgs {

/// Pinhole camera. Pixel (col, row) has its center at (col + 0.5, row + 0.5).
struct Camera {
    Vec2 focal{1.0, 1.0};
    Vec2 principal_point{0.0, 0.0};
    Mat34 world_to_camera = Mat34::Identity();
    int width = 0;
    int height = 0;

    Mat3 rotation() const { return world_to_camera.leftCols<3>(); }
    Vec3 translation() const { return world_to_camera.col(3); }
    Vec3 center() const { return -rotation().transpose() * translation(); }
    Vec3 to_camera(const Vec3& p) const { return rotation() * p + translation(); }
    Vec2 project(const Vec3& cam_point) const;

    /// Throws ContractError when the rotation block is not orthonormal within
    /// `tol` or the image dimensions / focal lengths are not positive.
    void validate(double tol = 1e-6) const;
};

/// Camera at `eye` looking at `target`; `up` is the approximate world up axis.
/// Camera axes follow the x-right, y-down, z-forward convention.
Camera look_at_camera(const Vec3& eye, const Vec3& target, const Vec3& up, double focal, int width,
                      int height);

} // namespace dgs
