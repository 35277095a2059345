#include "dgs/core/camera.hpp"

#include <Eigen/Geometry>
#include <cmath>

namespace dgs {

Vec2 Camera::project(const Vec3& cam_point) const {
    return {focal.x() * cam_point.x() / cam_point.z() + principal_point.x(),
            focal.y() * cam_point.y() / cam_point.z() + principal_point.y()};
}

void Camera::validate(double tol) const {
    if (width <= 0 || height <= 0) {
        throw ContractError("camera image dimensions must be positive");
    }
    if (!(focal.x() > 0.0) || !(focal.y() > 0.0)) {
        throw ContractError("camera focal lengths must be positive");
    }
    if (!world_to_camera.allFinite()) {
        throw ContractError("camera extrinsics are not finite");
    }
    const Mat3 r = rotation();
    if ((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() > tol) {
        throw ContractError("camera rotation is not orthonormal");
    }
    if (r.determinant() < 0.0) {
        throw ContractError("camera rotation is a reflection");
    }
}

Camera look_at_camera(const Vec3& eye, const Vec3& target, const Vec3& up, double focal, int width,
                      int height) {
    const Vec3 forward = (target - eye).normalized();
    Vec3 right = forward.cross(up);
    if (right.norm() < 1e-12) {
        right = forward.unitOrthogonal();
    }
    right.normalize();
    const Vec3 down = forward.cross(right);

    Mat3 r;
    r.row(0) = right.transpose();
    r.row(1) = down.transpose();
    r.row(2) = forward.transpose();

    Camera cam;
    cam.focal = Vec2(focal, focal);
    cam.principal_point = Vec2(0.5 * width, 0.5 * height);
    cam.world_to_camera.leftCols<3>() = r;
    cam.world_to_camera.col(3) = -r * eye;
    cam.width = width;
    cam.height = height;
    return cam;
}

} // namespace dgs
