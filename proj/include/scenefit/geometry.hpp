#pragma once

#include <Eigen/Dense>

#include <array>

#include "scenefit/errors.hpp"

namespace scenefit {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Wraps an angle to [-pi, pi).
double wrap_angle(double a);

// Rotation about +y by yaw (right-handed, world +y up).
Mat3 yaw_rotation(double yaw);

// Oriented 3D box: rotation is yaw-only (about world +y). Full SO(3)
// orientations are not representable and are rejected where boxes are parsed.
struct BBox3D {
    Vec3 centroid{0, 0, 0};
    Vec3 size{1, 1, 1};  // full extents, all components > 0
    double yaw = 0.0;    // stored wrapped to [-pi, pi)

    BBox3D() = default;
    BBox3D(const Vec3& c, const Vec3& s, double y);

    double volume() const { return size.x() * size.y() * size.z(); }
    double floor_height() const { return centroid.y() - 0.5 * size.y(); }

    // Axis-aligned bounds of the yawed box.
    void aabb(Vec3& lo, Vec3& hi) const;
};

// The 8 corners in a fixed order: index bit 0 -> +x local, bit 1 -> +y local,
// bit 2 -> +z local (bit set = positive half).
std::array<Vec3, 8> box_corners(const BBox3D& box);

// Camera extrinsics: pitch about the camera x axis, then roll about the
// camera z axis. rotation() maps camera coordinates to world coordinates;
// the camera sits at the world origin and looks down +z.
struct CameraPose {
    double pitch = 0.0;
    double roll = 0.0;

    Mat3 rotation() const;  // R = R_roll * R_pitch
};

Vec3 world_to_camera(const Vec3& p_world, const CameraPose& cam);
Vec3 camera_to_world(const Vec3& p_cam, const CameraPose& cam);

struct Intrinsics {
    double fx = 500.0;
    double fy = 500.0;
    double cx = 320.0;
    double cy = 240.0;
    int width = 640;
    int height = 480;
};

// Pinhole projection of a world point. Image x right, y down. Throws
// NonPositiveDepth if the camera-space depth is <= 1e-6.
Vec2 project_point(const Vec3& p_world, const CameraPose& cam, const Intrinsics& K);

// Axis-aligned image rectangle, xmin < xmax and ymin < ymax.
struct Rect2D {
    double xmin = 0, ymin = 0, xmax = 1, ymax = 1;

    Rect2D() = default;
    Rect2D(double x0, double y0, double x1, double y1);

    double width() const { return xmax - xmin; }
    double height() const { return ymax - ymin; }
    double area() const { return width() * height(); }

    // Corner order: (xmin,ymin), (xmax,ymin), (xmax,ymax), (xmin,ymax).
    std::array<Vec2, 4> corners() const;
};

// Tight bounding rectangle of the 8 projected box corners. Throws
// NonPositiveDepth if any corner has non-positive depth.
Rect2D project_box_to_rect(const BBox3D& box, const CameraPose& cam, const Intrinsics& K);

// Intersection-over-union of two rectangles, in [0, 1].
double iou_rect(const Rect2D& a, const Rect2D& b);

// Intersection-over-union of two yawed boxes: exact footprint polygon
// intersection (convex clipping) times vertical overlap.
double iou_box3d(const BBox3D& a, const BBox3D& b);

}  // namespace scenefit
