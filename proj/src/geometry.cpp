#include "scenefit/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace scenefit {

double wrap_angle(double a) {
    const double two_pi = 2.0 * M_PI;
    double w = std::fmod(a + M_PI, two_pi);
    if (w < 0) w += two_pi;
    return w - M_PI;
}

Mat3 yaw_rotation(double yaw) {
    return Eigen::AngleAxisd(yaw, Vec3::UnitY()).toRotationMatrix();
}

BBox3D::BBox3D(const Vec3& c, const Vec3& s, double y) : centroid(c), size(s), yaw(wrap_angle(y)) {
    if (!(s.x() > 0 && s.y() > 0 && s.z() > 0))
        throw InvalidArgument("BBox3D size components must be positive");
    if (!centroid.allFinite() || !size.allFinite() || !std::isfinite(yaw))
        throw InvalidArgument("BBox3D parameters must be finite");
}

void BBox3D::aabb(Vec3& lo, Vec3& hi) const {
    lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    hi = -lo;
    for (const Vec3& c : box_corners(*this)) {
        lo = lo.cwiseMin(c);
        hi = hi.cwiseMax(c);
    }
}

std::array<Vec3, 8> box_corners(const BBox3D& box) {
    const Mat3 r = yaw_rotation(box.yaw);
    const Vec3 h = 0.5 * box.size;
    std::array<Vec3, 8> out;
    for (int i = 0; i < 8; ++i) {
        const Vec3 local((i & 1) ? h.x() : -h.x(),
                         (i & 2) ? h.y() : -h.y(),
                         (i & 4) ? h.z() : -h.z());
        out[i] = box.centroid + r * local;
    }
    return out;
}

Mat3 CameraPose::rotation() const {
    const Mat3 r_pitch = Eigen::AngleAxisd(pitch, Vec3::UnitX()).toRotationMatrix();
    const Mat3 r_roll = Eigen::AngleAxisd(roll, Vec3::UnitZ()).toRotationMatrix();
    return r_roll * r_pitch;
}

Vec3 world_to_camera(const Vec3& p_world, const CameraPose& cam) {
    return cam.rotation().transpose() * p_world;
}

Vec3 camera_to_world(const Vec3& p_cam, const CameraPose& cam) {
    return cam.rotation() * p_cam;
}

Vec2 project_point(const Vec3& p_world, const CameraPose& cam, const Intrinsics& K) {
    const Vec3 p = world_to_camera(p_world, cam);
    if (p.z() <= 1e-6)
        throw NonPositiveDepth("point depth " + std::to_string(p.z()) + " is not positive");
    return {K.fx * p.x() / p.z() + K.cx, K.fy * p.y() / p.z() + K.cy};
}

Rect2D::Rect2D(double x0, double y0, double x1, double y1) : xmin(x0), ymin(y0), xmax(x1), ymax(y1) {
    if (!(xmin < xmax && ymin < ymax))
        throw InvalidArgument("Rect2D requires xmin < xmax and ymin < ymax");
}

std::array<Vec2, 4> Rect2D::corners() const {
    return {Vec2{xmin, ymin}, Vec2{xmax, ymin}, Vec2{xmax, ymax}, Vec2{xmin, ymax}};
}

Rect2D project_box_to_rect(const BBox3D& box, const CameraPose& cam, const Intrinsics& K) {
    double x0 = std::numeric_limits<double>::infinity(), y0 = x0;
    double x1 = -x0, y1 = -x0;
    for (const Vec3& c : box_corners(box)) {
        const Vec2 p = project_point(c, cam, K);
        x0 = std::min(x0, p.x());
        y0 = std::min(y0, p.y());
        x1 = std::max(x1, p.x());
        y1 = std::max(y1, p.y());
    }
    return Rect2D(x0, y0, x1, y1);
}

double iou_rect(const Rect2D& a, const Rect2D& b) {
    const double iw = std::min(a.xmax, b.xmax) - std::max(a.xmin, b.xmin);
    const double ih = std::min(a.ymax, b.ymax) - std::max(a.ymin, b.ymin);
    if (iw <= 0 || ih <= 0) return 0.0;
    const double inter = iw * ih;
    const double uni = a.area() + b.area() - inter;
    return std::min(inter / uni, 1.0);
}

namespace {

using Poly = std::vector<Vec2>;  // xz footprint, counter-clockwise

Poly footprint(const BBox3D& box) {
    const double c = std::cos(box.yaw), s = std::sin(box.yaw);
    const double hx = 0.5 * box.size.x(), hz = 0.5 * box.size.z();
    // Local (x, z) corners counter-clockwise in the xz plane. Rotation about
    // +y maps (x, z) -> (c x + s z, -s x + c z), which preserves orientation.
    const std::array<Vec2, 4> local = {Vec2{hx, hz}, Vec2{-hx, hz}, Vec2{-hx, -hz}, Vec2{hx, -hz}};
    Poly out;
    out.reserve(4);
    for (const Vec2& p : local)
        out.push_back({box.centroid.x() + c * p.x() + s * p.y(),
                       box.centroid.z() - s * p.x() + c * p.y()});
    return out;
}

double shoelace_area(const Poly& p) {
    double a = 0.0;
    const std::size_t n = p.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2& u = p[i];
        const Vec2& v = p[(i + 1) % n];
        a += u.x() * v.y() - v.x() * u.y();
    }
    return 0.5 * std::abs(a);
}

// Sutherland-Hodgman clip of subject polygon by convex clip polygon (CCW).
Poly clip_convex(const Poly& subject, const Poly& clip) {
    Poly out = subject;
    const std::size_t n = clip.size();
    for (std::size_t e = 0; e < n && !out.empty(); ++e) {
        const Vec2 a = clip[e];
        const Vec2 b = clip[(e + 1) % n];
        const Vec2 edge = b - a;
        Poly in;
        in.swap(out);
        const auto side = [&](const Vec2& p) {
            return edge.x() * (p.y() - a.y()) - edge.y() * (p.x() - a.x());
        };
        for (std::size_t i = 0; i < in.size(); ++i) {
            const Vec2 cur = in[i];
            const Vec2 nxt = in[(i + 1) % in.size()];
            const double sc = side(cur);
            const double sn = side(nxt);
            if (sc >= 0) out.push_back(cur);
            if ((sc >= 0) != (sn >= 0)) {
                const double t = sc / (sc - sn);
                out.push_back(cur + t * (nxt - cur));
            }
        }
    }
    return out;
}

}  // namespace

double iou_box3d(const BBox3D& a, const BBox3D& b) {
    const double ay0 = a.centroid.y() - 0.5 * a.size.y(), ay1 = a.centroid.y() + 0.5 * a.size.y();
    const double by0 = b.centroid.y() - 0.5 * b.size.y(), by1 = b.centroid.y() + 0.5 * b.size.y();
    const double dy = std::min(ay1, by1) - std::max(ay0, by0);
    if (dy <= 0) return 0.0;
    const Poly inter_poly = clip_convex(footprint(a), footprint(b));
    if (inter_poly.size() < 3) return 0.0;
    const double inter = shoelace_area(inter_poly) * dy;
    const double uni = a.volume() + b.volume() - inter;
    return std::min(inter / uni, 1.0);
}

}  // namespace scenefit
