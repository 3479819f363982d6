#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

namespace slotgrid {

/// 7-DoF box: center, dimensions (l along the heading, w across, h vertical) and yaw.
template <typename Scalar>
struct BoxT {
    Scalar cx{}, cy{}, cz{};
    Scalar l{}, w{}, h{};
    Scalar yaw{};
    int class_id = 0;
};

using BoxLabel = BoxT<double>;

// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    a = std::fmod(a, two_pi);
    if (a <= -std::numbers::pi) a += two_pi;
    if (a > std::numbers::pi) a -= two_pi;
    return a;
}

namespace geom {

template <typename Scalar>
inline Scalar min(const Scalar& a, const Scalar& b) {
    return b < a ? b : a;
}
template <typename Scalar>
inline Scalar max(const Scalar& a, const Scalar& b) {
    return a < b ? b : a;
}

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

inline double cross(const Vec2& o, const Vec2& a, const Vec2& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

// Counter-clockwise BEV corners.
inline std::array<Vec2, 4> corners(const BoxLabel& b) {
    const double c = std::cos(b.yaw), s = std::sin(b.yaw);
    const double hl = 0.5 * b.l, hw = 0.5 * b.w;
    const std::array<std::array<double, 2>, 4> local{{{hl, hw}, {-hl, hw}, {-hl, -hw}, {hl, -hw}}};
    std::array<Vec2, 4> out;
    for (int i = 0; i < 4; ++i)
        out[i] = {b.cx + c * local[i][0] - s * local[i][1], b.cy + s * local[i][0] + c * local[i][1]};
    return out;
}

inline double polygon_area(const std::vector<Vec2>& poly) {
    double a = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Vec2& p = poly[i];
        const Vec2& q = poly[(i + 1) % poly.size()];
        a += p.x * q.y - q.x * p.y;
    }
    return 0.5 * std::abs(a);
}

// Sutherland-Hodgman: clips `subject` by the convex counter-clockwise polygon `clip`.
inline std::vector<Vec2> clip_convex(std::vector<Vec2> subject, const std::vector<Vec2>& clip) {
    for (std::size_t e = 0; e < clip.size() && !subject.empty(); ++e) {
        const Vec2& a = clip[e];
        const Vec2& b = clip[(e + 1) % clip.size()];
        std::vector<Vec2> out;
        out.reserve(subject.size() + 2);
        for (std::size_t i = 0; i < subject.size(); ++i) {
            const Vec2& p = subject[i];
            const Vec2& q = subject[(i + 1) % subject.size()];
            const double dp = cross(a, b, p);
            const double dq = cross(a, b, q);
            if (dp >= 0.0) out.push_back(p);
            if ((dp >= 0.0) != (dq >= 0.0)) {
                const double t = dp / (dp - dq);
                out.push_back({p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)});
            }
        }
        subject = std::move(out);
    }
    return subject;
}

}  // namespace geom

inline double intersection_area_bev(const BoxLabel& a, const BoxLabel& b) {
    const auto ca = geom::corners(a);
    const auto cb = geom::corners(b);
    const auto poly = geom::clip_convex({ca.begin(), ca.end()}, {cb.begin(), cb.end()});
    return poly.size() < 3 ? 0.0 : geom::polygon_area(poly);
}

/// Exact BEV IoU of two rotated rectangles via convex polygon clipping.
inline double rotated_iou_bev(const BoxLabel& a, const BoxLabel& b) {
    const double area_a = a.l * a.w;
    const double area_b = b.l * b.w;
    const double inter = std::min({intersection_area_bev(a, b), area_a, area_b});
    const double uni = area_a + area_b - inter;
    if (uni <= 0.0) return 0.0;
    return std::clamp(inter / uni, 0.0, 1.0);
}

/// 3D IoU with the prediction re-expressed in the ground truth's heading frame and treated
/// as aligned with it there. Differentiable almost everywhere; templated for autodiff.
template <typename Scalar>
Scalar aligned_iou_in_gt_frame(const BoxT<Scalar>& pred, const BoxT<Scalar>& gt) {
    using std::cos;
    using std::sin;
    const Scalar c = cos(gt.yaw), s = sin(gt.yaw);
    const Scalar dx = pred.cx - gt.cx, dy = pred.cy - gt.cy;
    const Scalar u = c * dx + s * dy;
    const Scalar v = c * dy - s * dx;
    auto overlap = [](const Scalar& center, const Scalar& half_p, const Scalar& half_g, const Scalar& gt_center) {
        const Scalar hi = geom::min<Scalar>(center + half_p, gt_center + half_g);
        const Scalar lo = geom::max<Scalar>(center - half_p, gt_center - half_g);
        return geom::max<Scalar>(hi - lo, Scalar(0.0));
    };
    const Scalar zero(0.0);
    const Scalar ox = overlap(u, pred.l * 0.5, gt.l * 0.5, zero);
    const Scalar oy = overlap(v, pred.w * 0.5, gt.w * 0.5, zero);
    const Scalar oz = overlap(pred.cz, pred.h * 0.5, gt.h * 0.5, gt.cz);
    const Scalar inter = ox * oy * oz;
    const Scalar uni = pred.l * pred.w * pred.h + gt.l * gt.w * gt.h - inter;
    return inter / uni;
}

// (1 + cos(2 dyaw)) / 2: 1 for equal headings (mod pi), 0 for perpendicular ones.
template <typename Scalar>
Scalar rotation_weight(const Scalar& yaw_pred, const Scalar& yaw_gt) {
    using std::cos;
    return (Scalar(1.0) + cos((yaw_pred - yaw_gt) * 2.0)) * 0.5;
}

/// Rotation-weighted IoU loss: 1 - aligned IoU * rotation weight. In [0, 1].
template <typename Scalar>
Scalar rw_iou_loss(const BoxT<Scalar>& pred, const BoxT<Scalar>& gt) {
    return Scalar(1.0) - aligned_iou_in_gt_frame<Scalar>(pred, gt) * rotation_weight<Scalar>(pred.yaw, gt.yaw);
}

}  // namespace slotgrid
