#pragma once

#include <algorithm>

namespace tilecount {

/// Axis-aligned box, top-left origin, real-valued pixel coordinates.
struct BBox {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;

    double right() const { return x + w; }
    double bottom() const { return y + h; }
    double area() const { return w * h; }

    bool operator==(const BBox&) const = default;
};

inline double intersection_area(const BBox& a, const BBox& b) {
    const double iw = std::min(a.right(), b.right()) - std::max(a.x, b.x);
    const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
    if (iw <= 0.0 || ih <= 0.0) return 0.0;
    return iw * ih;
}

inline double iou(const BBox& a, const BBox& b) {
    const double inter = intersection_area(a, b);
    const double uni = a.area() + b.area() - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

/// Intersection clipped to rectangle [rx, rx+rw] x [ry, ry+rh].
inline BBox clip_box(const BBox& b, double rx, double ry, double rw, double rh) {
    const double x0 = std::max(b.x, rx);
    const double y0 = std::max(b.y, ry);
    const double x1 = std::min(b.right(), rx + rw);
    const double y1 = std::min(b.bottom(), ry + rh);
    return {x0, y0, std::max(0.0, x1 - x0), std::max(0.0, y1 - y0)};
}

} // namespace tilecount
