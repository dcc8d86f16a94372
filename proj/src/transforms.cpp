#include "tilecount/transforms.hpp"

#include <cmath>

#include "tilecount/errors.hpp"

namespace tilecount {

Transform Transform::rot_content(double degrees) {
    double a = std::fmod(degrees, 360.0);
    if (a < 0.0) a += 360.0;
    return {Kind::RotContent, a};
}

Transform Transform::downscale(double factor) {
    if (!(factor > 0.0) || factor > 1.0) throw ConfigError("downscale factor must be in (0, 1]");
    return {Kind::Downscale, factor};
}

std::string Transform::describe() const {
    switch (kind) {
        case Kind::FlipH: return "fliph";
        case Kind::FlipV: return "flipv";
        case Kind::Rot90CW: return "rot90";
        case Kind::RotContent: return "rot" + std::to_string(param);
        case Kind::Downscale: return "ds" + std::to_string(param);
    }
    return "?";
}

std::pair<int, int> transformed_size(const Transform& t, int width, int height) {
    switch (t.kind) {
        case Transform::Kind::Rot90CW: return {height, width};
        case Transform::Kind::Downscale:
            return {std::max(1, static_cast<int>(std::lround(width * t.param))),
                    std::max(1, static_cast<int>(std::lround(height * t.param)))};
        default: return {width, height};
    }
}

namespace {

// Bilinear fetch at continuous position (sx, sy) in pixel units, where
// pixel i spans [i, i+1). Out-of-range neighbors contribute black.
double sample_black(const Raster& img, double sx, double sy, int c) {
    const double px = sx - 0.5, py = sy - 0.5;
    const int ix = static_cast<int>(std::floor(px));
    const int iy = static_cast<int>(std::floor(py));
    const double fx = px - ix, fy = py - iy;
    auto fetch = [&](int x, int y) -> double {
        if (x < 0 || y < 0 || x >= img.width || y >= img.height) return 0.0;
        return img.at(x, y, c);
    };
    const double v00 = fetch(ix, iy), v10 = fetch(ix + 1, iy);
    const double v01 = fetch(ix, iy + 1), v11 = fetch(ix + 1, iy + 1);
    return (v00 * (1 - fx) + v10 * fx) * (1 - fy) + (v01 * (1 - fx) + v11 * fx) * fy;
}

// Same, but clamped to the image edge (used by resize).
double sample_clamped(const Raster& img, double sx, double sy, int c) {
    const double px = std::clamp(sx - 0.5, 0.0, img.width - 1.0);
    const double py = std::clamp(sy - 0.5, 0.0, img.height - 1.0);
    const int ix = std::min(static_cast<int>(px), img.width - 2 >= 0 ? img.width - 2 : 0);
    const int iy = std::min(static_cast<int>(py), img.height - 2 >= 0 ? img.height - 2 : 0);
    const double fx = px - ix, fy = py - iy;
    auto fetch = [&](int x, int y) -> double {
        return img.at(std::min(x, img.width - 1), std::min(y, img.height - 1), c);
    };
    const double v00 = fetch(ix, iy), v10 = fetch(ix + 1, iy);
    const double v01 = fetch(ix, iy + 1), v11 = fetch(ix + 1, iy + 1);
    return (v00 * (1 - fx) + v10 * fx) * (1 - fy) + (v01 * (1 - fx) + v11 * fx) * fy;
}

uint8_t to_byte(double v) {
    return static_cast<uint8_t>(std::clamp(std::lround(v), 0l, 255l));
}

} // namespace

Raster apply_to_image(const Transform& t, const Raster& image) {
    const auto [ow, oh] = transformed_size(t, image.width, image.height);
    switch (t.kind) {
        case Transform::Kind::FlipH: {
            Raster out(ow, oh, image.channels);
            for (int y = 0; y < oh; ++y)
                for (int x = 0; x < ow; ++x)
                    for (int c = 0; c < image.channels; ++c)
                        out.at(x, y, c) = image.at(image.width - 1 - x, y, c);
            return out;
        }
        case Transform::Kind::FlipV: {
            Raster out(ow, oh, image.channels);
            for (int y = 0; y < oh; ++y)
                for (int x = 0; x < ow; ++x)
                    for (int c = 0; c < image.channels; ++c)
                        out.at(x, y, c) = image.at(x, image.height - 1 - y, c);
            return out;
        }
        case Transform::Kind::Rot90CW: {
            Raster out(ow, oh, image.channels);
            for (int y = 0; y < oh; ++y)
                for (int x = 0; x < ow; ++x)
                    for (int c = 0; c < image.channels; ++c)
                        out.at(x, y, c) = image.at(y, image.height - 1 - x, c);
            return out;
        }
        case Transform::Kind::RotContent: {
            Raster out(ow, oh, image.channels);
            const double rad = t.param * M_PI / 180.0;
            const double cs = std::cos(rad), sn = std::sin(rad);
            const double cx = image.width / 2.0, cy = image.height / 2.0;
            for (int y = 0; y < oh; ++y) {
                for (int x = 0; x < ow; ++x) {
                    // Inverse-rotate the destination pixel center.
                    const double dx = (x + 0.5) - cx, dy = (y + 0.5) - cy;
                    const double sx = cs * dx + sn * dy + cx;
                    const double sy = -sn * dx + cs * dy + cy;
                    for (int c = 0; c < image.channels; ++c)
                        out.at(x, y, c) = to_byte(sample_black(image, sx, sy, c));
                }
            }
            return out;
        }
        case Transform::Kind::Downscale: {
            Raster out(ow, oh, image.channels);
            const double fx = static_cast<double>(image.width) / ow;
            const double fy = static_cast<double>(image.height) / oh;
            for (int y = 0; y < oh; ++y)
                for (int x = 0; x < ow; ++x)
                    for (int c = 0; c < image.channels; ++c)
                        out.at(x, y, c) =
                            to_byte(sample_clamped(image, (x + 0.5) * fx, (y + 0.5) * fy, c));
            return out;
        }
    }
    throw ConfigError("unknown transform");
}

std::vector<BBox> apply_to_boxes(const Transform& t, const std::vector<BBox>& boxes, int width,
                                 int height, double keep_fraction) {
    for (const auto& b : boxes) {
        if (b.x < -1e-9 || b.y < -1e-9 || b.right() > width + 1e-9 || b.bottom() > height + 1e-9)
            throw ConfigError("box outside image bounds");
    }
    std::vector<BBox> out;
    out.reserve(boxes.size());
    switch (t.kind) {
        case Transform::Kind::FlipH:
            for (const auto& b : boxes) out.push_back({width - b.x - b.w, b.y, b.w, b.h});
            return out;
        case Transform::Kind::FlipV:
            for (const auto& b : boxes) out.push_back({b.x, height - b.y - b.h, b.w, b.h});
            return out;
        case Transform::Kind::Rot90CW:
            for (const auto& b : boxes) out.push_back({height - b.y - b.h, b.x, b.h, b.w});
            return out;
        case Transform::Kind::RotContent: {
            const double rad = t.param * M_PI / 180.0;
            const double cs = std::cos(rad), sn = std::sin(rad);
            const double cx = width / 2.0, cy = height / 2.0;
            for (const auto& b : boxes) {
                double min_x = 1e300, min_y = 1e300, max_x = -1e300, max_y = -1e300;
                const double xs[2] = {b.x, b.right()}, ys[2] = {b.y, b.bottom()};
                for (double px : xs) {
                    for (double py : ys) {
                        const double dx = px - cx, dy = py - cy;
                        const double rx = cs * dx - sn * dy + cx;
                        const double ry = sn * dx + cs * dy + cy;
                        min_x = std::min(min_x, rx);
                        max_x = std::max(max_x, rx);
                        min_y = std::min(min_y, ry);
                        max_y = std::max(max_y, ry);
                    }
                }
                const BBox hull{min_x, min_y, max_x - min_x, max_y - min_y};
                const BBox clipped = clip_box(hull, 0.0, 0.0, width, height);
                if (clipped.area() >= keep_fraction * hull.area() - 1e-9 && clipped.area() > 0.0)
                    out.push_back(clipped);
            }
            return out;
        }
        case Transform::Kind::Downscale: {
            const auto [ow, oh] = transformed_size(t, width, height);
            for (const auto& b : boxes) {
                const BBox scaled{b.x * t.param, b.y * t.param, b.w * t.param, b.h * t.param};
                out.push_back(clip_box(scaled, 0.0, 0.0, ow, oh));
            }
            return out;
        }
    }
    throw ConfigError("unknown transform");
}

} // namespace tilecount
