#pragma once

#include <string>
#include <vector>

#include "tilecount/geometry.hpp"
#include "tilecount/raster.hpp"

namespace tilecount {

/// Geometric image/box transforms used by the tuning phase.
///
/// RotContent rotates pixels about the image center on the same canvas
/// (black fill); Rot90CW rotates the canvas itself, swapping dimensions;
/// Downscale resizes to (round(W*f), round(H*f)) with bilinear sampling.
struct Transform {
    enum class Kind { FlipH, FlipV, Rot90CW, RotContent, Downscale };
    Kind kind = Kind::FlipH;
    double param = 0.0; // RotContent: degrees in [0, 360); Downscale: factor in (0, 1]

    static Transform flip_h() { return {Kind::FlipH, 0.0}; }
    static Transform flip_v() { return {Kind::FlipV, 0.0}; }
    static Transform rot90_cw() { return {Kind::Rot90CW, 0.0}; }
    static Transform rot_content(double degrees);
    static Transform downscale(double factor);

    std::string describe() const;
};

Raster apply_to_image(const Transform& t, const Raster& image);

/// Transformed dimensions without touching pixels.
std::pair<int, int> transformed_size(const Transform& t, int width, int height);

/// Map boxes through the transform. Flips and Rot90CW are exact corner
/// mappings; RotContent takes the axis-aligned hull of the rotated corners,
/// clips it to the canvas, and drops boxes whose clipped area falls under
/// the retention threshold; Downscale scales linearly. Throws if a box lies
/// outside the input canvas.
std::vector<BBox> apply_to_boxes(const Transform& t, const std::vector<BBox>& boxes, int width,
                                 int height, double keep_fraction = 0.6);

} // namespace tilecount
