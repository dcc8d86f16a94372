#pragma once

#include <string>
#include <vector>

#include "tilecount/dataset.hpp"
#include "tilecount/geometry.hpp"

namespace tilecount {

/// How to choose the square tile side: an absolute pixel size, or a
/// fraction of the image's shorter side (side = ceil(min(W, H) * s)).
struct TileSpec {
    enum class Kind { Fixed, Scaled };
    Kind kind = Kind::Fixed;
    int side = 0;     // Fixed
    double scale = 0; // Scaled, in (0, 1]

    static TileSpec fixed(int side) { return {Kind::Fixed, side, 0.0}; }
    static TileSpec scaled(double s) { return {Kind::Scaled, 0, s}; }
};

struct Tile {
    int col = 0;
    int row = 0;
    long origin_x = 0;
    long origin_y = 0;
    int side = 0;

    bool operator==(const Tile&) const = default;
};

/// Square decomposition of an image. The canvas is padded on the right and
/// bottom so the grid covers it exactly:
///   cols = ceil(W/side), rows = ceil(H/side),
///   pad_right = cols*side - W, pad_bottom = rows*side - H.
struct TileGrid {
    std::string image_id;
    int width = 0;
    int height = 0;
    int side = 0;
    int cols = 0;
    int rows = 0;
    int pad_right = 0;
    int pad_bottom = 0;

    int tile_count() const { return cols * rows; }
    Tile tile_at(int row, int col) const;
    /// All tiles in row-major order (row, then col).
    std::vector<Tile> tiles() const;
};

/// Ground-truth boxes that survived projection into one tile, in tile-local
/// coordinates (every box inside [0, side]^2).
struct TileAnnotations {
    Tile tile;
    std::vector<BBox> boxes;
    std::vector<std::string> source_ids;
};

struct ProjectionStats {
    size_t kept = 0;
    size_t dropped_boundary = 0; // straddled a boundary below the retention threshold
    size_t dropped_oversize = 0; // box too large to ever reach the threshold in one tile
};

TileGrid grid_fixed(int width, int height, int side, const std::string& image_id = "");
TileGrid grid_scaled(int width, int height, double s, const std::string& image_id = "");
TileGrid make_grid(int width, int height, const TileSpec& spec, const std::string& image_id = "");

/// Assign each annotation to at most one tile. A box is kept in a tile iff
/// at least `keep_fraction` of its area lies inside that tile; kept boxes are
/// clipped to the tile and shifted to tile-local coordinates. keep_fraction
/// must exceed 0.5 so the fractions over disjoint tiles cannot admit two
/// winners. Returns one entry per non-empty tile, row-major.
std::vector<TileAnnotations> project_annotations(const std::vector<Annotation>& annotations,
                                                 const TileGrid& grid,
                                                 double keep_fraction = 0.6,
                                                 ProjectionStats* stats = nullptr);

/// Translate a tile-local box back to image coordinates. Throws if the box
/// is not inside [0, side]^2.
BBox tile_to_global(const Tile& tile, const BBox& box);

/// Shift a global box into a tile's local frame (no clipping).
BBox global_to_tile(const Tile& tile, const BBox& box);

} // namespace tilecount
