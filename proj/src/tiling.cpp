#include "tilecount/tiling.hpp"

#include <cmath>

#include "tilecount/errors.hpp"

namespace tilecount {

Tile TileGrid::tile_at(int row, int col) const {
    return Tile{col, row, static_cast<long>(col) * side, static_cast<long>(row) * side, side};
}

std::vector<Tile> TileGrid::tiles() const {
    std::vector<Tile> out;
    out.reserve(static_cast<size_t>(tile_count()));
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) out.push_back(tile_at(r, c));
    return out;
}

TileGrid grid_fixed(int width, int height, int side, const std::string& image_id) {
    if (width < 1 || height < 1) throw ConfigError("image dimensions must be positive");
    if (side < 1) throw ConfigError("tile side must be positive");
    TileGrid g;
    g.image_id = image_id;
    g.width = width;
    g.height = height;
    g.side = side;
    g.cols = (width + side - 1) / side;
    g.rows = (height + side - 1) / side;
    g.pad_right = g.cols * side - width;
    g.pad_bottom = g.rows * side - height;
    return g;
}

TileGrid grid_scaled(int width, int height, double s, const std::string& image_id) {
    if (width < 1 || height < 1) throw ConfigError("image dimensions must be positive");
    if (!(s > 0.0) || s > 1.0) throw ConfigError("tiling scale must be in (0, 1]");
    const double product = std::min(width, height) * s;
    // Snap near-integers before ceil so 0.3 * 2604-style products don't
    // drift one past the intended side.
    const int side = std::max(1, static_cast<int>(std::ceil(product - 1e-9)));
    return grid_fixed(width, height, side, image_id);
}

TileGrid make_grid(int width, int height, const TileSpec& spec, const std::string& image_id) {
    if (spec.kind == TileSpec::Kind::Fixed) return grid_fixed(width, height, spec.side, image_id);
    return grid_scaled(width, height, spec.scale, image_id);
}

std::vector<TileAnnotations> project_annotations(const std::vector<Annotation>& annotations,
                                                 const TileGrid& grid, double keep_fraction,
                                                 ProjectionStats* stats) {
    if (!(keep_fraction > 0.5) || keep_fraction > 1.0)
        throw ConfigError("keep_fraction must be in (0.5, 1]");

    // Indexed by row-major tile position; sparse tiles pruned at the end.
    std::vector<TileAnnotations> per_tile(static_cast<size_t>(grid.tile_count()));
    ProjectionStats local;

    const double side = grid.side;
    for (const auto& ann : annotations) {
        if (!grid.image_id.empty() && ann.image_id != grid.image_id)
            throw IntegrityError("annotation '" + ann.id + "' belongs to image '" + ann.image_id +
                                 "', not '" + grid.image_id + "'");
        const BBox& b = ann.bbox;
        const double area = b.area();
        if (area * keep_fraction > side * side + 1e-9) {
            ++local.dropped_oversize;
            continue;
        }
        // Candidate tiles are the ones the box overlaps.
        const int c0 = std::max(0, static_cast<int>(std::floor(b.x / side)));
        const int c1 = std::min(grid.cols - 1, static_cast<int>(std::floor((b.right() - 1e-12) / side)));
        const int r0 = std::max(0, static_cast<int>(std::floor(b.y / side)));
        const int r1 = std::min(grid.rows - 1, static_cast<int>(std::floor((b.bottom() - 1e-12) / side)));
        bool kept = false;
        for (int r = r0; r <= r1 && !kept; ++r) {
            for (int c = c0; c <= c1 && !kept; ++c) {
                const Tile tile = grid.tile_at(r, c);
                const BBox tile_box{static_cast<double>(tile.origin_x),
                                    static_cast<double>(tile.origin_y), side, side};
                const double inter = intersection_area(b, tile_box);
                if (inter >= keep_fraction * area - 1e-9) {
                    BBox clipped = clip_box(b, tile_box.x, tile_box.y, side, side);
                    auto& slot = per_tile[static_cast<size_t>(r) * grid.cols + c];
                    slot.tile = tile;
                    slot.boxes.push_back(global_to_tile(tile, clipped));
                    slot.source_ids.push_back(ann.id);
                    kept = true; // fractions over disjoint tiles sum to <= 1
                }
            }
        }
        if (kept)
            ++local.kept;
        else
            ++local.dropped_boundary;
    }

    std::vector<TileAnnotations> out;
    for (auto& t : per_tile)
        if (!t.boxes.empty()) out.push_back(std::move(t));
    if (stats) *stats = local;
    return out;
}

BBox tile_to_global(const Tile& tile, const BBox& box) {
    const double side = tile.side;
    if (box.x < -1e-9 || box.y < -1e-9 || box.right() > side + 1e-9 || box.bottom() > side + 1e-9)
        throw ConfigError("box outside tile bounds");
    return {box.x + tile.origin_x, box.y + tile.origin_y, box.w, box.h};
}

BBox global_to_tile(const Tile& tile, const BBox& box) {
    return {box.x - tile.origin_x, box.y - tile.origin_y, box.w, box.h};
}

} // namespace tilecount
