#include "tilecount/counting.hpp"

#include <algorithm>
#include <cmath>

#include "tilecount/errors.hpp"
#include "tilecount/parallel.hpp"

namespace tilecount {

void CountConfig::validate() const {
    if (!(scale > 0.0) || scale > 1.0) throw ConfigError("count scale must be in (0, 1]");
    if (confidence < 0.0 || confidence > 1.0)
        throw ConfigError("confidence threshold must be in [0, 1]");
    if (dedup_iou && (!(*dedup_iou > 0.0) || !(*dedup_iou < 1.0)))
        throw ConfigError("dedup_iou must be in (0, 1)");
}

double CountResult::abs_err() const {
    if (!truth) throw ConfigError("no ground truth for image '" + image_id + "'");
    return std::abs(static_cast<double>(predicted - *truth));
}

double CountResult::pct_err() const {
    if (!truth) throw ConfigError("no ground truth for image '" + image_id + "'");
    if (*truth <= 0) throw ConfigError("percentage error undefined for truth 0 on '" + image_id + "'");
    return 100.0 * abs_err() / static_cast<double>(*truth);
}

std::vector<Detection> filter_by_confidence(const std::vector<Detection>& dets, double threshold) {
    if (threshold < 0.0 || threshold > 1.0)
        throw ConfigError("confidence threshold must be in [0, 1]");
    std::vector<Detection> out;
    out.reserve(dets.size());
    for (const auto& d : dets)
        if (d.score >= threshold) out.push_back(d);
    return out;
}

std::vector<ScoredBox> global_nms(std::vector<ScoredBox> dets, double iou_threshold) {
    if (!(iou_threshold > 0.0) || !(iou_threshold < 1.0))
        throw ConfigError("iou_threshold must be in (0, 1)");
    std::stable_sort(dets.begin(), dets.end(), [](const ScoredBox& a, const ScoredBox& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.bbox.x != b.bbox.x) return a.bbox.x < b.bbox.x;
        if (a.bbox.y != b.bbox.y) return a.bbox.y < b.bbox.y;
        if (a.bbox.w != b.bbox.w) return a.bbox.w < b.bbox.w;
        return a.bbox.h < b.bbox.h;
    });
    std::vector<ScoredBox> kept;
    for (const auto& d : dets) {
        bool suppressed = false;
        for (const auto& k : kept) {
            if (iou(d.bbox, k.bbox) >= iou_threshold) {
                suppressed = true;
                break;
            }
        }
        if (!suppressed) kept.push_back(d);
    }
    return kept;
}

CountResult count_image(const ImageRecord& image, const std::vector<Annotation>* annotations,
                        DetectorBackend& backend, const CountConfig& cfg, const CountRuntime& rt) {
    cfg.validate();
    const TileGrid grid = grid_scaled(image.width, image.height, cfg.scale, image.id);

    // Tile-local truth for backends that synthesize from it.
    std::vector<std::vector<BBox>> truth_per_tile(static_cast<size_t>(grid.tile_count()));
    if (annotations) {
        std::vector<Annotation> anns(*annotations);
        for (const auto& ta : project_annotations(anns, grid)) {
            const size_t idx = static_cast<size_t>(ta.tile.row) * grid.cols + ta.tile.col;
            truth_per_tile[idx] = ta.boxes;
        }
    } else if (backend.needs_truth()) {
        throw ConfigError("backend '" + backend.name() + "' requires annotations for image '" +
                          image.id + "'");
    }

    // Tile pixel dumps, only when the backend wants real pixels.
    std::vector<std::string> tile_paths(static_cast<size_t>(grid.tile_count()));
    if (backend.needs_pixels()) {
        if (!rt.load_raster || rt.scratch_dir.empty())
            throw ConfigError("backend '" + backend.name() +
                              "' needs pixels: provide load_raster and scratch_dir");
        const Raster raster = rt.load_raster(image);
        if (raster.width != image.width || raster.height != image.height)
            throw IntegrityError("image '" + image.id + "' pixels are " +
                                 std::to_string(raster.width) + "x" + std::to_string(raster.height) +
                                 " but the manifest says " + std::to_string(image.width) + "x" +
                                 std::to_string(image.height));
        std::filesystem::create_directories(rt.scratch_dir);
        for (const Tile& tile : grid.tiles()) {
            const auto path = rt.scratch_dir / (image.id + "_r" + std::to_string(tile.row) + "_c" +
                                                std::to_string(tile.col) + ".png");
            save_png(extract_tile_pixels(raster, tile), path);
            tile_paths[static_cast<size_t>(tile.row) * grid.cols + tile.col] = path.string();
        }
    }

    const std::vector<Tile> tiles = grid.tiles();
    std::vector<std::vector<Detection>> filtered(tiles.size());
    auto run_tile = [&](size_t i) {
        const Tile& tile = tiles[i];
        TileTask task;
        task.image_id = image.id;
        task.tile = tile;
        task.image_width = image.width;
        task.image_height = image.height;
        task.truth_boxes = truth_per_tile[i];
        task.tile_path = tile_paths[i];
        std::vector<Detection> dets;
        try {
            dets = backend.detect(task);
        } catch (const BackendError& e) {
            throw BackendError(e.kind(), "tile (" + std::to_string(tile.row) + ", " +
                                             std::to_string(tile.col) + ") of image '" + image.id +
                                             "': " + e.what());
        }
        filtered[i] = filter_by_confidence(dets, cfg.confidence);
    };
    const int jobs = backend.concurrent_safe() ? rt.jobs : 1;
    parallel_for(tiles.size(), jobs, run_tile);

    CountResult result;
    result.image_id = image.id;
    // Row-major join keeps output independent of scheduling.
    for (size_t i = 0; i < tiles.size(); ++i) {
        result.per_tile.emplace_back(tiles[i], static_cast<long>(filtered[i].size()));
        for (const auto& d : filtered[i])
            result.detections_global.push_back({tile_to_global(tiles[i], d.bbox), d.score});
    }
    if (cfg.dedup_iou) result.detections_global = global_nms(result.detections_global, *cfg.dedup_iou);
    result.predicted = static_cast<long>(result.detections_global.size());
    if (annotations) result.truth = static_cast<long>(annotations->size());
    return result;
}

} // namespace tilecount
