#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tilecount/dataset.hpp"
#include "tilecount/detect.hpp"
#include "tilecount/raster.hpp"
#include "tilecount/tiling.hpp"

namespace tilecount {

struct CountConfig {
    double scale = 1.0;                  // tiling scale in (0, 1]
    double confidence = 0.0;             // score threshold in [0, 1]
    std::optional<double> dedup_iou;     // cross-tile NMS; absent = off

    void validate() const;
};

struct ScoredBox {
    BBox bbox; // global image coordinates
    double score = 0.0;

    bool operator==(const ScoredBox&) const = default;
};

struct CountResult {
    std::string image_id;
    long predicted = 0;
    std::optional<long> truth;
    std::vector<std::pair<Tile, long>> per_tile; // row-major, filtered counts
    std::vector<ScoredBox> detections_global;    // after optional dedup

    double abs_err() const;
    double pct_err() const; // requires truth > 0
};

/// Keeps exactly the detections with score >= threshold, order preserved.
std::vector<Detection> filter_by_confidence(const std::vector<Detection>& dets, double threshold);

/// Greedy score-descending suppression: a box is dropped when its IoU with
/// an already kept box reaches `iou_threshold`. Ties break by (score desc,
/// x, y, w, h) so output order is deterministic.
std::vector<ScoredBox> global_nms(std::vector<ScoredBox> dets, double iou_threshold);

/// Execution knobs for count_image. `load_raster` is only consulted when the
/// backend needs pixels; tiles are then dumped as PNGs under `scratch_dir`.
struct CountRuntime {
    int jobs = 1;
    std::function<Raster(const ImageRecord&)> load_raster;
    std::filesystem::path scratch_dir;
};

/// Full per-image pipeline: scaled grid, per-tile detection in row-major
/// order, confidence filter, mapping to global coordinates, optional dedup.
/// `annotations` (when given) provides both the oracle truth per tile and
/// the ground-truth count — the count is taken over the whole image, not
/// the tiled projection.
CountResult count_image(const ImageRecord& image, const std::vector<Annotation>* annotations,
                        DetectorBackend& backend, const CountConfig& cfg,
                        const CountRuntime& rt = {});

} // namespace tilecount
