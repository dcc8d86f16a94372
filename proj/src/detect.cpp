#include "tilecount/detect.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "tilecount/errors.hpp"
#include "tilecount/rng.hpp"

namespace tilecount {

using nlohmann::json;

void OracleConfig::validate() const {
    if (recall < 0.0 || recall > 1.0) throw ConfigError("oracle recall must be in [0, 1]");
    if (fp_per_tile < 0.0) throw ConfigError("oracle fp_per_tile must be nonnegative");
    if (jitter_px < 0.0) throw ConfigError("oracle jitter_px must be nonnegative");
    auto check_range = [](const std::array<double, 2>& r, const char* what) {
        if (r[0] > r[1] || r[0] < 0.0 || r[1] > 1.0)
            throw ConfigError(std::string(what) + " must be an ordered range within [0, 1]");
    };
    check_range(score_range, "oracle score_range");
    check_range(fp_score_range, "oracle fp_score_range");
}

std::vector<Detection> oracle_detect(const TileAnnotations& truth, const OracleConfig& cfg,
                                     const std::string& image_id, int /*image_width*/,
                                     int /*image_height*/) {
    cfg.validate();
    const Tile& tile = truth.tile;
    const double side = tile.side;
    Rng rng(derive_seed(cfg.seed, hash_str(image_id), static_cast<uint64_t>(tile.row),
                        static_cast<uint64_t>(tile.col)));

    std::vector<Detection> out;
    // Truth boxes, each kept independently with probability `recall`.
    double min_w = 1e300, max_w = 0.0, min_h = 1e300, max_h = 0.0;
    for (const auto& b : truth.boxes) {
        min_w = std::min(min_w, b.w);
        max_w = std::max(max_w, b.w);
        min_h = std::min(min_h, b.h);
        max_h = std::max(max_h, b.h);
        if (!rng.bernoulli(cfg.recall)) continue;
        double dx = 0.0, dy = 0.0;
        if (cfg.jitter_px > 0.0) {
            dx = rng.uniform(-cfg.jitter_px, cfg.jitter_px);
            dy = rng.uniform(-cfg.jitter_px, cfg.jitter_px);
        }
        BBox d = b;
        d.x = std::clamp(b.x + dx, 0.0, std::max(0.0, side - b.w));
        d.y = std::clamp(b.y + dy, 0.0, std::max(0.0, side - b.h));
        out.push_back({d, rng.uniform(cfg.score_range[0], cfg.score_range[1])});
    }
    // False positives, sized like the truth boxes when any are present.
    const int n_fp = rng.poisson(cfg.fp_per_tile);
    const bool have_truth = !truth.boxes.empty();
    const double lo_w = have_truth ? min_w : 4.0;
    const double hi_w = have_truth ? max_w : std::max(4.0, side / 4.0);
    const double lo_h = have_truth ? min_h : 4.0;
    const double hi_h = have_truth ? max_h : std::max(4.0, side / 4.0);
    for (int i = 0; i < n_fp; ++i) {
        const double w = std::min(side, rng.uniform(lo_w, hi_w == lo_w ? lo_w + 1e-12 : hi_w));
        const double h = std::min(side, rng.uniform(lo_h, hi_h == lo_h ? lo_h + 1e-12 : hi_h));
        const double x = rng.uniform(0.0, std::max(1e-12, side - w));
        const double y = rng.uniform(0.0, std::max(1e-12, side - h));
        out.push_back({{x, y, w, h}, rng.uniform(cfg.fp_score_range[0], cfg.fp_score_range[1])});
    }
    return out;
}

OracleBackend::OracleBackend(OracleConfig cfg) : cfg_(cfg) { cfg_.validate(); }

std::vector<Detection> OracleBackend::detect(const TileTask& task) {
    TileAnnotations truth;
    truth.tile = task.tile;
    truth.boxes = task.truth_boxes;
    return oracle_detect(truth, cfg_, task.image_id, task.image_width, task.image_height);
}

const std::vector<Detection> DetectionStore::empty_;

const std::vector<Detection>& DetectionStore::lookup(const std::string& image_id, int side,
                                                     int row, int col) const {
    auto it = entries_.find(Key{image_id, side, row, col});
    return it == entries_.end() ? empty_ : it->second;
}

void DetectionStore::insert(const std::string& image_id, int side, int row, int col,
                            std::vector<Detection> dets) {
    auto [it, fresh] = entries_.emplace(Key{image_id, side, row, col}, std::move(dets));
    if (!fresh)
        throw IntegrityError("duplicate store entry for image '" + image_id + "' side " +
                             std::to_string(side) + " tile (" + std::to_string(row) + ", " +
                             std::to_string(col) + ")");
}

DetectionStore load_detection_store(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded() || !doc.is_object() || !doc.contains("entries") ||
        !doc["entries"].is_array())
        throw ParseError("'" + path.string() + "' is not a detection store file");

    DetectionStore store;
    store.provenance().model = doc.value("model", "");
    store.provenance().run_id = doc.value("run_id", "");
    for (const auto& e : doc["entries"]) {
        if (!e.contains("image_id") || !e["image_id"].is_string() || !e.contains("side") ||
            !e.contains("row") || !e.contains("col"))
            throw ParseError("store entry missing image_id/side/row/col");
        const std::string image_id = e["image_id"].get<std::string>();
        const int side = e["side"].get<int>();
        const int row = e["row"].get<int>();
        const int col = e["col"].get<int>();
        const std::string where =
            "store entry " + image_id + " (" + std::to_string(row) + ", " + std::to_string(col) + ")";
        if (side < 1 || row < 0 || col < 0) throw IntegrityError(where + ": bad tile key");
        std::vector<Detection> dets;
        if (e.contains("detections")) {
            if (!e["detections"].is_array()) throw ParseError(where + ": 'detections' must be an array");
            for (const auto& d : e["detections"]) {
                for (const char* k : {"x", "y", "w", "h", "score"})
                    if (!d.contains(k) || !d[k].is_number())
                        throw ParseError(where + ": detection missing numeric '" + k + "'");
                Detection det{{d["x"].get<double>(), d["y"].get<double>(), d["w"].get<double>(),
                               d["h"].get<double>()},
                              d["score"].get<double>()};
                if (det.score < 0.0 || det.score > 1.0)
                    throw IntegrityError(where + ": score " + std::to_string(det.score) +
                                         " outside [0, 1]");
                if (det.bbox.w <= 0.0 || det.bbox.h <= 0.0)
                    throw IntegrityError(where + ": degenerate detection box");
                dets.push_back(det);
            }
        }
        store.insert(image_id, side, row, col, std::move(dets));
    }
    return store;
}

void save_detection_store(const DetectionStore& store, const std::filesystem::path& path) {
    json doc;
    doc["model"] = store.provenance().model;
    doc["run_id"] = store.provenance().run_id;
    doc["entries"] = json::array();
    for (const auto& [key, dets] : store.entries()) {
        json entry = {{"image_id", std::get<0>(key)},
                      {"side", std::get<1>(key)},
                      {"row", std::get<2>(key)},
                      {"col", std::get<3>(key)},
                      {"detections", json::array()}};
        for (const auto& d : dets)
            entry["detections"].push_back({{"x", d.bbox.x},
                                           {"y", d.bbox.y},
                                           {"w", d.bbox.w},
                                           {"h", d.bbox.h},
                                           {"score", d.score}});
        doc["entries"].push_back(std::move(entry));
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << doc.dump(2) << "\n";
}

std::vector<Detection> SyntheticOptimumBackend::detect(const TileTask& task) {
    const double side = task.tile.side;
    const double min_side = std::min(task.image_width, task.image_height);
    if (min_side <= 0.0) throw BackendError(BackendError::Kind::Other, "task missing image size");
    const double s_hat = side / min_side;
    const double off_scale = std::abs(s_hat - cfg_.scale_star);

    std::vector<Detection> out;
    if (task.truth_boxes.empty()) return out;
    const uint64_t tile_key = derive_seed(cfg_.seed, hash_str(task.image_id),
                                          static_cast<uint64_t>(task.tile.row),
                                          static_cast<uint64_t>(task.tile.col));
    auto unit = [](uint64_t k) { return static_cast<double>(k >> 11) * 0x1.0p-53; };
    auto decoy_box = [&](uint64_t k) -> BBox {
        const double w = std::min(8.0, side), h = std::min(8.0, side);
        return {unit(k) * (side - w), unit(mix64(k ^ 0xABu)) * (side - h), w, h};
    };

    // Truth at full confidence: kept at every threshold.
    for (const auto& b : task.truth_boxes) out.push_back({b, 1.0});

    // Decoys strictly below conf_star: thresholds under conf_star admit a
    // growing share of them.
    const size_t n_fp = static_cast<size_t>(
        std::llround(cfg_.fp_per_truth * static_cast<double>(task.truth_boxes.size())));
    for (size_t j = 0; j < n_fp; ++j) {
        const uint64_t k = derive_seed(tile_key, 0xFAu, j);
        out.push_back({decoy_box(k), cfg_.conf_star * unit(mix64(k ^ 0xCDu)) * 0.999});
    }

    // Scale deviation injects always-kept extras; ceil keeps the penalty
    // strictly positive on any off-optimum grid.
    if (off_scale > 1e-12) {
        const size_t n_extra = static_cast<size_t>(std::ceil(
            cfg_.scale_slope * off_scale * static_cast<double>(task.truth_boxes.size()) - 1e-12));
        for (size_t j = 0; j < n_extra; ++j)
            out.push_back({decoy_box(derive_seed(tile_key, 0xE0u, j)), 1.0});
    }
    return out;
}

} // namespace tilecount
