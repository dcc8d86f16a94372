// Reference adapter speaking the line-delimited JSON detection protocol.
// Useful as a protocol fixture and as a pure-synthetic external backend:
//
//   tilecount-stub-adapter empty                 -> no detections
//   tilecount-stub-adapter onebox                -> one fixed box per tile
//   tilecount-stub-adapter store FILE            -> replay a detection store
//   tilecount-stub-adapter planted MANIFEST [conf scale seed]
//                                                -> synthetic optimum backend
//   tilecount-stub-adapter hang|garbage|badid|exit   -> failure modes

#include <chrono>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <thread>

#include <nlohmann/json.hpp>

#include "tilecount/dataset.hpp"
#include "tilecount/detect.hpp"
#include "tilecount/tiling.hpp"

using nlohmann::json;
using namespace tilecount;

namespace {

json boxes_json(const std::vector<Detection>& dets) {
    json out = json::array();
    for (const auto& d : dets)
        out.push_back({{"x", d.bbox.x},
                       {"y", d.bbox.y},
                       {"w", d.bbox.w},
                       {"h", d.bbox.h},
                       {"score", d.score}});
    return out;
}

struct PlantedState {
    DatasetManifest manifest;
    SyntheticOptimumBackend backend;
    // (image_id, side) -> tile-local truth per (row, col); the (-1, -1)
    // sentinel marks a grid whose projection has been computed.
    std::map<std::pair<std::string, int>, std::map<std::pair<int, int>, std::vector<BBox>>> cache;

    PlantedState(DatasetManifest m, SyntheticOptimumConfig cfg)
        : manifest(std::move(m)), backend(cfg) {}

    std::vector<Detection> detect(const std::string& image_id, const Tile& tile) {
        const ImageRecord* img = manifest.find_image(image_id);
        if (!img) return {};
        auto& per_tile = cache[{image_id, tile.side}];
        if (per_tile.empty()) {
            const TileGrid grid = grid_fixed(img->width, img->height, tile.side, image_id);
            std::vector<Annotation> anns;
            for (const auto* a : manifest.annotations_for(image_id)) anns.push_back(*a);
            for (const auto& ta : project_annotations(anns, grid))
                per_tile[{ta.tile.row, ta.tile.col}] = ta.boxes;
            per_tile[{-1, -1}] = {};
        }
        TileTask task;
        task.image_id = image_id;
        task.tile = tile;
        task.image_width = img->width;
        task.image_height = img->height;
        auto it = per_tile.find({tile.row, tile.col});
        if (it != per_tile.end()) task.truth_boxes = it->second;
        return backend.detect(task);
    }
};

} // namespace

int main(int argc, char** argv) {
    const std::string mode = argc > 1 ? argv[1] : "empty";
    if (mode == "exit") return 3;

    std::unique_ptr<PlantedState> planted;
    std::unique_ptr<DetectionStore> store;
    if (mode == "planted") {
        if (argc < 3) {
            std::cerr << "planted mode needs a manifest path\n";
            return 2;
        }
        SyntheticOptimumConfig cfg;
        if (argc > 3) cfg.conf_star = std::stod(argv[3]);
        if (argc > 4) cfg.scale_star = std::stod(argv[4]);
        if (argc > 5) cfg.seed = std::stoull(argv[5]);
        planted = std::make_unique<PlantedState>(load_manifest(argv[2]), cfg);
    } else if (mode == "store") {
        if (argc < 3) {
            std::cerr << "store mode needs a store path\n";
            return 2;
        }
        store = std::make_unique<DetectionStore>(load_detection_store(argv[2]));
    }

    std::string line;
    while (std::getline(std::cin, line)) {
        if (line.empty()) continue;
        const json req = json::parse(line, nullptr, false);
        if (req.is_discarded()) {
            std::cerr << "stub adapter: bad request line\n";
            return 2;
        }
        const long id = req.value("request_id", -1l);
        const std::string image_id = req.value("image_id", "");
        Tile tile;
        if (req.contains("tile")) {
            tile.row = req["tile"].value("row", 0);
            tile.col = req["tile"].value("col", 0);
            tile.side = req["tile"].value("side", 0);
            tile.origin_x = req["tile"].value("origin_x", 0l);
            tile.origin_y = req["tile"].value("origin_y", 0l);
        }

        if (mode == "hang") {
            std::this_thread::sleep_for(std::chrono::hours(1));
            continue;
        }
        if (mode == "garbage") {
            std::cout << "not json at all\n" << std::flush;
            continue;
        }
        if (mode == "badid") {
            std::cout << json{{"request_id", id + 1000}, {"boxes", json::array()}}.dump() << "\n"
                      << std::flush;
            continue;
        }

        json reply = {{"request_id", id}, {"boxes", json::array()}};
        if (mode == "onebox") {
            reply["boxes"].push_back(
                {{"x", 10.0}, {"y", 10.0}, {"w", 20.0}, {"h", 20.0}, {"score", 0.9}});
        } else if (mode == "store") {
            reply["boxes"] = boxes_json(store->lookup(image_id, tile.side, tile.row, tile.col));
        } else if (mode == "planted") {
            reply["boxes"] = boxes_json(planted->detect(image_id, tile));
        }
        std::cout << reply.dump() << "\n" << std::flush;
    }
    return 0;
}
