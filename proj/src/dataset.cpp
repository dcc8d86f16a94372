#include "tilecount/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "tilecount/errors.hpp"
#include "tilecount/rng.hpp"

namespace tilecount {

using nlohmann::json;

const ImageRecord* DatasetManifest::find_image(const std::string& image_id) const {
    for (const auto& img : images) {
        if (img.id == image_id) return &img;
    }
    return nullptr;
}

std::vector<const Annotation*> DatasetManifest::annotations_for(const std::string& image_id) const {
    std::vector<const Annotation*> out;
    for (const auto& ann : annotations) {
        if (ann.image_id == image_id) out.push_back(&ann);
    }
    return out;
}

size_t DatasetManifest::count_for(const std::string& image_id) const {
    size_t n = 0;
    for (const auto& ann : annotations) {
        if (ann.image_id == image_id) ++n;
    }
    return n;
}

const char* split_name(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    return "?";
}

std::optional<Split> split_from_name(const std::string& name) {
    if (name == "train") return Split::Train;
    if (name == "val") return Split::Val;
    if (name == "test") return Split::Test;
    return std::nullopt;
}

std::vector<std::string> SplitAssignment::ids_in(Split s) const {
    std::vector<std::string> out;
    for (const auto& [id, sp] : assignment) {
        if (sp == s) out.push_back(id);
    }
    return out;
}

void validate_manifest(const DatasetManifest& manifest) {
    std::unordered_map<std::string, const ImageRecord*> by_id;
    for (const auto& img : manifest.images) {
        if (img.id.empty()) throw IntegrityError("image with empty id");
        if (!by_id.emplace(img.id, &img).second)
            throw IntegrityError("duplicate image id '" + img.id + "'");
        if (img.width <= 0 || img.height <= 0)
            throw IntegrityError("image '" + img.id + "' has nonpositive dimensions");
    }
    const std::set<std::string> cats(manifest.categories.begin(), manifest.categories.end());
    std::unordered_set<std::string> ann_ids;
    for (const auto& ann : manifest.annotations) {
        if (ann.id.empty()) throw IntegrityError("annotation with empty id");
        if (!ann_ids.insert(ann.id).second)
            throw IntegrityError("duplicate annotation id '" + ann.id + "'");
        auto it = by_id.find(ann.image_id);
        if (it == by_id.end())
            throw IntegrityError("annotation '" + ann.id + "' references unknown image '" +
                                 ann.image_id + "'");
        const BBox& b = ann.bbox;
        if (b.w <= 0.0 || b.h <= 0.0)
            throw IntegrityError("annotation '" + ann.id + "' has degenerate box");
        const ImageRecord& img = *it->second;
        if (b.x < 0.0 || b.y < 0.0 || b.right() > img.width || b.bottom() > img.height)
            throw IntegrityError("annotation '" + ann.id + "' box outside image bounds");
        if (!cats.count(ann.category))
            throw IntegrityError("annotation '" + ann.id + "' has unknown category '" +
                                 ann.category + "'");
    }
}

namespace {

json parse_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    json doc = json::parse(in, nullptr, /*allow_exceptions=*/false);
    if (doc.is_discarded())
        throw ParseError("'" + path.string() + "' is not valid JSON");
    return doc;
}

std::string field_str(const json& j, const char* key, const std::string& ctx) {
    if (!j.contains(key) || !j[key].is_string())
        throw ParseError(ctx + ": missing or non-string field '" + key + "'");
    return j[key].get<std::string>();
}

double field_num(const json& j, const char* key, const std::string& ctx) {
    if (!j.contains(key) || !j[key].is_number())
        throw ParseError(ctx + ": missing or non-numeric field '" + key + "'");
    return j[key].get<double>();
}

} // namespace

DatasetManifest load_manifest(const std::filesystem::path& path) {
    const json doc = parse_file(path);
    if (!doc.is_object() || !doc.contains("images") || !doc["images"].is_array() ||
        !doc.contains("annotations") || !doc["annotations"].is_array())
        throw ParseError("'" + path.string() +
                         "': manifest needs top-level 'images' and 'annotations' arrays");

    DatasetManifest m;
    if (doc.contains("categories")) {
        if (!doc["categories"].is_array()) throw ParseError("'categories' must be an array");
        for (const auto& c : doc["categories"]) {
            if (!c.is_string()) throw ParseError("'categories' entries must be strings");
            m.categories.push_back(c.get<std::string>());
        }
    }
    for (const auto& j : doc["images"]) {
        ImageRecord img;
        img.id = field_str(j, "id", "image");
        img.path = j.contains("path") ? field_str(j, "path", "image " + img.id) : "";
        img.width = static_cast<int>(field_num(j, "width", "image " + img.id));
        img.height = static_cast<int>(field_num(j, "height", "image " + img.id));
        m.images.push_back(std::move(img));
    }
    for (const auto& j : doc["annotations"]) {
        Annotation ann;
        ann.id = field_str(j, "id", "annotation");
        ann.image_id = field_str(j, "image_id", "annotation " + ann.id);
        ann.category = field_str(j, "category", "annotation " + ann.id);
        if (!j.contains("bbox") || !j["bbox"].is_array() || j["bbox"].size() != 4)
            throw ParseError("annotation " + ann.id + ": 'bbox' must be [x, y, w, h]");
        for (const auto& v : j["bbox"])
            if (!v.is_number())
                throw ParseError("annotation " + ann.id + ": 'bbox' values must be numbers");
        ann.bbox = {j["bbox"][0].get<double>(), j["bbox"][1].get<double>(),
                    j["bbox"][2].get<double>(), j["bbox"][3].get<double>()};
        m.annotations.push_back(std::move(ann));
    }
    validate_manifest(m);
    return m;
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
    json doc;
    doc["categories"] = manifest.categories;
    doc["images"] = json::array();
    for (const auto& img : manifest.images)
        doc["images"].push_back(
            {{"id", img.id}, {"path", img.path}, {"width", img.width}, {"height", img.height}});
    doc["annotations"] = json::array();
    for (const auto& ann : manifest.annotations)
        doc["annotations"].push_back({{"id", ann.id},
                                      {"image_id", ann.image_id},
                                      {"category", ann.category},
                                      {"bbox", {ann.bbox.x, ann.bbox.y, ann.bbox.w, ann.bbox.h}}});
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << doc.dump(2) << "\n";
}

SplitAssignment split_dataset(const DatasetManifest& manifest,
                              const std::array<double, 3>& ratios, uint64_t seed) {
    if (manifest.images.empty()) throw ConfigError("cannot split an empty manifest");
    double sum = 0.0;
    for (double r : ratios) {
        if (r < 0.0) throw ConfigError("split ratios must be nonnegative");
        sum += r;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");

    std::vector<std::string> ids;
    ids.reserve(manifest.images.size());
    for (const auto& img : manifest.images) ids.push_back(img.id);
    std::sort(ids.begin(), ids.end());
    deterministic_shuffle(ids, seed);

    const size_t n = ids.size();
    const auto n_train = static_cast<size_t>(std::floor(n * ratios[0] + 1e-9));
    const auto n_val = static_cast<size_t>(std::floor(n * ratios[1] + 1e-9));

    SplitAssignment out;
    out.seed = seed;
    out.ratios = ratios;
    for (size_t i = 0; i < n; ++i) {
        Split s = i < n_train ? Split::Train : (i < n_train + n_val ? Split::Val : Split::Test);
        out.assignment.emplace(ids[i], s);
    }
    return out;
}

SplitAssignment load_split(const std::filesystem::path& path) {
    const json doc = parse_file(path);
    if (!doc.is_object() || !doc.contains("assignment") || !doc["assignment"].is_object())
        throw ParseError("'" + path.string() + "': split file needs an 'assignment' object");
    SplitAssignment out;
    out.seed = doc.value("seed", 0ull);
    if (doc.contains("ratios") && doc["ratios"].is_array() && doc["ratios"].size() == 3)
        out.ratios = {doc["ratios"][0].get<double>(), doc["ratios"][1].get<double>(),
                      doc["ratios"][2].get<double>()};
    for (const auto& [id, name] : doc["assignment"].items()) {
        if (!name.is_string()) throw ParseError("split for '" + id + "' must be a string");
        auto s = split_from_name(name.get<std::string>());
        if (!s)
            throw ParseError("split for '" + id + "' must be one of train/val/test, got '" +
                             name.get<std::string>() + "'");
        out.assignment.emplace(id, *s);
    }
    return out;
}

void save_split(const SplitAssignment& split, const std::filesystem::path& path) {
    json doc;
    doc["seed"] = split.seed;
    doc["ratios"] = {split.ratios[0], split.ratios[1], split.ratios[2]};
    json asg = json::object();
    for (const auto& [id, s] : split.assignment) asg[id] = split_name(s);
    doc["assignment"] = std::move(asg);
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << doc.dump(2) << "\n";
}

} // namespace tilecount
