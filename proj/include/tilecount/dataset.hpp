#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tilecount/geometry.hpp"

namespace tilecount {

struct ImageRecord {
    std::string id;
    std::string path;
    int width = 0;
    int height = 0;

    bool operator==(const ImageRecord&) const = default;
};

struct Annotation {
    std::string id;
    std::string image_id;
    BBox bbox;
    std::string category;

    bool operator==(const Annotation&) const = default;
};

/// In-memory dataset: images, their ground-truth boxes, and the category
/// vocabulary. Immutable after load; safe to share across threads.
struct DatasetManifest {
    std::vector<ImageRecord> images;
    std::vector<Annotation> annotations;
    std::vector<std::string> categories;

    bool operator==(const DatasetManifest&) const = default;

    const ImageRecord* find_image(const std::string& image_id) const;
    std::vector<const Annotation*> annotations_for(const std::string& image_id) const;
    size_t count_for(const std::string& image_id) const;
};

enum class Split { Train, Val, Test };

const char* split_name(Split s);
std::optional<Split> split_from_name(const std::string& name);

struct SplitAssignment {
    std::map<std::string, Split> assignment; // image_id -> split
    uint64_t seed = 0;
    std::array<double, 3> ratios{}; // train, val, test

    std::vector<std::string> ids_in(Split s) const;

    bool operator==(const SplitAssignment&) const = default;
};

/// Parse and validate a manifest file. Throws ParseError on malformed JSON,
/// IntegrityError (naming the offending record id) on broken invariants:
/// duplicate ids, nonpositive dimensions, dangling image references,
/// degenerate or out-of-bounds boxes, unknown categories.
DatasetManifest load_manifest(const std::filesystem::path& path);

/// Validate an in-memory manifest; same errors as load_manifest.
void validate_manifest(const DatasetManifest& manifest);

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

/// Deterministic train/val/test split. Image ids are sorted, shuffled with a
/// platform-stable permutation from `seed`, then sliced: floor(n*r_train) to
/// Train, floor(n*r_val) to Val, remainder to Test. Ratios must be
/// nonnegative and sum to 1 within 1e-9; the manifest must be nonempty.
SplitAssignment split_dataset(const DatasetManifest& manifest,
                              const std::array<double, 3>& ratios, uint64_t seed);

SplitAssignment load_split(const std::filesystem::path& path);
void save_split(const SplitAssignment& split, const std::filesystem::path& path);

} // namespace tilecount
