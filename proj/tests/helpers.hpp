#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>

#include "tilecount/dataset.hpp"
#include "tilecount/rng.hpp"

namespace testutil {

/// Self-deleting scratch directory under the system temp root.
struct TempDir {
    std::filesystem::path path;

    explicit TempDir(const std::string& tag) {
        path = std::filesystem::temp_directory_path() /
               ("tilecount_" + tag + "_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter()++));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::filesystem::path file(const std::string& name) const { return path / name; }

private:
    static int& counter() {
        static int c = 0;
        return c;
    }
};

inline void write_file(const std::filesystem::path& p, const std::string& contents) {
    std::ofstream out(p);
    out << contents;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Manifest with `n` images of the given size and `boxes_per_image`
/// annotations placed away from all multiples of `lattice` (so every grid
/// whose side is a lattice multiple keeps each box whole).
inline tilecount::DatasetManifest synth_manifest(int n, int width, int height,
                                                 int boxes_per_image, uint64_t seed,
                                                 int lattice = 50) {
    tilecount::DatasetManifest m;
    m.categories = {"fish"};
    for (int i = 0; i < n; ++i) {
        tilecount::ImageRecord img;
        img.id = "img" + std::to_string(i);
        img.width = width;
        img.height = height;
        m.images.push_back(img);
        const int cells_x = width / lattice, cells_y = height / lattice;
        std::vector<int> cells(static_cast<size_t>(cells_x) * cells_y);
        for (size_t c = 0; c < cells.size(); ++c) cells[c] = static_cast<int>(c);
        tilecount::deterministic_shuffle(cells, tilecount::derive_seed(seed, i));
        const int take = std::min<int>(boxes_per_image, static_cast<int>(cells.size()));
        for (int b = 0; b < take; ++b) {
            const int cx = cells[b] % cells_x, cy = cells[b] / cells_x;
            // 20x20 box centered in a lattice cell: clear of every boundary.
            tilecount::BBox box{cx * lattice + 15.0, cy * lattice + 15.0, 20.0, 20.0};
            m.annotations.push_back(
                {img.id + "_a" + std::to_string(b), img.id, box, "fish"});
        }
    }
    return m;
}

inline const char* env_or(const char* name, const char* fallback) {
    const char* v = std::getenv(name);
    return v && *v ? v : fallback;
}

} // namespace testutil
