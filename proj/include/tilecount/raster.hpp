#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "tilecount/tiling.hpp"

namespace tilecount {

/// Interleaved 8-bit image, 1 (gray) or 3 (RGB) channels, row-major.
struct Raster {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<uint8_t> data;

    Raster() = default;
    Raster(int w, int h, int ch, uint8_t fill = 0)
        : width(w), height(h), channels(ch),
          data(static_cast<size_t>(w) * h * ch, fill) {}

    uint8_t& at(int x, int y, int c) {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    uint8_t at(int x, int y, int c) const {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }

    bool operator==(const Raster&) const = default;
};

/// Copy one tile out of the image. Regions beyond the image extent are
/// black (all-zero), which realizes the padded canvas.
Raster extract_tile_pixels(const Raster& image, const Tile& tile);

Raster load_png(const std::filesystem::path& path);
void save_png(const Raster& image, const std::filesystem::path& path);

/// Loads PNG or binary PPM/PGM by file magic.
Raster load_image(const std::filesystem::path& path);

Raster load_pnm(const std::filesystem::path& path);
void save_pnm(const Raster& image, const std::filesystem::path& path);

} // namespace tilecount
