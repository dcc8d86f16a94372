#include "tilecount/raster.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

#include <png.h>

#include "tilecount/errors.hpp"

namespace tilecount {

Raster extract_tile_pixels(const Raster& image, const Tile& tile) {
    Raster out(tile.side, tile.side, image.channels, 0);
    const long x0 = tile.origin_x;
    const long y0 = tile.origin_y;
    const long copy_w = std::min<long>(tile.side, image.width - x0);
    const long copy_h = std::min<long>(tile.side, image.height - y0);
    if (copy_w <= 0 || copy_h <= 0) return out; // fully in the padding
    const size_t row_bytes = static_cast<size_t>(copy_w) * image.channels;
    for (long y = 0; y < copy_h; ++y) {
        const uint8_t* src = &image.data[((y0 + y) * image.width + x0) * image.channels];
        uint8_t* dst = &out.data[static_cast<size_t>(y) * tile.side * image.channels];
        std::memcpy(dst, src, row_bytes);
    }
    return out;
}

namespace {

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

// libpng reports errors through a callback that must not return; throwing
// here unwinds through our own frames only (libpng is built with unwind
// tables on this platform's distro packages).
[[noreturn]] void png_error_thrower(png_structp, png_const_charp msg) {
    throw IoError(std::string("libpng: ") + (msg ? msg : "error"));
}
void png_warning_sink(png_structp, png_const_charp) {}

struct PngReader {
    png_structp png = nullptr;
    png_infop info = nullptr;
    PngReader() {
        png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_thrower,
                                     png_warning_sink);
        if (png) info = png_create_info_struct(png);
        if (!png || !info) throw IoError("libpng init failed");
    }
    ~PngReader() { png_destroy_read_struct(&png, &info, nullptr); }
};

struct PngWriter {
    png_structp png = nullptr;
    png_infop info = nullptr;
    PngWriter() {
        png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_thrower,
                                      png_warning_sink);
        if (png) info = png_create_info_struct(png);
        if (!png || !info) throw IoError("libpng init failed");
    }
    ~PngWriter() { png_destroy_write_struct(&png, &info); }
};

} // namespace

Raster load_png(const std::filesystem::path& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw IoError("cannot open '" + path.string() + "'");

    PngReader ctx;
    png_init_io(ctx.png, fp.get());
    png_read_info(ctx.png, ctx.info);

    // Normalize to 8-bit gray or RGB.
    png_set_strip_16(ctx.png);
    png_set_packing(ctx.png);
    const png_byte color = png_get_color_type(ctx.png, ctx.info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(ctx.png);
    if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(ctx.png, ctx.info) < 8)
        png_set_expand_gray_1_2_4_to_8(ctx.png);
    if (png_get_valid(ctx.png, ctx.info, PNG_INFO_tRNS)) {
        png_set_tRNS_to_alpha(ctx.png);
        png_set_strip_alpha(ctx.png);
    }
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(ctx.png);
    png_read_update_info(ctx.png, ctx.info);

    Raster out;
    out.width = static_cast<int>(png_get_image_width(ctx.png, ctx.info));
    out.height = static_cast<int>(png_get_image_height(ctx.png, ctx.info));
    out.channels = static_cast<int>(png_get_channels(ctx.png, ctx.info));
    if (out.channels != 1 && out.channels != 3)
        throw IoError("'" + path.string() + "': unsupported channel layout");
    out.data.resize(static_cast<size_t>(out.width) * out.height * out.channels);
    std::vector<png_bytep> rows(static_cast<size_t>(out.height));
    const size_t stride = static_cast<size_t>(out.width) * out.channels;
    for (int y = 0; y < out.height; ++y) rows[static_cast<size_t>(y)] = &out.data[y * stride];
    png_read_image(ctx.png, rows.data());
    png_read_end(ctx.png, nullptr);
    return out;
}

void save_png(const Raster& image, const std::filesystem::path& path) {
    if (image.width < 1 || image.height < 1 || (image.channels != 1 && image.channels != 3))
        throw ConfigError("cannot encode empty or non gray/RGB raster");
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw IoError("cannot write '" + path.string() + "'");

    PngWriter ctx;
    png_init_io(ctx.png, fp.get());
    png_set_IHDR(ctx.png, ctx.info, static_cast<png_uint_32>(image.width),
                 static_cast<png_uint_32>(image.height), 8,
                 image.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(ctx.png, ctx.info);
    const size_t stride = static_cast<size_t>(image.width) * image.channels;
    for (int y = 0; y < image.height; ++y)
        png_write_row(ctx.png, const_cast<png_bytep>(&image.data[y * stride]));
    png_write_end(ctx.png, nullptr);
}

Raster load_pnm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::string magic;
    in >> magic;
    if (magic != "P5" && magic != "P6")
        throw ParseError("'" + path.string() + "': only binary PGM/PPM supported");
    auto next_int = [&in, &path]() {
        // PNM allows '#' comments between header tokens.
        for (;;) {
            int c = in.peek();
            if (c == '#') {
                std::string line;
                std::getline(in, line);
            } else if (std::isspace(c)) {
                in.get();
            } else {
                break;
            }
        }
        long v = -1;
        in >> v;
        if (!in || v < 0) throw ParseError("'" + path.string() + "': bad PNM header");
        return v;
    };
    const long w = next_int(), h = next_int(), maxval = next_int();
    if (w < 1 || h < 1 || maxval != 255)
        throw ParseError("'" + path.string() + "': unsupported PNM header");
    in.get(); // single whitespace after maxval
    Raster out(static_cast<int>(w), static_cast<int>(h), magic == "P5" ? 1 : 3);
    in.read(reinterpret_cast<char*>(out.data.data()), static_cast<std::streamsize>(out.data.size()));
    if (static_cast<size_t>(in.gcount()) != out.data.size())
        throw ParseError("'" + path.string() + "': truncated PNM payload");
    return out;
}

void save_pnm(const Raster& image, const std::filesystem::path& path) {
    if (image.channels != 1 && image.channels != 3)
        throw ConfigError("PNM supports 1 or 3 channels");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << (image.channels == 1 ? "P5" : "P6") << "\n"
        << image.width << " " << image.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.data.data()),
              static_cast<std::streamsize>(image.data.size()));
}

Raster load_image(const std::filesystem::path& path) {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) throw IoError("cannot open '" + path.string() + "'");
    char magic[2] = {0, 0};
    probe.read(magic, 2);
    probe.close();
    if (magic[0] == 'P' && (magic[1] == '5' || magic[1] == '6')) return load_pnm(path);
    return load_png(path);
}

} // namespace tilecount
