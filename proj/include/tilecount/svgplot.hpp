#pragma once

#include <filesystem>
#include <string>

#include "tilecount/stats.hpp"

namespace tilecount {

/// Truth-vs-predicted scatter with the identity reference line and the r2
/// annotation. Output is plain SVG with fixed number formatting, so equal
/// inputs produce byte-identical files.
std::string scatter_svg(const ScatterData& data, const std::string& title);

void write_scatter_svg(const ScatterData& data, const std::string& title,
                       const std::filesystem::path& path);

} // namespace tilecount
