#include "tilecount/svgplot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "tilecount/errors.hpp"

namespace tilecount {

namespace {

std::string fmt(double v, const char* spec = "%.2f") {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

} // namespace

std::string scatter_svg(const ScatterData& data, const std::string& title) {
    constexpr double width = 480.0, height = 480.0;
    constexpr double ml = 56.0, mr = 16.0, mt = 36.0, mb = 48.0;
    const double plot_w = width - ml - mr, plot_h = height - mt - mb;

    double hi = 1.0;
    for (const auto& [t, p] : data.points) hi = std::max({hi, t, p});
    hi *= 1.05;

    auto sx = [&](double v) { return ml + v / hi * plot_w; };
    auto sy = [&](double v) { return mt + plot_h - v / hi * plot_h; };

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(width, "%.0f") +
           "\" height=\"" + fmt(height, "%.0f") + "\" viewBox=\"0 0 " + fmt(width, "%.0f") + " " +
           fmt(height, "%.0f") + "\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg += "<text x=\"" + fmt(ml) + "\" y=\"22\" font-family=\"sans-serif\" font-size=\"14\">" +
           title + "</text>\n";

    // Axes.
    svg += "<line x1=\"" + fmt(ml) + "\" y1=\"" + fmt(mt + plot_h) + "\" x2=\"" + fmt(ml + plot_w) +
           "\" y2=\"" + fmt(mt + plot_h) + "\" stroke=\"black\"/>\n";
    svg += "<line x1=\"" + fmt(ml) + "\" y1=\"" + fmt(mt) + "\" x2=\"" + fmt(ml) + "\" y2=\"" +
           fmt(mt + plot_h) + "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 5; ++i) {
        const double v = hi * i / 5.0;
        svg += "<text x=\"" + fmt(sx(v)) + "\" y=\"" + fmt(mt + plot_h + 18.0) +
               "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"middle\">" +
               fmt(v, "%.0f") + "</text>\n";
        svg += "<text x=\"" + fmt(ml - 6.0) + "\" y=\"" + fmt(sy(v) + 3.0) +
               "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">" +
               fmt(v, "%.0f") + "</text>\n";
    }
    svg += "<text x=\"" + fmt(ml + plot_w / 2) + "\" y=\"" + fmt(height - 10.0) +
           "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">truth</text>\n";
    svg += "<text x=\"14\" y=\"" + fmt(mt + plot_h / 2) +
           "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 " +
           fmt(mt + plot_h / 2) + ")\">predicted</text>\n";

    // Identity reference line.
    svg += "<line x1=\"" + fmt(sx(0.0)) + "\" y1=\"" + fmt(sy(0.0)) + "\" x2=\"" + fmt(sx(hi)) +
           "\" y2=\"" + fmt(sy(hi)) + "\" stroke=\"#888888\" stroke-dasharray=\"4 3\"/>\n";

    for (const auto& [t, p] : data.points)
        svg += "<circle cx=\"" + fmt(sx(t)) + "\" cy=\"" + fmt(sy(p)) +
               "\" r=\"3\" fill=\"#1f77b4\" fill-opacity=\"0.7\"/>\n";

    svg += "<text x=\"" + fmt(ml + 8.0) + "\" y=\"" + fmt(mt + 14.0) +
           "\" font-family=\"sans-serif\" font-size=\"12\">R&#178; = " + fmt(data.r2, "%.3f") +
           "</text>\n";
    svg += "</svg>\n";
    return svg;
}

void write_scatter_svg(const ScatterData& data, const std::string& title,
                       const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << scatter_svg(data, title);
}

} // namespace tilecount
