#include "tilecount/runio.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "tilecount/errors.hpp"

namespace tilecount {

using nlohmann::json;

std::string csv_num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

std::string tool_version() { return "0.1.0"; }

void save_counts_csv(const std::vector<CountResult>& results, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << "image_id,truth,predicted,abs_err,pct_err\n";
    for (const auto& r : results) {
        out << r.image_id << ",";
        if (r.truth) {
            out << *r.truth << "," << r.predicted << "," << csv_num(r.abs_err()) << ",";
            out << (*r.truth > 0 ? csv_num(r.pct_err()) : std::string());
        } else {
            out << "," << r.predicted << ",,";
        }
        out << "\n";
    }
}

void save_counts_json(const std::vector<CountResult>& results, const std::string& model,
                      const CountConfig& cfg, const std::filesystem::path& path) {
    json doc;
    doc["model"] = model;
    doc["config"] = {{"scale", cfg.scale}, {"confidence", cfg.confidence}};
    if (cfg.dedup_iou)
        doc["config"]["dedup_iou"] = *cfg.dedup_iou;
    else
        doc["config"]["dedup_iou"] = nullptr;
    doc["results"] = json::array();
    for (const auto& r : results) {
        json rec = {{"image_id", r.image_id}, {"predicted", r.predicted}};
        if (r.truth)
            rec["truth"] = *r.truth;
        else
            rec["truth"] = nullptr;
        rec["per_tile"] = json::array();
        for (const auto& [tile, count] : r.per_tile)
            rec["per_tile"].push_back({{"row", tile.row}, {"col", tile.col}, {"count", count}});
        rec["detections"] = json::array();
        for (const auto& d : r.detections_global)
            rec["detections"].push_back({{"x", d.bbox.x},
                                         {"y", d.bbox.y},
                                         {"w", d.bbox.w},
                                         {"h", d.bbox.h},
                                         {"score", d.score}});
        doc["results"].push_back(std::move(rec));
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << doc.dump(2) << "\n";
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_num(const std::string& s, const std::string& ctx) {
    double v = 0.0;
    const auto* begin = s.data();
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end)
        throw ParseError(ctx + ": '" + s + "' is not a number");
    return v;
}

} // namespace

EvalSeries load_series_csv(const std::string& model, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    EvalSeries series;
    series.model = model;
    std::string line;
    if (!std::getline(in, line)) throw ParseError("'" + path.string() + "' is empty");
    const auto header = split_csv_line(line);
    if (header.size() < 3 || header[0] != "image_id" || header[1] != "truth" ||
        header[2] != "predicted")
        throw ParseError("'" + path.string() + "': expected header image_id,truth,predicted,...");
    size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() < 3)
            throw ParseError("'" + path.string() + "' row " + std::to_string(row) +
                             ": expected at least 3 columns");
        const std::string ctx = "'" + path.string() + "' row " + std::to_string(row);
        if (fields[1].empty())
            throw ParseError(ctx + ": missing ground truth; evaluation needs annotated counts");
        series.pairs.push_back(
            {fields[0], parse_num(fields[1], ctx), parse_num(fields[2], ctx)});
    }
    if (series.pairs.empty()) throw ParseError("'" + path.string() + "' has no data rows");
    return series;
}

void save_metrics_csv(const std::vector<ModelReportRow>& rows, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << "model,mae,mae_sd,mape,mape_sd,rmse,r2,normalized_sum,letters\n";
    for (const auto& r : rows) {
        out << r.model << "," << csv_num(r.metrics.mae) << "," << csv_num(r.metrics.mae_sd) << ","
            << csv_num(r.metrics.mape) << "," << csv_num(r.metrics.mape_sd) << ","
            << csv_num(r.metrics.rmse) << "," << csv_num(r.metrics.r2) << ","
            << csv_num(r.normalized_sum) << "," << r.mae_letters << "\n";
    }
}

std::vector<ModelReportRow> load_metrics_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::string line;
    if (!std::getline(in, line)) throw ParseError("'" + path.string() + "' is empty");
    if (!line.starts_with("model,mae,"))
        throw ParseError("'" + path.string() + "' is not a metrics CSV");
    std::vector<ModelReportRow> rows;
    size_t n = 1;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() < 9)
            throw ParseError("'" + path.string() + "' row " + std::to_string(n) + ": short row");
        const std::string ctx = "'" + path.string() + "' row " + std::to_string(n);
        ModelReportRow r;
        r.model = f[0];
        r.metrics.mae = parse_num(f[1], ctx);
        r.metrics.mae_sd = parse_num(f[2], ctx);
        r.metrics.mape = parse_num(f[3], ctx);
        r.metrics.mape_sd = parse_num(f[4], ctx);
        r.metrics.rmse = parse_num(f[5], ctx);
        r.metrics.rmse_sd = r.metrics.mae_sd;
        r.metrics.r2 = parse_num(f[6], ctx);
        r.normalized_sum = parse_num(f[7], ctx);
        r.mae_letters = f[8];
        rows.push_back(std::move(r));
    }
    return rows;
}

std::string render_report_table(const std::vector<ModelReportRow>& rows) {
    auto sorted = rows;
    std::sort(sorted.begin(), sorted.end(), [](const ModelReportRow& a, const ModelReportRow& b) {
        if (a.normalized_sum != b.normalized_sum) return a.normalized_sum < b.normalized_sum;
        return a.model < b.model;
    });
    std::string out;
    char buf[256];
    out += "| Model | MAE | MAPE | RMSE | R2 | norm. sum |\n";
    out += "|---|---|---|---|---|---|\n";
    for (const auto& r : sorted) {
        const std::string mae_l = r.mae_letters.empty() ? "" : " " + r.mae_letters;
        const std::string mape_l = r.mape_letters.empty() ? mae_l : " " + r.mape_letters;
        std::snprintf(buf, sizeof buf,
                      "| %s | %.2f±%.2f%s | %.2f±%.2f%s | %.2f±%.2f | %.3f | %.4f |\n",
                      r.model.c_str(), r.metrics.mae, r.metrics.mae_sd, mae_l.c_str(),
                      r.metrics.mape, r.metrics.mape_sd, mape_l.c_str(), r.metrics.rmse,
                      r.metrics.rmse_sd, r.metrics.r2, r.normalized_sum);
        out += buf;
    }
    return out;
}

void save_run_record(const RunRecord& record, const std::filesystem::path& path) {
    json doc;
    doc["run_id"] = record.run_id;
    doc["command"] = record.command;
    doc["version"] = record.version;
    doc["artifacts"] = record.artifacts;
    json cfg = json::parse(record.config_json, nullptr, false);
    doc["config"] = cfg.is_discarded() ? json(record.config_json) : cfg;
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << doc.dump(2) << "\n";
}

} // namespace tilecount
