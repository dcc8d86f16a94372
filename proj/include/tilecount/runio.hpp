#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "tilecount/counting.hpp"
#include "tilecount/stats.hpp"

namespace tilecount {

/// counts.csv: image_id,truth,predicted,abs_err,pct_err (truth columns are
/// blank when no ground truth was available).
void save_counts_csv(const std::vector<CountResult>& results, const std::filesystem::path& path);

/// Per-image JSON records including per-tile counts and global boxes.
void save_counts_json(const std::vector<CountResult>& results, const std::string& model,
                      const CountConfig& cfg, const std::filesystem::path& path);

/// Read a counts.csv back as an evaluation series. Rows without truth are
/// rejected; the series name is supplied by the caller.
EvalSeries load_series_csv(const std::string& model, const std::filesystem::path& path);

struct ModelReportRow {
    std::string model;
    MetricSummary metrics;
    double normalized_sum = 0.0;
    std::string mae_letters;
    std::string mape_letters;
};

void save_metrics_csv(const std::vector<ModelReportRow>& rows, const std::filesystem::path& path);
std::vector<ModelReportRow> load_metrics_csv(const std::filesystem::path& path);

/// Markdown-ish fixed-width table ordered by normalized sum.
std::string render_report_table(const std::vector<ModelReportRow>& rows);

/// Snapshot of a finished run: configuration echo, artifact paths, tool
/// version. One file per run directory.
struct RunRecord {
    std::string run_id;
    std::string command;
    std::string config_json; // serialized RunConfig snapshot
    std::vector<std::string> artifacts;
    std::string version;
};

void save_run_record(const RunRecord& record, const std::filesystem::path& path);

std::string tool_version();

/// Deterministic double formatting shared by every CSV writer.
std::string csv_num(double v);

} // namespace tilecount
