// Command-line surface for the tiled-counting pipeline: dataset validation,
// splitting, tile dumps, counting, hyperparameter tuning, cross-model
// evaluation, and report rendering. Every subcommand persists its outputs
// under a run directory and re-runs byte-identically for a fixed config.

#include <ctime>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "tilecount/adapter.hpp"
#include "tilecount/counting.hpp"
#include "tilecount/dataset.hpp"
#include "tilecount/detect.hpp"
#include "tilecount/errors.hpp"
#include "tilecount/parallel.hpp"
#include "tilecount/raster.hpp"
#include "tilecount/runio.hpp"
#include "tilecount/stats.hpp"
#include "tilecount/svgplot.hpp"
#include "tilecount/tiling.hpp"
#include "tilecount/tune.hpp"

using nlohmann::json;
using namespace tilecount;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitBackend = 3;
constexpr int kExitConfig = 4;

struct CommonOpts {
    std::string manifest_path;
    std::string config_path;
    std::string out_dir;
    std::string run_id;
    uint64_t seed = 42;
    int jobs = 0; // 0 = machine parallelism
};

struct BackendOpts {
    std::string oracle_json;
    std::string store_path;
    std::string adapter_command;
    int adapter_timeout_ms = 30000;
    bool no_tile_pixels = false;
};

std::string default_run_root() {
    const char* env = std::getenv("TILECOUNT_RUN_ROOT");
    return env && *env ? env : "runs";
}

std::string make_run_id(const CommonOpts& opts) {
    if (!opts.run_id.empty()) return opts.run_id;
    char stamp[32];
    const std::time_t now = std::time(nullptr);
    std::tm tm_utc{};
    gmtime_r(&now, &tm_utc);
    std::strftime(stamp, sizeof stamp, "%Y%m%dT%H%M%S", &tm_utc);
    return std::string(stamp) + "-seed" + std::to_string(opts.seed);
}

int effective_jobs(const CommonOpts& opts) {
    if (opts.jobs > 0) return opts.jobs;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw ? static_cast<int>(hw) : 1;
}

struct RunDir {
    std::filesystem::path root;
    std::vector<std::string> artifacts;

    std::filesystem::path file(const std::string& name) {
        artifacts.push_back(name);
        return root / name;
    }
};

RunDir open_run_dir(const CommonOpts& opts) {
    RunDir dir;
    const std::string root = opts.out_dir.empty() ? default_run_root() : opts.out_dir;
    dir.root = std::filesystem::path(root) / make_run_id(opts);
    std::filesystem::create_directories(dir.root);
    return dir;
}

void finish_run(RunDir& dir, const std::string& command,
                const json& config_snapshot) {
    {
        std::ofstream cfg(dir.root / "config.json");
        cfg << config_snapshot.dump(2) << "\n";
    }
    dir.artifacts.push_back("config.json");
    RunRecord record;
    record.run_id = dir.root.filename().string();
    record.command = command;
    record.config_json = config_snapshot.dump();
    record.artifacts = dir.artifacts;
    record.version = tool_version();
    save_run_record(record, dir.root / "run.json");
    std::ofstream log(dir.root / "log.txt", std::ios::app);
    log << "command: " << command << "\n";
    log << "version: " << record.version << "\n";
    for (const auto& a : dir.artifacts) log << "artifact: " << a << "\n";
    std::cout << "run " << record.run_id << ": wrote " << dir.artifacts.size()
              << " artifact(s) under " << dir.root.string() << "\n";
}

// JSON config file as defaults; command-line flags win. Only keys present
// in the file are applied.
void apply_config_defaults(const std::string& path, CommonOpts& common, BackendOpts& backend,
                           json& snapshot) {
    if (path.empty()) return;
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    const json cfg = json::parse(in, nullptr, false);
    if (cfg.is_discarded() || !cfg.is_object())
        throw ConfigError("config file '" + path + "' is not a JSON object");
    snapshot["config_file"] = cfg;
    if (cfg.contains("manifest") && common.manifest_path.empty())
        common.manifest_path = cfg["manifest"].get<std::string>();
    if (cfg.contains("out_dir") && common.out_dir.empty())
        common.out_dir = cfg["out_dir"].get<std::string>();
    if (cfg.contains("seed")) common.seed = cfg["seed"].get<uint64_t>();
    if (cfg.contains("jobs")) common.jobs = cfg["jobs"].get<int>();
    if (cfg.contains("backend") && cfg["backend"].is_object()) {
        const json& b = cfg["backend"];
        if (b.contains("oracle")) backend.oracle_json = b["oracle"].dump();
        if (b.contains("store")) backend.store_path = b["store"].get<std::string>();
        if (b.contains("adapter")) {
            const json& a = b["adapter"];
            backend.adapter_command = a.value("command", "");
            backend.adapter_timeout_ms = a.value("timeout_ms", backend.adapter_timeout_ms);
            backend.no_tile_pixels = !a.value("send_pixels", true);
        }
    }
}

OracleConfig parse_oracle_config(const std::string& text, uint64_t default_seed) {
    OracleConfig cfg;
    cfg.seed = default_seed;
    if (text.empty() || text == "perfect") {
        cfg.recall = 1.0;
        cfg.fp_per_tile = 0.0;
        cfg.jitter_px = 0.0;
        cfg.score_range = {1.0, 1.0};
        return cfg;
    }
    const json doc = json::parse(text, nullptr, false);
    if (doc.is_discarded() || !doc.is_object())
        throw ConfigError("--oracle expects 'perfect' or a JSON object");
    cfg.recall = doc.value("recall", 1.0);
    cfg.fp_per_tile = doc.value("fp_per_tile", 0.0);
    cfg.jitter_px = doc.value("jitter_px", 0.0);
    if (doc.contains("score_range"))
        cfg.score_range = {doc["score_range"][0].get<double>(), doc["score_range"][1].get<double>()};
    if (doc.contains("fp_score_range"))
        cfg.fp_score_range = {doc["fp_score_range"][0].get<double>(),
                              doc["fp_score_range"][1].get<double>()};
    if (doc.contains("seed")) cfg.seed = doc["seed"].get<uint64_t>();
    cfg.validate();
    return cfg;
}

struct BackendBundle {
    std::unique_ptr<DetectorBackend> backend;
    std::unique_ptr<DetectionStore> store; // owns storage for StoreBackend
    json descriptor;
};

BackendBundle make_backend(const BackendOpts& opts, uint64_t seed) {
    const int specified = (!opts.oracle_json.empty() ? 1 : 0) + (!opts.store_path.empty() ? 1 : 0) +
                          (!opts.adapter_command.empty() ? 1 : 0);
    if (specified != 1)
        throw ConfigError("specify exactly one backend: --oracle, --store, or --adapter");
    BackendBundle bundle;
    if (!opts.oracle_json.empty()) {
        const OracleConfig cfg = parse_oracle_config(opts.oracle_json, seed);
        bundle.descriptor = {{"oracle",
                              {{"recall", cfg.recall},
                               {"fp_per_tile", cfg.fp_per_tile},
                               {"jitter_px", cfg.jitter_px},
                               {"score_range", {cfg.score_range[0], cfg.score_range[1]}},
                               {"fp_score_range", {cfg.fp_score_range[0], cfg.fp_score_range[1]}},
                               {"seed", cfg.seed}}}};
        bundle.backend = std::make_unique<OracleBackend>(cfg);
    } else if (!opts.store_path.empty()) {
        bundle.store = std::make_unique<DetectionStore>(load_detection_store(opts.store_path));
        bundle.descriptor = {{"store", opts.store_path}};
        bundle.backend = std::make_unique<StoreBackend>(*bundle.store);
    } else {
        ExternalBackend::Options ext;
        ext.timeout_ms = opts.adapter_timeout_ms;
        ext.send_pixels = !opts.no_tile_pixels;
        bundle.descriptor = {{"adapter",
                              {{"command", opts.adapter_command},
                               {"timeout_ms", ext.timeout_ms},
                               {"send_pixels", ext.send_pixels}}}};
        bundle.backend = std::make_unique<ExternalBackend>(opts.adapter_command, ext);
    }
    return bundle;
}

std::filesystem::path resolve_image_path(const std::filesystem::path& manifest_path,
                                         const ImageRecord& img) {
    const std::filesystem::path p(img.path);
    if (p.is_absolute()) return p;
    return manifest_path.parent_path() / p;
}

std::vector<const ImageRecord*> select_images(const DatasetManifest& manifest,
                                              const std::string& split_file,
                                              const std::string& use_split) {
    std::vector<const ImageRecord*> out;
    if (split_file.empty()) {
        for (const auto& img : manifest.images) out.push_back(&img);
        return out;
    }
    const SplitAssignment split = load_split(split_file);
    const auto wanted = split_from_name(use_split);
    if (!wanted) throw ConfigError("--use-split must be train, val, or test");
    for (const auto& img : manifest.images) {
        auto it = split.assignment.find(img.id);
        if (it == split.assignment.end())
            throw IntegrityError("image '" + img.id + "' missing from split file");
        if (it->second == *wanted) out.push_back(&img);
    }
    if (out.empty()) throw ConfigError("no images in split '" + use_split + "'");
    return out;
}

// ---------------------------------------------------------------- validate

int cmd_validate(const CommonOpts& common, const std::string& store_path) {
    const DatasetManifest manifest = load_manifest(common.manifest_path);
    std::cout << manifest.images.size() << " images, " << manifest.annotations.size()
              << " annotations, " << manifest.categories.size() << " categories\n";
    if (!store_path.empty()) {
        const DetectionStore store = load_detection_store(store_path);
        std::cout << "store: " << store.entry_count() << " tile entries (model '"
                  << store.provenance().model << "')\n";
    }
    std::cout << "OK\n";
    return kExitOk;
}

// ------------------------------------------------------------------- split

int cmd_split(const CommonOpts& common, const std::vector<double>& ratios) {
    if (ratios.size() != 3) throw ConfigError("--ratios expects three comma-separated fractions");
    const DatasetManifest manifest = load_manifest(common.manifest_path);
    const SplitAssignment split =
        split_dataset(manifest, {ratios[0], ratios[1], ratios[2]}, common.seed);
    RunDir dir = open_run_dir(common);
    save_split(split, dir.file("splits.json"));
    std::cout << "split sizes: train " << split.ids_in(Split::Train).size() << ", val "
              << split.ids_in(Split::Val).size() << ", test " << split.ids_in(Split::Test).size()
              << "\n";
    finish_run(dir, "split",
               json{{"manifest", common.manifest_path},
                    {"ratios", ratios},
                    {"seed", common.seed}});
    return kExitOk;
}

// -------------------------------------------------------------------- tile

int cmd_tile(const CommonOpts& common, const std::vector<std::string>& only_images, int side,
             double scale, double keep_fraction) {
    if ((side > 0) == (scale > 0))
        throw ConfigError("specify exactly one of --side or --scale");
    const TileSpec spec = side > 0 ? TileSpec::fixed(side) : TileSpec::scaled(scale);
    const DatasetManifest manifest = load_manifest(common.manifest_path);
    RunDir dir = open_run_dir(common);
    std::filesystem::create_directories(dir.root / "tiles");

    size_t tiles_written = 0;
    for (const auto& img : manifest.images) {
        if (!only_images.empty() &&
            std::find(only_images.begin(), only_images.end(), img.id) == only_images.end())
            continue;
        const TileGrid grid = make_grid(img.width, img.height, spec, img.id);
        std::vector<Annotation> anns;
        for (const auto* a : manifest.annotations_for(img.id)) anns.push_back(*a);
        ProjectionStats stats;
        const auto projected = project_annotations(anns, grid, keep_fraction, &stats);
        if (stats.dropped_oversize > 0)
            std::cerr << "warning: " << stats.dropped_oversize << " box(es) on '" << img.id
                      << "' are too large to satisfy the retention rule at side " << grid.side
                      << "\n";

        const Raster raster = load_image(resolve_image_path(common.manifest_path, img));
        if (raster.width != img.width || raster.height != img.height)
            throw IntegrityError("image '" + img.id + "' pixel size disagrees with the manifest");
        for (const Tile& tile : grid.tiles()) {
            const std::string name =
                img.id + "_r" + std::to_string(tile.row) + "_c" + std::to_string(tile.col) + ".png";
            save_png(extract_tile_pixels(raster, tile), dir.root / "tiles" / name);
            dir.artifacts.push_back("tiles/" + name);
            ++tiles_written;
        }
        json sidecar = {{"image_id", img.id},
                        {"side", grid.side},
                        {"cols", grid.cols},
                        {"rows", grid.rows},
                        {"pad_right", grid.pad_right},
                        {"pad_bottom", grid.pad_bottom},
                        {"keep_fraction", keep_fraction},
                        {"tiles", json::array()}};
        for (const auto& ta : projected) {
            json t = {{"row", ta.tile.row}, {"col", ta.tile.col}, {"boxes", json::array()}};
            for (size_t i = 0; i < ta.boxes.size(); ++i)
                t["boxes"].push_back({{"x", ta.boxes[i].x},
                                      {"y", ta.boxes[i].y},
                                      {"w", ta.boxes[i].w},
                                      {"h", ta.boxes[i].h},
                                      {"source_id", ta.source_ids[i]}});
            sidecar["tiles"].push_back(std::move(t));
        }
        const std::string sidecar_name = img.id + "_tiles.json";
        std::ofstream out(dir.root / "tiles" / sidecar_name);
        out << sidecar.dump(2) << "\n";
        dir.artifacts.push_back("tiles/" + sidecar_name);
    }
    std::cout << "wrote " << tiles_written << " tile image(s)\n";
    finish_run(dir, "tile",
               json{{"manifest", common.manifest_path},
                    {"side", side},
                    {"scale", scale},
                    {"keep_fraction", keep_fraction}});
    return kExitOk;
}

// ------------------------------------------------------------------- count

int cmd_count(const CommonOpts& common, const BackendOpts& backend_opts,
              const std::string& split_file, const std::string& use_split, double scale,
              double confidence, double dedup_iou, const std::string& model) {
    const DatasetManifest manifest = load_manifest(common.manifest_path);
    const auto images = select_images(manifest, split_file, use_split);
    BackendBundle bundle = make_backend(backend_opts, common.seed);

    CountConfig cfg;
    cfg.scale = scale;
    cfg.confidence = confidence;
    if (dedup_iou > 0.0) cfg.dedup_iou = dedup_iou;
    cfg.validate();

    RunDir dir = open_run_dir(common);
    CountRuntime rt;
    rt.jobs = 1; // parallelism is across images below
    if (bundle.backend->needs_pixels()) {
        const std::filesystem::path manifest_path = common.manifest_path;
        rt.load_raster = [manifest_path](const ImageRecord& img) {
            return load_image(resolve_image_path(manifest_path, img));
        };
        rt.scratch_dir = dir.root / "tiles";
        dir.artifacts.push_back("tiles/");
    }

    std::vector<CountResult> results(images.size());
    std::map<std::string, std::vector<Annotation>> anns_by_image;
    for (const auto* img : images) {
        auto& anns = anns_by_image[img->id];
        for (const auto* a : manifest.annotations_for(img->id)) anns.push_back(*a);
    }
    const int jobs = bundle.backend->concurrent_safe() ? effective_jobs(common) : 1;
    parallel_for(images.size(), jobs, [&](size_t i) {
        const ImageRecord& img = *images[i];
        results[i] = count_image(img, &anns_by_image.at(img.id), *bundle.backend, cfg, rt);
    });

    save_counts_csv(results, dir.file("counts.csv"));
    save_counts_json(results, model, cfg, dir.file("counts.json"));
    long exact = 0;
    for (const auto& r : results)
        if (r.truth && *r.truth == r.predicted) ++exact;
    std::cout << "counted " << results.size() << " image(s); exact on " << exact << "\n";
    finish_run(dir, "count",
               json{{"manifest", common.manifest_path},
                    {"backend", bundle.descriptor},
                    {"scale", scale},
                    {"confidence", confidence},
                    {"dedup_iou", cfg.dedup_iou ? json(*cfg.dedup_iou) : json(nullptr)},
                    {"split_file", split_file},
                    {"use_split", use_split},
                    {"model", model},
                    {"seed", common.seed}});
    return kExitOk;
}

// -------------------------------------------------------------------- tune

int cmd_tune(const CommonOpts& common, const BackendOpts& backend_opts,
             const std::string& split_file, const std::string& use_split,
             const std::vector<double>& conf_range, const std::vector<double>& scale_range,
             int rounds, int refine, double downscale, const std::string& augment_csv,
             const std::string& model) {
    const DatasetManifest manifest = load_manifest(common.manifest_path);
    const auto images = select_images(manifest, split_file, use_split);
    std::vector<std::string> ids;
    for (const auto* img : images) ids.push_back(img->id);

    TuneSpace space;
    if (!conf_range.empty()) {
        if (conf_range.size() != 3) throw ConfigError("--conf-range expects lo,hi,step");
        space.conf_lo = conf_range[0];
        space.conf_hi = conf_range[1];
        space.conf_step = conf_range[2];
    }
    if (!scale_range.empty()) {
        if (scale_range.size() != 3) throw ConfigError("--scale-range expects lo,hi,step");
        space.scale_lo = scale_range[0];
        space.scale_hi = scale_range[1];
        space.scale_step = scale_range[2];
    }

    Preprocess pre;
    pre.downscale = downscale;
    if (!augment_csv.empty()) {
        std::istringstream in(augment_csv);
        std::string token;
        while (std::getline(in, token, ',')) {
            const auto kind = augment_from_name(token);
            if (!kind)
                throw ConfigError("unknown augmentation '" + token +
                                  "' (expected fliph/flipv/rot90/rotcontent)");
            pre.augmentations.push_back(*kind);
        }
    }

    BackendBundle bundle = make_backend(backend_opts, common.seed);
    RunDir dir = open_run_dir(common);
    CountRuntime rt;
    rt.jobs = effective_jobs(common);
    if (bundle.backend->needs_pixels()) {
        const std::filesystem::path manifest_path = common.manifest_path;
        rt.load_raster = [manifest_path](const ImageRecord& img) {
            return load_image(resolve_image_path(manifest_path, img));
        };
        rt.scratch_dir = dir.root / "tiles";
    }

    TuneResult partial;
    TuneResult result;
    try {
        result = tune(ids, manifest, *bundle.backend, space, rounds, refine, pre, common.seed, rt,
                      model, &partial);
    } catch (const BackendError&) {
        // Keep whatever rounds completed so the failed run stays auditable.
        if (!partial.rounds.empty()) {
            save_tune_json(partial, dir.root / "tune.partial.json");
            save_tune_csv(partial, dir.root / "tune.partial.csv");
            std::cerr << "backend failed; partial audit saved after " << partial.rounds.size()
                      << " round(s)\n";
        }
        throw;
    }
    save_tune_json(result, dir.file("tune.json"));
    save_tune_csv(result, dir.file("tune.csv"));
    std::cout << result.table_row() << "\n";
    std::cout << "best confidence " << result.best.confidence << ", scale " << result.best.scale
              << " after " << result.rounds.size() << " round(s), "
              << result.total_evaluations() << " evaluations\n";
    finish_run(dir, "tune",
               json{{"manifest", common.manifest_path},
                    {"backend", bundle.descriptor},
                    {"conf_range", {space.conf_lo, space.conf_hi, space.conf_step}},
                    {"scale_range", {space.scale_lo, space.scale_hi, space.scale_step}},
                    {"rounds", rounds},
                    {"refine_factor", refine},
                    {"downscale", downscale},
                    {"augment", augment_csv},
                    {"split_file", split_file},
                    {"use_split", use_split},
                    {"model", model},
                    {"seed", common.seed}});
    return kExitOk;
}

// -------------------------------------------------------------------- eval

int cmd_eval(const CommonOpts& common, const std::vector<std::string>& series_specs, double alpha,
             const std::string& r2_kind) {
    if (series_specs.size() < 2) throw ConfigError("eval needs at least two --series model=path");
    std::vector<EvalSeries> series;
    std::set<std::string> seen;
    for (const auto& spec : series_specs) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size())
            throw ConfigError("--series expects model=path, got '" + spec + "'");
        const std::string model = spec.substr(0, eq);
        if (!seen.insert(model).second)
            throw ConfigError("duplicate series name '" + model + "'");
        series.push_back(load_series_csv(model, spec.substr(eq + 1)));
    }
    if (r2_kind != "identity" && r2_kind != "fitted")
        throw ConfigError("--r2 must be identity or fitted");

    std::vector<std::string> models;
    std::vector<MetricRow> metric_rows;
    std::vector<std::vector<double>> abs_groups, pct_groups;
    std::map<std::string, MetricSummary> summaries;
    for (const auto& s : series) {
        MetricSummary summary = metric_summary(s);
        if (r2_kind == "fitted") summary.r2 = r2_fitted(s);
        summaries[s.model] = summary;
        models.push_back(s.model);
        metric_rows.push_back({s.model, summary.mae, summary.mape, summary.rmse});
        abs_groups.push_back(s.abs_errors());
        pct_groups.push_back(s.pct_errors());
    }

    const auto ranked = normalized_rank(metric_rows);
    const AnovaResult anova_abs = anova_oneway(abs_groups);
    const AnovaResult anova_pct = anova_oneway(pct_groups);
    const TukeyOutcome tukey_abs = tukey_hsd(models, abs_groups, alpha);
    const TukeyOutcome tukey_pct = tukey_hsd(models, pct_groups, alpha);

    RunDir dir = open_run_dir(common);

    std::vector<ModelReportRow> rows;
    for (const auto& r : ranked) {
        ModelReportRow row;
        row.model = r.model;
        row.metrics = summaries.at(r.model);
        row.normalized_sum = r.normalized_sum;
        row.mae_letters = tukey_abs.letters.at(r.model);
        row.mape_letters = tukey_pct.letters.at(r.model);
        rows.push_back(std::move(row));
    }
    save_metrics_csv(rows, dir.file("metrics.csv"));

    auto stats_block = [&](const AnovaResult& anova, const TukeyOutcome& tukey) {
        json pairs = json::array();
        for (const auto& p : tukey.pairwise)
            pairs.push_back({{"a", models[static_cast<size_t>(p.i)]},
                             {"b", models[static_cast<size_t>(p.j)]},
                             {"mean_diff", p.mean_diff},
                             {"q", p.q_stat},
                             {"p_adjusted", p.p_adjusted},
                             {"reject", p.reject}});
        json letters = json::object();
        for (const auto& [model, l] : tukey.letters) letters[model] = l;
        return json{{"anova",
                     {{"f", anova.f_stat},
                      {"df_between", anova.df_between},
                      {"df_within", anova.df_within},
                      {"p", anova.p_value}}},
                    {"tukey", {{"pairs", pairs}, {"letters", letters}}}};
    };
    json stats_doc = {{"alpha", alpha},
                      {"models", models},
                      {"abs_error", stats_block(anova_abs, tukey_abs)},
                      {"pct_error", stats_block(anova_pct, tukey_pct)},
                      {"ranking", json::array()}};
    for (const auto& r : ranked)
        stats_doc["ranking"].push_back({{"model", r.model}, {"normalized_sum", r.normalized_sum}});
    {
        std::ofstream out(dir.file("stats.json"));
        out << stats_doc.dump(2) << "\n";
    }

    std::filesystem::create_directories(dir.root / "plots");
    for (const auto& s : series) {
        ScatterData data = scatter_data(s);
        if (r2_kind == "fitted") data.r2 = r2_fitted(s);
        const std::string name = "plots/" + s.model + ".svg";
        write_scatter_svg(data, s.model, dir.root / name);
        dir.artifacts.push_back(name);
    }

    std::cout << "evaluated " << series.size() << " model(s); ANOVA p(abs) = " << anova_abs.p_value
              << ", p(pct) = " << anova_pct.p_value << "\n";
    for (const auto& r : ranked) std::cout << "  " << r.model << "  " << r.normalized_sum << "\n";
    finish_run(dir, "eval",
               json{{"series", series_specs}, {"alpha", alpha}, {"r2", r2_kind}});
    return kExitOk;
}

// ------------------------------------------------------------------ report

int cmd_report(const CommonOpts& common, const std::string& metrics_path) {
    const auto rows = load_metrics_csv(metrics_path);
    if (rows.empty()) throw ConfigError("metrics file has no rows");
    const std::string table = render_report_table(rows);
    RunDir dir = open_run_dir(common);
    {
        std::ofstream out(dir.file("report.md"));
        out << table;
    }
    std::cout << table;
    finish_run(dir, "report", json{{"metrics", metrics_path}});
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tiled-inference counting pipeline"};
    app.require_subcommand(1);

    CommonOpts common;
    BackendOpts backend;

    // Config file defaults are applied before parsing so explicit flags win.
    for (int i = 1; i + 1 < argc; ++i)
        if (std::string(argv[i]) == "--config") common.config_path = argv[i + 1];
    json snapshot;
    try {
        apply_config_defaults(common.config_path, common, backend, snapshot);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }

    auto add_common = [&](CLI::App* cmd, bool needs_manifest = true) {
        cmd->add_option("--config", common.config_path, "JSON config file with defaults");
        if (needs_manifest)
            cmd->add_option("--manifest", common.manifest_path, "dataset manifest JSON")
                ->required(common.manifest_path.empty());
        cmd->add_option("--out-dir", common.out_dir, "run root (default $TILECOUNT_RUN_ROOT or ./runs)");
        cmd->add_option("--run-id", common.run_id, "explicit run id (default timestamp-seed)");
        cmd->add_option("--seed", common.seed, "global seed");
        cmd->add_option("--jobs", common.jobs, "worker pool size (0 = machine parallelism)");
    };
    auto add_backend = [&](CLI::App* cmd) {
        cmd->add_option("--oracle", backend.oracle_json,
                        "synthetic oracle backend: 'perfect' or JSON config");
        cmd->add_option("--store", backend.store_path, "precomputed detection store file");
        cmd->add_option("--adapter", backend.adapter_command,
                        "external detector command (line-delimited JSON protocol)");
        cmd->add_option("--adapter-timeout", backend.adapter_timeout_ms,
                        "adapter reply deadline in ms");
        cmd->add_flag("--no-tile-pixels", backend.no_tile_pixels,
                      "skip tile pixel dumps for adapters that ignore them");
    };

    // validate
    auto* validate = app.add_subcommand("validate", "check manifest (and store) integrity");
    std::string validate_store;
    add_common(validate);
    validate->add_option("--store", validate_store, "also validate a detection store");

    // split
    auto* split = app.add_subcommand("split", "deterministic train/val/test split");
    std::vector<double> ratios{0.6, 0.2, 0.2};
    add_common(split);
    split->add_option("--ratios", ratios, "train,val,test fractions")->delimiter(',');

    // tile
    auto* tile = app.add_subcommand("tile", "dump padded tile images and sidecar annotations");
    std::vector<std::string> tile_images;
    int tile_side = 0;
    double tile_scale = 0.0, keep_fraction = 0.6;
    add_common(tile);
    tile->add_option("--image", tile_images, "restrict to specific image ids");
    tile->add_option("--side", tile_side, "fixed tile side in pixels");
    tile->add_option("--scale", tile_scale, "tiling scale fraction of the shorter side");
    tile->add_option("--keep", keep_fraction, "annotation retention fraction (default 0.6)");

    // count
    auto* count = app.add_subcommand("count", "count objects per image through the tile pipeline");
    std::string count_split_file, count_use_split = "test", count_model = "model";
    double count_scale = 0.4, count_conf = 0.45, count_dedup = 0.0;
    add_common(count);
    add_backend(count);
    count->add_option("--split-file", count_split_file, "restrict to one split of a split file");
    count->add_option("--use-split", count_use_split, "train, val, or test (with --split-file)");
    count->add_option("--scale", count_scale, "tiling scale");
    count->add_option("--confidence", count_conf, "confidence threshold");
    count->add_option("--dedup-iou", count_dedup, "optional global NMS IoU threshold");
    count->add_option("--model", count_model, "model label for the outputs");

    // tune
    auto* tune_cmd = app.add_subcommand("tune", "coarse-to-fine (confidence, scale) search");
    std::string tune_split_file, tune_use_split = "train", tune_model = "model",
                tune_augment;
    std::vector<double> conf_range, scale_range;
    int tune_rounds = 2, tune_refine = 2;
    double tune_downscale = 1.0;
    add_common(tune_cmd);
    add_backend(tune_cmd);
    tune_cmd->add_option("--split-file", tune_split_file, "restrict to one split of a split file");
    tune_cmd->add_option("--use-split", tune_use_split, "train, val, or test (with --split-file)");
    tune_cmd->add_option("--conf-range", conf_range, "lo,hi,step (default 0.1,0.9,0.1)")
        ->delimiter(',');
    tune_cmd->add_option("--scale-range", scale_range, "lo,hi,step (default 0.2,1.0,0.1)")
        ->delimiter(',');
    tune_cmd->add_option("--rounds", tune_rounds, "total rounds including the coarse sweep");
    tune_cmd->add_option("--refine", tune_refine, "step divisor between rounds");
    tune_cmd->add_option("--downscale", tune_downscale, "resolution factor applied before search");
    tune_cmd->add_option("--augment", tune_augment,
                         "comma list of fliph,flipv,rot90,rotcontent");
    tune_cmd->add_option("--model", tune_model, "model label for the outputs");

    // eval
    auto* eval = app.add_subcommand("eval", "compare models: metrics, ANOVA, Tukey HSD, plots");
    std::vector<std::string> series_specs;
    double alpha = 0.05;
    std::string r2_kind = "identity";
    add_common(eval, /*needs_manifest=*/false);
    eval->add_option("--series", series_specs, "model=counts.csv (repeatable)")->required();
    eval->add_option("--alpha", alpha, "significance level (default 0.05)");
    eval->add_option("--r2", r2_kind, "identity (default) or fitted");

    // report
    auto* report = app.add_subcommand("report", "render the ranked metrics table");
    std::string metrics_path;
    add_common(report, /*needs_manifest=*/false);
    report->add_option("--metrics", metrics_path, "metrics.csv from eval")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand(validate)) return cmd_validate(common, validate_store);
        if (app.got_subcommand(split)) return cmd_split(common, ratios);
        if (app.got_subcommand(tile))
            return cmd_tile(common, tile_images, tile_side, tile_scale, keep_fraction);
        if (app.got_subcommand(count))
            return cmd_count(common, backend, count_split_file, count_use_split, count_scale,
                             count_conf, count_dedup, count_model);
        if (app.got_subcommand(tune_cmd))
            return cmd_tune(common, backend, tune_split_file, tune_use_split, conf_range,
                            scale_range, tune_rounds, tune_refine, tune_downscale, tune_augment,
                            tune_model);
        if (app.got_subcommand(eval)) return cmd_eval(common, series_specs, alpha, r2_kind);
        if (app.got_subcommand(report)) return cmd_report(common, metrics_path);
    } catch (const BackendError& e) {
        std::cerr << "backend error: " << e.what() << "\n";
        return kExitBackend;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const IntegrityError& e) {
        std::cerr << "integrity error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitConfig;
}
