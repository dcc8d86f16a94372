#include "tilecount/tune.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "tilecount/errors.hpp"
#include "tilecount/parallel.hpp"
#include "tilecount/rng.hpp"

namespace tilecount {

using nlohmann::json;

namespace {

double snap(double v) { return std::round(v * 1e9) / 1e9; }

std::vector<double> lattice(double lo, double hi, double step) {
    std::vector<double> out;
    const int n = static_cast<int>(std::floor((hi - lo) / step + 1e-9));
    for (int i = 0; i <= n; ++i) out.push_back(snap(lo + i * step));
    return out;
}

} // namespace

void TuneSpace::validate() const {
    if (conf_lo > conf_hi || scale_lo > scale_hi) throw ConfigError("tune range lo must be <= hi");
    if (!(conf_step > 0.0) || !(scale_step > 0.0)) throw ConfigError("tune steps must be positive");
    if (conf_lo < 0.0 || conf_hi > 1.0) throw ConfigError("confidence range must lie in [0, 1]");
    if (!(scale_lo > 0.0) || scale_hi > 1.0) throw ConfigError("scale range must lie in (0, 1]");
}

std::vector<double> TuneSpace::conf_values() const { return lattice(conf_lo, conf_hi, conf_step); }
std::vector<double> TuneSpace::scale_values() const {
    return lattice(scale_lo, scale_hi, scale_step);
}

const char* augment_name(AugmentKind k) {
    switch (k) {
        case AugmentKind::FlipH: return "fliph";
        case AugmentKind::FlipV: return "flipv";
        case AugmentKind::Rot90CW: return "rot90";
        case AugmentKind::RotContentRandom: return "rotcontent";
    }
    return "?";
}

std::optional<AugmentKind> augment_from_name(const std::string& name) {
    if (name == "fliph") return AugmentKind::FlipH;
    if (name == "flipv") return AugmentKind::FlipV;
    if (name == "rot90") return AugmentKind::Rot90CW;
    if (name == "rotcontent") return AugmentKind::RotContentRandom;
    return std::nullopt;
}

size_t TuneResult::total_evaluations() const {
    size_t n = 0;
    for (const auto& r : rounds) n += r.evals.size();
    return n;
}

std::string TuneResult::table_row() const {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%s %g%% %g%%", model.c_str(),
                  std::round(best.confidence * 1000.0) / 10.0,
                  std::round(best.scale * 1000.0) / 10.0);
    return buf;
}

namespace {

struct VariantImage {
    ImageRecord record;
    std::vector<Annotation> annotations;
    const ImageRecord* base = nullptr;
    std::vector<Transform> chain; // applied to base pixels in order
};

// One variant from a transform chain; boxes that the chain drops (clipped
// rotation hulls) disappear from the variant's ground truth.
VariantImage make_variant(const ImageRecord& base, const std::vector<const Annotation*>& anns,
                          const std::vector<Transform>& chain, const std::string& tag) {
    VariantImage v;
    v.base = &base;
    v.chain = chain;
    v.record = base;
    v.record.id = tag.empty() ? base.id : base.id + "#" + tag;
    int w = base.width, h = base.height;
    std::vector<std::pair<const Annotation*, BBox>> boxes;
    for (const auto* a : anns) boxes.emplace_back(a, a->bbox);
    for (const auto& t : chain) {
        std::vector<std::pair<const Annotation*, BBox>> next;
        for (const auto& [src, box] : boxes) {
            const auto mapped = apply_to_boxes(t, {box}, w, h);
            if (!mapped.empty()) next.emplace_back(src, mapped[0]);
        }
        boxes = std::move(next);
        const auto [nw, nh] = transformed_size(t, w, h);
        w = nw;
        h = nh;
    }
    v.record.width = w;
    v.record.height = h;
    for (const auto& [src, box] : boxes)
        v.annotations.push_back({src->id, v.record.id, box, src->category});
    return v;
}

} // namespace

TuneResult tune(const std::vector<std::string>& train_image_ids, const DatasetManifest& manifest,
                DetectorBackend& backend, const TuneSpace& space, int rounds, int refine_factor,
                const Preprocess& preprocess, uint64_t seed, const CountRuntime& rt,
                const std::string& model_name, TuneResult* partial_out) {
    space.validate();
    if (rounds < 1) throw ConfigError("tune needs at least 1 round");
    if (refine_factor < 2) throw ConfigError("refine_factor must be >= 2");
    if (train_image_ids.empty()) throw ConfigError("tune needs a nonempty training set");
    if (!(preprocess.downscale > 0.0) || preprocess.downscale > 1.0)
        throw ConfigError("preprocess downscale must be in (0, 1]");

    // Expand the training set into (downscaled, augmented) variants once.
    std::vector<VariantImage> variants;
    for (const auto& id : train_image_ids) {
        const ImageRecord* base = manifest.find_image(id);
        if (!base) throw IntegrityError("training image '" + id + "' not in manifest");
        const auto anns = manifest.annotations_for(id);

        std::vector<Transform> stem;
        std::string stem_tag;
        if (preprocess.downscale < 1.0) {
            stem.push_back(Transform::downscale(preprocess.downscale));
            stem_tag = "ds";
        }
        variants.push_back(make_variant(*base, anns, stem, stem_tag));
        for (size_t slot = 0; slot < preprocess.augmentations.size(); ++slot) {
            const AugmentKind kind = preprocess.augmentations[slot];
            Transform t = Transform::flip_h();
            switch (kind) {
                case AugmentKind::FlipH: t = Transform::flip_h(); break;
                case AugmentKind::FlipV: t = Transform::flip_v(); break;
                case AugmentKind::Rot90CW: t = Transform::rot90_cw(); break;
                case AugmentKind::RotContentRandom: {
                    Rng rng(derive_seed(seed, hash_str(id), slot));
                    t = Transform::rot_content(rng.uniform(0.0, 360.0));
                    break;
                }
            }
            auto chain = stem;
            chain.push_back(t);
            std::string tag = stem_tag.empty() ? augment_name(kind) : stem_tag + "+" + augment_name(kind);
            variants.push_back(make_variant(*base, anns, chain, tag));
        }
    }

    // Pixel-needing backends get a loader that replays each variant's chain.
    CountRuntime variant_rt = rt;
    if (backend.needs_pixels()) {
        if (!rt.load_raster)
            throw ConfigError("backend needs pixels: tune requires a raster loader");
        std::map<std::string, const VariantImage*> by_id;
        for (const auto& v : variants) by_id.emplace(v.record.id, &v);
        auto base_loader = rt.load_raster;
        variant_rt.load_raster = [by_id, base_loader](const ImageRecord& rec) {
            auto it = by_id.find(rec.id);
            if (it == by_id.end()) throw IntegrityError("unknown variant '" + rec.id + "'");
            Raster img = base_loader(*it->second->base);
            for (const auto& t : it->second->chain) img = apply_to_image(t, img);
            return img;
        };
    }

    TuneResult result;
    result.model = model_name.empty() ? backend.name() : model_name;
    if (partial_out) {
        partial_out->model = result.model;
        partial_out->rounds.clear();
    }

    auto evaluate_combo = [&](double conf, double scale) {
        ComboEval eval;
        eval.confidence = conf;
        eval.scale = scale;
        std::vector<double> abs_errs, pct_errs;
        for (const auto& v : variants) {
            if (v.annotations.empty()) continue; // no usable error signal
            CountConfig cfg;
            cfg.scale = scale;
            cfg.confidence = conf;
            CountRuntime inner = variant_rt;
            inner.jobs = 1; // parallelism lives at the combination level
            const CountResult r = count_image(v.record, &v.annotations, backend, cfg, inner);
            abs_errs.push_back(r.abs_err());
            pct_errs.push_back(r.pct_err());
        }
        if (abs_errs.empty()) throw ConfigError("tune: no variant had any ground truth");
        double sum = 0.0, sum_sq = 0.0, sum_pct = 0.0;
        for (double e : abs_errs) {
            sum += e;
            sum_sq += e * e;
        }
        for (double e : pct_errs) sum_pct += e;
        eval.mae = sum / static_cast<double>(abs_errs.size());
        eval.rmse = std::sqrt(sum_sq / static_cast<double>(abs_errs.size()));
        eval.mape = sum_pct / static_cast<double>(pct_errs.size());
        return eval;
    };

    std::vector<double> conf_values = space.conf_values();
    std::vector<double> scale_values = space.scale_values();
    double conf_step = space.conf_step;
    double scale_step = space.scale_step;

    for (int round = 0; round < rounds; ++round) {
        TuneRound tr;
        tr.conf_values = conf_values;
        tr.scale_values = scale_values;
        tr.evals.resize(conf_values.size() * scale_values.size());

        const int jobs = backend.concurrent_safe() ? rt.jobs : 1;
        parallel_for(tr.evals.size(), jobs, [&](size_t i) {
            const double conf = conf_values[i / scale_values.size()];
            const double scale = scale_values[i % scale_values.size()];
            tr.evals[i] = evaluate_combo(conf, scale);
        });

        // Min-max normalize each metric across this round's combinations.
        auto normalize = [&tr](auto getter) {
            double lo = 1e300, hi = -1e300;
            for (const auto& e : tr.evals) {
                lo = std::min(lo, getter(e));
                hi = std::max(hi, getter(e));
            }
            std::vector<double> out;
            out.reserve(tr.evals.size());
            for (const auto& e : tr.evals)
                out.push_back(hi > lo ? (getter(e) - lo) / (hi - lo) : 0.0);
            return out;
        };
        const auto n_mae = normalize([](const ComboEval& e) { return e.mae; });
        const auto n_mape = normalize([](const ComboEval& e) { return e.mape; });
        const auto n_rmse = normalize([](const ComboEval& e) { return e.rmse; });
        for (size_t i = 0; i < tr.evals.size(); ++i)
            tr.evals[i].normalized_sum = n_mae[i] + n_mape[i] + n_rmse[i];

        // Confidence-major iteration makes "first strict minimum" the
        // (lower confidence, lower scale) tie-break.
        size_t best = 0;
        for (size_t i = 1; i < tr.evals.size(); ++i)
            if (tr.evals[i].normalized_sum < tr.evals[best].normalized_sum) best = i;
        tr.chosen = best;
        result.rounds.push_back(tr);

        const ComboEval& chosen = tr.evals[best];
        result.best.confidence = chosen.confidence;
        result.best.scale = chosen.scale;
        if (partial_out) *partial_out = result;

        if (conf_values.size() * scale_values.size() <= 1) break; // degenerate space

        // Re-grid around the winner at finer resolution.
        auto refine = [&](double center, double step, double lo_bound, double hi_bound,
                          bool open_lo) {
            const double fine = step / refine_factor;
            std::vector<double> vals;
            for (int i = -refine_factor; i <= refine_factor; ++i) {
                const double v = snap(center + i * fine);
                if (v > hi_bound + 1e-12) continue;
                if (open_lo ? v <= lo_bound + 1e-12 : v < lo_bound - 1e-12) continue;
                vals.push_back(v);
            }
            return std::pair{vals, fine};
        };
        auto [next_conf, fine_conf] = refine(chosen.confidence, conf_step, 0.0, 1.0, false);
        auto [next_scale, fine_scale] = refine(chosen.scale, scale_step, 0.0, 1.0, true);
        conf_values = next_conf;
        scale_values = next_scale;
        conf_step = fine_conf;
        scale_step = fine_scale;
    }
    return result;
}

void save_tune_json(const TuneResult& result, const std::filesystem::path& path) {
    json doc;
    doc["model"] = result.model;
    doc["best"] = {{"confidence", result.best.confidence}, {"scale", result.best.scale}};
    doc["rounds"] = json::array();
    for (const auto& r : result.rounds) {
        json round = {{"conf_values", r.conf_values},
                      {"scale_values", r.scale_values},
                      {"evaluations", json::array()}};
        for (const auto& e : r.evals)
            round["evaluations"].push_back({{"confidence", e.confidence},
                                            {"scale", e.scale},
                                            {"mae", e.mae},
                                            {"mape", e.mape},
                                            {"rmse", e.rmse},
                                            {"normalized_sum", e.normalized_sum}});
        round["chosen"] = {{"confidence", r.evals[r.chosen].confidence},
                           {"scale", r.evals[r.chosen].scale}};
        doc["rounds"].push_back(std::move(round));
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << doc.dump(2) << "\n";
}

void save_tune_csv(const TuneResult& result, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << "conf,scale,mae,mape,rmse,normalized_sum\n";
    char buf[256];
    for (const auto& r : result.rounds) {
        for (const auto& e : r.evals) {
            std::snprintf(buf, sizeof buf, "%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", e.confidence,
                          e.scale, e.mae, e.mape, e.rmse, e.normalized_sum);
            out << buf;
        }
    }
}

} // namespace tilecount
