#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tilecount/counting.hpp"
#include "tilecount/dataset.hpp"
#include "tilecount/detect.hpp"
#include "tilecount/transforms.hpp"

namespace tilecount {

/// Inclusive (lo, hi, step) grid per axis. Values are snapped to the step
/// lattice so repeated refinement stays on round numbers.
struct TuneSpace {
    double conf_lo = 0.10, conf_hi = 0.90, conf_step = 0.10;
    double scale_lo = 0.20, scale_hi = 1.00, scale_step = 0.10;

    void validate() const;
    std::vector<double> conf_values() const;
    std::vector<double> scale_values() const;
};

enum class AugmentKind { FlipH, FlipV, Rot90CW, RotContentRandom };

const char* augment_name(AugmentKind k);
std::optional<AugmentKind> augment_from_name(const std::string& name);

/// Training images are downscaled first, then expanded with one seeded
/// sample of each listed augmentation; errors pool over all variants.
struct Preprocess {
    double downscale = 1.0;
    std::vector<AugmentKind> augmentations;
};

struct ComboEval {
    double confidence = 0.0;
    double scale = 0.0;
    double mae = 0.0;
    double mape = 0.0;
    double rmse = 0.0;
    double normalized_sum = 0.0;
};

struct TuneRound {
    std::vector<double> conf_values;
    std::vector<double> scale_values;
    std::vector<ComboEval> evals; // confidence-major order
    size_t chosen = 0;
};

struct TuneResult {
    std::string model;
    CountConfig best;
    std::vector<TuneRound> rounds;

    size_t total_evaluations() const;

    /// "model 45% 40%" rendering of the winning combination.
    std::string table_row() const;
};

/// Coarse-to-fine search over (confidence, scale). Round 1 sweeps the full
/// grid; each later round re-grids [best - step, best + step] per axis at
/// step/refine_factor, clamped to the valid domain. Every combination is
/// scored by the min-max-normalized sum of MAE/MAPE/RMSE over all image
/// variants; ties break toward lower confidence, then lower scale.
/// On a backend failure the rounds finished so far are left in
/// *partial_out (when given) before the error propagates.
TuneResult tune(const std::vector<std::string>& train_image_ids, const DatasetManifest& manifest,
                DetectorBackend& backend, const TuneSpace& space, int rounds, int refine_factor,
                const Preprocess& preprocess, uint64_t seed, const CountRuntime& rt = {},
                const std::string& model_name = "", TuneResult* partial_out = nullptr);

void save_tune_json(const TuneResult& result, const std::filesystem::path& path);
void save_tune_csv(const TuneResult& result, const std::filesystem::path& path);

} // namespace tilecount
