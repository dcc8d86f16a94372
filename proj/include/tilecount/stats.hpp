#pragma once

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace tilecount {

/// Per-image counting outcomes for one model.
struct EvalSeries {
    struct Pair {
        std::string image_id;
        double truth = 0.0;
        double predicted = 0.0;
    };
    std::string model;
    std::vector<Pair> pairs;

    std::vector<double> abs_errors() const;
    std::vector<double> pct_errors() const;
};

/// MAE/MAPE with the dispersion of their per-image errors, RMSE, and the
/// identity-line coefficient of determination. The RMSE row reuses the
/// absolute-error spread as its +- column.
struct MetricSummary {
    double mae = 0.0;
    double mae_sd = 0.0;
    double mape = 0.0;
    double mape_sd = 0.0;
    double rmse = 0.0;
    double rmse_sd = 0.0;
    double r2 = 0.0;
};

/// r2 = 1 - sum((pred - truth)^2) / sum((truth - mean(truth))^2); measures
/// agreement with the identity line and can go negative.
double r2_identity(const EvalSeries& series);

/// Squared Pearson correlation: the fit-line variant, exposed as an option.
double r2_fitted(const EvalSeries& series);

MetricSummary metric_summary(const EvalSeries& series);

struct RankedModel {
    std::string model;
    double normalized_sum = 0.0;
};

struct MetricRow {
    std::string model;
    double mae_mean = 0.0;
    double mape_mean = 0.0;
    double rmse_mean = 0.0;
};

/// Min-max normalize each metric column to [0, 1] across rows, sum the
/// three values per row, and sort ascending (ties by model name). A column
/// with max == min contributes 0 for every row.
std::vector<RankedModel> normalized_rank(const std::vector<MetricRow>& rows);

struct AnovaResult {
    double f_stat = 0.0;
    int df_between = 0;
    int df_within = 0;
    double p_value = 1.0;
    double ms_within = 0.0;
};

/// One-way fixed-effects decomposition; p from the F survival function via
/// the regularized incomplete beta. Needs >= 2 groups of >= 2 values.
AnovaResult anova_oneway(const std::vector<std::vector<double>>& groups);

/// Regularized incomplete beta I_x(a, b) (continued-fraction evaluation).
double incomplete_beta(double a, double b, double x);

/// P(Q_{k,df} <= q) for the studentized range; df may be infinite.
/// Outer integral over the scaled chi variable, inner normal-range
/// probability truncated at +-12 sigma, adaptive Gauss-Legendre to 1e-10.
double studentized_range_cdf(double q, int k, double df);

/// Upper-tail quantile: q with P(Q_{k,df} > q) = alpha, bisected to 1e-8.
double studentized_range_quantile(double alpha, int k, double df);

struct TukeyPair {
    int i = 0;
    int j = 0;
    double mean_diff = 0.0;
    double q_stat = 0.0;
    double p_adjusted = 1.0;
    bool reject = false;
};

struct TukeyOutcome {
    double alpha = 0.05;
    std::vector<std::string> models;
    std::vector<TukeyPair> pairwise; // all i < j pairs
    std::map<std::string, std::string> letters;
};

/// All-pairs Tukey HSD with the Tukey-Kramer adjustment for unequal group
/// sizes; letters come from compact_letter_display.
TukeyOutcome tukey_hsd(const std::vector<std::string>& models,
                       const std::vector<std::vector<double>>& groups, double alpha = 0.05);

/// Insert-and-absorb compact letter display: models sharing no letter are
/// exactly the rejected pairs; letter sets are minimal under absorption;
/// letters are assigned in first-use order over models in input order.
std::map<std::string, std::string> compact_letter_display(
    const std::vector<std::string>& models, const std::set<std::pair<int, int>>& rejected_pairs);

struct ScatterData {
    std::vector<std::pair<double, double>> points; // (truth, predicted)
    double r2 = 0.0;
};

ScatterData scatter_data(const EvalSeries& series);

} // namespace tilecount
