#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "tilecount/errors.hpp"
#include "tilecount/rng.hpp"
#include "tilecount/stats.hpp"

using namespace tilecount;

namespace {

EvalSeries series_of(const std::vector<double>& truths, const std::vector<double>& preds,
                     const std::string& model = "m") {
    EvalSeries s;
    s.model = model;
    for (size_t i = 0; i < truths.size(); ++i)
        s.pairs.push_back({"img" + std::to_string(i), truths[i], preds[i]});
    return s;
}

// Published per-model metric means used as ranking fixtures.
const std::vector<MetricRow> kTableRows = {
    {"yolov8m", 5.44, 4.71, 8.63},   {"rtdetr-x", 5.41, 4.46, 9.17},
    {"yolov8n", 7.31, 6.00, 12.37},  {"yolov8x", 7.81, 6.66, 12.53},
    {"rtdetr-l", 8.31, 7.45, 12.39}, {"yolov8s", 8.44, 7.19, 14.61},
    {"yolov8l", 9.72, 7.67, 15.34},  {"deformable-detr", 14.47, 13.85, 22.19},
    {"detr-resnet-50", 18.47, 18.74, 31.39},
};

const std::vector<std::string> kTableOrder = {
    "yolov8m", "rtdetr-x", "yolov8n",        "yolov8x",        "rtdetr-l",
    "yolov8s", "yolov8l",  "deformable-detr", "detr-resnet-50",
};

} // namespace

TEST_CASE("metric_summary on a two-point hand computation") {
    const MetricSummary s = metric_summary(series_of({10, 10}, {10, 12}));
    CHECK(s.mae == doctest::Approx(1.0));
    CHECK(s.mape == doctest::Approx(10.0));
    CHECK(s.rmse == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("metric_summary on perfect predictions") {
    const MetricSummary s = metric_summary(series_of({5, 9, 31}, {5, 9, 31}));
    CHECK(s.mae == 0.0);
    CHECK(s.mape == 0.0);
    CHECK(s.rmse == 0.0);
    CHECK(s.mae_sd == 0.0);
    CHECK(s.r2 == 1.0);
}

TEST_CASE("metric_summary rejects zero truth and empty series") {
    CHECK_THROWS_AS(metric_summary(series_of({0, 5}, {1, 5})), ConfigError);
    CHECK_THROWS_AS(metric_summary(EvalSeries{"empty", {}}), ConfigError);
}

TEST_CASE("metrics match an independent recomputation on 200 random series") {
    Rng rng(1001);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 2 + static_cast<int>(rng.next_below(60));
        std::vector<double> truths, preds;
        for (int i = 0; i < n; ++i) {
            truths.push_back(1.0 + std::floor(rng.uniform(1, 400)));
            preds.push_back(std::floor(rng.uniform(0, 440)));
        }
        const EvalSeries s = series_of(truths, preds);
        const MetricSummary m = metric_summary(s);

        // Brute-force recomputation straight from the raw pairs.
        double sum_abs = 0, sum_pct = 0, sum_sq = 0, sum_truth = 0;
        for (int i = 0; i < n; ++i) {
            const double e = std::abs(preds[i] - truths[i]);
            sum_abs += e;
            sum_pct += 100.0 * e / truths[i];
            sum_sq += e * e;
            sum_truth += truths[i];
        }
        const double mae = sum_abs / n, mape = sum_pct / n, rmse = std::sqrt(sum_sq / n);
        const double truth_mean = sum_truth / n;
        double ss_tot = 0;
        for (int i = 0; i < n; ++i) ss_tot += (truths[i] - truth_mean) * (truths[i] - truth_mean);
        const double r2 = ss_tot > 0 ? 1.0 - sum_sq / ss_tot : 1.0;

        CHECK(m.mae == doctest::Approx(mae).epsilon(1e-9));
        CHECK(m.mape == doctest::Approx(mape).epsilon(1e-9));
        CHECK(m.rmse == doctest::Approx(rmse).epsilon(1e-9));
        if (ss_tot > 0) CHECK(m.r2 == doctest::Approx(r2).epsilon(1e-9));
        CHECK(m.rmse >= m.mae - 1e-12); // power-mean inequality
    }
}

TEST_CASE("normalized_rank reproduces the nine-model ordering") {
    const auto ranked = normalized_rank(kTableRows);
    REQUIRE(ranked.size() == kTableOrder.size());
    for (size_t i = 0; i < ranked.size(); ++i) CHECK(ranked[i].model == kTableOrder[i]);
    CHECK(ranked[0].normalized_sum == doctest::Approx(0.0198).epsilon(0.01));
    CHECK(ranked[1].normalized_sum == doctest::Approx(0.0237).epsilon(0.01));
    CHECK(ranked.back().normalized_sum == doctest::Approx(3.0));
}

TEST_CASE("normalized_rank tie-breaks identical rows by name") {
    const auto ranked = normalized_rank({{"zeta", 1, 1, 1}, {"alpha", 1, 1, 1}});
    CHECK(ranked[0].model == "alpha");
    CHECK(ranked[0].normalized_sum == ranked[1].normalized_sum);
    CHECK_THROWS_AS(normalized_rank({{"only", 1, 1, 1}}), ConfigError);
}

TEST_CASE("normalized_rank is invariant under positive affine column rescaling") {
    Rng rng(2002);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<MetricRow> rows;
        const int n = 3 + static_cast<int>(rng.next_below(8));
        for (int i = 0; i < n; ++i)
            rows.push_back({"m" + std::to_string(i), rng.uniform(1, 30), rng.uniform(1, 40),
                            rng.uniform(1, 50)});
        const double a = rng.uniform(0.1, 5.0), b = rng.uniform(-10, 10);
        auto scaled = rows;
        for (auto& r : scaled) r.mape_mean = a * r.mape_mean + b;
        const auto r1 = normalized_rank(rows);
        const auto r2 = normalized_rank(scaled);
        for (size_t i = 0; i < r1.size(); ++i) {
            CHECK(r1[i].model == r2[i].model);
            CHECK(r1[i].normalized_sum == doctest::Approx(r2[i].normalized_sum).epsilon(1e-9));
        }
    }
}

TEST_CASE("anova on the hand-computed fixture") {
    const AnovaResult r = anova_oneway({{1, 2, 3}, {2, 3, 4}, {3, 4, 5}});
    CHECK(r.f_stat == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(r.df_between == 2);
    CHECK(r.df_within == 6);
    // For df1 = 2 the survival function is (1 + 2F/df2)^(-df2/2) = 2^-3.
    CHECK(r.p_value == doctest::Approx(0.125).epsilon(1e-12));
}

TEST_CASE("anova on identical groups") {
    const AnovaResult r = anova_oneway({{2, 2, 2}, {2, 2, 2}});
    CHECK(r.f_stat == 0.0);
    CHECK(r.p_value == 1.0);
}

TEST_CASE("anova rejects degenerate input") {
    CHECK_THROWS_AS(anova_oneway({{1, 2, 3}}), ConfigError);
    CHECK_THROWS_AS(anova_oneway({{1, 2}, {1}}), ConfigError);
}

TEST_CASE("anova matches brute-force sums of squares on random 3-group data") {
    Rng rng(3003);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<std::vector<double>> groups(3);
        for (auto& g : groups)
            for (int i = 0; i < 30; ++i) g.push_back(rng.uniform(0, 50));

        const AnovaResult r = anova_oneway(groups);

        // Independent route: computational formulas over raw sums.
        double total_sum = 0, total_sq = 0;
        double between = 0;
        const double n_total = 90;
        for (const auto& g : groups) {
            double s = 0;
            for (double x : g) {
                s += x;
                total_sum += x;
                total_sq += x * x;
            }
            between += s * s / static_cast<double>(g.size());
        }
        const double correction = total_sum * total_sum / n_total;
        const double ss_between = between - correction;
        const double ss_total = total_sq - correction;
        const double ss_within = ss_total - ss_between;
        const double f = (ss_between / 2.0) / (ss_within / 87.0);
        CHECK(r.f_stat == doctest::Approx(f).epsilon(1e-9));
        // df1 = 2 admits the closed-form survival function.
        const double p_closed = std::pow(1.0 + 2.0 * f / 87.0, -87.0 / 2.0);
        CHECK(r.p_value == doctest::Approx(p_closed).epsilon(1e-9));
        CHECK(r.p_value >= 0.0);
        CHECK(r.p_value <= 1.0);
    }
}

TEST_CASE("incomplete beta sanity") {
    CHECK(incomplete_beta(1, 1, 0.5) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(incomplete_beta(2, 2, 0.5) == doctest::Approx(0.5).epsilon(1e-12));
    // Symmetry I_x(a, b) = 1 - I_{1-x}(b, a).
    for (double x : {0.1, 0.3, 0.7}) {
        CHECK(incomplete_beta(3.5, 2.0, x) ==
              doctest::Approx(1.0 - incomplete_beta(2.0, 3.5, 1.0 - x)).epsilon(1e-12));
    }
    CHECK_THROWS_AS(incomplete_beta(1, 1, 1.5), ConfigError);
}

TEST_CASE("studentized range cdf: normal-theory closed form at k = 2") {
    const double inf = std::numeric_limits<double>::infinity();
    for (double q : {0.5, 1.0, 2.0, 2.7718, 4.0}) {
        // Range of two standard normals: P(|X1 - X2| <= q) = 2*Phi(q/sqrt 2) - 1.
        const double expected = std::erf(q / 2.0); // = 2*Phi(q/sqrt2) - 1
        CHECK(studentized_range_cdf(q, 2, inf) == doctest::Approx(expected).epsilon(1e-9));
    }
    CHECK(studentized_range_cdf(2.7718, 2, inf) == doctest::Approx(0.95).epsilon(1e-4));
}

TEST_CASE("studentized range cdf: t-distribution reduction at k = 2, finite df") {
    // P(Q_{2,v} <= q) = P(|T_v| <= q/sqrt 2), with the t tail from the
    // incomplete beta: P(T > t) = I_{v/(v+t^2)}(v/2, 1/2) / 2.
    for (double df : {3.0, 10.0, 30.0}) {
        for (double q : {1.0, 2.0, 3.0, 4.5}) {
            const double t = q / std::sqrt(2.0);
            const double tail = 0.5 * incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
            const double expected = 1.0 - 2.0 * tail;
            CHECK(studentized_range_cdf(q, 2, df) == doctest::Approx(expected).epsilon(1e-8));
        }
    }
}

TEST_CASE("studentized range quantiles against fixed references") {
    const double inf = std::numeric_limits<double>::infinity();
    const double q2 = studentized_range_quantile(0.05, 2, inf);
    CHECK(std::abs(q2 - 2.7718) < 1e-3); // sqrt(2) * z_{0.975}

    const double q3 = studentized_range_quantile(0.05, 3, 10.0);
    CHECK(std::abs(q3 - 3.877) < 0.01); // classic table value

    // Round trip: cdf(quantile(alpha)) = 1 - alpha.
    for (double alpha : {0.01, 0.05, 0.25}) {
        const double q = studentized_range_quantile(alpha, 4, 20.0);
        CHECK(studentized_range_cdf(q, 4, 20.0) == doctest::Approx(1.0 - alpha).epsilon(1e-6));
    }
}

TEST_CASE("studentized range rejects out-of-range parameters") {
    const double inf = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(studentized_range_cdf(2.0, 1, inf), ConfigError);
    CHECK_THROWS_AS(studentized_range_cdf(2.0, 3, 0.5), ConfigError);
    CHECK_THROWS_AS(studentized_range_quantile(0.0, 3, 10.0), ConfigError);
    CHECK_THROWS_AS(studentized_range_quantile(1.0, 3, 10.0), ConfigError);
    CHECK(studentized_range_cdf(-1.0, 3, 10.0) == 0.0);
}

TEST_CASE("studentized range is monotone in q and increasing in k") {
    const double inf = std::numeric_limits<double>::infinity();
    for (double df : {5.0, 60.0, inf}) {
        double prev_cdf = -1.0;
        for (double q = 0.25; q < 8.0; q += 0.25) {
            const double c = studentized_range_cdf(q, 4, df);
            CHECK(c >= prev_cdf);
            CHECK(c >= 0.0);
            CHECK(c <= 1.0);
            prev_cdf = c;
        }
        double prev_q = 0.0;
        for (int k = 2; k <= 10; ++k) {
            const double q = studentized_range_quantile(0.05, k, df);
            CHECK(q > prev_q);
            prev_q = q;
        }
    }
}

TEST_CASE("tukey_hsd separates far groups and is silent on identical ones") {
    SUBCASE("far-separated tight groups reject with letters a/b") {
        const TukeyOutcome out =
            tukey_hsd({"low", "high"}, {{1.0, 1.1, 0.9, 1.0}, {9.0, 9.1, 8.9, 9.0}});
        REQUIRE(out.pairwise.size() == 1);
        CHECK(out.pairwise[0].reject);
        CHECK(out.letters.at("low") == "a");
        CHECK(out.letters.at("high") == "b");
    }
    SUBCASE("identical groups share the letter a") {
        const TukeyOutcome out = tukey_hsd({"x", "y"}, {{3, 4, 5}, {3, 4, 5}});
        CHECK_FALSE(out.pairwise[0].reject);
        CHECK(out.letters.at("x") == "a");
        CHECK(out.letters.at("y") == "a");
    }
}

TEST_CASE("tukey fixture where only the extreme pair separates: a, ab, b") {
    // Means exactly 0, 5, 10; within-group spread tuned so q(0,10) ~ 5.55
    // clears the critical value while q(0,5) ~ 2.77 does not.
    auto shifted = [](double m, double d) {
        return std::vector<double>{m - d, m - d / 2, m, m + d / 2, m + d};
    };
    const double d = 5.1;
    const std::vector<std::vector<double>> groups{shifted(0, d), shifted(5, d), shifted(10, d)};
    const TukeyOutcome out = tukey_hsd({"g1", "g2", "g3"}, groups);
    REQUIRE(out.pairwise.size() == 3);
    for (const auto& p : out.pairwise) {
        const bool extreme = (p.i == 0 && p.j == 2);
        CHECK(p.reject == extreme);
    }
    CHECK(out.letters.at("g1") == "a");
    CHECK(out.letters.at("g2") == "ab");
    CHECK(out.letters.at("g3") == "b");

    // Cross-check both adjusted p values against a Monte-Carlo studentized
    // range oracle at k = 3, df = 12.
    Rng rng(424242);
    const int samples = 1000000;
    int beyond_far = 0, beyond_near = 0;
    const double q_far = out.pairwise[1].q_stat;  // (0, 2) pair sorted order: see below
    const double q_near = out.pairwise[0].q_stat; // (0, 1)
    for (int s = 0; s < samples; ++s) {
        double mx = -1e300, mn = 1e300;
        for (int i = 0; i < 3; ++i) {
            const double z = rng.normal();
            mx = std::max(mx, z);
            mn = std::min(mn, z);
        }
        double chi = 0.0;
        for (int i = 0; i < 12; ++i) {
            const double z = rng.normal();
            chi += z * z;
        }
        const double stat = (mx - mn) / std::sqrt(chi / 12.0);
        if (stat > q_far) ++beyond_far;
        if (stat > q_near) ++beyond_near;
    }
    const double p_far_mc = static_cast<double>(beyond_far) / samples;
    const double p_near_mc = static_cast<double>(beyond_near) / samples;
    CHECK(std::abs(p_far_mc - out.pairwise[1].p_adjusted) < 0.01);
    CHECK(std::abs(p_near_mc - out.pairwise[0].p_adjusted) < 0.01);
}

TEST_CASE("tukey never rejects pairs with equal means") {
    Rng rng(5005);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> base;
        for (int i = 0; i < 8; ++i) base.push_back(rng.uniform(0, 10));
        // Two groups with identical values, one shifted far away.
        std::vector<double> shifted = base;
        for (double& x : shifted) x += 100.0;
        const TukeyOutcome out = tukey_hsd({"a", "b", "c"}, {base, base, shifted});
        for (const auto& p : out.pairwise) {
            if (p.i == 0 && p.j == 1) {
                CHECK_FALSE(p.reject);
                CHECK(p.p_adjusted == doctest::Approx(1.0));
            } else {
                CHECK(p.reject);
            }
        }
    }
}

TEST_CASE("tukey handles unequal group sizes via the Kramer adjustment") {
    const std::vector<std::vector<double>> groups{{1, 2, 3, 4, 5, 6}, {2, 3, 4}, {30, 31, 32, 33}};
    const TukeyOutcome out = tukey_hsd({"a", "b", "c"}, groups);
    const AnovaResult anova = anova_oneway(groups);
    for (const auto& p : out.pairwise) {
        const double n_i = static_cast<double>(groups[p.i].size());
        const double n_j = static_cast<double>(groups[p.j].size());
        const double se = std::sqrt(anova.ms_within / 2.0 * (1.0 / n_i + 1.0 / n_j));
        CHECK(p.q_stat == doctest::Approx(std::abs(p.mean_diff) / se).epsilon(1e-12));
    }
}

TEST_CASE("compact letter display reproduces the published nine-model letters") {
    std::set<std::pair<int, int>> rejected;
    const int detr50 = 8; // last model in table order
    for (int other : {0, 1, 2, 3}) rejected.insert({other, detr50});
    const auto letters = compact_letter_display(kTableOrder, rejected);
    CHECK(letters.at("yolov8m") == "a");
    CHECK(letters.at("rtdetr-x") == "a");
    CHECK(letters.at("yolov8n") == "a");
    CHECK(letters.at("yolov8x") == "a");
    CHECK(letters.at("rtdetr-l") == "ab");
    CHECK(letters.at("yolov8s") == "ab");
    CHECK(letters.at("yolov8l") == "ab");
    CHECK(letters.at("deformable-detr") == "ab");
    CHECK(letters.at("detr-resnet-50") == "b");
}

TEST_CASE("compact letter display trivial relations") {
    const std::vector<std::string> models{"a1", "a2", "a3"};
    const auto none = compact_letter_display(models, {});
    for (const auto& m : models) CHECK(none.at(m) == "a");

    const auto all = compact_letter_display(models, {{0, 1}, {0, 2}, {1, 2}});
    CHECK(all.at("a1") == "a");
    CHECK(all.at("a2") == "b");
    CHECK(all.at("a3") == "c");
}

TEST_CASE("compact letter display is correct for every relation on up to 5 models") {
    for (int k = 2; k <= 5; ++k) {
        std::vector<std::string> models;
        std::vector<std::pair<int, int>> all_pairs;
        for (int i = 0; i < k; ++i) {
            models.push_back("m" + std::to_string(i));
            for (int j = i + 1; j < k; ++j) all_pairs.emplace_back(i, j);
        }
        const size_t n_pairs = all_pairs.size();
        for (uint32_t mask = 0; mask < (1u << n_pairs); ++mask) {
            std::set<std::pair<int, int>> rejected;
            for (size_t p = 0; p < n_pairs; ++p)
                if ((mask >> p) & 1u) rejected.insert(all_pairs[p]);
            const auto letters = compact_letter_display(models, rejected);
            for (const auto& [i, j] : all_pairs) {
                bool share = false;
                for (char c : letters.at(models[static_cast<size_t>(i)]))
                    if (letters.at(models[static_cast<size_t>(j)]).find(c) != std::string::npos)
                        share = true;
                CHECK(share == (rejected.count({i, j}) == 0));
            }
        }
    }
}

TEST_CASE("scatter_data emits pairs and the identity-line r2") {
    SUBCASE("perfect predictions sit on the identity line") {
        const ScatterData d = scatter_data(series_of({5, 10, 20}, {5, 10, 20}));
        CHECK(d.r2 == 1.0);
        CHECK(d.points.size() == 3);
    }
    SUBCASE("constant prediction at the truth mean scores zero") {
        const ScatterData d = scatter_data(series_of({10, 20, 30}, {20, 20, 20}));
        CHECK(d.r2 == doctest::Approx(0.0));
    }
    SUBCASE("random series match independent recomputation") {
        Rng rng(6006);
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<double> truths, preds;
            for (int i = 0; i < 40; ++i) {
                truths.push_back(rng.uniform(1, 200));
                preds.push_back(rng.uniform(1, 200));
            }
            const ScatterData d = scatter_data(series_of(truths, preds));
            double mean = 0;
            for (double t : truths) mean += t;
            mean /= 40;
            double ss_res = 0, ss_tot = 0;
            for (int i = 0; i < 40; ++i) {
                ss_res += (preds[i] - truths[i]) * (preds[i] - truths[i]);
                ss_tot += (truths[i] - mean) * (truths[i] - mean);
            }
            CHECK(d.r2 == doctest::Approx(1.0 - ss_res / ss_tot).epsilon(1e-9));
        }
    }
}

TEST_CASE("fitted r2 equals the squared correlation") {
    const EvalSeries s = series_of({1, 2, 3, 4}, {2.2, 3.9, 6.1, 8.0});
    // Nearly-linear relation: fitted r2 close to 1, identity r2 lower.
    CHECK(r2_fitted(s) > 0.99);
    CHECK(r2_identity(s) < r2_fitted(s));
    // Exact linearity gives exactly 1 regardless of slope/intercept.
    CHECK(r2_fitted(series_of({1, 2, 3}, {10, 20, 30})) == doctest::Approx(1.0));
}
