#include "tilecount/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tilecount/errors.hpp"

namespace tilecount {

namespace {

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

// Sample standard deviation (n - 1); zero for a single observation.
double sd_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double phi_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double phi_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); }

// Composite Gauss-Legendre (20-point panels), doubling panel count until
// two successive estimates agree to `tol`.
template <typename F>
double integrate_adaptive(F&& f, double a, double b, double tol) {
    static const double nodes[10] = {
        0.0765265211334973, 0.2277858511416451, 0.3737060887154196, 0.5108670019508271,
        0.6360536807265150, 0.7463319064601508, 0.8391169718222188, 0.9122344282513259,
        0.9639719272779138, 0.9931285991850949};
    static const double weights[10] = {
        0.1527533871307258, 0.1491729864726037, 0.1420961093183821, 0.1316886384491766,
        0.1181945319615184, 0.1019301198172404, 0.0832767415767048, 0.0626720483341091,
        0.0406014298003869, 0.0176140071391521};
    auto panel = [&](double lo, double hi) {
        const double c = 0.5 * (lo + hi), h = 0.5 * (hi - lo);
        double s = 0.0;
        for (int i = 0; i < 10; ++i)
            s += weights[i] * (f(c - h * nodes[i]) + f(c + h * nodes[i]));
        return s * h;
    };
    double prev = panel(a, b);
    for (int n = 2; n <= 256; n *= 2) {
        double cur = 0.0;
        const double step = (b - a) / n;
        for (int i = 0; i < n; ++i) cur += panel(a + i * step, a + (i + 1) * step);
        if (std::abs(cur - prev) < tol) return cur;
        prev = cur;
    }
    return prev;
}

} // namespace

std::vector<double> EvalSeries::abs_errors() const {
    std::vector<double> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) out.push_back(std::abs(p.predicted - p.truth));
    return out;
}

std::vector<double> EvalSeries::pct_errors() const {
    std::vector<double> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) {
        if (p.truth <= 0.0)
            throw ConfigError("percentage error undefined: truth is 0 for image '" + p.image_id +
                              "' in series '" + model + "'");
        out.push_back(100.0 * std::abs(p.predicted - p.truth) / p.truth);
    }
    return out;
}

double r2_identity(const EvalSeries& series) {
    if (series.pairs.empty()) throw ConfigError("empty series '" + series.model + "'");
    double truth_mean = 0.0;
    for (const auto& p : series.pairs) truth_mean += p.truth;
    truth_mean /= static_cast<double>(series.pairs.size());
    double ss_res = 0.0, ss_tot = 0.0;
    for (const auto& p : series.pairs) {
        ss_res += (p.predicted - p.truth) * (p.predicted - p.truth);
        ss_tot += (p.truth - truth_mean) * (p.truth - truth_mean);
    }
    if (ss_tot == 0.0)
        return ss_res == 0.0 ? 1.0 : -std::numeric_limits<double>::infinity();
    return 1.0 - ss_res / ss_tot;
}

double r2_fitted(const EvalSeries& series) {
    if (series.pairs.size() < 2) throw ConfigError("need >= 2 pairs for a fitted r2");
    double mx = 0.0, my = 0.0;
    for (const auto& p : series.pairs) {
        mx += p.truth;
        my += p.predicted;
    }
    const double n = static_cast<double>(series.pairs.size());
    mx /= n;
    my /= n;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (const auto& p : series.pairs) {
        sxx += (p.truth - mx) * (p.truth - mx);
        syy += (p.predicted - my) * (p.predicted - my);
        sxy += (p.truth - mx) * (p.predicted - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return (sxy * sxy) / (sxx * syy);
}

MetricSummary metric_summary(const EvalSeries& series) {
    if (series.pairs.empty()) throw ConfigError("empty series '" + series.model + "'");
    const auto abs_err = series.abs_errors();
    const auto pct_err = series.pct_errors();
    MetricSummary s;
    s.mae = mean_of(abs_err);
    s.mae_sd = sd_of(abs_err);
    s.mape = mean_of(pct_err);
    s.mape_sd = sd_of(pct_err);
    double ss = 0.0;
    for (double e : abs_err) ss += e * e;
    s.rmse = std::sqrt(ss / static_cast<double>(abs_err.size()));
    s.rmse_sd = s.mae_sd;
    s.r2 = r2_identity(series);
    return s;
}

std::vector<RankedModel> normalized_rank(const std::vector<MetricRow>& rows) {
    if (rows.size() < 2) throw ConfigError("normalized ranking needs at least 2 rows");
    auto norm_column = [&rows](auto getter) {
        double lo = 1e300, hi = -1e300;
        for (const auto& r : rows) {
            lo = std::min(lo, getter(r));
            hi = std::max(hi, getter(r));
        }
        std::vector<double> out;
        out.reserve(rows.size());
        for (const auto& r : rows)
            out.push_back(hi > lo ? (getter(r) - lo) / (hi - lo) : 0.0);
        return out;
    };
    const auto n_mae = norm_column([](const MetricRow& r) { return r.mae_mean; });
    const auto n_mape = norm_column([](const MetricRow& r) { return r.mape_mean; });
    const auto n_rmse = norm_column([](const MetricRow& r) { return r.rmse_mean; });
    std::vector<RankedModel> out;
    out.reserve(rows.size());
    for (size_t i = 0; i < rows.size(); ++i)
        out.push_back({rows[i].model, n_mae[i] + n_mape[i] + n_rmse[i]});
    std::sort(out.begin(), out.end(), [](const RankedModel& a, const RankedModel& b) {
        if (a.normalized_sum != b.normalized_sum) return a.normalized_sum < b.normalized_sum;
        return a.model < b.model;
    });
    return out;
}

double incomplete_beta(double a, double b, double x) {
    if (x < 0.0 || x > 1.0) throw ConfigError("incomplete_beta needs x in [0, 1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    // Lentz's continued fraction for I_x(a, b).
    auto betacf = [](double a, double b, double x) {
        constexpr int max_iter = 300;
        constexpr double eps = 3e-16, fpmin = 1e-300;
        const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
        double c = 1.0, d = 1.0 - qab * x / qap;
        if (std::abs(d) < fpmin) d = fpmin;
        d = 1.0 / d;
        double h = d;
        for (int m = 1; m <= max_iter; ++m) {
            const int m2 = 2 * m;
            double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
            d = 1.0 + aa * d;
            if (std::abs(d) < fpmin) d = fpmin;
            c = 1.0 + aa / c;
            if (std::abs(c) < fpmin) c = fpmin;
            d = 1.0 / d;
            h *= d * c;
            aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
            d = 1.0 + aa * d;
            if (std::abs(d) < fpmin) d = fpmin;
            c = 1.0 + aa / c;
            if (std::abs(c) < fpmin) c = fpmin;
            d = 1.0 / d;
            const double del = d * c;
            h *= del;
            if (std::abs(del - 1.0) < eps) break;
        }
        return h;
    };
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
    return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

AnovaResult anova_oneway(const std::vector<std::vector<double>>& groups) {
    if (groups.size() < 2) throw ConfigError("ANOVA needs at least 2 groups");
    for (const auto& g : groups)
        if (g.size() < 2) throw ConfigError("every ANOVA group needs at least 2 values");

    size_t n_total = 0;
    double grand_sum = 0.0;
    for (const auto& g : groups) {
        n_total += g.size();
        for (double x : g) grand_sum += x;
    }
    const double grand_mean = grand_sum / static_cast<double>(n_total);
    double ss_between = 0.0, ss_within = 0.0;
    for (const auto& g : groups) {
        const double m = mean_of(g);
        ss_between += static_cast<double>(g.size()) * (m - grand_mean) * (m - grand_mean);
        for (double x : g) ss_within += (x - m) * (x - m);
    }
    AnovaResult r;
    r.df_between = static_cast<int>(groups.size()) - 1;
    r.df_within = static_cast<int>(n_total - groups.size());
    r.ms_within = ss_within / r.df_within;
    if (ss_within == 0.0) {
        // Degenerate dispersion: identical-everywhere data yields p = 1,
        // separated constant groups yield p = 0.
        const double scale = std::max(1.0, grand_mean * grand_mean) * n_total;
        if (ss_between <= 1e-20 * scale) {
            r.f_stat = 0.0;
            r.p_value = 1.0;
        } else {
            r.f_stat = std::numeric_limits<double>::infinity();
            r.p_value = 0.0;
        }
        return r;
    }
    r.f_stat = (ss_between / r.df_between) / r.ms_within;
    // Survival function of F(d1, d2).
    const double d1 = r.df_between, d2 = r.df_within;
    r.p_value = incomplete_beta(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * r.f_stat));
    return r;
}

namespace {

// P(range of k iid standard normals <= w), truncated at +-12 sigma.
double normal_range_cdf(double w, int k) {
    if (w <= 0.0) return 0.0;
    auto integrand = [w, k](double z) {
        const double span = phi_cdf(z) - phi_cdf(z - w);
        return phi_pdf(z) * std::pow(span, k - 1);
    };
    return std::min(1.0, k * integrate_adaptive(integrand, -12.0, 12.0, 1e-12));
}

} // namespace

double studentized_range_cdf(double q, int k, double df) {
    if (k < 2) throw ConfigError("studentized range needs k >= 2");
    if (!(df >= 1.0)) throw ConfigError("studentized range needs df >= 1 (or infinite)");
    if (q <= 0.0) return 0.0;
    if (std::isinf(df)) return normal_range_cdf(q, k);

    // Outer integral over s = chi_df / sqrt(df); its density concentrates
    // around 1 with spread ~ 1/sqrt(2 df).
    const double ln_norm =
        std::log(2.0) + 0.5 * df * std::log(df / 2.0) - std::lgamma(df / 2.0);
    auto outer = [&](double s) {
        if (s <= 0.0) return 0.0;
        const double ln_density = ln_norm + (df - 1.0) * std::log(s) - 0.5 * df * s * s;
        return std::exp(ln_density) * normal_range_cdf(q * s, k);
    };
    const double spread = 1.0 / std::sqrt(2.0 * df);
    const double hi = 1.0 + 13.0 * spread;
    const double lo = std::max(0.0, 1.0 - 13.0 * spread);
    return std::min(1.0, integrate_adaptive(outer, lo, hi, 1e-10));
}

double studentized_range_quantile(double alpha, int k, double df) {
    if (!(alpha > 0.0) || !(alpha < 1.0)) throw ConfigError("alpha must be in (0, 1)");
    const double target = 1.0 - alpha;
    double hi = 4.0;
    while (studentized_range_cdf(hi, k, df) < target) {
        hi *= 2.0;
        if (hi > 1e6) throw ConfigError("studentized range quantile did not bracket");
    }
    double lo = 0.0;
    while (hi - lo > 1e-8) {
        const double mid = 0.5 * (lo + hi);
        if (studentized_range_cdf(mid, k, df) < target)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

TukeyOutcome tukey_hsd(const std::vector<std::string>& models,
                       const std::vector<std::vector<double>>& groups, double alpha) {
    if (models.size() != groups.size())
        throw ConfigError("tukey_hsd: one model name per group required");
    const AnovaResult anova = anova_oneway(groups);
    const int k = static_cast<int>(groups.size());

    std::vector<double> means(groups.size());
    for (size_t i = 0; i < groups.size(); ++i) means[i] = mean_of(groups[i]);

    TukeyOutcome out;
    out.alpha = alpha;
    out.models = models;
    std::set<std::pair<int, int>> rejected;
    for (int i = 0; i < k; ++i) {
        for (int j = i + 1; j < k; ++j) {
            TukeyPair pair;
            pair.i = i;
            pair.j = j;
            pair.mean_diff = means[i] - means[j];
            const double n_i = static_cast<double>(groups[i].size());
            const double n_j = static_cast<double>(groups[j].size());
            // Tukey-Kramer standard error for unequal group sizes.
            const double se = std::sqrt(anova.ms_within / 2.0 * (1.0 / n_i + 1.0 / n_j));
            if (se == 0.0) {
                pair.q_stat = pair.mean_diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
                pair.p_adjusted = pair.mean_diff == 0.0 ? 1.0 : 0.0;
            } else {
                pair.q_stat = std::abs(pair.mean_diff) / se;
                pair.p_adjusted =
                    1.0 - studentized_range_cdf(pair.q_stat, k, static_cast<double>(anova.df_within));
            }
            pair.reject = pair.p_adjusted < alpha;
            if (pair.reject) rejected.insert({i, j});
            out.pairwise.push_back(pair);
        }
    }
    out.letters = compact_letter_display(models, rejected);
    return out;
}

std::map<std::string, std::string> compact_letter_display(
    const std::vector<std::string>& models, const std::set<std::pair<int, int>>& rejected_pairs) {
    const size_t n = models.size();
    for (const auto& [i, j] : rejected_pairs)
        if (i < 0 || j < 0 || static_cast<size_t>(i) >= n || static_cast<size_t>(j) >= n || i == j)
            throw ConfigError("rejected pair indices out of range");

    // Piepho-style insert-and-absorb over membership columns.
    std::vector<std::vector<bool>> columns;
    columns.emplace_back(n, true);
    auto absorb = [&columns]() {
        bool changed = true;
        while (changed) {
            changed = false;
            for (size_t a = 0; a < columns.size() && !changed; ++a) {
                for (size_t b = 0; b < columns.size() && !changed; ++b) {
                    if (a == b) continue;
                    bool subset = true; // columns[a] ⊆ columns[b]?
                    for (size_t m = 0; m < columns[a].size(); ++m)
                        if (columns[a][m] && !columns[b][m]) {
                            subset = false;
                            break;
                        }
                    if (subset) {
                        columns.erase(columns.begin() + static_cast<long>(a));
                        changed = true;
                    }
                }
            }
        }
    };
    for (const auto& [raw_i, raw_j] : rejected_pairs) {
        const size_t i = static_cast<size_t>(std::min(raw_i, raw_j));
        const size_t j = static_cast<size_t>(std::max(raw_i, raw_j));
        std::vector<std::vector<bool>> next;
        for (const auto& col : columns) {
            if (col[i] && col[j]) {
                auto without_i = col, without_j = col;
                without_i[i] = false;
                without_j[j] = false;
                next.push_back(std::move(without_i));
                next.push_back(std::move(without_j));
            } else {
                next.push_back(col);
            }
        }
        columns = std::move(next);
        absorb();
    }

    // Letters in first-use order over models in input order.
    std::sort(columns.begin(), columns.end(),
              [](const std::vector<bool>& a, const std::vector<bool>& b) { return a > b; });
    auto letter_symbol = [](size_t idx) -> std::string {
        if (idx < 26) return std::string(1, static_cast<char>('a' + idx));
        if (idx < 52) return std::string(1, static_cast<char>('A' + idx - 26));
        throw ConfigError("compact letter display exceeded 52 letters");
    };
    std::map<std::string, std::string> out;
    for (size_t m = 0; m < n; ++m) {
        std::string letters;
        for (size_t c = 0; c < columns.size(); ++c)
            if (columns[c][m]) letters += letter_symbol(c);
        out[models[m]] = letters;
    }
    return out;
}

ScatterData scatter_data(const EvalSeries& series) {
    if (series.pairs.empty()) throw ConfigError("empty series '" + series.model + "'");
    ScatterData out;
    out.points.reserve(series.pairs.size());
    for (const auto& p : series.pairs) out.points.emplace_back(p.truth, p.predicted);
    out.r2 = r2_identity(series);
    return out;
}

} // namespace tilecount
