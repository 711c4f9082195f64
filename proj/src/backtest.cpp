#include <newsflow/backtest.hpp>
#include <newsflow/csv.hpp>
#include <newsflow/rng.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <numeric>
#include <set>

namespace newsflow {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Panel column indices of a selection's four sets.
struct SelectionIndex {
    std::vector<int> ls_o, lns_o, ss_i, sns_i;
    std::vector<int> universe;  // union, ascending firm id
    std::vector<char> in_ls, in_ss;  // by panel firm index
};

std::map<int, SelectionIndex> index_selections(const std::vector<Selection>& selections, const ReturnPanel& panel) {
    std::map<int, SelectionIndex> out;
    const std::size_t F = panel.firms().size();
    for (const auto& s : selections) {
        if (out.count(s.year)) throw DataError("two selections for holding year " + std::to_string(s.year));
        SelectionIndex& x = out[s.year];
        x.in_ls.assign(F, 0);
        x.in_ss.assign(F, 0);
        auto map = [&](const std::vector<int>& ids, std::vector<int>& dst) {
            for (int f : ids) {
                const int fi = panel.firm_index(f);
                if (fi >= 0) dst.push_back(fi);
            }
        };
        map(s.ls_o, x.ls_o);
        map(s.lns_o, x.lns_o);
        map(s.ss_i, x.ss_i);
        map(s.sns_i, x.sns_i);
        for (int fi : x.ls_o) x.in_ls[static_cast<std::size_t>(fi)] = 1;
        for (int fi : x.ss_i) x.in_ss[static_cast<std::size_t>(fi)] = 1;
        std::set<int> u(x.ls_o.begin(), x.ls_o.end());
        u.insert(x.lns_o.begin(), x.lns_o.end());
        u.insert(x.ss_i.begin(), x.ss_i.end());
        u.insert(x.sns_i.begin(), x.sns_i.end());
        x.universe.assign(u.begin(), u.end());
    }
    return out;
}

double mean_of(const ReturnPanel& panel, Period p, int d, const std::vector<int>& firms, int* count) {
    double s = 0.0;
    int n = 0;
    for (int fi : firms) {
        const double r = panel.at(p, d, fi);
        if (std::isnan(r)) continue;
        s += r;
        ++n;
    }
    *count = n;
    return n == 0 ? kNaN : s / n * kBps;
}

AverageCell intercept_only(std::string name, const std::vector<double>& a, const std::vector<double>* b) {
    std::vector<double> v;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double x = b ? a[i] - (*b)[i] : a[i];
        if (std::isfinite(x)) v.push_back(x);
    }
    AverageCell c;
    c.name = std::move(name);
    c.nobs = v.size();
    if (v.size() < 2) throw DataError("average_return_table: fewer than two valid days for " + c.name);
    const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    const OlsFit fit = ols_fit(y, Eigen::MatrixXd::Ones(y.size(), 1), {"const"});
    const RegressionResult r = newey_west(fit);
    c.mean = r.coefficients(0);
    c.se = r.se(0);
    c.lags = r.nw_lags;
    if (c.se > 0.0) {
        c.t = c.mean / c.se;
        c.p_value = r.p_value(0);
    } else {
        c.t = c.mean == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), c.mean);
        c.p_value = c.mean == 0.0 ? 1.0 : 0.0;
    }
    return c;
}

/// Cross-sectional demeaning of one day's returns over firms with values.
std::vector<double> demeaned_day(const ReturnPanel& panel, Period p, int d) {
    const std::size_t F = panel.firms().size();
    std::vector<double> out(F, kNaN);
    if (d < 0) return out;
    double s = 0.0;
    int n = 0;
    for (std::size_t f = 0; f < F; ++f) {
        const double r = panel.at(p, d, static_cast<int>(f));
        if (std::isnan(r)) continue;
        s += r;
        ++n;
    }
    if (n == 0) return out;
    for (std::size_t f = 0; f < F; ++f) {
        const double r = panel.at(p, d, static_cast<int>(f));
        if (!std::isnan(r)) out[f] = (r - s / n) * kBps;
    }
    return out;
}

/// Growable column-major design assembled row by row.
struct Design {
    std::vector<std::string> names;
    std::vector<double> y;
    std::vector<std::vector<double>> cols;
    std::vector<long long> day, firm;

    explicit Design(std::vector<std::string> n) : names(std::move(n)), cols(names.size()) {}
    void add(double yv, const std::vector<double>& row, long long d, long long f) {
        y.push_back(yv);
        for (std::size_t j = 0; j < row.size(); ++j) cols[j].push_back(row[j]);
        day.push_back(d);
        firm.push_back(f);
    }
    Eigen::VectorXd Y() const { return Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size())); }
    Eigen::MatrixXd X(const std::vector<std::size_t>& keep) const {
        Eigen::MatrixXd m(static_cast<Eigen::Index>(y.size()), static_cast<Eigen::Index>(keep.size()));
        for (std::size_t j = 0; j < keep.size(); ++j)
            m.col(static_cast<Eigen::Index>(j)) =
                Eigen::Map<const Eigen::VectorXd>(cols[keep[j]].data(), static_cast<Eigen::Index>(y.size()));
        return m;
    }
};

const ControlRow* controls_for(const Controls* controls, int firm, int year) {
    return controls ? controls->find(firm, year) : nullptr;
}

}  // namespace

std::vector<double> DailyPortfolioSeries::cumulative(const std::vector<double>& bps) {
    std::vector<double> out(bps.size());
    double s = 0.0;
    for (std::size_t i = 0; i < bps.size(); ++i) {
        if (std::isfinite(bps[i])) s += bps[i] / kBps;
        out[i] = s;
    }
    return out;
}

DailyPortfolioSeries portfolio_series(const std::vector<Selection>& selections, const ReturnPanel& panel) {
    const auto idx = index_selections(selections, panel);
    DailyPortfolioSeries s;
    for (std::size_t d = 0; d < panel.days().size(); ++d) {
        const Date day = panel.days()[d];
        auto it = idx.find(year_of(day));
        if (it == idx.end()) continue;
        const auto& x = it->second;
        const int di = static_cast<int>(d);
        int n[6];
        s.days.push_back(day);
        s.ls_o.push_back(mean_of(panel, Period::Overnight, di, x.ls_o, &n[0]));
        s.lns_o.push_back(mean_of(panel, Period::Overnight, di, x.lns_o, &n[1]));
        s.ss_i.push_back(mean_of(panel, Period::Intraday, di, x.ss_i, &n[2]));
        s.sns_i.push_back(mean_of(panel, Period::Intraday, di, x.sns_i, &n[3]));
        s.universe_o.push_back(mean_of(panel, Period::Overnight, di, x.universe, &n[4]));
        s.universe_i.push_back(mean_of(panel, Period::Intraday, di, x.universe, &n[5]));
        s.n_ls_o.push_back(n[0]);
        s.n_lns_o.push_back(n[1]);
        s.n_ss_i.push_back(n[2]);
        s.n_sns_i.push_back(n[3]);
        const bool ls_gap = n[0] == 0 && !x.ls_o.empty();
        const bool lns_gap = n[1] == 0 && !x.lns_o.empty();
        const bool ss_gap = n[2] == 0 && !x.ss_i.empty();
        const bool sns_gap = n[3] == 0 && !x.sns_i.empty();
        if (ls_gap || lns_gap || ss_gap || sns_gap) s.gaps.push_back(day);
    }
    return s;
}

std::vector<AverageCell> average_return_table(const DailyPortfolioSeries& s) {
    const std::size_t n = s.days.size();
    for (const auto* v : {&s.ls_o, &s.lns_o, &s.ss_i, &s.sns_i})
        if (v->size() != n) throw DataError("average_return_table: series are not aligned on days");
    std::vector<AverageCell> out;
    out.push_back(intercept_only("LS_o", s.ls_o, nullptr));
    out.push_back(intercept_only("SS_i", s.ss_i, nullptr));
    out.push_back(intercept_only("LNS_o", s.lns_o, nullptr));
    out.push_back(intercept_only("SNS_i", s.sns_i, nullptr));
    out.push_back(intercept_only("LS_o-LNS_o", s.ls_o, &s.lns_o));
    out.push_back(intercept_only("SS_i-SNS_i", s.ss_i, &s.sns_i));
    out.push_back(intercept_only("LS_o-SS_i", s.ls_o, &s.ss_i));
    out.push_back(intercept_only("LNS_o-SNS_i", s.lns_o, &s.sns_i));
    return out;
}

AdjustedResult characteristics_adjusted(const ReturnPanel& panel, const std::vector<Selection>& selections,
                                        const Controls* controls, const AdjustedOptions& options) {
    const auto idx = index_selections(selections, panel);
    const bool use_controls = options.use_controls && controls != nullptr;
    std::vector<std::string> names;
    if (options.baseline) names = {"const", "d_intra"};
    else names = {"b0", "b_SNS", "b_LNS", "b_SS"};
    const std::size_t head = names.size();
    if (use_controls)
        for (const char* per : {":i", ":o"})
            for (const char* c : kControlNames) names.push_back(std::string(c) + per);
    const std::size_t ctrl_off = head;
    const std::size_t lag_off = names.size();
    if (options.include_lags)
        for (const char* n : {"r_intra_lag1:i", "r_over_same:i", "r_intra_lag1:o", "r_over_lag1:o"}) names.push_back(n);

    Design des(names);
    AdjustedResult res;
    std::vector<double> row(names.size());
    for (std::size_t d = 0; d < panel.days().size(); ++d) {
        const int year = year_of(panel.days()[d]);
        auto it = idx.find(year);
        if (it == idx.end()) continue;
        const auto& x = it->second;
        const int di = static_cast<int>(d);
        std::vector<double> ri_prev, ro_prev, ro_same;
        if (options.include_lags) {
            ri_prev = demeaned_day(panel, Period::Intraday, di - 1);
            ro_prev = demeaned_day(panel, Period::Overnight, di - 1);
            ro_same = demeaned_day(panel, Period::Overnight, di);
        }
        for (int fi : x.universe) {
            const int firm = panel.firms()[static_cast<std::size_t>(fi)];
            const ControlRow* c = nullptr;
            if (use_controls) c = controls_for(controls, firm, year - 1);
            for (Period p : {Period::Intraday, Period::Overnight}) {
                const double r = panel.at(p, di, fi);
                if (std::isnan(r)) continue;
                if (use_controls && !c) {
                    ++res.rows_without_controls;
                    continue;
                }
                std::fill(row.begin(), row.end(), 0.0);
                const bool intra = p == Period::Intraday;
                row[0] = 1.0;
                if (options.baseline) {
                    row[1] = intra ? 1.0 : 0.0;
                } else {
                    const bool ls = x.in_ls[static_cast<std::size_t>(fi)] != 0;
                    const bool ss = x.in_ss[static_cast<std::size_t>(fi)] != 0;
                    row[1] = intra && !ss ? 1.0 : 0.0;
                    row[2] = !intra && !ls ? 1.0 : 0.0;
                    row[3] = intra && ss ? 1.0 : 0.0;
                }
                if (use_controls) {
                    const std::size_t base = ctrl_off + (intra ? 0 : kControlCount);
                    for (int k = 0; k < kControlCount; ++k) row[base + static_cast<std::size_t>(k)] = c->values[static_cast<std::size_t>(k)];
                }
                if (options.include_lags) {
                    const auto f = static_cast<std::size_t>(fi);
                    const double a = ri_prev[f];
                    const double b = intra ? ro_same[f] : ro_prev[f];
                    if (std::isnan(a) || std::isnan(b)) {
                        ++res.rows_without_lags;
                        continue;
                    }
                    row[lag_off + (intra ? 0 : 2)] = a;
                    row[lag_off + (intra ? 1 : 3)] = b;
                }
                des.add(r * kBps, row, static_cast<long long>(d), firm);
            }
        }
    }
    if (des.y.empty()) throw DataError("characteristics_adjusted: no observations");
    std::vector<std::size_t> keep(names.size());
    std::iota(keep.begin(), keep.end(), 0);
    const OlsFit fit = ols_fit(des.Y(), des.X(keep), names);
    res.regression = clustered(fit, des.day, &des.firm);
    if (!options.baseline) {
        res.sns_vs_lns = wald_equality(res.regression, {{1, 2}});
        res.sns_vs_ss = wald_equality(res.regression, {{1, 3}});
    }
    return res;
}

namespace {

DecompositionResult decomposition(const ReturnPanel& panel, const std::vector<Selection>& selections,
                                  const Controls* controls, const DecompositionOptions& options, bool inverse) {
    if (options.m < 1) throw ConfigError("decomposition: m must be positive");
    const auto idx = index_selections(selections, panel);
    const bool use_controls = options.use_controls && controls != nullptr;
    const char* sel = inverse ? "SS" : "LS";
    const char* rank = inverse ? "IIM" : "IM";
    std::vector<std::string> names = {"b_Both", std::string("b_") + sel + "-" + rank, std::string("b_") + rank + "-" + sel,
                                      "b_Rem"};
    if (use_controls)
        for (const char* c : kControlNames) names.emplace_back(c);
    Design des(names);
    DecompositionResult res;
    std::vector<double> row(names.size());
    const int D = static_cast<int>(panel.days().size());
    for (int d = 0; d < D; ++d) {
        const int year = year_of(panel.days()[static_cast<std::size_t>(d)]);
        auto it = idx.find(year);
        if (it == idx.end()) continue;
        const int target = inverse ? d : d + 1;
        if (target >= D) continue;
        const auto& x = it->second;
        const Period rank_p = inverse ? Period::Overnight : Period::Intraday;
        const Period y_p = inverse ? Period::Intraday : Period::Overnight;
        std::vector<int> ranked;
        for (int fi : x.universe)
            if (!std::isnan(panel.at(rank_p, d, fi))) ranked.push_back(fi);
        if (static_cast<int>(ranked.size()) < options.m) {
            ++res.skipped_days;
            continue;
        }
        std::sort(ranked.begin(), ranked.end(), [&](int a, int b) {
            const double ra = panel.at(rank_p, d, a), rb = panel.at(rank_p, d, b);
            if (ra != rb) return inverse ? ra > rb : ra < rb;
            return a < b;
        });
        std::vector<char> in_rank(panel.firms().size(), 0);
        for (int i = 0; i < options.m; ++i) in_rank[static_cast<std::size_t>(ranked[static_cast<std::size_t>(i)])] = 1;
        const auto& in_sel = inverse ? x.in_ss : x.in_ls;
        for (int fi : ranked) {
            const double r = panel.at(y_p, target, fi);
            if (std::isnan(r)) continue;
            const int firm = panel.firms()[static_cast<std::size_t>(fi)];
            const ControlRow* c = nullptr;
            if (use_controls) {
                c = controls_for(controls, firm, year - 1);
                if (!c) continue;
            }
            std::fill(row.begin(), row.end(), 0.0);
            const bool s = in_sel[static_cast<std::size_t>(fi)] != 0;
            const bool k = in_rank[static_cast<std::size_t>(fi)] != 0;
            const int cell = s && k ? 0 : s ? 1 : k ? 2 : 3;
            row[static_cast<std::size_t>(cell)] = 1.0;
            ++res.cell_rows[static_cast<std::size_t>(cell)];
            if (use_controls)
                for (int j = 0; j < kControlCount; ++j) row[4 + static_cast<std::size_t>(j)] = c->values[static_cast<std::size_t>(j)];
            des.add(r * kBps, row, d, firm);
        }
    }
    if (des.y.empty()) throw DataError("decomposition: no observations");
    std::vector<std::size_t> keep;
    for (std::size_t j = 0; j < names.size(); ++j) {
        if (j < 4 && res.cell_rows[j] == 0) {
            res.dropped.push_back(names[j]);
            continue;
        }
        // With day effects the four cells sum to the absorbed constant; the
        // remainder cell becomes the reference.
        if (j == 3 && options.day_fixed_effects) {
            res.dropped.push_back(names[j]);
            continue;
        }
        keep.push_back(j);
    }
    std::vector<std::string> kept_names;
    for (auto j : keep) kept_names.push_back(names[j]);
    if (options.day_fixed_effects) {
        PanelSpec spec;
        spec.fixed_effects = {des.day};
        spec.clusters = {des.day, des.firm};
        spec.intercept = false;
        res.regression = panel_fe(des.Y(), des.X(keep), kept_names, spec);
    } else {
        const OlsFit fit = ols_fit(des.Y(), des.X(keep), kept_names);
        res.regression = clustered(fit, des.day, &des.firm);
    }
    for (std::size_t c = 0; c < 4; ++c) {
        res.coefficient[c] = res.se[c] = res.p_value[c] = kNaN;
        auto pos = std::find(keep.begin(), keep.end(), c);
        if (pos == keep.end()) continue;
        const int i = static_cast<int>(pos - keep.begin());
        res.coefficient[c] = res.regression.coefficients(i);
        res.se[c] = res.regression.se(i);
        res.p_value[c] = res.regression.p_value(i);
    }
    return res;
}

}  // namespace

DecompositionResult im_decomposition(const ReturnPanel& panel, const std::vector<Selection>& selections,
                                     const Controls* controls, const DecompositionOptions& options) {
    return decomposition(panel, selections, controls, options, false);
}

DecompositionResult iim_decomposition(const ReturnPanel& panel, const std::vector<Selection>& selections,
                                      const Controls* controls, const DecompositionOptions& options) {
    return decomposition(panel, selections, controls, options, true);
}

SplitHalfResult split_half_eval(const std::vector<AnnualStats>& annual, const WindowedExposure& zbar,
                                const Controls* controls, const std::vector<int>& years,
                                const std::function<std::vector<int>(int)>& forecast_firms, const FitOptions& fit,
                                std::uint64_t seed, int size) {
    SplitHalfResult out;
    for (int t : years) {
        const std::vector<int> candidates = forecast_firms(t);
        std::set<int> all(candidates.begin(), candidates.end());
        for (const auto& s : annual)
            if (s.year == t) all.insert(s.firm);
        std::vector<int> firms(all.begin(), all.end());
        if (firms.size() < 4) throw DataError("split_half_eval: year " + std::to_string(t) + " has fewer than 4 firms");
        CounterRng rng(derive_seed(seed, {0x5917, static_cast<std::uint64_t>(t)}));
        for (std::size_t i = firms.size() - 1; i > 0; --i) std::swap(firms[i], firms[rng.below(i + 1)]);
        const std::size_t half = firms.size() / 2;
        const std::set<int> a(firms.begin(), firms.begin() + static_cast<std::ptrdiff_t>(half));
        const std::set<int> b(firms.begin() + static_cast<std::ptrdiff_t>(half), firms.end());
        std::vector<AnnualStats> train;
        for (const auto& s : annual)
            if (a.count(s.firm)) train.push_back(s);
        ForecastModel m = fit_rolling(train, zbar, controls, Variant::V1, t, fit);
        std::vector<int> targets;
        for (int f : candidates)
            if (b.count(f)) targets.push_back(f);
        const ForecastSet fs = forecast(m, zbar, targets);
        out.selections.push_back(select_portfolios(fs, size));
        out.models.push_back(std::move(m));
    }
    return out;
}

IoPanelsResult io_panels(const std::vector<AnnualStats>& annual, const std::vector<ForecastSet>& forecasts) {
    std::map<std::pair<int, int>, const AnnualStats*> r;
    for (const auto& s : annual) r[{s.firm, s.year}] = &s;
    std::map<std::pair<int, int>, const FirmForecast*> f;
    for (const auto& set : forecasts)
        for (const auto& row : set.rows) f[{row.firm, set.year}] = &row;
    struct Row {
        int firm, year;
        double r_t[2], r_t1[2], f_t[2];
    };
    std::vector<Row> rows;
    IoPanelsResult out;
    for (const auto& [key, now] : r) {
        auto next = r.find({key.first, key.second + 1});
        if (next == r.end()) continue;
        auto fc = f.find(key);
        if (fc == f.end()) {
            ++out.dropped_rows;
            continue;
        }
        rows.push_back({key.first, key.second, {now->intraday, now->overnight},
                        {next->second->intraday, next->second->overnight},
                        {fc->second->intraday, fc->second->overnight}});
    }
    if (rows.size() < 3) throw DataError("io_panels: fewer than three firm-years with forecasts");
    const auto n = static_cast<Eigen::Index>(rows.size());
    std::vector<long long> yr(rows.size()), firm(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        yr[i] = rows[i].year;
        firm[i] = rows[i].firm;
    }
    PanelSpec spec;
    spec.fixed_effects = {yr};
    spec.clusters = {yr, firm};
    const char* rname[2] = {"r_intra_t", "r_over_t"};
    const char* fname[2] = {"f_intra_t", "f_over_t"};
    for (int p = 0; p < 2; ++p) {
        for (int q : {p, 1 - p}) {
            Eigen::VectorXd y(n), rq(n), fp(n);
            for (Eigen::Index i = 0; i < n; ++i) {
                const auto& w = rows[static_cast<std::size_t>(i)];
                y(i) = w.r_t1[p];
                rq(i) = w.r_t[q];
                fp(i) = w.f_t[p];
            }
            Eigen::MatrixXd both(n, 2);
            both << rq, fp;
            out.regressions.push_back({p, q, "rr", panel_fe(y, rq, {rname[q]}, spec)});
            out.regressions.push_back({p, q, "rf", panel_fe(y, fp, {fname[p]}, spec)});
            out.regressions.push_back({p, q, "rrf", panel_fe(y, both, {rname[q], fname[p]}, spec)});
        }
    }
    return out;
}

std::vector<std::size_t> trim_indices(const std::vector<double>& values, double fraction) {
    const std::size_t n = values.size();
    const auto cut = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    if (2 * cut >= n) return {};
    std::vector<std::size_t> kept(order.begin() + static_cast<std::ptrdiff_t>(cut), order.end() - static_cast<std::ptrdiff_t>(cut));
    std::sort(kept.begin(), kept.end());
    return kept;
}

namespace {

/// Keeps points inside the trimmed range on both coordinates.
std::vector<std::size_t> trim_pairs(const std::vector<double>& x, const std::vector<double>& y, double fraction) {
    const auto kx = trim_indices(x, fraction);
    const auto ky = trim_indices(y, fraction);
    std::vector<std::size_t> out;
    std::set_intersection(kx.begin(), kx.end(), ky.begin(), ky.end(), std::back_inserter(out));
    return out;
}

}  // namespace

std::vector<std::string> emit_figure_data(const std::string& dir, const FigureInputs& in) {
    std::filesystem::create_directories(dir);
    std::vector<std::string> files;
    auto path = [&](const char* name) {
        files.emplace_back(name);
        return (std::filesystem::path(dir) / name).string();
    };
    if (in.series) {
        const auto& s = *in.series;
        CsvWriter w(path("portfolio_cumulative.csv"));
        w.row({"date", "ls_o", "lns_o", "ss_i", "sns_i"});
        const auto a = DailyPortfolioSeries::cumulative(s.ls_o);
        const auto b = DailyPortfolioSeries::cumulative(s.lns_o);
        const auto c = DailyPortfolioSeries::cumulative(s.ss_i);
        const auto d = DailyPortfolioSeries::cumulative(s.sns_i);
        for (std::size_t i = 0; i < s.days.size(); ++i) {
            w.field(format_date(s.days[i])).field(a[i]).field(b[i]).field(c[i]).field(d[i]);
            w.end_row();
        }
    }
    if (in.panel) {
        const auto& p = *in.panel;
        CsvWriter w(path("market_cumulative.csv"));
        w.row({"date", "intraday", "overnight"});
        std::vector<int> all(p.firms().size());
        std::iota(all.begin(), all.end(), 0);
        double ci = 0.0, co = 0.0;
        for (std::size_t d = 0; d < p.days().size(); ++d) {
            int n = 0;
            const double mi = mean_of(p, Period::Intraday, static_cast<int>(d), all, &n);
            const double mo = mean_of(p, Period::Overnight, static_cast<int>(d), all, &n);
            if (std::isfinite(mi)) ci += mi / kBps;
            if (std::isfinite(mo)) co += mo / kBps;
            w.field(format_date(p.days()[d])).field(ci).field(co);
            w.end_row();
        }
    }
    if (in.models) {
        std::vector<int> yr, tp;
        std::vector<double> bi, bo;
        {
            CsvWriter w(path("coefficient_scatter.csv"));
            w.row({"year", "topic", "beta_i", "beta_o"});
            for (const auto& m : *in.models)
                for (int k = 0; k < m.K; ++k) {
                    w.field(m.year).field(k).field(m.beta_i(k)).field(m.beta_o(k));
                    w.end_row();
                    if (m.beta_i(k) != 0.0 && m.beta_o(k) != 0.0) {
                        yr.push_back(m.year);
                        tp.push_back(k);
                        bi.push_back(m.beta_i(k));
                        bo.push_back(m.beta_o(k));
                    }
                }
        }
        CsvWriter w(path("coefficient_scatter_nonzero.csv"));
        w.row({"year", "topic", "beta_i", "beta_o"});
        for (std::size_t i : trim_pairs(bi, bo, 0.01)) {
            w.field(yr[i]).field(tp[i]).field(bi[i]).field(bo[i]);
            w.end_row();
        }
    }
    if (in.annual) {
        const auto& a = *in.annual;
        std::map<std::pair<long long, int>, std::pair<double, double>> sums;
        for (std::size_t r = 0; r < a.rows(); ++r)
            for (int k = 0; k < a.K; ++k) {
                auto& s = sums[{a.keys[r].second, k}];
                s.first += a.intraday(static_cast<Eigen::Index>(r), k);
                s.second += a.overnight(static_cast<Eigen::Index>(r), k);
            }
        std::vector<std::pair<long long, int>> keys;
        std::vector<double> xs, ys;
        for (const auto& [key, v] : sums) {
            keys.push_back(key);
            xs.push_back(v.first);
            ys.push_back(v.second);
        }
        {
            CsvWriter w(path("exposure_scatter.csv"));
            w.row({"year", "topic", "sum_intraday", "sum_overnight"});
            for (std::size_t i : trim_pairs(xs, ys, 0.05)) {
                w.field(keys[i].first).field(keys[i].second).field(xs[i]).field(ys[i]);
                w.end_row();
            }
        }
        constexpr int kBins = 20;
        std::vector<int> hist(kBins, 0);
        {
            CsvWriter w(path("exposure_correlation.csv"));
            w.row({"firm", "year", "correlation"});
            for (std::size_t r = 0; r < a.rows(); ++r) {
                const Eigen::VectorXd x = a.intraday.row(static_cast<Eigen::Index>(r)).transpose();
                const Eigen::VectorXd y = a.overnight.row(static_cast<Eigen::Index>(r)).transpose();
                const Eigen::VectorXd dx = x.array() - x.mean();
                const Eigen::VectorXd dy = y.array() - y.mean();
                const double den = std::sqrt(dx.squaredNorm() * dy.squaredNorm());
                if (!(den > 0.0)) continue;
                const double c = std::clamp(dx.dot(dy) / den, -1.0, 1.0);
                w.field(a.keys[r].first).field(a.keys[r].second).field(c);
                w.end_row();
                // Bins are (lo, hi] so a correlation of exactly 1 lands in the top bin.
                int b = static_cast<int>(std::ceil((c + 1.0) / 2.0 * kBins)) - 1;
                hist[static_cast<std::size_t>(std::clamp(b, 0, kBins - 1))]++;
            }
        }
        CsvWriter w(path("exposure_correlation_hist.csv"));
        w.row({"bin_low", "bin_high", "count"});
        for (int b = 0; b < kBins; ++b) {
            w.field(-1.0 + 2.0 * b / kBins).field(-1.0 + 2.0 * (b + 1) / kBins).field(hist[static_cast<std::size_t>(b)]);
            w.end_row();
        }
    }
    if (!in.contributions.empty()) {
        CsvWriter w(path("topic_history.csv"));
        w.row({"year", "period", "rank", "topic", "value", "beta_sign"});
        for (const auto& [year, period, res] : in.contributions)
            for (std::size_t i = 0; i < res.top.size(); ++i) {
                w.field(year).field(to_string(period)).field(static_cast<int>(i + 1)).field(res.top[i].topic)
                    .field(res.top[i].value).field(res.top[i].beta_sign);
                w.end_row();
            }
    }
    return files;
}

}  // namespace newsflow
