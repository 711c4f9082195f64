#include <newsflow/csv.hpp>
#include <newsflow/forecast.hpp>
#include <newsflow/rng.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <tuple>

namespace newsflow {

using nlohmann::json;

const std::array<const char*, kControlCount> kControlNames = {
    "size", "book_to_market", "investment", "profitability",
    "intraday_momentum", "overnight_momentum", "intraday_volatility", "overnight_volatility"};

std::vector<FundamentalsRow> read_fundamentals(const std::string& path) {
    const CsvTable t = read_csv(path);
    const auto cf = t.column("firm_id");
    const auto cy = t.column("year");
    const auto cs = t.column("size");
    const auto cb = t.column("book_to_market");
    const auto ci = t.column("investment");
    const auto cp = t.column("profitability");
    std::vector<FundamentalsRow> rows;
    for (const auto& r : t.rows)
        rows.push_back({static_cast<int>(parse_long(r.at(cf), "firm_id")), static_cast<int>(parse_long(r.at(cy), "year")),
                        parse_double(r.at(cs), "size"), parse_double(r.at(cb), "book_to_market"),
                        parse_double(r.at(ci), "investment"), parse_double(r.at(cp), "profitability")});
    return rows;
}

void write_fundamentals(const std::string& path, const std::vector<FundamentalsRow>& rows) {
    CsvWriter w(path);
    w.row({"firm_id", "year", "size", "book_to_market", "investment", "profitability"});
    for (const auto& r : rows) {
        w.field(r.firm).field(r.year).field(r.size).field(r.book_to_market).field(r.investment).field(r.profitability);
        w.end_row();
    }
}

const ControlRow* Controls::find(int firm, int year) const {
    auto it = std::lower_bound(rows.begin(), rows.end(), std::make_pair(firm, year), [](const ControlRow& r, const auto& k) {
        return std::tie(r.firm, r.year) < std::tie(k.first, k.second);
    });
    return it != rows.end() && it->firm == firm && it->year == year ? &*it : nullptr;
}

Controls build_controls(const ReturnPanel& returns, const std::vector<FundamentalsRow>& fundamentals) {
    Controls out;
    std::map<std::pair<int, int>, AnnualStats> stats;
    for (const auto& s : returns.annual()) stats.emplace(std::make_pair(s.firm, s.year), s);
    int first_key = 0;
    const Eigen::MatrixXd mi = returns.monthly(Period::Intraday, &first_key);
    const Eigen::MatrixXd mo = returns.monthly(Period::Overnight);
    auto momentum = [&](const Eigen::MatrixXd& m, int fi, int year) {
        double s = 0.0;
        for (int month = 0; month < 11; ++month) {
            const int row = year * 12 + month - first_key;
            if (row < 0 || row >= m.rows()) return std::numeric_limits<double>::quiet_NaN();
            const double v = m(row, fi);
            if (std::isnan(v)) return v;
            s += v;
        }
        return s;
    };
    std::set<std::pair<int, int>> seen;
    for (const auto& f : fundamentals) {
        const auto key = std::make_pair(f.firm, f.year);
        if (!seen.insert(key).second)
            throw DataError("duplicate fundamentals for firm " + std::to_string(f.firm) + " year " + std::to_string(f.year));
        auto it = stats.find(key);
        const int fi = returns.firm_index(f.firm);
        if (it == stats.end() || fi < 0) {
            out.excluded.push_back({key, "no returns"});
            continue;
        }
        ControlRow row{f.firm, f.year, {}};
        row.values = {f.size,
                      std::asinh(f.book_to_market),
                      f.investment,
                      f.profitability,
                      momentum(mi, fi, f.year),
                      momentum(mo, fi, f.year),
                      it->second.intraday_sd * std::sqrt(252.0),
                      it->second.overnight_sd * std::sqrt(252.0)};
        std::string reason;
        for (int c = 0; c < kControlCount && reason.empty(); ++c)
            if (!std::isfinite(row.values[static_cast<std::size_t>(c)])) reason = std::string("missing ") + kControlNames[static_cast<std::size_t>(c)];
        if (!reason.empty()) {
            out.excluded.push_back({key, reason});
            continue;
        }
        out.rows.push_back(row);
    }
    std::map<int, std::pair<std::array<double, kControlCount>, int>> sums;
    for (const auto& r : out.rows) {
        auto& s = sums[r.year];
        for (int c = 0; c < kControlCount; ++c) s.first[static_cast<std::size_t>(c)] += r.values[static_cast<std::size_t>(c)];
        ++s.second;
    }
    for (auto& r : out.rows) {
        const auto& s = sums[r.year];
        for (int c = 0; c < kControlCount; ++c)
            r.values[static_cast<std::size_t>(c)] -= s.first[static_cast<std::size_t>(c)] / s.second;
    }
    std::sort(out.rows.begin(), out.rows.end(),
              [](const ControlRow& a, const ControlRow& b) { return std::tie(a.firm, a.year) < std::tie(b.firm, b.year); });
    return out;
}

std::string_view to_string(Variant v) {
    switch (v) {
        case Variant::V1: return "V1";
        case Variant::V2: return "V2";
        case Variant::V3: return "V3";
        case Variant::V4: return "V4";
    }
    return "?";
}

Variant variant_from_string(std::string_view s) {
    if (s == "V1" || s == "v1") return Variant::V1;
    if (s == "V2" || s == "v2") return Variant::V2;
    if (s == "V3" || s == "v3") return Variant::V3;
    if (s == "V4" || s == "v4") return Variant::V4;
    throw ConfigError("unknown variant '" + std::string(s) + "' (expected V1..V4)");
}

Eigen::VectorXd variant_regressor(Variant v, const WindowedExposure& zbar, std::size_t row, Period p) {
    const auto r = static_cast<Eigen::Index>(row);
    if (v == Variant::V1 || v == Variant::V4) return zbar.session(p).row(r).transpose();
    return (zbar.intraday.row(r) + zbar.overnight.row(r)).transpose();
}

ForecastModel fit_rolling(const std::vector<AnnualStats>& annual, const WindowedExposure& zbar, const Controls* controls,
                          Variant variant, int year, const FitOptions& options) {
    if (options.pool_years < 1) throw ConfigError("pool_years must be at least 1");
    const int K = zbar.K;
    const bool split = period_specific_beta(variant);
    const int P = split ? 2 * K : K;
    const bool use_controls = options.use_controls && controls != nullptr;
    const int C = use_controls ? kControlCount : 0;

    ForecastModel m;
    m.year = year;
    m.variant = variant;
    m.K = K;

    struct Obs {
        int firm;
        Period p;
        double y;
        std::size_t zrow;
        const ControlRow* ctrl;
    };
    std::vector<Obs> obs;
    for (const auto& s : annual) {
        if (s.year > year || s.year <= year - options.pool_years) continue;
        const auto zr = zbar.find(s.firm, s.year - 1);
        if (!zr) continue;
        const ControlRow* c = nullptr;
        if (use_controls) {
            c = controls->find(s.firm, s.year - 1);
            if (!c) {
                m.excluded_rows.emplace_back(s.firm, s.year - 1);
                continue;
            }
        }
        obs.push_back({s.firm, Period::Intraday, s.intraday, *zr, c});
        obs.push_back({s.firm, Period::Overnight, s.overnight, *zr, c});
    }
    if (obs.empty()) throw DataError("fit_rolling: empty training set for year " + std::to_string(year));

    const auto n = static_cast<Eigen::Index>(obs.size());
    Eigen::VectorXd y(n);
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(n, P);
    Eigen::MatrixXd U(n, 2 + C);
    std::vector<int> fold(obs.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& o = obs[static_cast<std::size_t>(i)];
        y(i) = o.y;
        const Eigen::VectorXd x = variant_regressor(variant, zbar, o.zrow, o.p);
        const int off = split && o.p == Period::Overnight ? K : 0;
        X.row(i).segment(off, K) = x.transpose();
        U(i, 0) = 1.0;
        U(i, 1) = o.p == Period::Intraday ? 1.0 : 0.0;
        for (int c = 0; c < C; ++c) U(i, 2 + c) = o.ctrl->values[static_cast<std::size_t>(c)];
        fold[static_cast<std::size_t>(i)] =
            static_cast<int>(derive_seed(options.seed, {0xc5f0, static_cast<std::uint64_t>(o.firm)}) %
                             static_cast<std::uint64_t>(options.lasso.folds));
    }
    const LassoCvResult cv = lasso_cv(y, X, U, fold, options.lasso);
    m.lambda = cv.lambdas[static_cast<std::size_t>(cv.best)];
    m.cv_mse = cv.cv_mse[static_cast<std::size_t>(cv.best)];
    m.training_rows = static_cast<int>(n);
    m.alpha = cv.fit.gamma(0);
    m.alpha_i = cv.fit.gamma(1);
    m.gamma = cv.fit.gamma.tail(C);
    m.beta_i = cv.fit.beta.head(K);
    m.beta_o = split ? Eigen::VectorXd(cv.fit.beta.tail(K)) : m.beta_i;
    std::set<int> dropped;
    for (int c : cv.dropped_columns) dropped.insert(c % K);
    m.dropped_topics.assign(dropped.begin(), dropped.end());
    for (int k = 0; k < K; ++k) m.selected_topic_count += (m.beta_i(k) != 0.0 || m.beta_o(k) != 0.0);
    return m;
}

ForecastSet forecast(const ForecastModel& model, const WindowedExposure& zbar, const std::vector<int>& firms) {
    ForecastSet out;
    out.year = model.year;
    out.variant = model.variant;
    std::vector<int> sorted = firms;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    for (int f : sorted) {
        const auto r = zbar.find(f, model.year);
        if (!r) {
            out.missing.push_back(f);
            continue;
        }
        const double fi = model.alpha + model.alpha_i +
                          model.beta_i.dot(variant_regressor(model.variant, zbar, *r, Period::Intraday));
        const double fo = model.alpha + model.beta_o.dot(variant_regressor(model.variant, zbar, *r, Period::Overnight));
        out.rows.push_back({f, fi, fo});
    }
    return out;
}

Selection select_portfolios(const ForecastSet& forecasts, int size) {
    Selection s;
    s.year = forecasts.year + 1;
    const auto& rows = forecasts.rows;
    const int n = static_cast<int>(rows.size());
    int take = size;
    if (n < size + 1) {
        s.reduced = true;
        take = std::min(size, n);
    }
    std::vector<std::size_t> idx(rows.size());
    std::iota(idx.begin(), idx.end(), 0);
    auto pick = [&](auto better, std::vector<int>& chosen, std::vector<int>& rest) {
        std::vector<std::size_t> order = idx;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (better(rows[a], rows[b])) return true;
            if (better(rows[b], rows[a])) return false;
            return rows[a].firm < rows[b].firm;
        });
        for (int i = 0; i < n; ++i) (i < take ? chosen : rest).push_back(rows[order[static_cast<std::size_t>(i)]].firm);
        std::sort(chosen.begin(), chosen.end());
        std::sort(rest.begin(), rest.end());
    };
    pick([](const FirmForecast& a, const FirmForecast& b) { return a.overnight > b.overnight; }, s.ls_o, s.lns_o);
    pick([](const FirmForecast& a, const FirmForecast& b) { return a.intraday < b.intraday; }, s.ss_i, s.sns_i);
    return s;
}

ContributionResult topic_contributions(const ForecastModel& model, const WindowedExposure& zbar, int year,
                                       const std::vector<int>& set, const std::vector<int>& universe, Period period,
                                       int count) {
    if (set.empty()) throw DataError("topic_contributions: empty selection");
    const int K = model.K;
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(K);
    int nu = 0;
    for (int f : universe) {
        const auto r = zbar.find(f, year);
        if (!r) continue;
        mean += variant_regressor(model.variant, zbar, *r, period);
        ++nu;
    }
    if (nu == 0) throw DataError("topic_contributions: no universe firm has exposures");
    mean /= nu;
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(K);
    for (int f : set) {
        const auto r = zbar.find(f, year);
        if (!r) throw DataError("topic_contributions: firm " + std::to_string(f) + " has no exposures");
        sum += variant_regressor(model.variant, zbar, *r, period);
    }
    const Eigen::VectorXd& beta = model.beta(period);
    ContributionResult out;
    out.phi = beta.cwiseProduct(sum - mean);
    std::vector<int> order(static_cast<std::size_t>(K));
    std::iota(order.begin(), order.end(), 0);
    const double sign = period == Period::Overnight ? 1.0 : -1.0;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return sign * out.phi(a) > sign * out.phi(b); });
    for (int k : order) {
        if (static_cast<int>(out.top.size()) >= count || !(sign * out.phi(k) > 0.0)) break;
        out.top.push_back({k, out.phi(k), beta(k) > 0 ? 1 : (beta(k) < 0 ? -1 : 0)});
    }
    return out;
}

namespace {

json sparse(const Eigen::VectorXd& v) {
    json a = json::array();
    for (Eigen::Index k = 0; k < v.size(); ++k)
        if (v(k) != 0.0) a.push_back({k, v(k)});
    return a;
}

Eigen::VectorXd dense(const json& a, int K) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(K);
    for (const auto& e : a) {
        const int k = e.at(0).get<int>();
        if (k < 0 || k >= K) throw DataError("model beta index out of range");
        v(k) = e.at(1).get<double>();
    }
    return v;
}

json model_to_json(const ForecastModel& m) {
    json g = json::object();
    for (Eigen::Index c = 0; c < m.gamma.size(); ++c) g[kControlNames[static_cast<std::size_t>(c)]] = m.gamma(c);
    return {{"year", m.year},
            {"variant", std::string(to_string(m.variant))},
            {"K", m.K},
            {"lambda", m.lambda},
            {"alpha", m.alpha},
            {"alpha_i", m.alpha_i},
            {"gamma", g},
            {"beta_i", sparse(m.beta_i)},
            {"beta_o", sparse(m.beta_o)},
            {"selected_topic_count", m.selected_topic_count},
            {"cv_mse", m.cv_mse},
            {"training_rows", m.training_rows},
            {"dropped_topics", m.dropped_topics}};
}

ForecastModel model_from_json(const json& j) {
    ForecastModel m;
    m.year = j.at("year").get<int>();
    m.variant = variant_from_string(j.at("variant").get<std::string>());
    m.K = j.at("K").get<int>();
    m.lambda = j.at("lambda").get<double>();
    m.alpha = j.at("alpha").get<double>();
    m.alpha_i = j.at("alpha_i").get<double>();
    const auto& g = j.at("gamma");
    m.gamma.resize(static_cast<Eigen::Index>(g.size()));
    for (std::size_t c = 0; c < g.size(); ++c) m.gamma(static_cast<Eigen::Index>(c)) = g.at(kControlNames.at(c)).get<double>();
    m.beta_i = dense(j.at("beta_i"), m.K);
    m.beta_o = dense(j.at("beta_o"), m.K);
    m.selected_topic_count = j.at("selected_topic_count").get<int>();
    m.cv_mse = j.at("cv_mse").get<double>();
    m.training_rows = j.at("training_rows").get<int>();
    m.dropped_topics = j.at("dropped_topics").get<std::vector<int>>();
    return m;
}

json load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw DataError(path + ": " + e.what());
    }
}

void save(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << j.dump(2) << '\n';
}

}  // namespace

void write_model_json(const std::string& path, const ForecastModel& model) { save(path, model_to_json(model)); }

ForecastModel read_model_json(const std::string& path) {
    const json j = load(path);
    try {
        return model_from_json(j);
    } catch (const json::exception& e) {
        throw DataError(path + ": " + e.what());
    }
}

void write_models_json(const std::string& path, const std::vector<ForecastModel>& models) {
    json a = json::array();
    for (const auto& m : models) a.push_back(model_to_json(m));
    save(path, {{"models", a}});
}

std::vector<ForecastModel> read_models_json(const std::string& path) {
    const json j = load(path);
    std::vector<ForecastModel> out;
    try {
        for (const auto& m : j.at("models")) out.push_back(model_from_json(m));
    } catch (const json::exception& e) {
        throw DataError(path + ": " + e.what());
    }
    return out;
}

void write_selections_csv(const std::string& path, const std::vector<Selection>& selections) {
    CsvWriter w(path);
    w.row({"year", "portfolio", "firm_id"});
    for (const auto& s : selections) {
        const std::pair<const char*, const std::vector<int>*> parts[] = {
            {"LS_o", &s.ls_o}, {"SS_i", &s.ss_i}, {"LNS_o", &s.lns_o}, {"SNS_i", &s.sns_i}};
        for (const auto& [name, ids] : parts)
            for (int f : *ids) {
                w.field(s.year).field(std::string_view(name)).field(f);
                w.end_row();
            }
    }
}

std::vector<Selection> read_selections_csv(const std::string& path) {
    const CsvTable t = read_csv(path);
    const auto cy = t.column("year");
    const auto cp = t.column("portfolio");
    const auto cf = t.column("firm_id");
    std::map<int, Selection> by_year;
    for (const auto& r : t.rows) {
        const int y = static_cast<int>(parse_long(r.at(cy), "year"));
        Selection& s = by_year[y];
        s.year = y;
        const int f = static_cast<int>(parse_long(r.at(cf), "firm_id"));
        const std::string& p = r.at(cp);
        if (p == "LS_o") s.ls_o.push_back(f);
        else if (p == "SS_i") s.ss_i.push_back(f);
        else if (p == "LNS_o") s.lns_o.push_back(f);
        else if (p == "SNS_i") s.sns_i.push_back(f);
        else throw DataError(path + ": unknown portfolio '" + p + "'");
    }
    std::vector<Selection> out;
    for (auto& [y, s] : by_year) out.push_back(std::move(s));
    return out;
}

void write_forecasts_csv(const std::string& path, const std::vector<ForecastSet>& sets) {
    CsvWriter w(path);
    w.row({"year", "variant", "firm_id", "f_intraday", "f_overnight"});
    for (const auto& s : sets)
        for (const auto& r : s.rows) {
            w.field(s.year).field(to_string(s.variant)).field(r.firm).field(r.intraday).field(r.overnight);
            w.end_row();
        }
}

}  // namespace newsflow
