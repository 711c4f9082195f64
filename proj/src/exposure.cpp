#include <newsflow/corpus.hpp>
#include <newsflow/csv.hpp>
#include <newsflow/exposure.hpp>

#include <algorithm>
#include <array>
#include <cstring>
#include <fstream>

namespace newsflow {

std::optional<std::size_t> ExposurePanel::find(int firm, long long t) const {
    auto it = std::lower_bound(keys.begin(), keys.end(), Key{firm, t});
    if (it == keys.end() || *it != Key{firm, t}) return std::nullopt;
    return static_cast<std::size_t>(it - keys.begin());
}

std::optional<std::size_t> WindowedExposure::find(int firm, int year) const {
    auto it = std::lower_bound(keys.begin(), keys.end(), std::make_pair(firm, year));
    if (it == keys.end() || *it != std::make_pair(firm, year)) return std::nullopt;
    return static_cast<std::size_t>(it - keys.begin());
}

std::string_view to_string(PersistenceSession s) {
    switch (s) {
        case PersistenceSession::Intraday: return "intraday";
        case PersistenceSession::Overnight: return "overnight";
        case PersistenceSession::All: return "all";
    }
    return "unknown";
}

std::string_view to_string(FixedEffects f) {
    switch (f) {
        case FixedEffects::None: return "none";
        case FixedEffects::Topic: return "topic";
        case FixedEffects::Firm: return "firm";
        case FixedEffects::Both: return "both";
    }
    return "unknown";
}

namespace {

long long period_key(Granularity g, Date day) {
    return g == Granularity::Annual ? year_of(day) : day.time_since_epoch().count();
}

void validate_inputs(const Corpus& corpus, const TopicModel& model, const ExposureOptions& options) {
    if (model.article_ids.size() != corpus.articles.size() ||
        static_cast<std::size_t>(model.theta.rows()) != corpus.articles.size())
        throw DataError("topic model covers " + std::to_string(model.article_ids.size()) + " articles but corpus has " +
                        std::to_string(corpus.articles.size()));
    for (std::size_t i = 0; i < corpus.articles.size(); ++i) {
        const Article& a = corpus.articles[i];
        if (model.article_ids[i] != a.id)
            throw DataError("topic model article order differs from corpus at '" + a.id + "'");
        for (int f : a.firm_ids)
            if (!options.firms.count(f))
                throw DataError("article '" + a.id + "' references unknown firm " + std::to_string(f));
    }
}

ExposurePanel empty_panel(const Corpus& corpus, const TopicModel& model, const ExposureOptions& options) {
    std::vector<ExposurePanel::Key> keys;
    for (const auto& a : corpus.articles)
        for (int f : a.firm_ids) keys.emplace_back(f, period_key(options.granularity, a.session.trading_day));
    if (options.granularity == Granularity::Annual)
        for (const auto& [f, y] : options.universe) keys.emplace_back(f, y);
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    ExposurePanel p;
    p.granularity = options.granularity;
    p.K = model.K;
    p.keys = std::move(keys);
    p.intraday = RowMatrix::Zero(static_cast<Eigen::Index>(p.keys.size()), model.K);
    p.overnight = RowMatrix::Zero(static_cast<Eigen::Index>(p.keys.size()), model.K);
    return p;
}

}  // namespace

ExposurePanel compute_exposures(const Corpus& corpus, const TopicModel& model, const ExposureOptions& options) {
    validate_inputs(corpus, model, options);
    ExposurePanel p = empty_panel(corpus, model, options);
    // Contributions per (row, session) in corpus order.
    std::vector<std::vector<std::int32_t>> contrib(p.rows() * 2);
    for (std::size_t i = 0; i < corpus.articles.size(); ++i) {
        const Article& a = corpus.articles[i];
        const long long t = period_key(options.granularity, a.session.trading_day);
        for (int f : a.firm_ids)
            contrib[*p.find(f, t) * 2 + static_cast<std::size_t>(index_of(a.session.period))].push_back(
                static_cast<std::int32_t>(i));
    }
    const auto n = static_cast<long>(contrib.size());
#pragma omp parallel for schedule(dynamic, 64) if (options.parallel)
    for (long c = 0; c < n; ++c) {
        const auto row = static_cast<Eigen::Index>(c / 2);
        RowMatrix& dst = (c % 2) == index_of(Period::Intraday) ? p.intraday : p.overnight;
        for (auto i : contrib[c]) dst.row(row) += model.theta.row(i);
    }
    return p;
}

ExposurePanel compute_exposures_serial(const Corpus& corpus, const TopicModel& model, const ExposureOptions& options) {
    validate_inputs(corpus, model, options);
    ExposurePanel p = empty_panel(corpus, model, options);
    for (std::size_t i = 0; i < corpus.articles.size(); ++i) {
        const Article& a = corpus.articles[i];
        const long long t = period_key(options.granularity, a.session.trading_day);
        RowMatrix& dst = a.session.period == Period::Intraday ? p.intraday : p.overnight;
        for (int f : a.firm_ids) {
            const auto row = static_cast<Eigen::Index>(*p.find(f, t));
            for (int k = 0; k < model.K; ++k) dst(row, k) += model.theta(static_cast<Eigen::Index>(i), k);
        }
    }
    return p;
}

ExposurePanel aggregate_annual(const ExposurePanel& daily) {
    if (daily.granularity != Granularity::Daily) throw DataError("aggregate_annual expects a daily panel");
    ExposurePanel a;
    a.granularity = Granularity::Annual;
    a.K = daily.K;
    for (const auto& [f, d] : daily.keys) a.keys.emplace_back(f, year_of(Date{std::chrono::days{d}}));
    a.keys.erase(std::unique(a.keys.begin(), a.keys.end()), a.keys.end());
    a.intraday = RowMatrix::Zero(static_cast<Eigen::Index>(a.keys.size()), a.K);
    a.overnight = RowMatrix::Zero(static_cast<Eigen::Index>(a.keys.size()), a.K);
    for (std::size_t r = 0; r < daily.rows(); ++r) {
        const auto [f, d] = daily.keys[r];
        const auto row = static_cast<Eigen::Index>(*a.find(f, year_of(Date{std::chrono::days{d}})));
        a.intraday.row(row) += daily.intraday.row(static_cast<Eigen::Index>(r));
        a.overnight.row(row) += daily.overnight.row(static_cast<Eigen::Index>(r));
    }
    return a;
}

WindowedExposure window_sum(const ExposurePanel& annual, int n) {
    if (annual.granularity != Granularity::Annual) throw DataError("window_sum expects an annual panel");
    if (n < 1) throw ConfigError("window length must be at least 1");
    WindowedExposure w;
    w.n = n;
    w.K = annual.K;
    for (std::size_t r = 0; r < annual.rows(); ++r) {
        const auto [f, t] = annual.keys[r];
        bool complete = true;
        for (int u = 1; u < n && complete; ++u) complete = annual.find(f, t - u).has_value();
        if (complete) {
            w.keys.emplace_back(f, static_cast<int>(t));
        } else {
            w.omitted.emplace_back(f, static_cast<int>(t));
        }
    }
    w.intraday = RowMatrix::Zero(static_cast<Eigen::Index>(w.keys.size()), w.K);
    w.overnight = RowMatrix::Zero(static_cast<Eigen::Index>(w.keys.size()), w.K);
    for (std::size_t r = 0; r < w.keys.size(); ++r) {
        const auto [f, t] = w.keys[r];
        for (int u = n - 1; u >= 0; --u) {
            const auto row = static_cast<Eigen::Index>(*annual.find(f, t - u));
            w.intraday.row(static_cast<Eigen::Index>(r)) += annual.intraday.row(row);
            w.overnight.row(static_cast<Eigen::Index>(r)) += annual.overnight.row(row);
        }
    }
    return w;
}

PersistenceResult persistence_regression(const ExposurePanel& annual, PersistenceSession session, FixedEffects fe) {
    if (annual.granularity != Granularity::Annual) throw DataError("persistence_regression expects an annual panel");
    const RowMatrix z = session == PersistenceSession::Intraday    ? annual.intraday
                        : session == PersistenceSession::Overnight ? annual.overnight
                                                                    : annual.combined();
    constexpr int kTrailing = 4;
    std::vector<std::array<std::size_t, kTrailing + 1>> windows;  // rows t-3..t, then t+1
    for (std::size_t r = 0; r < annual.rows(); ++r) {
        const auto [f, t] = annual.keys[r];
        std::array<std::size_t, kTrailing + 1> rows{};
        bool ok = true;
        for (int u = 0; u <= kTrailing && ok; ++u) {
            auto idx = annual.find(f, t - (kTrailing - 1) + u);
            ok = idx.has_value();
            if (ok) rows[static_cast<std::size_t>(u)] = *idx;
        }
        if (ok) windows.push_back(rows);
    }
    const auto K = static_cast<std::size_t>(annual.K);
    const auto n = static_cast<Eigen::Index>(windows.size() * K);
    if (n == 0) throw DataError("persistence_regression: no firm has five consecutive years");
    Eigen::VectorXd y(n);
    Eigen::MatrixXd X(n, 1);
    std::vector<long long> topic(static_cast<std::size_t>(n));
    std::vector<long long> firm(static_cast<std::size_t>(n));
    Eigen::Index i = 0;
    for (const auto& w : windows) {
        const int f = annual.keys[w[0]].first;
        for (std::size_t k = 0; k < K; ++k, ++i) {
            double m = 0.0;
            for (int u = 0; u < kTrailing; ++u) m += z(static_cast<Eigen::Index>(w[u]), static_cast<Eigen::Index>(k));
            X(i, 0) = m / kTrailing;
            y(i) = z(static_cast<Eigen::Index>(w[kTrailing]), static_cast<Eigen::Index>(k));
            topic[static_cast<std::size_t>(i)] = static_cast<long long>(k);
            firm[static_cast<std::size_t>(i)] = f;
        }
    }
    PanelSpec spec;
    if (fe == FixedEffects::Topic || fe == FixedEffects::Both) spec.fixed_effects.push_back(topic);
    if (fe == FixedEffects::Firm || fe == FixedEffects::Both) spec.fixed_effects.push_back(firm);
    spec.clusters = {topic, firm};
    PersistenceResult out;
    out.regression = panel_fe(y, X, {"rho"}, spec);
    const int idx = out.regression.index("rho");
    out.rho = out.regression.coefficients(idx);
    out.se = out.regression.se(idx);
    out.p_value = out.regression.p_value(idx);
    out.adj_r2 = out.regression.adj_r2;
    out.nobs = out.regression.nobs;
    return out;
}

// ---------------------------------------------------------------------------
// Serialization

void write_exposure_csv(const std::string& path, const ExposurePanel& panel) {
    CsvWriter w(path);
    w.row({"firm", "topic", "period", "session", "value"});
    for (std::size_t r = 0; r < panel.rows(); ++r) {
        const auto [f, t] = panel.keys[r];
        const std::string period =
            panel.granularity == Granularity::Annual ? std::to_string(t) : format_date(Date{std::chrono::days{t}});
        for (Period p : {Period::Intraday, Period::Overnight}) {
            const RowMatrix& m = panel.session(p);
            for (int k = 0; k < panel.K; ++k) {
                w.field(f).field(k).field(period).field(to_string(p));
                w.field(m(static_cast<Eigen::Index>(r), k));
                w.end_row();
            }
        }
    }
}

ExposurePanel read_exposure_csv(const std::string& path) {
    const CsvTable t = read_csv(path);
    const auto cf = t.column("firm");
    const auto ck = t.column("topic");
    const auto cp = t.column("period");
    const auto cs = t.column("session");
    const auto cv = t.column("value");
    ExposurePanel p;
    p.granularity = Granularity::Annual;
    if (!t.rows.empty() && t.rows.front().at(cp).find('-') != std::string::npos) p.granularity = Granularity::Daily;
    struct Cell {
        ExposurePanel::Key key;
        int k;
        Period s;
        double v;
    };
    std::vector<Cell> cells;
    cells.reserve(t.rows.size());
    for (const auto& row : t.rows) {
        const int f = static_cast<int>(parse_long(row.at(cf), "firm"));
        const long long per = p.granularity == Granularity::Annual
                                  ? parse_long(row.at(cp), "period")
                                  : parse_date(row.at(cp)).time_since_epoch().count();
        const int k = static_cast<int>(parse_long(row.at(ck), "topic"));
        if (k < 0) throw DataError(path + ": negative topic index");
        cells.push_back({{f, per}, k, period_from_string(row.at(cs)), parse_double(row.at(cv), "value")});
        p.K = std::max(p.K, k + 1);
        p.keys.push_back({f, per});
    }
    std::sort(p.keys.begin(), p.keys.end());
    p.keys.erase(std::unique(p.keys.begin(), p.keys.end()), p.keys.end());
    p.intraday = RowMatrix::Zero(static_cast<Eigen::Index>(p.keys.size()), p.K);
    p.overnight = RowMatrix::Zero(static_cast<Eigen::Index>(p.keys.size()), p.K);
    for (const auto& c : cells) {
        RowMatrix& m = c.s == Period::Intraday ? p.intraday : p.overnight;
        m(static_cast<Eigen::Index>(*p.find(c.key.first, c.key.second)), c.k) = c.v;
    }
    return p;
}

namespace {
constexpr char kExposureMagic[4] = {'N', 'F', 'E', 'X'};
}

void write_exposure_binary(const std::string& path, const ExposurePanel& panel) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path + "'");
    auto put = [&](const auto& v) { out.write(reinterpret_cast<const char*>(&v), sizeof(v)); };
    out.write(kExposureMagic, 4);
    put(kExposureFormatVersion);
    put(static_cast<std::uint8_t>(panel.granularity == Granularity::Daily));
    put(static_cast<std::int32_t>(panel.K));
    put(static_cast<std::uint64_t>(panel.rows()));
    for (const auto& [f, t] : panel.keys) {
        put(static_cast<std::int32_t>(f));
        put(static_cast<std::int64_t>(t));
    }
    out.write(reinterpret_cast<const char*>(panel.intraday.data()), static_cast<std::streamsize>(panel.intraday.size() * 8));
    out.write(reinterpret_cast<const char*>(panel.overnight.data()),
              static_cast<std::streamsize>(panel.overnight.size() * 8));
    if (!out) throw DataError("failed writing '" + path + "'");
}

ExposurePanel read_exposure_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    auto get = [&](auto& v) {
        in.read(reinterpret_cast<char*>(&v), sizeof(v));
        if (!in) throw DataError(path + ": truncated exposure file");
    };
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kExposureMagic, 4) != 0) throw DataError(path + ": not an exposure file");
    std::uint32_t version = 0;
    get(version);
    if (version != kExposureFormatVersion) throw DataError(path + ": unsupported exposure version");
    std::uint8_t daily = 0;
    std::int32_t K = 0;
    std::uint64_t rows = 0;
    get(daily);
    get(K);
    get(rows);
    ExposurePanel p;
    p.granularity = daily ? Granularity::Daily : Granularity::Annual;
    p.K = K;
    p.keys.resize(rows);
    for (auto& key : p.keys) {
        std::int32_t f = 0;
        std::int64_t t = 0;
        get(f);
        get(t);
        key = {f, t};
    }
    p.intraday.resize(static_cast<Eigen::Index>(rows), K);
    p.overnight.resize(static_cast<Eigen::Index>(rows), K);
    in.read(reinterpret_cast<char*>(p.intraday.data()), static_cast<std::streamsize>(p.intraday.size() * 8));
    in.read(reinterpret_cast<char*>(p.overnight.data()), static_cast<std::streamsize>(p.overnight.size() * 8));
    if (!in) throw DataError(path + ": truncated exposure file");
    return p;
}

}  // namespace newsflow
