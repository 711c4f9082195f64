#include <newsflow/corpus.hpp>
#include <newsflow/forecast.hpp>
#include <newsflow/rng.hpp>

#include "util.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace newsflow;
using testutil::day;

namespace {

WindowedExposure random_zbar(int firms, int first_year, int last_year, int K, std::uint64_t seed, bool equal_sessions = false) {
    CounterRng r(seed);
    WindowedExposure w;
    w.n = 4;
    w.K = K;
    for (int f = 1; f <= firms; ++f)
        for (int y = first_year; y <= last_year; ++y) w.keys.emplace_back(f, y);
    const auto n = static_cast<Eigen::Index>(w.keys.size());
    w.intraday.resize(n, K);
    w.overnight.resize(n, K);
    for (Eigen::Index i = 0; i < n; ++i)
        for (int k = 0; k < K; ++k) {
            w.intraday(i, k) = r.uniform() * 4;
            w.overnight(i, k) = equal_sessions ? w.intraday(i, k) : r.uniform() * 4;
        }
    return w;
}

/// Planted annual returns for years (first_year+1 .. last_year+1) from zbar
/// of the previous year.
std::vector<AnnualStats> planted_annual(const WindowedExposure& z, const Eigen::VectorXd& bi, const Eigen::VectorXd& bo,
                                        double noise, std::uint64_t seed) {
    CounterRng r(seed);
    std::vector<AnnualStats> out;
    for (std::size_t i = 0; i < z.keys.size(); ++i) {
        const auto [f, y] = z.keys[i];
        const auto row = static_cast<Eigen::Index>(i);
        out.push_back({f, y + 1, z.intraday.row(row).dot(bi) + noise * r.normal(),
                       z.overnight.row(row).dot(bo) + noise * r.normal(), 0.01, 0.01, 250});
    }
    return out;
}

ForecastModel manual_model(int K, Variant v = Variant::V1) {
    ForecastModel m;
    m.year = 2005;
    m.variant = v;
    m.K = K;
    m.alpha = 0.1;
    m.alpha_i = 0.05;
    m.beta_i = Eigen::VectorXd::Zero(K);
    m.beta_o = Eigen::VectorXd::Zero(K);
    return m;
}

ForecastSet forecast_set(std::vector<FirmForecast> rows) {
    ForecastSet s;
    s.year = 2005;
    std::sort(rows.begin(), rows.end(), [](auto& a, auto& b) { return a.firm < b.firm; });
    s.rows = std::move(rows);
    return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// Controls

TEST(Controls, MomentumVolatilityAndBookToMarket) {
    const TradingCalendar cal = testutil::weekdays(day(2001, 1, 1), day(2001, 12, 31));
    std::vector<Membership::Spell> spells{{1, "A", cal.first(), cal.last()}, {2, "B", cal.first(), cal.last()}};
    std::vector<PriceRow> prices;
    double p1 = 100;
    int last_month = 0;
    std::vector<double> intraday1;
    for (Date d : cal.trading_days()) {
        const int m = month_of(d);
        double r = 0.0;
        if (m != last_month) r = m == 12 ? 0.5 : 0.01;  // first day of each month
        last_month = m;
        prices.push_back({1, d, p1, p1 * std::exp(r)});
        p1 *= std::exp(r);
        intraday1.push_back(std::log(prices.back().close / prices.back().open));
        prices.push_back({2, d, 100.0, 100.0});
    }
    const ReturnPanel panel = build_returns(prices, {}, Membership(spells), cal);
    const Controls c = build_controls(panel, {{1, 2001, 5.0, 0.0, 0.1, 0.2}, {2, 2001, 3.0, std::sinh(1.0), 0.3, 0.4}});
    ASSERT_EQ(c.rows.size(), 2u);
    const ControlRow* a = c.find(1, 2001);
    const ControlRow* b = c.find(2, 2001);
    ASSERT_TRUE(a && b);
    // Values are demeaned within year, so compare differences.
    EXPECT_NEAR(a->values[0] - b->values[0], 2.0, 1e-12);
    EXPECT_NEAR(b->values[1] - a->values[1], 1.0, 1e-12);                  // asinh(sinh 1) - asinh 0
    EXPECT_NEAR(a->values[4] - b->values[4], 0.11, 1e-12);                 // Jan..Nov, December skipped
    EXPECT_NEAR(a->values[5] - b->values[5], 0.0, 1e-12);
    double m = 0, ss = 0;
    for (double v : intraday1) m += v;
    m /= static_cast<double>(intraday1.size());
    for (double v : intraday1) ss += (v - m) * (v - m);
    const double sd = std::sqrt(ss / static_cast<double>(intraday1.size() - 1));
    EXPECT_NEAR(a->values[6] - b->values[6], sd * std::sqrt(252.0), 1e-12);  // firm 2 has zero volatility
    EXPECT_NEAR(a->values[0] + b->values[0], 0.0, 1e-12);
    EXPECT_THROW(build_controls(panel, {{1, 2001, 1, 1, 1, 1}, {1, 2001, 1, 1, 1, 1}}), DataError);
}

// ---------------------------------------------------------------------------
// Forecasts

TEST(Forecasts, ZeroExposuresGiveIntercepts) {
    WindowedExposure z = random_zbar(3, 2005, 2005, 4, 1);
    z.intraday.setZero();
    z.overnight.setZero();
    ForecastModel m = manual_model(4);
    m.beta_i << 1, 2, 3, 4;
    m.beta_o << -1, 0, 5, 0;
    const ForecastSet s = forecast(m, z, {3, 1, 2, 9});
    ASSERT_EQ(s.rows.size(), 3u);
    EXPECT_EQ(s.missing, std::vector<int>{9});
    for (const auto& r : s.rows) {
        EXPECT_DOUBLE_EQ(r.intraday, 0.15);
        EXPECT_DOUBLE_EQ(r.overnight, 0.1);
    }
    EXPECT_EQ(s.rows[0].firm, 1);
}

TEST(Forecasts, UnitBetaAddsExposure) {
    WindowedExposure z = random_zbar(1, 2005, 2005, 3, 2);
    z.overnight.setZero();
    z.overnight(0, 1) = 2.0;
    ForecastModel m = manual_model(3);
    m.beta_o(1) = 1.0;
    const ForecastSet s = forecast(m, z, {1});
    EXPECT_DOUBLE_EQ(s.rows[0].overnight, 0.1 + 2.0);
    EXPECT_DOUBLE_EQ(s.rows[0].intraday, 0.15);
}

TEST(Forecasts, LinearInExposures) {
    const WindowedExposure a = random_zbar(5, 2005, 2005, 4, 3);
    const WindowedExposure b = random_zbar(5, 2005, 2005, 4, 4);
    WindowedExposure sum = a;
    sum.intraday += b.intraday;
    sum.overnight += b.overnight;
    for (Variant v : {Variant::V1, Variant::V2, Variant::V3, Variant::V4}) {
        ForecastModel m = manual_model(4, v);
        m.beta_i << 0.3, -1, 0, 2;
        m.beta_o = period_specific_beta(v) ? Eigen::VectorXd(Eigen::Vector4d(1, 0, -0.5, 0.25)) : m.beta_i;
        const auto fa = forecast(m, a, {1, 2, 3, 4, 5});
        const auto fb = forecast(m, b, {1, 2, 3, 4, 5});
        const auto fs = forecast(m, sum, {1, 2, 3, 4, 5});
        for (std::size_t i = 0; i < 5; ++i) {
            EXPECT_NEAR(fs.rows[i].intraday - 0.15, (fa.rows[i].intraday - 0.15) + (fb.rows[i].intraday - 0.15), 1e-12);
            EXPECT_NEAR(fs.rows[i].overnight - 0.1, (fa.rows[i].overnight - 0.1) + (fb.rows[i].overnight - 0.1), 1e-12);
        }
    }
}

TEST(Forecasts, VariantRegressors) {
    const WindowedExposure z = random_zbar(2, 2005, 2005, 3, 5);
    EXPECT_EQ(variant_regressor(Variant::V1, z, 1, Period::Intraday), Eigen::VectorXd(z.intraday.row(1).transpose()));
    EXPECT_EQ(variant_regressor(Variant::V4, z, 1, Period::Overnight), Eigen::VectorXd(z.overnight.row(1).transpose()));
    const Eigen::VectorXd all = (z.intraday.row(0) + z.overnight.row(0)).transpose();
    EXPECT_EQ(variant_regressor(Variant::V2, z, 0, Period::Intraday), all);
    EXPECT_EQ(variant_regressor(Variant::V3, z, 0, Period::Overnight), all);
    EXPECT_EQ(variant_from_string("V3"), Variant::V3);
    EXPECT_THROW(variant_from_string("V5"), ConfigError);
}

// ---------------------------------------------------------------------------
// fit_rolling

TEST(FitRolling, SelectsPlantedTopic) {
    const int K = 6;
    const WindowedExposure z = random_zbar(300, 2004, 2004, K, 6);
    Eigen::VectorXd bi = Eigen::VectorXd::Zero(K), bo = Eigen::VectorXd::Zero(K);
    bo(2) = 0.05;
    bi(4) = -0.05;
    const auto annual = planted_annual(z, bi, bo, 0.02, 7);
    FitOptions opt;
    opt.use_controls = false;
    opt.seed = 8;
    const ForecastModel m = fit_rolling(annual, z, nullptr, Variant::V1, 2005, opt);
    Eigen::Index arg;
    m.beta_o.cwiseAbs().maxCoeff(&arg);
    EXPECT_EQ(arg, 2);
    m.beta_i.cwiseAbs().maxCoeff(&arg);
    EXPECT_EQ(arg, 4);
    EXPECT_NEAR(m.beta_o(2), 0.05, 0.01);
    EXPECT_NEAR(m.beta_i(4), -0.05, 0.01);
    EXPECT_EQ(m.training_rows, 600);
}

TEST(FitRolling, V2AndV4AgreeWhenSessionsEqual) {
    const int K = 5;
    const WindowedExposure z = random_zbar(200, 2004, 2004, K, 9, true);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(K);
    b(1) = 0.04;
    b(3) = -0.02;
    const auto annual = planted_annual(z, b, b, 0.02, 10);
    FitOptions opt;
    opt.use_controls = false;
    const ForecastModel m2 = fit_rolling(annual, z, nullptr, Variant::V2, 2005, opt);
    const ForecastModel m4 = fit_rolling(annual, z, nullptr, Variant::V4, 2005, opt);
    // zbar = 2 zbar^p, so beta scales by 1/2 and the support is unchanged.
    for (int k = 0; k < K; ++k) {
        EXPECT_EQ(m2.beta_i(k) != 0.0, m4.beta_i(k) != 0.0);
        EXPECT_NEAR(2.0 * m2.beta_i(k), m4.beta_i(k), 1e-6);
    }
    std::vector<int> firms;
    for (int f = 1; f <= 200; ++f) firms.push_back(f);
    const WindowedExposure zt = random_zbar(200, 2005, 2005, K, 11, true);
    ForecastModel m2t = m2, m4t = m4;
    const Selection s2 = select_portfolios(forecast(m2t, zt, firms), 25);
    const Selection s4 = select_portfolios(forecast(m4t, zt, firms), 25);
    EXPECT_EQ(s2.ls_o, s4.ls_o);
    EXPECT_EQ(s2.ss_i, s4.ss_i);
}

TEST(FitRolling, NoLookAhead) {
    const int K = 4;
    WindowedExposure z = random_zbar(100, 2003, 2006, K, 12);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(K);
    b(0) = 0.05;
    auto annual = planted_annual(z, b, b, 0.02, 13);
    FitOptions opt;
    opt.use_controls = false;
    const ForecastModel before = fit_rolling(annual, z, nullptr, Variant::V1, 2005, opt);
    for (auto& s : annual)
        if (s.year > 2005) s.overnight += 10.0;
    for (std::size_t i = 0; i < z.keys.size(); ++i)
        if (z.keys[i].second >= 2005) z.overnight.row(static_cast<Eigen::Index>(i)).setConstant(99.0);
    const ForecastModel after = fit_rolling(annual, z, nullptr, Variant::V1, 2005, opt);
    EXPECT_EQ(before.beta_o, after.beta_o);
    EXPECT_EQ(before.alpha, after.alpha);
    EXPECT_EQ(before.lambda, after.lambda);
}

TEST(FitRolling, PooledYearsStackRows) {
    const WindowedExposure z = random_zbar(50, 2001, 2005, 3, 14);
    const auto annual = planted_annual(z, Eigen::Vector3d(0.1, 0, 0), Eigen::Vector3d(0, 0.1, 0), 0.02, 15);
    FitOptions opt;
    opt.use_controls = false;
    opt.pool_years = 3;
    EXPECT_EQ(fit_rolling(annual, z, nullptr, Variant::V3, 2005, opt).training_rows, 2 * 50 * 3);
    opt.pool_years = 0;
    EXPECT_THROW(fit_rolling(annual, z, nullptr, Variant::V3, 2005, opt), ConfigError);
}

// ---------------------------------------------------------------------------
// Selection

TEST(Selection, TiesGoToLowerFirmId) {
    const ForecastSet s = forecast_set({{5, 0.0, 1.0}, {3, 0.0, 1.0}, {9, 0.0, 1.0}, {1, 0.0, 0.5}});
    const Selection sel = select_portfolios(s, 2);
    EXPECT_EQ(sel.ls_o, (std::vector<int>{3, 5}));
    EXPECT_EQ(sel.lns_o, (std::vector<int>{1, 9}));
    EXPECT_EQ(sel.ss_i, (std::vector<int>{1, 3}));
    EXPECT_EQ(sel.sns_i, (std::vector<int>{5, 9}));
    EXPECT_EQ(sel.year, 2006);
    EXPECT_FALSE(sel.reduced);
}

TEST(Selection, PermutationAndMonotoneInvariance) {
    CounterRng r(16);
    std::vector<FirmForecast> rows;
    for (int f = 1; f <= 80; ++f) rows.push_back({f, r.normal(), r.normal()});
    const Selection base = select_portfolios(forecast_set(rows), 25);
    ASSERT_EQ(base.ls_o.size(), 25u);
    ASSERT_EQ(base.lns_o.size(), 55u);
    std::vector<FirmForecast> shuffled = rows;
    for (std::size_t i = shuffled.size() - 1; i > 0; --i) std::swap(shuffled[i], shuffled[r.below(i + 1)]);
    ForecastSet unsorted;
    unsorted.year = 2005;
    unsorted.rows = shuffled;
    const Selection perm = select_portfolios(unsorted, 25);
    EXPECT_EQ(perm.ls_o, base.ls_o);
    EXPECT_EQ(perm.ss_i, base.ss_i);
    std::vector<FirmForecast> mono = rows;
    for (auto& x : mono) {
        x.intraday = std::exp(3 * x.intraday) - 7;
        x.overnight = std::atan(x.overnight) * 100;
    }
    const Selection m = select_portfolios(forecast_set(mono), 25);
    EXPECT_EQ(m.ls_o, base.ls_o);
    EXPECT_EQ(m.ss_i, base.ss_i);
    EXPECT_EQ(m.sns_i, base.sns_i);
}

TEST(Selection, SmallUniverseIsFlagged) {
    const Selection s = select_portfolios(forecast_set({{1, 0, 0}, {2, 1, 1}}), 25);
    EXPECT_TRUE(s.reduced);
    EXPECT_EQ(s.ls_o.size(), 2u);
    EXPECT_TRUE(s.lns_o.empty());
}

TEST(Selection, CsvRoundTrip) {
    const Selection a = select_portfolios(forecast_set({{1, 0, 3}, {2, 1, 1}, {3, -1, 2}}), 1);
    const std::string dir = testutil::temp_dir("selection");
    write_selections_csv(dir + "/s.csv", {a});
    const auto back = read_selections_csv(dir + "/s.csv");
    ASSERT_EQ(back.size(), 1u);
    EXPECT_EQ(back[0].year, a.year);
    EXPECT_EQ(back[0].ls_o, a.ls_o);
    EXPECT_EQ(back[0].lns_o, a.lns_o);
    EXPECT_EQ(back[0].ss_i, a.ss_i);
    EXPECT_EQ(back[0].sns_i, a.sns_i);
}

// ---------------------------------------------------------------------------
// Contributions

TEST(Contributions, ZeroAtUniverseMean) {
    WindowedExposure z = random_zbar(4, 2005, 2005, 3, 17);
    // Firm 4 sits exactly at the mean of firms 1..4.
    z.overnight.row(3) = (z.overnight.row(0) + z.overnight.row(1) + z.overnight.row(2)) / 3.0;
    ForecastModel m = manual_model(3);
    m.beta_o << 1, -2, 0.5;
    const auto c = topic_contributions(m, z, 2005, {4}, {1, 2, 3, 4}, Period::Overnight);
    EXPECT_LT(c.phi.cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_TRUE(c.top.empty());
}

TEST(Contributions, BruteForceAndSupport) {
    const int K = 8;
    const WindowedExposure z = random_zbar(30, 2005, 2006, K, 18);
    ForecastModel m = manual_model(K);
    m.beta_o << 0.5, 0, -0.2, 0, 0.1, 0, 0, 0.3;
    m.beta_i << 0, -0.4, 0, 0.2, 0, 0, -0.1, 0;
    std::vector<int> universe;
    for (int f = 1; f <= 30; ++f) universe.push_back(f);
    const std::vector<int> set{2, 5, 11, 17, 29};
    for (Period p : {Period::Overnight, Period::Intraday}) {
        const auto c = topic_contributions(m, z, 2005, set, universe, p, 3);
        const RowMatrix& x = z.session(p);
        for (int k = 0; k < K; ++k) {
            double sum = 0, mean = 0;
            for (int f : set) sum += x(*z.find(f, 2005), k);
            for (int f : universe) mean += x(*z.find(f, 2005), k);
            mean /= 30.0;
            EXPECT_NEAR(c.phi(k), m.beta(p)(k) * (sum - mean), 1e-12);
            if (m.beta(p)(k) == 0.0) EXPECT_EQ(c.phi(k), 0.0);
        }
        ASSERT_LE(c.top.size(), 3u);
        const double sign = p == Period::Overnight ? 1.0 : -1.0;
        for (std::size_t i = 0; i < c.top.size(); ++i) {
            EXPECT_GT(sign * c.top[i].value, 0.0);
            EXPECT_NE(m.beta(p)(c.top[i].topic), 0.0);
            if (i) EXPECT_GE(sign * c.top[i - 1].value, sign * c.top[i].value);
        }
    }
}

TEST(Contributions, UseOnlyTheRequestedYear) {
    WindowedExposure z = random_zbar(10, 2005, 2006, 3, 19);
    ForecastModel m = manual_model(3);
    m.beta_o << 1, 1, 1;
    const auto a = topic_contributions(m, z, 2005, {1, 2}, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, Period::Overnight);
    for (std::size_t i = 0; i < z.keys.size(); ++i)
        if (z.keys[i].second == 2006) z.overnight.row(static_cast<Eigen::Index>(i)).setConstant(1e6);
    const auto b = topic_contributions(m, z, 2005, {1, 2}, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, Period::Overnight);
    EXPECT_EQ(a.phi, b.phi);
    EXPECT_THROW(topic_contributions(m, z, 2005, {}, {1}, Period::Overnight), DataError);
}

TEST(ModelJson, RoundTrip) {
    ForecastModel m = manual_model(4, Variant::V3);
    m.beta_i << 0, 1.5, 0, -2;
    m.beta_o << 0.25, 0, 0, 0;
    m.gamma = Eigen::VectorXd::LinSpaced(kControlCount, -1, 1);
    m.lambda = 0.0123;
    m.dropped_topics = {2};
    const std::string dir = testutil::temp_dir("fmodel");
    write_models_json(dir + "/m.json", {m, m});
    const auto back = read_models_json(dir + "/m.json");
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[1].variant, Variant::V3);
    EXPECT_EQ(back[1].beta_i, m.beta_i);
    EXPECT_EQ(back[1].beta_o, m.beta_o);
    EXPECT_EQ(back[1].gamma, m.gamma);
    EXPECT_EQ(back[1].alpha_i, m.alpha_i);
    EXPECT_EQ(back[1].lambda, m.lambda);
    EXPECT_EQ(back[1].dropped_topics, m.dropped_topics);
}
