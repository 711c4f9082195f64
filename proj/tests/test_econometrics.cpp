#include <newsflow/econometrics.hpp>
#include <newsflow/rng.hpp>

#include "util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>

using namespace newsflow;

namespace {

Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& X) {
    Eigen::MatrixXd out(X.rows(), X.cols() + 1);
    out.col(0).setOnes();
    out.rightCols(X.cols()) = X;
    return out;
}

struct Data {
    Eigen::VectorXd y;
    Eigen::MatrixXd X;
};

Data heteroskedastic(int n, std::uint64_t seed) {
    CounterRng r(seed);
    Data d;
    Eigen::MatrixXd x(n, 2);
    d.y.resize(n);
    for (int i = 0; i < n; ++i) {
        x(i, 0) = r.normal();
        x(i, 1) = r.uniform();
        d.y(i) = 1 + 2 * x(i, 0) - x(i, 1) + (0.5 + std::abs(x(i, 0))) * r.normal();
    }
    d.X = with_intercept(x);
    return d;
}

/// (X'X)^-1 M (X'X)^-1 with the meat built from per-group score sums.
Eigen::MatrixXd hand_cluster(const Eigen::MatrixXd& X, const Eigen::VectorXd& e, const std::vector<long long>& g) {
    std::map<long long, Eigen::VectorXd> sums;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        auto it = sums.find(g[static_cast<std::size_t>(i)]);
        if (it == sums.end()) it = sums.emplace(g[static_cast<std::size_t>(i)], Eigen::VectorXd::Zero(X.cols())).first;
        it->second += X.row(i).transpose() * e(i);
    }
    Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(X.cols(), X.cols());
    for (const auto& [k, s] : sums) meat += s * s.transpose();
    const Eigen::MatrixXd inv = (X.transpose() * X).inverse();
    return inv * meat * inv;
}

}  // namespace

// ---------------------------------------------------------------------------
// OLS

TEST(Ols, ExactFit) {
    CounterRng r(1);
    Eigen::MatrixXd X = with_intercept(Eigen::MatrixXd::NullaryExpr(30, 3, [&] { return r.normal(); }));
    const Eigen::Vector4d b(0.5, -1, 2, 3);
    const OlsFit f = ols_fit(X * b, X);
    EXPECT_LT((f.beta - b).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT(f.residuals.cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(f.r2, 1.0, 1e-12);
}

TEST(Ols, ThreePointExample) {
    Eigen::MatrixXd X(3, 2);
    X << 1, 0, 1, 1, 1, 2;
    const Eigen::Vector3d y(1, 3, 5);
    const RegressionResult r = ols(y, X, {"const", "x"});
    EXPECT_NEAR(r.coefficients(r.index("x")), 2.0, 1e-14);
    EXPECT_NEAR(r.coefficients(r.index("const")), 1.0, 1e-14);
    EXPECT_THROW(r.index("missing"), DataError);
}

TEST(Ols, InterceptOnlyIsMean) {
    const Eigen::VectorXd y = (Eigen::VectorXd(5) << 1, 4, 2, 8, 5).finished();
    const RegressionResult r = ols(y, Eigen::MatrixXd::Ones(5, 1));
    EXPECT_NEAR(r.coefficients(0), 4.0, 1e-14);
    const double sd = std::sqrt((y.array() - 4.0).square().sum() / 4.0);
    EXPECT_NEAR(r.se(0), sd / std::sqrt(5.0), 1e-13);
    EXPECT_EQ(r.residual_dof, 4);
}

TEST(Ols, RankDeficientNamesColumns) {
    Eigen::MatrixXd X(4, 3);
    X << 1, 1, 2, 1, 2, 4, 1, 3, 6, 1, 4, 8;
    try {
        ols_fit(Eigen::Vector4d(1, 2, 3, 4), X, {"const", "a", "twice_a"});
        FAIL() << "expected NumericalError";
    } catch (const NumericalError& e) {
        EXPECT_NE(std::string(e.what()).find("twice_a"), std::string::npos) << e.what();
    }
}

TEST(Ols, WeightedMatchesScaledRows) {
    const Data d = heteroskedastic(50, 2);
    CounterRng r(3);
    Eigen::VectorXd w(50);
    for (int i = 0; i < 50; ++i) w(i) = 0.5 + r.uniform();
    const OlsFit f = ols_fit(d.y, d.X, {}, &w);
    const Eigen::VectorXd s = w.cwiseSqrt();
    const Eigen::VectorXd b = (s.asDiagonal() * d.X).colPivHouseholderQr().solve(s.asDiagonal() * d.y);
    EXPECT_LT((f.beta - b).cwiseAbs().maxCoeff(), 1e-12);
}

// ---------------------------------------------------------------------------
// Newey-West and White

TEST(NeweyWest, ZeroLagsEqualsWhite) {
    const Data d = heteroskedastic(200, 4);
    const OlsFit f = ols_fit(d.y, d.X);
    const RegressionResult nw = newey_west(f, 0);
    const RegressionResult wh = white(f);
    EXPECT_LT((nw.covariance - wh.covariance).cwiseAbs().maxCoeff(), 1e-10);
    // HC0 by hand.
    const Eigen::MatrixXd inv = (d.X.transpose() * d.X).inverse();
    const Eigen::MatrixXd meat = d.X.transpose() * f.residuals.array().square().matrix().asDiagonal() * d.X;
    EXPECT_LT(testutil::rel_err(wh.covariance, inv * meat * inv), 1e-10);
}

TEST(NeweyWest, AutomaticLag) {
    EXPECT_EQ(newey_west_auto_lag(100), 4);
    EXPECT_EQ(newey_west_auto_lag(1000), 6);
    EXPECT_EQ(newey_west_auto_lag(10), 2);
    const Data d = heteroskedastic(100, 5);
    EXPECT_EQ(newey_west(ols_fit(d.y, d.X)).nw_lags, 4);
}

TEST(NeweyWest, HandBartlettMeat) {
    const Data d = heteroskedastic(40, 6);
    const OlsFit f = ols_fit(d.y, d.X);
    const int L = 3;
    Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(3, 3);
    for (int t = 0; t < 40; ++t)
        for (int s = 0; s < 40; ++s) {
            const int lag = std::abs(t - s);
            if (lag > L) continue;
            meat += (1.0 - lag / (L + 1.0)) * f.residuals(t) * f.residuals(s) * d.X.row(t).transpose() * d.X.row(s);
        }
    const Eigen::MatrixXd inv = (d.X.transpose() * d.X).inverse();
    EXPECT_LT(testutil::rel_err(newey_west(f, L).covariance, inv * meat * inv), 1e-10);
}

TEST(NeweyWest, MonteCarloCoverage) {
    // AR(1) errors, intercept-only: average NW variance of the mean tracks
    // the sampling variance across replications.
    const int T = 1000, reps = 4000;
    const double rho = 0.2;
    CounterRng r(7);
    double sum_m = 0, sum_m2 = 0, sum_v = 0;
    for (int rep = 0; rep < reps; ++rep) {
        Eigen::VectorXd y(T);
        double e = r.normal() / std::sqrt(1 - rho * rho);
        for (int t = 0; t < T; ++t) {
            e = rho * e + r.normal();
            y(t) = e;
        }
        const RegressionResult res = newey_west(ols_fit(y, Eigen::MatrixXd::Ones(T, 1)), 15);
        sum_m += res.coefficients(0);
        sum_m2 += res.coefficients(0) * res.coefficients(0);
        sum_v += res.covariance(0, 0);
    }
    const double mean = sum_m / reps;
    const double emp = sum_m2 / reps - mean * mean;
    const double nw = sum_v / reps;
    EXPECT_NEAR(nw / emp, 1.0, 0.10);
}

// ---------------------------------------------------------------------------
// Clustering

TEST(Cluster, SingletonsEqualWhite) {
    const Data d = heteroskedastic(60, 8);
    const OlsFit f = ols_fit(d.y, d.X);
    std::vector<long long> ids(60);
    for (int i = 0; i < 60; ++i) ids[static_cast<std::size_t>(i)] = 1000 - i;
    EXPECT_LT((clustered(f, ids).covariance - white(f).covariance).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Cluster, HandTwoClusterSandwich) {
    Eigen::MatrixXd X(4, 2);
    X << 1, 0, 1, 1, 1, 2, 1, 3;
    const Eigen::Vector4d y(0, 2, 1, 4);
    const OlsFit f = ols_fit(y, X);
    const std::vector<long long> g{7, 7, 9, 9};
    const RegressionResult r = clustered(f, g);
    EXPECT_LT(testutil::rel_err(r.covariance, hand_cluster(X, f.residuals, g)), 1e-12);
    EXPECT_EQ(r.clusters, 2);
    ClusterOptions fs;
    fs.finite_sample = true;
    EXPECT_LT(testutil::rel_err(clustered(f, g, nullptr, fs).covariance,
                                hand_cluster(X, f.residuals, g) * (2.0 / 1.0) * (3.0 / 2.0)),
              1e-12);
}

TEST(Cluster, TwoWayCombination) {
    const Data d = heteroskedastic(120, 9);
    const OlsFit f = ols_fit(d.y, d.X);
    std::vector<long long> a(120), b(120), ab(120);
    for (int i = 0; i < 120; ++i) {
        a[static_cast<std::size_t>(i)] = i % 10;
        b[static_cast<std::size_t>(i)] = i / 12;
        ab[static_cast<std::size_t>(i)] = (i % 10) * 100 + i / 12;
    }
    const RegressionResult r = clustered(f, a, &b);
    const Eigen::MatrixXd want =
        hand_cluster(d.X, f.residuals, a) + hand_cluster(d.X, f.residuals, b) - hand_cluster(d.X, f.residuals, ab);
    if (!r.psd_repaired) EXPECT_LT(testutil::rel_err(r.covariance, want), 1e-10);
    EXPECT_EQ(r.clusters, 10);
    EXPECT_EQ(r.se_type, CovarianceType::Cluster2);
}

TEST(Cluster, ConstantDimensionRejected) {
    const Data d = heteroskedastic(30, 10);
    const OlsFit f = ols_fit(d.y, d.X);
    std::vector<long long> a(30), one(30, 5);
    for (int i = 0; i < 30; ++i) a[static_cast<std::size_t>(i)] = i % 6;
    EXPECT_THROW(clustered(f, a, &one), DataError);
    EXPECT_THROW(clustered(f, one), DataError);
}

TEST(Cluster, NegativeEigenvaluesAreTruncated) {
    // Perfectly nested dimensions make V12 equal V1, so V = V2 stays PSD;
    // an adversarial split can go negative and must be repaired to PSD.
    CounterRng r(11);
    for (int trial = 0; trial < 50; ++trial) {
        const Data d = heteroskedastic(12, 100 + trial);
        const OlsFit f = ols_fit(d.y, d.X);
        std::vector<long long> a(12), b(12);
        for (int i = 0; i < 12; ++i) {
            a[static_cast<std::size_t>(i)] = static_cast<long long>(r.below(3));
            b[static_cast<std::size_t>(i)] = static_cast<long long>(r.below(3));
        }
        try {
            const RegressionResult res = clustered(f, a, &b);
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(res.covariance);
            EXPECT_GE(es.eigenvalues().minCoeff(), -1e-12 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff()));
        } catch (const DataError&) {
        }
    }
}

// ---------------------------------------------------------------------------
// Fixed effects

namespace {

struct Panel {
    Eigen::VectorXd y;
    Eigen::MatrixXd X;
    std::vector<long long> firm, year;
};

Panel random_panel(int firms, int years, std::uint64_t seed, bool unbalanced = true) {
    CounterRng r(seed);
    Panel p;
    std::vector<double> ys;
    std::vector<std::array<double, 2>> xs;
    for (int f = 0; f < firms; ++f) {
        const double fe = r.normal() * 3;
        for (int t = 0; t < years; ++t) {
            if (unbalanced && r.uniform() < 0.2) continue;
            const double x1 = r.normal() + 0.5 * fe, x2 = r.uniform() + 0.1 * t;
            xs.push_back({x1, x2});
            ys.push_back(fe + 0.3 * t + 1.5 * x1 - 2 * x2 + r.normal());
            p.firm.push_back(f);
            p.year.push_back(2000 + t);
        }
    }
    const auto n = static_cast<Eigen::Index>(ys.size());
    p.y.resize(n);
    p.X.resize(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        p.y(i) = ys[static_cast<std::size_t>(i)];
        p.X(i, 0) = xs[static_cast<std::size_t>(i)][0];
        p.X(i, 1) = xs[static_cast<std::size_t>(i)][1];
    }
    return p;
}

}  // namespace

TEST(FixedEffects, TwoWayEqualsDummyOls) {
    const Panel p = random_panel(15, 8, 12);
    PanelSpec spec;
    spec.fixed_effects = {p.firm, p.year};
    spec.tolerance = 1e-14;
    const RegressionResult fe = panel_fe(p.y, p.X, {"x1", "x2"}, spec);
    const auto n = p.y.size();
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, 2 + 15 + 7);
    D.leftCols(2) = p.X;
    for (Eigen::Index i = 0; i < n; ++i) {
        D(i, 2 + p.firm[static_cast<std::size_t>(i)]) = 1;
        if (p.year[static_cast<std::size_t>(i)] > 2000) D(i, 17 + p.year[static_cast<std::size_t>(i)] - 2001) = 1;
    }
    const Eigen::VectorXd b = D.colPivHouseholderQr().solve(p.y);
    EXPECT_NEAR(fe.coefficients(0), b(0), 1e-8);
    EXPECT_NEAR(fe.coefficients(1), b(1), 1e-8);
    EXPECT_EQ(fe.nobs, static_cast<std::size_t>(n));
}

TEST(FixedEffects, FrischWaughOneWay) {
    const Panel p = random_panel(20, 6, 13);
    PanelSpec spec;
    spec.fixed_effects = {p.firm};
    const RegressionResult fe = panel_fe(p.y, p.X, {"x1", "x2"}, spec);
    // Subtract group means by hand, then OLS without intercept.
    std::map<long long, std::pair<Eigen::Vector3d, int>> means;
    for (Eigen::Index i = 0; i < p.y.size(); ++i) {
        auto& m = means.try_emplace(p.firm[static_cast<std::size_t>(i)], Eigen::Vector3d::Zero(), 0).first->second;
        m.first += Eigen::Vector3d(p.y(i), p.X(i, 0), p.X(i, 1));
        ++m.second;
    }
    Eigen::VectorXd yd(p.y.size());
    Eigen::MatrixXd xd(p.y.size(), 2);
    for (Eigen::Index i = 0; i < p.y.size(); ++i) {
        const auto& m = means[p.firm[static_cast<std::size_t>(i)]];
        const Eigen::Vector3d mu = m.first / m.second;
        yd(i) = p.y(i) - mu(0);
        xd(i, 0) = p.X(i, 0) - mu(1);
        xd(i, 1) = p.X(i, 1) - mu(2);
    }
    const Eigen::VectorXd b = xd.colPivHouseholderQr().solve(yd);
    EXPECT_NEAR(fe.coefficients(0), b(0), 1e-10);
    EXPECT_NEAR(fe.coefficients(1), b(1), 1e-10);
}

TEST(FixedEffects, DemeanIsIdempotent) {
    const Panel p = random_panel(10, 7, 14);
    Eigen::MatrixXd M(p.y.size(), 3);
    M << p.y, p.X;
    demean(M, {p.firm, p.year}, 1e-14);
    Eigen::MatrixXd again = M;
    demean(again, {p.firm, p.year}, 1e-14);
    EXPECT_LT((again - M).cwiseAbs().maxCoeff(), 1e-10);
    // Every group mean is zero.
    std::map<long long, double> s;
    for (Eigen::Index i = 0; i < M.rows(); ++i) s[p.firm[static_cast<std::size_t>(i)]] += M(i, 1);
    for (const auto& [k, v] : s) EXPECT_NEAR(v, 0.0, 1e-9);
}

TEST(FixedEffects, AbsorbedRegressorIsNamed) {
    Panel p = random_panel(6, 5, 15, false);
    for (Eigen::Index i = 0; i < p.y.size(); ++i) p.X(i, 1) = static_cast<double>(p.firm[static_cast<std::size_t>(i)]);
    PanelSpec spec;
    spec.fixed_effects = {p.firm};
    try {
        panel_fe(p.y, p.X, {"x1", "firm_level"}, spec);
        FAIL() << "expected NumericalError";
    } catch (const NumericalError& e) {
        EXPECT_NE(std::string(e.what()).find("firm_level"), std::string::npos) << e.what();
    }
}

// ---------------------------------------------------------------------------
// Wald

namespace {

RegressionResult fake_result(Eigen::VectorXd b, Eigen::MatrixXd V) {
    RegressionResult r;
    r.coefficients = std::move(b);
    r.covariance = std::move(V);
    return r;
}

}  // namespace

TEST(Wald, EqualCoefficientsGivePOne) {
    const auto r = fake_result(Eigen::Vector3d(1, 1, 2), Eigen::Matrix3d::Identity());
    const WaldResult w = wald_equality(r, {{0, 1}});
    EXPECT_EQ(w.statistic, 0.0);
    EXPECT_EQ(w.p_value, 1.0);
}

TEST(Wald, SingleRestrictionIsSquaredZ) {
    Eigen::Matrix3d V;
    V << 0.04, 0.01, 0, 0.01, 0.09, 0, 0, 0, 1;
    const auto r = fake_result(Eigen::Vector3d(0.5, -0.2, 3), V);
    const WaldResult w = wald_equality(r, {{0, 1}});
    const double z = 0.7 / std::sqrt(0.04 + 0.09 - 0.02);
    EXPECT_NEAR(w.statistic, z * z, 1e-12);
    EXPECT_NEAR(w.p_value, std::erfc(std::abs(z) / std::sqrt(2.0)), 1e-10);
    const WaldResult w4 = wald_equality(fake_result(r.coefficients, 4 * V), {{0, 1}});
    EXPECT_NEAR(w4.statistic, w.statistic / 4, 1e-12);
}

TEST(Wald, PValueMonotoneInDistance) {
    double last = 1.0;
    for (double d = 0.1; d < 3; d += 0.1) {
        const WaldResult w = wald_equality(fake_result(Eigen::Vector3d(d, 0, d / 2), Eigen::Matrix3d::Identity()),
                                           {{0, 1}, {0, 2}});
        EXPECT_LT(w.p_value, last);
        last = w.p_value;
    }
}

TEST(Wald, ClusteredUsesFForm) {
    auto r = fake_result(Eigen::Vector2d(1, 0), Eigen::Matrix2d::Identity());
    r.clusters = 11;
    const WaldResult w = wald_equality(r, {{0, 1}});
    EXPECT_NEAR(w.statistic, 0.5, 1e-12);
    EXPECT_EQ(w.denominator_dof, 10);
    EXPECT_THROW(wald_equality(r, {}), ConfigError);
}

TEST(Stars, Thresholds) {
    EXPECT_EQ(stars(0.005), "***");
    EXPECT_EQ(stars(0.02), "**");
    EXPECT_EQ(stars(0.07), "*");
    EXPECT_EQ(stars(0.5), "");
}

// ---------------------------------------------------------------------------
// Correlations

TEST(Correlation, ContinuationGivesOne) {
    std::vector<AnnualReturnRow> rows;
    CounterRng r(16);
    // Every firm has the same return every year, varying across firms.
    for (int f = 0; f < 40; ++f) {
        const double ri = r.normal(), ro = r.normal();
        for (int y = 2000; y < 2004; ++y) rows.push_back({f, y, ri, ro});
    }
    const auto cells = correlation_table(rows);
    ASSERT_EQ(cells.size(), 9u);
    for (const auto& c : cells) {
        if ((c.lag == "r_intra_t" && c.lead == "r_intra_t1") || (c.lag == "r_over_t" && c.lead == "r_over_t1") ||
            (c.lag == "r_t" && c.lead == "r_t1"))
            EXPECT_NEAR(c.correlation, 1.0, 1e-12);
        EXPECT_EQ(c.nobs, 120u);
    }
}

TEST(Correlation, NullIsNearZero) {
    std::vector<AnnualReturnRow> rows;
    CounterRng r(17);
    for (int f = 0; f < 1000; ++f)
        for (int y = 2000; y < 2011; ++y) rows.push_back({f, y, r.normal(), r.normal()});
    for (const auto& c : correlation_table(rows)) {
        EXPECT_EQ(c.nobs, 10000u);
        EXPECT_LT(std::abs(c.correlation), 0.05);
    }
}

TEST(Correlation, TooFewPairs) {
    EXPECT_THROW(correlation_table({{1, 2000, 0.1, 0.2}, {1, 2001, 0.1, 0.3}}), DataError);
}
