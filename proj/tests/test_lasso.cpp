#include <newsflow/lasso.hpp>
#include <newsflow/rng.hpp>

#include <gtest/gtest.h>

#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace newsflow;

namespace {

struct Instance {
    Eigen::VectorXd y;
    Eigen::MatrixXd X;
    Eigen::MatrixXd U;
};

Instance random_instance(int n, int p, int q, std::uint64_t seed, int nonzero = 3) {
    CounterRng r(seed);
    Instance in;
    in.X.resize(n, p);
    in.U.resize(n, q);
    for (int i = 0; i < n; ++i) {
        in.U(i, 0) = 1.0;
        for (int j = 1; j < q; ++j) in.U(i, j) = r.normal();
        for (int j = 0; j < p; ++j) in.X(i, j) = r.normal() * (1.0 + j % 3) + 0.3 * in.U(i, std::min(1, q - 1));
    }
    Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
    for (int j = 0; j < nonzero && j < p; ++j) b(j) = (j % 2 ? -1.0 : 1.0) * (0.5 + j);
    in.y = in.X * b + in.U.col(0) * 0.7 + Eigen::VectorXd::NullaryExpr(n, [&] { return r.normal(); });
    return in;
}

/// Subgradient violation computed from scratch on the original scale.
double independent_kkt(const Instance& in, const LassoFit& fit) {
    const auto n = static_cast<double>(in.y.size());
    const Eigen::MatrixXd xr = in.X - in.U * in.U.colPivHouseholderQr().solve(in.X);
    const Eigen::VectorXd r = in.y - in.U * fit.gamma - in.X * fit.beta;
    double worst = (in.U.transpose() * r / n).cwiseAbs().maxCoeff();
    for (Eigen::Index j = 0; j < in.X.cols(); ++j) {
        const double s = std::sqrt(xr.col(j).squaredNorm() / n);
        const double g = in.X.col(j).dot(r) / n / s;
        if (fit.beta(j) != 0.0) {
            worst = std::max(worst, std::abs(g - fit.lambda * (fit.beta(j) > 0 ? 1.0 : -1.0)));
        } else {
            worst = std::max(worst, std::max(0.0, std::abs(g) - fit.lambda));
        }
    }
    return worst;
}

}  // namespace

TEST(Lasso, HugeLambdaGivesNullModel) {
    const Instance in = random_instance(200, 10, 3, 1);
    const LassoProblem prob(in.y, in.X, in.U);
    const LassoFit fit = prob.fit(prob.lambda_max() * 1e6);
    EXPECT_EQ(fit.beta.cwiseAbs().maxCoeff(), 0.0);
    const Eigen::VectorXd gamma_ols = in.U.colPivHouseholderQr().solve(in.y);
    EXPECT_LT((fit.gamma - gamma_ols).cwiseAbs().maxCoeff(), 1e-8);
    // Just below lambda_max exactly one coefficient enters.
    const LassoFit edge = prob.fit(prob.lambda_max() * 1.0000001);
    EXPECT_EQ(edge.beta.cwiseAbs().maxCoeff(), 0.0);
    const LassoFit inside = prob.fit(prob.lambda_max() * 0.99);
    EXPECT_EQ((inside.beta.array() != 0.0).count(), 1);
}

TEST(Lasso, KktHoldsAlongPath) {
    for (std::uint64_t seed = 2; seed < 7; ++seed) {
        const Instance in = random_instance(150, 20, 2, seed, 4);
        const LassoProblem prob(in.y, in.X, in.U);
        const auto grid = lambda_grid(prob.lambda_max());
        ASSERT_EQ(grid.size(), 100u);
        EXPECT_NEAR(grid.back() / grid.front(), 1e-4, 1e-12);
        const auto path = prob.path(grid);
        for (std::size_t l = 0; l < path.size(); l += 9) {
            EXPECT_TRUE(path[l].converged);
            EXPECT_LT(prob.kkt_violation(path[l]), 1e-6);
            EXPECT_LT(independent_kkt(in, path[l]), 1e-6);
        }
    }
}

TEST(Lasso, OrthogonalDesignSoftThresholds) {
    // Centred orthogonal columns with an intercept: beta_j is the
    // soft-thresholded univariate slope.
    const int n = 8;
    Eigen::MatrixXd X(n, 3);
    X << 1, 1, 1, 1, 1, -1, 1, -1, 1, 1, -1, -1, -1, 1, 1, -1, 1, -1, -1, -1, 1, -1, -1, -1;
    X.col(1) *= 2.0;
    Eigen::VectorXd y(n);
    y << 3, 1, 2, 0.5, -1, 0.2, -2, 4;
    const Eigen::MatrixXd U = Eigen::MatrixXd::Ones(n, 1);
    const LassoProblem prob(y, X, U);
    const double lambda = 0.3;
    LassoOptions opt;
    opt.tolerance = 1e-12;
    const LassoFit fit = prob.fit(lambda, opt);
    for (int j = 0; j < 3; ++j) {
        const double s = std::sqrt(X.col(j).squaredNorm() / n);
        const double c = X.col(j).dot(y) / n;
        const double thr = std::copysign(std::max(0.0, std::abs(c) - lambda * s), c);
        EXPECT_NEAR(fit.beta(j), thr / (s * s), 1e-10) << j;
    }
    EXPECT_NEAR(fit.gamma(0), y.mean(), 1e-10);
}

TEST(Lasso, TinyLambdaApproachesOls) {
    const Instance in = random_instance(300, 6, 2, 8, 6);
    const LassoProblem prob(in.y, in.X, in.U);
    LassoOptions opt;
    opt.tolerance = 1e-12;
    const LassoFit fit = prob.fit(prob.lambda_max() * 1e-9, opt);
    Eigen::MatrixXd full(in.X.rows(), 8);
    full << in.X, in.U;
    const Eigen::VectorXd b = full.colPivHouseholderQr().solve(in.y);
    EXPECT_LT((fit.beta - b.head(6)).cwiseAbs().maxCoeff(), 1e-5);
    EXPECT_LT((fit.gamma - b.tail(2)).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(Lasso, ConstantColumnIsDropped) {
    Instance in = random_instance(100, 5, 1, 9);
    in.X.col(2).setConstant(4.0);
    const LassoProblem prob(in.y, in.X, in.U);
    EXPECT_EQ(prob.dropped_columns(), std::vector<int>{2});
    const LassoFit fit = prob.fit(prob.lambda_max() * 0.01);
    EXPECT_EQ(fit.beta(2), 0.0);
}

TEST(Lasso, RankDeficientControlsThrow) {
    Instance in = random_instance(50, 3, 3, 10);
    in.U.col(2) = 2.0 * in.U.col(1);
    EXPECT_THROW(LassoProblem(in.y, in.X, in.U), NumericalError);
}

TEST(LassoCv, SelectsPlantedSparseSignal) {
    const Instance in = random_instance(400, 15, 1, 11, 2);
    std::vector<int> fold(400);
    for (int i = 0; i < 400; ++i) fold[static_cast<std::size_t>(i)] = i % 5;
    const LassoCvResult cv = lasso_cv(in.y, in.X, in.U, fold);
    EXPECT_NE(cv.fit.beta(0), 0.0);
    EXPECT_NE(cv.fit.beta(1), 0.0);
    EXPECT_NEAR(cv.fit.beta(0), 0.5, 0.15);
    EXPECT_NEAR(cv.fit.beta(1), -1.5, 0.15);
    for (std::size_t l = 0; l < cv.cv_mse.size(); ++l) EXPECT_GE(cv.cv_mse[l], cv.cv_mse[static_cast<std::size_t>(cv.best)]);
}

TEST(LassoCv, ParallelMatchesSerial) {
#ifdef _OPENMP
    omp_set_num_threads(3);
#endif
    const Instance in = random_instance(200, 12, 2, 12);
    std::vector<int> fold(200);
    for (int i = 0; i < 200; ++i) fold[static_cast<std::size_t>(i)] = (i * 7) % 5;
    LassoOptions par, ser;
    ser.parallel = false;
    const auto a = lasso_cv(in.y, in.X, in.U, fold, par);
    const auto b = lasso_cv(in.y, in.X, in.U, fold, ser);
    EXPECT_EQ(a.cv_mse, b.cv_mse);
    EXPECT_EQ(a.best, b.best);
    EXPECT_EQ(a.fit.beta, b.fit.beta);
}

TEST(LassoCv, TiesGoToLargerLambda) {
    // A zero response makes every fit identical; the largest lambda wins.
    Instance in = random_instance(60, 4, 1, 13);
    in.y.setZero();
    std::vector<int> fold(60);
    for (int i = 0; i < 60; ++i) fold[static_cast<std::size_t>(i)] = i % 5;
    const auto cv = lasso_cv(in.y, in.X, in.U, fold);
    EXPECT_EQ(cv.best, 0);
    EXPECT_EQ(cv.fit.beta.cwiseAbs().maxCoeff(), 0.0);
}
