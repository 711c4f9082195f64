#pragma once

#include <newsflow/common.hpp>

#include <Eigen/Dense>

#include <vector>

namespace newsflow {

struct LassoOptions {
    int n_lambda = 100;
    double lambda_min_ratio = 1e-4;
    /// Convergence when the largest standardized coefficient change in a
    /// sweep falls below this.
    double tolerance = 1e-7;
    int max_sweeps = 100000;
    int folds = 5;
    bool parallel = true;
};

/// Coefficients on the original scale.
struct LassoFit {
    double lambda = 0.0;
    Eigen::VectorXd beta;   // penalized columns
    Eigen::VectorXd gamma;  // unpenalized columns
    int sweeps = 0;
    bool converged = false;
};

/// Minimizes (1/2n)|y - U gamma - X beta|^2 + lambda |s .* beta|_1, where s
/// holds the training standard deviations of X after U has been partialled
/// out. gamma is profiled away exactly, so the solver works on
/// standardized residualized columns.
class LassoProblem {
public:
    /// U must have full column rank (throws NumericalError otherwise).
    LassoProblem(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, const Eigen::MatrixXd& U);

    Eigen::Index n() const { return y_.size(); }
    Eigen::Index p() const { return X_.cols(); }
    /// Columns of X that vary once U is partialled out.
    const std::vector<int>& active_columns() const { return active_; }
    /// Columns of X dropped because they are constant after partialling out.
    const std::vector<int>& dropped_columns() const { return dropped_; }

    /// Smallest lambda at which every beta is zero.
    double lambda_max() const;
    LassoFit fit(double lambda, const LassoOptions& options = {}, const LassoFit* warm = nullptr) const;
    /// Warm-started fits along a decreasing grid.
    std::vector<LassoFit> path(const std::vector<double>& lambdas, const LassoOptions& options = {}) const;

    /// Largest violation of the subgradient conditions in standardized
    /// units, including the normal equations of the unpenalized block.
    double kkt_violation(const LassoFit& fit) const;

    Eigen::VectorXd predict(const LassoFit& fit, const Eigen::MatrixXd& X, const Eigen::MatrixXd& U) const;

private:
    Eigen::VectorXd gamma_for(const Eigen::VectorXd& beta) const;

    Eigen::VectorXd y_;
    Eigen::MatrixXd X_;
    Eigen::MatrixXd U_;
    Eigen::HouseholderQR<Eigen::MatrixXd> u_qr_;
    Eigen::VectorXd y_res_;
    Eigen::MatrixXd z_;  // standardized residualized active columns
    Eigen::VectorXd scale_;
    std::vector<int> active_;
    std::vector<int> dropped_;
};

/// 100 log-spaced points from lambda_max down to ratio * lambda_max.
std::vector<double> lambda_grid(double lambda_max, const LassoOptions& options = {});

struct LassoCvResult {
    std::vector<double> lambdas;
    std::vector<double> cv_mse;
    int best = 0;
    LassoFit fit;  // full-sample fit at lambdas[best]
    std::vector<int> dropped_columns;
};

/// K-fold cross-validation over the grid from the full-sample lambda_max.
/// fold[i] in [0, folds) assigns row i. Picks the smallest mean squared
/// error (ties to the larger lambda) and refits on all rows.
LassoCvResult lasso_cv(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, const Eigen::MatrixXd& U,
                       const std::vector<int>& fold, const LassoOptions& options = {});

}  // namespace newsflow
