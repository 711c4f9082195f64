#pragma once

#include <newsflow/common.hpp>

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace newsflow {

enum class CovarianceType { Iid, White, NeweyWest, Cluster1, Cluster2 };
std::string_view to_string(CovarianceType t);

/// Least-squares fit plus everything needed to rebuild its covariance
/// under another estimator.
struct OlsFit {
    Eigen::MatrixXd X;  // weighted design when weights were given
    Eigen::VectorXd y;
    Eigen::VectorXd beta;
    Eigen::VectorXd residuals;
    Eigen::MatrixXd xtx_inv;
    std::vector<std::string> names;
    double r2 = 0.0;
    double adj_r2 = 0.0;
    /// Degrees of freedom absorbed by fixed effects (0 for plain OLS).
    int absorbed_dof = 0;

    std::size_t nobs() const { return static_cast<std::size_t>(X.rows()); }
    int k() const { return static_cast<int>(X.cols()); }
};

struct RegressionResult {
    Eigen::VectorXd coefficients;
    Eigen::MatrixXd covariance;
    std::vector<std::string> names;
    CovarianceType se_type = CovarianceType::Iid;
    int nw_lags = -1;
    /// Smallest cluster count across clustering dimensions (0 when unclustered).
    int clusters = 0;
    bool psd_repaired = false;
    std::size_t nobs = 0;
    double r2 = 0.0;
    double adj_r2 = 0.0;
    int residual_dof = 0;

    Eigen::VectorXd se() const { return covariance.diagonal().cwiseMax(0.0).cwiseSqrt(); }
    double se(int i) const;
    double t_stat(int i) const { return coefficients(i) / se(i); }
    /// Two-sided p-value: Student t with residual dof for iid, t(G-1) for
    /// clustered, standard normal for White and Newey-West.
    double p_value(int i) const;
    int index(std::string_view name) const;
};

/// Least squares via Householder QR. Optional weights give WLS. Throws
/// NumericalError naming the linearly dependent columns when X is rank
/// deficient.
OlsFit ols_fit(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, std::vector<std::string> names = {},
               const Eigen::VectorXd* weights = nullptr);

RegressionResult iid(const OlsFit& fit);
RegressionResult white(const OlsFit& fit);
/// OLS with iid covariance.
RegressionResult ols(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, std::vector<std::string> names = {});

/// floor(4 (T/100)^(2/9)).
int newey_west_auto_lag(std::size_t T);
/// Bartlett-kernel HAC covariance; rows must be in time order. nullopt lags
/// selects the automatic rule. Throws NumericalError when T < 2.
RegressionResult newey_west(const OlsFit& fit, std::optional<int> lags = std::nullopt);

struct ClusterOptions {
    /// Multiply each component by G/(G-1) * (N-1)/(N-K).
    bool finite_sample = false;
};

/// Sandwich meat and bread pieces of a Cameron-Gelbach-Miller two-way
/// covariance, before the combination V1 + V2 - V12.
struct CgmComponents {
    Eigen::MatrixXd v1;
    Eigen::MatrixXd v2;
    Eigen::MatrixXd v12;
    int g1 = 0;
    int g2 = 0;
    int g12 = 0;
};

/// One-way covariance clustered on labels.
Eigen::MatrixXd cluster_covariance(const OlsFit& fit, const std::vector<long long>& labels,
                                   const ClusterOptions& options = {}, int* clusters = nullptr);
CgmComponents cgm_components(const OlsFit& fit, const std::vector<long long>& dim1, const std::vector<long long>& dim2,
                             const ClusterOptions& options = {});

/// One- or two-way clustered covariance. Two-way negative eigenvalues are
/// truncated to zero and flagged. Throws DataError when a dimension has a
/// single cluster.
RegressionResult clustered(const OlsFit& fit, const std::vector<long long>& dim1,
                           const std::vector<long long>* dim2 = nullptr, const ClusterOptions& options = {});

struct PanelSpec {
    /// Each entry is one fixed-effect dimension (group label per row).
    std::vector<std::vector<long long>> fixed_effects;
    /// Zero, one or two clustering dimensions.
    std::vector<std::vector<long long>> clusters;
    /// Adds a constant column when there are no fixed effects.
    bool intercept = true;
    ClusterOptions cluster_options;
    double tolerance = 1e-10;
    int max_iterations = 10000;
};

/// Within transformation by alternating projections, then OLS and the
/// requested covariance (iid when no clusters). R2 and adjusted R2 refer to
/// the within model. Throws NumericalError naming any regressor left
/// constant by the demeaning.
RegressionResult panel_fe(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, std::vector<std::string> names,
                          const PanelSpec& spec);

/// Demeans each column of M in place over the given groupings until the
/// largest change in a pass falls below tolerance.
void demean(Eigen::MatrixXd& M, const std::vector<std::vector<long long>>& groups, double tolerance = 1e-10,
            int max_iterations = 10000);

struct WaldResult {
    double statistic = 0.0;  // chi-square form, or F = chi2/q when clustered
    int q = 0;
    int denominator_dof = 0;  // G-1 for the F form, 0 for chi-square
    double p_value = 1.0;
};

/// Joint test of b[i] = b[j] over the index pairs.
WaldResult wald_equality(const RegressionResult& result, const std::vector<std::pair<int, int>>& pairs);

/// "***", "**", "*" or "" for p < 0.01, 0.05, 0.1.
std::string stars(double p);

struct AnnualReturnRow {
    int firm;
    int year;
    double intraday;
    double overnight;
};

struct CorrelationCell {
    std::string lag;   // r_intra_t, r_over_t, r_t
    std::string lead;  // r_intra_t1, r_over_t1, r_t1
    double correlation = 0.0;
    double p_value = 1.0;
    std::size_t nobs = 0;
};

/// Pearson correlations of year-t returns with year-t+1 returns over stacked
/// firm-year pairs; significance from a regression of the standardized lead
/// on the standardized lag with standard errors clustered by year and firm.
/// Throws DataError with fewer than 3 pairs.
std::vector<CorrelationCell> correlation_table(const std::vector<AnnualReturnRow>& rows);

}  // namespace newsflow
