#pragma once

#include <newsflow/common.hpp>
#include <newsflow/exposure.hpp>
#include <newsflow/lasso.hpp>
#include <newsflow/returns.hpp>

#include <Eigen/Dense>

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace newsflow {

inline constexpr int kControlCount = 8;
extern const std::array<const char*, kControlCount> kControlNames;

struct FundamentalsRow {
    int firm;
    int year;
    double size;
    double book_to_market;
    double investment;
    double profitability;
};

/// CSV firm_id,year,size,book_to_market,investment,profitability.
std::vector<FundamentalsRow> read_fundamentals(const std::string& path);
void write_fundamentals(const std::string& path, const std::vector<FundamentalsRow>& rows);

struct ControlRow {
    int firm;
    int year;
    std::array<double, kControlCount> values;
};

struct Controls {
    std::vector<ControlRow> rows;  // sorted by (firm, year), demeaned within year
    /// (firm, year) pairs dropped for a missing component, with the reason.
    std::vector<std::pair<std::pair<int, int>, std::string>> excluded;

    const ControlRow* find(int firm, int year) const;
};

/// Momentum for year t sums monthly session log returns over January to
/// November of t (skipping December); volatility is the daily standard
/// deviation times sqrt(252); book-to-market enters as asinh.
Controls build_controls(const ReturnPanel& returns, const std::vector<FundamentalsRow>& fundamentals);

enum class Variant { V1, V2, V3, V4 };
std::string_view to_string(Variant v);
Variant variant_from_string(std::string_view s);
/// True when intraday and overnight rows carry separate coefficients.
constexpr bool period_specific_beta(Variant v) { return v == Variant::V1 || v == Variant::V3; }

/// Fitted year-t model. For V2 and V4 beta_i and beta_o are the same vector.
struct ForecastModel {
    int year = 0;
    Variant variant = Variant::V1;
    int K = 0;
    double alpha = 0.0;
    double alpha_i = 0.0;
    Eigen::VectorXd beta_i;
    Eigen::VectorXd beta_o;
    Eigen::VectorXd gamma;
    double lambda = 0.0;
    int selected_topic_count = 0;
    double cv_mse = 0.0;
    int training_rows = 0;
    std::vector<int> dropped_topics;
    std::vector<std::pair<int, int>> excluded_rows;  // (firm, year) without controls

    const Eigen::VectorXd& beta(Period p) const { return p == Period::Intraday ? beta_i : beta_o; }
};

/// Topic regressor a period's row uses under a variant: zbar^p for V1 and
/// V4, zbar = zbar^i + zbar^o for V2 and V3.
Eigen::VectorXd variant_regressor(Variant v, const WindowedExposure& zbar, std::size_t row, Period p);

struct FitOptions {
    /// Target years t-pool+1..t stacked into one fit.
    int pool_years = 1;
    bool use_controls = true;
    std::uint64_t seed = 0;
    LassoOptions lasso;
};

/// Stacks intraday and overnight year-t annual returns on zbar and controls
/// at t-1, penalizing only topic columns, with lambda from five-fold
/// cross-validation whose folds split by firm.
ForecastModel fit_rolling(const std::vector<AnnualStats>& annual, const WindowedExposure& zbar, const Controls* controls,
                          Variant variant, int year, const FitOptions& options = {});

struct FirmForecast {
    int firm;
    double intraday;
    double overnight;
};

struct ForecastSet {
    int year = 0;  // exposures year t; forecasts are for t+1
    Variant variant = Variant::V1;
    std::vector<FirmForecast> rows;  // ascending firm id
    std::vector<int> missing;        // requested firms without exposures
};

/// f^p_{j,t} = alpha + I(p=i) alpha_i + beta^p . x^p_{j,t} from exposures at
/// year t; controls are not used.
ForecastSet forecast(const ForecastModel& model, const WindowedExposure& zbar, const std::vector<int>& firms);

struct Selection {
    int year = 0;  // holding year t+1
    std::vector<int> ls_o;
    std::vector<int> ss_i;
    std::vector<int> lns_o;
    std::vector<int> sns_i;
    /// Set when fewer than size+1 firms were available.
    bool reduced = false;
};

/// Top `size` by f^o and bottom `size` by f^i; ties go to the lower firm id.
Selection select_portfolios(const ForecastSet& forecasts, int size = 25);

struct TopicContribution {
    int topic;
    double value;
    int beta_sign;
};

struct ContributionResult {
    Eigen::VectorXd phi;
    std::vector<TopicContribution> top;
};

/// phi = beta^p .* (sum_{j in set} x^p_j - mean over firms of x^p_j), in
/// the units of the regression. top lists up to `count` topics with the
/// largest positive (overnight) or most negative (intraday) entries.
ContributionResult topic_contributions(const ForecastModel& model, const WindowedExposure& zbar, int year,
                                       const std::vector<int>& set, const std::vector<int>& universe, Period period,
                                       int count = 10);

void write_model_json(const std::string& path, const ForecastModel& model);
ForecastModel read_model_json(const std::string& path);
void write_models_json(const std::string& path, const std::vector<ForecastModel>& models);
std::vector<ForecastModel> read_models_json(const std::string& path);

/// year,portfolio,firm_id with portfolio in LS_o, SS_i, LNS_o, SNS_i.
void write_selections_csv(const std::string& path, const std::vector<Selection>& selections);
std::vector<Selection> read_selections_csv(const std::string& path);

void write_forecasts_csv(const std::string& path, const std::vector<ForecastSet>& sets);

}  // namespace newsflow
