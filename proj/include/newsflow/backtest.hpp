#pragma once

#include <newsflow/common.hpp>
#include <newsflow/econometrics.hpp>
#include <newsflow/exposure.hpp>
#include <newsflow/forecast.hpp>
#include <newsflow/returns.hpp>

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

namespace newsflow {

/// Equal-weight daily session returns (bps) of the four selection sets plus
/// the whole selection universe; NaN on days without a valid member.
struct DailyPortfolioSeries {
    std::vector<Date> days;
    std::vector<double> ls_o, lns_o, ss_i, sns_i;
    std::vector<double> universe_o, universe_i;
    std::vector<int> n_ls_o, n_lns_o, n_ss_i, n_sns_i;
    /// Days where some portfolio had no member with a valid return.
    std::vector<Date> gaps;

    /// Running sum of daily log returns in natural units; gaps add zero.
    static std::vector<double> cumulative(const std::vector<double>& bps);
};

/// Selection for holding year Y applies to every trading day of Y; LS and
/// LNS use overnight returns ending that morning, SS and SNS intraday.
DailyPortfolioSeries portfolio_series(const std::vector<Selection>& selections, const ReturnPanel& panel);

struct AverageCell {
    std::string name;
    double mean = 0.0;  // bps
    double se = 0.0;
    double t = 0.0;
    double p_value = 1.0;
    int lags = 0;
    std::size_t nobs = 0;
};

/// LS_o, SS_i, LNS_o, SNS_i, LS_o-LNS_o, SS_i-SNS_i, LS_o-SS_i, LNS_o-SNS_i:
/// intercept-only regressions with Newey-West automatic-lag errors, each
/// over the days where its inputs are finite.
std::vector<AverageCell> average_return_table(const DailyPortfolioSeries& series);

struct AdjustedOptions {
    bool baseline = false;
    bool include_lags = false;
    bool use_controls = true;
};

struct AdjustedResult {
    RegressionResult regression;
    /// b_SNS = b_LNS and b_SNS = b_SS (unset for the baseline).
    std::optional<WaldResult> sns_vs_lns;
    std::optional<WaldResult> sns_vs_ss;
    std::size_t rows_without_controls = 0;
    std::size_t rows_without_lags = 0;
};

/// Pooled firm-day-period regression of session returns on selection
/// indicators (or the intraday dummy for the baseline) and period-specific
/// controls from the prior year, clustered by day and firm.
AdjustedResult characteristics_adjusted(const ReturnPanel& panel, const std::vector<Selection>& selections,
                                        const Controls* controls, const AdjustedOptions& options = {});

struct DecompositionOptions {
    int m = 25;
    bool use_controls = true;
    /// Adds day fixed effects (absorbed by demeaning).
    bool day_fixed_effects = false;
};

struct DecompositionResult {
    /// Both, Sel-Rank, Rank-Sel, Rem in that order; NaN when the cell was
    /// empty and its column dropped.
    std::array<double, 4> coefficient{};
    std::array<double, 4> se{};
    std::array<double, 4> p_value{};
    std::array<std::size_t, 4> cell_rows{};
    std::vector<std::string> dropped;
    RegressionResult regression;
    std::size_t skipped_days = 0;
};

/// Overnight return into day s+1 on LS_o x IM_s cells, IM_s being the m
/// lowest intraday returns on day s.
DecompositionResult im_decomposition(const ReturnPanel& panel, const std::vector<Selection>& selections,
                                     const Controls* controls, const DecompositionOptions& options = {});
/// Intraday return on day s on SS_i x IIM_s cells, IIM_s being the m
/// highest overnight returns ending on day s.
DecompositionResult iim_decomposition(const ReturnPanel& panel, const std::vector<Selection>& selections,
                                      const Controls* controls, const DecompositionOptions& options = {});

struct SplitHalfResult {
    std::vector<ForecastModel> models;
    std::vector<Selection> selections;
};

/// For each forecast year t: a fresh 50/50 firm split from (seed, t); the
/// V1 model is fit on half A and selections are formed on half B.
/// `forecast_firms(t)` lists the candidates for holding year t+1.
SplitHalfResult split_half_eval(const std::vector<AnnualStats>& annual, const WindowedExposure& zbar,
                                const Controls* controls, const std::vector<int>& years,
                                const std::function<std::vector<int>(int)>& forecast_firms, const FitOptions& fit,
                                std::uint64_t seed, int size = 25);

struct IoRegression {
    int p = 0;  // regressand period (0 intraday, 1 overnight)
    int q = 0;  // lagged-return period
    std::string spec;  // "rr", "rf" or "rrf"
    RegressionResult regression;
};

struct IoPanelsResult {
    std::vector<IoRegression> regressions;  // 12 entries
    std::size_t dropped_rows = 0;
};

/// For p, q in {i, o}: r^p_{t+1} on r^q_t, on f^p_t, and on both, with year
/// fixed effects and errors clustered by year and firm.
IoPanelsResult io_panels(const std::vector<AnnualStats>& annual, const std::vector<ForecastSet>& forecasts);

/// Indices kept after removing floor(fraction n) of the lowest and highest
/// values (ties broken by index).
std::vector<std::size_t> trim_indices(const std::vector<double>& values, double fraction);

struct FigureInputs {
    const DailyPortfolioSeries* series = nullptr;
    const ReturnPanel* panel = nullptr;
    const std::vector<ForecastModel>* models = nullptr;
    const ExposurePanel* annual = nullptr;  // 1-year exposures
    /// (year, period, contributions) for the topic history.
    std::vector<std::tuple<int, Period, ContributionResult>> contributions;
};

/// Writes the CSVs present in `inputs` under `dir`; returns their file names.
std::vector<std::string> emit_figure_data(const std::string& dir, const FigureInputs& inputs);

}  // namespace newsflow
