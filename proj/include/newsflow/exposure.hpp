#pragma once

#include <newsflow/common.hpp>
#include <newsflow/econometrics.hpp>
#include <newsflow/lda.hpp>

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace newsflow {

struct Corpus;

enum class Granularity { Daily, Annual };

/// Topic exposures z^p_{j,k,t}. Rows are (firm, t) keys in ascending order,
/// where t is a year (annual) or a day number since 1970-01-01 (daily);
/// intraday and overnight hold one K-vector per row.
struct ExposurePanel {
    using Key = std::pair<int, long long>;

    Granularity granularity = Granularity::Annual;
    int K = 0;
    std::vector<Key> keys;
    RowMatrix intraday;
    RowMatrix overnight;

    std::size_t rows() const { return keys.size(); }
    /// Row index of (firm, t), if present.
    std::optional<std::size_t> find(int firm, long long t) const;
    const RowMatrix& session(Period p) const { return p == Period::Intraday ? intraday : overnight; }
    /// z^all = z^i + z^o.
    RowMatrix combined() const { return intraday + overnight; }
};

struct ExposureOptions {
    Granularity granularity = Granularity::Annual;
    /// Firm ids allowed in articles; any other id is an error.
    std::set<int> firms;
    /// Annual only: firm-years that receive a row even without news.
    std::vector<std::pair<int, int>> universe;
    bool parallel = true;
};

/// z^p_{j,k,t} = sum of theta over articles in session p of period t that
/// mention firm j; each mentioned firm receives the article's full theta.
/// Rows are built in parallel, each summing its articles in corpus order, so
/// the result does not depend on the thread count.
ExposurePanel compute_exposures(const Corpus& corpus, const TopicModel& model, const ExposureOptions& options);
/// Straight-line accumulation over articles, kept as the test reference.
ExposurePanel compute_exposures_serial(const Corpus& corpus, const TopicModel& model, const ExposureOptions& options);

/// Annual panel from a daily one: per-firm sums within calendar years.
ExposurePanel aggregate_annual(const ExposurePanel& daily);

/// n-year cumulative exposures zbar_{j,t} = sum_{u=t-n+1..t} z_{j,u}.
struct WindowedExposure {
    int n = 0;
    int K = 0;
    std::vector<std::pair<int, int>> keys;  // (firm, year)
    RowMatrix intraday;
    RowMatrix overnight;
    /// (firm, year) rows of the input that lacked n years of history.
    std::vector<std::pair<int, int>> omitted;

    std::optional<std::size_t> find(int firm, int year) const;
    const RowMatrix& session(Period p) const { return p == Period::Intraday ? intraday : overnight; }
    /// zbar = zbar^i + zbar^o.
    RowMatrix combined() const { return intraday + overnight; }
};

WindowedExposure window_sum(const ExposurePanel& annual, int n);

enum class PersistenceSession { Intraday, Overnight, All };
enum class FixedEffects { None, Topic, Firm, Both };
std::string_view to_string(PersistenceSession s);
std::string_view to_string(FixedEffects f);

struct PersistenceResult {
    double rho = 0.0;
    double se = 0.0;
    double p_value = 1.0;
    double adj_r2 = 0.0;
    std::size_t nobs = 0;
    RegressionResult regression;
};

/// Regresses z^p_{j,k,t+1} on the mean of z^p over years t-3..t with the
/// requested fixed effects; standard errors clustered by topic and firm.
/// Requires five consecutive years for a row to enter.
PersistenceResult persistence_regression(const ExposurePanel& annual, PersistenceSession session, FixedEffects fe);

/// Columnar CSV: firm,topic,period,session,value (period is a year or a date).
void write_exposure_csv(const std::string& path, const ExposurePanel& panel);
ExposurePanel read_exposure_csv(const std::string& path);
inline constexpr std::uint32_t kExposureFormatVersion = 1;
void write_exposure_binary(const std::string& path, const ExposurePanel& panel);
ExposurePanel read_exposure_binary(const std::string& path);

}  // namespace newsflow
