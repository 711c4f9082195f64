#pragma once

#include <newsflow/calendar.hpp>
#include <newsflow/common.hpp>

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace newsflow {

class Membership;

struct PriceRow {
    int firm;
    Date date;
    double open;
    double close;
};

struct DividendRow {
    int firm;
    Date ex_date;
    double amount;
};

/// CSV firm_id,date,open,close.
std::vector<PriceRow> read_prices(const std::string& path);
/// CSV firm_id,date,amount (date is the first day the buyer no longer
/// receives the dividend, so it accrues to that day's overnight session).
std::vector<DividendRow> read_dividends(const std::string& path);
void write_prices(const std::string& path, const std::vector<PriceRow>& rows);
void write_dividends(const std::string& path, const std::vector<DividendRow>& rows);

struct AnnualStats {
    int firm;
    int year;
    double intraday;  // sum of daily log returns
    double overnight;
    double intraday_sd;  // daily standard deviation (NaN with < 2 days)
    double overnight_sd;
    int days;
};

/// Daily session log returns, dense over trading days x firms with NaN for
/// missing or non-member firm-days.
class ReturnPanel {
public:
    ReturnPanel() = default;
    ReturnPanel(std::vector<Date> days, std::vector<int> firms);

    const std::vector<Date>& days() const { return days_; }
    const std::vector<int>& firms() const { return firms_; }
    int day_index(Date d) const;   // -1 when absent
    int firm_index(int firm) const;  // -1 when absent

    double& at(Period p, int day, int firm) { return (p == Period::Intraday ? intraday_ : overnight_)(day, firm); }
    double at(Period p, int day, int firm) const {
        return (p == Period::Intraday ? intraday_ : overnight_)(day, firm);
    }
    /// NaN when the firm or day is unknown.
    double get(int firm, Date d, Period p) const;
    const Eigen::MatrixXd& matrix(Period p) const { return p == Period::Intraday ? intraday_ : overnight_; }

    std::vector<AnnualStats> annual() const;
    /// Monthly sums per firm, keyed by year*12 + month - 1; NaN when a month
    /// has no valid day.
    Eigen::MatrixXd monthly(Period p, int* first_month_key = nullptr) const;

private:
    std::vector<Date> days_;
    std::vector<int> firms_;
    Eigen::MatrixXd intraday_;
    Eigen::MatrixXd overnight_;
};

/// intraday = ln(close/open); overnight = ln((open + dividend)/previous
/// trading day's close). Firm-days outside the index are left missing.
/// Throws DataError naming the offending row for nonpositive prices,
/// duplicates, or prices dated on non-trading days.
ReturnPanel build_returns(const std::vector<PriceRow>& prices, const std::vector<DividendRow>& dividends,
                          const Membership& membership, const TradingCalendar& calendar);

/// firm,date,intraday,overnight for every firm-day with a finite value.
void write_returns_csv(const std::string& path, const ReturnPanel& panel);
ReturnPanel read_returns_csv(const std::string& path, const TradingCalendar& calendar);

}  // namespace newsflow
