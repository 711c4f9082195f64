#pragma once

#include <newsflow/common.hpp>

#include <chrono>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace newsflow {

/// Exchange-local wall clock reading of an instant.
struct LocalTime {
    Date date;
    std::chrono::seconds time_of_day;
};

/// A named zone with its daylight-saving rule table. Supported names:
/// America/New_York (alias US/Eastern), America/Chicago (US/Central), UTC.
/// US rules are applied historically: last-Sunday-April/last-Sunday-October
/// before 1987, first-Sunday-April/last-Sunday-October for 1987-2006, and
/// second-Sunday-March/first-Sunday-November from 2007.
class TimeZone {
public:
    static TimeZone from_name(std::string_view name);

    const std::string& name() const { return name_; }
    std::chrono::seconds utc_offset(Instant t) const;
    LocalTime to_local(Instant t) const;
    /// Local wall time to instant; nonexistent spring-forward times resolve
    /// using the standard offset, ambiguous fall-back times to the first one.
    Instant from_local(Date date, std::chrono::seconds time_of_day) const;

private:
    TimeZone(std::string name, std::chrono::seconds standard, bool us_dst)
        : name_(std::move(name)), standard_offset_(standard), us_dst_(us_dst) {}

    std::string name_;
    std::chrono::seconds standard_offset_;
    bool us_dst_;
};

struct Session {
    Date trading_day;
    Period period;

    friend bool operator==(const Session&, const Session&) = default;
};

/// Weekdays in [first, last] minus holidays. Sessions are labelled by the
/// trading day on which they end.
class TradingCalendar {
public:
    TradingCalendar(Date first, Date last, std::set<Date> holidays,
                    std::chrono::seconds open = std::chrono::hours(9) + std::chrono::minutes(30),
                    std::chrono::seconds close = std::chrono::hours(16));

    /// Reads a holiday CSV (first column date, optional header/name columns).
    static std::set<Date> read_holidays(const std::string& path);

    const std::vector<Date>& trading_days() const { return days_; }
    Date first() const { return first_; }
    Date last() const { return last_; }
    std::chrono::seconds session_open() const { return open_; }
    std::chrono::seconds session_close() const { return close_; }
    const std::set<Date>& holidays() const { return holidays_; }

    bool is_trading_day(Date d) const;
    /// Index into trading_days(), or -1.
    int index_of(Date d) const;
    /// First trading day strictly after d; nullopt past the end.
    std::optional<Date> next_trading_day(Date d) const;
    std::optional<Date> previous_trading_day(Date d) const;

    /// Classifies a local wall-clock reading. Throws DataError outside the
    /// covered range.
    Session classify(const LocalTime& local) const;
    Session classify(Instant t, const TimeZone& tz) const { return classify(tz.to_local(t)); }

    std::vector<int> years() const;

private:
    Date first_;
    Date last_;
    std::set<Date> holidays_;
    std::chrono::seconds open_;
    std::chrono::seconds close_;
    std::vector<Date> days_;
};

}  // namespace newsflow
