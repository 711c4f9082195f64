#include <newsflow/calendar.hpp>
#include <newsflow/csv.hpp>

#include <algorithm>
#include <charconv>
#include <cstdio>

namespace newsflow {

using namespace std::chrono;

std::string_view to_string(Period p) {
    return p == Period::Intraday ? "intraday" : "overnight";
}

Period period_from_string(std::string_view s) {
    if (s == "intraday" || s == "i") return Period::Intraday;
    if (s == "overnight" || s == "o") return Period::Overnight;
    throw DataError("unknown period '" + std::string(s) + "'");
}

namespace {

int parse_int(std::string_view s, std::string_view what) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw DataError("cannot parse " + std::string(what) + " from '" + std::string(s) + "'");
    return v;
}

}  // namespace

Date parse_date(std::string_view text) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-')
        throw DataError("malformed date '" + std::string(text) + "' (want YYYY-MM-DD)");
    const year_month_day ymd{year{parse_int(text.substr(0, 4), "year")},
                             month{static_cast<unsigned>(parse_int(text.substr(5, 2), "month"))},
                             day{static_cast<unsigned>(parse_int(text.substr(8, 2), "day"))}};
    if (!ymd.ok()) throw DataError("invalid calendar date '" + std::string(text) + "'");
    return sys_days{ymd};
}

std::string format_date(Date d) {
    const year_month_day ymd{d};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

int year_of(Date d) { return static_cast<int>(year_month_day{d}.year()); }
int month_of(Date d) { return static_cast<int>(static_cast<unsigned>(year_month_day{d}.month())); }

Instant parse_rfc3339(std::string_view text) {
    if (text.size() < 20 || (text[10] != 'T' && text[10] != 't' && text[10] != ' ') || text[13] != ':' ||
        text[16] != ':')
        throw DataError("malformed RFC 3339 timestamp '" + std::string(text) + "'");
    const Date d = parse_date(text.substr(0, 10));
    const int hh = parse_int(text.substr(11, 2), "hour");
    const int mm = parse_int(text.substr(14, 2), "minute");
    const int ss = parse_int(text.substr(17, 2), "second");
    if (hh > 23 || mm > 59 || ss > 60) throw DataError("time out of range in '" + std::string(text) + "'");
    std::size_t pos = 19;
    if (pos < text.size() && text[pos] == '.') {
        ++pos;
        while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') ++pos;
    }
    if (pos >= text.size()) throw DataError("missing UTC offset in '" + std::string(text) + "'");
    seconds offset{0};
    const char z = text[pos];
    if (z == 'Z' || z == 'z') {
        if (pos + 1 != text.size()) throw DataError("trailing characters in '" + std::string(text) + "'");
    } else if (z == '+' || z == '-') {
        if (text.size() != pos + 6 || text[pos + 3] != ':')
            throw DataError("malformed UTC offset in '" + std::string(text) + "'");
        const int oh = parse_int(text.substr(pos + 1, 2), "offset hours");
        const int om = parse_int(text.substr(pos + 4, 2), "offset minutes");
        offset = hours(oh) + minutes(om);
        if (z == '-') offset = -offset;
    } else {
        throw DataError("malformed UTC offset in '" + std::string(text) + "'");
    }
    return Instant{d} + hours(hh) + minutes(mm) + seconds(ss) - offset;
}

std::string format_rfc3339(Instant t) {
    const Date d = floor<days>(t);
    const auto tod = t - Instant{d};
    const hh_mm_ss<seconds> hms{tod};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%sT%02d:%02d:%02dZ", format_date(d).c_str(), static_cast<int>(hms.hours().count()),
                  static_cast<int>(hms.minutes().count()), static_cast<int>(hms.seconds().count()));
    return buf;
}

// ---------------------------------------------------------------------------
// TimeZone

TimeZone TimeZone::from_name(std::string_view name) {
    if (name == "America/New_York" || name == "US/Eastern") return TimeZone(std::string(name), hours(-5), true);
    if (name == "America/Chicago" || name == "US/Central") return TimeZone(std::string(name), hours(-6), true);
    if (name == "UTC" || name == "Etc/UTC") return TimeZone(std::string(name), seconds(0), false);
    throw ConfigError("unsupported timezone '" + std::string(name) + "'");
}

namespace {

struct DstWindow {
    Instant start;
    Instant end;
};

DstWindow us_dst_window(int y, seconds standard) {
    Date start_day;
    Date end_day;
    if (y >= 2007) {
        start_day = sys_days{year{y} / March / Sunday[2]};
        end_day = sys_days{year{y} / November / Sunday[1]};
    } else if (y >= 1987) {
        start_day = sys_days{year{y} / April / Sunday[1]};
        end_day = sys_days{year{y} / October / Sunday[last]};
    } else {
        start_day = sys_days{year{y} / April / Sunday[last]};
        end_day = sys_days{year{y} / October / Sunday[last]};
    }
    // 02:00 local standard time, and 02:00 local daylight time.
    return {Instant{start_day} + hours(2) - standard, Instant{end_day} + hours(2) - (standard + hours(1))};
}

}  // namespace

seconds TimeZone::utc_offset(Instant t) const {
    if (!us_dst_) return standard_offset_;
    const int y = year_of(floor<days>(t));
    const DstWindow w = us_dst_window(y, standard_offset_);
    return (t >= w.start && t < w.end) ? standard_offset_ + hours(1) : standard_offset_;
}

LocalTime TimeZone::to_local(Instant t) const {
    const Instant local = t + utc_offset(t);
    const Date d = floor<days>(local);
    return {d, local - Instant{d}};
}

Instant TimeZone::from_local(Date date, seconds time_of_day) const {
    const Instant wall = Instant{date} + time_of_day;
    if (us_dst_) {
        const Instant as_dst = wall - (standard_offset_ + hours(1));
        if (utc_offset(as_dst) == standard_offset_ + hours(1)) return as_dst;
    }
    return wall - standard_offset_;
}

// ---------------------------------------------------------------------------
// TradingCalendar

TradingCalendar::TradingCalendar(Date first, Date last, std::set<Date> holidays, seconds open, seconds close)
    : first_(first), last_(last), holidays_(std::move(holidays)), open_(open), close_(close) {
    if (last < first) throw ConfigError("calendar range ends before it starts");
    if (!(open < close)) throw ConfigError("session open must precede close");
    for (Date d = first; d <= last; d += days(1)) {
        const weekday wd{d};
        if (wd == Saturday || wd == Sunday) continue;
        if (holidays_.count(d)) continue;
        days_.push_back(d);
    }
    if (days_.empty()) throw ConfigError("calendar contains no trading days");
}

std::set<Date> TradingCalendar::read_holidays(const std::string& path) {
    std::set<Date> out;
    const CsvTable table = read_csv(path, /*header=*/false);
    for (const auto& row : table.rows) {
        if (row.empty() || row[0].empty()) continue;
        if (row[0] == "date") continue;
        out.insert(parse_date(row[0]));
    }
    return out;
}

bool TradingCalendar::is_trading_day(Date d) const { return index_of(d) >= 0; }

int TradingCalendar::index_of(Date d) const {
    auto it = std::lower_bound(days_.begin(), days_.end(), d);
    if (it == days_.end() || *it != d) return -1;
    return static_cast<int>(it - days_.begin());
}

std::optional<Date> TradingCalendar::next_trading_day(Date d) const {
    auto it = std::upper_bound(days_.begin(), days_.end(), d);
    if (it == days_.end()) return std::nullopt;
    return *it;
}

std::optional<Date> TradingCalendar::previous_trading_day(Date d) const {
    auto it = std::lower_bound(days_.begin(), days_.end(), d);
    if (it == days_.begin()) return std::nullopt;
    return *std::prev(it);
}

Session TradingCalendar::classify(const LocalTime& local) const {
    if (local.date < first_ || local.date > last_)
        throw DataError("timestamp on " + format_date(local.date) + " outside calendar range " + format_date(first_) +
                        ".." + format_date(last_));
    if (is_trading_day(local.date)) {
        if (local.time_of_day < open_) return {local.date, Period::Overnight};
        if (local.time_of_day < close_) return {local.date, Period::Intraday};
    }
    auto next = next_trading_day(local.date);
    if (!next) throw DataError("no trading day after " + format_date(local.date) + " within calendar range");
    return {*next, Period::Overnight};
}

std::vector<int> TradingCalendar::years() const {
    std::vector<int> ys;
    for (Date d : days_) {
        const int y = year_of(d);
        if (ys.empty() || ys.back() != y) ys.push_back(y);
    }
    return ys;
}

}  // namespace newsflow
