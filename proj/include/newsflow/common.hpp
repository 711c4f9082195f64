#pragma once

#include <chrono>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace newsflow {

/// Base of every error the library raises. The CLI maps the three
/// subclasses onto its exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed configuration, bad usage, or a missing upstream artifact.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Input data violating a documented precondition.
class DataError : public Error {
public:
    using Error::Error;
};

/// Singular systems, degenerate samples, failed convergence.
class NumericalError : public Error {
public:
    using Error::Error;
};

using Date = std::chrono::sys_days;
using Instant = std::chrono::sys_seconds;

enum class Period : std::uint8_t { Intraday = 0, Overnight = 1 };

inline constexpr int kPeriodCount = 2;

constexpr int index_of(Period p) { return static_cast<int>(p); }
std::string_view to_string(Period p);
Period period_from_string(std::string_view s);

/// Parses YYYY-MM-DD.
Date parse_date(std::string_view text);
std::string format_date(Date d);
int year_of(Date d);
int month_of(Date d);

/// Parses an RFC 3339 timestamp ("2020-01-02T15:04:05Z", "...-05:00",
/// optional fractional seconds, which are truncated).
Instant parse_rfc3339(std::string_view text);
std::string format_rfc3339(Instant t);

/// Log-returns are stored in natural units; tables report basis points.
inline constexpr double kBps = 1e4;

}  // namespace newsflow
