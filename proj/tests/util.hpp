#pragma once

#include <newsflow/calendar.hpp>
#include <newsflow/common.hpp>
#include <newsflow/corpus.hpp>

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace testutil {

using newsflow::Date;

Date day(int y, int m, int d);
/// Instant for a New York wall-clock time.
newsflow::Instant ny(int y, int m, int d, int hh, int mm, int ss = 0);
/// Weekday calendar over [first, last] without holidays.
newsflow::TradingCalendar weekdays(Date first, Date last);
/// Fresh empty directory under the system temp dir.
std::string temp_dir(const std::string& tag);
/// Body of n distinct filler words.
std::string words(int n, const std::string& stem = "w");
double rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);
std::string read_file(const std::string& path);

}  // namespace testutil
