#include "util.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace testutil {

using namespace std::chrono;

Date day(int y, int m, int d) { return sys_days{year{y} / m / d}; }

newsflow::Instant ny(int y, int m, int d, int hh, int mm, int ss) {
    static const auto tz = newsflow::TimeZone::from_name("America/New_York");
    return tz.from_local(day(y, m, d), hours(hh) + minutes(mm) + seconds(ss));
}

newsflow::TradingCalendar weekdays(Date first, Date last) { return newsflow::TradingCalendar(first, last, {}); }

std::string temp_dir(const std::string& tag) {
    namespace fs = std::filesystem;
    const fs::path p = fs::temp_directory_path() / ("newsflow_test_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p.string();
}

std::string words(int n, const std::string& stem) {
    static const char* letters = "bcdfghjklm";
    std::string s;
    for (int i = 0; i < n; ++i) {
        if (i) s += ' ';
        s += stem;
        for (int v = i;; v /= 10) {
            s += letters[v % 10];
            if (v < 10) break;
        }
    }
    return s;
}

double rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    const double scale = std::max(b.cwiseAbs().maxCoeff(), 1e-300);
    return (a - b).cwiseAbs().maxCoeff() / scale;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace testutil
