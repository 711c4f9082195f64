#pragma once

#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace newsflow {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Column index by header name; throws DataError when absent.
    std::size_t column(std::string_view name) const;
};

/// Minimal RFC 4180 reader (quoted fields, doubled quotes). Blank lines are
/// skipped. With header=true the first record becomes CsvTable::header.
CsvTable read_csv(const std::string& path, bool header = true);
std::vector<std::string> split_csv_line(std::string_view line);

double parse_double(std::string_view s, std::string_view what);
long long parse_long(std::string_view s, std::string_view what);

/// Shortest round-trip representation of a double.
std::string format_double(double v);

class CsvWriter {
public:
    explicit CsvWriter(const std::string& path);

    CsvWriter& field(std::string_view s);
    CsvWriter& field(double v);
    CsvWriter& field(long long v);
    CsvWriter& field(int v) { return field(static_cast<long long>(v)); }
    void end_row();
    void row(const std::vector<std::string>& fields);

private:
    std::ofstream out_;
    bool first_ = true;
};

}  // namespace newsflow
