#pragma once

#include <newsflow/backtest.hpp>
#include <newsflow/econometrics.hpp>

#include <string>
#include <vector>

namespace newsflow {

/// A rendered results table: the first cell of each row is its label.
struct Table {
    std::string title;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> notes;
};

/// Fixed-point number with `decimals` digits; "" for NaN.
std::string format_fixed(double v, int decimals);
/// "0.191***" style cell.
std::string coefficient_cell(double value, double p_value, int decimals);
/// "(0.042)" style cell.
std::string se_cell(double se, int decimals);

struct RegressionColumn {
    std::string header;
    const RegressionResult* result = nullptr;
};

/// One coefficient row and one parenthesized standard error row per name in
/// `rows`; names absent from a column leave its cells blank. Appends
/// observation counts and adjusted R2.
Table regression_table(std::string title, const std::vector<RegressionColumn>& columns,
                       const std::vector<std::string>& rows, int decimals);

/// Means with stars over parenthesized Newey-West errors, one column per cell.
Table average_table(std::string title, const std::vector<std::vector<AverageCell>>& rows,
                    const std::vector<std::string>& row_labels, int decimals = 1);

Table correlation_table_view(const std::vector<CorrelationCell>& cells);

void write_table_csv(const std::string& path, const Table& table);
/// Aligned plain-text rendering.
std::string render_text(const Table& table);
void write_table_text(const std::string& path, const Table& table);

}  // namespace newsflow
