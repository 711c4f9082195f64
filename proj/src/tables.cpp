#include <newsflow/csv.hpp>
#include <newsflow/tables.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace newsflow {

std::string format_fixed(double v, int decimals) {
    if (std::isnan(v)) return "";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    std::string s(buf);
    // Avoid "-0.0".
    if (s.find_first_not_of("-0.") == std::string::npos && s.front() == '-') s.erase(0, 1);
    return s;
}

std::string coefficient_cell(double value, double p_value, int decimals) {
    if (std::isnan(value)) return "";
    return format_fixed(value, decimals) + stars(p_value);
}

std::string se_cell(double se, int decimals) {
    if (std::isnan(se)) return "";
    return "(" + format_fixed(se, decimals) + ")";
}

Table regression_table(std::string title, const std::vector<RegressionColumn>& columns,
                       const std::vector<std::string>& rows, int decimals) {
    Table t;
    t.title = std::move(title);
    t.columns.push_back("");
    for (const auto& c : columns) t.columns.push_back(c.header);
    for (const auto& name : rows) {
        std::vector<std::string> coef{name}, se{""};
        for (const auto& c : columns) {
            int i = -1;
            if (c.result)
                for (std::size_t j = 0; j < c.result->names.size(); ++j)
                    if (c.result->names[j] == name) i = static_cast<int>(j);
            coef.push_back(i < 0 ? "" : coefficient_cell(c.result->coefficients(i), c.result->p_value(i), decimals));
            se.push_back(i < 0 ? "" : se_cell(c.result->se(i), decimals));
        }
        t.rows.push_back(std::move(coef));
        t.rows.push_back(std::move(se));
    }
    std::vector<std::string> n{"N"}, r2{"Adj. R2"};
    for (const auto& c : columns) {
        n.push_back(c.result ? std::to_string(c.result->nobs) : "");
        r2.push_back(c.result ? format_fixed(c.result->adj_r2, 3) : "");
    }
    t.rows.push_back(std::move(n));
    t.rows.push_back(std::move(r2));
    return t;
}

Table average_table(std::string title, const std::vector<std::vector<AverageCell>>& rows,
                    const std::vector<std::string>& row_labels, int decimals) {
    Table t;
    t.title = std::move(title);
    t.columns.push_back("");
    if (!rows.empty())
        for (const auto& c : rows.front()) t.columns.push_back(c.name);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        std::vector<std::string> mean{r < row_labels.size() ? row_labels[r] : ""}, se{""};
        for (const auto& c : rows[r]) {
            mean.push_back(coefficient_cell(c.mean, c.p_value, decimals));
            se.push_back(se_cell(c.se, decimals));
        }
        t.rows.push_back(std::move(mean));
        t.rows.push_back(std::move(se));
    }
    t.notes.push_back("Daily returns in bps; Newey-West standard errors in parentheses.");
    return t;
}

Table correlation_table_view(const std::vector<CorrelationCell>& cells) {
    Table t;
    t.title = "Correlations of annual returns in years t and t+1";
    std::vector<std::string> leads, lags;
    for (const auto& c : cells) {
        if (std::find(leads.begin(), leads.end(), c.lead) == leads.end()) leads.push_back(c.lead);
        if (std::find(lags.begin(), lags.end(), c.lag) == lags.end()) lags.push_back(c.lag);
    }
    t.columns.push_back("");
    t.columns.insert(t.columns.end(), leads.begin(), leads.end());
    for (const auto& lag : lags) {
        std::vector<std::string> row{lag};
        for (const auto& lead : leads) {
            auto it = std::find_if(cells.begin(), cells.end(), [&](const CorrelationCell& c) { return c.lag == lag && c.lead == lead; });
            row.push_back(it == cells.end() ? "" : coefficient_cell(it->correlation, it->p_value, 3));
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

void write_table_csv(const std::string& path, const Table& table) {
    CsvWriter w(path);
    w.row(table.columns);
    for (const auto& r : table.rows) w.row(r);
}

std::string render_text(const Table& table) {
    std::vector<std::size_t> width(table.columns.size(), 0);
    auto measure = [&](const std::vector<std::string>& r) {
        for (std::size_t i = 0; i < r.size() && i < width.size(); ++i) width[i] = std::max(width[i], r[i].size());
    };
    measure(table.columns);
    for (const auto& r : table.rows) measure(r);
    std::ostringstream out;
    if (!table.title.empty()) out << table.title << '\n';
    auto line = [&](const std::vector<std::string>& r) {
        for (std::size_t i = 0; i < width.size(); ++i) {
            const std::string cell = i < r.size() ? r[i] : "";
            if (i == 0) out << cell << std::string(width[i] - cell.size(), ' ');
            else out << "  " << std::string(width[i] - cell.size(), ' ') << cell;
        }
        out << '\n';
    };
    std::size_t total = 0;
    for (auto w : width) total += w + 2;
    line(table.columns);
    out << std::string(total > 2 ? total - 2 : 0, '-') << '\n';
    for (const auto& r : table.rows) line(r);
    for (const auto& n : table.notes) out << n << '\n';
    return out.str();
}

void write_table_text(const std::string& path, const Table& table) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << render_text(table);
}

}  // namespace newsflow
