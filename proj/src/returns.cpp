#include <newsflow/corpus.hpp>
#include <newsflow/csv.hpp>
#include <newsflow/returns.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

namespace newsflow {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

std::vector<PriceRow> read_prices(const std::string& path) {
    const CsvTable t = read_csv(path);
    const auto cf = t.column("firm_id");
    const auto cd = t.column("date");
    const auto co = t.column("open");
    const auto cc = t.column("close");
    std::vector<PriceRow> rows;
    rows.reserve(t.rows.size());
    for (const auto& r : t.rows)
        rows.push_back({static_cast<int>(parse_long(r.at(cf), "firm_id")), parse_date(r.at(cd)),
                        parse_double(r.at(co), "open"), parse_double(r.at(cc), "close")});
    return rows;
}

std::vector<DividendRow> read_dividends(const std::string& path) {
    const CsvTable t = read_csv(path);
    const auto cf = t.column("firm_id");
    const auto cd = t.column("date");
    const auto ca = t.column("amount");
    std::vector<DividendRow> rows;
    for (const auto& r : t.rows)
        rows.push_back({static_cast<int>(parse_long(r.at(cf), "firm_id")), parse_date(r.at(cd)),
                        parse_double(r.at(ca), "amount")});
    return rows;
}

void write_prices(const std::string& path, const std::vector<PriceRow>& rows) {
    CsvWriter w(path);
    w.row({"firm_id", "date", "open", "close"});
    for (const auto& r : rows) {
        w.field(r.firm).field(format_date(r.date)).field(r.open).field(r.close);
        w.end_row();
    }
}

void write_dividends(const std::string& path, const std::vector<DividendRow>& rows) {
    CsvWriter w(path);
    w.row({"firm_id", "date", "amount"});
    for (const auto& r : rows) {
        w.field(r.firm).field(format_date(r.ex_date)).field(r.amount);
        w.end_row();
    }
}

ReturnPanel::ReturnPanel(std::vector<Date> days, std::vector<int> firms)
    : days_(std::move(days)), firms_(std::move(firms)) {
    std::sort(firms_.begin(), firms_.end());
    firms_.erase(std::unique(firms_.begin(), firms_.end()), firms_.end());
    const auto D = static_cast<Eigen::Index>(days_.size());
    const auto F = static_cast<Eigen::Index>(firms_.size());
    intraday_ = Eigen::MatrixXd::Constant(D, F, kNaN);
    overnight_ = Eigen::MatrixXd::Constant(D, F, kNaN);
}

int ReturnPanel::day_index(Date d) const {
    auto it = std::lower_bound(days_.begin(), days_.end(), d);
    return it != days_.end() && *it == d ? static_cast<int>(it - days_.begin()) : -1;
}

int ReturnPanel::firm_index(int firm) const {
    auto it = std::lower_bound(firms_.begin(), firms_.end(), firm);
    return it != firms_.end() && *it == firm ? static_cast<int>(it - firms_.begin()) : -1;
}

double ReturnPanel::get(int firm, Date d, Period p) const {
    const int di = day_index(d);
    const int fi = firm_index(firm);
    return di < 0 || fi < 0 ? kNaN : at(p, di, fi);
}

std::vector<AnnualStats> ReturnPanel::annual() const {
    std::vector<AnnualStats> out;
    std::size_t start = 0;
    while (start < days_.size()) {
        const int y = year_of(days_[start]);
        std::size_t end = start;
        while (end < days_.size() && year_of(days_[end]) == y) ++end;
        for (std::size_t f = 0; f < firms_.size(); ++f) {
            double s[2] = {0, 0};
            double ss[2] = {0, 0};
            int n[2] = {0, 0};
            int days = 0;
            for (std::size_t d = start; d < end; ++d) {
                bool any = false;
                for (int p = 0; p < 2; ++p) {
                    const double r = (p == 0 ? intraday_ : overnight_)(static_cast<Eigen::Index>(d),
                                                                      static_cast<Eigen::Index>(f));
                    if (std::isnan(r)) continue;
                    s[p] += r;
                    ss[p] += r * r;
                    ++n[p];
                    any = true;
                }
                days += any;
            }
            if (days == 0) continue;
            auto sd = [&](int p) {
                if (n[p] < 2) return kNaN;
                const double m = s[p] / n[p];
                return std::sqrt(std::max(0.0, (ss[p] - n[p] * m * m) / (n[p] - 1)));
            };
            out.push_back({firms_[f], y, s[0], s[1], sd(0), sd(1), days});
        }
        start = end;
    }
    std::sort(out.begin(), out.end(),
              [](const AnnualStats& a, const AnnualStats& b) { return std::tie(a.firm, a.year) < std::tie(b.firm, b.year); });
    return out;
}

Eigen::MatrixXd ReturnPanel::monthly(Period p, int* first_month_key) const {
    if (days_.empty()) return {};
    auto key = [](Date d) { return year_of(d) * 12 + month_of(d) - 1; };
    const int first = key(days_.front());
    const int last = key(days_.back());
    if (first_month_key) *first_month_key = first;
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(last - first + 1, static_cast<Eigen::Index>(firms_.size()));
    Eigen::MatrixXi counts = Eigen::MatrixXi::Zero(sums.rows(), sums.cols());
    const Eigen::MatrixXd& m = matrix(p);
    for (std::size_t d = 0; d < days_.size(); ++d) {
        const int row = key(days_[d]) - first;
        for (Eigen::Index f = 0; f < sums.cols(); ++f) {
            const double r = m(static_cast<Eigen::Index>(d), f);
            if (std::isnan(r)) continue;
            sums(row, f) += r;
            ++counts(row, f);
        }
    }
    for (Eigen::Index i = 0; i < sums.rows(); ++i)
        for (Eigen::Index f = 0; f < sums.cols(); ++f)
            if (counts(i, f) == 0) sums(i, f) = kNaN;
    return sums;
}

ReturnPanel build_returns(const std::vector<PriceRow>& prices, const std::vector<DividendRow>& dividends,
                          const Membership& membership, const TradingCalendar& calendar) {
    ReturnPanel panel(calendar.trading_days(), membership.firm_ids());
    const auto D = static_cast<Eigen::Index>(panel.days().size());
    const auto F = static_cast<Eigen::Index>(panel.firms().size());
    Eigen::MatrixXd open = Eigen::MatrixXd::Constant(D, F, kNaN);
    Eigen::MatrixXd close = Eigen::MatrixXd::Constant(D, F, kNaN);
    Eigen::MatrixXd div = Eigen::MatrixXd::Zero(D, F);
    for (std::size_t i = 0; i < prices.size(); ++i) {
        const auto& r = prices[i];
        const std::string where = "price row " + std::to_string(i + 1) + " (firm " + std::to_string(r.firm) + ", " +
                                  format_date(r.date) + ")";
        if (!(r.open > 0.0) || !(r.close > 0.0) || !std::isfinite(r.open) || !std::isfinite(r.close))
            throw DataError("nonpositive price in " + where);
        const int fi = panel.firm_index(r.firm);
        if (fi < 0) continue;  // never an index member
        const int di = panel.day_index(r.date);
        if (di < 0) {
            if (r.date < calendar.first() || r.date > calendar.last()) continue;
            throw DataError(where + " falls on a non-trading day");
        }
        if (!std::isnan(open(di, fi))) throw DataError("duplicate " + where);
        open(di, fi) = r.open;
        close(di, fi) = r.close;
    }
    for (std::size_t i = 0; i < dividends.size(); ++i) {
        const auto& r = dividends[i];
        if (!(r.amount >= 0.0) || !std::isfinite(r.amount))
            throw DataError("invalid dividend amount in dividend row " + std::to_string(i + 1));
        const int fi = panel.firm_index(r.firm);
        const int di = panel.day_index(r.ex_date);
        if (fi < 0 || di < 0) continue;
        div(di, fi) += r.amount;
    }
    for (Eigen::Index d = 0; d < D; ++d) {
        const Date day = panel.days()[static_cast<std::size_t>(d)];
        for (Eigen::Index f = 0; f < F; ++f) {
            if (!membership.in_index(panel.firms()[static_cast<std::size_t>(f)], day)) continue;
            if (std::isnan(open(d, f))) continue;
            panel.at(Period::Intraday, static_cast<int>(d), static_cast<int>(f)) = std::log(close(d, f) / open(d, f));
            if (d > 0 && !std::isnan(close(d - 1, f)))
                panel.at(Period::Overnight, static_cast<int>(d), static_cast<int>(f)) =
                    std::log((open(d, f) + div(d, f)) / close(d - 1, f));
        }
    }
    return panel;
}

void write_returns_csv(const std::string& path, const ReturnPanel& panel) {
    CsvWriter w(path);
    w.row({"firm_id", "date", "intraday", "overnight"});
    for (std::size_t f = 0; f < panel.firms().size(); ++f) {
        for (std::size_t d = 0; d < panel.days().size(); ++d) {
            const double ri = panel.at(Period::Intraday, static_cast<int>(d), static_cast<int>(f));
            const double ro = panel.at(Period::Overnight, static_cast<int>(d), static_cast<int>(f));
            if (std::isnan(ri) && std::isnan(ro)) continue;
            w.field(panel.firms()[f]).field(format_date(panel.days()[d])).field(ri).field(ro);
            w.end_row();
        }
    }
}

ReturnPanel read_returns_csv(const std::string& path, const TradingCalendar& calendar) {
    const CsvTable t = read_csv(path);
    const auto cf = t.column("firm_id");
    const auto cd = t.column("date");
    const auto ci = t.column("intraday");
    const auto co = t.column("overnight");
    std::set<int> firms;
    for (const auto& r : t.rows) firms.insert(static_cast<int>(parse_long(r.at(cf), "firm_id")));
    ReturnPanel panel(calendar.trading_days(), std::vector<int>(firms.begin(), firms.end()));
    for (const auto& r : t.rows) {
        const int fi = panel.firm_index(static_cast<int>(parse_long(r.at(cf), "firm_id")));
        const int di = panel.day_index(parse_date(r.at(cd)));
        if (di < 0) throw DataError(path + ": return dated " + r.at(cd) + " is not a trading day");
        panel.at(Period::Intraday, di, fi) = parse_double(r.at(ci), "intraday");
        panel.at(Period::Overnight, di, fi) = parse_double(r.at(co), "overnight");
    }
    return panel;
}

}  // namespace newsflow
