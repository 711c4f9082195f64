#include <newsflow/econometrics.hpp>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>

namespace newsflow {

std::string_view to_string(CovarianceType t) {
    switch (t) {
        case CovarianceType::Iid: return "iid";
        case CovarianceType::White: return "white";
        case CovarianceType::NeweyWest: return "newey_west";
        case CovarianceType::Cluster1: return "cluster1";
        case CovarianceType::Cluster2: return "cluster2";
    }
    return "unknown";
}

double RegressionResult::se(int i) const { return std::sqrt(std::max(0.0, covariance(i, i))); }

double RegressionResult::p_value(int i) const {
    const double s = se(i);
    if (!(s > 0.0)) return coefficients(i) == 0.0 ? 1.0 : 0.0;
    const double t = std::abs(coefficients(i) / s);
    if (!std::isfinite(t)) return 0.0;
    int dof = 0;
    if (se_type == CovarianceType::Iid) dof = residual_dof;
    if (se_type == CovarianceType::Cluster1 || se_type == CovarianceType::Cluster2) dof = clusters - 1;
    if (dof > 0) {
        boost::math::students_t dist(dof);
        return 2.0 * boost::math::cdf(boost::math::complement(dist, t));
    }
    boost::math::normal dist;
    return 2.0 * boost::math::cdf(boost::math::complement(dist, t));
}

int RegressionResult::index(std::string_view name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return static_cast<int>(i);
    throw DataError("no coefficient named '" + std::string(name) + "'");
}

namespace {

std::string column_name(const std::vector<std::string>& names, Eigen::Index j) {
    if (static_cast<std::size_t>(j) < names.size()) return names[static_cast<std::size_t>(j)];
    return "x" + std::to_string(j);
}

constexpr double kRankThreshold = 1e-10;

// Columns that add nothing to the span of the columns before them.
std::vector<Eigen::Index> dependent_columns(const Eigen::MatrixXd& X) {
    std::vector<Eigen::Index> kept;
    std::vector<Eigen::Index> dependent;
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        Eigen::MatrixXd sub(X.rows(), static_cast<Eigen::Index>(kept.size()) + 1);
        for (std::size_t c = 0; c < kept.size(); ++c) sub.col(static_cast<Eigen::Index>(c)) = X.col(kept[c]);
        sub.col(sub.cols() - 1) = X.col(j);
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(sub);
        qr.setThreshold(kRankThreshold);
        if (qr.rank() == sub.cols())
            kept.push_back(j);
        else
            dependent.push_back(j);
    }
    return dependent;
}

RegressionResult base_result(const OlsFit& fit) {
    RegressionResult r;
    r.coefficients = fit.beta;
    r.names = fit.names;
    r.nobs = fit.nobs();
    r.r2 = fit.r2;
    r.adj_r2 = fit.adj_r2;
    r.residual_dof = static_cast<int>(fit.nobs()) - fit.k() - fit.absorbed_dof;
    return r;
}

Eigen::MatrixXd sandwich(const OlsFit& fit, const Eigen::MatrixXd& meat) {
    Eigen::MatrixXd v = fit.xtx_inv * meat * fit.xtx_inv;
    return 0.5 * (v + v.transpose());
}

std::vector<int> dense_labels(const std::vector<long long>& labels, int* count) {
    std::map<long long, int> ids;
    for (auto l : labels) ids.emplace(l, 0);
    int next = 0;
    for (auto& [_, id] : ids) id = next++;
    std::vector<int> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) out[i] = ids[labels[i]];
    if (count) *count = next;
    return out;
}

}  // namespace

OlsFit ols_fit(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, std::vector<std::string> names,
               const Eigen::VectorXd* weights) {
    const Eigen::Index n = X.rows();
    const Eigen::Index p = X.cols();
    if (y.size() != n) throw DataError("ols: response length differs from design rows");
    if (p == 0) throw DataError("ols: empty design");
    if (n < p) throw NumericalError("ols: fewer observations than regressors");
    if (!X.allFinite() || !y.allFinite()) throw DataError("ols: non-finite values in the data");
    OlsFit fit;
    fit.names = std::move(names);
    if (weights) {
        if (weights->size() != n || (weights->array() < 0.0).any()) throw DataError("ols: invalid weights");
        const Eigen::ArrayXd sw = weights->array().sqrt();
        fit.X = X.array().colwise() * sw;
        fit.y = y.array() * sw;
    } else {
        fit.X = X;
        fit.y = y;
    }
    {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(fit.X);
        qr.setThreshold(kRankThreshold);
        if (qr.rank() < p) {
            std::string msg = "ols: rank-deficient design; linearly dependent columns:";
            for (auto j : dependent_columns(fit.X)) msg += " " + column_name(fit.names, j);
            throw NumericalError(msg);
        }
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(fit.X);
    fit.beta = qr.solve(fit.y);
    const Eigen::MatrixXd R = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
    const Eigen::MatrixXd Rinv =
        R.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
    fit.xtx_inv = Rinv * Rinv.transpose();
    fit.residuals = fit.y - fit.X * fit.beta;
    const double sse = fit.residuals.squaredNorm();
    const double sst = (fit.y.array() - fit.y.mean()).square().sum();
    fit.r2 = sst > 0.0 ? 1.0 - sse / sst : 0.0;
    const double denom = static_cast<double>(n - p);
    fit.adj_r2 = denom > 0.0 ? 1.0 - (1.0 - fit.r2) * static_cast<double>(n - 1) / denom : fit.r2;
    return fit;
}

RegressionResult iid(const OlsFit& fit) {
    RegressionResult r = base_result(fit);
    r.se_type = CovarianceType::Iid;
    if (r.residual_dof <= 0) throw NumericalError("ols: no residual degrees of freedom");
    const double s2 = fit.residuals.squaredNorm() / r.residual_dof;
    r.covariance = s2 * fit.xtx_inv;
    return r;
}

RegressionResult white(const OlsFit& fit) {
    RegressionResult r = base_result(fit);
    r.se_type = CovarianceType::White;
    const Eigen::MatrixXd xe = fit.X.array().colwise() * fit.residuals.array();
    r.covariance = sandwich(fit, xe.transpose() * xe);
    return r;
}

RegressionResult ols(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, std::vector<std::string> names) {
    return iid(ols_fit(y, X, std::move(names)));
}

int newey_west_auto_lag(std::size_t T) {
    return static_cast<int>(std::floor(4.0 * std::pow(static_cast<double>(T) / 100.0, 2.0 / 9.0)));
}

RegressionResult newey_west(const OlsFit& fit, std::optional<int> lags) {
    const auto T = static_cast<Eigen::Index>(fit.nobs());
    if (T < 2) throw NumericalError("newey_west: need at least two observations");
    int L = lags ? *lags : newey_west_auto_lag(static_cast<std::size_t>(T));
    if (L < 0) throw ConfigError("newey_west: negative lag");
    L = static_cast<int>(std::min<Eigen::Index>(L, T - 1));
    const Eigen::MatrixXd xe = fit.X.array().colwise() * fit.residuals.array();
    Eigen::MatrixXd meat = xe.transpose() * xe;
    for (int l = 1; l <= L; ++l) {
        const double w = 1.0 - static_cast<double>(l) / (L + 1);
        const Eigen::MatrixXd g = xe.bottomRows(T - l).transpose() * xe.topRows(T - l);
        meat += w * (g + g.transpose());
    }
    RegressionResult r = base_result(fit);
    r.se_type = CovarianceType::NeweyWest;
    r.nw_lags = L;
    r.covariance = sandwich(fit, meat);
    return r;
}

Eigen::MatrixXd cluster_covariance(const OlsFit& fit, const std::vector<long long>& labels,
                                   const ClusterOptions& options, int* clusters) {
    if (labels.size() != fit.nobs()) throw DataError("cluster labels do not match observations");
    int G = 0;
    const auto ids = dense_labels(labels, &G);
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(G, fit.k());
    for (std::size_t i = 0; i < ids.size(); ++i)
        sums.row(ids[i]) += fit.X.row(static_cast<Eigen::Index>(i)) * fit.residuals(static_cast<Eigen::Index>(i));
    Eigen::MatrixXd v = sandwich(fit, sums.transpose() * sums);
    if (options.finite_sample && G > 1) {
        const double n = static_cast<double>(fit.nobs());
        v *= static_cast<double>(G) / (G - 1) * (n - 1) / (n - fit.k());
    }
    if (clusters) *clusters = G;
    return v;
}

CgmComponents cgm_components(const OlsFit& fit, const std::vector<long long>& dim1, const std::vector<long long>& dim2,
                             const ClusterOptions& options) {
    if (dim1.size() != dim2.size()) throw DataError("cluster dimensions differ in length");
    std::map<std::pair<long long, long long>, long long> pair_ids;
    std::vector<long long> both(dim1.size());
    for (std::size_t i = 0; i < dim1.size(); ++i) {
        auto [it, _] = pair_ids.emplace(std::make_pair(dim1[i], dim2[i]), static_cast<long long>(pair_ids.size()));
        both[i] = it->second;
    }
    CgmComponents c;
    c.v1 = cluster_covariance(fit, dim1, options, &c.g1);
    c.v2 = cluster_covariance(fit, dim2, options, &c.g2);
    c.v12 = cluster_covariance(fit, both, options, &c.g12);
    return c;
}

RegressionResult clustered(const OlsFit& fit, const std::vector<long long>& dim1, const std::vector<long long>* dim2,
                           const ClusterOptions& options) {
    RegressionResult r = base_result(fit);
    if (!dim2) {
        int G = 0;
        r.covariance = cluster_covariance(fit, dim1, options, &G);
        if (G < 2) throw DataError("clustering dimension has a single cluster");
        r.se_type = CovarianceType::Cluster1;
        r.clusters = G;
        return r;
    }
    const CgmComponents c = cgm_components(fit, dim1, *dim2, options);
    if (c.g1 < 2 || c.g2 < 2) throw DataError("clustering dimension has a single cluster");
    Eigen::MatrixXd v = c.v1 + c.v2 - c.v12;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(v);
    const Eigen::VectorXd ev = es.eigenvalues();
    const double scale = ev.cwiseAbs().maxCoeff();
    if (ev.minCoeff() < -1e-12 * std::max(scale, 1e-300)) {
        v = es.eigenvectors() * ev.cwiseMax(0.0).asDiagonal() * es.eigenvectors().transpose();
        r.psd_repaired = true;
    }
    r.covariance = v;
    r.se_type = CovarianceType::Cluster2;
    r.clusters = std::min(c.g1, c.g2);
    return r;
}

void demean(Eigen::MatrixXd& M, const std::vector<std::vector<long long>>& groups, double tolerance,
            int max_iterations) {
    if (groups.empty() || M.size() == 0) return;
    std::vector<std::vector<int>> ids;
    std::vector<std::vector<double>> counts;
    for (const auto& g : groups) {
        if (static_cast<Eigen::Index>(g.size()) != M.rows()) throw DataError("fixed-effect labels do not match rows");
        int G = 0;
        ids.push_back(dense_labels(g, &G));
        std::vector<double> c(static_cast<std::size_t>(G), 0.0);
        for (int id : ids.back()) c[id] += 1.0;
        counts.push_back(std::move(c));
    }
    const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
    Eigen::MatrixXd means;
    for (int it = 0; it < max_iterations; ++it) {
        double change = 0.0;
        for (std::size_t g = 0; g < ids.size(); ++g) {
            means.setZero(static_cast<Eigen::Index>(counts[g].size()), M.cols());
            for (Eigen::Index i = 0; i < M.rows(); ++i) means.row(ids[g][i]) += M.row(i);
            for (Eigen::Index k = 0; k < means.rows(); ++k) means.row(k) /= counts[g][k];
            for (Eigen::Index i = 0; i < M.rows(); ++i) M.row(i) -= means.row(ids[g][i]);
            change = std::max(change, means.cwiseAbs().maxCoeff());
        }
        if (ids.size() == 1 || change < tolerance * scale) return;
    }
    throw NumericalError("fixed-effect demeaning did not converge");
}

RegressionResult panel_fe(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, std::vector<std::string> names,
                          const PanelSpec& spec) {
    const Eigen::Index n = X.rows();
    if (y.size() != n) throw DataError("panel_fe: response length differs from design rows");
    Eigen::MatrixXd M(n, X.cols() + 1);
    M.col(0) = y;
    M.rightCols(X.cols()) = X;
    int absorbed = 0;
    if (!spec.fixed_effects.empty()) {
        const Eigen::VectorXd norms = M.colwise().norm();
        demean(M, spec.fixed_effects, spec.tolerance, spec.max_iterations);
        for (Eigen::Index j = 1; j < M.cols(); ++j) {
            if (M.col(j).norm() <= 1e-9 * std::max(norms(j), 1e-300))
                throw NumericalError("panel_fe: regressor '" + column_name(names, j - 1) +
                                     "' is constant within the fixed-effect groups");
        }
        for (std::size_t g = 0; g < spec.fixed_effects.size(); ++g) {
            int G = 0;
            dense_labels(spec.fixed_effects[g], &G);
            absorbed += g == 0 ? G : G - 1;
        }
    }
    Eigen::MatrixXd design;
    if (spec.fixed_effects.empty() && spec.intercept) {
        design.resize(n, X.cols() + 1);
        design.col(0).setOnes();
        design.rightCols(X.cols()) = M.rightCols(X.cols());
        names.insert(names.begin(), "const");
    } else {
        design = M.rightCols(X.cols());
    }
    OlsFit fit = ols_fit(M.col(0), design, std::move(names));
    fit.absorbed_dof = absorbed;
    if (spec.clusters.empty()) return iid(fit);
    if (spec.clusters.size() == 1) return clustered(fit, spec.clusters[0], nullptr, spec.cluster_options);
    if (spec.clusters.size() == 2)
        return clustered(fit, spec.clusters[0], &spec.clusters[1], spec.cluster_options);
    throw ConfigError("panel_fe: at most two clustering dimensions");
}

WaldResult wald_equality(const RegressionResult& result, const std::vector<std::pair<int, int>>& pairs) {
    const auto p = result.coefficients.size();
    const auto q = static_cast<Eigen::Index>(pairs.size());
    if (q == 0) throw ConfigError("wald_equality: no restrictions");
    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(q, p);
    for (Eigen::Index r = 0; r < q; ++r) {
        const auto [i, j] = pairs[static_cast<std::size_t>(r)];
        if (i < 0 || j < 0 || i >= p || j >= p || i == j) throw ConfigError("wald_equality: bad index pair");
        R(r, i) = 1.0;
        R(r, j) = -1.0;
    }
    const Eigen::VectorXd rb = R * result.coefficients;
    const Eigen::MatrixXd rvr = R * result.covariance * R.transpose();
    Eigen::FullPivLU<Eigen::MatrixXd> lu(rvr);
    lu.setThreshold(1e-12);
    if (lu.rank() < q) throw NumericalError("wald_equality: singular restriction covariance");
    WaldResult w;
    w.q = static_cast<int>(q);
    const double chi2 = rb.dot(lu.solve(rb));
    if (result.clusters > 1) {
        w.statistic = chi2 / static_cast<double>(q);
        w.denominator_dof = result.clusters - 1;
        boost::math::fisher_f dist(static_cast<double>(q), static_cast<double>(w.denominator_dof));
        w.p_value = w.statistic > 0.0 ? boost::math::cdf(boost::math::complement(dist, w.statistic)) : 1.0;
    } else {
        w.statistic = chi2;
        boost::math::chi_squared dist(static_cast<double>(q));
        w.p_value = chi2 > 0.0 ? boost::math::cdf(boost::math::complement(dist, chi2)) : 1.0;
    }
    return w;
}

std::string stars(double p) {
    if (p < 0.01) return "***";
    if (p < 0.05) return "**";
    if (p < 0.1) return "*";
    return "";
}

std::vector<CorrelationCell> correlation_table(const std::vector<AnnualReturnRow>& rows) {
    std::map<std::pair<int, int>, const AnnualReturnRow*> index;
    for (const auto& r : rows) {
        if (!index.emplace(std::make_pair(r.firm, r.year), &r).second)
            throw DataError("correlation_table: duplicate firm-year " + std::to_string(r.firm) + "/" +
                            std::to_string(r.year));
    }
    std::vector<std::array<double, 3>> lag;
    std::vector<std::array<double, 3>> lead;
    std::vector<long long> years;
    std::vector<long long> firms;
    for (const auto& [key, r] : index) {
        auto it = index.find({key.first, key.second + 1});
        if (it == index.end()) continue;
        const auto* nx = it->second;
        lag.push_back({r->intraday, r->overnight, r->intraday + r->overnight});
        lead.push_back({nx->intraday, nx->overnight, nx->intraday + nx->overnight});
        years.push_back(key.second);
        firms.push_back(key.first);
    }
    const auto n = static_cast<Eigen::Index>(lag.size());
    if (n < 3) throw DataError("correlation_table: fewer than 3 consecutive firm-year pairs");
    auto standardized = [&](const std::vector<std::array<double, 3>>& src, int c) {
        Eigen::VectorXd v(n);
        for (Eigen::Index i = 0; i < n; ++i) v(i) = src[static_cast<std::size_t>(i)][c];
        const double m = v.mean();
        const double sd = std::sqrt((v.array() - m).square().sum() / static_cast<double>(n - 1));
        if (!(sd > 0.0)) throw NumericalError("correlation_table: constant return series");
        return Eigen::VectorXd((v.array() - m) / sd);
    };
    static const char* kLag[3] = {"r_intra_t", "r_over_t", "r_t"};
    static const char* kLead[3] = {"r_intra_t1", "r_over_t1", "r_t1"};
    std::vector<CorrelationCell> cells;
    for (int a = 0; a < 3; ++a) {
        const Eigen::VectorXd x = standardized(lag, a);
        for (int b = 0; b < 3; ++b) {
            const Eigen::VectorXd y = standardized(lead, b);
            CorrelationCell cell;
            cell.lag = kLag[a];
            cell.lead = kLead[b];
            cell.correlation = x.dot(y) / static_cast<double>(n - 1);
            cell.nobs = static_cast<std::size_t>(n);
            Eigen::MatrixXd X(n, 2);
            X.col(0).setOnes();
            X.col(1) = x;
            const OlsFit fit = ols_fit(y, X, {"const", "lag"});
            cell.p_value = clustered(fit, years, &firms).p_value(1);
            cells.push_back(cell);
        }
    }
    return cells;
}

}  // namespace newsflow
