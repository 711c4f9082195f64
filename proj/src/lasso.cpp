#include <newsflow/lasso.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace newsflow {

namespace {

double soft(double x, double t) {
    if (x > t) return x - t;
    if (x < -t) return x + t;
    return 0.0;
}

}  // namespace

LassoProblem::LassoProblem(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, const Eigen::MatrixXd& U)
    : y_(y), X_(X), U_(U) {
    if (y.size() == 0) throw DataError("lasso: empty training set");
    if (X.rows() != y.size() || U.rows() != y.size()) throw ConfigError("lasso: row count mismatch");
    if (U.cols() == 0) throw ConfigError("lasso: at least one unpenalized column is required");
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> cp(U);
    cp.setThreshold(1e-10);
    if (cp.rank() < U.cols()) throw NumericalError("lasso: unpenalized block is rank deficient");
    u_qr_.compute(U);
    y_res_ = y - U * u_qr_.solve(y);
    const Eigen::MatrixXd xr = X - U * u_qr_.solve(X);
    const double n = static_cast<double>(y.size());
    std::vector<double> sds;
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        const double sd = std::sqrt(xr.col(j).squaredNorm() / n);
        const double ref = std::max(1.0, X.col(j).cwiseAbs().maxCoeff());
        if (sd <= 1e-12 * ref) {
            dropped_.push_back(static_cast<int>(j));
        } else {
            active_.push_back(static_cast<int>(j));
            sds.push_back(sd);
        }
    }
    z_.resize(X.rows(), static_cast<Eigen::Index>(active_.size()));
    scale_.resize(static_cast<Eigen::Index>(active_.size()));
    for (std::size_t a = 0; a < active_.size(); ++a) {
        scale_(static_cast<Eigen::Index>(a)) = sds[a];
        z_.col(static_cast<Eigen::Index>(a)) = xr.col(active_[a]) / sds[a];
    }
}

double LassoProblem::lambda_max() const {
    if (z_.cols() == 0) return 0.0;
    return (z_.transpose() * y_res_).cwiseAbs().maxCoeff() / static_cast<double>(n());
}

Eigen::VectorXd LassoProblem::gamma_for(const Eigen::VectorXd& beta) const { return u_qr_.solve(y_ - X_ * beta); }

LassoFit LassoProblem::fit(double lambda, const LassoOptions& options, const LassoFit* warm) const {
    const Eigen::Index m = z_.cols();
    const double n = static_cast<double>(this->n());
    Eigen::VectorXd b = Eigen::VectorXd::Zero(m);
    if (warm) {
        for (Eigen::Index a = 0; a < m; ++a) b(a) = warm->beta(active_[static_cast<std::size_t>(a)]) * scale_(a);
    }
    Eigen::VectorXd r = y_res_ - z_ * b;
    LassoFit out;
    out.lambda = lambda;
    for (int sweep = 1; sweep <= options.max_sweeps; ++sweep) {
        double max_change = 0.0;
        for (Eigen::Index j = 0; j < m; ++j) {
            const double zz = z_.col(j).squaredNorm() / n;
            const double rho = z_.col(j).dot(r) / n + zz * b(j);
            const double nb = soft(rho, lambda) / zz;
            const double d = nb - b(j);
            if (d != 0.0) {
                r -= d * z_.col(j);
                b(j) = nb;
                max_change = std::max(max_change, std::abs(d));
            }
        }
        out.sweeps = sweep;
        if (max_change < options.tolerance) {
            out.converged = true;
            break;
        }
    }
    if (!out.converged) throw NumericalError("lasso: coordinate descent did not converge at lambda " + std::to_string(lambda));
    out.beta = Eigen::VectorXd::Zero(p());
    for (Eigen::Index a = 0; a < m; ++a) out.beta(active_[static_cast<std::size_t>(a)]) = b(a) / scale_(a);
    out.gamma = gamma_for(out.beta);
    return out;
}

std::vector<LassoFit> LassoProblem::path(const std::vector<double>& lambdas, const LassoOptions& options) const {
    std::vector<LassoFit> fits;
    fits.reserve(lambdas.size());
    for (double l : lambdas) fits.push_back(fit(l, options, fits.empty() ? nullptr : &fits.back()));
    return fits;
}

double LassoProblem::kkt_violation(const LassoFit& f) const {
    const double n = static_cast<double>(this->n());
    const Eigen::VectorXd r = y_ - X_ * f.beta - U_ * f.gamma;
    double worst = (U_.transpose() * r).cwiseAbs().maxCoeff() / n;
    // Residual orthogonal to U, so z'r equals the standardized gradient.
    for (std::size_t a = 0; a < active_.size(); ++a) {
        const auto ai = static_cast<Eigen::Index>(a);
        const double g = z_.col(ai).dot(r) / n;
        const double b = f.beta(active_[a]);
        const double v = b != 0.0 ? std::abs(g - f.lambda * (b > 0 ? 1.0 : -1.0)) : std::max(0.0, std::abs(g) - f.lambda);
        worst = std::max(worst, v);
    }
    return worst;
}

Eigen::VectorXd LassoProblem::predict(const LassoFit& f, const Eigen::MatrixXd& X, const Eigen::MatrixXd& U) const {
    return U * f.gamma + X * f.beta;
}

std::vector<double> lambda_grid(double lambda_max, const LassoOptions& options) {
    std::vector<double> g;
    const int n = std::max(1, options.n_lambda);
    if (!(lambda_max > 0.0)) return std::vector<double>(1, 0.0);
    const double lo = std::log(options.lambda_min_ratio);
    for (int i = 0; i < n; ++i) {
        const double frac = n == 1 ? 0.0 : static_cast<double>(i) / (n - 1);
        g.push_back(lambda_max * std::exp(lo * frac));
    }
    return g;
}

LassoCvResult lasso_cv(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, const Eigen::MatrixXd& U,
                       const std::vector<int>& fold, const LassoOptions& options) {
    if (static_cast<Eigen::Index>(fold.size()) != y.size()) throw ConfigError("lasso_cv: fold vector size mismatch");
    const LassoProblem full(y, X, U);
    LassoCvResult out;
    out.dropped_columns = full.dropped_columns();
    out.lambdas = lambda_grid(full.lambda_max(), options);
    const std::size_t L = out.lambdas.size();
    const int K = options.folds;
    std::vector<std::vector<double>> sse(static_cast<std::size_t>(K), std::vector<double>(L, 0.0));
    std::vector<std::string> errors(static_cast<std::size_t>(K));
    for (int f : fold)
        if (f < 0 || f >= K) throw ConfigError("lasso_cv: fold id out of range");

#pragma omp parallel for schedule(dynamic, 1) if (options.parallel)
    for (int k = 0; k < K; ++k) {
        try {
            std::vector<Eigen::Index> tr, te;
            for (std::size_t i = 0; i < fold.size(); ++i)
                (fold[i] == k ? te : tr).push_back(static_cast<Eigen::Index>(i));
            if (te.empty()) continue;
            if (tr.empty()) throw DataError("lasso_cv: a fold leaves no training rows");
            const LassoProblem prob(y(tr), X(tr, Eigen::all), U(tr, Eigen::all));
            const auto fits = prob.path(out.lambdas, options);
            const Eigen::MatrixXd Xt = X(te, Eigen::all);
            const Eigen::MatrixXd Ut = U(te, Eigen::all);
            const Eigen::VectorXd yt = y(te);
            for (std::size_t l = 0; l < L; ++l) sse[static_cast<std::size_t>(k)][l] = (yt - prob.predict(fits[l], Xt, Ut)).squaredNorm();
        } catch (const std::exception& e) {
            errors[static_cast<std::size_t>(k)] = e.what();
        }
    }
    for (const auto& e : errors)
        if (!e.empty()) throw NumericalError("lasso_cv: " + e);

    out.cv_mse.assign(L, 0.0);
    for (std::size_t l = 0; l < L; ++l) {
        for (int k = 0; k < K; ++k) out.cv_mse[l] += sse[static_cast<std::size_t>(k)][l];
        out.cv_mse[l] /= static_cast<double>(y.size());
    }
    for (std::size_t l = 1; l < L; ++l)
        if (out.cv_mse[l] < out.cv_mse[static_cast<std::size_t>(out.best)]) out.best = static_cast<int>(l);
    const std::vector<double> head(out.lambdas.begin(), out.lambdas.begin() + out.best + 1);
    out.fit = full.path(head, options).back();
    return out;
}

}  // namespace newsflow
