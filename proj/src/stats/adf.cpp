#include "stats/adf.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <limits>

#include "common/error.hpp"

namespace vr::stats {

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Column 0 holds y_{t-1}, columns 1..lags the lagged differences, the last
// column the constant. Rows cover t = first..n-1 of the differenced series.
Eigen::MatrixXd design(const std::vector<double>& y, const std::vector<double>& dy, int lags, int first) {
    const int rows = static_cast<int>(dy.size()) - first;
    Eigen::MatrixXd x(rows, lags + 2);
    for (int r = 0; r < rows; ++r) {
        const int t = first + r;
        x(r, 0) = y[t];
        for (int l = 1; l <= lags; ++l) x(r, l) = dy[t - l];
        x(r, lags + 1) = 1.0;
    }
    return x;
}

Eigen::VectorXd response(const std::vector<double>& dy, int first) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(dy.size()) - first);
    for (Eigen::Index r = 0; r < v.size(); ++r) v(r) = dy[first + r];
    return v;
}

}  // namespace

OlsFit ols_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    const auto n = x.rows(), k = x.cols();
    if (n <= k) fail(ErrorCode::TooShort, "regression has no residual degrees of freedom");
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(x);
    OlsFit f;
    f.coef = qr.solve(y);
    f.resid = y - x * f.coef;
    f.ssr = f.resid.squaredNorm();
    const Eigen::MatrixXd r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    const Eigen::MatrixXd rinv = r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(k, k));
    const double sigma2 = f.ssr / double(n - k);
    f.stderr_ = (rinv.rowwise().squaredNorm() * sigma2).cwiseSqrt();
    const double llf = -0.5 * double(n) * (std::log(2.0 * 3.14159265358979323846) + std::log(f.ssr / double(n)) + 1.0);
    f.aic = -2.0 * llf + 2.0 * double(k);
    return f;
}

double mackinnon_p(double stat) {
    // statsmodels adfvalues: tau_max/min/star and the small/large-p
    // polynomials for regression "c", N = 1 (coefficients by increasing power).
    constexpr double tau_max = 2.74, tau_min = -18.83, tau_star = -1.61;
    constexpr double small_p[] = {2.1659, 1.4412, 3.8269e-2};
    constexpr double large_p[] = {1.7339, 9.3202e-1, -1.2745e-1, -1.0368e-2};
    if (std::isnan(stat)) return 1.0;
    if (stat > tau_max) return 1.0;
    if (stat < tau_min) return 0.0;
    auto poly = [stat](const double* c, int n) {
        double acc = 0.0;
        for (int i = n - 1; i >= 0; --i) acc = acc * stat + c[i];
        return acc;
    };
    const double z = stat <= tau_star ? poly(small_p, 3) : poly(large_p, 4);
    return std::clamp(normal_cdf(z), 0.0, 1.0);
}

AdfResult adf_test(std::span<const double> series, std::optional<int> max_lags) {
    const int n = static_cast<int>(series.size());
    if (n < 8) fail(ErrorCode::TooShort, "ADF needs at least 8 observations, got " + std::to_string(n));
    const auto [lo, hi] = std::minmax_element(series.begin(), series.end());
    if (*lo == *hi) fail(ErrorCode::ConstantSeries, "ADF input series is constant");

    const int cap = n / 2 - 2;
    int maxlag = max_lags ? *max_lags : static_cast<int>(std::floor(12.0 * std::pow(n / 100.0, 0.25)));
    if (maxlag < 0) fail(ErrorCode::InvalidArgument, "max_lags must be non-negative");
    maxlag = std::min(maxlag, cap);

    const std::vector<double> y(series.begin(), series.end());
    std::vector<double> dy(n - 1);
    for (int t = 1; t < n; ++t) dy[t - 1] = y[t] - y[t - 1];

    // Lag search on the sample usable by the largest model.
    int best = 0;
    double best_aic = std::numeric_limits<double>::infinity();
    const Eigen::VectorXd common_y = response(dy, maxlag);
    for (int lag = 0; lag <= maxlag; ++lag) {
        const Eigen::MatrixXd x = design(y, dy, lag, maxlag);
        const double aic = ols_fit(x, common_y).aic;
        if (aic < best_aic) {
            best_aic = aic;
            best = lag;
        }
    }

    const Eigen::MatrixXd x = design(y, dy, best, best);
    const OlsFit fit = ols_fit(x, response(dy, best));
    if (!(fit.stderr_(0) > 0.0) || fit.ssr <= 1e-28 * std::max(1.0, response(dy, best).squaredNorm()))
        fail(ErrorCode::ConstantSeries, "ADF regression fits the series exactly");

    AdfResult r;
    r.statistic = fit.coef(0) / fit.stderr_(0);
    r.p_value = mackinnon_p(r.statistic);
    r.lags = best;
    r.n_obs = static_cast<int>(x.rows());
    return r;
}

}  // namespace vr::stats
