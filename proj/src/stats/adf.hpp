#pragma once

#include <Eigen/Core>
#include <optional>
#include <span>

namespace vr::stats {

struct AdfResult {
    double statistic = 0.0;
    double p_value = 1.0;
    int lags = 0;
    int n_obs = 0;
};

struct OlsFit {
    Eigen::VectorXd coef;
    Eigen::VectorXd stderr_;
    Eigen::VectorXd resid;
    double ssr = 0.0;
    double aic = 0.0;
};

// Least squares by Householder QR. Standard errors use ssr / (n - k).
OlsFit ols_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

// Augmented Dickey-Fuller test with a constant and no trend:
//   dy_t = a + g * y_{t-1} + sum_i f_i * dy_{t-i} + e_t
// The lag order minimises AIC over 0..max_lags on a common sample, then the
// chosen model is refitted on all usable observations. Default max_lags is
// floor(12 * (n/100)^(1/4)), capped at n/2 - 2.
// Throws TooShort (n < 8), ConstantSeries (zero variance or an exact fit).
AdfResult adf_test(std::span<const double> series, std::optional<int> max_lags = std::nullopt);

// MacKinnon (1994, updated 2010) response-surface p-value for the
// constant-only, single-series case.
double mackinnon_p(double statistic);

}  // namespace vr::stats
