#pragma once

#include <string>
#include <vector>

#include "haelt/errors.hpp"

namespace haelt::baseline {

// AR(p) on the once-differenced series, fitted by OLS with intercept.
struct ArimaModel {
    int p = 5;
    int d = 1;
    int q = 0;
    double intercept = 0.0;
    std::vector<double> phi;
    double sigma2 = 0.0;

    // One-step forecast of the next difference from trailing level history.
    double forecast_diff(const std::vector<double>& levels) const;
    // P(next difference > 0) via the Gaussian CDF at forecast/sigma.
    double direction_probability(const std::vector<double>& levels) const;
    // In-sample one-step predictions over the fitting design rows.
    std::vector<double> fitted_diffs(const std::vector<double>& levels) const;
};

ArimaModel fit_arima(const std::vector<double>& levels, int p = 5);

struct GarchModel {
    double omega = 0.0;
    double alpha = 0.0;
    double beta = 0.0;
    double mean = 0.0;       // demeaning constant
    double sigma0_sq = 0.0;  // recursion start (sample variance)
    double log_likelihood = 0.0;
    int iterations = 0;

    // Conditional variance path for a return series (after demeaning).
    std::vector<double> variance_path(const std::vector<double>& returns) const;
};

struct GarchFitOptions {
    int max_iters = 600;
    double grad_tol = 1e-6;
    double ll_tol = 1e-10;
    // stop when the gain over this many accepted steps falls below
    // window_tol * max(1, |ll|); catches flat likelihood ridges
    int window = 15;
    double window_tol = 1e-8;
    std::vector<double>* ll_trace = nullptr;  // accepted log-likelihood per iteration
};

// Thrown on non-convergence; carries the best parameters found so far.
struct GarchError : NumericError {
    GarchError(const std::string& msg, GarchModel best_so_far)
        : NumericError(msg), best(std::move(best_so_far)) {}
    GarchModel best;
};

// Gaussian MLE by gradient ascent through the autodiff engine, with the
// stationarity constraint alpha + beta < 1 enforced by reparameterization
// (omega = exp(a), alpha = s*u, beta = s*(1-u), s and u sigmoids).
GarchModel fit_garch(const std::vector<double>& returns, const GarchFitOptions& opts = {});

struct LogisticModel {
    std::vector<double> weights;
    double bias = 0.0;
    double l2 = 1.0;

    double predict_one(const std::vector<double>& x) const;
    std::vector<double> predict(const std::vector<std::vector<double>>& rows) const;
};

struct LogisticFitOptions {
    int max_iters = 20000;
    double grad_tol = 1e-6;
};

// Minimises mean BCE + (l2 / 2N) ||w||^2 (bias unpenalised) by gradient
// descent with backtracking line search.
LogisticModel fit_logistic(const std::vector<std::vector<double>>& rows,
                           const std::vector<int>& labels, double l2 = 1.0,
                           const LogisticFitOptions& opts = {});

// Standard normal CDF.
double normal_cdf(double x);

}  // namespace haelt::baseline
