#include "haelt/baselines.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "haelt/tensor.hpp"

namespace haelt::baseline {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

namespace {

std::vector<double> differences(const std::vector<double>& levels) {
    std::vector<double> z(levels.size() - 1);
    for (size_t t = 1; t < levels.size(); ++t) z[t - 1] = levels[t] - levels[t - 1];
    return z;
}

// Gaussian elimination with partial pivoting. Regressors with no mass in the
// data (zero X'X diagonal, e.g. all-zero differences of a constant series)
// get a zero coefficient; a vanishing pivot on a column that does carry mass
// means collinearity and errors out.
std::vector<double> solve_normal_equations(std::vector<std::vector<double>> a,
                                           std::vector<double> b) {
    const size_t n = b.size();
    std::vector<double> x(n, 0.0);
    std::vector<bool> skipped(n, false);
    double scale = 0.0;
    for (const auto& row : a)
        for (const double v : row) scale = std::max(scale, std::abs(v));
    if (scale == 0.0) scale = 1.0;

    std::vector<double> orig_diag(n);
    for (size_t i = 0; i < n; ++i) orig_diag[i] = a[i][i];

    for (size_t k = 0; k < n; ++k) {
        if (std::abs(orig_diag[k]) <= 1e-12 * scale) {
            skipped[k] = true;  // column absent from the data
            continue;
        }
        size_t piv = k;
        for (size_t r = k + 1; r < n; ++r) {
            if (std::abs(a[r][k]) > std::abs(a[piv][k])) piv = r;
        }
        if (std::abs(a[piv][k]) <= 1e-12 * scale) {
            throw NumericError("fit_arima: singular design matrix");
        }
        std::swap(a[k], a[piv]);
        std::swap(b[k], b[piv]);
        for (size_t r = k + 1; r < n; ++r) {
            const double f = a[r][k] / a[k][k];
            if (f == 0.0) continue;
            for (size_t c = k; c < n; ++c) a[r][c] -= f * a[k][c];
            b[r] -= f * b[k];
        }
    }
    for (size_t ki = n; ki-- > 0;) {
        if (skipped[ki]) continue;
        double acc = b[ki];
        for (size_t c = ki + 1; c < n; ++c) acc -= a[ki][c] * x[c];
        x[ki] = acc / a[ki][ki];
    }
    return x;
}

}  // namespace

ArimaModel fit_arima(const std::vector<double>& levels, int p) {
    if (p < 1) throw UsageError("fit_arima: order must be >= 1");
    if (levels.size() <= static_cast<size_t>(2 * (p + 1))) {
        throw DataError("fit_arima: need more than " + std::to_string(2 * (p + 1)) + " points");
    }
    const std::vector<double> z = differences(levels);
    const size_t m = z.size();
    const size_t rows = m - static_cast<size_t>(p);
    const size_t k = static_cast<size_t>(p) + 1;  // intercept + p lags

    // accumulate X'X and X'y
    std::vector<std::vector<double>> xtx(k, std::vector<double>(k, 0.0));
    std::vector<double> xty(k, 0.0);
    std::vector<double> xrow(k);
    for (size_t t = static_cast<size_t>(p); t < m; ++t) {
        xrow[0] = 1.0;
        for (int i = 1; i <= p; ++i) xrow[static_cast<size_t>(i)] = z[t - static_cast<size_t>(i)];
        for (size_t a = 0; a < k; ++a) {
            for (size_t b = 0; b < k; ++b) xtx[a][b] += xrow[a] * xrow[b];
            xty[a] += xrow[a] * z[t];
        }
    }
    const std::vector<double> beta = solve_normal_equations(std::move(xtx), std::move(xty));

    ArimaModel model;
    model.p = p;
    model.intercept = beta[0];
    model.phi.assign(beta.begin() + 1, beta.end());

    double sse = 0.0;
    for (size_t t = static_cast<size_t>(p); t < m; ++t) {
        double pred = model.intercept;
        for (int i = 1; i <= p; ++i) {
            pred += model.phi[static_cast<size_t>(i - 1)] * z[t - static_cast<size_t>(i)];
        }
        const double e = z[t] - pred;
        sse += e * e;
    }
    model.sigma2 = sse / static_cast<double>(rows);
    return model;
}

double ArimaModel::forecast_diff(const std::vector<double>& levels) const {
    if (levels.size() < static_cast<size_t>(p) + 1) {
        throw DataError("forecast: need at least " + std::to_string(p + 1) + " levels");
    }
    double pred = intercept;
    for (int i = 1; i <= p; ++i) {
        const size_t hi = levels.size() - static_cast<size_t>(i);
        pred += phi[static_cast<size_t>(i - 1)] * (levels[hi] - levels[hi - 1]);
    }
    return pred;
}

double ArimaModel::direction_probability(const std::vector<double>& levels) const {
    const double pred = forecast_diff(levels);
    const double sigma = std::sqrt(sigma2);
    if (sigma == 0.0) return pred > 0.0 ? 1.0 : (pred < 0.0 ? 0.0 : 0.5);
    return normal_cdf(pred / sigma);
}

std::vector<double> ArimaModel::fitted_diffs(const std::vector<double>& levels) const {
    const std::vector<double> z = differences(levels);
    std::vector<double> fitted;
    for (size_t t = static_cast<size_t>(p); t < z.size(); ++t) {
        double pred = intercept;
        for (int i = 1; i <= p; ++i) {
            pred += phi[static_cast<size_t>(i - 1)] * z[t - static_cast<size_t>(i)];
        }
        fitted.push_back(pred);
    }
    return fitted;
}

// ---------------------------------------------------------------------------
// GARCH
// ---------------------------------------------------------------------------

namespace {

struct GarchParams {
    double a, b, c;  // omega = exp(a), alpha = s*u, beta = s*(1-u)
};

double sigmoid(double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

GarchModel decode(const GarchParams& t, double mean, double sigma0) {
    GarchModel m;
    m.omega = std::exp(t.a);
    const double s = sigmoid(t.b), u = sigmoid(t.c);
    m.alpha = s * u;
    m.beta = s * (1.0 - u);
    m.mean = mean;
    m.sigma0_sq = sigma0;
    return m;
}

// plain-double log-likelihood, used by the line search
double garch_loglik(const GarchModel& m, const std::vector<double>& eps2) {
    const double log2pi = std::log(2.0 * 3.141592653589793238462643);
    double sig2 = m.sigma0_sq;
    double ll = 0.0;
    for (size_t t = 1; t < eps2.size(); ++t) {
        sig2 = m.omega + m.alpha * eps2[t - 1] + m.beta * sig2;
        ll += -0.5 * (log2pi + std::log(sig2) + eps2[t] / sig2);
    }
    return ll;
}

// gradient of the log-likelihood w.r.t. (a, b, c) through the autodiff graph
std::array<double, 3> garch_grad(const GarchParams& t, double sigma0,
                                 const std::vector<double>& eps2) {
    using ad::Graph;
    using ad::Tensor;
    Graph g;
    Tensor a = Tensor::from_values({1}, {t.a}, true);
    Tensor b = Tensor::from_values({1}, {t.b}, true);
    Tensor c = Tensor::from_values({1}, {t.c}, true);

    Tensor omega = g.exp_op(a);
    Tensor s = g.sigmoid(b);
    Tensor u = g.sigmoid(c);
    Tensor alpha = g.mul(s, u);
    Tensor beta = g.sub(s, alpha);  // s*(1-u) = s - s*u

    Tensor sig2 = Tensor::from_values({1}, {sigma0});
    Tensor acc;  // sum of log(sig2_t) + eps2_t / sig2_t
    for (size_t i = 1; i < eps2.size(); ++i) {
        sig2 = g.add(g.add(omega, g.scale(alpha, eps2[i - 1])), g.mul(beta, sig2));
        Tensor term = g.add(g.log_op(sig2), g.scale(g.recip(sig2), eps2[i]));
        acc = i == 1 ? term : g.add(acc, term);
    }
    // ll = const - 0.5 * acc, so d(ll)/dtheta = -0.5 * d(acc)/dtheta
    g.backward(acc);
    return {-0.5 * (*a.grad)[0], -0.5 * (*b.grad)[0], -0.5 * (*c.grad)[0]};
}

}  // namespace

std::vector<double> GarchModel::variance_path(const std::vector<double>& returns) const {
    std::vector<double> sig2(returns.size());
    if (returns.empty()) return sig2;
    sig2[0] = sigma0_sq;
    for (size_t t = 1; t < returns.size(); ++t) {
        const double e = returns[t - 1] - mean;
        sig2[t] = omega + alpha * e * e + beta * sig2[t - 1];
    }
    return sig2;
}

GarchModel fit_garch(const std::vector<double>& returns, const GarchFitOptions& opts) {
    if (returns.size() < 200) {
        throw DataError("fit_garch: need at least 200 returns, got " +
                        std::to_string(returns.size()));
    }
    double mean = 0.0;
    for (const double r : returns) mean += r;
    mean /= static_cast<double>(returns.size());

    std::vector<double> eps2(returns.size());
    double var = 0.0;
    for (size_t i = 0; i < returns.size(); ++i) {
        const double e = returns[i] - mean;
        eps2[i] = e * e;
        var += eps2[i];
    }
    var /= static_cast<double>(returns.size());
    if (var <= 0.0) throw DataError("fit_garch: zero-variance returns");

    // start near a typical persistent regime: s = 0.9, u = 1/9, omega from
    // the unconditional variance identity
    GarchParams theta;
    theta.b = std::log(0.9 / 0.1);
    theta.c = std::log((1.0 / 9.0) / (8.0 / 9.0));
    theta.a = std::log(std::max(var * 0.1, 1e-300));

    GarchModel cur = decode(theta, mean, var);
    double ll = garch_loglik(cur, eps2);
    if (opts.ll_trace) opts.ll_trace->push_back(ll);

    std::vector<double> window_ll;  // accepted values, for the ridge stop
    window_ll.push_back(ll);

    // BFGS ascent on the AD gradient; plain steepest ascent crawls along the
    // omega/beta likelihood ridge. The backtracking acceptance keeps the
    // likelihood non-decreasing step by step.
    std::array<std::array<double, 3>, 3> h_inv{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
    auto reset_h = [&h_inv]() {
        h_inv = {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
    };
    std::array<double, 3> grad = garch_grad(theta, var, eps2);

    int iter = 0;
    for (; iter < opts.max_iters; ++iter) {
        const double gnorm =
            std::sqrt(grad[0] * grad[0] + grad[1] * grad[1] + grad[2] * grad[2]);
        if (gnorm < opts.grad_tol) break;

        std::array<double, 3> dir{};
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) dir[i] += h_inv[i][j] * grad[j];
        }
        double ascent = dir[0] * grad[0] + dir[1] * grad[1] + dir[2] * grad[2];
        if (!(ascent > 0.0)) {  // curvature estimate went bad: restart from steepest
            reset_h();
            dir = grad;
            ascent = gnorm * gnorm;
        }

        bool accepted = false;
        double t = 1.0;
        GarchParams next_theta{};
        GarchModel next_model;
        double next_ll = 0.0;
        for (int h = 0; h < 60; ++h) {
            const GarchParams trial{theta.a + t * dir[0], theta.b + t * dir[1],
                                    theta.c + t * dir[2]};
            const GarchModel m = decode(trial, mean, var);
            const double trial_ll = garch_loglik(m, eps2);
            if (std::isfinite(trial_ll) && trial_ll >= ll + 1e-4 * t * ascent) {
                next_theta = trial;
                next_model = m;
                next_ll = trial_ll;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) break;  // no ascent at line-search resolution

        const std::array<double, 3> new_grad = garch_grad(next_theta, var, eps2);
        // BFGS update in minimization convention (f = -ll)
        const std::array<double, 3> s{t * dir[0], t * dir[1], t * dir[2]};
        std::array<double, 3> y{};
        for (int i = 0; i < 3; ++i) y[i] = -(new_grad[i] - grad[i]);
        const double sy = s[0] * y[0] + s[1] * y[1] + s[2] * y[2];
        if (sy > 1e-12) {
            const double rho = 1.0 / sy;
            std::array<std::array<double, 3>, 3> left{}, tmp{};
            for (int i = 0; i < 3; ++i) {
                for (int j = 0; j < 3; ++j) {
                    left[i][j] = (i == j ? 1.0 : 0.0) - rho * s[i] * y[j];
                }
            }
            for (int i = 0; i < 3; ++i) {
                for (int j = 0; j < 3; ++j) {
                    tmp[i][j] = 0.0;
                    for (int k = 0; k < 3; ++k) tmp[i][j] += left[i][k] * h_inv[k][j];
                }
            }
            for (int i = 0; i < 3; ++i) {
                for (int j = 0; j < 3; ++j) {
                    h_inv[i][j] = rho * s[i] * s[j];
                    for (int k = 0; k < 3; ++k) h_inv[i][j] += tmp[i][k] * left[j][k];
                }
            }
        } else {
            reset_h();
        }

        const double gain = next_ll - ll;
        theta = next_theta;
        cur = next_model;
        ll = next_ll;
        grad = new_grad;
        if (opts.ll_trace) opts.ll_trace->push_back(ll);
        window_ll.push_back(ll);
        if (gain < opts.ll_tol * std::max(1.0, std::abs(ll))) break;
        if (window_ll.size() > static_cast<size_t>(opts.window)) {
            const double window_gain =
                ll - window_ll[window_ll.size() - 1 - static_cast<size_t>(opts.window)];
            if (window_gain < opts.window_tol * std::max(1.0, std::abs(ll))) break;
        }
    }
    cur.log_likelihood = ll;
    cur.iterations = iter;
    if (iter >= opts.max_iters) {
        throw GarchError("fit_garch: no convergence after " + std::to_string(opts.max_iters) +
                             " iterations (best ll " + std::to_string(ll) + ")",
                         cur);
    }
    return cur;
}

// ---------------------------------------------------------------------------
// logistic regression
// ---------------------------------------------------------------------------

double LogisticModel::predict_one(const std::vector<double>& x) const {
    if (x.size() != weights.size()) throw DataError("logistic: feature count mismatch");
    double z = bias;
    for (size_t i = 0; i < x.size(); ++i) z += weights[i] * x[i];
    return sigmoid(z);
}

std::vector<double> LogisticModel::predict(const std::vector<std::vector<double>>& rows) const {
    std::vector<double> out(rows.size());
    for (size_t i = 0; i < rows.size(); ++i) out[i] = predict_one(rows[i]);
    return out;
}

namespace {

double logistic_objective(const LogisticModel& m, const std::vector<std::vector<double>>& rows,
                          const std::vector<int>& y) {
    constexpr double kClip = 1e-12;
    const double n = static_cast<double>(rows.size());
    double acc = 0.0;
    for (size_t i = 0; i < rows.size(); ++i) {
        const double p = std::clamp(m.predict_one(rows[i]), kClip, 1.0 - kClip);
        acc += y[i] ? std::log(p) : std::log(1.0 - p);
    }
    double reg = 0.0;
    for (const double w : m.weights) reg += w * w;
    return -acc / n + m.l2 * reg / (2.0 * n);
}

}  // namespace

LogisticModel fit_logistic(const std::vector<std::vector<double>>& rows,
                           const std::vector<int>& labels, double l2,
                           const LogisticFitOptions& opts) {
    if (rows.empty() || rows.size() != labels.size()) {
        throw DataError("fit_logistic: bad inputs");
    }
    bool has0 = false, has1 = false;
    for (const int y : labels) (y ? has1 : has0) = true;
    if (!has0 || !has1) throw DataError("fit_logistic: both classes must be present");

    const size_t nf = rows.front().size();
    const double n = static_cast<double>(rows.size());
    LogisticModel m;
    m.weights.assign(nf, 0.0);
    m.l2 = l2;

    double obj = logistic_objective(m, rows, labels);
    double step = 1.0;
    std::vector<double> gw(nf);

    for (int iter = 0; iter < opts.max_iters; ++iter) {
        std::fill(gw.begin(), gw.end(), 0.0);
        double gb = 0.0;
        for (size_t i = 0; i < rows.size(); ++i) {
            const double resid = m.predict_one(rows[i]) - static_cast<double>(labels[i]);
            for (size_t f = 0; f < nf; ++f) gw[f] += resid * rows[i][f];
            gb += resid;
        }
        double gnorm2 = 0.0;
        for (size_t f = 0; f < nf; ++f) {
            gw[f] = gw[f] / n + l2 * m.weights[f] / n;
            gnorm2 += gw[f] * gw[f];
        }
        gb /= n;
        gnorm2 += gb * gb;
        if (std::sqrt(gnorm2) < opts.grad_tol) return m;

        bool accepted = false;
        double trial_step = step;
        for (int h = 0; h < 60; ++h) {
            LogisticModel trial = m;
            for (size_t f = 0; f < nf; ++f) trial.weights[f] -= trial_step * gw[f];
            trial.bias -= trial_step * gb;
            const double trial_obj = logistic_objective(trial, rows, labels);
            if (std::isfinite(trial_obj) && trial_obj < obj) {
                m = std::move(trial);
                obj = trial_obj;
                step = std::min(trial_step * 1.5, 1e3);
                accepted = true;
                break;
            }
            trial_step *= 0.5;
        }
        if (!accepted) return m;  // at line-search resolution
        if (!std::isfinite(obj)) throw NumericError("fit_logistic: objective diverged");
    }
    return m;
}

}  // namespace haelt::baseline
