#include "hexcast/arima.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hexcast::arima {

namespace {

std::vector<double> difference(const std::vector<double>& y) {
    std::vector<double> x;
    if (y.size() < 2) return x;
    x.reserve(y.size() - 1);
    for (size_t i = 1; i < y.size(); ++i) x.push_back(y[i] - y[i - 1]);
    return x;
}

// Least squares through the normal equations, Gaussian elimination with
// partial pivoting. Columns whose pivot falls below a relative threshold
// are dropped (coefficient zero); *dropped reports whether any column in
// [drop_watch_from, k) was lost.
std::vector<double> solve_ls(const std::vector<std::vector<double>>& rows,
                             const std::vector<double>& target,
                             size_t drop_watch_from, bool* dropped) {
    const size_t n = rows.size();
    const size_t k = n == 0 ? 0 : rows.front().size();
    if (dropped) *dropped = false;
    std::vector<double> beta(k, 0.0);
    if (n == 0 || k == 0) {
        if (dropped) *dropped = true;
        return beta;
    }
    std::vector<std::vector<double>> g(k, std::vector<double>(k, 0.0));
    std::vector<double> rhs(k, 0.0);
    for (size_t r = 0; r < n; ++r) {
        for (size_t i = 0; i < k; ++i) {
            rhs[i] += rows[r][i] * target[r];
            for (size_t j = i; j < k; ++j) g[i][j] += rows[r][i] * rows[r][j];
        }
    }
    for (size_t i = 0; i < k; ++i)
        for (size_t j = 0; j < i; ++j) g[i][j] = g[j][i];

    double scale = 0.0;
    for (size_t i = 0; i < k; ++i) scale = std::max(scale, std::abs(g[i][i]));
    const double tol = (scale > 0.0 ? scale : 1.0) * 1e-10;

    std::vector<bool> kept(k, true);
    for (size_t step = 0; step < k; ++step) {
        size_t pivot = step;
        for (size_t i = step + 1; i < k; ++i)
            if (std::abs(g[i][step]) > std::abs(g[pivot][step])) pivot = i;
        if (std::abs(g[pivot][step]) < tol) {
            kept[step] = false;
            if (dropped && step >= drop_watch_from) *dropped = true;
            for (size_t i = 0; i < k; ++i) {
                g[i][step] = 0.0;
                g[step][i] = 0.0;
            }
            g[step][step] = 1.0;
            rhs[step] = 0.0;
            continue;
        }
        if (pivot != step) {
            std::swap(g[pivot], g[step]);
            std::swap(rhs[pivot], rhs[step]);
        }
        for (size_t i = step + 1; i < k; ++i) {
            const double f = g[i][step] / g[step][step];
            if (f == 0.0) continue;
            for (size_t j = step; j < k; ++j) g[i][j] -= f * g[step][j];
            rhs[i] -= f * rhs[step];
        }
    }
    for (size_t ii = k; ii-- > 0;) {
        double v = rhs[ii];
        for (size_t j = ii + 1; j < k; ++j) v -= g[ii][j] * beta[j];
        beta[ii] = kept[ii] ? v / g[ii][ii] : 0.0;
    }
    return beta;
}

// Design rows [1, x_{t-1}..x_{t-p}, e_{t-1}..e_{t-q}] for t in
// [first, x.size()).
std::vector<std::vector<double>> design(const std::vector<double>& x,
                                        const std::vector<double>& e, int p,
                                        int q, size_t first) {
    std::vector<std::vector<double>> rows;
    for (size_t t = first; t < x.size(); ++t) {
        std::vector<double> row;
        row.reserve(1 + static_cast<size_t>(p + q));
        row.push_back(1.0);
        for (int i = 1; i <= p; ++i) row.push_back(x[t - i]);
        for (int j = 1; j <= q; ++j) row.push_back(e[t - j]);
        rows.push_back(std::move(row));
    }
    return rows;
}

ArimaModel intercept_only(int p, int q, const std::vector<double>& x) {
    ArimaModel m;
    m.p = p;
    m.q = q;
    m.ar.assign(static_cast<size_t>(p), 0.0);
    m.ma.assign(static_cast<size_t>(q), 0.0);
    m.ar_fallback = true;
    if (!x.empty()) {
        double s = 0.0;
        for (double v : x) s += v;
        m.intercept = s / static_cast<double>(x.size());
    }
    return m;
}

ArimaModel fit_ar_only(int p, int q_label, const std::vector<double>& x,
                       bool flag) {
    if (x.size() < static_cast<size_t>(p) + 2)
        return intercept_only(p, q_label, x);
    const auto rows = design(x, {}, p, 0, static_cast<size_t>(p));
    std::vector<double> target(x.begin() + p, x.end());
    const auto beta = solve_ls(rows, target, 1, nullptr);
    ArimaModel m;
    m.p = p;
    m.q = q_label;
    m.intercept = beta[0];
    m.ar.assign(beta.begin() + 1, beta.end());
    m.ma.assign(static_cast<size_t>(q_label), 0.0);
    m.ar_fallback = flag;
    return m;
}

// One-step predictions of the differenced series with recursive residuals;
// index t = x.size() is the out-of-sample forecast. Presample values count
// as zero.
std::vector<double> filter(const ArimaModel& m, const std::vector<double>& x) {
    const size_t nx = x.size();
    std::vector<double> xhat(nx + 1, 0.0);
    std::vector<double> resid(nx, 0.0);
    for (size_t t = 0; t <= nx; ++t) {
        double v = m.intercept;
        for (int i = 1; i <= m.p; ++i)
            if (t >= static_cast<size_t>(i)) v += m.ar[i - 1] * x[t - i];
        for (int j = 1; j <= m.q; ++j)
            if (t >= static_cast<size_t>(j)) v += m.ma[j - 1] * resid[t - j];
        xhat[t] = v;
        if (t < nx) resid[t] = x[t] - v;
    }
    return xhat;
}

}  // namespace

ArimaModel fit_arima(const std::vector<double>& series, int p, int q) {
    if (p < 1 || q < 0) throw ConfigError("arima: order must have p >= 1");
    if (series.size() < 3) throw DataError("arima: series too short");
    const std::vector<double> x = difference(series);
    const int nx = static_cast<int>(x.size());
    if (q == 0) return fit_ar_only(p, 0, x, false);

    // Stage one: a long autoregression provides residual proxies.
    const int long_order =
        std::min(std::max(10, 2 * (p + q)), std::max(1, nx / 3));
    if (nx - long_order < std::max(10, p + q + 1))
        return fit_ar_only(p, q, x, true);
    const auto rows1 =
        design(x, {}, long_order, 0, static_cast<size_t>(long_order));
    std::vector<double> target1(x.begin() + long_order, x.end());
    const auto beta1 = solve_ls(rows1, target1, 1, nullptr);
    std::vector<double> resid(x.size(), 0.0);
    for (size_t t = static_cast<size_t>(long_order); t < x.size(); ++t) {
        double v = beta1[0];
        for (int i = 1; i <= long_order; ++i) v += beta1[i] * x[t - i];
        resid[t] = x[t] - v;
    }

    // Stage two: regress on p value lags and q residual lags.
    const size_t first = static_cast<size_t>(std::max(p, long_order));
    const auto rows2 = design(x, resid, p, q, first);
    std::vector<double> target2(x.begin() + static_cast<int64_t>(first),
                                x.end());
    bool dropped_ma = false;
    const auto beta2 =
        solve_ls(rows2, target2, static_cast<size_t>(1 + p), &dropped_ma);
    if (dropped_ma) return fit_ar_only(p, q, x, true);

    ArimaModel m;
    m.p = p;
    m.q = q;
    m.intercept = beta2[0];
    m.ar.assign(beta2.begin() + 1, beta2.begin() + 1 + p);
    m.ma.assign(beta2.begin() + 1 + p, beta2.end());
    return m;
}

double forecast_next(const ArimaModel& m, const std::vector<double>& series) {
    if (series.empty()) throw DataError("arima: empty series");
    const std::vector<double> x = difference(series);
    return series.back() + filter(m, x).back();
}

std::vector<double> rolling_forecast(const ArimaModel& m,
                                     const std::vector<double>& series,
                                     size_t start) {
    if (start < 1 || start > series.size())
        throw ConfigError("arima: rolling start out of range");
    const std::vector<double> x = difference(series);
    const std::vector<double> xhat = filter(m, x);
    std::vector<double> out;
    out.reserve(series.size() - start);
    // Position t differs from y_{t-1} by the differenced prediction at
    // x-index t-1.
    for (size_t t = start; t < series.size(); ++t)
        out.push_back(series[t - 1] + xhat[t - 1]);
    return out;
}

ArimaSelection select_arima(const std::vector<double>& series,
                            int max_order) {
    if (max_order < 1) throw ConfigError("arima: bad selection bound");
    const size_t n = series.size();
    if (n < 12) throw DataError("arima: series too short for selection");
    const size_t val_len =
        std::max<size_t>(8, std::min<size_t>(n / 5, 48));
    const size_t head_len = n - val_len;
    const std::vector<double> head(series.begin(),
                                   series.begin() +
                                       static_cast<int64_t>(head_len));

    ArimaSelection best;
    best.val_rmse = std::numeric_limits<double>::infinity();
    int best_p = 1, best_q = 1;
    for (int p = 1; p <= max_order; ++p) {
        for (int q = 1; q <= max_order; ++q) {
            ArimaModel m;
            try {
                m = fit_arima(head, p, q);
            } catch (const DataError&) {
                continue;
            }
            const auto preds = rolling_forecast(m, series, head_len);
            double se = 0.0;
            for (size_t i = 0; i < preds.size(); ++i) {
                const double err = preds[i] - series[head_len + i];
                se += err * err;
            }
            const double rmse =
                std::sqrt(se / static_cast<double>(preds.size()));
            if (rmse < best.val_rmse) {
                best.val_rmse = rmse;
                best_p = p;
                best_q = q;
            }
        }
    }
    if (!std::isfinite(best.val_rmse))
        throw DataError("arima: selection failed on every order");
    best.model = fit_arima(series, best_p, best_q);
    return best;
}

}  // namespace hexcast::arima
