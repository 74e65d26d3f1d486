#include "hexcast/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>

#include "hexcast/arima.hpp"

namespace hexcast::metrics {

namespace {

double now_s() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double>(clock::now().time_since_epoch())
        .count();
}

uint64_t fnv1a(const std::string& s) {
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::pair<double, double> mean_sd(const std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= n;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double sd = v.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    return {mean, sd};
}

}  // namespace

MetricsReport compute_metrics(const std::vector<double>& preds,
                              const std::vector<double>& targets,
                              double y_min, double y_max) {
    if (preds.size() != targets.size())
        throw ShapeError("metrics: prediction/target size mismatch");
    if (preds.empty()) throw ConfigError("metrics: empty input");
    MetricsReport r;
    r.n = static_cast<int64_t>(preds.size());
    double se = 0.0, ape = 0.0;
    int64_t m = 0;
    for (size_t i = 0; i < preds.size(); ++i) {
        const double err = preds[i] - targets[i];
        se += err * err;
        if (targets[i] != 0.0) {
            ape += std::abs(err / targets[i]);
            ++m;
        }
    }
    r.rmse = std::sqrt(se / static_cast<double>(r.n));
    r.mape = m > 0 ? ape / static_cast<double>(m) : 0.0;
    r.n_mape_excluded = r.n - m;
    const double range = y_max - y_min;
    if (range < 0.0) throw ConfigError("metrics: inverted demand range");
    r.nrmse = range > 0.0 ? r.rmse / range : 0.0;
    return r;
}

std::pair<double, double> value_range(const DemandTensor& tensor) {
    if (tensor.values.empty()) throw ConfigError("metrics: empty tensor");
    auto [lo, hi] =
        std::minmax_element(tensor.values.begin(), tensor.values.end());
    return {*lo, *hi};
}

// ---- Student t machinery -----------------------------------------------------

namespace {

// Continued fraction for the incomplete beta (modified Lentz).
double beta_cf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 1e-12;
    constexpr double kTiny = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) return h;
    }
    return h;  // converged to working precision or best effort
}

}  // namespace

double reg_incomplete_beta(double a, double b, double x) {
    if (a <= 0.0 || b <= 0.0)
        throw ConfigError("incomplete beta: parameters must be positive");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) -
                            std::lgamma(b) + a * std::log(x) +
                            b * std::log1p(-x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x) / a;
    return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double df) {
    if (df <= 0.0) throw ConfigError("t-test: degrees of freedom");
    if (!std::isfinite(t)) return 0.0;
    return reg_incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
}

WelchResult welch_t_test(const std::vector<double>& a,
                         const std::vector<double>& b) {
    if (a.size() < 2 || b.size() < 2)
        throw ConfigError("t-test: need at least two values per sample");
    const auto [ma, sda] = mean_sd(a);
    const auto [mb, sdb] = mean_sd(b);
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    const double va = sda * sda, vb = sdb * sdb;
    if (va == 0.0 && vb == 0.0) {
        if (ma == mb) return {0.0, na + nb - 2.0, 1.0};
        throw DataError("t-test: both samples are constant");
    }
    const double se2 = va / na + vb / nb;
    WelchResult r;
    r.t = (ma - mb) / std::sqrt(se2);
    r.df = se2 * se2 /
           (va * va / (na * na * (na - 1.0)) +
            vb * vb / (nb * nb * (nb - 1.0)));
    r.p = student_t_two_sided_p(r.t, r.df);
    return r;
}

// ---- Cross-validation ----------------------------------------------------------

namespace {

// Raw-space targets for a list of refs.
std::vector<double> raw_targets(const SampleSet& set) {
    std::vector<double> out;
    out.reserve(set.refs.size());
    for (const SampleRef& r : set.refs) out.push_back(set.target(r));
    return out;
}

std::vector<double> arima_predict(const DemandTensor& tensor,
                                  const DaySplit& plan,
                                  const std::vector<SampleRef>& refs,
                                  int max_order) {
    const int per_day = tensor.intervals_per_day();
    // Per cell: select and fit on the chronological training-day series,
    // then one-step forecasts that condition on the true history before
    // each test interval.
    std::map<int, std::vector<double>> forecasts;  // cell -> per-interval
    for (const SampleRef& r : refs) forecasts[r.cell] = {};
    for (auto& [cell, preds] : forecasts) {
        std::vector<double> train_series;
        train_series.reserve(plan.train_days.size() *
                             static_cast<size_t>(per_day));
        for (int day : plan.train_days)
            for (int s = 0; s < per_day; ++s)
                train_series.push_back(tensor.at(cell, day * per_day + s));
        std::vector<double> full(static_cast<size_t>(tensor.n_intervals));
        for (int t = 0; t < tensor.n_intervals; ++t)
            full[static_cast<size_t>(t)] = tensor.at(cell, t);
        arima::ArimaModel model;
        try {
            model = arima::select_arima(train_series, max_order).model;
        } catch (const DataError&) {
            model.p = 1;  // degenerate cell: intercept-only forecast
            model.ar.assign(1, 0.0);
        }
        preds = arima::rolling_forecast(model, full, 1);
    }
    std::vector<double> out;
    out.reserve(refs.size());
    for (const SampleRef& r : refs) {
        const auto& preds = forecasts[r.cell];
        // rolling_forecast starts at interval 1.
        const double v = preds[static_cast<size_t>(r.t_target - 1)];
        out.push_back(std::max(0.0, v));
    }
    return out;
}

}  // namespace

CvResult cross_validate(const DemandTensor& tensor, const CvConfig& cfg) {
    if (cfg.model_ids.empty()) throw ConfigError("cv: no models requested");
    if (cfg.splits.empty()) throw ConfigError("cv: no splits requested");
    const auto [y_lo, y_hi] = value_range(tensor);
    const SampleSet samples = build_samples(tensor, cfg.model.h, true);
    const int per_day = tensor.intervals_per_day();
    const int n_days = (tensor.n_intervals + per_day - 1) / per_day;

    CvResult result;
    result.reference = cfg.reference;
    std::map<std::string, std::vector<double>> mape_by_model;
    for (const std::string& id : cfg.model_ids) {
        for (int split : cfg.splits) {
            const DaySplit plan = split_days(split, n_days);
            auto [train, test] = split_cv(samples, split);
            if (train.refs.empty() || test.refs.empty())
                throw ConfigError("cv: empty split");
            const uint64_t salt =
                fnv1a(id) ^ (0x9E3779B97F4A7C15ULL * (split + 1));
            if (cfg.max_test_samples > 0) {
                Rng trim_rng(cfg.train.seed ^ salt ^ 0xA5A5A5A5ULL);
                test = subsample(test, cfg.max_test_samples, trim_rng);
            }
            CvCell cell;
            cell.model = id;
            cell.split = split;
            std::vector<double> preds;
            const double t_start = now_s();
            double t_mid = t_start;
            if (models::is_neural_model(id)) {
                const ScaleParams scale = fit_scale(train);
                Rng init_rng(cfg.train.seed ^ salt);
                auto model =
                    models::make_model(id, tensor.shape, cfg.model, init_rng);
                models::TrainConfig tc = cfg.train;
                tc.seed = cfg.train.seed ^ salt ^ 0x5DEECE66DULL;
                models::train_model(*model, train, scale, tc);
                t_mid = now_s();
                preds = models::predict(*model, test, scale);
            } else if (id == "ha") {
                t_mid = now_s();
                preds = models::ha_predict(tensor, plan.train_days, test.refs);
            } else if (id == "arima") {
                preds = arima_predict(tensor, plan, test.refs,
                                      cfg.arima_max_order);
                t_mid = now_s();
            } else {
                throw ConfigError("cv: unknown model: " + id);
            }
            const double t_end = now_s();
            cell.report =
                compute_metrics(preds, raw_targets(test), y_lo, y_hi);
            cell.train_s = t_mid - t_start;
            cell.test_s = t_end - t_mid;
            mape_by_model[id].push_back(cell.report.mape);
            result.cells.push_back(std::move(cell));
        }
    }

    const auto ref_it = mape_by_model.find(cfg.reference);
    for (const std::string& id : cfg.model_ids) {
        CvModelSummary s;
        s.model = id;
        std::vector<double> rmse, mape, nrmse;
        for (const CvCell& c : result.cells) {
            if (c.model != id) continue;
            rmse.push_back(c.report.rmse);
            mape.push_back(c.report.mape);
            nrmse.push_back(c.report.nrmse);
        }
        std::tie(s.mean_rmse, s.sd_rmse) = mean_sd(rmse);
        std::tie(s.mean_mape, s.sd_mape) = mean_sd(mape);
        s.mean_nrmse = mean_sd(nrmse).first;
        if (ref_it != mape_by_model.end() && id != cfg.reference &&
            mape.size() >= 2 && ref_it->second.size() >= 2) {
            try {
                s.p_mape_vs_ref = welch_t_test(mape, ref_it->second).p;
            } catch (const DataError&) {
                s.p_mape_vs_ref = 1.0;
            }
        }
        result.models.push_back(std::move(s));
    }
    return result;
}

}  // namespace hexcast::metrics
