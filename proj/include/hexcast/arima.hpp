#pragma once

#include <cstddef>
#include <vector>

#include "hexcast/common.hpp"

namespace hexcast::arima {

// ARIMA(p,1,q) fitted on the once-differenced series by two-stage least
// squares: a long autoregression supplies residual proxies, then the AR and
// MA coefficients come from one ordinary regression. Near-dependent
// regressors are dropped at the pivot; if that degrades the moving-average
// stage the model refits as AR(p) only and sets `ar_fallback`.
struct ArimaModel {
    int p = 0;
    int q = 0;
    double intercept = 0.0;
    std::vector<double> ar;  // on the differenced series, lag 1..p
    std::vector<double> ma;  // residual lags 1..q
    bool ar_fallback = false;
};

ArimaModel fit_arima(const std::vector<double>& series, int p, int q);

// One-step-ahead forecast of the value following the series.
double forecast_next(const ArimaModel& m, const std::vector<double>& series);

// One-step forecasts for positions start..series.size()-1, each using only
// observations before that position; coefficients stay fixed.
std::vector<double> rolling_forecast(const ArimaModel& m,
                                     const std::vector<double>& series,
                                     size_t start);

struct ArimaSelection {
    ArimaModel model;
    double val_rmse = 0.0;
};

// Order selection over p,q in 1..max_order by one-step RMSE on a held-out
// tail of the series, followed by a refit on the whole series.
ArimaSelection select_arima(const std::vector<double>& series,
                            int max_order = 8);

}  // namespace hexcast::arima
