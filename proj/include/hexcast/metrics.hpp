#pragma once

#include <string>
#include <vector>

#include "hexcast/common.hpp"
#include "hexcast/ingest.hpp"
#include "hexcast/models.hpp"

namespace hexcast::metrics {

struct MetricsReport {
    double rmse = 0.0;
    double mape = 0.0;   // mean |err/target| over nonzero targets
    double nrmse = 0.0;  // rmse / (y_max - y_min)
    int64_t n = 0;
    int64_t n_mape_excluded = 0;  // zero-target points skipped by MAPE
};

// y_min/y_max describe the demand range used to normalise the RMSE
// (typically the full tensor's range).
MetricsReport compute_metrics(const std::vector<double>& preds,
                              const std::vector<double>& targets,
                              double y_min, double y_max);

// Min and max over every value of the tensor.
std::pair<double, double> value_range(const DemandTensor& tensor);

// ---- Welch's t-test ---------------------------------------------------------

struct WelchResult {
    double t = 0.0;
    double df = 0.0;
    double p = 1.0;  // two-sided
};

// Unequal-variance two-sample test with Welch–Satterthwaite degrees of
// freedom. Needs two values per sample; both samples having zero variance
// is degenerate.
WelchResult welch_t_test(const std::vector<double>& a,
                         const std::vector<double>& b);

// Regularized incomplete beta I_x(a, b) by continued fraction.
double reg_incomplete_beta(double a, double b, double x);

// Two-sided p-value of a t statistic with the given degrees of freedom.
double student_t_two_sided_p(double t, double df);

// ---- Cross-validated model comparison ----------------------------------------

struct CvCell {
    std::string model;
    int split = 0;
    MetricsReport report;
    double train_s = 0.0;
    double test_s = 0.0;
};

struct CvModelSummary {
    std::string model;
    double mean_rmse = 0.0, sd_rmse = 0.0;
    double mean_mape = 0.0, sd_mape = 0.0;
    double mean_nrmse = 0.0;
    double p_mape_vs_ref = 1.0;  // Welch p against the reference model
};

struct CvResult {
    std::vector<CvCell> cells;  // ordered by (model, split) as requested
    std::vector<CvModelSummary> models;
    std::string reference;
};

struct CvConfig {
    std::vector<std::string> model_ids{"hconvlstm"};
    std::vector<int> splits{0, 1, 2, 3};
    std::string reference = "hconvlstm";
    models::ModelConfig model;
    models::TrainConfig train;
    int64_t max_test_samples = 0;  // 0 = evaluate every test sample
    int arima_max_order = 8;
};

// Trains and scores each model on each day split of the tensor. Neural
// ids go through the usual fit/predict path; "ha" uses slot means and
// "arima" per-cell one-step forecasts.
CvResult cross_validate(const DemandTensor& tensor, const CvConfig& cfg);

}  // namespace hexcast::metrics
