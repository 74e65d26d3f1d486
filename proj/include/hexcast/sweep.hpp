#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "hexcast/ingest.hpp"
#include "hexcast/metrics.hpp"

namespace hexcast::sweep {

// Grid of aggregation granularities to score. Spatial sizes are the cell
// scale in metres (hexagon side length, or square edge), temporal sizes the
// interval length in minutes. Each grid shape has its own spatial list and
// model list.
struct SweepConfig {
    std::vector<GridShape> shapes{GridShape::hex, GridShape::square};
    std::vector<int> hex_spatial{200, 500, 800, 1200, 1600, 2000};
    std::vector<int> square_spatial{300, 800, 1300, 1900, 2600, 3200};
    std::vector<int> temporal{15, 30, 45, 60, 90, 120};
    std::vector<DemandKind> kinds{DemandKind::departure, DemandKind::arrival};
    std::vector<std::string> hex_models{"hconvlstm"};
    std::vector<std::string> square_models{"convlstm"};
    std::vector<int> splits{0};

    BBox bbox;
    int tz_offset_s = 0;

    models::ModelConfig model;
    models::TrainConfig train;
    int64_t max_test_samples = 0;
    int arima_max_order = 8;

    // When false, train_s/test_s are forced to zero so repeated runs with
    // the same seed produce byte-identical CSVs.
    bool record_timing = true;
};

struct SweepRow {
    GridShape shape = GridShape::hex;
    int spatial_m = 0;
    int interval_min = 0;
    DemandKind kind = DemandKind::departure;
    std::string model;
    int split = 0;
    metrics::MetricsReport report;
    double train_s = 0.0;
    double test_s = 0.0;
    bool failed = false;   // configuration produced no usable evaluation
    std::string note;      // failure reason, kept out of the CSV
};

// Re-aggregates the trips at every configured granularity and scores the
// configured models on each day split. Rows are emitted in a fixed order:
// shape, spatial, interval, kind, model, split. Configurations that cannot
// be evaluated yield flagged rows with NaN metrics instead of aborting the
// sweep.
std::vector<SweepRow> granularity_sweep(const std::vector<TripRecord>& trips,
                                        const SweepConfig& cfg);

// CSV with the exact header
// shape,spatial_m,interval_min,kind,model,split,rmse,mape_x100,nrmse,
// n_test,n_mape_excluded,train_s,test_s (one line). Failed rows carry nan
// metrics and n_test 0.
void write_results_csv(std::ostream& out, const std::vector<SweepRow>& rows);
void write_results_csv(const std::string& path,
                       const std::vector<SweepRow>& rows);

std::vector<SweepRow> read_results_csv(std::istream& in);
std::vector<SweepRow> read_results_csv(const std::string& path);

}  // namespace hexcast::sweep
