#include "hexcast/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>

#include "hexcast/checkpoint.hpp"
#include "hexcast/metrics.hpp"
#include "hexcast/models.hpp"
#include "hexcast/report.hpp"
#include "hexcast/sweep.hpp"

namespace hexcast::cli {

namespace {

struct GlobalOpts {
    uint64_t seed = 1;
    int threads = 1;
    bool strict = false;
};

BBox bbox_from_vec(const std::vector<double>& v) {
    BBox b{v[0], v[1], v[2], v[3]};
    if (!(b.lon_min < b.lon_max) || !(b.lat_min < b.lat_max))
        throw ConfigError("bbox: expected lon_min lat_min lon_max lat_max");
    return b;
}

BBox bbox_of_trips(const std::vector<TripRecord>& trips) {
    if (trips.empty()) throw DataError("no trips to derive a study area from");
    BBox b{trips[0].pickup.lon, trips[0].pickup.lat, trips[0].pickup.lon,
           trips[0].pickup.lat};
    const auto grow = [&b](const GeoPoint& p) {
        b.lon_min = std::min(b.lon_min, p.lon);
        b.lat_min = std::min(b.lat_min, p.lat);
        b.lon_max = std::max(b.lon_max, p.lon);
        b.lat_max = std::max(b.lat_max, p.lat);
    };
    for (const auto& t : trips) {
        grow(t.pickup);
        grow(t.dropoff);
    }
    return b;
}

std::vector<TripRecord> load_trips_checked(const std::string& path,
                                           bool strict) {
    ParseStats stats;
    std::vector<TripRecord> trips = load_trips(path, strict, &stats);
    if (stats.skipped > 0)
        std::cerr << "note: skipped " << stats.skipped
                  << " malformed trip rows\n";
    return trips;
}

// ---- synth ------------------------------------------------------------------

struct SynthOpts {
    std::string out;
    int days = 21;
    int interval_min = 30;
    int n_hotspots = 2;
    double center_lon = 10.0;
    double center_lat = 50.0;
    double ring_m = 2000.0;
    double sigma_m = 300.0;
    double base_rate = 2.0;   // trips per hour off-peak
    double peak_rate = 12.0;  // trips per hour at the peaks
    double weekend_factor = 1.108;
    double day_rho = 0.0;
    double day_sigma = 0.0;
    double speed_mps = 8.0;
    int64_t t0 = 1704067200;  // 2024-01-01 00:00 UTC, a Monday
    int tz_offset_s = 0;
    int first_weekday = 0;
};

int run_synth(const SynthOpts& o, const GlobalOpts& g) {
    if (o.days < 1 || o.n_hotspots < 1)
        throw ConfigError("synth: days and hotspots must be positive");
    if (1440 % o.interval_min != 0)
        throw ConfigError("synth: interval must divide the day");

    const Projection proj = Projection::at(o.center_lon, o.center_lat);
    SynthConfig cfg;
    cfg.interval_min = o.interval_min;
    cfg.n_intervals = o.days * (1440 / o.interval_min);
    cfg.t0 = o.t0;
    cfg.tz_offset_s = o.tz_offset_s;
    cfg.first_weekday = o.first_weekday;
    cfg.weekend_factor = o.weekend_factor;
    cfg.mean_speed_mps = o.speed_mps;
    cfg.day_ar1_rho = o.day_rho;
    cfg.day_ar1_sigma = o.day_sigma;
    const std::vector<double> profile =
        two_peak_profile(o.interval_min, o.base_rate, o.peak_rate);
    for (int k = 0; k < o.n_hotspots; ++k) {
        const double angle =
            2.0 * std::numbers::pi * static_cast<double>(k) / o.n_hotspots;
        Hotspot spot;
        spot.center = {
            o.center_lon + o.ring_m * std::cos(angle) / proj.meters_per_deg_lon,
            o.center_lat + o.ring_m * std::sin(angle) / proj.meters_per_deg_lat};
        spot.sigma_m = o.sigma_m;
        spot.profile = profile;
        spot.attraction = 1.0;
        cfg.hotspots.push_back(std::move(spot));
    }

    const std::vector<TripRecord> trips = synthesize_trips(cfg, g.seed);
    std::ofstream out(o.out, std::ios::binary);
    if (!out) throw DataError("synth: cannot write " + o.out);
    write_trips(out, trips);
    if (!out) throw DataError("synth: write failed for " + o.out);
    std::cout << "wrote " << trips.size() << " trips to " << o.out << "\n";
    return 0;
}

// ---- aggregate ----------------------------------------------------------------

struct AggregateOpts {
    std::string in;
    std::string out;
    std::string shape = "hex";
    std::string kind = "departure";
    double spatial_m = 800.0;
    int interval_min = 30;
    std::vector<double> bbox;  // lon_min lat_min lon_max lat_max
    int tz_offset_s = 0;
    int grid_cols = 0;
    int grid_rows = 0;
    int64_t t0 = 0;
    bool t0_set = false;
    int n_intervals = 0;
};

int run_aggregate(const AggregateOpts& o, const GlobalOpts& g) {
    const std::vector<TripRecord> trips = load_trips_checked(o.in, g.strict);

    GranularitySpec spec;
    spec.shape = grid_shape_from(o.shape);
    spec.spatial_m = o.spatial_m;
    spec.interval_min = o.interval_min;
    spec.bbox = o.bbox.empty() ? bbox_of_trips(trips) : bbox_from_vec(o.bbox);
    spec.tz_offset_s = o.tz_offset_s;
    spec.grid_cols = o.grid_cols;
    spec.grid_rows = o.grid_rows;
    if (o.t0_set) {
        spec.t0 = o.t0;
        spec.t0_forced = true;
    }
    spec.n_intervals = o.n_intervals;

    const DemandTensor tensor =
        aggregate_demand(trips, spec, demand_kind_from(o.kind));
    std::ofstream out(o.out, std::ios::binary);
    if (!out) throw DataError("aggregate: cannot write " + o.out);
    write_demand(out, tensor);
    if (!out) throw DataError("aggregate: write failed for " + o.out);
    std::cout << "wrote demand tensor: " << tensor.n_cells() << " cells x "
              << tensor.n_intervals << " intervals (excluded "
              << tensor.n_excluded << " endpoints) to " << o.out << "\n";
    return 0;
}

// ---- shared model/training options -------------------------------------------

void add_model_options(CLI::App* cmd, models::ModelConfig& mc,
                       models::TrainConfig& tc) {
    cmd->add_option("--layers", mc.layers, "conv channels per layer")
        ->delimiter(',');
    cmd->add_option("--history", mc.h, "history window length (intervals)");
    cmd->add_option("--lstm-hidden", mc.lstm_hidden,
                    "hidden width of the flat recurrent baseline");
    cmd->add_option("--conv-k", mc.conv_k, "square kernel size");
    cmd->add_option("--dropout", mc.dropout_p, "inter-layer dropout rate");
    cmd->add_flag("--batch-norm,!--no-batch-norm", mc.use_batch_norm,
                  "toggle batch normalisation");
    cmd->add_option("--epochs", tc.epochs, "training epochs");
    cmd->add_option("--batch-size", tc.batch_size, "mini-batch size");
    cmd->add_option("--lr", tc.adam.lr, "Adam learning rate");
    cmd->add_option("--lambda", tc.lambda, "relative-error loss weight");
    cmd->add_option("--max-train-samples", tc.max_train_samples,
                    "subsample the training set (0 = all)");
}

DemandTensor read_demand_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open demand file " + path);
    return read_demand(in);
}

// ---- train --------------------------------------------------------------------

struct TrainOpts {
    std::string in;
    std::string out;
    std::string model = "hconvlstm";
    int split = 0;
    models::ModelConfig model_cfg;
    models::TrainConfig train_cfg;
};

int run_train(const TrainOpts& o, const GlobalOpts& g) {
    if (!models::is_neural_model(o.model))
        throw ConfigError("train: '" + o.model +
                          "' has no trainable parameters");
    const DemandTensor tensor = read_demand_file(o.in);

    const SampleSet all = build_samples(tensor, o.model_cfg.h);
    const auto [train_set, test_set] = split_cv(all, o.split);
    if (train_set.refs.empty()) throw DataError("train: empty training split");
    const ScaleParams scale = fit_scale(train_set);

    models::TrainConfig tc = o.train_cfg;
    tc.seed = g.seed;
    Rng init_rng(g.seed);
    auto model =
        models::make_model(o.model, tensor.shape, o.model_cfg, init_rng);
    const models::TrainResult result = models::train_model(*model, train_set,
                                                           scale, tc);
    for (size_t e = 0; e < result.epoch_loss.size(); ++e) {
        char line[96];
        std::snprintf(line, sizeof(line), "epoch %zu/%zu loss %.6f", e + 1,
                      result.epoch_loss.size(), result.epoch_loss[e]);
        std::cout << line << "\n";
    }

    ckpt::CheckpointMeta meta;
    meta.model_id = o.model;
    meta.grid = tensor.shape;
    meta.model = o.model_cfg;
    meta.lambda = tc.lambda;
    meta.scale = scale;
    meta.seed = g.seed;
    ckpt::save_checkpoint(o.out, meta, *model);
    std::cout << "saved checkpoint ("
              << model->params().size() + model->mutable_state().size()
              << " tensors) to " << o.out << "\n";
    return 0;
}

// ---- eval ---------------------------------------------------------------------

struct EvalOpts {
    std::string in;
    std::string model_file;
    std::string model;  // "ha" or "arima" when no checkpoint is given
    int split = 0;
    int64_t max_test_samples = 0;
    int arima_max_order = 8;
};

void print_metrics_line(const std::string& model, int split,
                        const metrics::MetricsReport& r) {
    char line[192];
    std::snprintf(line, sizeof(line),
                  "model=%s split=%d n_test=%lld rmse=%.6f mape_x100=%.4f "
                  "nrmse=%.6f n_mape_excluded=%lld",
                  model.c_str(), split, static_cast<long long>(r.n), r.rmse,
                  r.mape * 100.0, r.nrmse,
                  static_cast<long long>(r.n_mape_excluded));
    std::cout << line << "\n";
}

int run_eval(const EvalOpts& o, const GlobalOpts& g) {
    const DemandTensor tensor = read_demand_file(o.in);

    if (!o.model_file.empty()) {
        const ckpt::Checkpoint loaded = ckpt::load_checkpoint(o.model_file);
        if (loaded.meta.grid != tensor.shape)
            throw ConfigError("eval: checkpoint grid shape does not match "
                              "the demand file");
        auto model = ckpt::restore_model(loaded);

        const SampleSet all = build_samples(tensor, loaded.meta.model.h);
        auto [train_set, test_set] = split_cv(all, o.split);
        if (o.max_test_samples > 0) {
            Rng trim_rng(g.seed ^ 0xA5A5A5A5ULL);
            test_set = subsample(test_set, o.max_test_samples, trim_rng);
        }
        if (test_set.refs.empty()) throw DataError("eval: empty test split");

        const std::vector<double> preds =
            models::predict(*model, test_set, loaded.meta.scale);
        std::vector<double> targets(test_set.refs.size());
        for (size_t i = 0; i < test_set.refs.size(); ++i)
            targets[i] = test_set.target(test_set.refs[i]);
        const auto [lo, hi] = metrics::value_range(tensor);
        print_metrics_line(loaded.meta.model_id, o.split,
                           metrics::compute_metrics(preds, targets, lo, hi));
        return 0;
    }

    if (o.model.empty())
        throw ConfigError("eval: provide --model-file or --model ha|arima");
    if (models::is_neural_model(o.model))
        throw ConfigError("eval: neural models need --model-file");
    metrics::CvConfig cv;
    cv.model_ids = {o.model};
    cv.reference = o.model;
    cv.splits = {o.split};
    cv.train.seed = g.seed;
    cv.max_test_samples = o.max_test_samples;
    cv.arima_max_order = o.arima_max_order;
    const metrics::CvResult res = metrics::cross_validate(tensor, cv);
    print_metrics_line(o.model, o.split, res.cells.at(0).report);
    return 0;
}

// ---- sweep --------------------------------------------------------------------

struct SweepOpts {
    std::string in;
    std::string out;
    std::string report_dir;
    std::vector<std::string> shapes{"hex", "square"};
    std::vector<std::string> kinds{"departure", "arrival"};
    std::vector<std::string> hex_models{"hconvlstm"};
    std::vector<std::string> square_models{"convlstm"};
    std::vector<int> hex_spatial{200, 500, 800, 1200, 1600, 2000};
    std::vector<int> square_spatial{300, 800, 1300, 1900, 2600, 3200};
    std::vector<int> intervals{15, 30, 45, 60, 90, 120};
    std::vector<int> splits{0};
    std::vector<double> bbox;
    int tz_offset_s = 0;
    models::ModelConfig model_cfg;
    models::TrainConfig train_cfg;
    int64_t max_test_samples = 0;
    int arima_max_order = 8;
    bool no_timing = false;
};

int run_sweep(const SweepOpts& o, const GlobalOpts& g) {
    const std::vector<TripRecord> trips = load_trips_checked(o.in, g.strict);

    sweep::SweepConfig cfg;
    cfg.shapes.clear();
    for (const auto& s : o.shapes) cfg.shapes.push_back(grid_shape_from(s));
    cfg.kinds.clear();
    for (const auto& k : o.kinds) cfg.kinds.push_back(demand_kind_from(k));
    cfg.hex_models = o.hex_models;
    cfg.square_models = o.square_models;
    cfg.hex_spatial = o.hex_spatial;
    cfg.square_spatial = o.square_spatial;
    cfg.temporal = o.intervals;
    cfg.splits = o.splits;
    cfg.bbox = o.bbox.empty() ? bbox_of_trips(trips) : bbox_from_vec(o.bbox);
    cfg.tz_offset_s = o.tz_offset_s;
    cfg.model = o.model_cfg;
    cfg.train = o.train_cfg;
    cfg.train.seed = g.seed;
    cfg.max_test_samples = o.max_test_samples;
    cfg.arima_max_order = o.arima_max_order;
    cfg.record_timing = !o.no_timing;

    const std::vector<sweep::SweepRow> rows =
        sweep::granularity_sweep(trips, cfg);
    sweep::write_results_csv(o.out, rows);
    const auto n_failed =
        std::count_if(rows.begin(), rows.end(),
                      [](const sweep::SweepRow& r) { return r.failed; });
    std::cout << "wrote " << rows.size() << " result rows (" << n_failed
              << " without a usable evaluation) to " << o.out << "\n";
    for (const auto& row : rows) {
        if (row.failed)
            std::cerr << "note: " << to_string(row.shape) << " "
                      << row.spatial_m << "m " << row.interval_min << "min "
                      << to_string(row.kind) << " " << row.model << " split "
                      << row.split << ": " << row.note << "\n";
    }

    if (!o.report_dir.empty()) {
        const auto files = report::write_report(o.report_dir, rows);
        std::cout << "wrote " << files.size() << " heatmaps to "
                  << o.report_dir << "\n";
    }
    return 0;
}

// ---- report -------------------------------------------------------------------

struct ReportOpts {
    std::string in;
    std::string out_dir;
};

int run_report(const ReportOpts& o) {
    const std::vector<sweep::SweepRow> rows = sweep::read_results_csv(o.in);
    const auto files = report::write_report(o.out_dir, rows);
    std::cout << "wrote " << files.size() << " heatmaps to " << o.out_dir
              << "\n";
    return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"hexcast: hexagonal-grid demand forecasting toolkit"};
    app.require_subcommand(1);
    app.set_config("--config", "", "settings file (key=value per line)");

    GlobalOpts g;
    app.add_option("--seed", g.seed, "random seed")->capture_default_str();
    app.add_option("--threads", g.threads,
                   "reserved; the pipeline is single-threaded")
        ->check(CLI::PositiveNumber);
    app.add_flag("--strict", g.strict, "fail on malformed input rows");

    SynthOpts synth;
    CLI::App* synth_cmd =
        app.add_subcommand("synth", "generate a synthetic trip log");
    synth_cmd->add_option("--out", synth.out, "output trips CSV")->required();
    synth_cmd->add_option("--days", synth.days, "number of days");
    synth_cmd->add_option("--interval-min", synth.interval_min,
                          "profile resolution in minutes");
    synth_cmd->add_option("--hotspots", synth.n_hotspots,
                          "number of demand hotspots");
    synth_cmd->add_option("--center-lon", synth.center_lon, "city longitude");
    synth_cmd->add_option("--center-lat", synth.center_lat, "city latitude");
    synth_cmd->add_option("--ring-m", synth.ring_m,
                          "hotspot ring radius in metres");
    synth_cmd->add_option("--sigma-m", synth.sigma_m,
                          "endpoint jitter in metres");
    synth_cmd->add_option("--base-rate", synth.base_rate,
                          "off-peak trips per hour per hotspot");
    synth_cmd->add_option("--peak-rate", synth.peak_rate,
                          "peak trips per hour per hotspot");
    synth_cmd->add_option("--weekend-factor", synth.weekend_factor,
                          "demand multiplier on Friday/Saturday");
    synth_cmd->add_option("--day-rho", synth.day_rho,
                          "day-level AR(1) coefficient");
    synth_cmd->add_option("--day-sigma", synth.day_sigma,
                          "day-level AR(1) noise scale");
    synth_cmd->add_option("--speed-mps", synth.speed_mps, "mean trip speed");
    synth_cmd->add_option("--t0", synth.t0, "epoch seconds of interval 0");
    synth_cmd->add_option("--tz-offset-s", synth.tz_offset_s,
                          "local time offset in seconds");
    synth_cmd->add_option("--first-weekday", synth.first_weekday,
                          "weekday of day 0 (0 = Monday)");

    AggregateOpts agg;
    CLI::App* agg_cmd = app.add_subcommand(
        "aggregate", "grid a trip log into a demand tensor");
    agg_cmd->add_option("--in", agg.in, "trips CSV")->required();
    agg_cmd->add_option("--out", agg.out, "output demand file")->required();
    agg_cmd->add_option("--grid-shape", agg.shape, "hex or square");
    agg_cmd->add_option("--kind", agg.kind, "departure or arrival");
    agg_cmd->add_option("--spatial-m", agg.spatial_m,
                        "cell size in metres (hex side or square edge)");
    agg_cmd->add_option("--interval-min", agg.interval_min,
                        "interval length in minutes");
    agg_cmd->add_option("--bbox", agg.bbox,
                        "study area: lon_min lat_min lon_max lat_max")
        ->expected(4);
    agg_cmd->add_option("--tz-offset-s", agg.tz_offset_s,
                        "local time offset in seconds");
    agg_cmd->add_option("--grid-cols", agg.grid_cols,
                        "force the grid width (columns)");
    agg_cmd->add_option("--grid-rows", agg.grid_rows,
                        "force the grid height (rows)");
    CLI::Option* agg_t0 =
        agg_cmd->add_option("--t0", agg.t0, "force epoch seconds of interval 0");
    agg_cmd->add_option("--n-intervals", agg.n_intervals,
                        "number of intervals when --t0 is forced");

    TrainOpts train;
    CLI::App* train_cmd =
        app.add_subcommand("train", "fit a model on one day split");
    train_cmd->add_option("--in", train.in, "demand file")->required();
    train_cmd->add_option("--out", train.out, "output checkpoint")->required();
    train_cmd->add_option("--model", train.model,
                          "hconvlstm, convlstm, hcnn, cnn or lstm");
    train_cmd->add_option("--split", train.split, "day-split combination 0-3");
    add_model_options(train_cmd, train.model_cfg, train.train_cfg);

    EvalOpts eval;
    CLI::App* eval_cmd =
        app.add_subcommand("eval", "score a model on one day split");
    eval_cmd->add_option("--in", eval.in, "demand file")->required();
    eval_cmd->add_option("--model-file", eval.model_file,
                         "checkpoint of a trained model");
    eval_cmd->add_option("--model", eval.model,
                         "checkpoint-free baseline: ha or arima");
    eval_cmd->add_option("--split", eval.split, "day-split combination 0-3");
    eval_cmd->add_option("--max-test-samples", eval.max_test_samples,
                         "subsample the test set (0 = all)");
    eval_cmd->add_option("--arima-max-order", eval.arima_max_order,
                         "order bound of the arima baseline");

    SweepOpts sweep_o;
    CLI::App* sweep_cmd = app.add_subcommand(
        "sweep", "score models across aggregation granularities");
    sweep_cmd->add_option("--in", sweep_o.in, "trips CSV")->required();
    sweep_cmd->add_option("--out", sweep_o.out, "output results CSV")
        ->required();
    sweep_cmd->add_option("--report-dir", sweep_o.report_dir,
                          "also render heatmaps into this directory");
    sweep_cmd->add_option("--shapes", sweep_o.shapes, "grid shapes to sweep")
        ->delimiter(',');
    sweep_cmd->add_option("--kinds", sweep_o.kinds, "demand kinds to sweep")
        ->delimiter(',');
    sweep_cmd
        ->add_option("--hex-models", sweep_o.hex_models,
                     "models scored on hexagonal grids")
        ->delimiter(',');
    sweep_cmd
        ->add_option("--square-models", sweep_o.square_models,
                     "models scored on square grids")
        ->delimiter(',');
    sweep_cmd
        ->add_option("--hex-spatial", sweep_o.hex_spatial,
                     "hexagon side lengths in metres")
        ->delimiter(',');
    sweep_cmd
        ->add_option("--square-spatial", sweep_o.square_spatial,
                     "square edge lengths in metres")
        ->delimiter(',');
    sweep_cmd
        ->add_option("--intervals", sweep_o.intervals,
                     "interval lengths in minutes")
        ->delimiter(',');
    sweep_cmd->add_option("--splits", sweep_o.splits, "day-split combinations")
        ->delimiter(',');
    sweep_cmd
        ->add_option("--bbox", sweep_o.bbox,
                     "study area: lon_min lat_min lon_max lat_max")
        ->expected(4);
    sweep_cmd->add_option("--tz-offset-s", sweep_o.tz_offset_s,
                          "local time offset in seconds");
    sweep_cmd->add_option("--max-test-samples", sweep_o.max_test_samples,
                          "subsample each test set (0 = all)");
    sweep_cmd->add_option("--arima-max-order", sweep_o.arima_max_order,
                          "order bound of the arima baseline");
    sweep_cmd->add_flag("--no-timing", sweep_o.no_timing,
                        "zero the timing columns for reproducible bytes");
    add_model_options(sweep_cmd, sweep_o.model_cfg, sweep_o.train_cfg);

    ReportOpts report_o;
    CLI::App* report_cmd =
        app.add_subcommand("report", "render heatmaps from a results CSV");
    report_cmd->add_option("--in", report_o.in, "results CSV")->required();
    report_cmd->add_option("--out-dir", report_o.out_dir, "output directory")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }
    agg.t0_set = agg_t0->count() > 0;

    try {
        if (g.threads > 1)
            std::cerr << "note: --threads is reserved; running on one core\n";
        if (*synth_cmd) return run_synth(synth, g);
        if (*agg_cmd) return run_aggregate(agg, g);
        if (*train_cmd) return run_train(train, g);
        if (*eval_cmd) return run_eval(eval, g);
        if (*sweep_cmd) return run_sweep(sweep_o, g);
        if (*report_cmd) return run_report(report_o);
        throw ConfigError("no subcommand selected");
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace hexcast::cli
