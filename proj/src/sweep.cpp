#include "hexcast/sweep.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace hexcast::sweep {

namespace {

constexpr const char* kCsvHeader =
    "shape,spatial_m,interval_min,kind,model,split,rmse,mape_x100,nrmse,"
    "n_test,n_mape_excluded,train_s,test_s";

std::string fmt(double v, int precision) {
    if (!std::isfinite(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
    return buf;
}

SweepRow flagged_row(GridShape shape, int spatial_m, int interval_min,
                     DemandKind kind, const std::string& model, int split,
                     const std::string& note) {
    SweepRow row;
    row.shape = shape;
    row.spatial_m = spatial_m;
    row.interval_min = interval_min;
    row.kind = kind;
    row.model = model;
    row.split = split;
    row.report.rmse = std::nan("");
    row.report.mape = std::nan("");
    row.report.nrmse = std::nan("");
    row.failed = true;
    row.note = note;
    return row;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) fields.push_back(item);
    if (!line.empty() && line.back() == ',') fields.push_back("");
    return fields;
}

double parse_metric(const std::string& raw) {
    if (raw == "nan" || raw == "-nan") return std::nan("");
    std::size_t used = 0;
    const double v = std::stod(raw, &used);
    if (used != raw.size()) throw DataError("results: bad number: " + raw);
    return v;
}

}  // namespace

std::vector<SweepRow> granularity_sweep(const std::vector<TripRecord>& trips,
                                        const SweepConfig& cfg) {
    if (cfg.splits.empty()) throw ConfigError("sweep: no splits configured");
    std::vector<SweepRow> rows;

    for (const GridShape shape : cfg.shapes) {
        const auto& spatial =
            shape == GridShape::hex ? cfg.hex_spatial : cfg.square_spatial;
        const auto& model_ids =
            shape == GridShape::hex ? cfg.hex_models : cfg.square_models;
        if (spatial.empty() || model_ids.empty())
            throw ConfigError("sweep: empty spatial or model list");

        for (const int spatial_m : spatial) {
            for (const int interval_min : cfg.temporal) {
                for (const DemandKind kind : cfg.kinds) {
                    DemandTensor tensor;
                    std::string agg_note;
                    try {
                        GranularitySpec spec;
                        spec.shape = shape;
                        spec.spatial_m = spatial_m;
                        spec.interval_min = interval_min;
                        spec.bbox = cfg.bbox;
                        spec.tz_offset_s = cfg.tz_offset_s;
                        tensor = aggregate_demand(trips, spec, kind);
                    } catch (const ConfigError& e) {
                        agg_note = e.what();
                    } catch (const DataError& e) {
                        agg_note = e.what();
                    }

                    for (const auto& model_id : model_ids) {
                        if (!agg_note.empty()) {
                            for (const int split : cfg.splits)
                                rows.push_back(flagged_row(
                                    shape, spatial_m, interval_min, kind,
                                    model_id, split, agg_note));
                            continue;
                        }
                        metrics::CvConfig cv;
                        cv.model_ids = {model_id};
                        cv.reference = model_id;
                        cv.splits = cfg.splits;
                        cv.model = cfg.model;
                        cv.train = cfg.train;
                        cv.max_test_samples = cfg.max_test_samples;
                        cv.arima_max_order = cfg.arima_max_order;
                        try {
                            const metrics::CvResult res =
                                metrics::cross_validate(tensor, cv);
                            for (const auto& cell : res.cells) {
                                SweepRow row;
                                row.shape = shape;
                                row.spatial_m = spatial_m;
                                row.interval_min = interval_min;
                                row.kind = kind;
                                row.model = cell.model;
                                row.split = cell.split;
                                row.report = cell.report;
                                if (cfg.record_timing) {
                                    row.train_s = cell.train_s;
                                    row.test_s = cell.test_s;
                                }
                                rows.push_back(std::move(row));
                            }
                        } catch (const ConfigError& e) {
                            for (const int split : cfg.splits)
                                rows.push_back(flagged_row(
                                    shape, spatial_m, interval_min, kind,
                                    model_id, split, e.what()));
                        } catch (const DataError& e) {
                            for (const int split : cfg.splits)
                                rows.push_back(flagged_row(
                                    shape, spatial_m, interval_min, kind,
                                    model_id, split, e.what()));
                        }
                    }
                }
            }
        }
    }
    return rows;
}

void write_results_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
    out << kCsvHeader << "\n";
    for (const auto& row : rows) {
        out << to_string(row.shape) << "," << row.spatial_m << ","
            << row.interval_min << "," << to_string(row.kind) << ","
            << row.model << "," << row.split << ","
            << fmt(row.report.rmse, 6) << ","
            << fmt(row.report.mape * 100.0, 4) << ","
            << fmt(row.report.nrmse, 6) << "," << row.report.n << ","
            << row.report.n_mape_excluded << "," << fmt(row.train_s, 3)
            << "," << fmt(row.test_s, 3) << "\n";
    }
}

void write_results_csv(const std::string& path,
                       const std::vector<SweepRow>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("results: cannot write " + path);
    write_results_csv(out, rows);
    if (!out) throw DataError("results: write failed for " + path);
}

std::vector<SweepRow> read_results_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("results: empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kCsvHeader) throw DataError("results: unexpected header");

    std::vector<SweepRow> rows;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != 13)
            throw DataError("results: bad field count on line " +
                            std::to_string(line_no));
        try {
            SweepRow row;
            row.shape = grid_shape_from(f[0]);
            row.spatial_m = std::stoi(f[1]);
            row.interval_min = std::stoi(f[2]);
            row.kind = demand_kind_from(f[3]);
            row.model = f[4];
            row.split = std::stoi(f[5]);
            row.report.rmse = parse_metric(f[6]);
            row.report.mape = parse_metric(f[7]) / 100.0;
            row.report.nrmse = parse_metric(f[8]);
            row.report.n = std::stoll(f[9]);
            row.report.n_mape_excluded = std::stoll(f[10]);
            row.train_s = parse_metric(f[11]);
            row.test_s = parse_metric(f[12]);
            row.failed = !std::isfinite(row.report.rmse);
            rows.push_back(std::move(row));
        } catch (const std::invalid_argument&) {
            throw DataError("results: bad row on line " +
                            std::to_string(line_no));
        } catch (const std::out_of_range&) {
            throw DataError("results: bad row on line " +
                            std::to_string(line_no));
        }
    }
    return rows;
}

std::vector<SweepRow> read_results_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("results: cannot open " + path);
    return read_results_csv(in);
}

}  // namespace hexcast::sweep
