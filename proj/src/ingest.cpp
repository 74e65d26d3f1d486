#include "hexcast/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace hexcast {

std::string to_string(GridShape s) {
    return s == GridShape::hex ? "hex" : "square";
}

std::string to_string(DemandKind k) {
    return k == DemandKind::departure ? "departure" : "arrival";
}

GridShape grid_shape_from(const std::string& s) {
    if (s == "hex") return GridShape::hex;
    if (s == "square") return GridShape::square;
    throw ConfigError("unknown grid shape: " + s);
}

DemandKind demand_kind_from(const std::string& s) {
    if (s == "departure") return DemandKind::departure;
    if (s == "arrival") return DemandKind::arrival;
    throw ConfigError("unknown demand kind: " + s);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    for (char c : line) {
        if (c == ',') {
            out.push_back(field);
            field.clear();
        } else if (c != '\r') {
            field += c;
        }
    }
    out.push_back(field);
    return out;
}

bool parse_double(const std::string& s, double* out) {
    try {
        size_t pos = 0;
        *out = std::stod(s, &pos);
        return pos == s.size() && std::isfinite(*out);
    } catch (...) {
        return false;
    }
}

bool parse_ts(const std::string& s, int64_t* out) {
    try {
        size_t pos = 0;
        *out = std::stoll(s, &pos);
        return pos == s.size();
    } catch (...) {
        return false;
    }
}

int64_t floor_div(int64_t a, int64_t b) {
    int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

}  // namespace

std::vector<TripRecord> parse_trips(std::istream& in, bool strict,
                                    ParseStats* stats) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("trip CSV: empty input");
    const auto header = split_csv_line(line);
    const char* required[] = {"order_id",   "pickup_ts",   "pickup_lon",
                              "pickup_lat", "dropoff_ts",  "dropoff_lon",
                              "dropoff_lat"};
    int col[7];
    for (int i = 0; i < 7; ++i) {
        const auto it = std::find(header.begin(), header.end(), required[i]);
        if (it == header.end())
            throw DataError(std::string("trip CSV: missing column ") +
                            required[i]);
        col[i] = static_cast<int>(it - header.begin());
    }

    std::vector<TripRecord> trips;
    ParseStats local;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        const auto f = split_csv_line(line);
        TripRecord t;
        bool ok = f.size() == header.size();
        ok = ok && parse_ts(f[col[1]], &t.pickup_ts);
        ok = ok && parse_double(f[col[2]], &t.pickup.lon);
        ok = ok && parse_double(f[col[3]], &t.pickup.lat);
        ok = ok && parse_ts(f[col[4]], &t.dropoff_ts);
        ok = ok && parse_double(f[col[5]], &t.dropoff.lon);
        ok = ok && parse_double(f[col[6]], &t.dropoff.lat);
        ok = ok && t.dropoff_ts >= t.pickup_ts;
        if (!ok) {
            if (strict)
                throw DataError("trip CSV: malformed row: " + line);
            ++local.skipped;
            continue;
        }
        t.order_id = f[col[0]];
        trips.push_back(std::move(t));
        ++local.parsed;
    }
    if (stats) *stats = local;
    return trips;
}

std::vector<TripRecord> load_trips(const std::string& path, bool strict,
                                   ParseStats* stats) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open trips file: " + path);
    return parse_trips(in, strict, stats);
}

void write_trips(std::ostream& out, const std::vector<TripRecord>& trips) {
    out << "order_id,pickup_ts,pickup_lon,pickup_lat,dropoff_ts,dropoff_lon,"
           "dropoff_lat\n";
    char buf[256];
    for (const TripRecord& t : trips) {
        std::snprintf(buf, sizeof(buf), "%s,%lld,%.7f,%.7f,%lld,%.7f,%.7f\n",
                      t.order_id.c_str(),
                      static_cast<long long>(t.pickup_ts), t.pickup.lon,
                      t.pickup.lat, static_cast<long long>(t.dropoff_ts),
                      t.dropoff.lon, t.dropoff.lat);
        out << buf;
    }
}

std::vector<double> two_peak_profile(int interval_min, double base,
                                     double peak) {
    if (1440 % interval_min != 0)
        throw ConfigError("interval length must divide a day");
    const int per_day = 1440 / interval_min;
    std::vector<double> profile(per_day);
    for (int i = 0; i < per_day; ++i) {
        const double mid_h = (i + 0.5) * interval_min / 60.0;
        double rate;  // expected departures per hour
        if ((mid_h >= 7.0 && mid_h < 9.0) || (mid_h >= 17.0 && mid_h < 19.0))
            rate = peak;
        else if (mid_h >= 22.0 || mid_h < 6.0)
            rate = 0.25 * base;
        else
            rate = base;
        profile[i] = rate * interval_min / 60.0;
    }
    return profile;
}

std::vector<TripRecord> synthesize_trips(const SynthConfig& cfg,
                                         uint64_t seed) {
    if (cfg.hotspots.empty())
        throw ConfigError("synthesize_trips: at least one hotspot required");
    if (1440 % cfg.interval_min != 0)
        throw ConfigError("synthesize_trips: interval must divide a day");
    const int per_day = 1440 / cfg.interval_min;
    for (const Hotspot& h : cfg.hotspots)
        if (static_cast<int>(h.profile.size()) != per_day)
            throw ConfigError(
                "synthesize_trips: profile length must equal intervals per "
                "day");

    double attraction_sum = 0.0;
    double lon_sum = 0.0, lat_sum = 0.0;
    for (const Hotspot& h : cfg.hotspots) {
        attraction_sum += h.attraction;
        lon_sum += h.center.lon;
        lat_sum += h.center.lat;
    }
    if (attraction_sum <= 0.0)
        throw ConfigError("synthesize_trips: attractions must sum positive");
    const size_t n_spots = cfg.hotspots.size();
    const Projection proj = Projection::at(lon_sum / n_spots, lat_sum / n_spots);

    Rng rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> u01(0.0, 1.0);

    const int n_days = (cfg.n_intervals + per_day - 1) / per_day;
    std::vector<double> day_factor(std::max(n_days, 1), 1.0);
    double z = 0.0;
    for (int d = 0; d < n_days; ++d) {
        const int weekday = (cfg.first_weekday + d) % 7;  // 0 = Monday
        double f = (weekday == 4 || weekday == 5) ? cfg.weekend_factor : 1.0;
        if (cfg.day_ar1_sigma > 0.0) {
            z = cfg.day_ar1_rho * z + cfg.day_ar1_sigma * gauss(rng);
            f *= std::exp(z);
        }
        day_factor[d] = f;
    }

    const int64_t dt = static_cast<int64_t>(cfg.interval_min) * 60;
    std::vector<TripRecord> trips;
    int64_t counter = 0;
    char idbuf[32];
    auto jitter = [&](const GeoPoint& c, double sigma_m) {
        GeoPoint p = c;
        p.lon += sigma_m * gauss(rng) / proj.meters_per_deg_lon;
        p.lat += sigma_m * gauss(rng) / proj.meters_per_deg_lat;
        return p;
    };

    for (int t = 0; t < cfg.n_intervals; ++t) {
        const int day = t / per_day;
        const int slot = t % per_day;
        for (const Hotspot& origin : cfg.hotspots) {
            const double base = origin.profile[slot] * day_factor[day];
            if (base <= 0.0) continue;
            for (const Hotspot& dest : cfg.hotspots) {
                const double lambda =
                    base * dest.attraction / attraction_sum;
                if (lambda <= 0.0) continue;
                std::poisson_distribution<int> pois(lambda);
                const int n = pois(rng);
                for (int i = 0; i < n; ++i) {
                    TripRecord rec;
                    std::snprintf(idbuf, sizeof(idbuf), "synth-%08lld",
                                  static_cast<long long>(counter++));
                    rec.order_id = idbuf;
                    rec.pickup_ts =
                        cfg.t0 + t * dt +
                        static_cast<int64_t>(u01(rng) * static_cast<double>(dt));
                    rec.pickup = jitter(origin.center, origin.sigma_m);
                    rec.dropoff = jitter(dest.center, dest.sigma_m);
                    const PlanarPoint a = project(rec.pickup, proj);
                    const PlanarPoint b = project(rec.dropoff, proj);
                    const double dist = std::hypot(a.x - b.x, a.y - b.y);
                    const double travel =
                        dist / cfg.mean_speed_mps * (0.8 + 0.4 * u01(rng));
                    rec.dropoff_ts =
                        rec.pickup_ts + 60 + static_cast<int64_t>(travel);
                    trips.push_back(std::move(rec));
                }
            }
        }
    }
    std::sort(trips.begin(), trips.end(),
              [](const TripRecord& a, const TripRecord& b) {
                  if (a.pickup_ts != b.pickup_ts)
                      return a.pickup_ts < b.pickup_ts;
                  return a.order_id < b.order_id;
              });
    return trips;
}

DemandTensor aggregate_demand(const std::vector<TripRecord>& trips,
                              const GranularitySpec& spec, DemandKind kind) {
    if (1440 % spec.interval_min != 0)
        throw ConfigError("aggregate: interval length must divide a day");
    if (spec.spatial_m <= 0.0)
        throw ConfigError("aggregate: spatial size must be positive");
    if (spec.bbox.lon_max <= spec.bbox.lon_min ||
        spec.bbox.lat_max <= spec.bbox.lat_min)
        throw ConfigError("aggregate: empty bounding box");

    const GeoPoint center = spec.bbox.center();
    const Projection proj = Projection::at(center.lon, center.lat);
    const PlanarPoint lo =
        project({spec.bbox.lon_min, spec.bbox.lat_min}, proj);
    const PlanarPoint hi =
        project({spec.bbox.lon_max, spec.bbox.lat_max}, proj);

    DemandTensor out;
    out.kind = kind;
    out.shape = spec.shape;
    out.spatial_m = spec.spatial_m;
    out.interval_min = spec.interval_min;
    out.ref_lon = proj.ref_lon;
    out.ref_lat = proj.ref_lat;

    HexGridSpec hex{spec.spatial_m, {0.0, 0.0}, 0, 0};
    SquareGridSpec square{spec.spatial_m, {0.0, 0.0}, 0, 0};
    if (spec.grid_cols > 0 && spec.grid_rows > 0) {
        out.grid.hex = spec.shape == GridShape::hex;
        out.grid.n_cols = spec.grid_cols;
        out.grid.n_rows = spec.grid_rows;
        out.grid.q0 = -(spec.grid_cols / 2);
        out.grid.row_k = spec.grid_rows / 2;
    } else if (spec.shape == GridShape::hex) {
        out.grid = hex_extent(hex, lo, hi);
    } else {
        out.grid = square_extent(square, lo, hi);
    }

    const int64_t dt = static_cast<int64_t>(spec.interval_min) * 60;
    const int per_day = 1440 / spec.interval_min;
    const bool departure = kind == DemandKind::departure;
    if (spec.t0_forced) {
        out.t0 = spec.t0;
        out.n_intervals = spec.n_intervals;
        if (out.n_intervals <= 0)
            throw ConfigError("aggregate: forced t0 requires n_intervals");
    } else {
        int64_t ts_min = 0, ts_max = 0;
        bool any = false;
        for (const TripRecord& trip : trips) {
            const GeoPoint& p = departure ? trip.pickup : trip.dropoff;
            if (!spec.bbox.contains(p)) continue;
            const int64_t ts = departure ? trip.pickup_ts : trip.dropoff_ts;
            if (!any || ts < ts_min) ts_min = ts;
            if (!any || ts > ts_max) ts_max = ts;
            any = true;
        }
        if (!any) throw DataError("aggregate: no in-range trips");
        const int64_t day0 = floor_div(ts_min + spec.tz_offset_s, 86400);
        const int64_t day_last = floor_div(ts_max + spec.tz_offset_s, 86400);
        out.t0 = day0 * 86400 - spec.tz_offset_s;
        out.n_intervals =
            spec.n_intervals > 0
                ? spec.n_intervals
                : static_cast<int>((day_last - day0 + 1) * per_day);
    }

    out.values.assign(
        static_cast<int64_t>(out.grid.n_cells()) * out.n_intervals, 0.0);
    for (const TripRecord& trip : trips) {
        const GeoPoint& p = departure ? trip.pickup : trip.dropoff;
        const int64_t ts = departure ? trip.pickup_ts : trip.dropoff_ts;
        if (!spec.bbox.contains(p)) {
            ++out.n_excluded;
            continue;
        }
        const int64_t idx = floor_div(ts - out.t0, dt);
        if (idx < 0 || idx >= out.n_intervals) {
            ++out.n_excluded;
            continue;
        }
        const PlanarPoint planar = project(p, proj);
        int cell;
        if (spec.shape == GridShape::hex) {
            cell = out.grid.index_of(hex_of(planar, hex));
        } else {
            const SquareCell c = square_of(planar, square);
            cell = out.grid.index_of({c.col, c.row});
        }
        if (cell < 0) {
            ++out.n_excluded;
            continue;
        }
        out.at(cell, static_cast<int>(idx)) += 1.0;
    }
    return out;
}

void write_demand(std::ostream& out, const DemandTensor& t) {
    out << "HEXCAST-DEMAND v1\n";
    out << "kind=" << to_string(t.kind) << "\n";
    out << "shape=" << to_string(t.shape) << "\n";
    char buf[128];
    std::snprintf(buf, sizeof(buf), "spatial_m=%.6f\n", t.spatial_m);
    out << buf;
    out << "interval_min=" << t.interval_min << "\n";
    out << "t0=" << t.t0 << "\n";
    out << "n_intervals=" << t.n_intervals << "\n";
    out << "grid_q0=" << t.grid.q0 << "\n";
    out << "grid_row_k=" << t.grid.row_k << "\n";
    out << "grid_cols=" << t.grid.n_cols << "\n";
    out << "grid_rows=" << t.grid.n_rows << "\n";
    std::snprintf(buf, sizeof(buf), "ref_lon=%.7f\nref_lat=%.7f\n", t.ref_lon,
                  t.ref_lat);
    out << buf;
    out << "excluded=" << t.n_excluded << "\n";
    out << "cell_q,cell_r,interval,count\n";
    for (int cell = 0; cell < t.n_cells(); ++cell) {
        const AxialCoord a = t.grid.cell_at(cell);
        for (int i = 0; i < t.n_intervals; ++i) {
            const double v = t.at(cell, i);
            if (v == 0.0) continue;
            out << a.q << "," << a.r << "," << i << ","
                << static_cast<long long>(v) << "\n";
        }
    }
}

DemandTensor read_demand(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || split_csv_line(line)[0] != "HEXCAST-DEMAND v1")
        throw DataError("demand file: bad magic line");
    DemandTensor t;
    bool header_done = false;
    while (!header_done && std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.rfind("cell_q,", 0) == 0) {
            header_done = true;
            break;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw DataError("demand file: malformed header line: " + line);
        const std::string key = line.substr(0, eq);
        const std::string val = line.substr(eq + 1);
        if (key == "kind") t.kind = demand_kind_from(val);
        else if (key == "shape") t.shape = grid_shape_from(val);
        else if (key == "spatial_m") t.spatial_m = std::stod(val);
        else if (key == "interval_min") t.interval_min = std::stoi(val);
        else if (key == "t0") t.t0 = std::stoll(val);
        else if (key == "n_intervals") t.n_intervals = std::stoi(val);
        else if (key == "grid_q0") t.grid.q0 = std::stoi(val);
        else if (key == "grid_row_k") t.grid.row_k = std::stoi(val);
        else if (key == "grid_cols") t.grid.n_cols = std::stoi(val);
        else if (key == "grid_rows") t.grid.n_rows = std::stoi(val);
        else if (key == "ref_lon") t.ref_lon = std::stod(val);
        else if (key == "ref_lat") t.ref_lat = std::stod(val);
        else if (key == "excluded") t.n_excluded = std::stoll(val);
        else throw DataError("demand file: unknown header key: " + key);
    }
    if (!header_done) throw DataError("demand file: missing column header");
    t.grid.hex = t.shape == GridShape::hex;
    if (t.grid.n_cells() <= 0 || t.n_intervals <= 0)
        throw DataError("demand file: empty grid or time range");
    t.values.assign(static_cast<int64_t>(t.n_cells()) * t.n_intervals, 0.0);
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        const auto f = split_csv_line(line);
        if (f.size() != 4) throw DataError("demand file: malformed row");
        const AxialCoord a{std::stoi(f[0]), std::stoi(f[1])};
        const int cell = t.grid.index_of(a);
        const int interval = std::stoi(f[2]);
        if (cell < 0 || interval < 0 || interval >= t.n_intervals)
            throw DataError("demand file: cell or interval out of range");
        t.at(cell, interval) = std::stod(f[3]);
    }
    return t;
}

SampleSet build_samples(const DemandTensor& tensor, int h, bool padded) {
    if (h < 1) throw ConfigError("build_samples: history must be positive");
    if (!padded && tensor.n_intervals <= h)
        throw DataError("build_samples: not enough intervals for history");
    SampleSet s;
    s.tensor = &tensor;
    s.h = h;
    const int t_start = padded ? 1 : h;
    s.refs.reserve(static_cast<size_t>(tensor.n_cells()) *
                   std::max(0, tensor.n_intervals - t_start));
    for (int cell = 0; cell < tensor.n_cells(); ++cell)
        for (int t = t_start; t < tensor.n_intervals; ++t)
            s.refs.push_back({cell, t});
    return s;
}

void local_hex_map(const DemandTensor& tensor, int cell, int t,
                   double* out19) {
    const auto ring =
        two_ring_index(tensor.grid.cell_at(cell), LocalIndexTable::standard());
    for (int m = 0; m < 19; ++m) {
        const int idx = tensor.grid.index_of(ring[m]);
        out19[m] =
            (idx >= 0 && t >= 0 && t < tensor.n_intervals)
                ? tensor.at(idx, t)
                : 0.0;
    }
}

void local_square_map(const DemandTensor& tensor, int cell, int t,
                      double* out25) {
    const AxialCoord c = tensor.grid.cell_at(cell);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) {
            const AxialCoord n{c.q + (j - 2), c.r + (2 - i)};
            const int idx = tensor.grid.index_of(n);
            out25[i * 5 + j] =
                (idx >= 0 && t >= 0 && t < tensor.n_intervals)
                    ? tensor.at(idx, t)
                    : 0.0;
        }
}

ScaleParams fit_scale(const SampleSet& train) {
    if (train.refs.empty())
        throw ConfigError("fit_scale: empty training set");
    double y_max = 0.0;
    for (const SampleRef& r : train.refs)
        y_max = std::max(y_max, train.target(r));
    if (y_max <= 0.0)
        throw ConfigError("fit_scale: degenerate target range");
    return {0.0, y_max};
}

double scale_forward(double y, const ScaleParams& p) {
    if (p.y_max <= p.y_min)
        throw ConfigError("scale: degenerate range");
    const double s = (y - p.y_min) / (p.y_max - p.y_min);
    return std::clamp(s, 0.0, 1.0);
}

double scale_inverse(double s, const ScaleParams& p) {
    if (p.y_max <= p.y_min)
        throw ConfigError("scale: degenerate range");
    return s * (p.y_max - p.y_min) + p.y_min;
}

DaySplit split_days(int combination, int n_days) {
    if (combination < 0 || combination > 3)
        throw ConfigError("split: combination must be 0..3");
    const auto boundary = [n_days](int d) { return d * n_days / 30; };
    const int b7 = boundary(7), b14 = boundary(14), b21 = boundary(21),
              b28 = boundary(28);
    // Only the segments the chosen combination uses must be nonempty.
    const bool ok = combination == 0
                        ? b21 >= 1 && n_days > b21
                        : b7 >= 1 && b14 > b7 && b21 > b14 && b28 > b21 &&
                              n_days > b28;
    if (!ok) throw ConfigError("split: too few days for the plan");
    auto range = [](int lo, int hi) {
        std::vector<int> v;
        for (int d = lo; d < hi; ++d) v.push_back(d);
        return v;
    };
    DaySplit out;
    if (combination == 0) {
        out.train_days = range(0, b21);
        out.test_days = range(b21, n_days);
        return out;
    }
    const int part_lo[] = {0, b7, b14};
    const int part_hi[] = {b7, b14, b21};
    const int lo = part_lo[combination - 1], hi = part_hi[combination - 1];
    for (int d = 0; d < b21; ++d)
        if (d < lo || d >= hi) out.train_days.push_back(d);
    for (int d = b21; d < b28; ++d) out.train_days.push_back(d);
    out.test_days = range(lo, hi);
    for (int d = b28; d < n_days; ++d) out.test_days.push_back(d);
    return out;
}

std::pair<SampleSet, SampleSet> split_cv(const SampleSet& samples,
                                         int combination) {
    const DemandTensor& tensor = *samples.tensor;
    const int per_day = tensor.intervals_per_day();
    const int n_days = (tensor.n_intervals + per_day - 1) / per_day;
    const DaySplit plan = split_days(combination, n_days);
    std::vector<char> in_train(n_days, 0), in_test(n_days, 0);
    for (int d : plan.train_days) in_train[d] = 1;
    for (int d : plan.test_days) in_test[d] = 1;

    SampleSet train, test;
    train.tensor = test.tensor = samples.tensor;
    train.h = test.h = samples.h;
    for (const SampleRef& r : samples.refs) {
        const int day = r.t_target / per_day;
        if (in_train[day]) train.refs.push_back(r);
        else if (in_test[day]) test.refs.push_back(r);
    }
    return {std::move(train), std::move(test)};
}

SampleSet subsample(const SampleSet& samples, int64_t max_n, Rng& rng) {
    if (static_cast<int64_t>(samples.refs.size()) <= max_n) return samples;
    SampleSet out;
    out.tensor = samples.tensor;
    out.h = samples.h;
    out.refs = samples.refs;
    std::shuffle(out.refs.begin(), out.refs.end(), rng);
    out.refs.resize(static_cast<size_t>(max_n));
    std::sort(out.refs.begin(), out.refs.end(),
              [](const SampleRef& a, const SampleRef& b) {
                  if (a.cell != b.cell) return a.cell < b.cell;
                  return a.t_target < b.t_target;
              });
    return out;
}

}  // namespace hexcast
