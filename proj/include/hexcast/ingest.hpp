#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hexcast/common.hpp"
#include "hexcast/geom.hpp"

namespace hexcast {

struct TripRecord {
    std::string order_id;
    int64_t pickup_ts = 0;
    GeoPoint pickup;
    int64_t dropoff_ts = 0;
    GeoPoint dropoff;
};

struct BBox {
    double lon_min = 0.0;
    double lat_min = 0.0;
    double lon_max = 0.0;
    double lat_max = 0.0;

    bool contains(const GeoPoint& p) const {
        return p.lon >= lon_min && p.lon <= lon_max && p.lat >= lat_min &&
               p.lat <= lat_max;
    }
    GeoPoint center() const {
        return {0.5 * (lon_min + lon_max), 0.5 * (lat_min + lat_max)};
    }
};

enum class GridShape { hex, square };
enum class DemandKind { departure, arrival };

std::string to_string(GridShape s);
std::string to_string(DemandKind k);
GridShape grid_shape_from(const std::string& s);
DemandKind demand_kind_from(const std::string& s);

// One aggregation configuration: cell size, interval length, study area.
struct GranularitySpec {
    GridShape shape = GridShape::hex;
    double spatial_m = 800.0;  // hexagon side, or square side
    int interval_min = 30;
    BBox bbox;
    int tz_offset_s = 0;
    // Optional overrides; zero means "derive from the data / bbox".
    int64_t t0 = 0;
    bool t0_forced = false;
    int n_intervals = 0;
    int grid_cols = 0;
    int grid_rows = 0;
};

// ---- Trip CSV -------------------------------------------------------------

struct ParseStats {
    int64_t parsed = 0;
    int64_t skipped = 0;
};

// CSV with header order_id,pickup_ts,pickup_lon,pickup_lat,dropoff_ts,
// dropoff_lon,dropoff_lat (any column order). Lenient mode skips and counts
// malformed rows; strict mode raises DataError on the first one.
std::vector<TripRecord> parse_trips(std::istream& in, bool strict,
                                    ParseStats* stats);
std::vector<TripRecord> load_trips(const std::string& path, bool strict,
                                   ParseStats* stats);
void write_trips(std::ostream& out, const std::vector<TripRecord>& trips);

// ---- Synthetic city -------------------------------------------------------

struct Hotspot {
    GeoPoint center;
    double sigma_m = 300.0;        // isotropic jitter of trip endpoints
    std::vector<double> profile;   // expected departures per interval of day
    double attraction = 1.0;       // relative weight as a destination
};

struct SynthConfig {
    std::vector<Hotspot> hotspots;
    int interval_min = 30;
    int n_intervals = 0;      // total; multiples of a day for the weekly shape
    int64_t t0 = 0;           // epoch seconds of interval 0 (local midnight)
    int tz_offset_s = 0;
    int first_weekday = 1;    // 0 = Monday; day 0 of the series
    double weekend_factor = 1.108;  // Friday/Saturday demand multiplier
    double mean_speed_mps = 8.0;    // for dropoff timestamps
    // Optional day-level log-intensity AR(1) modulation (0 = off).
    double day_ar1_rho = 0.0;
    double day_ar1_sigma = 0.0;
};

// Expected departures per interval with morning (07-09) and evening
// (17-19) peaks; base elsewhere, night level at one quarter of base.
std::vector<double> two_peak_profile(int interval_min, double base,
                                     double peak);

// Poisson counts per (origin hotspot, destination hotspot, interval) with
// intensity profile_a(t) * attraction_b / sum(attraction); endpoints are
// Gaussian-jittered around the hotspot centers. Deterministic given seed.
std::vector<TripRecord> synthesize_trips(const SynthConfig& cfg,
                                         uint64_t seed);

// ---- Demand tensor --------------------------------------------------------

struct DemandTensor {
    DemandKind kind = DemandKind::departure;
    GridShape shape = GridShape::hex;
    double spatial_m = 0.0;
    int interval_min = 0;
    int64_t t0 = 0;
    int n_intervals = 0;
    GridIndex grid;
    double ref_lon = 0.0;
    double ref_lat = 0.0;
    std::vector<double> values;  // [cell][interval]
    int64_t n_excluded = 0;

    int n_cells() const { return grid.n_cells(); }
    double at(int cell, int t) const {
        return values[static_cast<int64_t>(cell) * n_intervals + t];
    }
    double& at(int cell, int t) {
        return values[static_cast<int64_t>(cell) * n_intervals + t];
    }
    int intervals_per_day() const { return 1440 / interval_min; }
};

DemandTensor aggregate_demand(const std::vector<TripRecord>& trips,
                              const GranularitySpec& spec, DemandKind kind);

void write_demand(std::ostream& out, const DemandTensor& t);
DemandTensor read_demand(std::istream& in);

// ---- Supervised samples ---------------------------------------------------

struct SampleRef {
    int cell = 0;
    int t_target = 0;  // interval index of the target
};

struct SampleSet {
    const DemandTensor* tensor = nullptr;
    int h = 8;
    std::vector<SampleRef> refs;

    double target(const SampleRef& r) const {
        return tensor->at(r.cell, r.t_target);
    }
};

// Padded mode: every cell and every target interval >= 1, with missing
// history contributing zero maps. Unpadded: targets start at interval h.
SampleSet build_samples(const DemandTensor& tensor, int h,
                        bool padded = true);

// The 19 demands of the two-ring hex patch around `cell` at interval t;
// cells outside the grid extent (or t < 0) contribute zero.
void local_hex_map(const DemandTensor& tensor, int cell, int t,
                   double* out19);

// The 5x5 square patch around `cell` at interval t, row-major from the
// north-west corner.
void local_square_map(const DemandTensor& tensor, int cell, int t,
                      double* out25);

// ---- Target scaling -------------------------------------------------------

struct ScaleParams {
    double y_min = 0.0;
    double y_max = 1.0;
};

// Min-max over the training targets with y_min pinned to zero (demand is a
// count).
ScaleParams fit_scale(const SampleSet& train);

// Forward clips to [0,1]; inverse is the exact algebraic inverse of the
// unclipped map.
double scale_forward(double y, const ScaleParams& p);
double scale_inverse(double s, const ScaleParams& p);

// ---- Cross-validation splits ----------------------------------------------

struct DaySplit {
    std::vector<int> train_days;
    std::vector<int> test_days;
};

// Combination 0: train on the first 21 days, test on the last 9.
// Combination k in 1..3: week k of the training span swaps with days
// 22-28; the test set is that week plus days 29-30. For n_days != 30 the
// boundaries scale proportionally: floor(d * n / 30) for d in {7,14,21,28}.
DaySplit split_days(int combination, int n_days);

std::pair<SampleSet, SampleSet> split_cv(const SampleSet& samples,
                                         int combination);

// Deterministic reservoir-free subsample (shuffle + truncate).
SampleSet subsample(const SampleSet& samples, int64_t max_n, Rng& rng);

}  // namespace hexcast
