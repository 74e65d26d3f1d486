#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hexcast/report.hpp"
#include "hexcast/sweep.hpp"

using namespace hexcast;

namespace {

constexpr const char* kHeader =
    "shape,spatial_m,interval_min,kind,model,split,rmse,mape_x100,nrmse,"
    "n_test,n_mape_excluded,train_s,test_s";

// Two days of trips around (10, 50); split 0 trains on day 0, tests day 1.
std::vector<TripRecord> tiny_city() {
    SynthConfig cfg;
    cfg.interval_min = 30;
    cfg.n_intervals = 2 * 48;
    cfg.t0 = 1704067200;
    Hotspot a;
    a.center = {10.0, 50.0};
    a.sigma_m = 200.0;
    a.profile.assign(48, 2.0);
    Hotspot b = a;
    b.center = {10.012, 50.0};
    cfg.hotspots = {a, b};
    return synthesize_trips(cfg, 515);
}

sweep::SweepConfig tiny_sweep_config() {
    sweep::SweepConfig cfg;
    cfg.hex_spatial = {400, 800};
    cfg.square_spatial = {500, 1000};
    cfg.temporal = {30, 60};
    cfg.hex_models = {"ha"};
    cfg.square_models = {"ha"};
    cfg.splits = {0};
    cfg.bbox = {9.97, 49.98, 10.04, 50.02};
    cfg.record_timing = false;
    return cfg;
}

sweep::SweepRow make_row(GridShape shape, int spatial, int interval,
                         DemandKind kind, double rmse, double mape,
                         double nrmse) {
    sweep::SweepRow row;
    row.shape = shape;
    row.spatial_m = spatial;
    row.interval_min = interval;
    row.kind = kind;
    row.model = "ha";
    row.split = 0;
    row.report.rmse = rmse;
    row.report.mape = mape;
    row.report.nrmse = nrmse;
    row.report.n = 100;
    row.failed = !std::isfinite(rmse);
    return row;
}

}  // namespace

TEST_CASE("granularity sweep emits one row per configuration in fixed order") {
    const auto trips = tiny_city();
    const auto rows = sweep::granularity_sweep(trips, tiny_sweep_config());

    // 2 shapes x 2 spatial x 2 intervals x 2 kinds x 1 model x 1 split.
    REQUIRE(rows.size() == 16);

    size_t i = 0;
    for (const GridShape shape : {GridShape::hex, GridShape::square}) {
        const std::vector<int> spatial =
            shape == GridShape::hex ? std::vector<int>{400, 800}
                                    : std::vector<int>{500, 1000};
        for (const int sp : spatial) {
            for (const int iv : {30, 60}) {
                for (const DemandKind kind :
                     {DemandKind::departure, DemandKind::arrival}) {
                    CAPTURE(i);
                    const auto& row = rows[i++];
                    CHECK(row.shape == shape);
                    CHECK(row.spatial_m == sp);
                    CHECK(row.interval_min == iv);
                    CHECK(row.kind == kind);
                    CHECK(row.model == "ha");
                    CHECK(row.split == 0);
                    CHECK_FALSE(row.failed);
                    CHECK(std::isfinite(row.report.rmse));
                    CHECK(row.report.n > 0);
                    CHECK(row.train_s == 0.0);  // timing disabled
                    CHECK(row.test_s == 0.0);
                }
            }
        }
    }
}

TEST_CASE("unusable configurations become flagged rows instead of aborting") {
    const auto trips = tiny_city();

    SUBCASE("interval that does not divide the day") {
        sweep::SweepConfig cfg = tiny_sweep_config();
        cfg.shapes = {GridShape::hex};
        cfg.hex_spatial = {400};
        cfg.temporal = {7, 30};
        const auto rows = sweep::granularity_sweep(trips, cfg);
        REQUIRE(rows.size() == 4);
        for (const auto& row : rows) {
            if (row.interval_min == 7) {
                CHECK(row.failed);
                CHECK(std::isnan(row.report.rmse));
                CHECK(std::isnan(row.report.mape));
                CHECK(row.report.n == 0);
                CHECK_FALSE(row.note.empty());
            } else {
                CHECK_FALSE(row.failed);
            }
        }
    }
    SUBCASE("study area with no trips") {
        sweep::SweepConfig cfg = tiny_sweep_config();
        cfg.shapes = {GridShape::hex};
        cfg.hex_spatial = {400};
        cfg.temporal = {30};
        cfg.bbox = {100.0, 10.0, 100.1, 10.1};
        const auto rows = sweep::granularity_sweep(trips, cfg);
        REQUIRE(rows.size() == 2);
        for (const auto& row : rows) {
            CHECK(row.failed);
            CHECK_FALSE(row.note.empty());
        }
    }
    SUBCASE("empty split list is a configuration error") {
        sweep::SweepConfig cfg = tiny_sweep_config();
        cfg.splits = {};
        CHECK_THROWS_AS(sweep::granularity_sweep(trips, cfg), ConfigError);
    }
}

TEST_CASE("results CSV writes the exact header and round trips") {
    std::vector<sweep::SweepRow> rows;
    rows.push_back(make_row(GridShape::hex, 800, 30, DemandKind::departure,
                            8.82, 0.231456, 0.010268));
    rows.push_back(make_row(GridShape::square, 1300, 60, DemandKind::arrival,
                            1.5, 0.52, 0.031));
    rows.push_back(make_row(GridShape::hex, 200, 15, DemandKind::arrival,
                            std::nan(""), std::nan(""), std::nan("")));
    rows[1].train_s = 12.345;
    rows[1].test_s = 0.678;
    rows[2].report.n = 0;

    std::stringstream ss;
    sweep::write_results_csv(ss, rows);

    std::string header;
    std::getline(ss, header);
    CHECK(header == kHeader);

    ss.clear();
    ss.seekg(0);
    const auto got = sweep::read_results_csv(ss);
    REQUIRE(got.size() == rows.size());
    for (size_t i = 0; i < rows.size(); ++i) {
        CAPTURE(i);
        CHECK(got[i].shape == rows[i].shape);
        CHECK(got[i].spatial_m == rows[i].spatial_m);
        CHECK(got[i].interval_min == rows[i].interval_min);
        CHECK(got[i].kind == rows[i].kind);
        CHECK(got[i].model == rows[i].model);
        CHECK(got[i].split == rows[i].split);
        CHECK(got[i].failed == rows[i].failed);
        CHECK(got[i].report.n == rows[i].report.n);
        if (rows[i].failed) {
            CHECK(std::isnan(got[i].report.rmse));
            CHECK(std::isnan(got[i].report.mape));
        } else {
            CHECK(got[i].report.rmse ==
                  doctest::Approx(rows[i].report.rmse).epsilon(1e-6));
            CHECK(got[i].report.mape ==
                  doctest::Approx(rows[i].report.mape).epsilon(1e-5));
            CHECK(got[i].report.nrmse ==
                  doctest::Approx(rows[i].report.nrmse).epsilon(1e-4));
            CHECK(got[i].train_s ==
                  doctest::Approx(rows[i].train_s).epsilon(1e-3));
        }
    }
}

TEST_CASE("results CSV rejects malformed input") {
    SUBCASE("wrong header") {
        std::stringstream ss("rmse,mape\n1,2\n");
        CHECK_THROWS_AS(sweep::read_results_csv(ss), DataError);
    }
    SUBCASE("short row") {
        std::stringstream ss(std::string(kHeader) + "\nhex,800,30\n");
        CHECK_THROWS_AS(sweep::read_results_csv(ss), DataError);
    }
    SUBCASE("bad number") {
        std::stringstream ss(std::string(kHeader) +
                             "\nhex,800,30,departure,ha,0,x,1,1,1,1,0,0\n");
        CHECK_THROWS_AS(sweep::read_results_csv(ss), DataError);
    }
    SUBCASE("empty stream") {
        std::stringstream ss;
        CHECK_THROWS_AS(sweep::read_results_csv(ss), DataError);
    }
}

TEST_CASE("heatmap SVG marks the minimum and hatches missing cells") {
    report::Heatmap map;
    map.title = "demo";
    map.row_values = {200, 500};
    map.col_values = {15, 30, 60};
    map.cells = {5.0, 3.0, 4.0, std::nan(""), 3.0, 6.0};

    const std::string svg = report::render_svg(map);
    CHECK(svg.find("<svg") == 0);
    CHECK(svg.find("url(#missing)") != std::string::npos);       // NaN tile
    CHECK(svg.find("stroke=\"#D62728\"") != std::string::npos);  // min box
    // First 3.0 in row-major order wins the tie: row 0, column 1.
    const auto outline = svg.find("stroke=\"#D62728\"");
    const auto rect_start = svg.rfind("<rect", outline);
    CHECK(svg.substr(rect_start, 60).find("x=\"169\"") !=
          std::string::npos);  // 96 + 1*72 + 1
    CHECK(svg.find(">5.000<") != std::string::npos);
    CHECK(report::render_svg(map) == svg);  // deterministic bytes

    SUBCASE("single uniform cell renders without a degenerate scale") {
        report::Heatmap one;
        one.title = "one";
        one.row_values = {800};
        one.col_values = {30};
        one.cells = {2.5};
        const std::string s = report::render_svg(one);
        CHECK(s.find(">2.500<") != std::string::npos);
    }
    SUBCASE("shape mismatch is rejected") {
        map.cells.pop_back();
        CHECK_THROWS_AS(report::render_svg(map), ShapeError);
    }
}

TEST_CASE("write_report renders one file per shape, kind and metric") {
    const std::string dir =
        (std::filesystem::temp_directory_path() /
         ("hexcast_report_" + std::to_string(::getpid())))
            .string();
    std::vector<sweep::SweepRow> rows;
    // Two splits of the same cell average to rmse 3.0.
    rows.push_back(make_row(GridShape::hex, 200, 15, DemandKind::departure,
                            2.0, 0.2, 0.01));
    rows.push_back(make_row(GridShape::hex, 200, 15, DemandKind::departure,
                            4.0, 0.4, 0.03));
    rows.push_back(make_row(GridShape::hex, 500, 30, DemandKind::departure,
                            7.0, 0.7, 0.07));

    const auto files = report::write_report(dir, rows);
    REQUIRE(files.size() == 3);  // only hex departure rows were given
    CHECK(files[0] == dir + "/report_hex_departure_rmse.svg");
    CHECK(files[1] == dir + "/report_hex_departure_mape.svg");
    CHECK(files[2] == dir + "/report_hex_departure_nrmse.svg");
    for (const auto& f : files) {
        std::ifstream in(f);
        REQUIRE(in.good());
        std::string text((std::istreambuf_iterator<char>(in)), {});
        CHECK(text.find("<svg") == 0);
        // The 200m/15min tile exists, the 500m/15min tile is missing.
        CHECK(text.find("url(#missing)") != std::string::npos);
    }
    {
        std::ifstream in(files[0]);
        std::string text((std::istreambuf_iterator<char>(in)), {});
        CHECK(text.find(">3.000<") != std::string::npos);  // split mean
        CHECK(text.find(">7.000<") != std::string::npos);
    }
    std::filesystem::remove_all(dir);

    CHECK_THROWS_AS(report::write_report(dir, {}), DataError);
}
