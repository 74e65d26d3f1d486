#pragma once

#include <string>
#include <vector>

#include "hexcast/sweep.hpp"

namespace hexcast::report {

// One metric over the spatial (rows) x temporal (columns) granularity grid.
// NaN cells are rendered as hatched "no result" tiles.
struct Heatmap {
    std::string title;
    std::string x_title = "interval (min)";
    std::string y_title = "cell size (m)";
    std::vector<int> row_values;  // spatial sizes, one per row
    std::vector<int> col_values;  // interval lengths, one per column
    std::vector<double> cells;    // row-major, rows x cols
    int precision = 3;            // decimals shown inside the tiles
    bool percent = false;         // show value * 100 with a % suffix
};

// Deterministic standalone SVG: linear two-colour scale over the finite
// cells, the minimum tile outlined (ties broken by row then column order).
std::string render_svg(const Heatmap& map);

// Writes one heatmap per (grid shape, demand kind, metric) found in `rows`,
// averaging over models and splits per cell. Returns the written paths
// (report_<shape>_<kind>_<metric>.svg under `dir`).
std::vector<std::string> write_report(const std::string& dir,
                                      const std::vector<sweep::SweepRow>& rows);

}  // namespace hexcast::report
