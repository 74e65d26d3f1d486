#include "hexcast/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace hexcast::report {

namespace {

// Layout constants (pixels).
constexpr int kCellW = 72;
constexpr int kCellH = 44;
constexpr int kLeft = 96;    // room for the y-axis labels
constexpr int kTop = 56;     // room for the title and x-axis labels
constexpr int kRight = 24;
constexpr int kBottom = 40;  // room for the axis title

// Two-colour linear scale, light for low values, dark for high.
constexpr int kLowRgb[3] = {0xF2, 0xF7, 0xFD};
constexpr int kHighRgb[3] = {0x13, 0x50, 0x8C};

std::string colour_at(double t) {
    char buf[8];
    int rgb[3];
    for (int i = 0; i < 3; ++i) {
        const double c = kLowRgb[i] + t * (kHighRgb[i] - kLowRgb[i]);
        rgb[i] = std::clamp(static_cast<int>(std::lround(c)), 0, 255);
    }
    std::snprintf(buf, sizeof(buf), "#%02X%02X%02X", rgb[0], rgb[1], rgb[2]);
    return buf;
}

std::string fmt_value(double v, int precision, bool percent) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f%s", precision,
                  percent ? v * 100.0 : v, percent ? "%" : "");
    return buf;
}

std::string escape_xml(const std::string& s) {
    std::string out;
    for (const char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

std::string render_svg(const Heatmap& map) {
    const int n_rows = static_cast<int>(map.row_values.size());
    const int n_cols = static_cast<int>(map.col_values.size());
    if (n_rows < 1 || n_cols < 1)
        throw ConfigError("report: heatmap needs at least one row and column");
    if (static_cast<int>(map.cells.size()) != n_rows * n_cols)
        throw ShapeError("report: cell count does not match the grid");

    double lo = 0.0, hi = 0.0;
    bool any = false;
    int min_cell = -1;  // strict < keeps the first tie in row-major order
    for (int i = 0; i < n_rows * n_cols; ++i) {
        const double v = map.cells[i];
        if (!std::isfinite(v)) continue;
        if (!any) {
            lo = hi = v;
            min_cell = i;
            any = true;
            continue;
        }
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        if (v < map.cells[min_cell]) min_cell = i;
    }

    const int width = kLeft + n_cols * kCellW + kRight;
    const int height = kTop + n_rows * kCellH + kBottom;

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
        << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " "
        << height << "\">\n";
    svg << "<defs><pattern id=\"missing\" width=\"8\" height=\"8\" "
           "patternUnits=\"userSpaceOnUse\">"
           "<rect width=\"8\" height=\"8\" fill=\"#F4F4F4\"/>"
           "<path d=\"M0 8 L8 0\" stroke=\"#BBBBBB\" stroke-width=\"1\"/>"
           "</pattern></defs>\n";
    svg << "<rect width=\"" << width << "\" height=\"" << height
        << "\" fill=\"#FFFFFF\"/>\n";
    svg << "<text x=\"" << kLeft << "\" y=\"20\" font-family=\"monospace\" "
           "font-size=\"15\" fill=\"#222222\">"
        << escape_xml(map.title) << "</text>\n";

    for (int c = 0; c < n_cols; ++c) {
        const int x = kLeft + c * kCellW + kCellW / 2;
        svg << "<text x=\"" << x << "\" y=\"" << (kTop - 8)
            << "\" font-family=\"monospace\" font-size=\"12\" "
               "text-anchor=\"middle\" fill=\"#222222\">"
            << map.col_values[c] << "</text>\n";
    }
    for (int r = 0; r < n_rows; ++r) {
        const int y = kTop + r * kCellH + kCellH / 2 + 4;
        svg << "<text x=\"" << (kLeft - 8) << "\" y=\"" << y
            << "\" font-family=\"monospace\" font-size=\"12\" "
               "text-anchor=\"end\" fill=\"#222222\">"
            << map.row_values[r] << "</text>\n";
    }

    for (int r = 0; r < n_rows; ++r) {
        for (int c = 0; c < n_cols; ++c) {
            const int i = r * n_cols + c;
            const double v = map.cells[i];
            const int x = kLeft + c * kCellW;
            const int y = kTop + r * kCellH;
            std::string fill = "url(#missing)";
            if (std::isfinite(v)) {
                const double t = hi > lo ? (v - lo) / (hi - lo) : 0.5;
                fill = colour_at(t);
            }
            svg << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\""
                << kCellW << "\" height=\"" << kCellH << "\" fill=\"" << fill
                << "\" stroke=\"#FFFFFF\" stroke-width=\"1\"/>\n";
            if (std::isfinite(v)) {
                const double t = hi > lo ? (v - lo) / (hi - lo) : 0.5;
                const char* text_colour = t > 0.55 ? "#FFFFFF" : "#1A1A1A";
                svg << "<text x=\"" << (x + kCellW / 2) << "\" y=\""
                    << (y + kCellH / 2 + 4)
                    << "\" font-family=\"monospace\" font-size=\"11\" "
                       "text-anchor=\"middle\" fill=\""
                    << text_colour << "\">"
                    << fmt_value(v, map.precision, map.percent) << "</text>\n";
            }
        }
    }

    if (min_cell >= 0) {
        const int r = min_cell / n_cols;
        const int c = min_cell % n_cols;
        svg << "<rect x=\"" << (kLeft + c * kCellW + 1) << "\" y=\""
            << (kTop + r * kCellH + 1) << "\" width=\"" << (kCellW - 2)
            << "\" height=\"" << (kCellH - 2)
            << "\" fill=\"none\" stroke=\"#D62728\" stroke-width=\"3\"/>\n";
    }

    svg << "<text x=\"" << (kLeft + n_cols * kCellW / 2) << "\" y=\""
        << (height - 12)
        << "\" font-family=\"monospace\" font-size=\"12\" "
           "text-anchor=\"middle\" fill=\"#222222\">"
        << escape_xml(map.x_title) << "</text>\n";
    svg << "<text x=\"16\" y=\"" << (kTop + n_rows * kCellH / 2)
        << "\" font-family=\"monospace\" font-size=\"12\" "
           "text-anchor=\"middle\" fill=\"#222222\" transform=\"rotate(-90 16 "
        << (kTop + n_rows * kCellH / 2) << ")\">" << escape_xml(map.y_title)
        << "</text>\n";
    svg << "</svg>\n";
    return svg.str();
}

std::vector<std::string> write_report(
    const std::string& dir, const std::vector<sweep::SweepRow>& rows) {
    if (rows.empty()) throw DataError("report: no result rows");
    std::filesystem::create_directories(dir);

    struct Agg {
        double sum = 0.0;
        int n = 0;
    };
    const char* metric_names[3] = {"rmse", "mape", "nrmse"};

    std::vector<std::string> written;
    for (const GridShape shape : {GridShape::hex, GridShape::square}) {
        std::set<int> spatial_set, interval_set;
        for (const auto& row : rows) {
            if (row.shape != shape) continue;
            spatial_set.insert(row.spatial_m);
            interval_set.insert(row.interval_min);
        }
        if (spatial_set.empty()) continue;
        const std::vector<int> spatial(spatial_set.begin(), spatial_set.end());
        const std::vector<int> intervals(interval_set.begin(),
                                         interval_set.end());

        for (const DemandKind kind :
             {DemandKind::departure, DemandKind::arrival}) {
            bool kind_present = false;
            std::map<std::pair<int, int>, Agg> agg[3];
            for (const auto& row : rows) {
                if (row.shape != shape || row.kind != kind) continue;
                kind_present = true;
                if (row.failed) continue;
                const std::pair<int, int> key{row.spatial_m,
                                              row.interval_min};
                const double values[3] = {row.report.rmse, row.report.mape,
                                          row.report.nrmse};
                for (int m = 0; m < 3; ++m) {
                    if (!std::isfinite(values[m])) continue;
                    agg[m][key].sum += values[m];
                    agg[m][key].n += 1;
                }
            }
            if (!kind_present) continue;

            for (int m = 0; m < 3; ++m) {
                Heatmap map;
                map.title = to_string(shape) + " " + to_string(kind) + " " +
                            metric_names[m];
                map.row_values = spatial;
                map.col_values = intervals;
                map.percent = m == 1;
                map.precision = m == 1 ? 1 : (m == 2 ? 4 : 3);
                map.cells.assign(spatial.size() * intervals.size(),
                                 std::nan(""));
                for (size_t r = 0; r < spatial.size(); ++r) {
                    for (size_t c = 0; c < intervals.size(); ++c) {
                        const auto it =
                            agg[m].find({spatial[r], intervals[c]});
                        if (it != agg[m].end() && it->second.n > 0)
                            map.cells[r * intervals.size() + c] =
                                it->second.sum / it->second.n;
                    }
                }
                const std::string path = dir + "/report_" + to_string(shape) +
                                         "_" + to_string(kind) + "_" +
                                         metric_names[m] + ".svg";
                std::ofstream out(path, std::ios::binary);
                if (!out) throw DataError("report: cannot write " + path);
                out << render_svg(map);
                if (!out) throw DataError("report: write failed for " + path);
                written.push_back(path);
            }
        }
    }
    if (written.empty()) throw DataError("report: no rows to plot");
    return written;
}

}  // namespace hexcast::report
