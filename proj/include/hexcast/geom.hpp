#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "hexcast/common.hpp"

namespace hexcast {

struct GeoPoint {
    double lon = 0.0;  // degrees east
    double lat = 0.0;  // degrees north
};

struct PlanarPoint {
    double x = 0.0;  // meters east of reference
    double y = 0.0;  // meters north of reference
};

// Local equirectangular projection anchored at a reference point.
// Adequate at city scale; distortion stays below 0.1% over ~30 km.
struct Projection {
    double ref_lon = 0.0;
    double ref_lat = 0.0;
    double meters_per_deg_lat = 0.0;
    double meters_per_deg_lon = 0.0;

    static Projection at(double ref_lon, double ref_lat);
};

PlanarPoint project(const GeoPoint& p, const Projection& proj);

// Axial addressing of a flat-top hexagonal grid. The q axis runs east
// (one column per q); r runs north along a column. Planar center of a
// cell: x = 1.5*side*q, y = sqrt(3)*side*(r + q/2).
struct AxialCoord {
    int q = 0;
    int r = 0;

    friend bool operator==(const AxialCoord&, const AxialCoord&) = default;
    friend AxialCoord operator+(AxialCoord a, AxialCoord b) {
        return {a.q + b.q, a.r + b.r};
    }
};

int hex_distance(AxialCoord a, AxialCoord b);

struct HexGridSpec {
    double side_m = 0.0;
    PlanarPoint origin;  // center of cell (0,0)
    int n_cols = 0;
    int n_rows = 0;
};

struct SquareGridSpec {
    double side_m = 0.0;
    PlanarPoint origin;  // lower-left corner of cell (0,0)
    int n_cols = 0;
    int n_rows = 0;
};

PlanarPoint hex_center(AxialCoord c, const HexGridSpec& spec);

// The six corners of a flat-top hexagon, counter-clockwise from due east.
std::array<PlanarPoint, 6> hex_polygon(AxialCoord c, const HexGridSpec& spec);

// Nearest hexagon center; boundary ties broken by lexicographic (q, r).
AxialCoord hex_of(PlanarPoint p, const HexGridSpec& spec);

struct SquareCell {
    int row = 0;
    int col = 0;

    friend bool operator==(const SquareCell&, const SquareCell&) = default;
};

// Floor-division binning; a point on a cell boundary belongs to the
// higher-index cell.
SquareCell square_of(PlanarPoint p, const SquareGridSpec& spec);

// Neighbor order is clockwise starting north-west:
//   NW (-1,+1), N (0,+1), NE (+1,0), SE (+1,-1), S (0,-1), SW (-1,0)
// matching the ring-1 numbering of the two-ring local index table.
std::array<AxialCoord, 6> hex_neighbors(AxialCoord c);

// Positions 1..19 of the two-ring neighborhood: 1 = center, 2..7 = first
// ring (clockwise from NW), 8..19 = second ring (clockwise from (-2,+2)).
struct LocalIndexTable {
    std::array<AxialCoord, 19> order;

    static const LocalIndexTable& standard();
};

std::array<AxialCoord, 19> two_ring_index(AxialCoord center,
                                          const LocalIndexTable& table);

// Side of the square whose area equals a hexagon of the given side.
double area_pairing(double hex_side_m);

// ceil(q/2) for signed q; the column stagger of the flat-top layout.
inline int ceil_half(int q) { return q >= 0 ? (q + 1) / 2 : q / 2; }

// Rectangular extent of grid cells in offset space, enumerating a flat
// cell index. For hex grids, column c holds axial q = q0 + c and offset
// row w holds axial r = row_k - w - ceil_half(q), so row 0 is the
// northernmost row. For square grids (q, r) are plain (col, row) indices.
struct GridIndex {
    int q0 = 0;
    int row_k = 0;
    int n_cols = 0;
    int n_rows = 0;
    bool hex = true;

    int n_cells() const { return n_cols * n_rows; }

    AxialCoord cell_at(int flat) const {
        const int c = flat % n_cols;
        const int w = flat / n_cols;
        const int q = q0 + c;
        if (hex) return {q, row_k - w - ceil_half(q)};
        return {q, row_k - w};
    }

    // Flat index of an axial coordinate, or -1 when outside the extent.
    int index_of(AxialCoord a) const {
        const int c = a.q - q0;
        if (c < 0 || c >= n_cols) return -1;
        const int w = hex ? row_k - a.r - ceil_half(a.q) : row_k - a.r;
        if (w < 0 || w >= n_rows) return -1;
        return w * n_cols + c;
    }
};

// Extent covering every hex cell whose center lies in the bbox dilated by
// one circumradius horizontally and one inradius vertically, so cells
// partially outside the bbox are kept.
GridIndex hex_extent(const HexGridSpec& spec, PlanarPoint lo, PlanarPoint hi);

GridIndex square_extent(const SquareGridSpec& spec, PlanarPoint lo,
                        PlanarPoint hi);

}  // namespace hexcast
