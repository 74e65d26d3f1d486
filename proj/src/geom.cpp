#include "hexcast/geom.hpp"

#include <algorithm>
#include <cmath>

namespace hexcast {

namespace {

constexpr double kEarthRadiusM = 6371000.0;
constexpr double kPi = 3.14159265358979323846;
const double kSqrt3 = std::sqrt(3.0);

}  // namespace

Projection Projection::at(double ref_lon, double ref_lat) {
    Projection p;
    p.ref_lon = ref_lon;
    p.ref_lat = ref_lat;
    p.meters_per_deg_lat = 2.0 * kPi * kEarthRadiusM / 360.0;
    p.meters_per_deg_lon =
        p.meters_per_deg_lat * std::cos(ref_lat * kPi / 180.0);
    return p;
}

PlanarPoint project(const GeoPoint& p, const Projection& proj) {
    return {(p.lon - proj.ref_lon) * proj.meters_per_deg_lon,
            (p.lat - proj.ref_lat) * proj.meters_per_deg_lat};
}

int hex_distance(AxialCoord a, AxialCoord b) {
    const int dq = a.q - b.q;
    const int dr = a.r - b.r;
    return (std::abs(dq) + std::abs(dr) + std::abs(dq + dr)) / 2;
}

PlanarPoint hex_center(AxialCoord c, const HexGridSpec& spec) {
    return {spec.origin.x + 1.5 * spec.side_m * c.q,
            spec.origin.y + kSqrt3 * spec.side_m * (c.r + 0.5 * c.q)};
}

std::array<PlanarPoint, 6> hex_polygon(AxialCoord c, const HexGridSpec& spec) {
    const PlanarPoint ctr = hex_center(c, spec);
    std::array<PlanarPoint, 6> out;
    for (int k = 0; k < 6; ++k) {
        const double ang = kPi / 3.0 * k;
        out[k] = {ctr.x + spec.side_m * std::cos(ang),
                  ctr.y + spec.side_m * std::sin(ang)};
    }
    return out;
}

namespace {

AxialCoord cube_round(double qf, double rf) {
    const double sf = -qf - rf;
    double q = std::round(qf);
    double r = std::round(rf);
    double s = std::round(sf);
    const double dq = std::abs(q - qf);
    const double dr = std::abs(r - rf);
    const double ds = std::abs(s - sf);
    if (dq > dr && dq > ds) {
        q = -r - s;
    } else if (dr > ds) {
        r = -q - s;
    }
    return {static_cast<int>(q), static_cast<int>(r)};
}

double dist2(PlanarPoint a, PlanarPoint b) {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    return dx * dx + dy * dy;
}

}  // namespace

AxialCoord hex_of(PlanarPoint p, const HexGridSpec& spec) {
    const double x = (p.x - spec.origin.x) / spec.side_m;
    const double y = (p.y - spec.origin.y) / spec.side_m;
    const double qf = x / 1.5;
    const double rf = y / kSqrt3 - qf / 2.0;
    AxialCoord best = cube_round(qf, rf);
    // Rounding in cube space matches Euclidean Voronoi cells except exactly
    // on boundaries; a sweep over the six neighbors settles those and pins
    // ties to the lexicographically smallest (q, r).
    double best_d2 = dist2(p, hex_center(best, spec));
    const double eps = 1e-9 * spec.side_m * spec.side_m;
    for (const AxialCoord& n : hex_neighbors(best)) {
        const double d2 = dist2(p, hex_center(n, spec));
        if (d2 < best_d2 - eps) {
            best = n;
            best_d2 = d2;
        } else if (d2 < best_d2 + eps &&
                   (n.q < best.q || (n.q == best.q && n.r < best.r))) {
            best = n;
            best_d2 = std::min(best_d2, d2);
        }
    }
    return best;
}

SquareCell square_of(PlanarPoint p, const SquareGridSpec& spec) {
    return {static_cast<int>(std::floor((p.y - spec.origin.y) / spec.side_m)),
            static_cast<int>(std::floor((p.x - spec.origin.x) / spec.side_m))};
}

std::array<AxialCoord, 6> hex_neighbors(AxialCoord c) {
    return {{{c.q - 1, c.r + 1},
             {c.q, c.r + 1},
             {c.q + 1, c.r},
             {c.q + 1, c.r - 1},
             {c.q, c.r - 1},
             {c.q - 1, c.r}}};
}

const LocalIndexTable& LocalIndexTable::standard() {
    static const LocalIndexTable table{{{
        {0, 0},                                                      // center
        {-1, 1}, {0, 1}, {1, 0}, {1, -1}, {0, -1}, {-1, 0},          // ring 1
        {-2, 2}, {-1, 2}, {0, 2}, {1, 1}, {2, 0}, {2, -1},           // ring 2
        {2, -2}, {1, -2}, {0, -2}, {-1, -1}, {-2, 0}, {-2, 1},
    }}};
    return table;
}

std::array<AxialCoord, 19> two_ring_index(AxialCoord center,
                                          const LocalIndexTable& table) {
    std::array<AxialCoord, 19> out;
    for (int i = 0; i < 19; ++i) out[i] = center + table.order[i];
    return out;
}

double area_pairing(double hex_side_m) {
    return hex_side_m * std::sqrt(1.5 * kSqrt3);
}

GridIndex hex_extent(const HexGridSpec& spec, PlanarPoint lo, PlanarPoint hi) {
    const double a = spec.side_m;
    const double in_r = kSqrt3 * a / 2.0;
    // Center x = 1.5*a*q; center "offset height" r + ceil_half(q) maps to
    // y = sqrt(3)*a*K for even q and sqrt(3)*a*(K - 1/2) for odd q.
    const double xlo = lo.x - a - spec.origin.x;
    const double xhi = hi.x + a - spec.origin.x;
    const double ylo = lo.y - in_r - spec.origin.y;
    const double yhi = hi.y + in_r - spec.origin.y;
    const int q_min = static_cast<int>(std::ceil(xlo / (1.5 * a)));
    const int q_max = static_cast<int>(std::floor(xhi / (1.5 * a)));
    const int k_min = static_cast<int>(std::ceil(ylo / (kSqrt3 * a)));
    const int k_max = static_cast<int>(std::floor(yhi / (kSqrt3 * a) + 0.5));
    GridIndex idx;
    idx.hex = true;
    idx.q0 = q_min;
    idx.row_k = k_max;
    idx.n_cols = std::max(1, q_max - q_min + 1);
    idx.n_rows = std::max(1, k_max - k_min + 1);
    return idx;
}

GridIndex square_extent(const SquareGridSpec& spec, PlanarPoint lo,
                        PlanarPoint hi) {
    const double s = spec.side_m;
    const int c_min = static_cast<int>(std::floor((lo.x - spec.origin.x) / s));
    const int c_max = static_cast<int>(std::floor((hi.x - spec.origin.x) / s));
    const int r_min = static_cast<int>(std::floor((lo.y - spec.origin.y) / s));
    const int r_max = static_cast<int>(std::floor((hi.y - spec.origin.y) / s));
    GridIndex idx;
    idx.hex = false;
    idx.q0 = c_min;
    idx.row_k = r_max;
    idx.n_cols = std::max(1, c_max - c_min + 1);
    idx.n_rows = std::max(1, r_max - r_min + 1);
    return idx;
}

}  // namespace hexcast
