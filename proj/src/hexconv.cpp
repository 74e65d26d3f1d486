#include "hexcast/hexconv.hpp"

#include <algorithm>

namespace hexcast::hex {

namespace {

constexpr bool kZeroSlot55[5][5] = {
    {true, false, false, false, true},
    {false, false, false, false, false},
    {false, false, false, false, false},
    {false, false, false, false, false},
    {true, true, false, true, true},
};

struct TapOffset {
    int dr;
    int dc;
    int tap;
};

// The 3x1 vertical subkernel applies to every column; the 2x3 diagonal
// subkernel shifts by one row between even and odd columns.
constexpr TapOffset kVertical[3] = {
    {-1, 0, kTapN}, {0, 0, kTapCenter}, {1, 0, kTapS}};
constexpr TapOffset kDiagonalEven[4] = {
    {-1, -1, kTapNW}, {-1, 1, kTapNE}, {0, -1, kTapSW}, {0, 1, kTapSE}};
constexpr TapOffset kDiagonalOdd[4] = {
    {0, -1, kTapNW}, {0, 1, kTapNE}, {1, -1, kTapSW}, {1, 1, kTapSE}};

}  // namespace

bool is_zero_slot_55(int row, int col) { return kZeroSlot55[row][col]; }

const Embedding55& Embedding55::standard() {
    static const Embedding55 e = [] {
        Embedding55 out;
        const auto& table = LocalIndexTable::standard();
        bool used[5][5] = {};
        for (int k = 0; k < 19; ++k) {
            const AxialCoord off = table.order[k];
            const Slot s{2 - off.r - ceil_half(off.q), 2 + off.q};
            out.slot_of[k] = s;
            used[s.row][s.col] = true;
        }
        int z = 0;
        for (int row = 0; row < 5; ++row)
            for (int col = 0; col < 5; ++col)
                if (!used[row][col]) out.zero_slots[z++] = {row, col};
        return out;
    }();
    return e;
}

const Embedding59& Embedding59::standard() {
    static const Embedding59 e = [] {
        Embedding59 out;
        const auto& table = LocalIndexTable::standard();
        for (int k = 0; k < 19; ++k) {
            const AxialCoord off = table.order[k];
            out.slot_of[k] = {2 + off.q, 4 + 2 * off.r + off.q};
        }
        return out;
    }();
    return e;
}

namespace {

nd::Tensor embed_impl(const nd::Tensor& v, const std::array<Slot, 19>& slots,
                      int rows, int cols) {
    if (v.rank() < 1 || v.dim(0) != 19 || v.rank() > 2)
        throw ShapeError("embed: expected {19} or {19,C}");
    const int C = v.rank() == 2 ? v.dim(1) : 1;
    nd::Tensor out(v.rank() == 2 ? nd::Shape{rows, cols, C}
                                 : nd::Shape{rows, cols});
    for (int k = 0; k < 19; ++k) {
        const Slot s = slots[k];
        double* dst = out.data() + (static_cast<int64_t>(s.row) * cols + s.col) * C;
        const double* src = v.data() + static_cast<int64_t>(k) * C;
        std::copy(src, src + C, dst);
    }
    return out;
}

}  // namespace

nd::Tensor embed_5x5(const nd::Tensor& v) {
    return embed_impl(v, Embedding55::standard().slot_of, 5, 5);
}

nd::Tensor embed_5x9(const nd::Tensor& v) {
    return embed_impl(v, Embedding59::standard().slot_of, 5, 9);
}

Slot stencil_offset(int tap, int col_parity) {
    const bool even = col_parity == 0;
    switch (tap) {
        case kTapCenter: return {0, 0};
        case kTapN: return {-1, 0};
        case kTapS: return {1, 0};
        case kTapNW: return {even ? -1 : 0, -1};
        case kTapNE: return {even ? -1 : 0, 1};
        case kTapSW: return {even ? 0 : 1, -1};
        case kTapSE: return {even ? 0 : 1, 1};
        default: throw ShapeError("stencil_offset: bad tap");
    }
}

nd::Tensor hex_conv(nd::Tape& t, const nd::Tensor& x, const nd::Tensor& w,
                    const nd::Tensor& b) {
    if (x.empty() || x.rank() != 4 || x.dim(1) != 5 || x.dim(2) != 5)
        throw ShapeError("hex_conv: input must be {B,5,5,Cin}");
    if (w.empty() || w.rank() != 3 || w.dim(0) != 7)
        throw ShapeError("hex_conv: kernel must be {7,Cin,Cout}");
    const int B = x.dim(0), Ci = x.dim(3), Co = w.dim(2);
    if (w.dim(1) != Ci) throw ShapeError("hex_conv: channel mismatch");
    const bool has_bias = !b.empty();
    if (has_bias && (b.rank() != 1 || b.dim(0) != Co))
        throw ShapeError("hex_conv: bias must have shape {Cout}");

    auto at_x = [&](int bi, int row, int col) {
        return x.data() + ((static_cast<int64_t>(bi) * 5 + row) * 5 + col) * Ci;
    };
    for (int bi = 0; bi < B; ++bi)
        for (int row = 0; row < 5; ++row)
            for (int col = 0; col < 5; ++col) {
                if (!kZeroSlot55[row][col]) continue;
                const double* xi = at_x(bi, row, col);
                for (int ci = 0; ci < Ci; ++ci)
                    if (xi[ci] != 0.0)
                        throw ShapeError(
                            "hex_conv: input is nonzero at a padding slot");
            }

    nd::Tensor out({B, 5, 5, Co});
    auto run_pass = [&](const TapOffset* taps, int n_taps, int parity) {
        for (int bi = 0; bi < B; ++bi)
            for (int row = 0; row < 5; ++row)
                for (int col = 0; col < 5; ++col) {
                    if (parity >= 0 && (col & 1) != parity) continue;
                    double* o = out.data() +
                                ((static_cast<int64_t>(bi) * 5 + row) * 5 +
                                 col) *
                                    Co;
                    for (int k = 0; k < n_taps; ++k) {
                        const int iy = row + taps[k].dr;
                        const int ix = col + taps[k].dc;
                        if (iy < 0 || iy >= 5 || ix < 0 || ix >= 5) continue;
                        const double* xi = at_x(bi, iy, ix);
                        const double* wt =
                            w.data() +
                            static_cast<int64_t>(taps[k].tap) * Ci * Co;
                        for (int ci = 0; ci < Ci; ++ci) {
                            const double xv = xi[ci];
                            const double* wc = wt + static_cast<int64_t>(ci) * Co;
                            for (int co = 0; co < Co; ++co)
                                o[co] += xv * wc[co];
                        }
                    }
                }
    };
    run_pass(kVertical, 3, -1);
    run_pass(kDiagonalEven, 4, 0);
    run_pass(kDiagonalOdd, 4, 1);

    for (int bi = 0; bi < B; ++bi)
        for (int row = 0; row < 5; ++row)
            for (int col = 0; col < 5; ++col) {
                double* o =
                    out.data() +
                    ((static_cast<int64_t>(bi) * 5 + row) * 5 + col) * Co;
                if (kZeroSlot55[row][col]) {
                    std::fill(o, o + Co, 0.0);
                } else if (has_bias) {
                    for (int co = 0; co < Co; ++co) o[co] += b[co];
                }
            }

    auto gx = t.grad_ptr(x.node);
    auto gw = t.grad_ptr(w.node);
    auto gb = has_bias ? t.grad_ptr(b.node) : nullptr;
    if (!gx && !gw && !gb) return out;
    auto gout = std::make_shared<std::vector<double>>(out.size(), 0.0);
    auto xv = x.buffer();
    auto wv = w.buffer();
    out.node = t.push_node(gout, [gout, gx, gw, gb, xv, wv, B, Ci, Co] {
        for (int bi = 0; bi < B; ++bi)
            for (int row = 0; row < 5; ++row)
                for (int col = 0; col < 5; ++col) {
                    if (kZeroSlot55[row][col]) continue;
                    const double* g =
                        gout->data() +
                        ((static_cast<int64_t>(bi) * 5 + row) * 5 + col) * Co;
                    if (gb)
                        for (int co = 0; co < Co; ++co) (*gb)[co] += g[co];
                    auto backprop = [&](const TapOffset* taps, int n_taps) {
                        for (int k = 0; k < n_taps; ++k) {
                            const int iy = row + taps[k].dr;
                            const int ix = col + taps[k].dc;
                            if (iy < 0 || iy >= 5 || ix < 0 || ix >= 5)
                                continue;
                            const int64_t xoff =
                                ((static_cast<int64_t>(bi) * 5 + iy) * 5 +
                                 ix) *
                                Ci;
                            const int64_t woff =
                                static_cast<int64_t>(taps[k].tap) * Ci * Co;
                            for (int ci = 0; ci < Ci; ++ci) {
                                const double* wc = wv->data() + woff + ci * Co;
                                if (gx) {
                                    double s = 0.0;
                                    for (int co = 0; co < Co; ++co)
                                        s += wc[co] * g[co];
                                    (*gx)[xoff + ci] += s;
                                }
                                if (gw) {
                                    const double xval = (*xv)[xoff + ci];
                                    double* gwc = gw->data() + woff + ci * Co;
                                    for (int co = 0; co < Co; ++co)
                                        gwc[co] += xval * g[co];
                                }
                            }
                        }
                    };
                    backprop(kVertical, 3);
                    backprop((col & 1) == 0 ? kDiagonalEven : kDiagonalOdd, 4);
                }
    });
    return out;
}

nd::Tensor mask_5x5(nd::Tape& t, const nd::Tensor& x) {
    if (x.empty() || x.rank() != 4 || x.dim(1) != 5 || x.dim(2) != 5)
        throw ShapeError("mask_5x5: input must be {B,5,5,C}");
    const int B = x.dim(0), C = x.dim(3);
    nd::Tensor out(x.shape(), x.values());
    for (int bi = 0; bi < B; ++bi)
        for (int row = 0; row < 5; ++row)
            for (int col = 0; col < 5; ++col) {
                if (!kZeroSlot55[row][col]) continue;
                double* o =
                    out.data() +
                    ((static_cast<int64_t>(bi) * 5 + row) * 5 + col) * C;
                std::fill(o, o + C, 0.0);
            }
    auto gx = t.grad_ptr(x.node);
    if (!gx) return out;
    auto gout = std::make_shared<std::vector<double>>(out.size(), 0.0);
    out.node = t.push_node(gout, [gout, gx, B, C] {
        for (int bi = 0; bi < B; ++bi)
            for (int row = 0; row < 5; ++row)
                for (int col = 0; col < 5; ++col) {
                    if (kZeroSlot55[row][col]) continue;
                    const int64_t off =
                        ((static_cast<int64_t>(bi) * 5 + row) * 5 + col) * C;
                    for (int c = 0; c < C; ++c)
                        (*gx)[off + c] += (*gout)[off + c];
                }
    });
    return out;
}

bool adjacency_consistent(const Embedding55& e, const LocalIndexTable& table) {
    const auto dirs = hex_neighbors({0, 0});
    // Every hex-adjacent pair inside the patch must be linked by the
    // stencil tap of the matching direction...
    for (int j = 0; j < 19; ++j) {
        for (int k = 0; k < 19; ++k) {
            if (j == k) continue;
            const AxialCoord d{table.order[k].q - table.order[j].q,
                               table.order[k].r - table.order[j].r};
            int tap = -1;
            for (int i = 0; i < 6; ++i)
                if (dirs[i] == d) tap = i + 1;
            if (tap < 0) continue;
            const Slot from = e.slot_of[j];
            const Slot off = stencil_offset(tap, from.col & 1);
            const Slot read{from.row + off.row, from.col + off.col};
            if (read != e.slot_of[k]) return false;
        }
    }
    // ...and no tap may read a used slot that is not the matching neighbor.
    for (int j = 0; j < 19; ++j) {
        const Slot from = e.slot_of[j];
        for (int tap = 1; tap <= 6; ++tap) {
            const Slot off = stencil_offset(tap, from.col & 1);
            const Slot read{from.row + off.row, from.col + off.col};
            if (read.row < 0 || read.row >= 5 || read.col < 0 ||
                read.col >= 5)
                continue;
            const AxialCoord want = table.order[j] + hex_neighbors({0, 0})[tap - 1];
            for (int m = 0; m < 19; ++m) {
                if (e.slot_of[m] == read && !(table.order[m] == want))
                    return false;
            }
        }
    }
    return true;
}

}  // namespace hexcast::hex
