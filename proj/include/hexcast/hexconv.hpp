#pragma once

#include <array>

#include "hexcast/geom.hpp"
#include "hexcast/tensor.hpp"

namespace hexcast::hex {

struct Slot {
    int row = 0;
    int col = 0;

    friend bool operator==(const Slot&, const Slot&) = default;
};

// Placement of the 19 two-ring local indices into a 5x5 matrix. Slot
// (row, col) holds the cell at axial offset (col-2, 2-row-ceil_half(col-2))
// from the patch center; the six unused slots are padding and stay zero.
struct Embedding55 {
    std::array<Slot, 19> slot_of;  // local index k in 1..19 -> slot_of[k-1]
    std::array<Slot, 6> zero_slots;

    static const Embedding55& standard();
};

bool is_zero_slot_55(int row, int col);

// Doubled-coordinate placement into a 5x9 matrix: local offset (q, r) from
// the center lands at (2+q, 4+2r+q), so ring-1 neighbors sit at offsets
// (+-1,+-1) and (0,+-2). Used columns alternate parity per row.
struct Embedding59 {
    std::array<Slot, 19> slot_of;

    static const Embedding59& standard();
};

// v {19} -> {5,5}; v {19,C} -> {5,5,C}. Padding slots hold zero.
nd::Tensor embed_5x5(const nd::Tensor& v);

// v {19} -> {5,9}; v {19,C} -> {5,9,C}.
nd::Tensor embed_5x9(const nd::Tensor& v);

// Hexagonal convolution taps: the center plus the six neighbors in
// hex_neighbors order. Kernel tensors have shape {7, Cin, Cout}.
enum HexTap {
    kTapCenter = 0,
    kTapNW = 1,
    kTapN = 2,
    kTapNE = 3,
    kTapSE = 4,
    kTapS = 5,
    kTapSW = 6,
};

// Offset (drow, dcol) read by a tap at a column of the given parity
// (parity of the axial q, equal to col % 2 in the 5x5 embedding).
Slot stencil_offset(int tap, int col_parity);

// Hexagonal convolution over a batch of embedded maps. x {B,5,5,Cin} with
// zeros at all padding slots, w {7,Cin,Cout}, b {Cout} or empty ->
// {B,5,5,Cout}, padding slots re-zeroed. Implemented as three rectangular
// subkernel passes (a 3x1 vertical pass plus one 2x3 diagonal pass per
// column parity) followed by the mask.
nd::Tensor hex_conv(nd::Tape& t, const nd::Tensor& x, const nd::Tensor& w,
                    const nd::Tensor& b);

// Zeroes the six padding slots of x {B,5,5,C}; used after operations that
// break the embedding contract (e.g. batch normalization).
nd::Tensor mask_5x5(nd::Tape& t, const nd::Tensor& x);

// Exhaustive check that for every hex-adjacent pair of local indices the
// convolution stencil connects their slots.
bool adjacency_consistent(const Embedding55& e, const LocalIndexTable& table);

}  // namespace hexcast::hex
