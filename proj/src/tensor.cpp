#include "hexcast/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace hexcast::nd {

int64_t numel(const Shape& s) {
    int64_t n = 1;
    for (int d : s) n *= d;
    return n;
}

Tensor::Tensor(Shape shape)
    : shape_(std::move(shape)),
      data_(std::make_shared<std::vector<double>>(numel(shape_), 0.0)) {
    for (int d : shape_)
        if (d <= 0) throw ShapeError("tensor extents must be positive");
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)),
      data_(std::make_shared<std::vector<double>>(std::move(values))) {
    if (static_cast<int64_t>(data_->size()) != numel(shape_))
        throw ShapeError("tensor value count does not match shape");
}

Tensor Tensor::full(Shape shape, double v) {
    Tensor t(std::move(shape));
    std::fill(t.data_->begin(), t.data_->end(), v);
    return t;
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

Tensor Tensor::uniform(Shape shape, double lo, double hi, Rng& rng) {
    Tensor t(std::move(shape));
    std::uniform_real_distribution<double> dist(lo, hi);
    for (double& v : *t.data_) v = dist(rng);
    return t;
}

int64_t Tensor::size() const { return data_ ? numel(shape_) : 0; }

Tensor Tensor::clone() const {
    if (!data_) return Tensor();
    return Tensor(shape_, *data_);
}

Tensor Tape::leaf(const Tensor& value) {
    if (value.empty()) throw ShapeError("cannot watch an empty tensor");
    Tensor out = value;  // shares the buffer
    out.node = push_node(
        std::make_shared<std::vector<double>>(value.size(), 0.0), nullptr);
    return out;
}

int Tape::push_node(GradPtr grad, std::function<void()> bwd) {
    nodes_.push_back({std::move(grad), std::move(bwd)});
    return static_cast<int>(nodes_.size()) - 1;
}

Tape::GradPtr Tape::grad_ptr(int node) const {
    if (node < 0 || node >= static_cast<int>(nodes_.size())) return nullptr;
    return nodes_[node].grad;
}

const std::vector<double>& Tape::grad(const Tensor& t) const {
    auto g = grad_ptr(t.node);
    if (!g) throw ShapeError("tensor is not on this tape");
    return *g;
}

void Tape::backward(const Tensor& loss) {
    if (loss.node < 0) throw ShapeError("backward: loss is not on the tape");
    if (loss.size() != 1) throw ShapeError("backward: loss must be scalar");
    (*nodes_[loss.node].grad)[0] = 1.0;
    for (int i = loss.node; i >= 0; --i)
        if (nodes_[i].backward) nodes_[i].backward();
}

namespace {

using GradPtr = Tape::GradPtr;
using Buf = std::shared_ptr<std::vector<double>>;

GradPtr fresh_grad(int64_t n) {
    return std::make_shared<std::vector<double>>(n, 0.0);
}

void check_same(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": operand shapes differ");
}

void check_nonempty(const Tensor& a, const char* op) {
    if (a.empty()) throw ShapeError(std::string(op) + ": empty operand");
}

}  // namespace

Tensor add(Tape& t, const Tensor& a, const Tensor& b) {
    check_nonempty(a, "add");
    check_same(a, b, "add");
    const int64_t n = a.size();
    Tensor out(a.shape());
    for (int64_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
    auto ga = t.grad_ptr(a.node);
    auto gb = t.grad_ptr(b.node);
    if (!ga && !gb) return out;
    auto gout = fresh_grad(n);
    out.node = t.push_node(gout, [gout, ga, gb, n] {
        if (ga)
            for (int64_t i = 0; i < n; ++i) (*ga)[i] += (*gout)[i];
        if (gb)
            for (int64_t i = 0; i < n; ++i) (*gb)[i] += (*gout)[i];
    });
    return out;
}

Tensor sub(Tape& t, const Tensor& a, const Tensor& b) {
    check_nonempty(a, "sub");
    check_same(a, b, "sub");
    const int64_t n = a.size();
    Tensor out(a.shape());
    for (int64_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
    auto ga = t.grad_ptr(a.node);
    auto gb = t.grad_ptr(b.node);
    if (!ga && !gb) return out;
    auto gout = fresh_grad(n);
    out.node = t.push_node(gout, [gout, ga, gb, n] {
        if (ga)
            for (int64_t i = 0; i < n; ++i) (*ga)[i] += (*gout)[i];
        if (gb)
            for (int64_t i = 0; i < n; ++i) (*gb)[i] -= (*gout)[i];
    });
    return out;
}

Tensor mul(Tape& t, const Tensor& a, const Tensor& b) {
    check_nonempty(a, "mul");
    check_same(a, b, "mul");
    const int64_t n = a.size();
    Tensor out(a.shape());
    for (int64_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
    auto ga = t.grad_ptr(a.node);
    auto gb = t.grad_ptr(b.node);
    if (!ga && !gb) return out;
    auto gout = fresh_grad(n);
    Buf av = a.buffer();
    Buf bv = b.buffer();
    out.node = t.push_node(gout, [gout, ga, gb, av, bv, n] {
        if (ga)
            for (int64_t i = 0; i < n; ++i) (*ga)[i] += (*gout)[i] * (*bv)[i];
        if (gb)
            for (int64_t i = 0; i < n; ++i) (*gb)[i] += (*gout)[i] * (*av)[i];
    });
    return out;
}

Tensor scale(Tape& t, const Tensor& a, double c) {
    check_nonempty(a, "scale");
    const int64_t n = a.size();
    Tensor out(a.shape());
    for (int64_t i = 0; i < n; ++i) out[i] = a[i] * c;
    auto ga = t.grad_ptr(a.node);
    if (!ga) return out;
    auto gout = fresh_grad(n);
    out.node = t.push_node(gout, [gout, ga, c, n] {
        for (int64_t i = 0; i < n; ++i) (*ga)[i] += (*gout)[i] * c;
    });
    return out;
}

namespace {

template <class Fwd, class Dy>
Tensor unary_from_output(Tape& t, const Tensor& x, Fwd fwd, Dy dy_of_y,
                         const char* name) {
    check_nonempty(x, name);
    const int64_t n = x.size();
    Tensor out(x.shape());
    for (int64_t i = 0; i < n; ++i) out[i] = fwd(x[i]);
    auto gx = t.grad_ptr(x.node);
    if (!gx) return out;
    auto gout = fresh_grad(n);
    Buf y = out.buffer();
    out.node = t.push_node(gout, [gout, gx, y, dy_of_y, n] {
        for (int64_t i = 0; i < n; ++i)
            (*gx)[i] += (*gout)[i] * dy_of_y((*y)[i]);
    });
    return out;
}

template <class Fwd, class Dx>
Tensor unary_from_input(Tape& t, const Tensor& x, Fwd fwd, Dx dy_of_x,
                        const char* name) {
    check_nonempty(x, name);
    const int64_t n = x.size();
    Tensor out(x.shape());
    for (int64_t i = 0; i < n; ++i) out[i] = fwd(x[i]);
    auto gx = t.grad_ptr(x.node);
    if (!gx) return out;
    auto gout = fresh_grad(n);
    Buf xv = x.buffer();
    out.node = t.push_node(gout, [gout, gx, xv, dy_of_x, n] {
        for (int64_t i = 0; i < n; ++i)
            (*gx)[i] += (*gout)[i] * dy_of_x((*xv)[i]);
    });
    return out;
}

}  // namespace

Tensor sigmoid(Tape& t, const Tensor& x) {
    return unary_from_output(
        t, x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
        [](double y) { return y * (1.0 - y); }, "sigmoid");
}

Tensor tanh(Tape& t, const Tensor& x) {
    return unary_from_output(
        t, x, [](double v) { return std::tanh(v); },
        [](double y) { return 1.0 - y * y; }, "tanh");
}

Tensor relu(Tape& t, const Tensor& x) {
    return unary_from_input(
        t, x, [](double v) { return v > 0.0 ? v : 0.0; },
        [](double v) { return v > 0.0 ? 1.0 : 0.0; }, "relu");
}

Tensor abs(Tape& t, const Tensor& x) {
    return unary_from_input(
        t, x, [](double v) { return std::abs(v); },
        [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); },
        "abs");
}

Tensor sqrt(Tape& t, const Tensor& x) {
    return unary_from_output(
        t, x, [](double v) { return std::sqrt(v); },
        [](double y) { return 0.5 / y; }, "sqrt");
}

Tensor sum(Tape& t, const Tensor& x) {
    check_nonempty(x, "sum");
    const int64_t n = x.size();
    double acc = 0.0;
    for (int64_t i = 0; i < n; ++i) acc += x[i];
    Tensor out = Tensor::scalar(acc);
    auto gx = t.grad_ptr(x.node);
    if (!gx) return out;
    auto gout = fresh_grad(1);
    out.node = t.push_node(gout, [gout, gx, n] {
        const double g = (*gout)[0];
        for (int64_t i = 0; i < n; ++i) (*gx)[i] += g;
    });
    return out;
}

Tensor linear(Tape& t, const Tensor& x, const Tensor& w, const Tensor& b) {
    check_nonempty(x, "linear");
    check_nonempty(w, "linear");
    if (x.rank() != 2 || w.rank() != 2 || x.dim(1) != w.dim(0))
        throw ShapeError("linear: expected x {B,n} and w {n,m}");
    const int B = x.dim(0), n = x.dim(1), m = w.dim(1);
    const bool has_bias = !b.empty();
    if (has_bias && (b.rank() != 1 || b.dim(0) != m))
        throw ShapeError("linear: bias must have shape {m}");
    Tensor out({B, m});
    for (int i = 0; i < B; ++i) {
        double* o = out.data() + static_cast<int64_t>(i) * m;
        if (has_bias)
            for (int j = 0; j < m; ++j) o[j] = b[j];
        const double* xi = x.data() + static_cast<int64_t>(i) * n;
        for (int k = 0; k < n; ++k) {
            const double xv = xi[k];
            const double* wk = w.data() + static_cast<int64_t>(k) * m;
            for (int j = 0; j < m; ++j) o[j] += xv * wk[j];
        }
    }
    auto gx = t.grad_ptr(x.node);
    auto gw = t.grad_ptr(w.node);
    auto gb = has_bias ? t.grad_ptr(b.node) : nullptr;
    if (!gx && !gw && !gb) return out;
    auto gout = fresh_grad(out.size());
    Buf xv = x.buffer();
    Buf wv = w.buffer();
    out.node = t.push_node(gout, [gout, gx, gw, gb, xv, wv, B, n, m] {
        for (int i = 0; i < B; ++i) {
            const double* g = gout->data() + static_cast<int64_t>(i) * m;
            const double* xi = xv->data() + static_cast<int64_t>(i) * n;
            if (gb)
                for (int j = 0; j < m; ++j) (*gb)[j] += g[j];
            for (int k = 0; k < n; ++k) {
                const double* wk = wv->data() + static_cast<int64_t>(k) * m;
                if (gx) {
                    double s = 0.0;
                    for (int j = 0; j < m; ++j) s += g[j] * wk[j];
                    (*gx)[static_cast<int64_t>(i) * n + k] += s;
                }
                if (gw) {
                    double* gwk = gw->data() + static_cast<int64_t>(k) * m;
                    const double xval = xi[k];
                    for (int j = 0; j < m; ++j) gwk[j] += xval * g[j];
                }
            }
        }
    });
    return out;
}

Tensor conv2d(Tape& t, const Tensor& x, const Tensor& w, const Tensor& b) {
    check_nonempty(x, "conv2d");
    check_nonempty(w, "conv2d");
    if (x.rank() != 4) throw ShapeError("conv2d: input must be {B,H,W,C}");
    if (w.rank() != 4 || w.dim(0) != w.dim(1))
        throw ShapeError("conv2d: kernel must be {k,k,Cin,Cout}");
    const int k = w.dim(0);
    if (k % 2 == 0) throw ConfigError("conv2d: kernel size must be odd");
    const int B = x.dim(0), H = x.dim(1), W = x.dim(2), Ci = x.dim(3);
    const int Co = w.dim(3);
    if (w.dim(2) != Ci) throw ShapeError("conv2d: channel mismatch");
    const bool has_bias = !b.empty();
    if (has_bias && (b.rank() != 1 || b.dim(0) != Co))
        throw ShapeError("conv2d: bias must have shape {Cout}");
    const int P = (k - 1) / 2;

    Tensor out({B, H, W, Co});
    for (int bi = 0; bi < B; ++bi)
        for (int y = 0; y < H; ++y)
            for (int xo = 0; xo < W; ++xo) {
                double* o =
                    out.data() +
                    ((static_cast<int64_t>(bi) * H + y) * W + xo) * Co;
                if (has_bias)
                    for (int co = 0; co < Co; ++co) o[co] = b[co];
                for (int dy = 0; dy < k; ++dy) {
                    const int iy = y + dy - P;
                    if (iy < 0 || iy >= H) continue;
                    for (int dx = 0; dx < k; ++dx) {
                        const int ix = xo + dx - P;
                        if (ix < 0 || ix >= W) continue;
                        const double* xi =
                            x.data() +
                            ((static_cast<int64_t>(bi) * H + iy) * W + ix) *
                                Ci;
                        const double* wk =
                            w.data() +
                            (static_cast<int64_t>(dy) * k + dx) * Ci * Co;
                        for (int ci = 0; ci < Ci; ++ci) {
                            const double xval = xi[ci];
                            const double* wc = wk + static_cast<int64_t>(ci) * Co;
                            for (int co = 0; co < Co; ++co)
                                o[co] += xval * wc[co];
                        }
                    }
                }
            }

    auto gx = t.grad_ptr(x.node);
    auto gw = t.grad_ptr(w.node);
    auto gb = has_bias ? t.grad_ptr(b.node) : nullptr;
    if (!gx && !gw && !gb) return out;
    auto gout = fresh_grad(out.size());
    Buf xv = x.buffer();
    Buf wv = w.buffer();
    out.node =
        t.push_node(gout, [gout, gx, gw, gb, xv, wv, B, H, W, Ci, Co, k, P] {
            for (int bi = 0; bi < B; ++bi)
                for (int y = 0; y < H; ++y)
                    for (int xo = 0; xo < W; ++xo) {
                        const double* g =
                            gout->data() +
                            ((static_cast<int64_t>(bi) * H + y) * W + xo) * Co;
                        if (gb)
                            for (int co = 0; co < Co; ++co)
                                (*gb)[co] += g[co];
                        for (int dy = 0; dy < k; ++dy) {
                            const int iy = y + dy - P;
                            if (iy < 0 || iy >= H) continue;
                            for (int dx = 0; dx < k; ++dx) {
                                const int ix = xo + dx - P;
                                if (ix < 0 || ix >= W) continue;
                                const int64_t xoff =
                                    ((static_cast<int64_t>(bi) * H + iy) * W +
                                     ix) *
                                    Ci;
                                const int64_t woff =
                                    (static_cast<int64_t>(dy) * k + dx) * Ci *
                                    Co;
                                for (int ci = 0; ci < Ci; ++ci) {
                                    const double* wc =
                                        wv->data() + woff + ci * Co;
                                    if (gx) {
                                        double s = 0.0;
                                        for (int co = 0; co < Co; ++co)
                                            s += wc[co] * g[co];
                                        (*gx)[xoff + ci] += s;
                                    }
                                    if (gw) {
                                        const double xval =
                                            (*xv)[xoff + ci];
                                        double* gwc =
                                            gw->data() + woff + ci * Co;
                                        for (int co = 0; co < Co; ++co)
                                            gwc[co] += xval * g[co];
                                    }
                                }
                            }
                        }
                    }
        });
    return out;
}

Tensor concat(Tape& t, const Tensor& a, const Tensor& b) {
    check_nonempty(a, "concat");
    check_nonempty(b, "concat");
    if (a.rank() != b.rank() || a.rank() < 1)
        throw ShapeError("concat: rank mismatch");
    for (int i = 0; i + 1 < a.rank(); ++i)
        if (a.dim(i) != b.dim(i))
            throw ShapeError("concat: leading dimensions differ");
    const int ca = a.dim(a.rank() - 1);
    const int cb = b.dim(b.rank() - 1);
    Shape out_shape = a.shape();
    out_shape.back() = ca + cb;
    const int64_t lead = a.size() / ca;
    Tensor out(out_shape);
    for (int64_t i = 0; i < lead; ++i) {
        double* o = out.data() + i * (ca + cb);
        const double* pa = a.data() + i * ca;
        const double* pb = b.data() + i * cb;
        std::copy(pa, pa + ca, o);
        std::copy(pb, pb + cb, o + ca);
    }
    auto ga = t.grad_ptr(a.node);
    auto gb = t.grad_ptr(b.node);
    if (!ga && !gb) return out;
    auto gout = fresh_grad(out.size());
    out.node = t.push_node(gout, [gout, ga, gb, lead, ca, cb] {
        for (int64_t i = 0; i < lead; ++i) {
            const double* g = gout->data() + i * (ca + cb);
            if (ga)
                for (int j = 0; j < ca; ++j) (*ga)[i * ca + j] += g[j];
            if (gb)
                for (int j = 0; j < cb; ++j) (*gb)[i * cb + j] += g[ca + j];
        }
    });
    return out;
}

Tensor concat_rows(Tape& t, const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeError("concat_rows: no inputs");
    const Shape& first = parts.front().shape();
    int rows = 0;
    for (const Tensor& p : parts) {
        check_nonempty(p, "concat_rows");
        if (p.rank() != static_cast<int>(first.size()))
            throw ShapeError("concat_rows: rank mismatch");
        for (int i = 1; i < p.rank(); ++i)
            if (p.dim(i) != first[static_cast<size_t>(i)])
                throw ShapeError("concat_rows: trailing dimensions differ");
        rows += p.dim(0);
    }
    Shape out_shape = first;
    out_shape[0] = rows;
    Tensor out(out_shape);
    std::vector<int64_t> offsets;
    std::vector<GradPtr> grads;
    bool any_grad = false;
    int64_t at = 0;
    for (const Tensor& p : parts) {
        std::copy(p.data(), p.data() + p.size(), out.data() + at);
        offsets.push_back(at);
        at += p.size();
        GradPtr g = t.grad_ptr(p.node);
        if (g) any_grad = true;
        grads.push_back(std::move(g));
    }
    if (!any_grad) return out;
    auto gout = fresh_grad(out.size());
    out.node = t.push_node(gout, [gout, grads, offsets] {
        for (size_t i = 0; i < grads.size(); ++i) {
            if (!grads[i]) continue;
            const double* g = gout->data() + offsets[i];
            for (size_t j = 0; j < grads[i]->size(); ++j) (*grads[i])[j] += g[j];
        }
    });
    return out;
}

Tensor slice_rows(Tape& t, const Tensor& x, int start, int len) {
    check_nonempty(x, "slice_rows");
    if (x.rank() < 1) throw ShapeError("slice_rows: scalar input");
    if (start < 0 || len <= 0 || start + len > x.dim(0))
        throw ShapeError("slice_rows: range out of bounds");
    const int64_t stride = x.size() / x.dim(0);
    Shape out_shape = x.shape();
    out_shape[0] = len;
    Tensor out(out_shape);
    const int64_t begin = start * stride;
    std::copy(x.data() + begin, x.data() + begin + out.size(), out.data());
    auto gx = t.grad_ptr(x.node);
    if (!gx) return out;
    auto gout = fresh_grad(out.size());
    const int64_t n = out.size();
    out.node = t.push_node(gout, [gout, gx, begin, n] {
        for (int64_t j = 0; j < n; ++j) (*gx)[begin + j] += (*gout)[j];
    });
    return out;
}

Tensor take_cell(Tape& t, const Tensor& x, int row, int col) {
    check_nonempty(x, "take_cell");
    if (x.rank() != 4) throw ShapeError("take_cell: input must be {B,H,W,C}");
    const int B = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
    if (row < 0 || row >= H || col < 0 || col >= W)
        throw ShapeError("take_cell: position out of range");
    Tensor out({B, C});
    for (int bi = 0; bi < B; ++bi) {
        const double* src =
            x.data() + ((static_cast<int64_t>(bi) * H + row) * W + col) * C;
        std::copy(src, src + C, out.data() + static_cast<int64_t>(bi) * C);
    }
    auto gx = t.grad_ptr(x.node);
    if (!gx) return out;
    auto gout = fresh_grad(out.size());
    out.node = t.push_node(gout, [gout, gx, B, H, W, C, row, col] {
        for (int bi = 0; bi < B; ++bi) {
            const double* g = gout->data() + static_cast<int64_t>(bi) * C;
            double* dst =
                gx->data() + ((static_cast<int64_t>(bi) * H + row) * W + col) * C;
            for (int c = 0; c < C; ++c) dst[c] += g[c];
        }
    });
    return out;
}

Tensor reshape(Tape& t, const Tensor& x, Shape shape) {
    check_nonempty(x, "reshape");
    if (numel(shape) != x.size())
        throw ShapeError("reshape: element count must be preserved");
    Tensor out(std::move(shape), x.values());
    auto gx = t.grad_ptr(x.node);
    if (!gx) return out;
    const int64_t n = x.size();
    auto gout = fresh_grad(n);
    out.node = t.push_node(gout, [gout, gx, n] {
        for (int64_t i = 0; i < n; ++i) (*gx)[i] += (*gout)[i];
    });
    return out;
}

Tensor batch_norm(Tape& t, const Tensor& x, const Tensor& gamma,
                  const Tensor& beta, BatchNormState& state, bool training,
                  double momentum, double eps) {
    check_nonempty(x, "batch_norm");
    if (x.rank() < 2) throw ShapeError("batch_norm: input must be {..,C}");
    const int C = x.dim(x.rank() - 1);
    const int64_t N = x.size() / C;
    if (gamma.rank() != 1 || gamma.dim(0) != C || beta.rank() != 1 ||
        beta.dim(0) != C)
        throw ShapeError("batch_norm: gamma/beta must have shape {C}");
    if (state.running_mean.empty()) state = BatchNormState(C);
    if (static_cast<int>(state.running_mean.size()) != C)
        throw ShapeError("batch_norm: state channel mismatch");
    if (training && N < 2)
        throw ConfigError("batch_norm: training needs at least 2 rows");

    std::vector<double> mean(C, 0.0), var(C, 0.0);
    if (training) {
        for (int64_t i = 0; i < N; ++i) {
            const double* row = x.data() + i * C;
            for (int c = 0; c < C; ++c) mean[c] += row[c];
        }
        for (int c = 0; c < C; ++c) mean[c] /= static_cast<double>(N);
        for (int64_t i = 0; i < N; ++i) {
            const double* row = x.data() + i * C;
            for (int c = 0; c < C; ++c) {
                const double d = row[c] - mean[c];
                var[c] += d * d;
            }
        }
        for (int c = 0; c < C; ++c) var[c] /= static_cast<double>(N);
        for (int c = 0; c < C; ++c) {
            state.running_mean[c] =
                momentum * state.running_mean[c] + (1.0 - momentum) * mean[c];
            state.running_var[c] =
                momentum * state.running_var[c] + (1.0 - momentum) * var[c];
        }
    } else {
        mean = state.running_mean;
        var = state.running_var;
    }

    std::vector<double> inv_std(C);
    for (int c = 0; c < C; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] + eps);

    auto xhat = std::make_shared<std::vector<double>>(x.size());
    Tensor out(x.shape());
    for (int64_t i = 0; i < N; ++i) {
        const double* row = x.data() + i * C;
        double* h = xhat->data() + i * C;
        double* o = out.data() + i * C;
        for (int c = 0; c < C; ++c) {
            h[c] = (row[c] - mean[c]) * inv_std[c];
            o[c] = gamma[c] * h[c] + beta[c];
        }
    }

    auto gx = t.grad_ptr(x.node);
    auto gg = t.grad_ptr(gamma.node);
    auto gb = t.grad_ptr(beta.node);
    if (!gx && !gg && !gb) return out;
    auto gout = fresh_grad(x.size());
    Buf gv = gamma.buffer();
    auto istd = std::make_shared<std::vector<double>>(std::move(inv_std));
    out.node = t.push_node(
        gout, [gout, gx, gg, gb, gv, xhat, istd, N, C, training] {
            // Per channel: dgamma = sum(g*xhat), dbeta = sum(g).
            std::vector<double> sum_g(C, 0.0), sum_gh(C, 0.0);
            for (int64_t i = 0; i < N; ++i) {
                const double* g = gout->data() + i * C;
                const double* h = xhat->data() + i * C;
                for (int c = 0; c < C; ++c) {
                    sum_g[c] += g[c];
                    sum_gh[c] += g[c] * h[c];
                }
            }
            if (gg)
                for (int c = 0; c < C; ++c) (*gg)[c] += sum_gh[c];
            if (gb)
                for (int c = 0; c < C; ++c) (*gb)[c] += sum_g[c];
            if (!gx) return;
            if (training) {
                // dx via the batch-statistics chain rule.
                const double n = static_cast<double>(N);
                for (int64_t i = 0; i < N; ++i) {
                    const double* g = gout->data() + i * C;
                    const double* h = xhat->data() + i * C;
                    double* dx = gx->data() + i * C;
                    for (int c = 0; c < C; ++c) {
                        const double dxhat = g[c] * (*gv)[c];
                        const double corr =
                            ((*gv)[c] * sum_g[c] + h[c] * (*gv)[c] * sum_gh[c]) /
                            n;
                        dx[c] += (dxhat - corr) * (*istd)[c];
                    }
                }
            } else {
                for (int64_t i = 0; i < N; ++i) {
                    const double* g = gout->data() + i * C;
                    double* dx = gx->data() + i * C;
                    for (int c = 0; c < C; ++c)
                        dx[c] += g[c] * (*gv)[c] * (*istd)[c];
                }
            }
        });
    return out;
}

Tensor dropout(Tape& t, const Tensor& x, double p, bool training, Rng& rng) {
    check_nonempty(x, "dropout");
    if (p < 0.0 || p >= 1.0)
        throw ConfigError("dropout: rate must lie in [0, 1)");
    if (!training || p == 0.0) {
        Tensor out(x.shape(), x.values());
        auto gx = t.grad_ptr(x.node);
        if (!gx) return out;
        const int64_t n = x.size();
        auto gout = fresh_grad(n);
        out.node = t.push_node(gout, [gout, gx, n] {
            for (int64_t i = 0; i < n; ++i) (*gx)[i] += (*gout)[i];
        });
        return out;
    }
    const int64_t n = x.size();
    const double keep_scale = 1.0 / (1.0 - p);
    auto mask = std::make_shared<std::vector<double>>(n);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    Tensor out(x.shape());
    for (int64_t i = 0; i < n; ++i) {
        const double m = u01(rng) < p ? 0.0 : keep_scale;
        (*mask)[i] = m;
        out[i] = x[i] * m;
    }
    auto gx = t.grad_ptr(x.node);
    if (!gx) return out;
    auto gout = fresh_grad(n);
    out.node = t.push_node(gout, [gout, gx, mask, n] {
        for (int64_t i = 0; i < n; ++i) (*gx)[i] += (*gout)[i] * (*mask)[i];
    });
    return out;
}

Param::Param(std::string n, Tensor val)
    : name(std::move(n)),
      value(std::move(val)),
      m(value.size(), 0.0),
      v(value.size(), 0.0) {}

void adam_step(Param& p, const std::vector<double>& grad,
               const AdamConfig& cfg) {
    if (grad.size() != static_cast<size_t>(p.value.size()))
        throw ShapeError("adam_step: gradient size mismatch");
    p.steps += 1;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(p.steps));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(p.steps));
    double* w = p.value.data();
    const int64_t n = p.value.size();
    for (int64_t i = 0; i < n; ++i) {
        p.m[i] = cfg.beta1 * p.m[i] + (1.0 - cfg.beta1) * grad[i];
        p.v[i] = cfg.beta2 * p.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
        const double mhat = p.m[i] / c1;
        const double vhat = p.v[i] / c2;
        w[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
}

GradCheckResult grad_check(
    const std::vector<Tensor>& inputs,
    const std::function<Tensor(Tape&, const std::vector<Tensor>&)>& f,
    double step) {
    std::vector<Tensor> work;
    work.reserve(inputs.size());
    for (const Tensor& t : inputs) work.push_back(t.clone());

    auto eval = [&]() {
        Tape tape;
        std::vector<Tensor> leaves;
        leaves.reserve(work.size());
        for (Tensor& w : work) leaves.push_back(tape.leaf(w));
        Tensor loss = f(tape, leaves);
        if (loss.size() != 1)
            throw ShapeError("grad_check: function must return a scalar");
        return loss[0];
    };

    Tape tape;
    std::vector<Tensor> leaves;
    leaves.reserve(work.size());
    for (Tensor& w : work) leaves.push_back(tape.leaf(w));
    Tensor loss = f(tape, leaves);
    if (loss.size() != 1)
        throw ShapeError("grad_check: function must return a scalar");
    tape.backward(loss);
    std::vector<std::vector<double>> analytic;
    analytic.reserve(leaves.size());
    for (const Tensor& l : leaves) analytic.push_back(tape.grad(l));

    GradCheckResult res;
    for (size_t i = 0; i < work.size(); ++i) {
        for (int64_t j = 0; j < work[i].size(); ++j) {
            const double orig = work[i][j];
            work[i][j] = orig + step;
            const double up = eval();
            work[i][j] = orig - step;
            const double down = eval();
            work[i][j] = orig;
            const double num = (up - down) / (2.0 * step);
            const double ana = analytic[i][j];
            const double rel =
                std::abs(ana - num) /
                std::max(1e-12, std::abs(ana) + std::abs(num));
            if (res.input_index < 0 || rel > res.max_rel_err) {
                res.max_rel_err = rel;
                res.input_index = static_cast<int>(i);
                res.coord = j;
                res.analytic = ana;
                res.numeric = num;
            }
        }
    }
    return res;
}

}  // namespace hexcast::nd
