#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "hexcast/common.hpp"

namespace hexcast::nd {

using Shape = std::vector<int>;

int64_t numel(const Shape& s);

// Dense row-major float64 array. Copies share the underlying buffer; use
// clone() for an independent copy. `node` ties the tensor to a tape.
class Tensor {
  public:
    Tensor() = default;
    explicit Tensor(Shape shape);
    Tensor(Shape shape, std::vector<double> values);

    static Tensor full(Shape shape, double v);
    static Tensor scalar(double v);
    static Tensor uniform(Shape shape, double lo, double hi, Rng& rng);

    const Shape& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[i]; }
    int64_t size() const;
    bool empty() const { return !data_; }

    double* data() { return data_->data(); }
    const double* data() const { return data_->data(); }
    std::vector<double>& values() { return *data_; }
    const std::vector<double>& values() const { return *data_; }
    std::shared_ptr<std::vector<double>> buffer() const { return data_; }

    double& operator[](int64_t i) { return (*data_)[i]; }
    double operator[](int64_t i) const { return (*data_)[i]; }

    Tensor clone() const;

    int node = -1;  // tape handle; -1 for constants

  private:
    Shape shape_;
    std::shared_ptr<std::vector<double>> data_;
};

// Reverse-mode tape. Ops append nodes in topological order; backward walks
// them in reverse, each node accumulating into its parents' gradient
// buffers through a captured closure.
class Tape {
  public:
    using GradPtr = std::shared_ptr<std::vector<double>>;

    // Registers a differentiable leaf sharing the value's buffer.
    Tensor leaf(const Tensor& value);

    // Appends a node; `bwd` reads the node's own gradient and accumulates
    // into parents' (both captured by the caller). Returns the node id.
    int push_node(GradPtr grad, std::function<void()> bwd);

    // Gradient buffer of a node, or nullptr for constants (node < 0).
    GradPtr grad_ptr(int node) const;

    const std::vector<double>& grad(const Tensor& t) const;

    // Seeds d(loss)/d(loss) = 1 and runs the reverse sweep.
    void backward(const Tensor& loss);

    void clear() { nodes_.clear(); }
    size_t n_nodes() const { return nodes_.size(); }

  private:
    struct Node {
        GradPtr grad;
        std::function<void()> backward;
    };
    std::vector<Node> nodes_;
};

// ---- Differentiable operations -------------------------------------------
// Binary elementwise ops require identical shapes. All ops work for any
// rank unless stated. Constants (node < 0) participate without gradients.

Tensor add(Tape& t, const Tensor& a, const Tensor& b);
Tensor sub(Tape& t, const Tensor& a, const Tensor& b);
Tensor mul(Tape& t, const Tensor& a, const Tensor& b);  // Hadamard
Tensor scale(Tape& t, const Tensor& a, double c);
Tensor sigmoid(Tape& t, const Tensor& x);
Tensor tanh(Tape& t, const Tensor& x);
Tensor relu(Tape& t, const Tensor& x);
Tensor abs(Tape& t, const Tensor& x);
Tensor sqrt(Tape& t, const Tensor& x);

// Full reduction to shape {1}.
Tensor sum(Tape& t, const Tensor& x);

// x {B,n} · w {n,m} + b {m} -> {B,m}. Empty b skips the bias.
Tensor linear(Tape& t, const Tensor& x, const Tensor& w, const Tensor& b);

// Cross-correlation with zero same-padding. x {B,H,W,Ci}, w {k,k,Ci,Co}
// (odd k), b {Co} or empty -> {B,H,W,Co}.
Tensor conv2d(Tape& t, const Tensor& x, const Tensor& w, const Tensor& b);

// Concatenation along the last dimension; all other dims must agree.
Tensor concat(Tape& t, const Tensor& a, const Tensor& b);

// Concatenation along the first dimension; trailing dims must agree.
Tensor concat_rows(Tape& t, const std::vector<Tensor>& parts);

// Contiguous slice [start, start+len) along the first dimension.
Tensor slice_rows(Tape& t, const Tensor& x, int start, int len);

// x {B,H,W,C} -> {B,C} at a fixed spatial position.
Tensor take_cell(Tape& t, const Tensor& x, int row, int col);

// Same data, new shape (sizes must match).
Tensor reshape(Tape& t, const Tensor& x, Shape shape);

// Running statistics for batch_norm; sized to the channel count.
struct BatchNormState {
    std::vector<double> running_mean;
    std::vector<double> running_var;

    explicit BatchNormState(int channels = 0)
        : running_mean(channels, 0.0), running_var(channels, 1.0) {}
};

// Per-channel standardization over all leading dims of x {.., C}, with
// learned gamma/beta {C}. Training uses batch statistics (biased variance)
// and folds them into the running values; eval uses the running values.
Tensor batch_norm(Tape& t, const Tensor& x, const Tensor& gamma,
                  const Tensor& beta, BatchNormState& state, bool training,
                  double momentum = 0.9, double eps = 1e-5);

// Inverted dropout: training zeroes with probability p and scales
// survivors by 1/(1-p); eval is the identity.
Tensor dropout(Tape& t, const Tensor& x, double p, bool training, Rng& rng);

// ---- Parameters and optimization ------------------------------------------

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct Param {
    std::string name;
    Tensor value;
    std::vector<double> m;  // first moment
    std::vector<double> v;  // second moment
    int64_t steps = 0;

    Param() = default;
    Param(std::string n, Tensor val);
};

// One bias-corrected Adam update in place.
void adam_step(Param& p, const std::vector<double>& grad,
               const AdamConfig& cfg);

// ---- Gradient checking ----------------------------------------------------

struct GradCheckResult {
    double max_rel_err = 0.0;
    int input_index = -1;  // which input tensor holds the worst coordinate
    int64_t coord = -1;    // flat index of the worst coordinate
    double analytic = 0.0;
    double numeric = 0.0;
};

// Central-difference check of d(f)/d(inputs). `f` must build a scalar
// tensor from the given leaves on the given tape, deterministically.
// Relative error per coordinate: |a-n| / max(1e-12, |a|+|n|).
GradCheckResult grad_check(
    const std::vector<Tensor>& inputs,
    const std::function<Tensor(Tape&, const std::vector<Tensor>&)>& f,
    double step = 1e-5);

}  // namespace hexcast::nd
