#include "hexcast/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hexcast::models {

namespace {

using nd::Tensor;

int layout_rows(InputLayout l) {
    switch (l) {
        case InputLayout::hex55:
        case InputLayout::square55:
            return 5;
        case InputLayout::rect59:
            return 5;
        default:
            return 0;
    }
}

int layout_cols(InputLayout l) {
    switch (l) {
        case InputLayout::hex55:
        case InputLayout::square55:
            return 5;
        case InputLayout::rect59:
            return 9;
        default:
            return 0;
    }
}

int layout_vec_len(InputLayout l) {
    return l == InputLayout::vec19 ? 19 : 25;
}

bool layout_is_map(InputLayout l) {
    return l == InputLayout::hex55 || l == InputLayout::rect59 ||
           l == InputLayout::square55;
}

// slot index (flat row*cols+col) of each of the 19/25 local values, or the
// identity for the square patch.
std::vector<int> layout_slots(InputLayout l) {
    std::vector<int> slots;
    if (l == InputLayout::hex55) {
        const auto& e = hex::Embedding55::standard();
        for (const hex::Slot& s : e.slot_of) slots.push_back(s.row * 5 + s.col);
    } else if (l == InputLayout::rect59) {
        const auto& e = hex::Embedding59::standard();
        for (const hex::Slot& s : e.slot_of) slots.push_back(s.row * 9 + s.col);
    } else if (l == InputLayout::square55) {
        for (int i = 0; i < 25; ++i) slots.push_back(i);
    }
    return slots;
}

void read_local(const DemandTensor& dt, InputLayout l, int cell, int t,
                double* out) {
    if (l == InputLayout::vec25 || l == InputLayout::square55) {
        local_square_map(dt, cell, t, out);
    } else {
        local_hex_map(dt, cell, t, out);
    }
}

}  // namespace

nd::Param& NeuralModel::add_param(const std::string& name, Tensor init) {
    params_.emplace_back(name, std::move(init));
    return params_.back();
}

std::pair<Tensor, Tensor> conv_cell_step(nd::Tape& t, ConvKind kind,
                                         const Tensor& h_prev,
                                         const Tensor& c_prev, const Tensor& x,
                                         const GateWeights& w) {
    const auto conv = [&](const Tensor& in, const Tensor& k,
                          const Tensor& b) {
        return kind == ConvKind::hex ? hex::hex_conv(t, in, k, b)
                                     : nd::conv2d(t, in, k, b);
    };
    Tensor cat = nd::concat(t, h_prev, x);
    Tensor f = nd::sigmoid(t, conv(cat, w.wf, w.bf));
    Tensor i = nd::sigmoid(t, conv(cat, w.wi, w.bi));
    Tensor g = nd::tanh(t, conv(cat, w.wg, w.bg));
    Tensor o = nd::sigmoid(t, conv(cat, w.wo, w.bo));
    Tensor c = nd::add(t, nd::mul(t, f, c_prev), nd::mul(t, i, g));
    Tensor h = nd::mul(t, o, nd::tanh(t, c));
    return {h, c};
}

std::pair<Tensor, Tensor> lstm_step(nd::Tape& t, const Tensor& h_prev,
                                    const Tensor& c_prev, const Tensor& x,
                                    const GateWeights& w) {
    Tensor cat = nd::concat(t, h_prev, x);
    Tensor f = nd::sigmoid(t, nd::linear(t, cat, w.wf, w.bf));
    Tensor i = nd::sigmoid(t, nd::linear(t, cat, w.wi, w.bi));
    Tensor g = nd::tanh(t, nd::linear(t, cat, w.wg, w.bg));
    Tensor o = nd::sigmoid(t, nd::linear(t, cat, w.wo, w.bo));
    Tensor c = nd::add(t, nd::mul(t, f, c_prev), nd::mul(t, i, g));
    Tensor h = nd::mul(t, o, nd::tanh(t, c));
    return {h, c};
}

Tensor glorot(const nd::Shape& shape, int fan_in, int fan_out, Rng& rng) {
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    return Tensor::uniform(shape, -bound, bound, rng);
}

Tensor hex_kernel_init(int c_in, int c_out, Rng& rng) {
    return glorot({7, c_in, c_out}, 7 * c_in, 7 * c_out, rng);
}

Tensor square_kernel_init(int k, int c_in, int c_out, Rng& rng) {
    return glorot({k, k, c_in, c_out}, k * k * c_in, k * k * c_out, rng);
}

Tensor linear_init(int n_in, int n_out, Rng& rng) {
    return glorot({n_in, n_out}, n_in, n_out, rng);
}

// ---- Batch lowering ---------------------------------------------------------

BatchInput make_batch_input(const SampleSet& set,
                            const std::vector<SampleRef>& refs,
                            InputLayout layout, const ScaleParams& scale,
                            bool stack_channels) {
    if (!set.tensor) throw ConfigError("sample set is not bound to a tensor");
    const DemandTensor& dt = *set.tensor;
    const int B = static_cast<int>(refs.size());
    const int h = set.h;
    BatchInput out;
    out.size = B;
    if (B == 0) return out;

    const bool is_map = layout_is_map(layout);
    const int rows = is_map ? layout_rows(layout) : 1;
    const int cols = is_map ? layout_cols(layout) : layout_vec_len(layout);
    const std::vector<int> slots = layout_slots(layout);
    const int n_local = is_map ? static_cast<int>(slots.size()) : cols;
    std::vector<double> local(static_cast<size_t>(n_local));

    if (stack_channels) {
        if (!is_map)
            throw ConfigError("channel stacking requires a map layout");
        Tensor maps({B, rows, cols, h});
        std::fill(maps.data(), maps.data() + maps.size(), 0.0);
        for (int b = 0; b < B; ++b) {
            for (int j = 0; j < h; ++j) {
                const int t = refs[static_cast<size_t>(b)].t_target - h + j;
                read_local(dt, layout, refs[static_cast<size_t>(b)].cell, t,
                           local.data());
                double* base =
                    maps.data() + static_cast<int64_t>(b) * rows * cols * h;
                for (int i = 0; i < n_local; ++i)
                    base[static_cast<int64_t>(slots[static_cast<size_t>(i)]) *
                             h +
                         j] = scale_forward(local[static_cast<size_t>(i)],
                                            scale);
            }
        }
        out.steps.push_back(std::move(maps));
        return out;
    }

    for (int j = 0; j < h; ++j) {
        Tensor step = is_map ? Tensor({B, rows, cols, 1}) : Tensor({B, cols});
        std::fill(step.data(), step.data() + step.size(), 0.0);
        for (int b = 0; b < B; ++b) {
            const int t = refs[static_cast<size_t>(b)].t_target - h + j;
            read_local(dt, layout, refs[static_cast<size_t>(b)].cell, t,
                       local.data());
            double* base = step.data() + static_cast<int64_t>(b) * rows * cols;
            if (is_map) {
                for (int i = 0; i < n_local; ++i)
                    base[slots[static_cast<size_t>(i)]] = scale_forward(
                        local[static_cast<size_t>(i)], scale);
            } else {
                for (int i = 0; i < n_local; ++i)
                    base[i] =
                        scale_forward(local[static_cast<size_t>(i)], scale);
            }
        }
        out.steps.push_back(std::move(step));
    }
    return out;
}

Tensor make_batch_targets(const SampleSet& set,
                          const std::vector<SampleRef>& refs,
                          const ScaleParams& scale) {
    const int B = static_cast<int>(refs.size());
    Tensor y({B, 1});
    for (int b = 0; b < B; ++b)
        y[b] = scale_forward(set.target(refs[static_cast<size_t>(b)]), scale);
    return y;
}

// ---- Recurrent convolutional model -------------------------------------------

namespace {

std::vector<std::pair<std::string, std::vector<double>*>> bn_state_entries(
    std::vector<nd::BatchNormState>& states) {
    std::vector<std::pair<std::string, std::vector<double>*>> out;
    for (size_t l = 0; l < states.size(); ++l) {
        const std::string tag = "layer" + std::to_string(l) + ".";
        out.emplace_back(tag + "bn_mean", &states[l].running_mean);
        out.emplace_back(tag + "bn_var", &states[l].running_var);
    }
    return out;
}

class ConvLstmModel final : public NeuralModel {
  public:
    ConvLstmModel(std::string name, ConvKind kind, InputLayout layout,
                  const ModelConfig& cfg, Rng& rng)
        : name_(std::move(name)),
          kind_(kind),
          layout_(layout),
          rows_(layout_rows(layout)),
          cols_(layout_cols(layout)),
          cfg_(cfg) {
        if (cfg.layers.empty())
            throw ConfigError(name_ + ": needs at least one layer");
        int c_in = 1;
        for (size_t l = 0; l < cfg.layers.size(); ++l) {
            const int ch = cfg.layers[l];
            if (ch < 1) throw ConfigError(name_ + ": bad channel count");
            const std::string tag = "layer" + std::to_string(l) + ".";
            const int c_cat = ch + c_in;
            for (const char* gate : {"f", "i", "g", "o"}) {
                add_param(tag + "w" + gate, make_kernel(c_cat, ch, rng));
                add_param(tag + "b" + gate, Tensor::full({ch}, 0.0));
            }
            if (cfg.use_batch_norm) {
                add_param(tag + "bn_gamma", Tensor::full({c_in}, 1.0));
                add_param(tag + "bn_beta", Tensor::full({c_in}, 0.0));
                bn_states_.emplace_back(c_in);
            }
            c_in = ch;
        }
        const int top = rows_ * cols_ * cfg.layers.back();
        add_param("head.w", linear_init(top, 1, rng));
        add_param("head.b", Tensor::full({1}, 0.0));
    }

    Tensor forward(nd::Tape& t, const BatchInput& in, Mode mode,
                   Rng& rng) override {
        bound_.clear();
        if (static_cast<int>(in.steps.size()) != cfg_.h)
            throw ShapeError(name_ + ": expected " + std::to_string(cfg_.h) +
                             " input steps");
        const bool training = mode == Mode::train;
        const int B = in.steps.front().dim(0);
        std::vector<Tensor> xs = in.steps;
        size_t pi = 0;  // parameter cursor, mirrors construction order
        Tensor h_top;
        for (size_t l = 0; l < cfg_.layers.size(); ++l) {
            const int ch = cfg_.layers[l];
            GateWeights w;
            w.wf = bind(t, params_[pi++]), w.bf = bind(t, params_[pi++]);
            w.wi = bind(t, params_[pi++]), w.bi = bind(t, params_[pi++]);
            w.wg = bind(t, params_[pi++]), w.bg = bind(t, params_[pi++]);
            w.wo = bind(t, params_[pi++]), w.bo = bind(t, params_[pi++]);
            if (cfg_.use_batch_norm) {
                Tensor gamma = bind(t, params_[pi++]);
                Tensor beta = bind(t, params_[pi++]);
                Tensor all = nd::concat_rows(t, xs);
                all = nd::batch_norm(t, all, gamma, beta, bn_states_[l],
                                     training);
                if (kind_ == ConvKind::hex) all = hex::mask_5x5(t, all);
                for (int j = 0; j < cfg_.h; ++j)
                    xs[static_cast<size_t>(j)] =
                        nd::slice_rows(t, all, j * B, B);
            }
            Tensor hs = Tensor::full({B, rows_, cols_, ch}, 0.0);
            Tensor cs = Tensor::full({B, rows_, cols_, ch}, 0.0);
            std::vector<Tensor> outs;
            for (int j = 0; j < cfg_.h; ++j) {
                std::tie(hs, cs) = conv_cell_step(
                    t, kind_, hs, cs, xs[static_cast<size_t>(j)], w);
                outs.push_back(hs);
            }
            if (l + 1 < cfg_.layers.size()) {
                for (Tensor& s : outs)
                    s = nd::dropout(t, s, cfg_.dropout_p, training, rng);
                xs = std::move(outs);
            } else {
                h_top = hs;
            }
        }
        Tensor head_w = bind(t, params_[pi++]);
        Tensor head_b = bind(t, params_[pi++]);
        Tensor flat =
            nd::reshape(t, h_top, {B, rows_ * cols_ * cfg_.layers.back()});
        return nd::sigmoid(t, nd::linear(t, flat, head_w, head_b));
    }

    InputLayout layout() const override { return layout_; }
    std::string name() const override { return name_; }

    std::vector<std::pair<std::string, std::vector<double>*>> mutable_state()
        override {
        return bn_state_entries(bn_states_);
    }

  private:
    Tensor make_kernel(int c_in, int c_out, Rng& rng) const {
        return kind_ == ConvKind::hex
                   ? hex_kernel_init(c_in, c_out, rng)
                   : square_kernel_init(cfg_.conv_k, c_in, c_out, rng);
    }

    std::string name_;
    ConvKind kind_;
    InputLayout layout_;
    int rows_, cols_;
    ModelConfig cfg_;
    std::vector<nd::BatchNormState> bn_states_;
};

// ---- Feed-forward convolutional model ----------------------------------------

class CnnModel final : public NeuralModel {
  public:
    CnnModel(std::string name, ConvKind kind, InputLayout layout,
             const ModelConfig& cfg, Rng& rng)
        : name_(std::move(name)),
          kind_(kind),
          layout_(layout),
          rows_(layout_rows(layout)),
          cols_(layout_cols(layout)),
          cfg_(cfg) {
        if (cfg.layers.empty())
            throw ConfigError(name_ + ": needs at least one layer");
        int c_in = cfg.h;
        for (size_t l = 0; l < cfg.layers.size(); ++l) {
            const int ch = cfg.layers[l];
            const std::string tag = "layer" + std::to_string(l) + ".";
            add_param(tag + "w", kind == ConvKind::hex
                                     ? hex_kernel_init(c_in, ch, rng)
                                     : square_kernel_init(cfg.conv_k, c_in, ch,
                                                          rng));
            add_param(tag + "b", Tensor::full({ch}, 0.0));
            if (cfg.use_batch_norm) {
                add_param(tag + "bn_gamma", Tensor::full({ch}, 1.0));
                add_param(tag + "bn_beta", Tensor::full({ch}, 0.0));
                bn_states_.emplace_back(ch);
            }
            c_in = ch;
        }
        const int top = rows_ * cols_ * cfg.layers.back();
        add_param("head.w", linear_init(top, 1, rng));
        add_param("head.b", Tensor::full({1}, 0.0));
    }

    Tensor forward(nd::Tape& t, const BatchInput& in, Mode mode,
                   Rng& rng) override {
        bound_.clear();
        if (in.steps.size() != 1)
            throw ShapeError(name_ + ": expects one channel-stacked input");
        const bool training = mode == Mode::train;
        Tensor x = in.steps.front();
        const int B = x.dim(0);
        size_t pi = 0;
        for (size_t l = 0; l < cfg_.layers.size(); ++l) {
            Tensor w = bind(t, params_[pi++]);
            Tensor b = bind(t, params_[pi++]);
            x = kind_ == ConvKind::hex ? hex::hex_conv(t, x, w, b)
                                       : nd::conv2d(t, x, w, b);
            if (cfg_.use_batch_norm) {
                Tensor gamma = bind(t, params_[pi++]);
                Tensor beta = bind(t, params_[pi++]);
                x = nd::batch_norm(t, x, gamma, beta, bn_states_[l], training);
                if (kind_ == ConvKind::hex) x = hex::mask_5x5(t, x);
            }
            x = nd::relu(t, x);
            x = nd::dropout(t, x, cfg_.dropout_p, training, rng);
        }
        Tensor head_w = bind(t, params_[pi++]);
        Tensor head_b = bind(t, params_[pi++]);
        Tensor flat =
            nd::reshape(t, x, {B, rows_ * cols_ * cfg_.layers.back()});
        return nd::sigmoid(t, nd::linear(t, flat, head_w, head_b));
    }

    InputLayout layout() const override { return layout_; }
    std::string name() const override { return name_; }
    bool stacked_input() const override { return true; }

    std::vector<std::pair<std::string, std::vector<double>*>> mutable_state()
        override {
        return bn_state_entries(bn_states_);
    }

  private:
    std::string name_;
    ConvKind kind_;
    InputLayout layout_;
    int rows_, cols_;
    ModelConfig cfg_;
    std::vector<nd::BatchNormState> bn_states_;
};

// ---- Plain LSTM ---------------------------------------------------------------

class LstmModel final : public NeuralModel {
  public:
    LstmModel(std::string name, InputLayout layout, const ModelConfig& cfg,
              Rng& rng)
        : name_(std::move(name)), layout_(layout), cfg_(cfg) {
        const int nx = layout_vec_len(layout);
        const int nh = cfg.lstm_hidden;
        if (nh < 1) throw ConfigError(name_ + ": bad hidden size");
        for (const char* gate : {"f", "i", "g", "o"}) {
            add_param(std::string("w") + gate,
                      linear_init(nh + nx, nh, rng));
            add_param(std::string("b") + gate, Tensor::full({nh}, 0.0));
        }
        add_param("head.w", linear_init(nh, 1, rng));
        add_param("head.b", Tensor::full({1}, 0.0));
    }

    Tensor forward(nd::Tape& t, const BatchInput& in, Mode /*mode*/,
                   Rng& /*rng*/) override {
        bound_.clear();
        if (static_cast<int>(in.steps.size()) != cfg_.h)
            throw ShapeError(name_ + ": expected " + std::to_string(cfg_.h) +
                             " input steps");
        const int B = in.steps.front().dim(0);
        const int nh = cfg_.lstm_hidden;
        size_t pi = 0;
        GateWeights w;
        w.wf = bind(t, params_[pi++]), w.bf = bind(t, params_[pi++]);
        w.wi = bind(t, params_[pi++]), w.bi = bind(t, params_[pi++]);
        w.wg = bind(t, params_[pi++]), w.bg = bind(t, params_[pi++]);
        w.wo = bind(t, params_[pi++]), w.bo = bind(t, params_[pi++]);
        Tensor hs = Tensor::full({B, nh}, 0.0);
        Tensor cs = Tensor::full({B, nh}, 0.0);
        for (const Tensor& x : in.steps)
            std::tie(hs, cs) = lstm_step(t, hs, cs, x, w);
        Tensor head_w = bind(t, params_[pi++]);
        Tensor head_b = bind(t, params_[pi++]);
        return nd::sigmoid(t, nd::linear(t, hs, head_w, head_b));
    }

    InputLayout layout() const override { return layout_; }
    std::string name() const override { return name_; }

  private:
    std::string name_;
    InputLayout layout_;
    ModelConfig cfg_;
};

}  // namespace

// ---- Factory ------------------------------------------------------------------

bool is_neural_model(const std::string& id) {
    return id == "hconvlstm" || id == "convlstm" || id == "hcnn" ||
           id == "cnn" || id == "lstm";
}

std::unique_ptr<NeuralModel> make_model(const std::string& id, GridShape shape,
                                        const ModelConfig& cfg, Rng& rng) {
    const bool hex_grid = shape == GridShape::hex;
    if (id == "hconvlstm" || id == "hcnn") {
        if (!hex_grid)
            throw ConfigError(id + " requires a hexagonal tessellation");
        if (id == "hconvlstm")
            return std::make_unique<ConvLstmModel>(id, ConvKind::hex,
                                                   InputLayout::hex55, cfg,
                                                   rng);
        return std::make_unique<CnnModel>(id, ConvKind::hex,
                                          InputLayout::hex55, cfg, rng);
    }
    if (id == "convlstm") {
        const InputLayout l =
            hex_grid ? InputLayout::rect59 : InputLayout::square55;
        return std::make_unique<ConvLstmModel>(id, ConvKind::square, l, cfg,
                                               rng);
    }
    if (id == "cnn") {
        const InputLayout l =
            hex_grid ? InputLayout::rect59 : InputLayout::square55;
        return std::make_unique<CnnModel>(id, ConvKind::square, l, cfg, rng);
    }
    if (id == "lstm") {
        const InputLayout l =
            hex_grid ? InputLayout::vec19 : InputLayout::vec25;
        return std::make_unique<LstmModel>(id, l, cfg, rng);
    }
    throw ConfigError("unknown model: " + id);
}

// ---- Loss ---------------------------------------------------------------------

Tensor combined_loss(nd::Tape& t, const Tensor& preds, const Tensor& targets,
                     double lambda) {
    if (preds.empty() || preds.size() == 0)
        throw ShapeError("combined_loss: empty input");
    if (preds.shape() != targets.shape())
        throw ShapeError("combined_loss: shape mismatch");
    const int64_t n = preds.size();
    Tensor diff = nd::sub(t, preds, targets);
    Tensor rmse =
        nd::sqrt(t, nd::scale(t, nd::sum(t, nd::mul(t, diff, diff)),
                              1.0 / static_cast<double>(n)));
    Tensor inv(targets.shape());
    int64_t m = 0;
    for (int64_t i = 0; i < n; ++i) {
        if (targets[i] != 0.0) {
            inv[i] = 1.0 / std::abs(targets[i]);
            ++m;
        } else {
            inv[i] = 0.0;
        }
    }
    if (m == 0 || lambda == 0.0) return rmse;
    Tensor mape = nd::scale(t, nd::sum(t, nd::mul(t, nd::abs(t, diff), inv)),
                            1.0 / static_cast<double>(m));
    return nd::add(t, rmse, nd::scale(t, mape, lambda));
}

// ---- Training -------------------------------------------------------------------

TrainResult train_model(NeuralModel& model, const SampleSet& train,
                        const ScaleParams& scale, const TrainConfig& cfg) {
    if (train.refs.empty()) throw ConfigError("train: no samples");
    if (cfg.batch_size < 2) throw ConfigError("train: batch size too small");
    if (cfg.epochs < 1) throw ConfigError("train: bad epoch count");
    Rng rng(cfg.seed);
    SampleSet data = train;
    if (cfg.max_train_samples > 0 &&
        static_cast<int64_t>(data.refs.size()) > cfg.max_train_samples)
        data = subsample(data, cfg.max_train_samples, rng);

    const bool stacked = model.stacked_input();
    std::vector<size_t> order(data.refs.size());
    std::iota(order.begin(), order.end(), 0);
    TrainResult result;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        int n_batches = 0;
        for (size_t at = 0; at < order.size(); at += cfg.batch_size) {
            const size_t end =
                std::min(order.size(), at + static_cast<size_t>(cfg.batch_size));
            if (end - at < 2) continue;  // batch statistics need >= 2 rows
            std::vector<SampleRef> refs;
            refs.reserve(end - at);
            for (size_t i = at; i < end; ++i)
                refs.push_back(data.refs[order[i]]);
            nd::Tape tape;
            BatchInput input =
                make_batch_input(data, refs, model.layout(), scale, stacked);
            Tensor targets = make_batch_targets(data, refs, scale);
            Tensor preds = model.forward(tape, input, Mode::train, rng);
            Tensor loss = combined_loss(tape, preds, targets, cfg.lambda);
            tape.backward(loss);
            for (const auto& [param, leaf] : model.bindings())
                nd::adam_step(*param, tape.grad(leaf), cfg.adam);
            loss_sum += loss[0];
            ++n_batches;
        }
        result.epoch_loss.push_back(n_batches > 0 ? loss_sum / n_batches
                                                  : 0.0);
    }
    return result;
}

std::vector<double> predict(NeuralModel& model, const SampleSet& set,
                            const ScaleParams& scale, int batch_size) {
    if (batch_size < 1) throw ConfigError("predict: bad batch size");
    const bool stacked = model.stacked_input();
    Rng rng(0);  // eval mode draws nothing
    std::vector<double> out;
    out.reserve(set.refs.size());
    for (size_t at = 0; at < set.refs.size();
         at += static_cast<size_t>(batch_size)) {
        const size_t end = std::min(set.refs.size(),
                                    at + static_cast<size_t>(batch_size));
        std::vector<SampleRef> refs(set.refs.begin() + static_cast<int64_t>(at),
                                    set.refs.begin() + static_cast<int64_t>(end));
        nd::Tape tape;
        BatchInput input =
            make_batch_input(set, refs, model.layout(), scale, stacked);
        Tensor preds = model.forward(tape, input, Mode::eval, rng);
        for (int64_t i = 0; i < preds.size(); ++i)
            out.push_back(scale_inverse(preds[i], scale));
    }
    return out;
}

// ---- Historical average ----------------------------------------------------------

double ha_forecast(const DemandTensor& tensor,
                   const std::vector<int>& train_days, int cell,
                   int t_target) {
    if (train_days.empty()) throw ConfigError("ha: no training days");
    const int per_day = tensor.intervals_per_day();
    const int slot = ((t_target % per_day) + per_day) % per_day;
    double sum = 0.0;
    int n = 0;
    for (int day : train_days) {
        const int t = day * per_day + slot;
        if (t < 0 || t >= tensor.n_intervals) continue;
        sum += tensor.at(cell, t);
        ++n;
    }
    if (n == 0) throw ConfigError("ha: training days out of range");
    return sum / n;
}

std::vector<double> ha_predict(const DemandTensor& tensor,
                               const std::vector<int>& train_days,
                               const std::vector<SampleRef>& refs) {
    std::vector<double> out;
    out.reserve(refs.size());
    for (const SampleRef& r : refs)
        out.push_back(ha_forecast(tensor, train_days, r.cell, r.t_target));
    return out;
}

}  // namespace hexcast::models
