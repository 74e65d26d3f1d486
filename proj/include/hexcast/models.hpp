#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "hexcast/common.hpp"
#include "hexcast/hexconv.hpp"
#include "hexcast/ingest.hpp"
#include "hexcast/tensor.hpp"

namespace hexcast::models {

// ---- Configuration ----------------------------------------------------------

// Convolution family used inside the recurrent and CNN models.
enum class ConvKind {
    hex,     // seven-tap hexagonal kernels on the 5x5 embedding
    square,  // ordinary k x k kernels
};

// How one supervised sample is presented to a network.
enum class InputLayout {
    hex55,     // per-step 5x5 embedding of the two-ring hex patch
    rect59,    // per-step 5x9 doubled-coordinate embedding of the hex patch
    square55,  // per-step raw 5x5 square patch
    vec19,     // per-step flat 19-vector (hex patch)
    vec25,     // per-step flat 25-vector (square patch)
};

struct ModelConfig {
    std::vector<int> layers{8, 16, 32, 32};  // channels per conv layer
    int h = 8;                               // history window length
    int lstm_hidden = 128;
    int conv_k = 3;          // kernel size for square convolutions
    double dropout_p = 0.2;  // inter-layer dropout during training
    bool use_batch_norm = true;
};

struct TrainConfig {
    int epochs = 50;
    int batch_size = 128;
    double lambda = 0.01;  // weight of the relative-error loss term
    nd::AdamConfig adam;
    uint64_t seed = 1;
    int64_t max_train_samples = 0;  // 0 = use every sample
};

struct TrainResult {
    std::vector<double> epoch_loss;  // mean batch loss per epoch
};

// ---- Network interface ------------------------------------------------------

// One mini-batch already lowered to tensors. Recurrent models read `steps`
// (h tensors, oldest first); the CNN reads the single channel-stacked entry.
struct BatchInput {
    std::vector<nd::Tensor> steps;
    int size = 0;
};

class NeuralModel {
  public:
    virtual ~NeuralModel() = default;

    // Scaled predictions of shape {B, 1}. Parameters are re-bound to `t` on
    // every call; bindings() exposes the leaf handles of the last call.
    virtual nd::Tensor forward(nd::Tape& t, const BatchInput& in, Mode mode,
                               Rng& rng) = 0;

    virtual InputLayout layout() const = 0;
    virtual std::string name() const = 0;

    // True for models that take the h history maps stacked as channels of a
    // single input tensor instead of a step sequence.
    virtual bool stacked_input() const { return false; }

    // Named non-trained state that must survive a save/load cycle
    // (batch-norm running statistics); empty for stateless models.
    virtual std::vector<std::pair<std::string, std::vector<double>*>>
    mutable_state() {
        return {};
    }

    std::vector<nd::Param>& params() { return params_; }
    const std::vector<std::pair<nd::Param*, nd::Tensor>>& bindings() const {
        return bound_;
    }

  protected:
    nd::Tensor bind(nd::Tape& t, nd::Param& p) {
        nd::Tensor leaf = t.leaf(p.value);
        bound_.emplace_back(&p, leaf);
        return leaf;
    }
    nd::Param& add_param(const std::string& name, nd::Tensor init);

    std::vector<nd::Param> params_;
    std::vector<std::pair<nd::Param*, nd::Tensor>> bound_;
};

// ---- Recurrent cell updates ---------------------------------------------------

// Gate weights over the channel concatenation [H_prev, X], gates in the
// order forget, input, candidate, output.
struct GateWeights {
    nd::Tensor wf, bf, wi, bi, wg, bg, wo, bo;
};

// One convolutional state update on {B,H,W,C} maps; returns {H, C}.
std::pair<nd::Tensor, nd::Tensor> conv_cell_step(nd::Tape& t, ConvKind kind,
                                                 const nd::Tensor& h_prev,
                                                 const nd::Tensor& c_prev,
                                                 const nd::Tensor& x,
                                                 const GateWeights& w);

// One plain recurrence update on {B,N} vectors; returns {H, C}.
std::pair<nd::Tensor, nd::Tensor> lstm_step(nd::Tape& t,
                                            const nd::Tensor& h_prev,
                                            const nd::Tensor& c_prev,
                                            const nd::Tensor& x,
                                            const GateWeights& w);

// Glorot-uniform initialisation helpers (zero for biases).
nd::Tensor glorot(const nd::Shape& shape, int fan_in, int fan_out, Rng& rng);
nd::Tensor hex_kernel_init(int c_in, int c_out, Rng& rng);
nd::Tensor square_kernel_init(int k, int c_in, int c_out, Rng& rng);
nd::Tensor linear_init(int n_in, int n_out, Rng& rng);

// ---- Model factory ----------------------------------------------------------

// Known ids: "hconvlstm", "convlstm", "hcnn", "cnn", "lstm" (neural);
// "ha" and "arima" are handled by the evaluation driver, not here.
bool is_neural_model(const std::string& id);

std::unique_ptr<NeuralModel> make_model(const std::string& id, GridShape shape,
                                        const ModelConfig& cfg, Rng& rng);

// ---- Batch lowering ---------------------------------------------------------

// Builds the tensor inputs for `refs` under the given layout. Recurrent
// layouts produce h step tensors; the CNN variant stacks the h history maps
// as channels of a single tensor ({B,H,W,h}).
BatchInput make_batch_input(const SampleSet& set,
                            const std::vector<SampleRef>& refs,
                            InputLayout layout, const ScaleParams& scale,
                            bool stack_channels);

// Scaled targets of shape {B, 1}.
nd::Tensor make_batch_targets(const SampleSet& set,
                              const std::vector<SampleRef>& refs,
                              const ScaleParams& scale);

// ---- Loss -------------------------------------------------------------------

// Root-mean-square error over all entries plus lambda times the mean
// absolute relative error over entries with nonzero target.
nd::Tensor combined_loss(nd::Tape& t, const nd::Tensor& preds,
                         const nd::Tensor& targets, double lambda);

// ---- Training and prediction ------------------------------------------------

TrainResult train_model(NeuralModel& model, const SampleSet& train,
                        const ScaleParams& scale, const TrainConfig& cfg);

// Raw-space (inverse-scaled) predictions for every ref in `set`.
std::vector<double> predict(NeuralModel& model, const SampleSet& set,
                            const ScaleParams& scale, int batch_size = 256);

// ---- Non-neural baselines ---------------------------------------------------

// Historical average: mean demand of the same time-of-day slot and cell over
// the training days.
double ha_forecast(const DemandTensor& tensor,
                   const std::vector<int>& train_days, int cell, int t_target);

std::vector<double> ha_predict(const DemandTensor& tensor,
                               const std::vector<int>& train_days,
                               const std::vector<SampleRef>& refs);

}  // namespace hexcast::models
