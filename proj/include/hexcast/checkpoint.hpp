#pragma once

#include <memory>
#include <string>
#include <vector>

#include "hexcast/ingest.hpp"
#include "hexcast/models.hpp"
#include "hexcast/tensor.hpp"

namespace hexcast::ckpt {

// Everything needed to rebuild a trained model besides the weights.
struct CheckpointMeta {
    std::string model_id;
    GridShape grid = GridShape::hex;
    models::ModelConfig model;
    double lambda = 0.01;
    ScaleParams scale;
    uint64_t seed = 1;
};

struct Checkpoint {
    CheckpointMeta meta;
    std::vector<nd::Param> params;  // names, shapes and values only
};

// Single-file format: a text header (magic line, meta fields, one line per
// tensor with its name and shape) followed by the raw weight payload as
// row-major little-endian 64-bit floats in header order. Stores the model's
// parameters plus its mutable state (batch-norm running statistics).
void save_checkpoint(const std::string& path, const CheckpointMeta& meta,
                     models::NeuralModel& model);

Checkpoint load_checkpoint(const std::string& path);

// Copies stored values into the model, matching tensors by name and shape.
// The stored set must cover the model's parameters and state exactly.
void apply_params(models::NeuralModel& model, const Checkpoint& ckpt);

// make_model from the stored meta plus apply_params.
std::unique_ptr<models::NeuralModel> restore_model(const Checkpoint& ckpt);

}  // namespace hexcast::ckpt
