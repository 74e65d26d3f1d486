#include "hexcast/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>

#include "hexcast/config.hpp"

namespace hexcast::ckpt {

namespace {

constexpr const char* kMagic = "HEXCAST-CKPT v1";

static_assert(std::numeric_limits<double>::is_iec559,
              "checkpoint payload assumes IEEE-754 doubles");

std::string format_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

void write_f64_le(std::ostream& out, const double* values, int64_t n) {
    for (int64_t i = 0; i < n; ++i) {
        const auto bits = std::bit_cast<uint64_t>(values[i]);
        unsigned char bytes[8];
        for (int b = 0; b < 8; ++b)
            bytes[b] = static_cast<unsigned char>((bits >> (8 * b)) & 0xFF);
        out.write(reinterpret_cast<const char*>(bytes), 8);
    }
}

void read_f64_le(std::istream& in, double* values, int64_t n) {
    for (int64_t i = 0; i < n; ++i) {
        unsigned char bytes[8];
        if (!in.read(reinterpret_cast<char*>(bytes), 8))
            throw DataError("checkpoint: truncated weight payload");
        uint64_t bits = 0;
        for (int b = 0; b < 8; ++b)
            bits |= static_cast<uint64_t>(bytes[b]) << (8 * b);
        values[i] = std::bit_cast<double>(bits);
    }
}

std::vector<int> parse_shape(const std::string& raw) {
    std::vector<int> shape;
    std::stringstream ss(raw);
    int d = 0;
    while (ss >> d) {
        if (d <= 0) throw DataError("checkpoint: bad shape entry");
        shape.push_back(d);
    }
    if (shape.empty()) throw DataError("checkpoint: empty parameter shape");
    return shape;
}

}  // namespace

namespace {

// Flat (name, shape, data) view over the model's parameters and state.
struct TensorEntry {
    std::string name;
    nd::Shape shape;
    const double* data = nullptr;
    int64_t size = 0;
};

std::vector<TensorEntry> model_entries(models::NeuralModel& model) {
    std::vector<TensorEntry> entries;
    for (const auto& p : model.params())
        entries.push_back({p.name, p.value.shape(), p.value.data(),
                           p.value.size()});
    for (const auto& [name, values] : model.mutable_state())
        entries.push_back({name, {static_cast<int>(values->size())},
                           values->data(),
                           static_cast<int64_t>(values->size())});
    return entries;
}

}  // namespace

void save_checkpoint(const std::string& path, const CheckpointMeta& meta,
                     models::NeuralModel& model) {
    const std::vector<TensorEntry> entries = model_entries(model);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("checkpoint: cannot write " + path);

    out << kMagic << "\n";
    out << "model = " << meta.model_id << "\n";
    out << "grid = " << to_string(meta.grid) << "\n";
    out << "layers = ";
    for (size_t i = 0; i < meta.model.layers.size(); ++i)
        out << (i ? "," : "") << meta.model.layers[i];
    out << "\n";
    out << "h = " << meta.model.h << "\n";
    out << "lstm_hidden = " << meta.model.lstm_hidden << "\n";
    out << "conv_k = " << meta.model.conv_k << "\n";
    out << "dropout_p = " << format_double(meta.model.dropout_p) << "\n";
    out << "use_batch_norm = " << (meta.model.use_batch_norm ? 1 : 0) << "\n";
    out << "lambda = " << format_double(meta.lambda) << "\n";
    out << "y_min = " << format_double(meta.scale.y_min) << "\n";
    out << "y_max = " << format_double(meta.scale.y_max) << "\n";
    out << "seed = " << meta.seed << "\n";
    out << "n_params = " << entries.size() << "\n";
    for (const auto& e : entries) {
        if (e.name.empty() || e.name.find(' ') != std::string::npos)
            throw ConfigError("checkpoint: parameter name unusable: '" +
                              e.name + "'");
        out << "param " << e.name;
        for (int d : e.shape) out << " " << d;
        out << "\n";
    }
    out << "data\n";
    for (const auto& e : entries) write_f64_le(out, e.data, e.size);
    if (!out) throw DataError("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("checkpoint: cannot open " + path);

    std::string line;
    if (!std::getline(in, line) || line != kMagic)
        throw DataError("checkpoint: bad magic in " + path);

    std::vector<std::pair<std::string, nd::Shape>> declared;
    std::string meta_text;
    bool saw_data = false;
    while (std::getline(in, line)) {
        if (line == "data") {
            saw_data = true;
            break;
        }
        if (line.rfind("param ", 0) == 0) {
            const std::string rest = line.substr(6);
            const auto space = rest.find(' ');
            if (space == std::string::npos)
                throw DataError("checkpoint: bad param line: " + line);
            declared.emplace_back(rest.substr(0, space),
                                  parse_shape(rest.substr(space + 1)));
            continue;
        }
        meta_text += line;
        meta_text += '\n';
    }
    if (!saw_data) throw DataError("checkpoint: missing data section");

    config::Settings meta_kv;
    size_t n_params = 0;
    try {
        std::stringstream ss(meta_text);
        meta_kv = config::parse_settings(ss);
        n_params = static_cast<size_t>(meta_kv.get_int64("n_params", -1));
    } catch (const ConfigError& e) {
        throw DataError(std::string("checkpoint: ") + e.what());
    }
    if (declared.size() != n_params)
        throw DataError("checkpoint: parameter count mismatch");

    Checkpoint ckpt;
    try {
        ckpt.meta.model_id = meta_kv.get("model", "");
        ckpt.meta.grid = grid_shape_from(meta_kv.get("grid", "hex"));
        ckpt.meta.model.layers =
            meta_kv.get_ints("layers", ckpt.meta.model.layers);
        ckpt.meta.model.h = meta_kv.get_int("h", ckpt.meta.model.h);
        ckpt.meta.model.lstm_hidden =
            meta_kv.get_int("lstm_hidden", ckpt.meta.model.lstm_hidden);
        ckpt.meta.model.conv_k =
            meta_kv.get_int("conv_k", ckpt.meta.model.conv_k);
        ckpt.meta.model.dropout_p =
            meta_kv.get_double("dropout_p", ckpt.meta.model.dropout_p);
        ckpt.meta.model.use_batch_norm =
            meta_kv.get_bool("use_batch_norm", ckpt.meta.model.use_batch_norm);
        ckpt.meta.lambda = meta_kv.get_double("lambda", ckpt.meta.lambda);
        ckpt.meta.scale.y_min = meta_kv.get_double("y_min", 0.0);
        ckpt.meta.scale.y_max = meta_kv.get_double("y_max", 1.0);
        ckpt.meta.seed = static_cast<uint64_t>(meta_kv.get_int64("seed", 1));
    } catch (const ConfigError& e) {
        throw DataError(std::string("checkpoint: ") + e.what());
    }
    if (ckpt.meta.model_id.empty())
        throw DataError("checkpoint: missing model id");

    for (const auto& [name, shape] : declared) {
        nd::Param p;
        p.name = name;
        p.value = nd::Tensor(shape);
        read_f64_le(in, p.value.data(), p.value.size());
        ckpt.params.push_back(std::move(p));
    }
    char extra = 0;
    if (in.read(&extra, 1))
        throw DataError("checkpoint: trailing bytes after payload");
    return ckpt;
}

void apply_params(models::NeuralModel& model, const Checkpoint& ckpt) {
    std::unordered_map<std::string, const nd::Param*> by_name;
    for (const auto& p : ckpt.params) {
        if (!by_name.emplace(p.name, &p).second)
            throw DataError("checkpoint: duplicate parameter " + p.name);
    }
    size_t used = 0;
    const auto lookup = [&](const std::string& name) -> const nd::Param& {
        const auto it = by_name.find(name);
        if (it == by_name.end())
            throw DataError("checkpoint: missing parameter " + name);
        ++used;
        return *it->second;
    };
    for (auto& p : model.params()) {
        const nd::Param& stored = lookup(p.name);
        if (stored.value.shape() != p.value.shape())
            throw DataError("checkpoint: shape mismatch for " + p.name);
        std::memcpy(p.value.data(), stored.value.data(),
                    sizeof(double) * static_cast<size_t>(p.value.size()));
    }
    for (auto& [name, values] : model.mutable_state()) {
        const nd::Param& stored = lookup(name);
        if (stored.value.size() != static_cast<int64_t>(values->size()))
            throw DataError("checkpoint: shape mismatch for " + name);
        std::memcpy(values->data(), stored.value.data(),
                    sizeof(double) * values->size());
    }
    if (used != ckpt.params.size())
        throw DataError("checkpoint: stored parameters not used by the model");
}

std::unique_ptr<models::NeuralModel> restore_model(const Checkpoint& ckpt) {
    Rng rng(ckpt.meta.seed);
    auto model = models::make_model(ckpt.meta.model_id, ckpt.meta.grid,
                                    ckpt.meta.model, rng);
    apply_params(*model, ckpt);
    return model;
}

}  // namespace hexcast::ckpt
