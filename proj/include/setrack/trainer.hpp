// Training: balanced logistic labels on the response map, SGD with momentum,
// weight decay and per-epoch exponential learning-rate decay, plus the
// checkpoint format (JSON with hex-float parameter payloads for bitwise round
// trips).

#pragma once

#include <iomanip>
#include <map>

#include "setrack/tracker.hpp"

namespace setrack {

struct TrainConfig {
    int epochs = 5;
    int batch_size = 8;
    double lr_start = 1e-2;
    double lr_end = 1e-5;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    int label_radius = 2;  // response-grid cells
    int frame_gap = 10;    // max template/search frame distance
    int pairs_per_sequence = 1;
    uint64_t seed = 0;

    void validate() const {
        if (!(lr_start >= lr_end && lr_end > 0))
            throw std::invalid_argument("train config: need lr_start >= lr_end > 0");
        if (epochs < 1 || batch_size < 1)
            throw std::invalid_argument("train config: epochs and batch size must be positive");
    }
};

inline double lr_at_epoch(const TrainConfig& c, int epoch) {
    if (c.epochs <= 1) return c.lr_start;
    return c.lr_start * std::pow(c.lr_end / c.lr_start, static_cast<double>(epoch) / (c.epochs - 1));
}

// +1 within `radius` cells of the map center, -1 outside, with per-class
// weights that give both classes equal total mass.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> make_label_map(int response_size, int radius) {
    if (radius < 0) throw std::invalid_argument("make_label_map: negative radius");
    Tensor<T> labels({response_size, response_size});
    const double c = (response_size - 1) / 2.0;
    long n_pos = 0, n_neg = 0;
    for (int y = 0; y < response_size; ++y)
        for (int x = 0; x < response_size; ++x) {
            const double d = std::hypot(y - c, x - c);
            const bool pos = d <= radius + 1e-9;
            labels.at(y, x) = pos ? T(1) : T(-1);
            (pos ? n_pos : n_neg)++;
        }
    if (n_neg == 0)
        throw std::invalid_argument("make_label_map: radius covers the whole map (degenerate weights)");
    Tensor<T> weights({response_size, response_size});
    for (int y = 0; y < response_size; ++y)
        for (int x = 0; x < response_size; ++x)
            weights.at(y, x) =
                labels.at(y, x) > 0 ? static_cast<T>(0.5 / n_pos) : static_cast<T>(0.5 / n_neg);
    return {labels, weights};
}

// Weighted logistic loss sum(w * log(1 + exp(-y*v))) with the gradient pushed
// into the logits. Weight maps are expected to sum to 1 per item; the batch
// mean is returned.
template <typename T>
double bce_loss(Tensor<T>& logits, const Tensor<T>& labels, const Tensor<T>& weights,
                Tape<T>* tape = nullptr) {
    check_finite(logits, "bce_loss");
    const long per = labels.size();
    if (logits.size() % per != 0) throw std::invalid_argument("bce_loss: label shape mismatch");
    const long B = logits.size() / per;
    double loss = 0;
    for (long i = 0; i < logits.size(); ++i) {
        const double y = labels[i % per];
        const double z = -y * static_cast<double>(logits[i]);
        // log(1 + e^z), stable for both signs.
        const double l = std::max(z, 0.0) + std::log1p(std::exp(-std::fabs(z)));
        loss += weights[i % per] * l;
    }
    loss /= static_cast<double>(B);
    if (tape) {
        Tensor<T> logits_t = logits, labels_t = labels, weights_t = weights;
        logits_t.ensure_grad();
        tape->record([logits_t, labels_t, weights_t, B, per]() mutable {
            auto g = logits_t.grad();
            for (long i = 0; i < logits_t.size(); ++i) {
                const double y = labels_t[i % per];
                const double z = -y * static_cast<double>(logits_t[i]);
                const double sig = 1.0 / (1.0 + std::exp(-z));
                g[i] += static_cast<T>(weights_t[i % per] * (-y) * sig / static_cast<double>(B));
            }
        });
    }
    return loss;
}

// Classical momentum with an L2 weight-decay gradient term:
// v <- momentum*v + (g + wd*p); p <- p - lr*v.
template <typename T>
class SgdOptimizer {
public:
    explicit SgdOptimizer(TrainConfig config) : config_(std::move(config)) { config_.validate(); }

    void step(std::vector<ParamRef<T>>& params, double lr) {
        for (auto& p : params) {
            if (!p.trainable) continue;
            auto& vel = velocity_[p.name];
            if (vel.size() != static_cast<size_t>(p.tensor.size()))
                vel.assign(static_cast<size_t>(p.tensor.size()), T(0));
            if (!p.tensor.has_grad()) continue;
            auto g = p.tensor.grad();
            for (long i = 0; i < p.tensor.size(); ++i) {
                const T grad = static_cast<T>(g[i] + config_.weight_decay * p.tensor[i]);
                vel[static_cast<size_t>(i)] =
                    static_cast<T>(config_.momentum * vel[static_cast<size_t>(i)] + grad);
                p.tensor[i] -= static_cast<T>(lr * vel[static_cast<size_t>(i)]);
            }
        }
    }

    const std::map<std::string, std::vector<T>>& velocity() const { return velocity_; }
    std::map<std::string, std::vector<T>>& velocity() { return velocity_; }

private:
    TrainConfig config_;
    std::map<std::string, std::vector<T>> velocity_;
};

// ---------------------------------------------------------------------------
// Pair sampling and the training loop.

struct TrainPair {
    int sequence = 0;
    int t_template = 0;
    int t_search = 0;
};

struct LossPoint {
    int epoch = 0;
    int step = 0;
    double loss = 0;
};

inline void write_loss_csv(const std::string& path, const std::vector<LossPoint>& curve) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << "epoch,step,loss\n";
    for (const auto& p : curve)
        f << p.epoch << "," << p.step << "," << std::setprecision(10) << p.loss << "\n";
}

template <typename T>
struct PairBatch {
    Tensor<T> templates;  // [B, C, exemplar, exemplar]
    Tensor<T> searches;   // [B, C, search, search]
};

// Standardized crop pair: each frame is cropped around its own ground truth
// at the context-normalized side, so the target appears at canonical size.
template <typename T>
PairBatch<T> assemble_batch(const std::vector<Sequence>& data, const std::vector<TrainPair>& pairs,
                            const InferenceConfig& inf) {
    const int B = static_cast<int>(pairs.size());
    PairBatch<T> batch;
    batch.templates = Tensor<T>({B, 1, inf.exemplar_size, inf.exemplar_size});
    batch.searches = Tensor<T>({B, 1, inf.search_size, inf.search_size});
    const double side_ratio = static_cast<double>(inf.search_size) / inf.exemplar_size;
    for (int b = 0; b < B; ++b) {
        const auto& pr = pairs[static_cast<size_t>(b)];
        const Sequence& seq = data[static_cast<size_t>(pr.sequence)];
        const Box& tb = seq.box_of(pr.t_template, seq.target_id);
        const Box& sb = seq.box_of(pr.t_search, seq.target_id);
        auto t_img = image_to_tensor<T>(seq.frames[static_cast<size_t>(pr.t_template)]);
        auto s_img = image_to_tensor<T>(seq.frames[static_cast<size_t>(pr.t_search)]);
        auto t_crop = crop_resize(t_img, tb.cx, tb.cy, template_side(tb, inf.context_margin),
                                  inf.exemplar_size);
        auto s_crop = crop_resize(s_img, sb.cx, sb.cy,
                                  template_side(sb, inf.context_margin) * side_ratio,
                                  inf.search_size);
        std::copy(t_crop.data(), t_crop.data() + t_crop.size(),
                  batch.templates.data() + static_cast<long>(b) * t_crop.size());
        std::copy(s_crop.data(), s_crop.data() + s_crop.size(),
                  batch.searches.data() + static_cast<long>(b) * s_crop.size());
    }
    return batch;
}

template <typename T>
struct TrainResult {
    std::vector<LossPoint> curve;
    double final_loss = 0;
};

// Deterministic single-context training loop. The pair sampler draws
// (template, search) frames from the same sequence at distance <= frame_gap.
template <typename T>
TrainResult<T> train(TrackerModel<T>& model, const std::vector<Sequence>& data,
                     const TrainConfig& config) {
    config.validate();
    if (data.empty()) throw std::invalid_argument("train: empty dataset");
    model.training = true;
    SgdOptimizer<T> opt(config);
    Rng rng(mix_seed(config.seed, 1));
    TrainResult<T> result;

    // Label maps depend on the response size; resolved on the first batch.
    Tensor<T> labels, weights;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const double lr = lr_at_epoch(config, epoch);
        // One pass: every sequence contributes pairs_per_sequence pairs, in a
        // seed-shuffled order.
        std::vector<TrainPair> pool;
        for (int s = 0; s < static_cast<int>(data.size()); ++s) {
            const int len = data[static_cast<size_t>(s)].spec.length;
            if (len < 2) continue;
            for (int p = 0; p < config.pairs_per_sequence; ++p) {
                TrainPair pr;
                pr.sequence = s;
                pr.t_template = rng.uniform_int(0, len - 2);
                const int max_gap = std::min(config.frame_gap, len - 1 - pr.t_template);
                pr.t_search = pr.t_template + rng.uniform_int(1, max_gap);
                pool.push_back(pr);
            }
        }
        for (size_t i = pool.size(); i > 1; --i)
            std::swap(pool[i - 1], pool[rng.next_u64() % i]);

        int step = 0;
        for (size_t start = 0; start < pool.size(); start += static_cast<size_t>(config.batch_size)) {
            std::vector<TrainPair> pairs(
                pool.begin() + static_cast<long>(start),
                pool.begin() + static_cast<long>(std::min(pool.size(),
                                                          start + static_cast<size_t>(config.batch_size))));
            auto batch = assemble_batch<T>(data, pairs, model.config.inference);
            Tape<T> tape;
            model.zero_grads();
            auto t_embed = model.embed(batch.templates, &tape);
            auto s_embed = model.embed(batch.searches, &tape);
            auto logits = model.response(s_embed, t_embed, &tape);
            if (!labels.defined() || labels.dim(0) != logits.dim(2)) {
                auto lm = make_label_map<T>(logits.dim(2), config.label_radius);
                labels = lm.first;
                weights = lm.second;
            }
            const double loss = bce_loss(logits, labels, weights, &tape);
            if (!std::isfinite(loss)) throw std::runtime_error("train: non-finite loss");
            tape.backward();
            auto params = model.parameters();
            opt.step(params, lr);
            result.curve.push_back({epoch, step, loss});
            result.final_loss = loss;
            ++step;
        }
    }
    model.training = false;
    return result;
}

// ---------------------------------------------------------------------------
// Checkpoints: JSON with hex-float payloads.

inline std::string to_hex_float(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%a", v);
    return buf;
}

inline double from_hex_float(const std::string& s) {
    return std::strtod(s.c_str(), nullptr);
}

constexpr int kCheckpointVersion = 1;

template <typename T>
nlohmann::json checkpoint_to_json(TrackerModel<T>& model,
                                  const std::map<std::string, std::vector<T>>* optimizer = nullptr) {
    nlohmann::json params;
    for (auto& p : model.parameters()) {
        nlohmann::json data = nlohmann::json::array();
        for (long i = 0; i < p.tensor.size(); ++i)
            data.push_back(to_hex_float(static_cast<double>(p.tensor[i])));
        params[p.name] = {{"shape", p.tensor.shape()}, {"data", data}};
    }
    nlohmann::json j = {{"format_version", kCheckpointVersion},
                        {"architecture", model_config_to_json(model.config)},
                        {"params", params}};
    if (optimizer) {
        nlohmann::json opt;
        for (const auto& [name, vel] : *optimizer) {
            nlohmann::json data = nlohmann::json::array();
            for (T v : vel) data.push_back(to_hex_float(static_cast<double>(v)));
            opt[name] = data;
        }
        j["optimizer"] = opt;
    }
    return j;
}

template <typename T>
void save_checkpoint(TrackerModel<T>& model, const std::string& path,
                     const std::map<std::string, std::vector<T>>* optimizer = nullptr) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write checkpoint " + path);
    f << checkpoint_to_json(model, optimizer).dump(1) << "\n";
}

template <typename T>
void load_params_from_json(TrackerModel<T>& model, const nlohmann::json& j) {
    const auto& params = j.at("params");
    for (auto& p : model.parameters()) {
        if (!params.contains(p.name))
            throw std::runtime_error("checkpoint: missing parameter " + p.name);
        const auto& entry = params.at(p.name);
        const auto shape = entry.at("shape").template get<Shape>();
        if (shape != p.tensor.shape())
            throw std::runtime_error("checkpoint: shape mismatch for " + p.name + ": stored " +
                                     shape_str(shape) + " vs model " + shape_str(p.tensor.shape()));
        const auto& data = entry.at("data");
        if (static_cast<long>(data.size()) != p.tensor.size())
            throw std::runtime_error("checkpoint: length mismatch for " + p.name);
        for (long i = 0; i < p.tensor.size(); ++i)
            p.tensor[i] = static_cast<T>(
                from_hex_float(data[static_cast<size_t>(i)].template get<std::string>()));
    }
}

// Rebuilds the model stored in the checkpoint.
template <typename T>
TrackerModel<T> load_checkpoint(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read checkpoint " + path);
    nlohmann::json j = nlohmann::json::parse(f, nullptr, /*allow_exceptions=*/true);
    if (!j.contains("format_version") || j.at("format_version").get<int>() != kCheckpointVersion)
        throw std::runtime_error("checkpoint: unsupported or missing format version");
    auto model = build_model<T>(model_config_from_json(j.at("architecture")));
    load_params_from_json(model, j);
    return model;
}

// Loads into an existing model; the architectures must match. A baseline
// checkpoint does not load into an SE model (route through transfer_model).
template <typename T>
void load_checkpoint_into(TrackerModel<T>& model, const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read checkpoint " + path);
    nlohmann::json j = nlohmann::json::parse(f);
    if (!j.contains("format_version") || j.at("format_version").get<int>() != kCheckpointVersion)
        throw std::runtime_error("checkpoint: unsupported or missing format version");
    const auto stored = model_config_from_json(j.at("architecture"));
    if (stored.type != model.config.type)
        throw std::runtime_error("checkpoint: model type '" + stored.type +
                                 "' does not match target '" + model.config.type +
                                 "' (use the transfer initializer instead)");
    load_params_from_json(model, j);
}

}  // namespace setrack
