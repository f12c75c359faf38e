// Tracker model assembly: a Siamese backbone as an ordered layer graph plus
// the correlation connection. The same backbone embeds template and frame
// (shared weights). Convolutional layers pad circularly in training mode and
// with zeros in eval mode.

#pragma once

#include <memory>

#include "json.hpp"
#include "setrack/bicubic.hpp"
#include "setrack/ops.hpp"
#include "setrack/scale_ops.hpp"
#include "setrack/tensor.hpp"

namespace setrack {

template <typename T>
struct Context {
    bool training = false;
    Tape<T>* tape = nullptr;
};

template <typename T>
struct ParamRef {
    std::string name;
    Tensor<T> tensor;
    bool trainable = true;
};

template <typename T>
class Layer {
public:
    virtual ~Layer() = default;
    virtual Tensor<T> forward(const Tensor<T>& x, const Context<T>& ctx) = 0;
    virtual void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) {}
    virtual std::string kind() const = 0;
    virtual bool scale_equivariant() const = 0;
    virtual std::unique_ptr<Layer<T>> clone() const = 0;
};

template <typename T>
class Conv2dLayer : public Layer<T> {
public:
    Tensor<T> kernel;  // [Co, Ci, k, k], no bias (batchnorm or the response affine follow)
    int stride = 1;
    int pad = 0;

    Conv2dLayer(int out_ch, int in_ch, int k, int stride_) : stride(stride_), pad((k - 1) / 2) {
        kernel = Tensor<T>({out_ch, in_ch, k, k});
    }

    Tensor<T> forward(const Tensor<T>& x, const Context<T>& ctx) override {
        PaddingSpec spec{ctx.training ? PadMode::circular : PadMode::zero, pad};
        return conv2d(x, kernel, stride, spec, ctx.tape);
    }
    void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) override {
        out.push_back({prefix + ".weight", kernel, true});
    }
    std::string kind() const override { return "conv2d"; }
    bool scale_equivariant() const override { return false; }
    std::unique_ptr<Layer<T>> clone() const override {
        auto c = std::make_unique<Conv2dLayer>(kernel.dim(0), kernel.dim(1), kernel.dim(2), stride);
        c->kernel = kernel.clone();
        c->pad = pad;
        return c;
    }
};

template <typename T>
class ScaleConvLayer : public Layer<T> {
public:
    Tensor<T> weights;  // [Co, Ci, I, N]
    std::shared_ptr<const ScaleBasis> basis;
    int stride = 1;
    int pad = 0;

    ScaleConvLayer(int out_ch, int in_ch, int inter_scale, std::shared_ptr<const ScaleBasis> b,
                   int stride_)
        : basis(std::move(b)), stride(stride_) {
        weights = Tensor<T>({out_ch, in_ch, inter_scale, basis->num_functions()});
        pad = (basis->max_grid_size() - 1) / 2;
    }

    Tensor<T> forward(const Tensor<T>& x, const Context<T>& ctx) override {
        PaddingSpec spec{ctx.training ? PadMode::circular : PadMode::zero, pad};
        return scale_conv(x, weights, basis, stride, spec, ctx.tape);
    }
    void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) override {
        out.push_back({prefix + ".weight", weights, true});
    }
    std::string kind() const override { return "scale_conv"; }
    bool scale_equivariant() const override { return true; }
    std::unique_ptr<Layer<T>> clone() const override {
        auto c = std::make_unique<ScaleConvLayer>(weights.dim(0), weights.dim(1), weights.dim(2),
                                                  basis, stride);
        c->weights = weights.clone();
        return c;
    }
};

template <typename T>
class FastScaleConv1x1Layer : public Layer<T> {
public:
    Tensor<T> weights;  // [Co, Ci, I]

    FastScaleConv1x1Layer(int out_ch, int in_ch, int inter_scale) {
        weights = Tensor<T>({out_ch, in_ch, inter_scale});
    }

    Tensor<T> forward(const Tensor<T>& x, const Context<T>& ctx) override {
        return fast_scale_conv_1x1(x, weights, ctx.tape);
    }
    void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) override {
        out.push_back({prefix + ".weight", weights, true});
    }
    std::string kind() const override { return "fast_scale_conv_1x1"; }
    bool scale_equivariant() const override { return true; }
    std::unique_ptr<Layer<T>> clone() const override {
        auto c = std::make_unique<FastScaleConv1x1Layer>(weights.dim(0), weights.dim(1),
                                                         weights.dim(2));
        c->weights = weights.clone();
        return c;
    }
};

template <typename T>
class BatchNormLayer : public Layer<T> {
public:
    BatchNorm<T> bn;
    explicit BatchNormLayer(int channels) : bn(channels) {}

    Tensor<T> forward(const Tensor<T>& x, const Context<T>& ctx) override {
        return bn.forward(x, ctx.training, ctx.tape);
    }
    void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) override {
        out.push_back({prefix + ".gamma", bn.gamma, true});
        out.push_back({prefix + ".beta", bn.beta, true});
        out.push_back({prefix + ".running_mean", bn.running_mean, false});
        out.push_back({prefix + ".running_var", bn.running_var, false});
    }
    std::string kind() const override { return "batchnorm"; }
    bool scale_equivariant() const override { return true; }
    std::unique_ptr<Layer<T>> clone() const override {
        auto c = std::make_unique<BatchNormLayer>(bn.channels());
        c->bn.gamma = bn.gamma.clone();
        c->bn.beta = bn.beta.clone();
        c->bn.running_mean = bn.running_mean.clone();
        c->bn.running_var = bn.running_var.clone();
        c->bn.momentum = bn.momentum;
        c->bn.eps = bn.eps;
        return c;
    }
};

template <typename T>
class ReluLayer : public Layer<T> {
public:
    Tensor<T> forward(const Tensor<T>& x, const Context<T>& ctx) override {
        return relu(x, ctx.tape);
    }
    std::string kind() const override { return "relu"; }
    bool scale_equivariant() const override { return true; }
    std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<ReluLayer>(); }
};

template <typename T>
class LiftLayer : public Layer<T> {
public:
    Tensor<T> forward(const Tensor<T>& x, const Context<T>&) override { return lift(x); }
    std::string kind() const override { return "lift"; }
    bool scale_equivariant() const override { return true; }
    std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<LiftLayer>(); }
};

template <typename T>
class ScalePoolLayer : public Layer<T> {
public:
    Tensor<T> forward(const Tensor<T>& x, const Context<T>& ctx) override {
        return scale_pool(x, ctx.tape);
    }
    std::string kind() const override { return "scale_pool"; }
    bool scale_equivariant() const override { return true; }
    std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<ScalePoolLayer>(); }
};

// ---------------------------------------------------------------------------
// Configuration

struct ConvSpec {
    int out_channels = 0;
    int kernel = 3;
    int stride = 1;
    bool batchnorm = true;
    bool relu = true;
};

struct InferenceConfig {
    int exemplar_size = 32;
    int search_size = 64;
    double context_margin = 0.5;      // margin = context_margin * (w + h)
    double scale_step = 1.0375;       // per-crop scale step of the greedy search
    double scale_penalty = 0.9745;    // multiplies the off-center scale responses
    double scale_damping = 0.59;      // update damping of the scale estimate
    double window_influence = 0.176;  // cosine window mixing weight
    int response_upsample = 16;       // bicubic upsampling of the response grid
};

struct ModelConfig {
    std::string type = "baseline";  // "baseline" or "se"
    int input_channels = 1;
    std::vector<ConvSpec> convs;
    int num_scales = 3;
    double scale_step = std::sqrt(2.0);
    int inter_scale = 1;
    std::vector<int> scale_pool_after;  // conv indices followed by scale-pooling
    std::string connection = "xcorr";   // "xcorr" or "nonparam"
    // Scale set of the non-parametric connection; the 3D heatmap it produces
    // is max-pooled back to 2D. Empty = derived at build time
    // ({1/step, 1, step} for a multi-scale SE model, {1} otherwise).
    std::vector<double> heatmap_scales;
    InferenceConfig inference;
};

inline ModelConfig desk_baseline_config() {
    ModelConfig c;
    c.type = "baseline";
    c.input_channels = 1;
    c.convs = {{24, 3, 2, true, true}, {32, 3, 2, true, true}, {64, 3, 2, true, true},
               {64, 3, 1, false, false}};
    return c;
}

inline ModelConfig desk_se_config() {
    ModelConfig c = desk_baseline_config();
    c.type = "se";
    c.connection = "nonparam";
    c.num_scales = 3;
    c.scale_step = std::sqrt(2.0);
    c.inter_scale = 1;
    return c;
}

// Full-width architecture used for the parameter-count checks only.
inline ModelConfig full_width_config(const std::string& type) {
    ModelConfig c;
    c.type = type;
    c.input_channels = 3;
    c.convs = {{96, 3, 2, true, true}, {128, 3, 2, true, true}, {256, 3, 2, true, true},
               {256, 3, 1, false, false}};
    if (type == "se") {
        c.connection = "nonparam";
        c.num_scales = 3;
        c.scale_step = std::sqrt(2.0);
        c.inter_scale = 1;
    }
    return c;
}

inline nlohmann::json inference_to_json(const InferenceConfig& i) {
    return {{"exemplar_size", i.exemplar_size},
            {"search_size", i.search_size},
            {"context_margin", i.context_margin},
            {"scale_step", i.scale_step},
            {"scale_penalty", i.scale_penalty},
            {"scale_damping", i.scale_damping},
            {"window_influence", i.window_influence},
            {"response_upsample", i.response_upsample}};
}

inline InferenceConfig inference_from_json(const nlohmann::json& j) {
    InferenceConfig i;
    i.exemplar_size = j.value("exemplar_size", i.exemplar_size);
    i.search_size = j.value("search_size", i.search_size);
    i.context_margin = j.value("context_margin", i.context_margin);
    i.scale_step = j.value("scale_step", i.scale_step);
    i.scale_penalty = j.value("scale_penalty", i.scale_penalty);
    i.scale_damping = j.value("scale_damping", i.scale_damping);
    i.window_influence = j.value("window_influence", i.window_influence);
    i.response_upsample = j.value("response_upsample", i.response_upsample);
    return i;
}

inline nlohmann::json model_config_to_json(const ModelConfig& c) {
    nlohmann::json convs = nlohmann::json::array();
    for (const auto& l : c.convs)
        convs.push_back({{"out_channels", l.out_channels},
                         {"kernel", l.kernel},
                         {"stride", l.stride},
                         {"batchnorm", l.batchnorm},
                         {"relu", l.relu}});
    return {{"type", c.type},
            {"input_channels", c.input_channels},
            {"convs", convs},
            {"num_scales", c.num_scales},
            {"scale_step", c.scale_step},
            {"inter_scale", c.inter_scale},
            {"scale_pool_after", c.scale_pool_after},
            {"connection", c.connection},
            {"heatmap_scales", c.heatmap_scales},
            {"inference", inference_to_json(c.inference)}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.type = j.at("type").get<std::string>();
    if (c.type != "baseline" && c.type != "se")
        throw std::invalid_argument("model config: unknown type '" + c.type + "'");
    c.input_channels = j.at("input_channels").get<int>();
    for (const auto& l : j.at("convs")) {
        ConvSpec s;
        s.out_channels = l.at("out_channels").get<int>();
        s.kernel = l.value("kernel", 3);
        s.stride = l.value("stride", 1);
        s.batchnorm = l.value("batchnorm", true);
        s.relu = l.value("relu", true);
        if (s.out_channels <= 0) throw std::invalid_argument("model config: invalid channel width");
        c.convs.push_back(s);
    }
    c.num_scales = j.value("num_scales", 3);
    c.scale_step = j.value("scale_step", std::sqrt(2.0));
    c.inter_scale = j.value("inter_scale", 1);
    c.scale_pool_after = j.value("scale_pool_after", std::vector<int>{});
    c.connection = j.value("connection", c.type == "se" ? "nonparam" : "xcorr");
    c.heatmap_scales = j.value("heatmap_scales", std::vector<double>{});
    if (j.contains("inference")) c.inference = inference_from_json(j.at("inference"));
    return c;
}

// ---------------------------------------------------------------------------
// TrackerModel

template <typename T>
class TrackerModel {
    inline static const std::vector<double> kUnitScale{1.0};

public:
    ModelConfig config;
    std::shared_ptr<const ScaleBasis> basis;  // null for baseline
    std::vector<std::unique_ptr<Layer<T>>> layers;
    Tensor<T> response_scale;
    Tensor<T> response_shift;
    bool training = false;

    TrackerModel() = default;
    TrackerModel(TrackerModel&&) noexcept = default;
    TrackerModel& operator=(TrackerModel&&) noexcept = default;

    TrackerModel clone() const {
        TrackerModel m;
        m.config = config;
        m.basis = basis;
        for (const auto& l : layers) m.layers.push_back(l->clone());
        m.response_scale = response_scale.clone();
        m.response_shift = response_shift.clone();
        m.training = training;
        return m;
    }

    // Runs the shared backbone; images [B,C,H,W] -> embedding, either
    // [B,C',h,w] (conventional or scale-pooled) or a multi-scale stack
    // [B,S,C',h,w].
    Tensor<T> embed(const Tensor<T>& images, Tape<T>* tape = nullptr) {
        if (images.rank() != 4) throw std::invalid_argument("embed: expects rank-4 image batch");
        if (images.dim(1) != config.input_channels)
            throw std::invalid_argument("embed: wrong input channel count");
        Context<T> ctx{training, tape};
        Tensor<T> x = images;
        for (auto& l : layers) x = l->forward(x, ctx);
        return x;
    }

    // Siamese connection on embeddings, plus the trainable output affine.
    //
    // 2D embeddings with one heatmap scale: plain pairwise correlation.
    // 2D embeddings with several: each slice rescales the search embedding,
    // correlates and unrescales back onto the s = 1 frame.
    // 5D stacks: the group correlation — heatmap slice s = a^m pairs template
    // scale k with search scale k-m spatially rescaled by s, sums the pair
    // correlations and unrescales; out-of-range scale indices drop.
    // A multi-slice heatmap is max-pooled back to 2D at the very end.
    //
    // The result is normalized by the template element count so logits and
    // the affine gradients stay O(1) regardless of embedding width.
    Tensor<T> response(const Tensor<T>& search_embed, const Tensor<T>& templ_embed,
                       Tape<T>* tape = nullptr) {
        if (search_embed.rank() != templ_embed.rank())
            throw std::invalid_argument("response: embedding rank mismatch");
        const std::vector<double>& scales =
            config.heatmap_scales.empty() ? kUnitScale : config.heatmap_scales;
        Tensor<T> r;
        if (search_embed.rank() == 5) {
            r = group_heatmap(search_embed, templ_embed, scales, tape);
        } else if (scales.size() == 1 && scales[0] == 1.0) {
            r = xcorr_pairwise(search_embed, templ_embed, tape);
        } else {
            r = planar_heatmap(search_embed, templ_embed, scales, tape);
        }
        double numel = 1;
        for (int a = 1; a < templ_embed.rank(); ++a) numel *= templ_embed.dim(a);
        Tensor<T> scaled = mul_scalar(r, 1.0 / numel, tape);
        return scalar_affine(scaled, response_scale, response_shift, tape);
    }

    // Multi-scale heatmap for 2D (already pooled) embeddings.
    Tensor<T> planar_heatmap(const Tensor<T>& search_embed, const Tensor<T>& templ_embed,
                             const std::vector<double>& scales, Tape<T>* tape) {
        const int Ho = search_embed.dim(2) - templ_embed.dim(2) + 1;
        const int Wo = search_embed.dim(3) - templ_embed.dim(3) + 1;
        std::vector<Tensor<T>> slices;
        for (double s : scales) {
            if (s == 1.0) {
                slices.push_back(xcorr_pairwise(search_embed, templ_embed, tape));
                continue;
            }
            // Internal resampler: correlation maps can drop below the public
            // resize op's minimum size; clamped taps handle that.
            const int uh = std::max(templ_embed.dim(2),
                                    static_cast<int>(std::lround(search_embed.dim(2) * s)));
            const int uw = std::max(templ_embed.dim(3),
                                    static_cast<int>(std::lround(search_embed.dim(3) * s)));
            Tensor<T> up = detail::resize_generic(search_embed, uh, uw, s, s, false, tape);
            Tensor<T> raw = xcorr_pairwise(up, templ_embed, tape);
            const int dh = std::max(1, static_cast<int>(std::lround(raw.dim(2) / s)));
            const int dw = std::max(1, static_cast<int>(std::lround(raw.dim(3) / s)));
            Tensor<T> down = detail::resize_generic(raw, dh, dw, 1.0 / s, 1.0 / s, true, tape);
            slices.push_back(fit_frame(down, Ho, Wo, tape));
        }
        return max_over_axis(stack_scales(slices, tape), 1, tape);
    }

    // Group correlation for multi-scale stacks [B,S,C,h,w]. Heatmap scales
    // must be integer powers of the basis scale step.
    Tensor<T> group_heatmap(const Tensor<T>& search_embed, const Tensor<T>& templ_embed,
                            const std::vector<double>& scales, Tape<T>* tape) {
        const double a = config.scale_step;
        const int S = search_embed.dim(1);
        if (templ_embed.dim(1) != S)
            throw std::invalid_argument("response: scale-axis mismatch between embeddings");
        const int H = search_embed.dim(3), W = search_embed.dim(4);
        const int h = templ_embed.dim(3), w = templ_embed.dim(4);
        const int Ho = H - h + 1, Wo = W - w + 1;
        std::vector<Tensor<T>> slices;
        for (double s : scales) {
            const double fm = std::log(s) / std::log(a);
            const int m = static_cast<int>(std::lround(fm));
            if (std::fabs(fm - m) > 1e-6)
                throw std::invalid_argument(
                    "response: heatmap scale must be an integer power of the scale step");
            Tensor<T> acc;
            for (int kp = 0; kp < S; ++kp) {
                const int src = kp - m;
                if (src < 0 || src >= S) continue;
                Tensor<T> f1 = concat_scales_channels(search_embed, src, 1, tape);
                Tensor<T> f2 = concat_scales_channels(templ_embed, kp, 1, tape);
                Tensor<T> up = f1;
                if (m != 0) {
                    const int uh = std::max(h, static_cast<int>(std::lround(H * s)));
                    const int uw = std::max(w, static_cast<int>(std::lround(W * s)));
                    up = detail::resize_generic(f1, uh, uw, s, s, false, tape);
                }
                Tensor<T> corr = xcorr_pairwise(up, f2, tape);
                acc = acc.defined() ? add(acc, corr, tape) : corr;
            }
            if (!acc.defined()) continue;  // offset beyond the scale axis
            if (m != 0) {
                const int dh = std::max(1, static_cast<int>(std::lround(acc.dim(2) / s)));
                const int dw = std::max(1, static_cast<int>(std::lround(acc.dim(3) / s)));
                acc = detail::resize_generic(acc, dh, dw, 1.0 / s, 1.0 / s, true, tape);
            }
            slices.push_back(fit_frame(acc, Ho, Wo, tape));
        }
        if (slices.empty()) throw std::invalid_argument("response: empty heatmap scale set");
        if (slices.size() == 1) return slices[0];
        return max_over_axis(stack_scales(slices, tape), 1, tape);
    }

    std::vector<ParamRef<T>> parameters() {
        std::vector<ParamRef<T>> out;
        int conv_idx = 0;
        for (auto& l : layers) {
            std::string prefix = l->kind();
            if (l->kind() == "conv2d" || l->kind() == "scale_conv" ||
                l->kind() == "fast_scale_conv_1x1") {
                prefix = "conv" + std::to_string(++conv_idx);
            } else if (l->kind() == "batchnorm") {
                prefix = "conv" + std::to_string(conv_idx) + ".bn";
            }
            l->collect_params(prefix, out);
        }
        out.push_back({"response.scale", response_scale, true});
        out.push_back({"response.shift", response_shift, true});
        return out;
    }

    long param_count() {
        long n = 0;
        for (const auto& p : parameters())
            if (p.trainable) n += p.tensor.size();
        return n;
    }

    void zero_grads() {
        for (auto& p : parameters())
            if (p.trainable) p.tensor.zero_grad();
    }

    // True when no non-equivariant spatial op precedes the connection.
    bool fully_scale_equivariant() const {
        for (const auto& l : layers)
            if (!l->scale_equivariant()) return false;
        return true;
    }

    int total_stride() const {
        int s = 1;
        for (const auto& c : config.convs) s *= c.stride;
        return s;
    }
};

// 4-conv Siamese backbone with a plain cross-correlation connection.
template <typename T>
TrackerModel<T> build_baseline(const ModelConfig& config) {
    if (config.type != "baseline")
        throw std::invalid_argument("build_baseline: config type must be 'baseline'");
    TrackerModel<T> m;
    m.config = config;
    int in_ch = config.input_channels;
    if (in_ch <= 0) throw std::invalid_argument("build_baseline: invalid input channel count");
    int idx = 0;
    for (const auto& spec : config.convs) {
        if (spec.out_channels <= 0)
            throw std::invalid_argument("build_baseline: invalid channel width");
        m.layers.push_back(
            std::make_unique<Conv2dLayer<T>>(spec.out_channels, in_ch, spec.kernel, spec.stride));
        if (spec.batchnorm) m.layers.push_back(std::make_unique<BatchNormLayer<T>>(spec.out_channels));
        if (spec.relu) m.layers.push_back(std::make_unique<ReluLayer<T>>());
        in_ch = spec.out_channels;
        ++idx;
    }
    m.response_scale = Tensor<T>({1}, T(1));
    m.response_shift = Tensor<T>({1}, T(0));
    return m;
}

// Scale-equivariant twin: every spatial conv becomes a scale-convolution over
// a shared basis and the stack is lifted at the input. The backbone keeps its
// scale axis unless intermediate poolings are configured; the connection is
// the non-parametric scale-convolution, whose multi-slice heatmap is
// max-pooled back to a 2D map at the very end.
template <typename T>
TrackerModel<T> build_se_tracker(const ModelConfig& config) {
    if (config.type != "se") throw std::invalid_argument("build_se_tracker: config type must be 'se'");
    if (config.num_scales < 1) throw std::invalid_argument("build_se_tracker: empty scale set");
    TrackerModel<T> m;
    m.config = config;
    const int base_kernel = config.convs.empty() ? 3 : config.convs[0].kernel;
    m.basis = build_basis(base_kernel, config.scale_step, config.num_scales);
    int in_ch = config.input_channels;
    m.layers.push_back(std::make_unique<LiftLayer<T>>());
    int idx = 0;
    for (const auto& spec : config.convs) {
        if (spec.kernel != base_kernel)
            throw std::invalid_argument("build_se_tracker: all layers share one basis kernel size");
        m.layers.push_back(std::make_unique<ScaleConvLayer<T>>(spec.out_channels, in_ch,
                                                               config.inter_scale, m.basis,
                                                               spec.stride));
        if (spec.batchnorm) m.layers.push_back(std::make_unique<BatchNormLayer<T>>(spec.out_channels));
        if (spec.relu) m.layers.push_back(std::make_unique<ReluLayer<T>>());
        if (std::find(config.scale_pool_after.begin(), config.scale_pool_after.end(), idx) !=
            config.scale_pool_after.end()) {
            m.layers.push_back(std::make_unique<ScalePoolLayer<T>>());
            // The pooled stack is 2D again; the next scale-conv re-lifts it.
            if (idx + 1 < static_cast<int>(config.convs.size()))
                m.layers.push_back(std::make_unique<LiftLayer<T>>());
        }
        in_ch = spec.out_channels;
        ++idx;
    }
    if (m.config.heatmap_scales.empty() && config.connection == "nonparam" &&
        config.num_scales > 1) {
        // The heatmap inherits the group's scale ladder around 1; with a
        // single scale the group collapses and so does the connection.
        m.config.heatmap_scales = {1.0 / config.scale_step, 1.0, config.scale_step};
    }
    m.response_scale = Tensor<T>({1}, T(1));
    m.response_shift = Tensor<T>({1}, T(0));
    return m;
}

template <typename T>
TrackerModel<T> build_model(const ModelConfig& config) {
    return config.type == "se" ? build_se_tracker<T>(config) : build_baseline<T>(config);
}

// He-style initialization. Scale-conv weights are solved from conventionally
// initialized spatial kernels through the sigma=1 basis, so synthesized
// kernels start with the same statistics as the baseline's.
template <typename T>
void init_random(TrackerModel<T>& model, uint64_t seed) {
    Rng rng(seed);
    for (auto& l : model.layers) {
        if (auto* conv = dynamic_cast<Conv2dLayer<T>*>(l.get())) {
            const double fan_in = conv->kernel.dim(1) * conv->kernel.dim(2) * conv->kernel.dim(3);
            const double std = std::sqrt(2.0 / fan_in);
            for (long i = 0; i < conv->kernel.size(); ++i)
                conv->kernel[i] = static_cast<T>(rng.gaussian() * std);
        } else if (auto* sconv = dynamic_cast<ScaleConvLayer<T>*>(l.get())) {
            const int base = sconv->basis->base_size();
            const int N = sconv->basis->num_functions();
            const int I = sconv->weights.dim(2);
            const double fan_in = sconv->weights.dim(1) * base * base * I;
            const double std = std::sqrt(2.0 / fan_in);
            std::vector<double> kernel(static_cast<size_t>(N));
            for (int o = 0; o < sconv->weights.dim(0); ++o)
                for (int c = 0; c < sconv->weights.dim(1); ++c)
                    for (int j = 0; j < I; ++j) {
                        for (auto& v : kernel) v = rng.gaussian() * std;
                        auto w = sconv->basis->solve_weights(kernel);
                        for (int n = 0; n < N; ++n)
                            sconv->weights.at(o, c, j, n) = static_cast<T>(w[static_cast<size_t>(n)]);
                    }
        } else if (auto* f11 = dynamic_cast<FastScaleConv1x1Layer<T>*>(l.get())) {
            const double fan_in = f11->weights.dim(1) * f11->weights.dim(2);
            const double std = std::sqrt(2.0 / fan_in);
            for (long i = 0; i < f11->weights.size(); ++i)
                f11->weights[i] = static_cast<T>(rng.gaussian() * std);
        }
    }
}

}  // namespace setrack
