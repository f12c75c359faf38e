// Non-parametric scale-convolution: the rescale-correlate-unrescale fusion of
// two embeddings used as the Siamese connection,
//
//   [f1 *_H f2](s, t) = L_{s^-1}[ L_s[f1] * f2 ](t)
//
// with L implemented as bicubic rescaling. Output slices live on a common
// spatial frame (the s = 1 correlation grid); slices computed at other scales
// are center-cropped or zero-embedded onto it.

#pragma once

#include "setrack/bicubic.hpp"
#include "setrack/ops.hpp"
#include "setrack/tensor.hpp"

namespace setrack {

template <typename T>
struct ScaleHeatmap {
    Tensor<T> scores;            // [S, H, W]
    std::vector<double> scales;  // scale value per slice
};

template <typename T>
struct PooledHeatmap {
    Tensor<T> values;             // [H, W]
    std::vector<int> scale_index;  // argmax slice per location, row-major
};

namespace detail {

// Valid correlation of [C,H,W] with [C,h,w], summing channels -> [H',W'].
template <typename T>
Tensor<T> corr_sum_channels(const Tensor<T>& f1, const Tensor<T>& f2) {
    const int C = f1.dim(0), H = f1.dim(1), W = f1.dim(2);
    const int h = f2.dim(1), w = f2.dim(2);
    if (f2.dim(0) != C) throw std::invalid_argument("nonparam_scale_conv: channel mismatch");
    if (h > H || w > W)
        throw std::invalid_argument("nonparam_scale_conv: template larger than rescaled search features");
    const int Ho = H - h + 1, Wo = W - w + 1;
    Tensor<T> out({Ho, Wo});
    for (int c = 0; c < C; ++c) {
        const T* sp = f1.data() + static_cast<long>(c) * H * W;
        const T* tp = f2.data() + static_cast<long>(c) * h * w;
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) {
                const T kv = tp[i * w + j];
                if (kv == T(0)) continue;
                for (int y = 0; y < Ho; ++y) {
                    const T* row = sp + static_cast<long>(y + i) * W + j;
                    T* orow = out.data() + static_cast<long>(y) * Wo;
                    for (int x = 0; x < Wo; ++x) orow[x] += kv * row[x];
                }
            }
    }
    return out;
}

// Accepts [C,H,W] or, for unpooled embeddings, [S,C,H,W] whose scale axis is
// folded into channels before correlating.
template <typename T>
Tensor<T> as_channel_map(const Tensor<T>& f) {
    if (f.rank() == 3) return f;
    if (f.rank() == 4) return f.reshaped({f.dim(0) * f.dim(1), f.dim(2), f.dim(3)});
    throw std::invalid_argument("nonparam_scale_conv: expects rank-3 or rank-4 feature maps");
}

}  // namespace detail

template <typename T>
ScaleHeatmap<T> nonparam_scale_conv(const Tensor<T>& f1_in, const Tensor<T>& f2_in,
                                    const std::vector<double>& scales) {
    if (scales.empty()) throw std::invalid_argument("nonparam_scale_conv: empty scale list");
    Tensor<T> f1 = detail::as_channel_map(f1_in);
    Tensor<T> f2 = detail::as_channel_map(f2_in);
    check_finite(f1, "nonparam_scale_conv");
    check_finite(f2, "nonparam_scale_conv");

    const int H = f1.dim(1), W = f1.dim(2);
    const int h = f2.dim(1), w = f2.dim(2);
    const int Ho = H - h + 1, Wo = W - w + 1;
    if (Ho < 1 || Wo < 1)
        throw std::invalid_argument("nonparam_scale_conv: template larger than search features");

    ScaleHeatmap<T> heat;
    heat.scales = scales;
    heat.scores = Tensor<T>({static_cast<int>(scales.size()), Ho, Wo});
    for (size_t si = 0; si < scales.size(); ++si) {
        const double s = scales[si];
        Tensor<T> corr;
        if (s == 1.0) {
            corr = detail::corr_sum_channels(f1, f2);
        } else {
            Tensor<T> up = bicubic_resize(f1, s);
            Tensor<T> raw = detail::corr_sum_channels(up, f2);
            // Score maps are center-framed; the unrescale keeps the map
            // center fixed so slices align on the common frame.
            const int dh = std::max(1, static_cast<int>(std::lround(raw.dim(0) / s)));
            const int dw = std::max(1, static_cast<int>(std::lround(raw.dim(1) / s)));
            Tensor<T> down = bicubic_resize_centered(raw, dh, dw, 1.0 / s);
            corr = fit_frame(down, Ho, Wo);
        }
        for (int y = 0; y < Ho; ++y)
            for (int x = 0; x < Wo; ++x)
                heat.scores.at(static_cast<int>(si), y, x) = corr.at(y, x);
    }
    return heat;
}

// Max over the scale axis plus the argmax slice per location.
template <typename T>
PooledHeatmap<T> pool_heatmap(const ScaleHeatmap<T>& heat) {
    const int S = heat.scores.dim(0), H = heat.scores.dim(1), W = heat.scores.dim(2);
    PooledHeatmap<T> out;
    out.values = Tensor<T>({H, W});
    out.scale_index.assign(static_cast<size_t>(H) * W, 0);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            T best = heat.scores.at(0, y, x);
            int bi = 0;
            for (int k = 1; k < S; ++k) {
                T v = heat.scores.at(k, y, x);
                if (v > best) {
                    best = v;
                    bi = k;
                }
            }
            out.values.at(y, x) = best;
            out.scale_index[static_cast<size_t>(y) * W + x] = bi;
        }
    return out;
}

}  // namespace setrack
