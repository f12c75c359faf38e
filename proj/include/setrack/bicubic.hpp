// Bicubic (Catmull-Rom, a = -0.5) image rescaling with clamp-to-edge
// sampling. Separable two-pass implementation over the trailing two axes.
// Resampling is linear in the input, so the optional backward pass scatters
// gradients through the transposed weight pattern.

#pragma once

#include "setrack/tensor.hpp"

namespace setrack {

namespace detail {

// Catmull-Rom kernel weights for a fractional offset t in [0,1) applied to
// the four taps at offsets {-1, 0, 1, 2}.
inline void cubic_weights(double t, double w[4]) {
    constexpr double a = -0.5;
    const double t2 = t * t, t3 = t2 * t;
    w[0] = a * (t3 - 2.0 * t2 + t);
    w[1] = (a + 2.0) * t3 - (a + 3.0) * t2 + 1.0;
    w[2] = -(a + 2.0) * t3 + (2.0 * a + 3.0) * t2 - a * t;
    w[3] = a * (t2 - t3);
}

inline int clamp_index(int i, int n) { return i < 0 ? 0 : (i >= n ? n - 1 : i); }

// Tap positions and Catmull-Rom weights for one resampled axis.
struct AxisPlan {
    std::vector<double> w;   // 4 weights per output index
    std::vector<int> base;   // floor(source coordinate) per output index

    template <typename MapFn>
    AxisPlan(int n_out, MapFn&& map) : w(static_cast<size_t>(n_out) * 4), base(static_cast<size_t>(n_out)) {
        for (int o = 0; o < n_out; ++o) {
            double s = map(o);
            double fl = std::floor(s);
            base[static_cast<size_t>(o)] = static_cast<int>(fl);
            cubic_weights(s - fl, &w[static_cast<size_t>(o) * 4]);
        }
    }
};

// Resamples rows of a [rows, n] buffer to length n_out.
template <typename T>
void resample_axis(const T* src, long rows, int n, T* dst, int n_out, const AxisPlan& plan) {
    for (long r = 0; r < rows; ++r) {
        const T* in = src + r * n;
        T* out = dst + r * n_out;
        for (int o = 0; o < n_out; ++o) {
            const double* wo = &plan.w[static_cast<size_t>(o) * 4];
            const int b = plan.base[static_cast<size_t>(o)];
            double acc = 0;
            for (int k = -1; k <= 2; ++k)
                acc += wo[k + 1] * static_cast<double>(in[clamp_index(b + k, n)]);
            out[o] = static_cast<T>(acc);
        }
    }
}

// Transpose of resample_axis: scatters [rows, n_out] gradients back to
// [rows, n], accumulating.
template <typename T>
void resample_axis_transpose(const T* gout, long rows, int n_out, T* gin, int n,
                             const AxisPlan& plan) {
    for (long r = 0; r < rows; ++r) {
        const T* go = gout + r * n_out;
        T* gi = gin + r * n;
        for (int o = 0; o < n_out; ++o) {
            const double* wo = &plan.w[static_cast<size_t>(o) * 4];
            const int b = plan.base[static_cast<size_t>(o)];
            for (int k = -1; k <= 2; ++k)
                gi[clamp_index(b + k, n)] += static_cast<T>(wo[k + 1] * static_cast<double>(go[o]));
        }
    }
}

template <typename T>
Tensor<T> resize_generic(const Tensor<T>& input, int Ho, int Wo, double sy, double sx,
                         bool centered, Tape<T>* tape = nullptr) {
    const int r = input.rank();
    const int H = input.dim(r - 2), W = input.dim(r - 1);
    if (Ho < 1 || Wo < 1) throw std::invalid_argument("bicubic_resize: output dimension < 1");
    if (H < 1 || W < 1) throw std::invalid_argument("bicubic_resize: empty input");

    const long outer = outer_extent(input);

    // Pixel-center mapping for images; symmetric grid-center mapping for
    // centered kernels (both grids share the point (0,0)).
    auto map_y = [&](int o) {
        return centered ? (o - (Ho - 1) / 2.0) / sy + (H - 1) / 2.0
                        : (o + 0.5) / sy - 0.5;
    };
    auto map_x = [&](int o) {
        return centered ? (o - (Wo - 1) / 2.0) / sx + (W - 1) / 2.0
                        : (o + 0.5) / sx - 0.5;
    };
    const auto plan_y = std::make_shared<AxisPlan>(Ho, map_y);
    const auto plan_x = std::make_shared<AxisPlan>(Wo, map_x);

    // Pass 1: rows (width direction).
    std::vector<T> tmp(static_cast<size_t>(outer * H) * Wo);
    resample_axis(input.data(), outer * H, W, tmp.data(), Wo, *plan_x);

    // Pass 2: columns. Transpose per image so the same row resampler applies.
    Shape out_shape = input.shape();
    out_shape[out_shape.size() - 2] = Ho;
    out_shape[out_shape.size() - 1] = Wo;
    Tensor<T> out(out_shape);
    {
        std::vector<T> colbuf(static_cast<size_t>(H));
        std::vector<T> colout(static_cast<size_t>(Ho));
        for (long n = 0; n < outer; ++n) {
            const T* plane = tmp.data() + n * H * Wo;
            T* oplane = out.data() + n * static_cast<long>(Ho) * Wo;
            for (int x = 0; x < Wo; ++x) {
                for (int y = 0; y < H; ++y)
                    colbuf[static_cast<size_t>(y)] = plane[static_cast<long>(y) * Wo + x];
                resample_axis(colbuf.data(), 1, H, colout.data(), Ho, *plan_y);
                for (int y = 0; y < Ho; ++y)
                    oplane[static_cast<long>(y) * Wo + x] = colout[static_cast<size_t>(y)];
            }
        }
    }

    if (tape) {
        Tensor<T> in_t = input, out_t = out;
        in_t.ensure_grad();
        out_t.ensure_grad();
        tape->record([in_t, out_t, plan_y, plan_x, outer, H, W, Ho, Wo]() mutable {
            auto gi = in_t.grad();
            auto go = out_t.grad();
            // Transpose pass 2 (columns), then transpose pass 1 (rows).
            std::vector<T> gtmp(static_cast<size_t>(outer * H) * Wo, T(0));
            std::vector<T> gcol_out(static_cast<size_t>(Ho));
            std::vector<T> gcol_in(static_cast<size_t>(H));
            for (long n = 0; n < outer; ++n) {
                const T* goplane = go.data() + n * static_cast<long>(Ho) * Wo;
                T* gtplane = gtmp.data() + n * static_cast<long>(H) * Wo;
                for (int x = 0; x < Wo; ++x) {
                    for (int y = 0; y < Ho; ++y)
                        gcol_out[static_cast<size_t>(y)] = goplane[static_cast<long>(y) * Wo + x];
                    std::fill(gcol_in.begin(), gcol_in.end(), T(0));
                    resample_axis_transpose(gcol_out.data(), 1, Ho, gcol_in.data(), H, *plan_y);
                    for (int y = 0; y < H; ++y)
                        gtplane[static_cast<long>(y) * Wo + x] += gcol_in[static_cast<size_t>(y)];
                }
            }
            resample_axis_transpose(gtmp.data(), outer * H, Wo, gi.data(), W, *plan_x);
        });
    }
    return out;
}

}  // namespace detail

// Uniform rescale by `scale`; output dims are round(H*scale) x round(W*scale).
// scale == 1 reproduces the input exactly.
template <typename T>
Tensor<T> bicubic_resize(const Tensor<T>& input, double scale, Tape<T>* tape = nullptr) {
    if (!(scale > 0.0)) throw std::invalid_argument("bicubic_resize: scale must be positive");
    const int r = input.rank();
    if (r < 2) throw std::invalid_argument("bicubic_resize: tensor rank < 2");
    const int H = input.dim(r - 2), W = input.dim(r - 1);
    if (H < 4 || W < 4) throw std::invalid_argument("bicubic_resize: spatial size must be >= 4");
    if (scale == 1.0 && !tape) return input.clone();
    const int Ho = static_cast<int>(std::lround(H * scale));
    const int Wo = static_cast<int>(std::lround(W * scale));
    return detail::resize_generic(input, Ho, Wo, scale, scale, /*centered=*/false, tape);
}

// Rescale to an explicit output size with both grids centered on the same
// point; used for centered filter grids and score maps rather than images.
template <typename T>
Tensor<T> bicubic_resize_centered(const Tensor<T>& input, int Ho, int Wo, double scale,
                                  Tape<T>* tape = nullptr) {
    if (!(scale > 0.0)) throw std::invalid_argument("bicubic_resize_centered: scale must be positive");
    return detail::resize_generic(input, Ho, Wo, scale, scale, /*centered=*/true, tape);
}

}  // namespace setrack
