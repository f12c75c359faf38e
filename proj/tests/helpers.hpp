// Shared test utilities: independent oracles and generators. Everything here
// stays deliberately naive (direct loops, double precision) so it cannot share
// a failure mode with the library implementation.

#pragma once

#include <cmath>
#include <functional>

#include "setrack/basis.hpp"
#include "setrack/ops.hpp"
#include "setrack/tensor.hpp"

namespace testutil {

using setrack::PaddingSpec;
using setrack::PadMode;
using setrack::Rng;
using setrack::ScaleBasis;
using setrack::Shape;
using setrack::Tensor;

inline double rel_err(double a, double b) {
    double m = std::max(std::fabs(a), std::fabs(b));
    if (m < 1e-12) return std::fabs(a - b);
    return std::fabs(a - b) / m;
}

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
    double m = 0;
    for (long i = 0; i < a.size(); ++i)
        m = std::max(m, std::fabs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
    return m;
}

template <typename T>
double rel_l2(const Tensor<T>& a, const Tensor<T>& b) {
    double num = 0, den = 0;
    for (long i = 0; i < a.size(); ++i) {
        double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        num += d * d;
        den += static_cast<double>(a[i]) * static_cast<double>(a[i]);
    }
    return std::sqrt(num) / std::max(1e-30, std::sqrt(den));
}

// Direct six-nested-loop cross-correlation in double precision with implicit
// padding, independent of the library's padded-buffer implementation.
inline Tensor<double> conv2d_oracle(const Tensor<double>& input, const Tensor<double>& kernel,
                                    int stride, PaddingSpec pad) {
    const int B = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
    const int Co = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
    const int p = pad.mode == PadMode::none ? 0 : pad.amount;
    const int Ho = (H + 2 * p - kh) / stride + 1;
    const int Wo = (W + 2 * p - kw) / stride + 1;
    Tensor<double> out({B, Co, Ho, Wo});
    for (int b = 0; b < B; ++b)
        for (int o = 0; o < Co; ++o)
            for (int y = 0; y < Ho; ++y)
                for (int x = 0; x < Wo; ++x) {
                    double acc = 0;
                    for (int c = 0; c < C; ++c)
                        for (int i = 0; i < kh; ++i)
                            for (int j = 0; j < kw; ++j) {
                                int iy = y * stride + i - p;
                                int ix = x * stride + j - p;
                                if (pad.mode == PadMode::circular) {
                                    iy = ((iy % H) + H) % H;
                                    ix = ((ix % W) + W) % W;
                                } else if (iy < 0 || iy >= H || ix < 0 || ix >= W) {
                                    continue;
                                }
                                acc += input.at(b, c, iy, ix) * kernel.at(o, c, i, j);
                            }
                    out.at(b, o, y, x) = acc;
                }
    return out;
}

// Independent double-precision oracle built directly from the scale
// convolution definition: output slice k sums, over inter-scale offsets j,
// plain correlations of input slice k+j with the kernel synthesized at scale
// index k (zero-embedded to the common extent).
inline Tensor<double> scale_conv_oracle(const Tensor<double>& input, const Tensor<double>& weights,
                                        const ScaleBasis& basis, int stride, PaddingSpec pad) {
    const int B = input.dim(0), S_in = input.dim(1), C = input.dim(2);
    const int H = input.dim(3), W = input.dim(4);
    const int Co = weights.dim(0), I = weights.dim(2), N = weights.dim(3);
    const int S = basis.num_scales();
    const int K = basis.max_grid_size();
    const bool lifting = (S_in == 1);

    std::vector<Tensor<double>> slices;
    for (int k = 0; k < S; ++k) {
        const int Kk = basis.grid_size(k);
        const int off = (K - Kk) / 2;
        Tensor<double> acc;
        const int jmax = lifting ? 1 : I;
        for (int j = 0; j < jmax; ++j) {
            const int src = lifting ? 0 : k + j;
            if (src >= S_in) continue;
            Tensor<double> kernel({Co, C, K, K});
            for (int o = 0; o < Co; ++o)
                for (int c = 0; c < C; ++c)
                    for (int n = 0; n < N; ++n)
                        for (int y = 0; y < Kk; ++y)
                            for (int x = 0; x < Kk; ++x)
                                kernel.at(o, c, y + off, x + off) +=
                                    weights.at(o, c, j, n) * basis.filter(k, n).at(y, x);
            Tensor<double> slice({B, C, H, W});
            for (int b = 0; b < B; ++b)
                for (int c = 0; c < C; ++c)
                    for (int y = 0; y < H; ++y)
                        for (int x = 0; x < W; ++x)
                            slice.at(b, c, y, x) = input.at(b, src, c, y, x);
            auto part = conv2d_oracle(slice, kernel, stride, pad);
            if (!acc.defined()) {
                acc = part;
            } else {
                for (long i = 0; i < acc.size(); ++i) acc[i] += part[i];
            }
        }
        if (!acc.defined()) {
            const int p = pad.mode == PadMode::none ? 0 : pad.amount;
            acc = Tensor<double>({B, Co, (H + 2 * p - K) / stride + 1, (W + 2 * p - K) / stride + 1});
        }
        slices.push_back(acc);
    }

    Tensor<double> out({B, S, Co, slices[0].dim(2), slices[0].dim(3)});
    for (int k = 0; k < S; ++k)
        for (int b = 0; b < B; ++b)
            for (int o = 0; o < Co; ++o)
                for (int y = 0; y < slices[0].dim(2); ++y)
                    for (int x = 0; x < slices[0].dim(3); ++x)
                        out.at(b, k, o, y, x) = slices[static_cast<size_t>(k)].at(b, o, y, x);
    return out;
}

// Central finite differences of a scalar function of the tensor's entries,
// compared against the analytic gradient already stored in the tensor.
// Returns the worst relative error.
inline double fd_check(Tensor<double>& param, const std::function<double()>& loss,
                       double step = 1e-5) {
    double worst = 0;
    auto analytic = param.grad();
    for (long i = 0; i < param.size(); ++i) {
        const double saved = param[i];
        param[i] = saved + step;
        const double lp = loss();
        param[i] = saved - step;
        const double lm = loss();
        param[i] = saved;
        const double fd = (lp - lm) / (2 * step);
        worst = std::max(worst, rel_err(fd, analytic[i]));
    }
    return worst;
}

// Weighted-sum loss seed: fills the output gradient with fixed random weights
// and returns a closure recomputing sum(w * out) from a pure forward pass.
inline std::vector<double> random_seed_weights(long n, uint64_t seed) {
    Rng rng(seed);
    std::vector<double> w(static_cast<size_t>(n));
    for (auto& v : w) v = rng.uniform(-1.0, 1.0);
    return w;
}

template <typename T>
double weighted_sum(const Tensor<T>& t, const std::vector<double>& w) {
    double acc = 0;
    for (long i = 0; i < t.size(); ++i) acc += static_cast<double>(t[i]) * w[static_cast<size_t>(i)];
    return acc;
}

template <typename T>
void seed_output_grad(Tensor<T>& t, const std::vector<double>& w) {
    auto g = t.grad();
    for (long i = 0; i < t.size(); ++i) g[i] = static_cast<T>(w[static_cast<size_t>(i)]);
}

// Smooth band-limited test image: a few broad Gaussian bumps.
template <typename T>
Tensor<T> smooth_image(int H, int W, uint64_t seed, int channels = 1) {
    Rng rng(seed);
    Tensor<T> img(channels == 1 ? Shape{H, W} : Shape{channels, H, W});
    for (int c = 0; c < channels; ++c) {
        struct Bump {
            double cy, cx, s, a;
        };
        std::vector<Bump> bumps;
        for (int i = 0; i < 4; ++i)
            bumps.push_back({rng.uniform(0.25, 0.75) * H, rng.uniform(0.25, 0.75) * W,
                             rng.uniform(std::min(H, W) / 6.0, std::min(H, W) / 3.5),
                             rng.uniform(0.3, 1.0)});
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                double v = 0;
                for (const auto& b : bumps) {
                    double dy = y - b.cy, dx = x - b.cx;
                    v += b.a * std::exp(-(dy * dy + dx * dx) / (2 * b.s * b.s));
                }
                img[(static_cast<long>(c) * H + y) * W + x] = static_cast<T>(v);
            }
    }
    return img;
}

// Interior relative L2 distance after cropping `margin` pixels from each side
// of the trailing two axes.
template <typename T>
double interior_rel_l2(const Tensor<T>& a, const Tensor<T>& b, int margin) {
    const int r = a.rank();
    const int H = a.dim(r - 2), W = a.dim(r - 1);
    long outer = 1;
    for (int i = 0; i + 2 < r; ++i) outer *= a.dim(i);
    double num = 0, den = 0;
    for (long n = 0; n < outer; ++n)
        for (int y = margin; y < H - margin; ++y)
            for (int x = margin; x < W - margin; ++x) {
                double va = a[(n * H + y) * W + x];
                double vb = b[(n * H + y) * W + x];
                num += (va - vb) * (va - vb);
                den += va * va;
            }
    return std::sqrt(num) / std::max(1e-30, std::sqrt(den));
}

}  // namespace testutil
