// Scale-equivariant layer set: parametric scale-convolution over a fixed
// Hermite-Gaussian dictionary, the fast 1x1 scale-convolution, scale-pooling
// and the scale-axis plumbing they need.
//
// Feature maps carry axes (batch, scale, channel, height, width). Scale index
// k corresponds to sigma_step^k. A scale-convolution weight tensor has axes
// (out_channels, in_channels, inter_scale, basis_function); the kernel applied
// at output scale k to input slice k+j is synthesized from the basis sampled
// at sigma_k. Contributions referencing scale indices beyond the top of the
// axis are dropped.

#pragma once

#include "setrack/basis.hpp"
#include "setrack/ops.hpp"
#include "setrack/tensor.hpp"

namespace setrack {

// Copies input scale slices [k_start, k_start+count) into the channel axis:
// [B,S,C,H,W] -> [B,count*C,H,W]. Slices past the top of the scale axis stay
// zero.
template <typename T>
Tensor<T> concat_scales_channels(const Tensor<T>& x, int k_start, int count,
                                 Tape<T>* tape = nullptr) {
    if (x.rank() != 5) throw std::invalid_argument("concat_scales_channels: expects rank-5 input");
    const int B = x.dim(0), S = x.dim(1), C = x.dim(2), H = x.dim(3), W = x.dim(4);
    Tensor<T> out({B, count * C, H, W});
    const long plane = static_cast<long>(C) * H * W;
    for (int b = 0; b < B; ++b)
        for (int j = 0; j < count; ++j) {
            const int k = k_start + j;
            if (k < 0 || k >= S) continue;
            const T* src = x.data() + (static_cast<long>(b) * S + k) * plane;
            T* dst = out.data() + (static_cast<long>(b) * count + j) * plane;
            std::copy(src, src + plane, dst);
        }
    if (tape) {
        Tensor<T> x_t = x, out_t = out;
        x_t.ensure_grad();
        out_t.ensure_grad();
        tape->record([x_t, out_t, k_start, count]() mutable {
            const int B = x_t.dim(0), S = x_t.dim(1), C = x_t.dim(2), H = x_t.dim(3), W = x_t.dim(4);
            const long plane = static_cast<long>(C) * H * W;
            auto gx = x_t.grad();
            auto go = out_t.grad();
            for (int b = 0; b < B; ++b)
                for (int j = 0; j < count; ++j) {
                    const int k = k_start + j;
                    if (k < 0 || k >= S) continue;
                    T* dst = gx.data() + (static_cast<long>(b) * S + k) * plane;
                    const T* src = go.data() + (static_cast<long>(b) * count + j) * plane;
                    for (long i = 0; i < plane; ++i) dst[i] += src[i];
                }
        });
    }
    return out;
}

// Stacks per-scale [B,C,H,W] maps into [B,S,C,H,W].
template <typename T>
Tensor<T> stack_scales(const std::vector<Tensor<T>>& slices, Tape<T>* tape = nullptr) {
    if (slices.empty()) throw std::invalid_argument("stack_scales: empty slice list");
    const int S = static_cast<int>(slices.size());
    const int B = slices[0].dim(0), C = slices[0].dim(1), H = slices[0].dim(2), W = slices[0].dim(3);
    Tensor<T> out({B, S, C, H, W});
    const long plane = static_cast<long>(C) * H * W;
    for (int k = 0; k < S; ++k) {
        if (slices[static_cast<size_t>(k)].shape() != slices[0].shape())
            throw std::invalid_argument("stack_scales: slice shape mismatch");
        for (int b = 0; b < B; ++b) {
            const T* src = slices[static_cast<size_t>(k)].data() + static_cast<long>(b) * plane;
            T* dst = out.data() + (static_cast<long>(b) * S + k) * plane;
            std::copy(src, src + plane, dst);
        }
    }
    if (tape) {
        std::vector<Tensor<T>> slices_t = slices;
        for (auto& s : slices_t) s.ensure_grad();
        Tensor<T> out_t = out;
        out_t.ensure_grad();
        tape->record([slices_t, out_t]() mutable {
            const int S = static_cast<int>(slices_t.size());
            const int B = out_t.dim(0), C = out_t.dim(2), H = out_t.dim(3), W = out_t.dim(4);
            const long plane = static_cast<long>(C) * H * W;
            auto go = out_t.grad();
            for (int k = 0; k < S; ++k) {
                auto gs = slices_t[static_cast<size_t>(k)].grad();
                for (int b = 0; b < B; ++b) {
                    const T* src = go.data() + (static_cast<long>(b) * S + k) * plane;
                    T* dst = gs.data() + static_cast<long>(b) * plane;
                    for (long i = 0; i < plane; ++i) dst[i] += src[i];
                }
            }
        });
    }
    return out;
}

// Kernels synthesized from weights [Co,Ci,I,N] at scale index k, on the native
// grid of that scale: [Co,Ci,I,K_k,K_k]. Pure inspection path, no gradient.
template <typename T>
Tensor<T> synthesize_kernels(const Tensor<T>& weights, const ScaleBasis& basis, int k) {
    if (weights.rank() != 4) throw std::invalid_argument("synthesize_kernels: weights must be rank 4");
    check_finite(weights, "synthesize_kernels");
    const int Co = weights.dim(0), Ci = weights.dim(1), I = weights.dim(2), N = weights.dim(3);
    if (N != basis.num_functions())
        throw std::invalid_argument("synthesize_kernels: weight basis axis " + std::to_string(N) +
                                    " vs basis functions " + std::to_string(basis.num_functions()));
    const int K = basis.grid_size(k);
    Tensor<T> out({Co, Ci, I, K, K});
    for (int o = 0; o < Co; ++o)
        for (int c = 0; c < Ci; ++c)
            for (int j = 0; j < I; ++j)
                for (int n = 0; n < N; ++n) {
                    const double w = weights.at(o, c, j, n);
                    if (w == 0.0) continue;
                    const Tensor<double>& psi = basis.filter(k, n);
                    for (int p = 0; p < K * K; ++p) {
                        long idx = (((static_cast<long>(o) * Ci + c) * I + j) * K * K) + p;
                        out[idx] += static_cast<T>(w * psi[p]);
                    }
                }
    return out;
}

namespace detail {

// Synthesis for the convolution path: blocks j of a [Co, count*Ci, K, K]
// kernel, zero-embedded from the native grid of scale k to extent K. Records
// the linear backward onto the weights.
template <typename T>
Tensor<T> synth_embedded(const Tensor<T>& weights, std::shared_ptr<const ScaleBasis> basis,
                         int k, int count, int K, Tape<T>* tape) {
    const int Co = weights.dim(0), Ci = weights.dim(1), N = weights.dim(3);
    const int Kk = basis->grid_size(k);
    const int off = (K - Kk) / 2;
    Tensor<T> kernel({Co, count * Ci, K, K});
    for (int o = 0; o < Co; ++o)
        for (int j = 0; j < count; ++j)
            for (int c = 0; c < Ci; ++c) {
                T* dst = kernel.data() +
                         ((static_cast<long>(o) * count + j) * Ci + c) * static_cast<long>(K) * K;
                for (int n = 0; n < N; ++n) {
                    const double w = weights.at(o, c, j, n);
                    if (w == 0.0) continue;
                    const Tensor<double>& psi = basis->filter(k, n);
                    for (int y = 0; y < Kk; ++y)
                        for (int x = 0; x < Kk; ++x)
                            dst[static_cast<long>(y + off) * K + (x + off)] +=
                                static_cast<T>(w * psi.at(y, x));
                }
            }
    if (tape) {
        Tensor<T> w_t = weights, k_t = kernel;
        w_t.ensure_grad();
        k_t.ensure_grad();
        tape->record([w_t, k_t, basis, k, count, K]() mutable {
            const int Co = w_t.dim(0), Ci = w_t.dim(1), N = w_t.dim(3);
            const int Kk = basis->grid_size(k);
            const int off = (K - Kk) / 2;
            auto gw = w_t.grad();
            auto gk = k_t.grad();
            for (int o = 0; o < Co; ++o)
                for (int j = 0; j < count; ++j)
                    for (int c = 0; c < Ci; ++c) {
                        const T* gsrc = gk.data() + ((static_cast<long>(o) * count + j) * Ci + c) *
                                                        static_cast<long>(K) * K;
                        for (int n = 0; n < N; ++n) {
                            const Tensor<double>& psi = basis->filter(k, n);
                            double acc = 0;
                            for (int y = 0; y < Kk; ++y)
                                for (int x = 0; x < Kk; ++x)
                                    acc += psi.at(y, x) *
                                           gsrc[static_cast<long>(y + off) * K + (x + off)];
                            gw[w_t.offset(o, c, j, n)] += static_cast<T>(acc);
                        }
                    }
        });
    }
    return kernel;
}

}  // namespace detail

// Scale-convolution. Input [B,S_in,C,H,W] with S_in == 1 (lifting) or
// S_in == num_scales; output [B,num_scales,Co,H',W']. Spatial dims follow
// conv2d rules with kernels at the common extent (the largest scale grid).
template <typename T>
Tensor<T> scale_conv(const Tensor<T>& input, const Tensor<T>& weights,
                     std::shared_ptr<const ScaleBasis> basis, int stride = 1,
                     PaddingSpec pad = no_padding(), Tape<T>* tape = nullptr) {
    if (input.rank() != 5) throw std::invalid_argument("scale_conv: expects rank-5 input");
    if (weights.rank() != 4) throw std::invalid_argument("scale_conv: weights must be rank 4");
    const int S_in = input.dim(1), C = input.dim(2);
    const int S = basis->num_scales();
    const int I = weights.dim(2);
    if (weights.dim(1) != C)
        throw std::invalid_argument("scale_conv: channel mismatch");
    if (weights.dim(3) != basis->num_functions())
        throw std::invalid_argument("scale_conv: weight/basis function count mismatch");
    if (I > S) throw std::invalid_argument("scale_conv: inter-scale extent exceeds scale count");
    if (S_in != 1 && S_in != S)
        throw std::invalid_argument("scale_conv: input scale axis must be 1 or num_scales");
    check_finite(input, "scale_conv");
    check_finite(weights, "scale_conv");

    const int K = basis->max_grid_size();
    const bool lifting = (S_in == 1);
    const int count = lifting ? 1 : I;

    std::vector<Tensor<T>> slices;
    slices.reserve(static_cast<size_t>(S));
    for (int k = 0; k < S; ++k) {
        Tensor<T> kernel = detail::synth_embedded(weights, basis, k, count, K, tape);
        Tensor<T> gathered = lifting ? concat_scales_channels(input, 0, 1, tape)
                                     : concat_scales_channels(input, k, count, tape);
        slices.push_back(conv2d(gathered, kernel, stride, pad, tape));
    }
    return stack_scales(slices, tape);
}

// 1x1 scale-convolution: a linear combination of channels and neighboring
// scale slices, no basis involved. weights [Co,Ci,I].
template <typename T>
Tensor<T> fast_scale_conv_1x1(const Tensor<T>& input, const Tensor<T>& weights,
                              Tape<T>* tape = nullptr) {
    if (input.rank() != 5) throw std::invalid_argument("fast_scale_conv_1x1: expects rank-5 input");
    if (weights.rank() != 3) throw std::invalid_argument("fast_scale_conv_1x1: weights must be rank 3");
    const int B = input.dim(0), S = input.dim(1), C = input.dim(2), H = input.dim(3), W = input.dim(4);
    const int Co = weights.dim(0), I = weights.dim(2);
    if (weights.dim(1) != C) throw std::invalid_argument("fast_scale_conv_1x1: channel mismatch");
    if (I > S) throw std::invalid_argument("fast_scale_conv_1x1: inter-scale extent exceeds scale count");

    Tensor<T> out({B, S, Co, H, W});
    const long hw = static_cast<long>(H) * W;
    for (int b = 0; b < B; ++b)
        for (int k = 0; k < S; ++k)
            for (int o = 0; o < Co; ++o) {
                T* op = out.data() + ((static_cast<long>(b) * S + k) * Co + o) * hw;
                for (int j = 0; j < I && k + j < S; ++j)
                    for (int c = 0; c < C; ++c) {
                        const T w = weights.at(o, c, j);
                        if (w == T(0)) continue;
                        const T* ip = input.data() + ((static_cast<long>(b) * S + k + j) * C + c) * hw;
                        for (long i = 0; i < hw; ++i) op[i] += w * ip[i];
                    }
            }

    if (tape) {
        Tensor<T> in_t = input, w_t = weights, out_t = out;
        in_t.ensure_grad();
        w_t.ensure_grad();
        out_t.ensure_grad();
        tape->record([in_t, w_t, out_t]() mutable {
            const int B = in_t.dim(0), S = in_t.dim(1), C = in_t.dim(2);
            const int H = in_t.dim(3), W = in_t.dim(4);
            const int Co = w_t.dim(0), I = w_t.dim(2);
            const long hw = static_cast<long>(H) * W;
            auto gi = in_t.grad();
            auto gw = w_t.grad();
            auto go = out_t.grad();
            for (int b = 0; b < B; ++b)
                for (int k = 0; k < S; ++k)
                    for (int o = 0; o < Co; ++o) {
                        const T* gop = go.data() + ((static_cast<long>(b) * S + k) * Co + o) * hw;
                        for (int j = 0; j < I && k + j < S; ++j)
                            for (int c = 0; c < C; ++c) {
                                const T w = w_t.at(o, c, j);
                                const T* ip =
                                    in_t.data() + ((static_cast<long>(b) * S + k + j) * C + c) * hw;
                                T* gip = gi.data() + ((static_cast<long>(b) * S + k + j) * C + c) * hw;
                                double acc = 0;
                                for (long i = 0; i < hw; ++i) {
                                    acc += gop[i] * ip[i];
                                    gip[i] += gop[i] * w;
                                }
                                gw[w_t.offset(o, c, j)] += static_cast<T>(acc);
                            }
                    }
        });
    }
    return out;
}

// Reference path for the 1x1 case: the generic scale-convolution machinery
// run with 1x1 kernels (kernel value = weight * the single constant basis
// function). Used as the equality oracle and the benchmark baseline.
template <typename T>
Tensor<T> scale_conv_1x1_reference(const Tensor<T>& input, const Tensor<T>& weights,
                                   Tape<T>* tape = nullptr) {
    if (input.rank() != 5) throw std::invalid_argument("scale_conv_1x1_reference: expects rank-5 input");
    const int S = input.dim(1), C = input.dim(2);
    const int Co = weights.dim(0), I = weights.dim(2);
    if (weights.dim(1) != C) throw std::invalid_argument("scale_conv_1x1_reference: channel mismatch");
    if (I > S) throw std::invalid_argument("scale_conv_1x1_reference: inter-scale extent exceeds scales");

    std::vector<Tensor<T>> slices;
    slices.reserve(static_cast<size_t>(S));
    for (int k = 0; k < S; ++k) {
        Tensor<T> kernel({Co, I * C, 1, 1});
        for (int o = 0; o < Co; ++o)
            for (int j = 0; j < I; ++j)
                for (int c = 0; c < C; ++c)
                    kernel.at(o, j * C + c, 0, 0) = weights.at(o, c, j);
        Tensor<T> gathered = concat_scales_channels(input, k, I, tape);
        slices.push_back(conv2d(gathered, kernel, 1, no_padding(), tape));
    }
    return stack_scales(slices, tape);
}

// Global max pooling along the scale axis: [B,S,C,H,W] -> [B,C,H,W].
// Gradient routes to the argmax slice; ties go to the lowest scale index.
template <typename T>
Tensor<T> scale_pool(const Tensor<T>& input, Tape<T>* tape = nullptr) {
    if (input.rank() != 5) throw std::invalid_argument("scale_pool: expects rank-5 input");
    return max_over_axis(input, 1, tape);
}

// Inserts a scale axis of length 1: [B,C,H,W] -> [B,1,C,H,W].
template <typename T>
Tensor<T> lift(const Tensor<T>& image) {
    if (image.rank() != 4) throw std::invalid_argument("lift: expects rank-4 input");
    return image.reshaped({image.dim(0), 1, image.dim(1), image.dim(2), image.dim(3)});
}

}  // namespace setrack
