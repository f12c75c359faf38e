// Numerical primitives: spatial padding, conv2d (cross-correlation convention),
// elementwise ops, batch normalization, axis reductions and the Siamese
// pairwise correlation. Each differentiable op optionally records its backward
// step on a Tape.

#pragma once

#include <cmath>
#include <limits>

#include "setrack/tensor.hpp"

namespace setrack {

enum class PadMode { none, zero, circular };

struct PaddingSpec {
    PadMode mode = PadMode::none;
    int amount = 0;
};

inline PaddingSpec no_padding() { return {PadMode::none, 0}; }
inline PaddingSpec zero_padding(int p) { return {PadMode::zero, p}; }
inline PaddingSpec circular_padding(int p) { return {PadMode::circular, p}; }

// Pads the trailing two axes. Zero mode fills with zeros, circular wraps.
template <typename T>
Tensor<T> apply_padding(const Tensor<T>& input, PaddingSpec spec, Tape<T>* tape = nullptr) {
    if (input.rank() < 2) throw std::invalid_argument("apply_padding: tensor rank < 2");
    if (spec.amount < 0) throw std::invalid_argument("apply_padding: negative amount");
    if (spec.mode == PadMode::none || spec.amount == 0) return input;

    const int H = input.dim(input.rank() - 2);
    const int W = input.dim(input.rank() - 1);
    const int p = spec.amount;
    if (spec.mode == PadMode::circular && (p > H || p > W))
        throw std::invalid_argument("apply_padding: circular amount exceeds spatial size");

    Shape out_shape = input.shape();
    out_shape[out_shape.size() - 2] = H + 2 * p;
    out_shape[out_shape.size() - 1] = W + 2 * p;
    Tensor<T> out(out_shape);

    const long outer = detail::outer_extent(input);
    const int Hp = H + 2 * p, Wp = W + 2 * p;
    const T* in = input.data();
    T* o = out.data();
    for (long n = 0; n < outer; ++n) {
        const T* ip = in + n * H * W;
        T* op = o + n * static_cast<long>(Hp) * Wp;
        for (int y = 0; y < Hp; ++y) {
            int sy = y - p;
            if (spec.mode == PadMode::circular) sy = detail::wrap_index(sy, H);
            for (int x = 0; x < Wp; ++x) {
                int sx = x - p;
                if (spec.mode == PadMode::circular) sx = detail::wrap_index(sx, W);
                if (sy >= 0 && sy < H && sx >= 0 && sx < W)
                    op[static_cast<long>(y) * Wp + x] = ip[static_cast<long>(sy) * W + sx];
            }
        }
    }

    if (tape) {
        Tensor<T> in_t = input;
        Tensor<T> out_t = out;
        in_t.ensure_grad();
        out_t.ensure_grad();
        tape->record([in_t, out_t, spec, H, W, p, Hp, Wp]() mutable {
            const long outer = detail::outer_extent(in_t);
            auto gi = in_t.grad();
            auto go = out_t.grad();
            for (long n = 0; n < outer; ++n) {
                T* gip = gi.data() + n * H * W;
                const T* gop = go.data() + n * static_cast<long>(Hp) * Wp;
                for (int y = 0; y < Hp; ++y) {
                    int sy = y - p;
                    if (spec.mode == PadMode::circular) sy = detail::wrap_index(sy, H);
                    if (sy < 0 || sy >= H) continue;
                    for (int x = 0; x < Wp; ++x) {
                        int sx = x - p;
                        if (spec.mode == PadMode::circular) sx = detail::wrap_index(sx, W);
                        if (sx < 0 || sx >= W) continue;
                        gip[static_cast<long>(sy) * W + sx] += gop[static_cast<long>(y) * Wp + x];
                    }
                }
            }
        });
    }
    return out;
}

namespace detail {

// Valid cross-correlation on an already padded input.
template <typename T>
Tensor<T> conv2d_core(const Tensor<T>& input, const Tensor<T>& kernel, int stride,
                      Tape<T>* tape) {
    const int B = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
    const int Co = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
    if (kernel.dim(1) != C)
        throw std::invalid_argument("conv2d: input channels " + std::to_string(C) +
                                    " vs kernel channels " + std::to_string(kernel.dim(1)));
    if (H < kh || W < kw) throw std::invalid_argument("conv2d: kernel larger than input");
    const int Ho = (H - kh) / stride + 1;
    const int Wo = (W - kw) / stride + 1;

    Tensor<T> out({B, Co, Ho, Wo});
    const T* in = input.data();
    const T* k = kernel.data();
    T* o = out.data();
    for (int b = 0; b < B; ++b)
        for (int oc = 0; oc < Co; ++oc) {
            T* op = o + ((static_cast<long>(b) * Co + oc) * Ho) * Wo;
            for (int c = 0; c < C; ++c) {
                const T* ip = in + ((static_cast<long>(b) * C + c) * H) * W;
                const T* kp = k + ((static_cast<long>(oc) * C + c) * kh) * kw;
                for (int i = 0; i < kh; ++i)
                    for (int j = 0; j < kw; ++j) {
                        const T kv = kp[i * kw + j];
                        if (kv == T(0)) continue;
                        for (int y = 0; y < Ho; ++y) {
                            const T* row = ip + static_cast<long>(y * stride + i) * W + j;
                            T* orow = op + static_cast<long>(y) * Wo;
                            for (int x = 0; x < Wo; ++x) orow[x] += kv * row[x * stride];
                        }
                    }
            }
        }

    if (tape) {
        Tensor<T> in_t = input, k_t = kernel, out_t = out;
        in_t.ensure_grad();
        k_t.ensure_grad();
        out_t.ensure_grad();
        tape->record([in_t, k_t, out_t, stride]() mutable {
            const int B = in_t.dim(0), C = in_t.dim(1), H = in_t.dim(2), W = in_t.dim(3);
            const int Co = k_t.dim(0), kh = k_t.dim(2), kw = k_t.dim(3);
            const int Ho = out_t.dim(2), Wo = out_t.dim(3);
            auto gi = in_t.grad();
            auto gk = k_t.grad();
            auto go = out_t.grad();
            const T* in = in_t.data();
            const T* k = k_t.data();
            for (int b = 0; b < B; ++b)
                for (int oc = 0; oc < Co; ++oc) {
                    const T* gop = go.data() + ((static_cast<long>(b) * Co + oc) * Ho) * Wo;
                    for (int c = 0; c < C; ++c) {
                        const T* ip = in + ((static_cast<long>(b) * C + c) * H) * W;
                        T* gip = gi.data() + ((static_cast<long>(b) * C + c) * H) * W;
                        const T* kp = k + ((static_cast<long>(oc) * C + c) * kh) * kw;
                        T* gkp = gk.data() + ((static_cast<long>(oc) * C + c) * kh) * kw;
                        for (int i = 0; i < kh; ++i)
                            for (int j = 0; j < kw; ++j) {
                                const T kv = kp[i * kw + j];
                                T acc = T(0);
                                for (int y = 0; y < Ho; ++y) {
                                    const T* grow = gop + static_cast<long>(y) * Wo;
                                    const T* irow = ip + static_cast<long>(y * stride + i) * W + j;
                                    T* girow = gip + static_cast<long>(y * stride + i) * W + j;
                                    for (int x = 0; x < Wo; ++x) {
                                        const T g = grow[x];
                                        acc += g * irow[x * stride];
                                        girow[x * stride] += g * kv;
                                    }
                                }
                                gkp[i * kw + j] += acc;
                            }
                    }
                }
        });
    }
    return out;
}

}  // namespace detail

// input [B,C,H,W] (cross-)correlated with kernel [Co,C,kh,kw].
// Output height is floor((H + 2p - kh)/stride) + 1, analogously for width.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, int stride = 1,
                 PaddingSpec pad = no_padding(), Tape<T>* tape = nullptr) {
    if (input.rank() != 4 || kernel.rank() != 4)
        throw std::invalid_argument("conv2d: expects rank-4 input and kernel");
    if (kernel.dim(2) % 2 == 0 || kernel.dim(3) % 2 == 0)
        throw std::invalid_argument("conv2d: kernel size must be odd");
    if (stride < 1) throw std::invalid_argument("conv2d: stride must be positive");
    check_finite(input, "conv2d");
    check_finite(kernel, "conv2d");
    Tensor<T> padded = apply_padding(input, pad, tape);
    return detail::conv2d_core(padded, kernel, stride, tape);
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x, Tape<T>* tape = nullptr) {
    Tensor<T> out(x.shape());
    for (long i = 0; i < x.size(); ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
    if (tape) {
        Tensor<T> x_t = x, out_t = out;
        x_t.ensure_grad();
        out_t.ensure_grad();
        tape->record([x_t, out_t]() mutable {
            auto gx = x_t.grad();
            auto go = out_t.grad();
            for (long i = 0; i < x_t.size(); ++i)
                if (x_t[i] > T(0)) gx[i] += go[i];
        });
    }
    return out;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b, Tape<T>* tape = nullptr) {
    if (a.shape() != b.shape()) throw std::invalid_argument("add: shape mismatch");
    Tensor<T> out(a.shape());
    for (long i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
    if (tape) {
        Tensor<T> a_t = a, b_t = b, out_t = out;
        a_t.ensure_grad();
        b_t.ensure_grad();
        out_t.ensure_grad();
        tape->record([a_t, b_t, out_t]() mutable {
            auto ga = a_t.grad();
            auto gb = b_t.grad();
            auto go = out_t.grad();
            for (long i = 0; i < a_t.size(); ++i) {
                ga[i] += go[i];
                gb[i] += go[i];
            }
        });
    }
    return out;
}

// Max over one axis; ties resolve to the lowest index so gradients are
// deterministic.
template <typename T>
Tensor<T> max_over_axis(const Tensor<T>& x, int axis, Tape<T>* tape = nullptr) {
    if (axis < 0 || axis >= x.rank()) throw std::invalid_argument("max_over_axis: axis out of range");
    const int n = x.dim(axis);
    long before = 1, after = 1;
    for (int a = 0; a < axis; ++a) before *= x.dim(a);
    for (int a = axis + 1; a < x.rank(); ++a) after *= x.dim(a);

    Shape out_shape;
    for (int a = 0; a < x.rank(); ++a)
        if (a != axis) out_shape.push_back(x.dim(a));
    if (out_shape.empty()) out_shape.push_back(1);

    Tensor<T> out(out_shape);
    auto arg = std::make_shared<std::vector<int>>(static_cast<size_t>(before * after), 0);
    for (long b = 0; b < before; ++b)
        for (long a = 0; a < after; ++a) {
            T best = x[(b * n) * after + a];
            int bi = 0;
            for (int k = 1; k < n; ++k) {
                T v = x[(b * n + k) * after + a];
                if (v > best) {
                    best = v;
                    bi = k;
                }
            }
            out[b * after + a] = best;
            (*arg)[static_cast<size_t>(b * after + a)] = bi;
        }

    if (tape) {
        Tensor<T> x_t = x, out_t = out;
        x_t.ensure_grad();
        out_t.ensure_grad();
        tape->record([x_t, out_t, arg, before, after, n]() mutable {
            auto gx = x_t.grad();
            auto go = out_t.grad();
            for (long b = 0; b < before; ++b)
                for (long a = 0; a < after; ++a) {
                    int bi = (*arg)[static_cast<size_t>(b * after + a)];
                    gx[(b * n + bi) * after + a] += go[b * after + a];
                }
        });
    }
    return out;
}

template <typename T>
long argmax_flat(const Tensor<T>& x) {
    long best = 0;
    for (long i = 1; i < x.size(); ++i)
        if (x[i] > x[best]) best = i;
    return best;
}

inline std::vector<int> unravel(const Shape& shape, long flat) {
    std::vector<int> idx(shape.size());
    for (int a = static_cast<int>(shape.size()) - 1; a >= 0; --a) {
        idx[static_cast<size_t>(a)] = static_cast<int>(flat % shape[static_cast<size_t>(a)]);
        flat /= shape[static_cast<size_t>(a)];
    }
    return idx;
}

// Batch normalization over the channel axis (axis 1 for [B,C,H,W],
// axis 2 for [B,S,C,H,W]); scale slices share statistics with the batch.
template <typename T>
struct BatchNorm {
    Tensor<T> gamma, beta;
    Tensor<T> running_mean, running_var;
    double momentum = 0.1;
    double eps = 1e-5;

    explicit BatchNorm(int channels = 0) {
        if (channels > 0) {
            gamma = Tensor<T>({channels}, T(1));
            beta = Tensor<T>({channels}, T(0));
            running_mean = Tensor<T>({channels}, T(0));
            running_var = Tensor<T>({channels}, T(1));
        }
    }

    int channels() const { return gamma.defined() ? gamma.dim(0) : 0; }

    Tensor<T> forward(const Tensor<T>& x, bool training, Tape<T>* tape = nullptr) {
        const int r = x.rank();
        if (r != 4 && r != 5) throw std::invalid_argument("batchnorm: expects rank 4 or 5");
        const int axis = (r == 4) ? 1 : 2;
        const int C = x.dim(axis);
        if (C != channels()) throw std::invalid_argument("batchnorm: channel mismatch");
        long before = 1, after = 1;
        for (int a = 0; a < axis; ++a) before *= x.dim(a);
        for (int a = axis + 1; a < r; ++a) after *= x.dim(a);
        const long per_channel = before * after;

        std::vector<double> mean(static_cast<size_t>(C)), var(static_cast<size_t>(C));
        if (training) {
            for (int c = 0; c < C; ++c) {
                double m = 0;
                for (long b = 0; b < before; ++b)
                    for (long a = 0; a < after; ++a) m += x[(b * C + c) * after + a];
                m /= static_cast<double>(per_channel);
                double v = 0;
                for (long b = 0; b < before; ++b)
                    for (long a = 0; a < after; ++a) {
                        double d = x[(b * C + c) * after + a] - m;
                        v += d * d;
                    }
                v /= static_cast<double>(per_channel);
                mean[static_cast<size_t>(c)] = m;
                var[static_cast<size_t>(c)] = v;
                double unbiased = per_channel > 1 ? v * per_channel / (per_channel - 1) : v;
                running_mean[c] = static_cast<T>((1.0 - momentum) * running_mean[c] + momentum * m);
                running_var[c] = static_cast<T>((1.0 - momentum) * running_var[c] + momentum * unbiased);
            }
        } else {
            for (int c = 0; c < C; ++c) {
                mean[static_cast<size_t>(c)] = running_mean[c];
                var[static_cast<size_t>(c)] = running_var[c];
            }
        }

        Tensor<T> out(x.shape());
        std::vector<double> inv_std(static_cast<size_t>(C));
        for (int c = 0; c < C; ++c)
            inv_std[static_cast<size_t>(c)] = 1.0 / std::sqrt(var[static_cast<size_t>(c)] + eps);
        for (int c = 0; c < C; ++c) {
            const double m = mean[static_cast<size_t>(c)];
            const double is = inv_std[static_cast<size_t>(c)];
            const double g = gamma[c], bt = beta[c];
            for (long b = 0; b < before; ++b)
                for (long a = 0; a < after; ++a) {
                    long i = (b * C + c) * after + a;
                    out[i] = static_cast<T>((x[i] - m) * is * g + bt);
                }
        }

        if (tape) {
            Tensor<T> x_t = x, out_t = out, gamma_t = gamma, beta_t = beta;
            x_t.ensure_grad();
            out_t.ensure_grad();
            gamma_t.ensure_grad();
            beta_t.ensure_grad();
            auto mean_s = std::make_shared<std::vector<double>>(std::move(mean));
            auto istd_s = std::make_shared<std::vector<double>>(std::move(inv_std));
            tape->record([x_t, out_t, gamma_t, beta_t, mean_s, istd_s, training, before, after,
                          C, per_channel]() mutable {
                auto gx = x_t.grad();
                auto go = out_t.grad();
                auto gg = gamma_t.grad();
                auto gb = beta_t.grad();
                for (int c = 0; c < C; ++c) {
                    const double m = (*mean_s)[static_cast<size_t>(c)];
                    const double is = (*istd_s)[static_cast<size_t>(c)];
                    const double g = gamma_t[c];
                    double sum_g = 0, sum_gx = 0;
                    for (long b = 0; b < before; ++b)
                        for (long a = 0; a < after; ++a) {
                            long i = (b * C + c) * after + a;
                            double xh = (x_t[i] - m) * is;
                            sum_g += go[i];
                            sum_gx += go[i] * xh;
                        }
                    gg[c] += static_cast<T>(sum_gx);
                    gb[c] += static_cast<T>(sum_g);
                    if (training) {
                        const double inv_n = 1.0 / static_cast<double>(per_channel);
                        for (long b = 0; b < before; ++b)
                            for (long a = 0; a < after; ++a) {
                                long i = (b * C + c) * after + a;
                                double xh = (x_t[i] - m) * is;
                                gx[i] += static_cast<T>(g * is *
                                                        (go[i] - inv_n * sum_g - xh * inv_n * sum_gx));
                            }
                    } else {
                        for (long b = 0; b < before; ++b)
                            for (long a = 0; a < after; ++a) {
                                long i = (b * C + c) * after + a;
                                gx[i] += static_cast<T>(go[i] * g * is);
                            }
                    }
                }
            });
        }
        return out;
    }
};

// Valid correlation of each search embedding with its own template embedding,
// summing over channels: the Siamese connection. search [B,C,H,W],
// templ [B,C,h,w] -> [B,1,H-h+1,W-w+1].
template <typename T>
Tensor<T> xcorr_pairwise(const Tensor<T>& search, const Tensor<T>& templ, Tape<T>* tape = nullptr) {
    if (search.rank() != 4 || templ.rank() != 4)
        throw std::invalid_argument("xcorr_pairwise: expects rank-4 tensors");
    if (search.dim(0) != templ.dim(0) || search.dim(1) != templ.dim(1))
        throw std::invalid_argument("xcorr_pairwise: batch/channel mismatch");
    const int B = search.dim(0), C = search.dim(1);
    const int H = search.dim(2), W = search.dim(3);
    const int h = templ.dim(2), w = templ.dim(3);
    if (h > H || w > W) throw std::invalid_argument("xcorr_pairwise: template larger than search");
    const int Ho = H - h + 1, Wo = W - w + 1;

    Tensor<T> out({B, 1, Ho, Wo});
    for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c) {
            const T* sp = search.data() + ((static_cast<long>(b) * C + c) * H) * W;
            const T* tp = templ.data() + ((static_cast<long>(b) * C + c) * h) * w;
            T* op = out.data() + (static_cast<long>(b) * Ho) * Wo;
            for (int i = 0; i < h; ++i)
                for (int j = 0; j < w; ++j) {
                    const T kv = tp[i * w + j];
                    for (int y = 0; y < Ho; ++y) {
                        const T* row = sp + static_cast<long>(y + i) * W + j;
                        T* orow = op + static_cast<long>(y) * Wo;
                        for (int x = 0; x < Wo; ++x) orow[x] += kv * row[x];
                    }
                }
        }

    if (tape) {
        Tensor<T> s_t = search, t_t = templ, out_t = out;
        s_t.ensure_grad();
        t_t.ensure_grad();
        out_t.ensure_grad();
        tape->record([s_t, t_t, out_t]() mutable {
            const int B = s_t.dim(0), C = s_t.dim(1), H = s_t.dim(2), W = s_t.dim(3);
            const int h = t_t.dim(2), w = t_t.dim(3);
            const int Ho = out_t.dim(2), Wo = out_t.dim(3);
            auto gs = s_t.grad();
            auto gt = t_t.grad();
            auto go = out_t.grad();
            for (int b = 0; b < B; ++b)
                for (int c = 0; c < C; ++c) {
                    const T* sp = s_t.data() + ((static_cast<long>(b) * C + c) * H) * W;
                    const T* tp = t_t.data() + ((static_cast<long>(b) * C + c) * h) * w;
                    T* gsp = gs.data() + ((static_cast<long>(b) * C + c) * H) * W;
                    T* gtp = gt.data() + ((static_cast<long>(b) * C + c) * h) * w;
                    const T* gop = go.data() + (static_cast<long>(b) * Ho) * Wo;
                    for (int i = 0; i < h; ++i)
                        for (int j = 0; j < w; ++j) {
                            const T kv = tp[i * w + j];
                            T acc = T(0);
                            for (int y = 0; y < Ho; ++y)
                                for (int x = 0; x < Wo; ++x) {
                                    const T g = gop[static_cast<long>(y) * Wo + x];
                                    acc += g * sp[static_cast<long>(y + i) * W + j + x];
                                    gsp[static_cast<long>(y + i) * W + j + x] += g * kv;
                                }
                            gtp[i * w + j] += acc;
                        }
                }
        });
    }
    return out;
}

// out = c*x for a fixed constant.
template <typename T>
Tensor<T> mul_scalar(const Tensor<T>& x, double c, Tape<T>* tape = nullptr) {
    Tensor<T> out(x.shape());
    for (long i = 0; i < x.size(); ++i) out[i] = static_cast<T>(x[i] * c);
    if (tape) {
        Tensor<T> x_t = x, out_t = out;
        x_t.ensure_grad();
        out_t.ensure_grad();
        tape->record([x_t, out_t, c]() mutable {
            auto gx = x_t.grad();
            auto go = out_t.grad();
            for (long i = 0; i < x_t.size(); ++i) gx[i] += static_cast<T>(go[i] * c);
        });
    }
    return out;
}

// out = scale*x + shift with trainable scalars; keeps correlation logits in a
// range where the logistic loss does not saturate.
template <typename T>
Tensor<T> scalar_affine(const Tensor<T>& x, Tensor<T>& scale, Tensor<T>& shift,
                        Tape<T>* tape = nullptr) {
    if (scale.size() != 1 || shift.size() != 1)
        throw std::invalid_argument("scalar_affine: scale/shift must be single-element");
    Tensor<T> out(x.shape());
    const T a = scale[0], b = shift[0];
    for (long i = 0; i < x.size(); ++i) out[i] = a * x[i] + b;
    if (tape) {
        Tensor<T> x_t = x, a_t = scale, b_t = shift, out_t = out;
        x_t.ensure_grad();
        a_t.ensure_grad();
        b_t.ensure_grad();
        out_t.ensure_grad();
        tape->record([x_t, a_t, b_t, out_t]() mutable {
            auto gx = x_t.grad();
            auto go = out_t.grad();
            double da = 0, db = 0;
            const T a = a_t[0];
            for (long i = 0; i < x_t.size(); ++i) {
                da += go[i] * x_t[i];
                db += go[i];
                gx[i] += go[i] * a;
            }
            a_t.grad()[0] += static_cast<T>(da);
            b_t.grad()[0] += static_cast<T>(db);
        });
    }
    return out;
}

// Center-crops or zero-embeds the trailing two axes onto (Ho, Wo).
template <typename T>
Tensor<T> fit_frame(const Tensor<T>& x, int Ho, int Wo, Tape<T>* tape = nullptr) {
    if (x.rank() < 2) throw std::invalid_argument("fit_frame: tensor rank < 2");
    const int H = x.dim(x.rank() - 2), W = x.dim(x.rank() - 1);
    if (H == Ho && W == Wo) return x;
    Shape out_shape = x.shape();
    out_shape[out_shape.size() - 2] = Ho;
    out_shape[out_shape.size() - 1] = Wo;
    Tensor<T> out(out_shape);
    const long outer = detail::outer_extent(x);
    const int dy = (H - Ho) / 2, dx = (W - Wo) / 2;
    for (long n = 0; n < outer; ++n)
        for (int y = 0; y < Ho; ++y)
            for (int xx = 0; xx < Wo; ++xx) {
                const int sy = y + dy, sx = xx + dx;
                if (sy >= 0 && sy < H && sx >= 0 && sx < W)
                    out[(n * Ho + y) * Wo + xx] = x[(n * H + sy) * W + sx];
            }
    if (tape) {
        Tensor<T> x_t = x, out_t = out;
        x_t.ensure_grad();
        out_t.ensure_grad();
        tape->record([x_t, out_t, H, W, Ho, Wo, dy, dx]() mutable {
            auto gx = x_t.grad();
            auto go = out_t.grad();
            const long outer = detail::outer_extent(x_t);
            for (long n = 0; n < outer; ++n)
                for (int y = 0; y < Ho; ++y)
                    for (int xx = 0; xx < Wo; ++xx) {
                        const int sy = y + dy, sx = xx + dx;
                        if (sy >= 0 && sy < H && sx >= 0 && sx < W)
                            gx[(n * H + sy) * W + sx] += go[(n * Ho + y) * Wo + xx];
                    }
        });
    }
    return out;
}

// Cyclic shift of the trailing two axes (test/diagnostic helper, no gradient).
template <typename T>
Tensor<T> cyclic_shift(const Tensor<T>& x, int dy, int dx) {
    const int H = x.dim(x.rank() - 2), W = x.dim(x.rank() - 1);
    Tensor<T> out(x.shape());
    const long outer = detail::outer_extent(x);
    for (long n = 0; n < outer; ++n)
        for (int y = 0; y < H; ++y)
            for (int xx = 0; xx < W; ++xx) {
                int sy = detail::wrap_index(y - dy, H);
                int sx = detail::wrap_index(xx - dx, W);
                out[(n * H + y) * W + xx] = x[(n * H + sy) * W + sx];
            }
    return out;
}

}  // namespace setrack
