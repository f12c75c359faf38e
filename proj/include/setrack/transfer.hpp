// Initializing a scale-equivariant model from a conventional one. Inter-scale
// weights are zeroed, spatial kernels are carried over by solving
// w = Psi_1^{-1} kappa' so the sigma=1 synthesized kernels equal the source
// kernels, 1x1 mixes are copied at inter-scale index 0, and normalization
// statistics are copied (one set per channel, shared by every scale slice).

#pragma once

#include "setrack/model.hpp"

namespace setrack {

// Zeroes every weight with inter-scale index j > 0; the model falls apart
// into parallel per-scale networks.
template <typename T>
void zero_inter_scale(TrackerModel<T>& model) {
    for (auto& l : model.layers) {
        if (auto* sc = dynamic_cast<ScaleConvLayer<T>*>(l.get())) {
            auto& w = sc->weights;
            for (int o = 0; o < w.dim(0); ++o)
                for (int c = 0; c < w.dim(1); ++c)
                    for (int j = 1; j < w.dim(2); ++j)
                        for (int n = 0; n < w.dim(3); ++n) w.at(o, c, j, n) = T(0);
        } else if (auto* f11 = dynamic_cast<FastScaleConv1x1Layer<T>*>(l.get())) {
            auto& w = f11->weights;
            for (int o = 0; o < w.dim(0); ++o)
                for (int c = 0; c < w.dim(1); ++c)
                    for (int j = 1; j < w.dim(2); ++j) w.at(o, c, j) = T(0);
        }
    }
}

// w = Psi_1^{-1} kappa' for one spatial kernel grid.
template <typename T>
std::vector<double> transfer_spatial_kernel(const Tensor<T>& kernel_grid, const ScaleBasis& basis) {
    const int b = basis.base_size();
    if (kernel_grid.rank() != 2 || kernel_grid.dim(0) != b || kernel_grid.dim(1) != b)
        throw std::invalid_argument("transfer_spatial_kernel: kernel size must equal basis base size");
    std::vector<double> flat(static_cast<size_t>(b) * b);
    for (long i = 0; i < kernel_grid.size(); ++i) flat[static_cast<size_t>(i)] = kernel_grid[i];
    return basis.solve_weights(flat);
}

// source [Co,Ci] 1x1 kernel -> fast scale-conv weights with the mix at j=0.
template <typename T>
Tensor<T> copy_1x1(const Tensor<T>& source, int inter_scale) {
    if (source.rank() != 2) throw std::invalid_argument("copy_1x1: expects a [Co,Ci] kernel");
    Tensor<T> w({source.dim(0), source.dim(1), inter_scale});
    for (int o = 0; o < source.dim(0); ++o)
        for (int c = 0; c < source.dim(1); ++c) w.at(o, c, 0) = source.at(o, c);
    return w;
}

// Layer-by-layer initialization of an SE model from its conventional twin.
// The correspondence is positional over parameterized layers; any mismatch in
// count or shape is an error.
template <typename T>
void transfer_model(TrackerModel<T>& source, TrackerModel<T>& target) {
    if (!target.basis) throw std::invalid_argument("transfer_model: target is not scale-equivariant");
    zero_inter_scale(target);

    std::vector<Layer<T>*> src_layers, tgt_layers;
    for (auto& l : source.layers)
        if (l->kind() == "conv2d" || l->kind() == "batchnorm") src_layers.push_back(l.get());
    for (auto& l : target.layers)
        if (l->kind() == "scale_conv" || l->kind() == "fast_scale_conv_1x1" ||
            l->kind() == "batchnorm")
            tgt_layers.push_back(l.get());
    if (src_layers.size() != tgt_layers.size())
        throw std::invalid_argument("transfer_model: layer correspondence mismatch (" +
                                    std::to_string(src_layers.size()) + " vs " +
                                    std::to_string(tgt_layers.size()) + ")");

    for (size_t i = 0; i < src_layers.size(); ++i) {
        Layer<T>* s = src_layers[i];
        Layer<T>* t = tgt_layers[i];
        if (s->kind() == "conv2d" && t->kind() == "scale_conv") {
            auto* conv = static_cast<Conv2dLayer<T>*>(s);
            auto* sconv = static_cast<ScaleConvLayer<T>*>(t);
            const int Co = conv->kernel.dim(0), Ci = conv->kernel.dim(1), k = conv->kernel.dim(2);
            if (Co != sconv->weights.dim(0) || Ci != sconv->weights.dim(1) ||
                k != sconv->basis->base_size())
                throw std::invalid_argument("transfer_model: spatial kernel shape mismatch");
            for (int o = 0; o < Co; ++o)
                for (int c = 0; c < Ci; ++c) {
                    Tensor<T> grid({k, k});
                    for (int y = 0; y < k; ++y)
                        for (int x = 0; x < k; ++x) grid.at(y, x) = conv->kernel.at(o, c, y, x);
                    auto w = transfer_spatial_kernel(grid, *sconv->basis);
                    for (int n = 0; n < sconv->basis->num_functions(); ++n)
                        sconv->weights.at(o, c, 0, n) = static_cast<T>(w[static_cast<size_t>(n)]);
                }
        } else if (s->kind() == "conv2d" && t->kind() == "fast_scale_conv_1x1") {
            auto* conv = static_cast<Conv2dLayer<T>*>(s);
            auto* f11 = static_cast<FastScaleConv1x1Layer<T>*>(t);
            if (conv->kernel.dim(2) != 1 || conv->kernel.dim(3) != 1)
                throw std::invalid_argument("transfer_model: expected a 1x1 source kernel");
            if (conv->kernel.dim(0) != f11->weights.dim(0) ||
                conv->kernel.dim(1) != f11->weights.dim(1))
                throw std::invalid_argument("transfer_model: 1x1 channel mismatch");
            f11->weights = copy_1x1(
                conv->kernel.reshaped({conv->kernel.dim(0), conv->kernel.dim(1)}),
                f11->weights.dim(2));
        } else if (s->kind() == "batchnorm" && t->kind() == "batchnorm") {
            auto* sb = static_cast<BatchNormLayer<T>*>(s);
            auto* tb = static_cast<BatchNormLayer<T>*>(t);
            if (sb->bn.channels() != tb->bn.channels())
                throw std::invalid_argument("transfer_model: batchnorm channel mismatch");
            tb->bn.gamma = sb->bn.gamma.clone();
            tb->bn.beta = sb->bn.beta.clone();
            tb->bn.running_mean = sb->bn.running_mean.clone();
            tb->bn.running_var = sb->bn.running_var.clone();
        } else {
            throw std::invalid_argument("transfer_model: no correspondence for layer pair " +
                                        s->kind() + " -> " + t->kind());
        }
    }

    target.response_scale = source.response_scale.clone();
    target.response_shift = source.response_shift.clone();
}

}  // namespace setrack
