// Multi-scale Hermite-Gaussian steerable dictionary. Each basis function is
//
//   psi_{sigma,n,m}(u,v) = A * (1/sigma^2) * H_n(u/sigma) * H_m(v/sigma)
//                          * exp(-(u^2+v^2) / (2 sigma^2))
//
// sampled on a centered integer grid and normalized to unit l2 norm. The
// dictionary is built once for an equidistant (geometric) scale ladder and is
// immutable afterwards. The sigma=1 stack is complete: one function per pixel,
// indices (n,m) capped below the grid size so the sampled matrix stays
// invertible (1D Hermite functions of order >= grid size are linearly
// dependent on lower orders when sampled).

#pragma once

#include <array>
#include <fstream>
#include <iomanip>

#include "setrack/tensor.hpp"

namespace setrack {

// Physicists' Hermite polynomial via the recurrence
// H_0 = 1, H_1 = 2x, H_{n+1} = 2x H_n - 2n H_{n-1}.
inline double hermite(int n, double x) {
    if (n < 0 || n > 12) throw std::invalid_argument("hermite: order out of supported range");
    double h0 = 1.0;
    if (n == 0) return h0;
    double h1 = 2.0 * x;
    for (int k = 1; k < n; ++k) {
        double h2 = 2.0 * x * h1 - 2.0 * k * h0;
        h0 = h1;
        h1 = h2;
    }
    return h1;
}

// One sampled basis function on a centered grid_size x grid_size grid,
// unit l2 norm.
inline Tensor<double> sample_basis_function(int n, int m, double sigma, int grid_size) {
    if (grid_size % 2 == 0) throw std::invalid_argument("sample_basis_function: grid size must be odd");
    if (!(sigma > 0.0)) throw std::invalid_argument("sample_basis_function: sigma must be positive");
    const int half = (grid_size - 1) / 2;
    Tensor<double> g({grid_size, grid_size});
    double norm2 = 0.0;
    for (int y = 0; y < grid_size; ++y) {
        const double v = static_cast<double>(y - half);
        for (int x = 0; x < grid_size; ++x) {
            const double u = static_cast<double>(x - half);
            double val = (1.0 / (sigma * sigma)) * hermite(n, u / sigma) * hermite(m, v / sigma) *
                         std::exp(-(u * u + v * v) / (2.0 * sigma * sigma));
            g.at(y, x) = val;
            norm2 += val * val;
        }
    }
    const double inv = 1.0 / std::sqrt(norm2);
    for (long i = 0; i < g.size(); ++i) g[i] *= inv;
    return g;
}

// (n,m) enumeration: total-degree order (n+m, then n), with each index capped
// at base_size-1. The cap yields exactly base_size^2 pairs and keeps the
// sampled sigma=1 stack linearly independent.
inline std::vector<std::pair<int, int>> basis_index_map(int base_size) {
    std::vector<std::pair<int, int>> pairs;
    for (int n = 0; n < base_size; ++n)
        for (int m = 0; m < base_size; ++m) pairs.emplace_back(n, m);
    std::stable_sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) {
        int da = a.first + a.second, db = b.first + b.second;
        if (da != db) return da < db;
        return a.first < b.first;
    });
    return pairs;
}

namespace detail {

// Gaussian elimination with partial pivoting; throws on a singular pivot.
inline std::vector<double> invert_matrix(std::vector<double> a, int n) {
    std::vector<double> inv(static_cast<size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) inv[static_cast<size_t>(i) * n + i] = 1.0;
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int r = col + 1; r < n; ++r)
            if (std::fabs(a[static_cast<size_t>(r) * n + col]) >
                std::fabs(a[static_cast<size_t>(piv) * n + col]))
                piv = r;
        if (std::fabs(a[static_cast<size_t>(piv) * n + col]) < 1e-14)
            throw std::runtime_error("basis matrix is numerically singular");
        if (piv != col)
            for (int c = 0; c < n; ++c) {
                std::swap(a[static_cast<size_t>(piv) * n + c], a[static_cast<size_t>(col) * n + c]);
                std::swap(inv[static_cast<size_t>(piv) * n + c], inv[static_cast<size_t>(col) * n + c]);
            }
        const double d = a[static_cast<size_t>(col) * n + col];
        for (int c = 0; c < n; ++c) {
            a[static_cast<size_t>(col) * n + c] /= d;
            inv[static_cast<size_t>(col) * n + c] /= d;
        }
        for (int r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = a[static_cast<size_t>(r) * n + col];
            if (f == 0.0) continue;
            for (int c = 0; c < n; ++c) {
                a[static_cast<size_t>(r) * n + c] -= f * a[static_cast<size_t>(col) * n + c];
                inv[static_cast<size_t>(r) * n + c] -= f * inv[static_cast<size_t>(col) * n + c];
            }
        }
    }
    return inv;
}

// Spectral-norm estimate by power iteration on A^T A.
inline double spectral_norm(const std::vector<double>& a, int n) {
    std::vector<double> v(static_cast<size_t>(n));
    uint64_t s = 12345;
    for (int i = 0; i < n; ++i) v[static_cast<size_t>(i)] = 1.0 + 1e-3 * (splitmix64(s) % 1000);
    std::vector<double> av(static_cast<size_t>(n)), atav(static_cast<size_t>(n));
    double lambda = 0.0;
    for (int it = 0; it < 100; ++it) {
        for (int r = 0; r < n; ++r) {
            double acc = 0;
            for (int c = 0; c < n; ++c) acc += a[static_cast<size_t>(r) * n + c] * v[static_cast<size_t>(c)];
            av[static_cast<size_t>(r)] = acc;
        }
        for (int c = 0; c < n; ++c) {
            double acc = 0;
            for (int r = 0; r < n; ++r) acc += a[static_cast<size_t>(r) * n + c] * av[static_cast<size_t>(r)];
            atav[static_cast<size_t>(c)] = acc;
        }
        double nrm = 0;
        for (double x : atav) nrm += x * x;
        nrm = std::sqrt(nrm);
        if (nrm == 0.0) return 0.0;
        lambda = nrm;
        for (int c = 0; c < n; ++c) v[static_cast<size_t>(c)] = atav[static_cast<size_t>(c)] / nrm;
    }
    return std::sqrt(lambda);
}

}  // namespace detail

class ScaleBasis {
public:
    // scales[k] = sigma_step^k. Grid size is base_size at the smallest scale
    // and base_size + 2 at every larger one.
    ScaleBasis(int base_size, double sigma_step, int num_scales) {
        if (base_size % 2 == 0 || base_size < 1)
            throw std::invalid_argument("build_basis: base size must be odd and positive");
        if (num_scales < 1) throw std::invalid_argument("build_basis: need at least one scale");
        if (num_scales > 1 && !(sigma_step > 1.0))
            throw std::invalid_argument("build_basis: sigma step must exceed 1");
        base_size_ = base_size;
        sigma_step_ = sigma_step;
        index_map_ = basis_index_map(base_size);
        const int N = num_functions();

        for (int k = 0; k < num_scales; ++k) {
            const double sigma = std::pow(sigma_step, k);
            const int size = grid_size_for(k);
            scales_.push_back(sigma);
            std::vector<Tensor<double>> stack;
            stack.reserve(static_cast<size_t>(N));
            for (const auto& [n, m] : index_map_)
                stack.push_back(sample_basis_function(n, m, sigma, size));
            filters_.push_back(std::move(stack));
        }

        // sigma=1 stack flattened over pixels: A[pixel][function].
        std::vector<double> A(static_cast<size_t>(N) * N);
        for (int f = 0; f < N; ++f)
            for (int p = 0; p < N; ++p)
                A[static_cast<size_t>(p) * N + f] = filters_[0][static_cast<size_t>(f)][p];
        inverse_ = detail::invert_matrix(A, N);
        condition_ = detail::spectral_norm(A, N) * detail::spectral_norm(inverse_, N);
        if (!(condition_ < 1e8))
            throw std::runtime_error("build_basis: sigma=1 basis is numerically singular (cond " +
                                     std::to_string(condition_) + ")");
    }

    int base_size() const { return base_size_; }
    double sigma_step() const { return sigma_step_; }
    int num_scales() const { return static_cast<int>(scales_.size()); }
    int num_functions() const { return base_size_ * base_size_; }
    double scale(int k) const { return scales_[static_cast<size_t>(k)]; }
    const std::vector<double>& scales() const { return scales_; }
    int grid_size(int k) const { return grid_size_for(k); }
    int max_grid_size() const { return grid_size_for(num_scales() - 1); }
    double condition_number() const { return condition_; }
    const std::vector<std::pair<int, int>>& index_map() const { return index_map_; }

    // Sampled unit-norm function `f` at scale index `k`.
    const Tensor<double>& filter(int k, int f) const {
        return filters_[static_cast<size_t>(k)][static_cast<size_t>(f)];
    }

    // w = Psi_1^{-1} kappa for a flattened base_size x base_size kernel.
    std::vector<double> solve_weights(const std::vector<double>& kernel_flat) const {
        const int N = num_functions();
        if (static_cast<int>(kernel_flat.size()) != N)
            throw std::invalid_argument("solve_weights: kernel size mismatch");
        std::vector<double> w(static_cast<size_t>(N), 0.0);
        for (int f = 0; f < N; ++f) {
            double acc = 0;
            for (int p = 0; p < N; ++p)
                acc += inverse_[static_cast<size_t>(f) * N + p] * kernel_flat[static_cast<size_t>(p)];
            w[static_cast<size_t>(f)] = acc;
        }
        return w;
    }

    std::string dump() const {
        std::ostringstream os;
        os << "scale-basis\n";
        os << "base_size " << base_size_ << "\n";
        os << "num_functions " << num_functions() << "\n";
        os << "sigma_step " << std::setprecision(17) << sigma_step_ << "\n";
        os << "condition_number " << std::setprecision(6) << condition_ << "\n";
        os << "scales";
        for (double s : scales_) os << " " << std::setprecision(17) << s;
        os << "\n";
        os << "grid_sizes";
        for (int k = 0; k < num_scales(); ++k) os << " " << grid_size(k);
        os << "\n";
        os << "index_map";
        for (const auto& [n, m] : index_map_) os << " (" << n << "," << m << ")";
        os << "\n";
        return os.str();
    }

    void write_dump(const std::string& path) const {
        std::ofstream f(path);
        if (!f) throw std::runtime_error("cannot write basis dump: " + path);
        f << dump();
    }

private:
    int grid_size_for(int k) const { return k == 0 ? base_size_ : base_size_ + 2; }

    int base_size_ = 0;
    double sigma_step_ = 1.0;
    std::vector<double> scales_;
    std::vector<std::vector<Tensor<double>>> filters_;  // [scale][function]
    std::vector<double> inverse_;                       // N x N, row = function
    std::vector<std::pair<int, int>> index_map_;
    double condition_ = 0.0;
};

inline std::shared_ptr<const ScaleBasis> build_basis(int base_size, double sigma_step,
                                                     int num_scales) {
    return std::make_shared<const ScaleBasis>(base_size, sigma_step, num_scales);
}

}  // namespace setrack
