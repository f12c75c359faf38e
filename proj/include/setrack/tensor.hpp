// Dense tensor storage with reverse-mode gradient support.
//
// Tensors are shallow handles over shared payloads (shape + values + optional
// gradient buffer). Axes follow the canonical order
// (batch, scale, channel, height, width); lower-rank tensors omit leading axes.
// Every differentiable operation takes an optional Tape*; when present, the op
// allocates gradient buffers on its operands and records a closure that plays
// the matching backward step. Tape::backward() replays the closures in reverse
// execution order.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace setrack {

using Shape = std::vector<int>;

inline long shape_numel(const Shape& s) {
    long n = 1;
    for (int d : s) {
        if (d <= 0) throw std::invalid_argument("tensor axis length must be positive");
        n *= d;
    }
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ")";
    return os.str();
}

template <typename T>
class Tensor {
    // Shape lives on the handle so reshapes are views; values and gradient
    // are shared by every handle of the same tensor.
    struct Payload {
        std::vector<T> values;
        std::vector<T> grad;  // empty until ensure_grad()
    };
    Shape shape_;
    std::shared_ptr<Payload> p_;

public:
    Tensor() = default;

    explicit Tensor(Shape shape, T fill = T(0))
        : shape_(std::move(shape)), p_(std::make_shared<Payload>()) {
        p_->values.assign(static_cast<size_t>(shape_numel(shape_)), fill);
    }

    static Tensor from(Shape shape, std::vector<T> values) {
        Tensor t;
        long n = shape_numel(shape);
        if (static_cast<long>(values.size()) != n)
            throw std::invalid_argument("value count " + std::to_string(values.size()) +
                                        " does not match shape " + shape_str(shape));
        t.shape_ = std::move(shape);
        t.p_ = std::make_shared<Payload>();
        t.p_->values = std::move(values);
        return t;
    }

    bool defined() const { return static_cast<bool>(p_); }
    const Shape& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
    long size() const { return static_cast<long>(p_->values.size()); }

    std::span<T> values() { return p_->values; }
    std::span<const T> values() const { return p_->values; }
    T* data() { return p_->values.data(); }
    const T* data() const { return p_->values.data(); }

    bool has_grad() const { return p_ && !p_->grad.empty(); }
    void ensure_grad() {
        if (p_->grad.empty()) p_->grad.assign(p_->values.size(), T(0));
    }
    void zero_grad() {
        if (!p_->grad.empty()) std::fill(p_->grad.begin(), p_->grad.end(), T(0));
    }
    std::span<T> grad() {
        ensure_grad();
        return p_->grad;
    }
    std::span<const T> grad() const {
        if (p_->grad.empty()) throw std::logic_error("gradient buffer not allocated");
        return p_->grad;
    }

    T& operator[](long i) { return p_->values[static_cast<size_t>(i)]; }
    const T& operator[](long i) const { return p_->values[static_cast<size_t>(i)]; }

    // Flat offset of a multi-index in row-major order.
    template <typename... Ix>
    long offset(Ix... ix) const {
        static_assert(sizeof...(Ix) > 0);
        const int idx[] = {static_cast<int>(ix)...};
        const int r = rank();
        if (static_cast<int>(sizeof...(Ix)) != r)
            throw std::invalid_argument("index rank mismatch");
        long off = 0;
        for (int a = 0; a < r; ++a) off = off * dim(a) + idx[a];
        return off;
    }

    template <typename... Ix>
    T& at(Ix... ix) { return p_->values[static_cast<size_t>(offset(ix...))]; }
    template <typename... Ix>
    const T& at(Ix... ix) const { return p_->values[static_cast<size_t>(offset(ix...))]; }

    // View of the same storage under a compatible shape (numel preserved).
    Tensor reshaped(Shape s) const {
        if (shape_numel(s) != size())
            throw std::invalid_argument("reshape changes element count");
        Tensor t;
        t.shape_ = std::move(s);
        t.p_ = p_;
        return t;
    }

    Tensor clone() const {
        Tensor t;
        t.shape_ = shape_;
        t.p_ = std::make_shared<Payload>(*p_);
        return t;
    }

    // True when two handles share storage.
    bool same_storage(const Tensor& other) const { return p_ == other.p_; }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> t(shape());
        for (long i = 0; i < size(); ++i) t[i] = static_cast<U>((*this)[i]);
        return t;
    }

    bool all_finite() const {
        for (const T& v : p_->values)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }
};

template <typename T>
inline void check_finite(const Tensor<T>& t, const char* who) {
    if (!t.all_finite()) throw std::invalid_argument(std::string(who) + ": non-finite input value");
}

namespace detail {

// Product of all leading axes, so spatial code can treat any tensor as
// [outer, H, W].
template <typename T>
inline long outer_extent(const Tensor<T>& t) {
    long outer = 1;
    for (int a = 0; a + 2 < t.rank(); ++a) outer *= t.dim(a);
    return outer;
}

inline int wrap_index(int i, int n) {
    int r = i % n;
    return r < 0 ? r + n : r;
}

}  // namespace detail

// Record of executed ops; backward() replays each recorded closure exactly
// once, in reverse execution order.
template <typename T>
class Tape {
    std::vector<std::function<void()>> steps_;

public:
    void record(std::function<void()> f) { steps_.push_back(std::move(f)); }
    size_t size() const { return steps_.size(); }
    void clear() { steps_.clear(); }
    void backward() {
        for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
    }
};

// ---------------------------------------------------------------------------
// Deterministic random helpers. std::mt19937 is standardized bit-exactly, but
// the distribution objects are not; these mappings keep datasets and
// initializations byte-identical across standard libraries.

inline uint64_t splitmix64(uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline uint64_t mix_seed(uint64_t seed, uint64_t stream) {
    uint64_t s = seed ^ (0x9e3779b97f4a7c15ULL * (stream + 1));
    return splitmix64(s);
}

class Rng {
    std::mt19937_64 gen_;

public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    int uniform_int(int lo, int hi) {  // inclusive bounds
        return lo + static_cast<int>(next_u64() % static_cast<uint64_t>(hi - lo + 1));
    }

    // Box-Muller; implementation-defined std distributions are avoided on purpose.
    double gaussian() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }
};

template <typename T>
inline Tensor<T> random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor<T> t(std::move(shape));
    for (long i = 0; i < t.size(); ++i) t[i] = static_cast<T>(rng.uniform(lo, hi));
    return t;
}

template <typename T>
inline Tensor<T> gaussian_tensor(Shape shape, Rng& rng, double stddev) {
    Tensor<T> t(std::move(shape));
    for (long i = 0; i < t.size(); ++i) t[i] = static_cast<T>(rng.gaussian() * stddev);
    return t;
}

}  // namespace setrack
