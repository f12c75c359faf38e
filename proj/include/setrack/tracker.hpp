// Per-frame tracking: standardized template/search crops, the greedy 3-crop
// scale search, cosine-window peak selection and the box/scale state update.

#pragma once

#include <map>

#include "setrack/model.hpp"
#include "setrack/simworld.hpp"
#include "setrack/xcorr.hpp"

namespace setrack {

namespace detail {

// Catmull-Rom value at a continuous offset.
inline double cubic_at(double x) {
    constexpr double a = -0.5;
    x = std::fabs(x);
    if (x < 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
    if (x < 2.0) return (((x - 5.0) * x + 8.0) * x - 4.0) * a;
    return 0.0;
}

// Normalized taps around a source coordinate. When the crop minifies
// (step > 1) the kernel footprint scales with the step so every crop of the
// greedy scale search is band-limited the same way; otherwise the peak
// comparison systematically favors the magnifying crop.
struct CropTaps {
    int first = 0;
    std::vector<double> w;
};

inline CropTaps crop_taps(double src, double step) {
    const double radius = 2.0 * std::max(1.0, step);
    CropTaps taps;
    taps.first = static_cast<int>(std::ceil(src - radius));
    const int last = static_cast<int>(std::floor(src + radius));
    taps.w.resize(static_cast<size_t>(last - taps.first + 1));
    double sum = 0;
    for (int i = taps.first; i <= last; ++i) {
        double v = cubic_at((i - src) / std::max(1.0, step));
        taps.w[static_cast<size_t>(i - taps.first)] = v;
        sum += v;
    }
    if (sum != 0)
        for (auto& v : taps.w) v /= sum;
    return taps;
}

}  // namespace detail

// Square crop of side `side` centered at (cx, cy) in continuous pixel
// coordinates, resampled to out x out with clamp-to-edge beyond the frame.
// Separable Catmull-Rom with an anti-aliased footprint under minification.
template <typename T>
Tensor<T> crop_resize(const Tensor<T>& image, double cx, double cy, double side, int out) {
    if (image.rank() != 3) throw std::invalid_argument("crop_resize: expects [C,H,W]");
    if (!(side > 0.0)) throw std::invalid_argument("crop_resize: degenerate crop");
    const int C = image.dim(0), H = image.dim(1), W = image.dim(2);
    const double step = side / out;
    // Continuous box [c - side/2, c + side/2), sampled at output pixel centers;
    // the -0.5 converts continuous coordinates to pixel-center indices.
    std::vector<detail::CropTaps> ty(static_cast<size_t>(out)), tx(static_cast<size_t>(out));
    for (int o = 0; o < out; ++o) {
        ty[static_cast<size_t>(o)] = detail::crop_taps(cy - side / 2 + (o + 0.5) * step - 0.5, step);
        tx[static_cast<size_t>(o)] = detail::crop_taps(cx - side / 2 + (o + 0.5) * step - 0.5, step);
    }
    // Pass 1: horizontal onto [C, H_needed, out] rows actually touched.
    Tensor<T> result({C, out, out});
    std::vector<double> row(static_cast<size_t>(out));
    for (int c = 0; c < C; ++c) {
        // Cache of horizontally resampled source rows, keyed by source y.
        std::map<int, std::vector<double>> rows;
        auto resampled_row = [&](int py) -> const std::vector<double>& {
            auto it = rows.find(py);
            if (it != rows.end()) return it->second;
            std::vector<double> r(static_cast<size_t>(out), 0.0);
            for (int x = 0; x < out; ++x) {
                const auto& t = tx[static_cast<size_t>(x)];
                double acc = 0;
                for (size_t k = 0; k < t.w.size(); ++k)
                    acc += t.w[k] *
                           static_cast<double>(image.at(c, py, detail::clamp_index(
                                                                   t.first + static_cast<int>(k), W)));
                r[static_cast<size_t>(x)] = acc;
            }
            return rows.emplace(py, std::move(r)).first->second;
        };
        for (int y = 0; y < out; ++y) {
            const auto& t = ty[static_cast<size_t>(y)];
            std::fill(row.begin(), row.end(), 0.0);
            for (size_t k = 0; k < t.w.size(); ++k) {
                const auto& src = resampled_row(detail::clamp_index(t.first + static_cast<int>(k), H));
                for (int x = 0; x < out; ++x) row[static_cast<size_t>(x)] += t.w[k] * src[static_cast<size_t>(x)];
            }
            for (int x = 0; x < out; ++x) result.at(c, y, x) = static_cast<T>(row[static_cast<size_t>(x)]);
        }
    }
    return result;
}

// SiamFC context rule: template side sqrt((w + m)(h + m)) with
// m = context_margin * (w + h).
inline double template_side(const Box& box, double context_margin) {
    const double m = context_margin * (box.w + box.h);
    return std::sqrt((box.w + m) * (box.h + m));
}

// Outer-product Hann window, normalized to sum 1.
template <typename T>
Tensor<T> cosine_window(int n) {
    Tensor<T> w({n, n});
    std::vector<double> h(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
        h[static_cast<size_t>(i)] = n == 1 ? 1.0 : 0.5 * (1.0 - std::cos(2.0 * M_PI * i / (n - 1)));
    double sum = 0;
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            w.at(y, x) = static_cast<T>(h[static_cast<size_t>(y)] * h[static_cast<size_t>(x)]);
            sum += w.at(y, x);
        }
    for (long i = 0; i < w.size(); ++i) w[i] = static_cast<T>(w[i] / sum);
    return w;
}

struct TrackState {
    Box box;                  // current estimate, clamped to the frame
    double scale = 1.0;       // product of accepted per-frame scale factors
    double base_template_side = 0;
};

template <typename T>
struct StepDiagnostics {
    int chosen_crop = 0;              // 0, 1, 2 over {1/step, 1, step}
    Tensor<T> response;               // upsampled, penalized response of the chosen crop
    double peak_value = 0;
};

// Frame-0 initialization: fixes the template embedding for the whole pass.
template <typename T>
class Tracker {
public:
    Tracker(TrackerModel<T>* model, const Tensor<T>& frame0, const Box& init_box)
        : model_(model), inference_(model->config.inference) {
        model_->training = false;
        state_.box = init_box;
        state_.scale = 1.0;
        state_.base_template_side = template_side(init_box, inference_.context_margin);
        auto crop = crop_resize(frame0, init_box.cx, init_box.cy, state_.base_template_side,
                                inference_.exemplar_size);
        template_embed_ = model_->embed(batch_of(crop));
        window_ = Tensor<T>();
    }

    const TrackState& state() const { return state_; }

    // One tracking step: greedy selection over three scaled search crops.
    Box step(const Tensor<T>& frame, StepDiagnostics<T>* diag = nullptr) {
        const auto& inf = inference_;
        const double side_ratio =
            static_cast<double>(inf.search_size) / inf.exemplar_size;
        const double base_side = state_.base_template_side * state_.scale * side_ratio;
        const double factors[3] = {1.0 / inf.scale_step, 1.0, inf.scale_step};

        int best = -1;
        double best_peak = -std::numeric_limits<double>::infinity();
        Tensor<T> best_response;
        for (int i = 0; i < 3; ++i) {
            auto crop = crop_resize(frame, state_.box.cx, state_.box.cy, base_side * factors[i],
                                    inf.search_size);
            auto embed = model_->embed(batch_of(crop));
            auto resp = model_->response(embed, template_embed_);
            Tensor<T> map = resp.reshaped({resp.dim(2), resp.dim(3)});
            // Compare match quality, not feature energy: magnified content
            // inflates raw correlation peaks, so the greedy race normalizes
            // each peak by the crop's RMS feature magnitude.
            double energy = 0;
            for (long k = 0; k < embed.size(); ++k)
                energy += static_cast<double>(embed[k]) * embed[k];
            const double rms = std::sqrt(std::max(1e-20, energy / embed.size()));
            double peak = map[argmax_flat(map)] / rms;
            if (i != 1) peak *= inf.scale_penalty;
            if (peak > best_peak) {
                best_peak = peak;
                best = i;
                best_response = map;
            }
        }

        // Upsample the chosen response, normalize, mix with the cosine window.
        Tensor<T> up = bicubic_resize(best_response, static_cast<double>(inf.response_upsample));
        double mn = up[0], sum = 0;
        for (long i = 0; i < up.size(); ++i) mn = std::min(mn, static_cast<double>(up[i]));
        for (long i = 0; i < up.size(); ++i) {
            up[i] = static_cast<T>(up[i] - mn);
            sum += up[i];
        }
        if (sum > 0)
            for (long i = 0; i < up.size(); ++i) up[i] = static_cast<T>(up[i] / sum);
        if (!window_.defined() || window_.dim(0) != up.dim(0))
            window_ = cosine_window<T>(up.dim(0));
        for (long i = 0; i < up.size(); ++i)
            up[i] = static_cast<T>((1.0 - inf.window_influence) * up[i] +
                                   inf.window_influence * window_[i]);

        const long peak_flat = argmax_flat(up);
        const auto peak_idx = unravel(up.shape(), peak_flat);
        const double center = (up.dim(0) - 1) / 2.0;
        const double chosen_side = base_side * factors[best];
        // Displacement: response cells * total stride, then crop -> frame units.
        const double cells_y = (peak_idx[0] - center) / inf.response_upsample;
        const double cells_x = (peak_idx[1] - center) / inf.response_upsample;
        const double to_frame = chosen_side / inf.search_size;
        const double dy = cells_y * model_->total_stride() * to_frame;
        const double dx = cells_x * model_->total_stride() * to_frame;

        const double damped =
            (1.0 - inf.scale_damping) * 1.0 + inf.scale_damping * factors[best];
        state_.scale *= damped;
        state_.box.cx += dx;
        state_.box.cy += dy;
        state_.box.w *= damped;
        state_.box.h *= damped;
        clamp_box(frame.dim(2), frame.dim(1));

        if (diag) {
            diag->chosen_crop = best;
            diag->response = up;
            diag->peak_value = best_peak;
        }
        return state_.box;
    }

private:
    Tensor<T> batch_of(const Tensor<T>& chw) const {
        return chw.reshaped({1, chw.dim(0), chw.dim(1), chw.dim(2)});
    }

    void clamp_box(int W, int H) {
        state_.box.cx = std::clamp(state_.box.cx, 0.0, static_cast<double>(W));
        state_.box.cy = std::clamp(state_.box.cy, 0.0, static_cast<double>(H));
        state_.box.w = std::clamp(state_.box.w, 2.0, static_cast<double>(W));
        state_.box.h = std::clamp(state_.box.h, 2.0, static_cast<double>(H));
        if (!(state_.box.w > 0) || !(state_.box.h > 0))
            throw std::runtime_error("track_step: degenerate crop after clamping");
    }

    TrackerModel<T>* model_;
    InferenceConfig inference_;
    TrackState state_;
    Tensor<T> template_embed_;
    Tensor<T> window_;
};

}  // namespace setrack
