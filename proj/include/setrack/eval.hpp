// One-pass evaluation, scale traces, the padding/translation diagnostic and
// the 1x1 scale-convolution microbenchmark.

#pragma once

#include <chrono>
#include <functional>

#include "setrack/trainer.hpp"

namespace setrack {

struct FrameMetric {
    double iou = 0;
    double center_error = 0;
    double pred_scale = 1.0;
    double true_scale = 1.0;
};

struct SequenceReport {
    std::string name;
    std::vector<FrameMetric> frames;
};

struct EvalReport {
    std::vector<SequenceReport> sequences;
    std::vector<double> success_curve;  // IoU thresholds 0, 0.01, ..., 1
    double auc = 0;
    double precision = 0;
    double precision_threshold_px = 5.0;
    uint64_t config_hash = 0;
    uint64_t seed = 0;
};

struct TrackOutput {
    Box box;
    double scale = 1.0;
};

// A tracker under OPE: given a sequence, produce one output per frame.
// Frame 0 is the ground-truth initialization.
using TrackFn = std::function<std::vector<TrackOutput>(const Sequence&)>;

inline std::vector<double> success_curve_from_ious(const std::vector<double>& ious) {
    std::vector<double> curve(101, 0.0);
    if (ious.empty()) return curve;
    for (int j = 0; j <= 100; ++j) {
        const double tau = j / 100.0;
        long n = 0;
        for (double v : ious)
            if (v > tau) ++n;
        curve[static_cast<size_t>(j)] = static_cast<double>(n) / static_cast<double>(ious.size());
    }
    return curve;
}

inline double trapezoid_auc(const std::vector<double>& curve) {
    double auc = 0;
    for (size_t j = 0; j + 1 < curve.size(); ++j) auc += 0.5 * (curve[j] + curve[j + 1]) * 0.01;
    return auc;
}

// Independent route: per-frame trapezoid of the clamped-IoU indicator on the
// same threshold grid, averaged over frames.
inline double auc_per_frame_route(const std::vector<double>& ious) {
    if (ious.empty()) return 0;
    double total = 0;
    for (double v : ious) {
        std::vector<double> ind(101, 0.0);
        for (int j = 0; j <= 100; ++j) ind[static_cast<size_t>(j)] = v > j / 100.0 ? 1.0 : 0.0;
        total += trapezoid_auc(ind);
    }
    return total / static_cast<double>(ious.size());
}

// Standard one-pass evaluation: initialize from frame-0 ground truth, never
// re-initialize.
inline EvalReport ope_eval(const TrackFn& tracker, const std::vector<Sequence>& data,
                           double precision_threshold_px = 5.0) {
    EvalReport report;
    report.precision_threshold_px = precision_threshold_px;
    std::vector<double> all_ious;
    long precise = 0, total = 0;
    int seq_idx = 0;
    for (const auto& seq : data) {
        if (seq.spec.length < 2) throw std::invalid_argument("ope_eval: sequence shorter than 2 frames");
        auto outputs = tracker(seq);
        if (static_cast<int>(outputs.size()) != seq.spec.length)
            throw std::runtime_error("ope_eval: tracker output length mismatch");
        SequenceReport sr;
        sr.name = "seq_" + std::to_string(seq_idx++);
        const double s0 = seq.scale_of(0, seq.target_id);
        for (int t = 0; t < seq.spec.length; ++t) {
            const Box& gt = seq.box_of(t, seq.target_id);
            FrameMetric m;
            m.iou = box_iou(outputs[static_cast<size_t>(t)].box, gt);
            m.center_error = std::hypot(outputs[static_cast<size_t>(t)].box.cx - gt.cx,
                                        outputs[static_cast<size_t>(t)].box.cy - gt.cy);
            m.pred_scale = outputs[static_cast<size_t>(t)].scale;
            m.true_scale = seq.scale_of(t, seq.target_id) / s0;
            sr.frames.push_back(m);
            all_ious.push_back(m.iou);
            if (m.center_error <= precision_threshold_px) ++precise;
            ++total;
        }
        report.sequences.push_back(std::move(sr));
    }
    report.success_curve = success_curve_from_ious(all_ious);
    report.auc = trapezoid_auc(report.success_curve);
    report.precision = total ? static_cast<double>(precise) / static_cast<double>(total) : 0.0;
    return report;
}

// Wraps a model in the OPE interface.
template <typename T>
TrackFn model_track_fn(TrackerModel<T>& model) {
    return [&model](const Sequence& seq) {
        auto local = model.clone();
        auto frame0 = image_to_tensor<T>(seq.frames[0]);
        Tracker<T> tracker(&local, frame0, seq.box_of(0, seq.target_id));
        std::vector<TrackOutput> out;
        out.push_back({seq.box_of(0, seq.target_id), 1.0});
        for (int t = 1; t < seq.spec.length; ++t) {
            auto frame = image_to_tensor<T>(seq.frames[static_cast<size_t>(t)]);
            Box box = tracker.step(frame);
            out.push_back({box, tracker.state().scale});
        }
        return out;
    };
}

// ---------------------------------------------------------------------------
// Scale trace

struct ScaleTrace {
    std::vector<std::pair<double, double>> points;  // (predicted, true) per frame
    double oscillation = 0;  // population std of frame-to-frame predicted-scale differences
};

inline ScaleTrace scale_trace(const SequenceReport& report) {
    ScaleTrace trace;
    for (const auto& f : report.frames) trace.points.emplace_back(f.pred_scale, f.true_scale);
    if (trace.points.size() >= 2) {
        std::vector<double> diffs;
        for (size_t i = 1; i < trace.points.size(); ++i)
            diffs.push_back(trace.points[i].first - trace.points[i - 1].first);
        double mean = 0;
        for (double d : diffs) mean += d;
        mean /= static_cast<double>(diffs.size());
        double var = 0;
        for (double d : diffs) var += (d - mean) * (d - mean);
        trace.oscillation = std::sqrt(var / static_cast<double>(diffs.size()));
    }
    return trace;
}

inline double median_oscillation(const EvalReport& report) {
    std::vector<double> osc;
    for (const auto& sr : report.sequences) osc.push_back(scale_trace(sr).oscillation);
    if (osc.empty()) return 0;
    std::sort(osc.begin(), osc.end());
    return osc[osc.size() / 2];
}

// ---------------------------------------------------------------------------
// Padding / translation diagnostic

struct TranslationDiagnostic {
    std::vector<std::pair<int, double>> shifts;  // (input px, measured heatmap shift in px)
    double slope = 0;
    double max_residual_px = 0;
    double commutation_residual = 0;  // relative feature-space commutation error
    bool flagged = false;
};

// Cyclically shifts the probe image over +-span and reads the response
// argmax back; with circular padding (training mode) the commutation is exact
// for shifts that are multiples of the total stride.
template <typename T>
TranslationDiagnostic translation_diagnostic(TrackerModel<T>& model, const Tensor<T>& image,
                                             bool force_zero_padding = false, int span_px = 16) {
    if (image.rank() != 3) throw std::invalid_argument("translation_diagnostic: expects [C,H,W]");
    const bool saved_mode = model.training;
    model.training = !force_zero_padding;  // circular padding unless abused on purpose

    const int stride = model.total_stride();
    const int H = image.dim(1), W = image.dim(2);
    auto as_batch = image.reshaped({1, image.dim(0), H, W});

    // Template: a centered crop small enough that the response map keeps a
    // few cells of slack around its center for the largest probed shift.
    const int tside = std::max(stride * 2, W / 4);
    Tensor<T> templ({image.dim(0), tside, tside});
    const int off_y = (H - tside) / 2, off_x = (W - tside) / 2;
    for (int c = 0; c < image.dim(0); ++c)
        for (int y = 0; y < tside; ++y)
            for (int x = 0; x < tside; ++x)
                templ.at(c, y, x) = image.at(c, y + off_y, x + off_x);
    auto templ_embed = model.embed(templ.reshaped({1, image.dim(0), tside, tside}));

    auto base_feat = model.embed(as_batch);
    auto base_resp = model.response(base_feat, templ_embed);
    const auto base_idx = unravel(base_resp.shape(), argmax_flat(base_resp));

    TranslationDiagnostic diag;
    double sxy = 0, sxx = 0;
    for (int shift = -span_px; shift <= span_px; shift += stride) {
        auto shifted = cyclic_shift(as_batch, 0, shift);
        auto feat = model.embed(shifted);
        // Feature-space commutation residual against the cyclically shifted
        // base features (exact with circular padding).
        const int cells = shift / stride;
        auto expect = cyclic_shift(base_feat, 0, cells);
        double num = 0, den = 0;
        for (long i = 0; i < feat.size(); ++i) {
            const double d = static_cast<double>(feat[i]) - static_cast<double>(expect[i]);
            num += d * d;
            den += static_cast<double>(expect[i]) * expect[i];
        }
        diag.commutation_residual =
            std::max(diag.commutation_residual, std::sqrt(num / std::max(1e-30, den)));

        auto resp = model.response(feat, templ_embed);
        const auto idx = unravel(resp.shape(), argmax_flat(resp));
        const double measured = (idx[3] - base_idx[3]) * static_cast<double>(stride);
        diag.shifts.emplace_back(shift, measured);
        sxy += static_cast<double>(shift) * measured;
        sxx += static_cast<double>(shift) * shift;
    }
    diag.slope = sxx > 0 ? sxy / sxx : 0.0;
    for (const auto& [shift, measured] : diag.shifts)
        diag.max_residual_px = std::max(diag.max_residual_px,
                                        std::fabs(measured - diag.slope * shift));
    diag.flagged = std::fabs(diag.slope - 1.0) > 0.05 || diag.max_residual_px > stride ||
                   diag.commutation_residual > 0.02;
    model.training = saved_mode;
    return diag;
}

// ---------------------------------------------------------------------------
// Microbenchmark: fast 1x1 scale-convolution vs the generic reference path.

struct BenchResult {
    std::string size_desc;
    double ref_forward_us = 0;
    double fast_forward_us = 0;
    double ref_backward_us = 0;
    double fast_backward_us = 0;
    double forward_speedup = 0;
    double max_output_diff = 0;
};

template <typename T>
BenchResult bench_conv_1x1(int batch, int scales, int channels, int out_channels, int inter_scale,
                           int hw, int warmup = 10, int runs = 100) {
    Rng rng(12345);
    auto input = random_tensor<T>({batch, scales, channels, hw, hw}, rng);
    auto weights = random_tensor<T>({out_channels, channels, inter_scale}, rng);

    BenchResult r;
    r.size_desc = std::to_string(batch) + "x" + std::to_string(scales) + "x" +
                  std::to_string(channels) + "->" + std::to_string(out_channels) + "x" +
                  std::to_string(hw) + "x" + std::to_string(hw) + " I=" +
                  std::to_string(inter_scale);

    // Equivalence gate before any timing.
    {
        auto fast = fast_scale_conv_1x1(input, weights);
        auto ref = scale_conv_1x1_reference(input, weights);
        for (long i = 0; i < fast.size(); ++i)
            r.max_output_diff = std::max(r.max_output_diff,
                                         std::fabs(static_cast<double>(fast[i]) - ref[i]));
        if (r.max_output_diff > 1e-6)
            throw std::runtime_error("bench_conv: fast and reference outputs diverge");
    }

    using clock = std::chrono::steady_clock;
    auto median_of = [&](const std::function<void()>& fn) {
        for (int i = 0; i < warmup; ++i) fn();
        std::vector<double> us(static_cast<size_t>(runs));
        for (int i = 0; i < runs; ++i) {
            const auto t0 = clock::now();
            fn();
            us[static_cast<size_t>(i)] =
                std::chrono::duration<double, std::micro>(clock::now() - t0).count();
        }
        std::sort(us.begin(), us.end());
        return us[us.size() / 2];
    };

    r.fast_forward_us = median_of([&] { (void)fast_scale_conv_1x1(input, weights); });
    r.ref_forward_us = median_of([&] { (void)scale_conv_1x1_reference(input, weights); });

    auto backward_time = [&](bool fast) {
        Tape<T> tape;
        auto out = fast ? fast_scale_conv_1x1(input, weights, &tape)
                        : scale_conv_1x1_reference(input, weights, &tape);
        auto g = out.grad();
        for (long i = 0; i < out.size(); ++i) g[i] = T(1);
        const auto t0 = clock::now();
        tape.backward();
        return std::chrono::duration<double, std::micro>(clock::now() - t0).count();
    };
    auto median_bwd = [&](bool fast) {
        for (int i = 0; i < warmup; ++i) (void)backward_time(fast);
        std::vector<double> us(static_cast<size_t>(runs));
        for (int i = 0; i < runs; ++i) us[static_cast<size_t>(i)] = backward_time(fast);
        std::sort(us.begin(), us.end());
        return us[us.size() / 2];
    };
    r.fast_backward_us = median_bwd(true);
    r.ref_backward_us = median_bwd(false);
    r.forward_speedup = r.ref_forward_us / r.fast_forward_us;
    return r;
}

// ---------------------------------------------------------------------------
// Report persistence

inline nlohmann::json report_to_json(const EvalReport& r) {
    nlohmann::json seqs = nlohmann::json::array();
    for (const auto& sr : r.sequences) {
        nlohmann::json frames = nlohmann::json::array();
        for (const auto& f : sr.frames)
            frames.push_back({{"iou", f.iou},
                              {"center_error", f.center_error},
                              {"pred_scale", f.pred_scale},
                              {"true_scale", f.true_scale}});
        seqs.push_back({{"name", sr.name}, {"frames", frames}});
    }
    return {{"sequences", seqs},
            {"success_curve", r.success_curve},
            {"auc", r.auc},
            {"precision", r.precision},
            {"precision_threshold_px", r.precision_threshold_px},
            {"config_hash", r.config_hash},
            {"seed", r.seed}};
}

inline EvalReport report_from_json(const nlohmann::json& j) {
    EvalReport r;
    for (const auto& s : j.at("sequences")) {
        SequenceReport sr;
        sr.name = s.at("name").get<std::string>();
        for (const auto& f : s.at("frames")) {
            FrameMetric m;
            m.iou = f.at("iou").get<double>();
            m.center_error = f.at("center_error").get<double>();
            m.pred_scale = f.at("pred_scale").get<double>();
            m.true_scale = f.at("true_scale").get<double>();
            sr.frames.push_back(m);
        }
        r.sequences.push_back(std::move(sr));
    }
    r.success_curve = j.at("success_curve").get<std::vector<double>>();
    r.auc = j.at("auc").get<double>();
    r.precision = j.at("precision").get<double>();
    r.precision_threshold_px = j.at("precision_threshold_px").get<double>();
    r.config_hash = j.at("config_hash").get<uint64_t>();
    r.seed = j.at("seed").get<uint64_t>();
    return r;
}

inline void write_curves_csv(const std::string& path, const EvalReport& r) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << "threshold,success_rate\n";
    for (size_t j = 0; j < r.success_curve.size(); ++j)
        f << std::setprecision(10) << (j / 100.0) << "," << r.success_curve[j] << "\n";
}

inline void write_scale_trace_csv(const std::string& path, const SequenceReport& sr) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << "frame,pred_scale,true_scale\n";
    for (size_t t = 0; t < sr.frames.size(); ++t)
        f << t << "," << std::setprecision(10) << sr.frames[t].pred_scale << ","
          << sr.frames[t].true_scale << "\n";
}

inline void write_bench_csv(const std::string& path, const std::vector<BenchResult>& rows) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << "impl,size,fwd_us,bwd_us\n";
    for (const auto& r : rows) {
        f << "reference," << r.size_desc << "," << std::setprecision(10) << r.ref_forward_us << ","
          << r.ref_backward_us << "\n";
        f << "fast," << r.size_desc << "," << r.fast_forward_us << "," << r.fast_backward_us
          << "\n";
    }
}

}  // namespace setrack
