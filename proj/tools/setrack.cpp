// Command-line surface: dataset generation, training, tracking, evaluation,
// the translation diagnostic, the 1x1 benchmark and transfer initialization.

#include <iostream>

#include "CLI11.hpp"
#include "setrack/eval.hpp"
#include "setrack/transfer.hpp"

using namespace setrack;
namespace fs = std::filesystem;

namespace {

ModelConfig load_model_config(const std::string& path, const std::string& arch) {
    if (!path.empty()) {
        std::ifstream f(path);
        if (!f) throw std::runtime_error("cannot read model config " + path);
        return model_config_from_json(nlohmann::json::parse(f));
    }
    if (arch == "baseline") return desk_baseline_config();
    if (arch == "se") return desk_se_config();
    throw std::runtime_error("unknown --arch '" + arch + "' (expected baseline or se)");
}

int cmd_gen_data(const std::string& out, const std::string& preset, const std::string& mode,
                 uint64_t seed, int train_n, int val_n, int frames, int frame_size, int digits,
                 const std::string& glyphs, const std::string& backgrounds) {
    DatasetSpec ds;
    if (preset == "desk") {
        ds.train_sequences = 100;
        ds.val_sequences = 20;
        ds.sequence.length = 20;
    } else if (preset == "paper") {
        ds.train_sequences = 1000;
        ds.val_sequences = 100;
        ds.sequence.length = 100;
    } else {
        throw std::runtime_error("unknown --preset '" + preset + "'");
    }
    if (train_n > 0) ds.train_sequences = train_n;
    if (val_n > 0) ds.val_sequences = val_n;
    if (frames > 0) ds.sequence.length = frames;
    if (frame_size > 0) ds.sequence.frame_size = frame_size;
    if (digits > 0) ds.sequence.num_digits = digits;
    ds.sequence.scale_variation = (mode == "s");
    if (mode != "s" && mode != "t") throw std::runtime_error("--mode must be t or s");
    ds.sequence.glyph_dir = glyphs;
    ds.sequence.background_dir = backgrounds;
    ds.seed = seed;
    const uint64_t checksum = write_dataset(out, ds);
    std::cout << "dataset " << out << " checksum " << std::hex << checksum << std::dec << "\n";
    return 0;
}

int cmd_train(const std::string& data, const std::string& arch, const std::string& config_path,
              const std::string& init, const std::string& out, TrainConfig tc) {
    auto sequences = read_dataset(data, "train");
    auto model = build_model<float>(load_model_config(config_path, arch));
    if (!init.empty()) {
        load_checkpoint_into(model, init);
    } else {
        init_random(model, mix_seed(tc.seed, 7));
    }
    auto result = train(model, sequences, tc);
    fs::create_directories(out);
    save_checkpoint(model, (fs::path(out) / "checkpoint.json").string());
    write_loss_csv((fs::path(out) / "loss.csv").string(), result.curve);
    {
        std::ofstream f((fs::path(out) / "model_config.json").string());
        f << model_config_to_json(model.config).dump(2) << "\n";
    }
    std::cout << "trained " << model.config.type << " for " << tc.epochs << " epochs, final loss "
              << result.final_loss << ", checkpoint " << (fs::path(out) / "checkpoint.json").string()
              << "\n";
    return 0;
}

int cmd_track(const std::string& model_path, const std::string& sequence_dir,
              const std::string& out) {
    auto model = load_checkpoint<float>(model_path);
    auto seq = read_sequence(sequence_dir);
    auto fn = model_track_fn(model);
    auto outputs = fn(seq);
    std::ofstream f(out);
    if (!f) throw std::runtime_error("cannot write " + out);
    for (size_t t = 0; t < outputs.size(); ++t) {
        nlohmann::json line = {{"frame", t},
                               {"box",
                                {outputs[t].box.cx, outputs[t].box.cy, outputs[t].box.w,
                                 outputs[t].box.h}},
                               {"scale", outputs[t].scale}};
        f << line.dump() << "\n";
    }
    std::cout << "tracked " << outputs.size() << " frames -> " << out << "\n";
    return 0;
}

int cmd_eval(const std::string& model_path, const std::string& data, const std::string& part,
             double precision_px, const std::string& out) {
    auto model = load_checkpoint<float>(model_path);
    auto sequences = read_dataset(data, part);
    auto report = ope_eval(model_track_fn(model), sequences, precision_px);
    const auto cfg_json = model_config_to_json(model.config).dump();
    report.config_hash = fnv1a(cfg_json.data(), cfg_json.size());
    fs::create_directories(out);
    {
        std::ofstream f((fs::path(out) / "report.json").string());
        f << report_to_json(report).dump(1) << "\n";
    }
    write_curves_csv((fs::path(out) / "curves.csv").string(), report);
    if (!report.sequences.empty())
        write_scale_trace_csv((fs::path(out) / "scale_trace.csv").string(), report.sequences[0]);
    std::cout << "eval " << part << ": auc " << report.auc << " precision " << report.precision
              << " (" << report.sequences.size() << " sequences) -> " << out << "\n";
    return 0;
}

int cmd_diag_translation(const std::string& model_path, bool zero_pad, const std::string& out) {
    auto model = load_checkpoint<float>(model_path);
    // Deterministic probe: mild waves with a textured block at the center.
    Rng rng(20240);
    Tensor<float> img({1, 128, 128});
    for (int y = 0; y < 128; ++y)
        for (int x = 0; x < 128; ++x)
            img.at(0, y, x) =
                static_cast<float>(0.2 * std::sin(y / 9.0) * std::cos(x / 11.0) + rng.uniform(0, 0.02));
    for (int y = 56; y < 72; ++y)
        for (int x = 56; x < 72; ++x)
            img.at(0, y, x) += 1.0f + 0.5f * static_cast<float>(std::sin(y * 1.9) * std::sin(x * 1.7));
    auto diag = translation_diagnostic(model, img, zero_pad);
    fs::create_directories(out);
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& [shift, measured] : diag.shifts)
        rows.push_back({{"input_shift_px", shift}, {"heatmap_shift_px", measured}});
    nlohmann::json j = {{"rows", rows},
                        {"slope", diag.slope},
                        {"max_residual_px", diag.max_residual_px},
                        {"commutation_residual", diag.commutation_residual},
                        {"padding", zero_pad ? "zero (train-mode abuse)" : "circular"},
                        {"flagged", diag.flagged}};
    std::ofstream f((fs::path(out) / "diag_translation.json").string());
    f << j.dump(2) << "\n";
    std::cout << "translation diagnostic: slope " << diag.slope << ", max residual "
              << diag.max_residual_px << " px, flagged " << (diag.flagged ? "yes" : "no") << " -> "
              << out << "\n";
    return diag.flagged ? 2 : 0;
}

int cmd_bench_conv(int batch, int scales, int channels, int out_channels, int inter, int hw,
                   int runs, const std::string& out) {
    auto r = bench_conv_1x1<float>(batch, scales, channels, out_channels, inter, hw, 10, runs);
    fs::create_directories(out);
    write_bench_csv((fs::path(out) / "bench.csv").string(), {r});
    std::cout << "bench " << r.size_desc << ": fast " << r.fast_forward_us << "us vs reference "
              << r.ref_forward_us << "us forward (speedup " << r.forward_speedup << "x), backward "
              << r.fast_backward_us << "us vs " << r.ref_backward_us << "us\n";
    return 0;
}

int cmd_transfer_init(const std::string& source_path, const std::string& target_config,
                      const std::string& out) {
    auto source = load_checkpoint<float>(source_path);
    if (source.config.type != "baseline")
        throw std::runtime_error("transfer-init expects a baseline source checkpoint");
    ModelConfig cfg;
    if (!target_config.empty()) {
        std::ifstream f(target_config);
        if (!f) throw std::runtime_error("cannot read target config " + target_config);
        cfg = model_config_from_json(nlohmann::json::parse(f));
    } else {
        cfg = desk_se_config();
        cfg.input_channels = source.config.input_channels;
        cfg.convs = source.config.convs;
        cfg.inference = source.config.inference;
    }
    auto target = build_se_tracker<float>(cfg);
    transfer_model(source, target);
    save_checkpoint(target, out);
    std::cout << "transferred " << source_path << " -> " << out << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Scale-equivariant Siamese tracking toolkit"};
    app.require_subcommand(1);

    // gen-data
    std::string gd_out, gd_preset = "desk", gd_mode = "t", gd_glyphs, gd_backgrounds;
    uint64_t gd_seed = 0;
    int gd_train = 0, gd_val = 0, gd_frames = 0, gd_frame_size = 0, gd_digits = 0;
    auto* gen = app.add_subcommand("gen-data", "Generate a T-MNIST or S-MNIST dataset");
    gen->add_option("--out", gd_out, "Output dataset root")->required();
    gen->add_option("--preset", gd_preset, "desk (100/20 x 20 frames) or paper (1000/100 x 100)");
    gen->add_option("--mode", gd_mode, "t: translation only, s: translation+scaling");
    gen->add_option("--seed", gd_seed, "Dataset seed");
    gen->add_option("--train", gd_train, "Override train sequence count");
    gen->add_option("--val", gd_val, "Override val sequence count");
    gen->add_option("--frames", gd_frames, "Override frames per sequence");
    gen->add_option("--frame-size", gd_frame_size, "Override frame side length");
    gen->add_option("--digits", gd_digits, "Max digits per sequence (1..8)");
    gen->add_option("--glyphs", gd_glyphs, "MNIST IDX directory (default: built-in font)");
    gen->add_option("--backgrounds", gd_backgrounds, "PGM background directory (default: noise)");

    // train
    std::string tr_data, tr_arch = "baseline", tr_config, tr_init, tr_out;
    TrainConfig tc;
    auto* trn = app.add_subcommand("train", "Train a tracker on a generated dataset");
    trn->add_option("--data", tr_data, "Dataset root")->required();
    trn->add_option("--arch", tr_arch, "baseline or se (ignored with --model-config)");
    trn->add_option("--model-config", tr_config, "Model architecture JSON");
    trn->add_option("--init", tr_init, "Checkpoint to start from (e.g. transfer-init output)");
    trn->add_option("--out", tr_out, "Run directory")->required();
    trn->add_option("--epochs", tc.epochs, "Training epochs");
    trn->add_option("--batch", tc.batch_size, "Mini-batch size");
    trn->add_option("--lr-start", tc.lr_start, "Initial learning rate");
    trn->add_option("--lr-end", tc.lr_end, "Final learning rate");
    trn->add_option("--momentum", tc.momentum, "SGD momentum");
    trn->add_option("--weight-decay", tc.weight_decay, "L2 weight decay");
    trn->add_option("--label-radius", tc.label_radius, "Positive-label radius in response cells");
    trn->add_option("--pairs", tc.pairs_per_sequence, "Training pairs per sequence per epoch");
    trn->add_option("--seed", tc.seed, "Training seed");

    // track
    std::string tk_model, tk_seq, tk_out;
    auto* tk = app.add_subcommand("track", "Track one sequence and dump per-frame boxes");
    tk->add_option("--model", tk_model, "Checkpoint JSON")->required();
    tk->add_option("--sequence", tk_seq, "Sequence directory (seq_xxxx)")->required();
    tk->add_option("--out", tk_out, "Output JSONL path")->required();

    // eval
    std::string ev_model, ev_data, ev_part = "val", ev_out;
    double ev_precision = 5.0;
    auto* ev = app.add_subcommand("eval", "One-pass evaluation over a dataset part");
    ev->add_option("--model", ev_model, "Checkpoint JSON")->required();
    ev->add_option("--data", ev_data, "Dataset root")->required();
    ev->add_option("--part", ev_part, "train or val");
    ev->add_option("--precision-px", ev_precision, "Precision threshold in pixels");
    ev->add_option("--out", ev_out, "Run directory")->required();

    // diag-translation
    std::string dg_model, dg_out;
    bool dg_zero = false;
    auto* dg = app.add_subcommand("diag-translation", "Input-shift vs heatmap-shift diagnostic");
    dg->add_option("--model", dg_model, "Checkpoint JSON")->required();
    dg->add_option("--out", dg_out, "Run directory")->required();
    dg->add_flag("--zero-pad", dg_zero, "Force zero padding in training mode (negative control)");

    // bench-conv
    std::string bc_out;
    int bc_batch = 2, bc_scales = 3, bc_channels = 48, bc_out_ch = 48, bc_inter = 2, bc_hw = 24,
        bc_runs = 100;
    auto* bc = app.add_subcommand("bench-conv", "Fast 1x1 scale-conv vs generic reference path");
    bc->add_option("--out", bc_out, "Run directory")->required();
    bc->add_option("--batch", bc_batch, "Batch size");
    bc->add_option("--scales", bc_scales, "Scale-axis length");
    bc->add_option("--channels", bc_channels, "Input channels");
    bc->add_option("--out-channels", bc_out_ch, "Output channels");
    bc->add_option("--inter", bc_inter, "Inter-scale extent");
    bc->add_option("--hw", bc_hw, "Spatial side length");
    bc->add_option("--runs", bc_runs, "Timed runs (median reported)");

    // transfer-init
    std::string ti_source, ti_config, ti_out;
    auto* ti = app.add_subcommand("transfer-init",
                                  "Initialize a scale-equivariant model from a baseline checkpoint");
    ti->add_option("--source", ti_source, "Baseline checkpoint JSON")->required();
    ti->add_option("--target-config", ti_config, "SE architecture JSON (default: source widths)");
    ti->add_option("--out", ti_out, "Output checkpoint path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed())
            return cmd_gen_data(gd_out, gd_preset, gd_mode, gd_seed, gd_train, gd_val, gd_frames,
                                gd_frame_size, gd_digits, gd_glyphs, gd_backgrounds);
        if (trn->parsed()) return cmd_train(tr_data, tr_arch, tr_config, tr_init, tr_out, tc);
        if (tk->parsed()) return cmd_track(tk_model, tk_seq, tk_out);
        if (ev->parsed()) return cmd_eval(ev_model, ev_data, ev_part, ev_precision, ev_out);
        if (dg->parsed()) return cmd_diag_translation(dg_model, dg_zero, dg_out);
        if (bc->parsed())
            return cmd_bench_conv(bc_batch, bc_scales, bc_channels, bc_out_ch, bc_inter, bc_hw,
                                  bc_runs, bc_out);
        if (ti->parsed()) return cmd_transfer_init(ti_source, ti_config, ti_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
