// Synthetic digit-tracking sequences with exact ground truth. Each sequence
// composites a few digit glyphs over a static background; every digit follows
// a smoothed Brownian path, and in scale-variation mode its size follows the
// sine rule s_i(t) = ((h-l)/2)(sin(t/4 + beta_i) + 1) + l. Sequences are a
// pure function of their spec (seed included); glyphs come from MNIST IDX
// files when a path is configured and from a built-in bitmap font otherwise.

#pragma once

#include <array>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "setrack/bicubic.hpp"
#include "setrack/tensor.hpp"

namespace setrack {

struct Image8 {
    int h = 0, w = 0;
    std::vector<uint8_t> px;

    Image8() = default;
    Image8(int h_, int w_) : h(h_), w(w_), px(static_cast<size_t>(h_) * w_, 0) {}
    uint8_t& at(int y, int x) { return px[static_cast<size_t>(y) * w + x]; }
    uint8_t at(int y, int x) const { return px[static_cast<size_t>(y) * w + x]; }
    bool operator==(const Image8&) const = default;
};

// Box center (cx, cy) and size in continuous pixel coordinates: the box spans
// [cx - w/2, cx + w/2) x [cy - h/2, cy + h/2).
struct Box {
    double cx = 0, cy = 0, w = 0, h = 0;
};

inline double box_iou(const Box& a, const Box& b) {
    const double ax0 = a.cx - a.w / 2, ax1 = a.cx + a.w / 2;
    const double ay0 = a.cy - a.h / 2, ay1 = a.cy + a.h / 2;
    const double bx0 = b.cx - b.w / 2, bx1 = b.cx + b.w / 2;
    const double by0 = b.cy - b.h / 2, by1 = b.cy + b.h / 2;
    const double iw = std::max(0.0, std::min(ax1, bx1) - std::max(ax0, bx0));
    const double ih = std::max(0.0, std::min(ay1, by1) - std::max(ay0, by0));
    const double inter = iw * ih;
    const double uni = a.w * a.h + b.w * b.h - inter;
    return uni <= 0 ? 0.0 : inter / uni;
}

struct ObjectAnnotation {
    int id = 0;
    Box box;
    double scale = 1.0;
};

struct FrameAnnotation {
    int frame = 0;
    std::vector<ObjectAnnotation> objects;
};

struct SequenceSpec {
    int num_digits = 3;  // upper bound; the actual count is sampled in [1, num_digits]
    int length = 20;
    int frame_size = 64;
    double scale_low = 0.67;
    double scale_high = 1.5;
    bool scale_variation = false;  // false: translation only, true: sine-rule scaling
    double motion_sigma = 2.0;
    int smooth_window = 5;
    int glyph_size = 16;
    uint64_t seed = 0;
    std::string glyph_dir;       // MNIST IDX directory; empty selects the built-in font
    std::string background_dir;  // PGM directory; empty selects procedural noise

    void validate() const {
        if (num_digits < 1 || num_digits > 8)
            throw std::invalid_argument("sequence spec: num_digits must be in [1, 8]");
        if (length < 1) throw std::invalid_argument("sequence spec: length must be positive");
        if (scale_low > scale_high)
            throw std::invalid_argument("sequence spec: scale_low must not exceed scale_high");
        if (frame_size < 16) throw std::invalid_argument("sequence spec: frame too small");
    }
};

struct Sequence {
    SequenceSpec spec;
    std::vector<Image8> frames;
    std::vector<FrameAnnotation> annotations;
    std::vector<double> betas;    // per digit
    std::vector<int> digit_ids;   // glyph class per digit
    int target_id = 0;

    const Box& box_of(int frame, int id) const {
        for (const auto& o : annotations[static_cast<size_t>(frame)].objects)
            if (o.id == id) return o.box;
        throw std::out_of_range("sequence: no annotation for object id");
    }
    double scale_of(int frame, int id) const {
        for (const auto& o : annotations[static_cast<size_t>(frame)].objects)
            if (o.id == id) return o.scale;
        throw std::out_of_range("sequence: no annotation for object id");
    }
};

// s_i(t) = ((h - l)/2) [sin(t/4 + beta) + 1] + l
inline double sine_scale(int t, double beta, double l, double h) {
    if (l > h) throw std::invalid_argument("sine_scale: l must not exceed h");
    return 0.5 * (h - l) * (std::sin(t / 4.0 + beta) + 1.0) + l;
}

inline double reflect_into(double v, double lo, double hi) {
    if (hi <= lo) return lo;
    const double range = 2.0 * (hi - lo);
    double t = std::fmod(v - lo, range);
    if (t < 0) t += range;
    return t <= hi - lo ? lo + t : hi - (t - (hi - lo));
}

// Smoothed Brownian positions: cumulative Gaussian steps, moving-average
// smoothed, reflected into [lo, hi] so the digit stays visible.
inline std::vector<std::array<double, 2>> brownian_path(int length, double sigma, int window,
                                                        double lo, double hi, double start_x,
                                                        double start_y, Rng& rng) {
    if (window < 1) throw std::invalid_argument("brownian_path: window must be >= 1");
    std::vector<double> rx(static_cast<size_t>(length)), ry(static_cast<size_t>(length));
    double ax = 0, ay = 0;
    for (int t = 0; t < length; ++t) {
        if (t > 0) {
            ax += rng.gaussian() * sigma;
            ay += rng.gaussian() * sigma;
        }
        rx[static_cast<size_t>(t)] = ax;
        ry[static_cast<size_t>(t)] = ay;
    }
    std::vector<std::array<double, 2>> out(static_cast<size_t>(length));
    const int half = window / 2;
    for (int t = 0; t < length; ++t) {
        double sx = 0, sy = 0;
        int n = 0;
        for (int k = std::max(0, t - half); k <= std::min(length - 1, t + half); ++k) {
            sx += rx[static_cast<size_t>(k)];
            sy += ry[static_cast<size_t>(k)];
            ++n;
        }
        out[static_cast<size_t>(t)] = {reflect_into(start_x + sx / n, lo, hi),
                                       reflect_into(start_y + sy / n, lo, hi)};
    }
    return out;
}

// ---------------------------------------------------------------------------
// Glyphs

namespace detail {

// 5x7 bitmap font, rows as 5-bit masks (bit 4 = leftmost column).
inline const std::array<std::array<uint8_t, 7>, 10>& digit_font() {
    static const std::array<std::array<uint8_t, 7>, 10> font = {{
        {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E},  // 0
        {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E},  // 1
        {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F},  // 2
        {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E},  // 3
        {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02},  // 4
        {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E},  // 5
        {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E},  // 6
        {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08},  // 7
        {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E},  // 8
        {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C},  // 9
    }};
    return font;
}

inline uint32_t read_be32(std::istream& s) {
    uint8_t b[4];
    s.read(reinterpret_cast<char*>(b), 4);
    return (static_cast<uint32_t>(b[0]) << 24) | (static_cast<uint32_t>(b[1]) << 16) |
           (static_cast<uint32_t>(b[2]) << 8) | b[3];
}

}  // namespace detail

// Digit images in [0, 255], one stack per class.
class GlyphSource {
public:
    static GlyphSource procedural(int glyph_size) {
        GlyphSource g;
        for (int d = 0; d < 10; ++d) {
            Tensor<double> bitmap({7, 7});
            for (int y = 0; y < 7; ++y)
                for (int x = 0; x < 5; ++x)
                    if (detail::digit_font()[static_cast<size_t>(d)][static_cast<size_t>(y)] &
                        (0x10 >> x))
                        bitmap.at(y, x + 1) = 255.0;
            auto glyph = bicubic_resize(bitmap, glyph_size / 7.0);
            for (long i = 0; i < glyph.size(); ++i)
                glyph[i] = std::clamp(glyph[i], 0.0, 255.0);
            g.classes_[static_cast<size_t>(d)].push_back(std::move(glyph));
        }
        return g;
    }

    // Reads MNIST IDX files (train-images-idx3-ubyte / train-labels-idx1-ubyte)
    // and rescales the 28x28 digits to the requested size.
    static GlyphSource mnist(const std::string& dir, int glyph_size, int max_per_class = 64) {
        namespace fs = std::filesystem;
        const fs::path images = fs::path(dir) / "train-images-idx3-ubyte";
        const fs::path labels = fs::path(dir) / "train-labels-idx1-ubyte";
        std::ifstream fi(images, std::ios::binary), fl(labels, std::ios::binary);
        if (!fi || !fl)
            throw std::runtime_error("glyphs: cannot open MNIST IDX files under " + dir);
        if (detail::read_be32(fi) != 2051 || detail::read_be32(fl) != 2049)
            throw std::runtime_error("glyphs: bad IDX magic");
        const uint32_t n = detail::read_be32(fi);
        if (detail::read_be32(fl) != n) throw std::runtime_error("glyphs: image/label count mismatch");
        const uint32_t rows = detail::read_be32(fi), cols = detail::read_be32(fi);

        GlyphSource g;
        std::vector<uint8_t> buf(static_cast<size_t>(rows) * cols);
        for (uint32_t i = 0; i < n; ++i) {
            fi.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
            uint8_t label = 0;
            fl.read(reinterpret_cast<char*>(&label), 1);
            if (!fi || !fl) throw std::runtime_error("glyphs: truncated IDX file");
            if (label > 9) continue;
            auto& cls = g.classes_[label];
            if (static_cast<int>(cls.size()) >= max_per_class) continue;
            Tensor<double> img({static_cast<int>(rows), static_cast<int>(cols)});
            for (long p = 0; p < img.size(); ++p) img[p] = buf[static_cast<size_t>(p)];
            auto glyph = bicubic_resize(img, static_cast<double>(glyph_size) / rows);
            for (long p = 0; p < glyph.size(); ++p) glyph[p] = std::clamp(glyph[p], 0.0, 255.0);
            cls.push_back(std::move(glyph));
        }
        return g;
    }

    static GlyphSource open(const std::string& dir, int glyph_size) {
        return dir.empty() ? procedural(glyph_size) : mnist(dir, glyph_size);
    }

    const Tensor<double>& glyph(int digit, uint64_t variant) const {
        const auto& cls = classes_[static_cast<size_t>(digit)];
        if (cls.empty()) throw std::runtime_error("glyphs: no samples for digit class");
        return cls[static_cast<size_t>(variant % cls.size())];
    }

private:
    std::array<std::vector<Tensor<double>>, 10> classes_;
};

// ---------------------------------------------------------------------------
// Backgrounds

// Two-octave value noise, bilinear between lattice points; static per sequence.
inline Tensor<double> value_noise_background(int size, Rng& rng) {
    Tensor<double> bg({size, size});
    for (int cell : {8, 4}) {
        const int n = size / cell + 2;
        std::vector<double> lattice(static_cast<size_t>(n) * n);
        for (auto& v : lattice) v = rng.uniform(0.0, 1.0);
        const double amp = cell == 8 ? 70.0 : 25.0;
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) {
                const double fy = static_cast<double>(y) / cell, fx = static_cast<double>(x) / cell;
                const int iy = static_cast<int>(fy), ix = static_cast<int>(fx);
                const double ty = fy - iy, tx = fx - ix;
                const double v00 = lattice[static_cast<size_t>(iy) * n + ix];
                const double v01 = lattice[static_cast<size_t>(iy) * n + ix + 1];
                const double v10 = lattice[static_cast<size_t>(iy + 1) * n + ix];
                const double v11 = lattice[static_cast<size_t>(iy + 1) * n + ix + 1];
                bg.at(y, x) += amp * ((1 - ty) * ((1 - tx) * v00 + tx * v01) +
                                      ty * ((1 - tx) * v10 + tx * v11));
            }
    }
    for (long i = 0; i < bg.size(); ++i) bg[i] = std::clamp(bg[i] + 20.0, 0.0, 255.0);
    return bg;
}

inline Image8 read_pgm(const std::string& path);

inline Tensor<double> background_for(const SequenceSpec& spec, Rng& rng) {
    if (spec.background_dir.empty()) return value_noise_background(spec.frame_size, rng);
    namespace fs = std::filesystem;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(spec.background_dir))
        if (e.path().extension() == ".pgm") files.push_back(e.path());
    if (files.empty())
        throw std::runtime_error("backgrounds: no .pgm files under " + spec.background_dir);
    std::sort(files.begin(), files.end());
    const Image8 img = read_pgm(files[rng.next_u64() % files.size()].string());
    Tensor<double> t({img.h, img.w});
    for (long i = 0; i < t.size(); ++i) t[i] = img.px[static_cast<size_t>(i)];
    auto scaled = detail::resize_generic(t, spec.frame_size, spec.frame_size,
                                         static_cast<double>(spec.frame_size) / img.h,
                                         static_cast<double>(spec.frame_size) / img.w, false);
    for (long i = 0; i < scaled.size(); ++i) scaled[i] = std::clamp(scaled[i], 0.0, 255.0);
    return scaled;
}

// ---------------------------------------------------------------------------
// Rendering

inline Sequence render_sequence(const SequenceSpec& spec, const GlyphSource& glyphs) {
    spec.validate();
    const int F = spec.frame_size;
    const double max_glyph = spec.glyph_size * std::max(1.0, spec.scale_high);
    if (max_glyph + 2 >= F)
        throw std::invalid_argument("render_sequence: digit larger than frame after scaling");

    uint64_t root = spec.seed;
    Rng rng(mix_seed(root, 0));

    Sequence seq;
    seq.spec = spec;
    const int count = 1 + static_cast<int>(rng.next_u64() %
                                           static_cast<uint64_t>(spec.num_digits));
    const double margin = max_glyph / 2.0 + 1.0;

    std::vector<std::vector<std::array<double, 2>>> paths;
    for (int i = 0; i < count; ++i) {
        seq.digit_ids.push_back(static_cast<int>(rng.next_u64() % 10));
        seq.betas.push_back(rng.uniform(0.0, 100.0));
        const double sx = rng.uniform(margin, F - margin);
        const double sy = rng.uniform(margin, F - margin);
        paths.push_back(brownian_path(spec.length, spec.motion_sigma, spec.smooth_window, margin,
                                      F - margin, sx, sy, rng));
    }

    Tensor<double> bg = background_for(spec, rng);

    for (int t = 0; t < spec.length; ++t) {
        Tensor<double> frame = bg.clone();
        FrameAnnotation ann;
        ann.frame = t;
        for (int i = 0; i < count; ++i) {  // painter's order by object id
            const double s = spec.scale_variation
                                 ? sine_scale(t, seq.betas[static_cast<size_t>(i)], spec.scale_low,
                                              spec.scale_high)
                                 : 1.0;
            const auto& glyph = glyphs.glyph(seq.digit_ids[static_cast<size_t>(i)],
                                             root ^ static_cast<uint64_t>(i * 97 + 13));
            Tensor<double> drawn = s == 1.0 ? glyph.clone() : bicubic_resize(glyph, s);
            const int gh = drawn.dim(0), gw = drawn.dim(1);
            const auto [px, py] = paths[static_cast<size_t>(i)][static_cast<size_t>(t)];
            const int x0 = static_cast<int>(std::lround(px - gw / 2.0));
            const int y0 = static_cast<int>(std::lround(py - gh / 2.0));
            for (int y = 0; y < gh; ++y)
                for (int x = 0; x < gw; ++x) {
                    const int fy = y0 + y, fx = x0 + x;
                    if (fy < 0 || fy >= F || fx < 0 || fx >= F) continue;
                    const double alpha = std::clamp(drawn.at(y, x), 0.0, 255.0) / 255.0;
                    frame.at(fy, fx) = frame.at(fy, fx) * (1.0 - alpha) + 255.0 * alpha;
                }
            ObjectAnnotation obj;
            obj.id = i;
            obj.box = {x0 + gw / 2.0, y0 + gh / 2.0, static_cast<double>(gw),
                       static_cast<double>(gh)};
            obj.scale = s;
            ann.objects.push_back(obj);
        }
        Image8 img(F, F);
        for (int y = 0; y < F; ++y)
            for (int x = 0; x < F; ++x)
                img.at(y, x) = static_cast<uint8_t>(std::lround(std::clamp(frame.at(y, x), 0.0, 255.0)));
        seq.frames.push_back(std::move(img));
        seq.annotations.push_back(std::move(ann));
    }
    return seq;
}

// ---------------------------------------------------------------------------
// Persistence: root/{train,val}/seq_####/frame_####.pgm + annotations.jsonl
// + spec.json.

inline void write_pgm(const std::string& path, const Image8& img) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << "P5\n" << img.w << " " << img.h << "\n255\n";
    f.write(reinterpret_cast<const char*>(img.px.data()), static_cast<std::streamsize>(img.px.size()));
}

inline Image8 read_pgm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + path);
    std::string magic;
    f >> magic;
    if (magic != "P5") throw std::runtime_error("not a binary PGM: " + path);
    int w = 0, h = 0, maxval = 0;
    f >> w >> h >> maxval;
    if (maxval != 255 || w <= 0 || h <= 0) throw std::runtime_error("unsupported PGM: " + path);
    f.get();  // single whitespace after the header
    Image8 img(h, w);
    f.read(reinterpret_cast<char*>(img.px.data()), static_cast<std::streamsize>(img.px.size()));
    if (!f) throw std::runtime_error("truncated PGM: " + path);
    return img;
}

inline nlohmann::json sequence_spec_to_json(const SequenceSpec& s) {
    return {{"num_digits", s.num_digits},
            {"length", s.length},
            {"frame_size", s.frame_size},
            {"scale_low", s.scale_low},
            {"scale_high", s.scale_high},
            {"scale_variation", s.scale_variation},
            {"motion_sigma", s.motion_sigma},
            {"smooth_window", s.smooth_window},
            {"glyph_size", s.glyph_size},
            {"seed", s.seed},
            {"glyph_dir", s.glyph_dir},
            {"background_dir", s.background_dir}};
}

inline SequenceSpec sequence_spec_from_json(const nlohmann::json& j) {
    SequenceSpec s;
    s.num_digits = j.at("num_digits").get<int>();
    s.length = j.at("length").get<int>();
    s.frame_size = j.at("frame_size").get<int>();
    s.scale_low = j.at("scale_low").get<double>();
    s.scale_high = j.at("scale_high").get<double>();
    s.scale_variation = j.at("scale_variation").get<bool>();
    s.motion_sigma = j.at("motion_sigma").get<double>();
    s.smooth_window = j.at("smooth_window").get<int>();
    s.glyph_size = j.at("glyph_size").get<int>();
    s.seed = j.at("seed").get<uint64_t>();
    s.glyph_dir = j.value("glyph_dir", "");
    s.background_dir = j.value("background_dir", "");
    return s;
}

inline void write_sequence(const std::string& dir, const Sequence& seq) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    char name[32];
    for (size_t t = 0; t < seq.frames.size(); ++t) {
        std::snprintf(name, sizeof(name), "frame_%04zu.pgm", t);
        write_pgm((fs::path(dir) / name).string(), seq.frames[t]);
    }
    std::ofstream ann((fs::path(dir) / "annotations.jsonl").string());
    if (!ann) throw std::runtime_error("cannot write annotations under " + dir);
    for (const auto& fa : seq.annotations) {
        nlohmann::json objs = nlohmann::json::array();
        for (const auto& o : fa.objects)
            objs.push_back({{"id", o.id},
                            {"box", {o.box.cx, o.box.cy, o.box.w, o.box.h}},
                            {"scale", o.scale}});
        nlohmann::json line = {{"frame", fa.frame}, {"objects", objs}};
        ann << line.dump() << "\n";
    }
    nlohmann::json spec = sequence_spec_to_json(seq.spec);
    spec["betas"] = seq.betas;
    spec["digits"] = seq.digit_ids;
    spec["target_id"] = seq.target_id;
    std::ofstream sf((fs::path(dir) / "spec.json").string());
    sf << spec.dump(2) << "\n";
}

inline Sequence read_sequence(const std::string& dir) {
    namespace fs = std::filesystem;
    std::ifstream sf((fs::path(dir) / "spec.json").string());
    if (!sf) throw std::runtime_error("missing spec.json under " + dir);
    nlohmann::json spec_json = nlohmann::json::parse(sf);
    Sequence seq;
    seq.spec = sequence_spec_from_json(spec_json);
    seq.betas = spec_json.value("betas", std::vector<double>{});
    seq.digit_ids = spec_json.value("digits", std::vector<int>{});
    seq.target_id = spec_json.value("target_id", 0);

    std::ifstream ann((fs::path(dir) / "annotations.jsonl").string());
    if (!ann) throw std::runtime_error("missing annotations.jsonl under " + dir);
    std::string line;
    int line_no = 0;
    while (std::getline(ann, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
            FrameAnnotation fa;
            fa.frame = j.at("frame").get<int>();
            for (const auto& o : j.at("objects")) {
                ObjectAnnotation obj;
                obj.id = o.at("id").get<int>();
                auto b = o.at("box");
                obj.box = {b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(),
                           b.at(3).get<double>()};
                obj.scale = o.at("scale").get<double>();
                fa.objects.push_back(obj);
            }
            seq.annotations.push_back(std::move(fa));
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error("malformed annotation line " + std::to_string(line_no) +
                                     " in " + dir + ": " + e.what());
        }
    }

    char name[32];
    for (int t = 0; t < seq.spec.length; ++t) {
        std::snprintf(name, sizeof(name), "frame_%04d.pgm", t);
        const auto path = fs::path(dir) / name;
        if (!fs::exists(path)) throw std::runtime_error("missing frame file " + path.string());
        seq.frames.push_back(read_pgm(path.string()));
    }
    if (static_cast<int>(seq.annotations.size()) != seq.spec.length)
        throw std::runtime_error("annotation/frame count mismatch under " + dir);
    return seq;
}

struct DatasetSpec {
    SequenceSpec sequence;
    int train_sequences = 100;
    int val_sequences = 20;
    uint64_t seed = 0;
};

inline uint64_t fnv1a(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const uint8_t*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline uint64_t sequence_checksum(const Sequence& seq, uint64_t h = 0xcbf29ce484222325ULL) {
    for (const auto& f : seq.frames) h = fnv1a(f.px.data(), f.px.size(), h);
    for (const auto& fa : seq.annotations)
        for (const auto& o : fa.objects) {
            h = fnv1a(&o.box, sizeof(o.box), h);
            h = fnv1a(&o.scale, sizeof(o.scale), h);
        }
    return h;
}

// Generates and persists the dataset; per-sequence seeds derive from the
// dataset seed so generation is order-independent and reproducible.
inline uint64_t write_dataset(const std::string& root, const DatasetSpec& ds) {
    namespace fs = std::filesystem;
    const GlyphSource glyphs = GlyphSource::open(ds.sequence.glyph_dir, ds.sequence.glyph_size);
    uint64_t checksum = 0xcbf29ce484222325ULL;
    char name[32];
    for (int part = 0; part < 2; ++part) {
        const int n = part == 0 ? ds.train_sequences : ds.val_sequences;
        const std::string sub = part == 0 ? "train" : "val";
        for (int i = 0; i < n; ++i) {
            SequenceSpec s = ds.sequence;
            s.seed = mix_seed(ds.seed, static_cast<uint64_t>(part) * 1000003ULL +
                                           static_cast<uint64_t>(i));
            Sequence seq = render_sequence(s, glyphs);
            std::snprintf(name, sizeof(name), "seq_%04d", i);
            write_sequence((fs::path(root) / sub / name).string(), seq);
            checksum = sequence_checksum(seq, checksum);
        }
    }
    nlohmann::json manifest = {{"seed", ds.seed},
                               {"train_sequences", ds.train_sequences},
                               {"val_sequences", ds.val_sequences},
                               {"sequence", sequence_spec_to_json(ds.sequence)},
                               {"checksum", checksum}};
    std::ofstream mf((fs::path(root) / "manifest.json").string());
    mf << manifest.dump(2) << "\n";
    return checksum;
}

inline std::vector<Sequence> read_dataset(const std::string& root, const std::string& part) {
    namespace fs = std::filesystem;
    const fs::path dir = fs::path(root) / part;
    if (!fs::exists(dir)) throw std::runtime_error("no sequences under " + dir.string());
    std::vector<fs::path> seq_dirs;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_directory() && e.path().filename().string().rfind("seq_", 0) == 0)
            seq_dirs.push_back(e.path());
    if (seq_dirs.empty()) throw std::runtime_error("no sequences under " + dir.string());
    std::sort(seq_dirs.begin(), seq_dirs.end());
    std::vector<Sequence> out;
    out.reserve(seq_dirs.size());
    for (const auto& d : seq_dirs) out.push_back(read_sequence(d.string()));
    return out;
}

// Model input: [1, H, W] in [-0.5, 0.5].
template <typename T>
Tensor<T> image_to_tensor(const Image8& img) {
    Tensor<T> t({1, img.h, img.w});
    for (long i = 0; i < t.size(); ++i)
        t[i] = static_cast<T>(img.px[static_cast<size_t>(i)] / 255.0 - 0.5);
    return t;
}

}  // namespace setrack
