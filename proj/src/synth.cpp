#include "pdp/synth.hpp"

#include "pdp/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pdp {

namespace {

struct SceneLayout {
    int size = 0;
    double head_x = 0, head_y = 0;
    std::vector<std::pair<double, double>> distractors;
    double focal_x = 0, focal_y = 0;
    std::vector<float> background; // 3*S*S
};

struct Radii {
    double head, pupil, object, distractor;
};

Radii radii_for(int s) {
    return {std::max(3.0, 0.07 * s), std::max(1.0, 0.07 * s / 3.0),
            std::max(2.0, 0.05 * s), std::max(2.0, 0.04 * s)};
}

double px(double norm, int s) { return norm * (s - 1); }

SceneLayout make_layout(Rng& rng, const GeneratorSpec& spec) {
    SceneLayout l;
    l.size = spec.image_size;
    l.head_x = rng.uniform(0.15, 0.85);
    l.head_y = rng.uniform(0.15, 0.85);
    const int ndist = spec.min_distractors +
                      rng.uniform_int(spec.max_distractors - spec.min_distractors + 1);
    for (int i = 0; i < ndist; ++i)
        l.distractors.emplace_back(rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0));
    l.focal_x = rng.uniform(0.0, 1.0);
    l.focal_y = rng.uniform(0.0, 1.0);
    l.background.resize(static_cast<size_t>(3) * l.size * l.size);
    double base[3];
    for (double& b : base) b = rng.uniform(0.0, 0.15);
    for (int ch = 0; ch < 3; ++ch)
        for (int i = 0; i < l.size * l.size; ++i)
            l.background[static_cast<size_t>(ch) * l.size * l.size + i] =
                static_cast<float>(base[ch] + rng.uniform(0.0, 0.05));
    return l;
}

// First positive ray parameter at which head + t*dir crosses the unit box.
double exit_distance(double hx, double hy, double dx, double dy) {
    double best = 1e9;
    auto consider = [&](double t) {
        if (t > 1e-9) best = std::min(best, t);
    };
    if (dx > 1e-12) consider((1.0 - hx) / dx);
    if (dx < -1e-12) consider((0.0 - hx) / dx);
    if (dy > 1e-12) consider((1.0 - hy) / dy);
    if (dy < -1e-12) consider((0.0 - hy) / dy);
    return best;
}

std::pair<double, double> draw_target(Rng& rng, const GeneratorSpec& spec,
                                      const SceneLayout& l) {
    if (rng.uniform() < spec.p_in_frame)
        return {rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95)};
    const double theta = rng.uniform(0.0, 2.0 * M_PI);
    const double dx = std::cos(theta), dy = std::sin(theta);
    const double d = exit_distance(l.head_x, l.head_y, dx, dy) + rng.uniform(0.05, 0.3);
    return {l.head_x + d * dx, l.head_y + d * dy};
}

// Distance from point p to segment a-b, all in pixel coordinates.
double seg_dist(double px_, double py_, double ax, double ay, double bx, double by) {
    const double vx = bx - ax, vy = by - ay;
    const double len2 = vx * vx + vy * vy;
    double t = len2 > 0 ? ((px_ - ax) * vx + (py_ - ay) * vy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return std::hypot(px_ - (ax + t * vx), py_ - (ay + t * vy));
}

SceneInput render_scene(const SceneLayout& l, double tx, double ty, bool in_frame) {
    const int s = l.size;
    const Radii rad = radii_for(s);
    SceneInput out;
    out.size = s;
    out.scene = l.background;
    out.head_mask.assign(static_cast<size_t>(s) * s, 0.0f);
    out.depth.assign(static_cast<size_t>(s) * s, 0.0f);
    out.head_crop.assign(static_cast<size_t>(3) * s * s, 0.0f);

    const double hx = px(l.head_x, s), hy = px(l.head_y, s);
    double dirx = tx - l.head_x, diry = ty - l.head_y;
    const double dlen = std::hypot(dirx, diry);
    if (dlen > 1e-12) {
        dirx /= dlen;
        diry /= dlen;
    } else {
        dirx = 1.0;
        diry = 0.0;
    }

    // Ray segment in pixel space, from just past the head blob to the target
    // (or the frame boundary when the target is outside).
    const double ray_len =
        in_frame ? dlen : exit_distance(l.head_x, l.head_y, dirx, diry) + 0.05;
    const double ax = hx + dirx * rad.head * 1.3;
    const double ay = hy + diry * rad.head * 1.3;
    const double bx = px(l.head_x + dirx * ray_len, s);
    const double by = px(l.head_y + diry * ray_len, s);

    const double tx_px = px(tx, s), ty_px = px(ty, s);
    const double pupil_x = hx + dirx * 0.45 * rad.head;
    const double pupil_y = hy + diry * 0.45 * rad.head;
    const double fx = px(l.focal_x, s), fy = px(l.focal_y, s);
    const double diag = std::hypot(double(s - 1), double(s - 1));

    auto ch = [&](int c) { return out.scene.data() + static_cast<size_t>(c) * s * s; };

    for (int r = 0; r < s; ++r) {
        for (int c = 0; c < s; ++c) {
            const size_t i = static_cast<size_t>(r) * s + c;
            // ray brightness in channel 0
            const double dr = seg_dist(c, r, ax, ay, bx, by);
            ch(0)[i] = static_cast<float>(
                std::min(1.0, ch(0)[i] + 0.45 * std::exp(-dr * dr / (2.0 * 1.0))));
            // target object in channel 1
            if (in_frame && std::hypot(c - tx_px, r - ty_px) <= rad.object)
                ch(1)[i] = 0.85f;
            // distractors in channel 2
            for (const auto& [ux, uy] : l.distractors)
                if (std::hypot(c - px(ux, s), r - px(uy, s)) <= rad.distractor)
                    ch(2)[i] = 0.6f;
            // head blob with pupil in all channels
            if (std::hypot(c - hx, r - hy) <= rad.head) {
                for (int cc = 0; cc < 3; ++cc) ch(cc)[i] = 0.9f;
                if (std::hypot(c - pupil_x, r - pupil_y) <= rad.pupil)
                    for (int cc = 0; cc < 3; ++cc) ch(cc)[i] = 0.1f;
            }
            // depth: radial gradient, target object at a distinct depth
            double d = std::hypot(c - fx, r - fy) / diag;
            if (in_frame && std::hypot(c - tx_px, r - ty_px) <= rad.object)
                d = std::clamp(std::hypot(tx_px - fx, ty_px - fy) / diag + 0.35, 0.0, 1.0);
            out.depth[i] = static_cast<float>(d);
            if (std::abs(c - hx) <= 1.5 * rad.head && std::abs(r - hy) <= 1.5 * rad.head)
                out.head_mask[i] = 1.0f;
        }
    }

    // Head crop: window around the head blob, nearest-neighbor resized to SxS.
    const int half = static_cast<int>(std::lround(2.0 * rad.head));
    const int cx0 = std::clamp(static_cast<int>(std::lround(hx)) - half, 0, s - 1);
    const int cy0 = std::clamp(static_cast<int>(std::lround(hy)) - half, 0, s - 1);
    const int cx1 = std::clamp(static_cast<int>(std::lround(hx)) + half, cx0 + 1, s);
    const int cy1 = std::clamp(static_cast<int>(std::lround(hy)) + half, cy0 + 1, s);
    const int bw = cx1 - cx0, bh = cy1 - cy0;
    for (int cc = 0; cc < 3; ++cc)
        for (int r = 0; r < s; ++r)
            for (int c = 0; c < s; ++c) {
                const int sr = cy0 + std::min(bh - 1, r * bh / s);
                const int sc = cx0 + std::min(bw - 1, c * bw / s);
                out.head_crop[(static_cast<size_t>(cc) * s + r) * s + c] =
                    out.scene[(static_cast<size_t>(cc) * s + sr) * s + sc];
            }
    return out;
}

std::vector<GazeAnnotation> jittered_annotations(Rng& rng, const GeneratorSpec& spec,
                                                 double tx, double ty, bool in_frame) {
    if (!in_frame) return {GazeAnnotation{0.0, 0.0, false}};
    std::vector<GazeAnnotation> anns;
    anns.reserve(spec.annotators);
    for (int a = 0; a < spec.annotators; ++a) {
        GazeAnnotation g;
        g.x = std::clamp(tx + rng.normal(0.0, spec.jitter_sigma), 0.0, 1.0);
        g.y = std::clamp(ty + rng.normal(0.0, spec.jitter_sigma), 0.0, 1.0);
        g.in_frame = true;
        anns.push_back(g);
    }
    return anns;
}

bool inside_frame(double x, double y) {
    return x >= 0.0 && x <= 1.0 && y >= 0.0 && y <= 1.0;
}

} // namespace

GazeSample generate_sample(uint64_t seed, const GeneratorSpec& spec) {
    Rng rng(seed);
    const SceneLayout layout = make_layout(rng, spec);
    const auto [tx, ty] = draw_target(rng, spec, layout);
    GazeSample s;
    s.in_frame = inside_frame(tx, ty);
    s.target_x = tx;
    s.target_y = ty;
    s.input = render_scene(layout, tx, ty, s.in_frame);
    s.annotations = jittered_annotations(rng, spec, tx, ty, s.in_frame);
    return s;
}

std::vector<GazeSample> generate_sequence(uint64_t seed, const GeneratorSpec& spec, int t,
                                          int sequence_id) {
    if (t < 1) throw std::invalid_argument("generate_sequence: t must be >= 1");
    Rng rng(seed);
    const SceneLayout layout = make_layout(rng, spec);
    auto [tx, ty] = draw_target(rng, spec, layout);
    std::vector<GazeSample> frames;
    frames.reserve(t);
    for (int f = 0; f < t; ++f) {
        if (f > 0) {
            const double theta = rng.uniform(0.0, 2.0 * M_PI);
            const double step = rng.uniform(0.0, spec.max_step);
            tx += step * std::cos(theta);
            ty += step * std::sin(theta);
        }
        GazeSample s;
        s.in_frame = inside_frame(tx, ty);
        s.target_x = tx;
        s.target_y = ty;
        s.sequence_id = sequence_id;
        s.frame_index = f;
        s.input = render_scene(layout, tx, ty, s.in_frame);
        s.annotations = jittered_annotations(rng, spec, tx, ty, s.in_frame);
        frames.push_back(std::move(s));
    }
    return frames;
}

std::vector<GazeSample> generate_dataset(uint64_t base_seed, const GeneratorSpec& spec,
                                         int count) {
    std::vector<GazeSample> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i) {
        GazeSample s = generate_sample(mix_seed(base_seed, i), spec);
        s.sample_id = i;
        s.sequence_id = i;
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<GazeSample> generate_sequence_dataset(uint64_t base_seed,
                                                  const GeneratorSpec& spec,
                                                  int n_sequences, int t) {
    std::vector<GazeSample> out;
    out.reserve(static_cast<size_t>(n_sequences) * t);
    int id = 0;
    for (int q = 0; q < n_sequences; ++q) {
        auto frames = generate_sequence(mix_seed(base_seed, q), spec, t, q);
        for (auto& f : frames) {
            f.sample_id = id++;
            out.push_back(std::move(f));
        }
    }
    return out;
}

SceneInputTensors to_tensors(const SceneInput& in) {
    const int s = in.size;
    SceneInputTensors t;
    std::vector<double> stack;
    stack.reserve(static_cast<size_t>(5) * s * s);
    stack.insert(stack.end(), in.scene.begin(), in.scene.end());
    stack.insert(stack.end(), in.head_mask.begin(), in.head_mask.end());
    stack.insert(stack.end(), in.depth.begin(), in.depth.end());
    t.scene_stack = Tensor::from_data({5, s, s}, std::move(stack));
    t.head_crop = Tensor::from_data({3, s, s},
                                    std::vector<double>(in.head_crop.begin(), in.head_crop.end()));
    t.head_mask = Tensor::from_data({s, s},
                                    std::vector<double>(in.head_mask.begin(), in.head_mask.end()));
    t.depth = Tensor::from_data({s, s}, std::vector<double>(in.depth.begin(), in.depth.end()));
    return t;
}

} // namespace pdp
