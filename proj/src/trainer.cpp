#include "pdp/trainer.hpp"

#include "pdp/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace pdp {

void TrainConfig::validate() const {
    for (size_t i = 1; i < decay_epochs.size(); ++i)
        if (decay_epochs[i] <= decay_epochs[i - 1])
            throw std::invalid_argument("TrainConfig: decay_epochs must be strictly increasing");
    if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    if (epochs < 0) throw std::invalid_argument("TrainConfig: epochs must be >= 0");
    if (lr <= 0) throw std::invalid_argument("TrainConfig: lr must be > 0");
    if (decay_factor <= 0) throw std::invalid_argument("TrainConfig: decay_factor must be > 0");
    loss_weights.validate();
    model.validate();
    if (patch_h != model.grid_h() || patch_w != model.grid_w())
        throw std::invalid_argument("TrainConfig: patch grid disagrees with the model token grid");
    if (phase == TrainPhase::video && sequence_len < 2)
        throw std::invalid_argument("TrainConfig: video phase needs sequence_len >= 2");
}

TrainConfig TrainConfig::image_defaults() { return TrainConfig{}; }

TrainConfig TrainConfig::video_defaults() {
    TrainConfig c;
    c.phase = TrainPhase::video;
    c.lr = 1e-4;
    c.decay_epochs = {3, 6};
    c.decay_factor = 0.5;
    c.batch_size = 4;
    c.epochs = 8;
    c.freeze_until_patch_attention = true;
    return c;
}

double lr_at_epoch(const TrainConfig& cfg, int epoch) {
    double lr = cfg.lr;
    for (int d : cfg.decay_epochs)
        if (epoch >= d) lr *= cfg.decay_factor;
    return lr;
}

Tensor sample_loss(const ModelOutput& out, const GazeSample& sample, const TrainConfig& cfg) {
    Tensor l_hm = Tensor::scalar(0.0);
    GazeHeatmap gt_hm;
    if (sample.in_frame) {
        // Training targets come from the first in-frame annotation.
        const GazeAnnotation* ann = nullptr;
        for (const auto& a : sample.annotations)
            if (a.in_frame) {
                ann = &a;
                break;
            }
        if (!ann) throw std::invalid_argument("sample_loss: in-frame sample without annotation");
        const int hs = cfg.model.heatmap_size();
        gt_hm = render_gaussian_heatmap(*ann, hs, hs, cfg.model.effective_sigma());
        l_hm = heatmap_mse(out.heatmap, gt_hm, true);
    }
    Tensor l_pd;
    if (cfg.model.head_variant == HeadVariant::pdp) {
        const PatchDistribution gt_pd = patch_distribution_from_heatmap(
            sample.in_frame ? &gt_hm : nullptr, sample.in_frame, cfg.patch_h, cfg.patch_w,
            cfg.gt_mode);
        l_pd = patch_loss(gt_pd, out.pd, cfg.pd_loss, cfg.kl_direction);
    } else {
        l_pd = bce_loss(out.p_in, {sample.in_frame ? 1.0 : 0.0});
    }
    return combined_loss(l_hm, l_pd, cfg.loss_weights);
}

namespace {

// Batch units: single samples for the image phase, whole sequences
// (consecutive manifest rows sharing sequence_id) otherwise.
std::vector<std::vector<int>> build_units(const std::vector<GazeSample>& data,
                                          bool sequences) {
    std::vector<std::vector<int>> units;
    if (!sequences) {
        units.reserve(data.size());
        for (size_t i = 0; i < data.size(); ++i) units.push_back({static_cast<int>(i)});
        return units;
    }
    size_t i = 0;
    while (i < data.size()) {
        std::vector<int> unit{static_cast<int>(i)};
        size_t j = i + 1;
        while (j < data.size() && data[j].sequence_id == data[i].sequence_id) {
            if (data[j].frame_index <= data[j - 1].frame_index)
                throw std::invalid_argument("frame_index must strictly increase within a sequence");
            unit.push_back(static_cast<int>(j));
            ++j;
        }
        units.push_back(std::move(unit));
        i = j;
    }
    return units;
}

} // namespace

TrainResult train(PdpModel& model, const std::vector<GazeSample>& data,
                  const TrainConfig& cfg) {
    cfg.validate();
    if (data.empty()) throw std::invalid_argument("train: dataset is empty");
    if (cfg.model.head_variant != model.cfg.head_variant)
        throw std::invalid_argument("train: config head variant disagrees with the model");

    std::vector<std::vector<int>> units = build_units(data, cfg.phase == TrainPhase::video);
    if (cfg.phase == TrainPhase::video)
        for (const auto& u : units)
            if (static_cast<int>(u.size()) != cfg.sequence_len)
                throw std::invalid_argument(
                    "train: video phase expects sequences of length " +
                    std::to_string(cfg.sequence_len));

    model.freeze_through_patch_attention(cfg.freeze_until_patch_attention);
    AdamOptimizer opt(model.parameters());

    TrainResult res;
    std::vector<int> perm(units.size());
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const double lr = lr_at_epoch(cfg, epoch);
        std::iota(perm.begin(), perm.end(), 0);
        Rng shuffle_rng(mix_seed(cfg.seed, static_cast<uint64_t>(epoch)));
        shuffle_rng.shuffle(perm);

        double loss_sum = 0.0;
        long loss_count = 0;
        for (size_t b0 = 0; b0 < perm.size(); b0 += cfg.batch_size) {
            const size_t b1 = std::min(perm.size(), b0 + cfg.batch_size);
            model.zero_grad();
            std::vector<Tensor> losses;
            for (size_t u = b0; u < b1; ++u) {
                const auto& unit = units[perm[u]];
                if (unit.size() == 1) {
                    auto out = model.forward_single(to_tensors(data[unit[0]].input));
                    losses.push_back(sample_loss(out, data[unit[0]], cfg));
                } else {
                    std::vector<SceneInputTensors> frames;
                    frames.reserve(unit.size());
                    for (int idx : unit) frames.push_back(to_tensors(data[idx].input));
                    auto seq = model.forward_sequence(frames);
                    for (size_t t = 0; t < unit.size(); ++t)
                        losses.push_back(sample_loss(seq.frames[t], data[unit[t]], cfg));
                }
            }
            Tensor batch_loss = losses[0];
            for (size_t i = 1; i < losses.size(); ++i) batch_loss = add(batch_loss, losses[i]);
            batch_loss = mul_scalar(batch_loss, 1.0 / static_cast<double>(losses.size()));
            backward(batch_loss);
            opt.step(lr);
            loss_sum += batch_loss.value() * static_cast<double>(losses.size());
            loss_count += static_cast<long>(losses.size());
        }
        res.loss_history.push_back(loss_sum / static_cast<double>(loss_count));
    }
    return res;
}

namespace {

SampleEval eval_one(const PdpModel& model, const ModelOutput& out, const GazeSample& s) {
    SampleEval e;
    e.sample_id = s.sample_id;
    e.in_frame = s.in_frame;
    e.p_in = out.p_in_value();
    Grid hm(out.heatmap.dim(0), out.heatmap.dim(1));
    hm.v = out.heatmap.data();

    if (model.cfg.head_variant == HeadVariant::pdp) {
        const int h = model.cfg.grid_h(), w = model.cfg.grid_w();
        const PatchDistribution pd = out.distribution(h, w);
        const PatchDistribution ph = pdph(hm, h, w);
        e.has_consistency = true;
        e.bc = bhattacharyya(pd, ph);
        e.js = js_divergence(pd, ph);
    }

    int in_anns = 0;
    for (const auto& a : s.annotations)
        if (a.in_frame) ++in_anns;
    if (s.in_frame && in_anns >= 1) {
        e.has_auc = true;
        e.auc = auc(hm, s.annotations);
        const auto d = distances(hm, s.annotations);
        e.avg_dist = d.avg;
        e.min_dist = d.min;
        e.variance = variance_score(s.annotations);
    }
    return e;
}

} // namespace

std::vector<SampleEval> evaluate_samples(const PdpModel& model,
                                         const std::vector<GazeSample>& data) {
    const std::vector<std::vector<int>> units = build_units(data, true);
    std::vector<SampleEval> rows(data.size());
    const int n_units = static_cast<int>(units.size());
    #pragma omp parallel for schedule(dynamic) if (n_units > 1)
    for (int ui = 0; ui < n_units; ++ui) {
        const auto& unit = units[ui];
        if (unit.size() == 1) {
            auto out = model.forward_single(to_tensors(data[unit[0]].input));
            rows[unit[0]] = eval_one(model, out, data[unit[0]]);
        } else {
            std::vector<SceneInputTensors> frames;
            frames.reserve(unit.size());
            for (int idx : unit) frames.push_back(to_tensors(data[idx].input));
            auto seq = model.forward_sequence(frames);
            for (size_t t = 0; t < unit.size(); ++t)
                rows[unit[t]] = eval_one(model, seq.frames[t], data[unit[t]]);
        }
    }
    return rows;
}

MetricReport summarize(const std::vector<SampleEval>& rows) {
    MetricReport r;
    r.n_samples = static_cast<int>(rows.size());
    double sa = 0, sd = 0, sm = 0, sbc = 0, sjs = 0;
    int na = 0, nc = 0, nout = 0;
    std::vector<std::pair<double, bool>> pin;
    std::vector<std::pair<double, double>> var_auc;
    for (const auto& e : rows) {
        pin.emplace_back(e.p_in, e.in_frame);
        if (e.in_frame) ++r.n_in_frame;
        else ++nout;
        if (e.has_auc) {
            sa += e.auc;
            sd += e.avg_dist;
            sm += e.min_dist;
            ++na;
            var_auc.emplace_back(e.variance, e.auc);
        }
        if (e.has_consistency) {
            sbc += e.bc;
            sjs += e.js;
            ++nc;
        }
    }
    if (na > 0) {
        r.auc = sa / na;
        r.avg_dist = sd / na;
        r.min_dist = sm / na;
    }
    if (nout > 0) {
        r.has_ap = true;
        r.ap_out = ap_out_of_frame(pin);
    }
    if (nc > 0) {
        r.has_consistency = true;
        r.bc_mean = sbc / nc;
        r.js_mean = sjs / nc;
    }
    if (var_auc.size() >= 10) r.quantile_table = quantile_breakdown(var_auc);
    return r;
}

MetricReport evaluate(const PdpModel& model, const std::vector<GazeSample>& data) {
    return summarize(evaluate_samples(model, data));
}

// --- config file -----------------------------------------------------------------

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string tok;
    std::istringstream ss(s);
    while (std::getline(ss, tok, sep)) out.push_back(tok);
    return out;
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

[[noreturn]] void cfg_fail(const std::string& origin, const std::string& msg) {
    throw std::invalid_argument(origin + ": " + msg);
}

double to_double(const std::string& v, const std::string& origin, const std::string& key) {
    try {
        size_t pos = 0;
        double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        cfg_fail(origin, "bad numeric value for key '" + key + "': " + v);
    }
}

long to_long(const std::string& v, const std::string& origin, const std::string& key) {
    try {
        size_t pos = 0;
        long d = std::stol(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        cfg_fail(origin, "bad integer value for key '" + key + "': " + v);
    }
}

} // namespace

TrainConfig parse_train_config_text(const std::string& text, const std::string& origin) {
    TrainConfig cfg;
    std::istringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const size_t eq = t.find('=');
        if (eq == std::string::npos)
            cfg_fail(origin, "line " + std::to_string(lineno) + ": expected key=value");
        const std::string key = trim(t.substr(0, eq));
        const std::string val = trim(t.substr(eq + 1));

        if (key == "phase") {
            if (val == "image") cfg.phase = TrainPhase::image;
            else if (val == "video") cfg.phase = TrainPhase::video;
            else cfg_fail(origin, "bad phase '" + val + "'");
        } else if (key == "lr") {
            cfg.lr = to_double(val, origin, key);
        } else if (key == "decay_epochs") {
            cfg.decay_epochs.clear();
            if (!val.empty())
                for (const auto& p : split(val, ','))
                    cfg.decay_epochs.push_back(static_cast<int>(to_long(trim(p), origin, key)));
        } else if (key == "decay_factor") {
            cfg.decay_factor = to_double(val, origin, key);
        } else if (key == "batch_size") {
            cfg.batch_size = static_cast<int>(to_long(val, origin, key));
        } else if (key == "epochs") {
            cfg.epochs = static_cast<int>(to_long(val, origin, key));
        } else if (key == "lambda1") {
            cfg.loss_weights.lambda1 = to_double(val, origin, key);
        } else if (key == "lambda2") {
            cfg.loss_weights.lambda2 = to_double(val, origin, key);
        } else if (key == "freeze_until") {
            if (val == "none") cfg.freeze_until_patch_attention = false;
            else if (val == "patch_attention") cfg.freeze_until_patch_attention = true;
            else cfg_fail(origin, "bad freeze_until '" + val + "'");
        } else if (key == "seed") {
            cfg.seed = static_cast<uint64_t>(to_long(val, origin, key));
        } else if (key == "gt_mode") {
            if (val == "maxpool") cfg.gt_mode = GtMode::maxpool;
            else if (val == "avgpool") cfg.gt_mode = GtMode::avgpool;
            else if (val == "onehot") cfg.gt_mode = GtMode::onehot;
            else cfg_fail(origin, "bad gt_mode '" + val + "'");
        } else if (key == "patch_h") {
            cfg.patch_h = static_cast<int>(to_long(val, origin, key));
        } else if (key == "patch_w") {
            cfg.patch_w = static_cast<int>(to_long(val, origin, key));
        } else if (key == "sequence_len") {
            cfg.sequence_len = static_cast<int>(to_long(val, origin, key));
        } else if (key == "pd_loss") {
            if (val == "kl") cfg.pd_loss = PdLossKind::kl;
            else if (val == "mse") cfg.pd_loss = PdLossKind::mse;
            else if (val == "bce") cfg.pd_loss = PdLossKind::bce;
            else cfg_fail(origin, "bad pd_loss '" + val + "'");
        } else if (key == "kl_direction") {
            if (val == "gt_pred") cfg.kl_direction = KlDirection::gt_pred;
            else if (val == "pred_gt") cfg.kl_direction = KlDirection::pred_gt;
            else cfg_fail(origin, "bad kl_direction '" + val + "'");
        } else if (key == "image_size") {
            cfg.model.image_size = static_cast<int>(to_long(val, origin, key));
        } else if (key == "conv_channels") {
            cfg.model.conv_channels.clear();
            for (const auto& p : split(val, ','))
                cfg.model.conv_channels.push_back(static_cast<int>(to_long(trim(p), origin, key)));
        } else if (key == "enc_channels") {
            cfg.model.enc_channels = static_cast<int>(to_long(val, origin, key));
        } else if (key == "pdp_hidden") {
            cfg.model.pdp_hidden = static_cast<int>(to_long(val, origin, key));
        } else if (key == "attn_scale") {
            cfg.model.attn_scale = to_long(val, origin, key) != 0;
        } else if (key == "head_variant") {
            if (val == "pdp") cfg.model.head_variant = HeadVariant::pdp;
            else if (val == "inout") cfg.model.head_variant = HeadVariant::inout;
            else cfg_fail(origin, "bad head_variant '" + val + "'");
        } else if (key == "sigma") {
            cfg.model.sigma = to_double(val, origin, key);
        } else {
            cfg_fail(origin, "unknown key '" + key + "'");
        }
    }
    return cfg;
}

TrainConfig parse_train_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error(path + ": cannot open config file");
    std::stringstream buf;
    buf << f.rdbuf();
    return parse_train_config_text(buf.str(), path);
}

} // namespace pdp
