#include "pdp/io.hpp"
#include "pdp/trainer.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace pdp;

namespace {

struct CommonOpts {
    uint64_t seed = 0;
    bool seed_given = false;
    std::string config_path;
};

void add_common(CLI::App* cmd, CommonOpts& c) {
    cmd->add_option("--seed", c.seed, "seed override")->each([&](const std::string&) {
        c.seed_given = true;
    });
    cmd->add_option("--config", c.config_path, "key=value config file");
}

TrainConfig load_config(const CommonOpts& c) {
    TrainConfig cfg;
    if (!c.config_path.empty()) cfg = parse_train_config(c.config_path);
    if (c.seed_given) cfg.seed = c.seed;
    return cfg;
}

PdpModel load_model(const TrainConfig& cfg, const std::string& checkpoint) {
    PdpModel model = PdpModel::make(cfg.model, cfg.seed);
    load_checkpoint(checkpoint, model);
    return model;
}

Grid pd_to_grid(const std::vector<double>& full) {
    Grid g(1, static_cast<int>(full.size()));
    g.v = full;
    return g;
}

void write_loss_csv(const std::string& path, const TrainConfig& cfg,
                    const TrainResult& res) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error(path + ": cannot open for writing");
    f << "epoch,mean_loss,lr\n";
    for (size_t e = 0; e < res.loss_history.size(); ++e)
        f << (e + 1) << ',' << format_double(res.loss_history[e]) << ','
          << format_double(lr_at_epoch(cfg, static_cast<int>(e + 1))) << '\n';
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"patch-level gaze distribution prediction toolkit"};
    app.require_subcommand(1);

    // gen-data ---------------------------------------------------------------
    CommonOpts gen_c;
    std::string gen_out;
    int gen_count = 2000, gen_annotators = 1, gen_sequences = 0, gen_seq_len = 5;
    int gen_image_size = 64;
    double gen_p_in = 0.7, gen_jitter = 0.05;
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
    add_common(gen, gen_c);
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_option("--count", gen_count, "number of samples (image datasets)");
    gen->add_option("--sequences", gen_sequences, "number of sequences (> 0 for video data)");
    gen->add_option("--seq-len", gen_seq_len, "frames per sequence");
    gen->add_option("--annotators", gen_annotators, "annotations per in-frame sample");
    gen->add_option("--p-in-frame", gen_p_in, "probability the target is inside the frame");
    gen->add_option("--jitter", gen_jitter, "annotation jitter sigma (normalized units)");
    gen->add_option("--image-size", gen_image_size, "square image size");

    // make-gt ----------------------------------------------------------------
    CommonOpts gt_c;
    std::string gt_manifest, gt_out, gt_mode = "maxpool";
    int gt_hm_size = 32, gt_patch_h = 4, gt_patch_w = 4, gt_ann_index = 0;
    double gt_sigma = 0.0;
    auto* mgt = app.add_subcommand("make-gt", "write ground-truth heatmaps and patch distributions");
    add_common(mgt, gt_c);
    mgt->add_option("--manifest", gt_manifest, "dataset manifest")->required();
    mgt->add_option("--out", gt_out, "output directory")->required();
    mgt->add_option("--heatmap-size", gt_hm_size, "heatmap extent");
    mgt->add_option("--sigma", gt_sigma, "gaussian sigma in heatmap pixels (0: 3*size/56)");
    mgt->add_option("--patch-h", gt_patch_h, "patch rows");
    mgt->add_option("--patch-w", gt_patch_w, "patch cols");
    mgt->add_option("--mode", gt_mode, "maxpool|avgpool|onehot");
    mgt->add_option("--ann-index", gt_ann_index, "annotation used for the target");

    // train ------------------------------------------------------------------
    CommonOpts tr_c;
    std::string tr_manifest, tr_out, tr_loss_csv, tr_init;
    auto* tr = app.add_subcommand("train", "train a model");
    add_common(tr, tr_c);
    tr->add_option("--manifest", tr_manifest, "dataset manifest")->required();
    tr->add_option("--out", tr_out, "output checkpoint")->required();
    tr->add_option("--loss-csv", tr_loss_csv, "per-epoch loss CSV");
    tr->add_option("--init", tr_init, "initial checkpoint (fine-tuning)");

    // eval -------------------------------------------------------------------
    CommonOpts ev_c;
    std::string ev_ckpt, ev_manifest, ev_prefix;
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    add_common(ev, ev_c);
    ev->add_option("--checkpoint", ev_ckpt, "model checkpoint")->required();
    ev->add_option("--manifest", ev_manifest, "dataset manifest")->required();
    ev->add_option("--out-prefix", ev_prefix, "output prefix for report files")->required();

    // infer ------------------------------------------------------------------
    CommonOpts in_c;
    std::string in_ckpt, in_manifest, in_prefix;
    int in_index = 0;
    bool in_pgm = false;
    auto* inf = app.add_subcommand("infer", "run one sample and emit predictions");
    add_common(inf, in_c);
    inf->add_option("--checkpoint", in_ckpt, "model checkpoint")->required();
    inf->add_option("--manifest", in_manifest, "dataset manifest")->required();
    inf->add_option("--index", in_index, "sample index within the manifest");
    inf->add_option("--out-prefix", in_prefix, "output prefix")->required();
    inf->add_flag("--pgm", in_pgm, "also write the heatmap as a P2 PGM image");

    // consistency ------------------------------------------------------------
    CommonOpts co_c;
    std::string co_ckpt, co_manifest, co_out;
    auto* con = app.add_subcommand("consistency",
                                   "per-sample Bhattacharyya/JS between the predicted "
                                   "patch distribution and the heatmap-derived one");
    add_common(con, co_c);
    con->add_option("--checkpoint", co_ckpt, "model checkpoint")->required();
    con->add_option("--manifest", co_manifest, "dataset manifest")->required();
    con->add_option("--out", co_out, "output CSV")->required();

    // variance-report ----------------------------------------------------------
    CommonOpts va_c;
    std::string va_ckpt, va_manifest, va_out;
    auto* var = app.add_subcommand("variance-report",
                                   "AUC by annotation-variance quantile (10 bins)");
    add_common(var, va_c);
    var->add_option("--checkpoint", va_ckpt, "model checkpoint")->required();
    var->add_option("--manifest", va_manifest, "dataset manifest")->required();
    var->add_option("--out", va_out, "output CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (gen->parsed()) {
            GeneratorSpec spec;
            spec.image_size = gen_image_size;
            spec.p_in_frame = gen_p_in;
            spec.annotators = gen_annotators;
            spec.jitter_sigma = gen_jitter;
            const auto samples =
                gen_sequences > 0
                    ? generate_sequence_dataset(gen_c.seed, spec, gen_sequences, gen_seq_len)
                    : generate_dataset(gen_c.seed, spec, gen_count);
            const std::string manifest = write_dataset(gen_out, samples);
            std::cout << manifest << '\n';
        } else if (mgt->parsed()) {
            GtMode mode;
            if (gt_mode == "maxpool") mode = GtMode::maxpool;
            else if (gt_mode == "avgpool") mode = GtMode::avgpool;
            else if (gt_mode == "onehot") mode = GtMode::onehot;
            else throw std::invalid_argument("make-gt: bad --mode '" + gt_mode + "'");
            const double sigma = gt_sigma > 0 ? gt_sigma : 3.0 * gt_hm_size / 56.0;
            const auto entries = read_manifest(gt_manifest);
            fs::create_directories(gt_out);
            for (const auto& e : entries) {
                const std::string stem = gt_out + "/gt_" + std::to_string(e.sample_id);
                PatchDistribution pd;
                if (e.in_frame) {
                    const int ai = std::min<int>(std::max(gt_ann_index, 0),
                                                 static_cast<int>(e.annotations.size()) - 1);
                    const GazeHeatmap hm =
                        render_gaussian_heatmap(e.annotations[ai], gt_hm_size, gt_hm_size, sigma);
                    write_fgrid(stem + "_hm.fgrid", hm.grid);
                    pd = patch_distribution_from_heatmap(&hm, true, gt_patch_h, gt_patch_w, mode);
                } else {
                    pd = patch_distribution_from_heatmap(nullptr, false, gt_patch_h, gt_patch_w,
                                                         mode);
                }
                write_fgrid(stem + "_pd.fgrid", pd_to_grid(pd.full()));
            }
        } else if (tr->parsed()) {
            const TrainConfig cfg = load_config(tr_c);
            PdpModel model = PdpModel::make(cfg.model, cfg.seed);
            if (!tr_init.empty()) load_checkpoint(tr_init, model);
            const auto data = load_dataset(tr_manifest);
            const TrainResult res = train(model, data, cfg);
            save_checkpoint(tr_out, model);
            if (!tr_loss_csv.empty()) write_loss_csv(tr_loss_csv, cfg, res);
        } else if (ev->parsed()) {
            const TrainConfig cfg = load_config(ev_c);
            const PdpModel model = load_model(cfg, ev_ckpt);
            const auto data = load_dataset(ev_manifest);
            const MetricReport report = evaluate(model, data);
            write_report(ev_prefix + "_report.txt", report);
            write_quantile_csv(ev_prefix + "_quantiles.csv", report.quantile_table);
        } else if (inf->parsed()) {
            const TrainConfig cfg = load_config(in_c);
            const PdpModel model = load_model(cfg, in_ckpt);
            const auto data = load_dataset(in_manifest);
            if (in_index < 0 || in_index >= static_cast<int>(data.size()))
                throw std::invalid_argument("infer: --index out of range");
            const auto out = model.forward_single(to_tensors(data[in_index].input));
            Grid hm(out.heatmap.dim(0), out.heatmap.dim(1));
            hm.v = out.heatmap.data();
            write_fgrid(in_prefix + "_heatmap.fgrid", hm);
            if (model.cfg.head_variant == HeadVariant::pdp)
                write_fgrid(in_prefix + "_pd.fgrid", pd_to_grid(out.pd.data()));
            if (in_pgm) write_pgm(in_prefix + "_heatmap.pgm", hm);
            std::cout << "P_in=" << format_double(out.p_in_value()) << '\n';
        } else if (con->parsed()) {
            const TrainConfig cfg = load_config(co_c);
            const PdpModel model = load_model(cfg, co_ckpt);
            if (model.cfg.head_variant != HeadVariant::pdp)
                throw std::invalid_argument("consistency: model has no patch distribution head");
            const auto data = load_dataset(co_manifest);
            const auto rows = evaluate_samples(model, data);
            std::ofstream f(co_out);
            if (!f) throw std::runtime_error(co_out + ": cannot open for writing");
            f << "sample_id,bc,js\n";
            for (const auto& r : rows)
                f << r.sample_id << ',' << format_double(r.bc) << ',' << format_double(r.js)
                  << '\n';
        } else if (var->parsed()) {
            const TrainConfig cfg = load_config(va_c);
            const PdpModel model = load_model(cfg, va_ckpt);
            const auto data = load_dataset(va_manifest);
            const MetricReport report = evaluate(model, data);
            if (report.quantile_table.empty())
                throw std::invalid_argument(
                    "variance-report: need at least 10 in-frame samples with annotations");
            write_quantile_csv(va_out, report.quantile_table);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
