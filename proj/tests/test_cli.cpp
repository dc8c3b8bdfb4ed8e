#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pdp/io.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

#ifndef PDP_CLI_PATH
#error "PDP_CLI_PATH must be defined"
#endif

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("pdp_cli_test_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str(const std::string& name) const { return (path / name).string(); }
};

int run(const std::string& args) {
    const std::string cmd = std::string(PDP_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

std::string run_capture(const std::string& args, const std::string& out_file) {
    const std::string cmd = std::string(PDP_CLI_PATH) + " " + args + " > " + out_file + " 2>&1";
    std::system(cmd.c_str());
    std::ifstream f(out_file);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::string slurp(const std::string& path) {
    std::ifstream f(path);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

const std::string kSmallModel =
    "image_size=32\nconv_channels=8,12,16\nenc_channels=16\npdp_hidden=8\n"
    "patch_h=4\npatch_w=4\nbatch_size=8\nepochs=2\ndecay_epochs=\nlr=0.001\n";

} // namespace

TEST_CASE("cli exit codes") {
    CHECK(run("definitely-not-a-subcommand") == 1);
    CHECK(run("train --manifest missing.tsv") == 1);           // missing required --out
    CHECK(run("eval --checkpoint x --manifest y --out-prefix z") == 2); // missing files
    CHECK(run("--help") == 0);
}

TEST_CASE("cli pipeline: gen-data, make-gt, train, eval, infer, analyses") {
    TempDir tmp;
    std::ofstream(tmp.str("cfg")) << kSmallModel;

    CHECK(run("gen-data --out " + tmp.str("data") +
              " --count 24 --seed 5 --image-size 32 --annotators 3 --p-in-frame 0.5") == 0);
    const std::string manifest = tmp.str("data") + "/manifest.tsv";
    CHECK(fs::exists(manifest));

    // make-gt: every PD file sums to 1; out rows put all mass outside
    CHECK(run("make-gt --manifest " + manifest + " --out " + tmp.str("gt") +
              " --mode onehot --heatmap-size 32") == 0);
    const auto entries = pdp::read_manifest(manifest);
    for (const auto& e : entries) {
        pdp::Grid pd = pdp::read_fgrid(tmp.str("gt") + "/gt_" + std::to_string(e.sample_id) +
                                       "_pd.fgrid");
        double s = 0;
        for (double v : pd.v) s += v;
        CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
        if (!e.in_frame) CHECK(pd.v.back() == 1.0);
    }

    CHECK(run("train --manifest " + manifest + " --out " + tmp.str("m.ckpt") +
              " --loss-csv " + tmp.str("loss.csv") + " --config " + tmp.str("cfg")) == 0);
    CHECK(fs::exists(tmp.str("m.ckpt")));
    CHECK(slurp(tmp.str("loss.csv")).rfind("epoch,mean_loss,lr", 0) == 0);

    CHECK(run("eval --checkpoint " + tmp.str("m.ckpt") + " --manifest " + manifest +
              " --out-prefix " + tmp.str("e1") + " --config " + tmp.str("cfg")) == 0);
    const std::string report = slurp(tmp.str("e1_report.txt"));
    CHECK(report.find("auc=") != std::string::npos);
    CHECK(report.find("ap_out=") != std::string::npos);

    // determinism: byte-identical on a second run
    CHECK(run("eval --checkpoint " + tmp.str("m.ckpt") + " --manifest " + manifest +
              " --out-prefix " + tmp.str("e2") + " --config " + tmp.str("cfg")) == 0);
    CHECK(slurp(tmp.str("e2_report.txt")) == report);
    CHECK(slurp(tmp.str("e2_quantiles.csv")) == slurp(tmp.str("e1_quantiles.csv")));

    const std::string out = run_capture(
        "infer --checkpoint " + tmp.str("m.ckpt") + " --manifest " + manifest +
            " --index 1 --out-prefix " + tmp.str("inf") + " --pgm --config " + tmp.str("cfg"),
        tmp.str("infer_out.txt"));
    CHECK(out.rfind("P_in=", 0) == 0);
    const double pin = std::stod(out.substr(5));
    CHECK(pin >= 0.0);
    CHECK(pin <= 1.0);
    CHECK(fs::exists(tmp.str("inf_heatmap.fgrid")));
    CHECK(fs::exists(tmp.str("inf_pd.fgrid")));
    auto [w, h] = pdp::read_pgm_dims(tmp.str("inf_heatmap.pgm"));
    CHECK(w == 32);
    CHECK(h == 32);

    CHECK(run("consistency --checkpoint " + tmp.str("m.ckpt") + " --manifest " + manifest +
              " --out " + tmp.str("cons.csv") + " --config " + tmp.str("cfg")) == 0);
    CHECK(slurp(tmp.str("cons.csv")).rfind("sample_id,bc,js", 0) == 0);

    CHECK(run("variance-report --checkpoint " + tmp.str("m.ckpt") + " --manifest " + manifest +
              " --out " + tmp.str("var.csv") + " --config " + tmp.str("cfg")) == 0);
    CHECK(slurp(tmp.str("var.csv")).rfind("bin,var_lo,var_hi,mean_var,mean_auc,count", 0) == 0);
}

TEST_CASE("gen-data is reproducible byte-for-byte") {
    TempDir tmp;
    CHECK(run("gen-data --out " + tmp.str("a") + " --count 5 --seed 9 --image-size 16") == 0);
    CHECK(run("gen-data --out " + tmp.str("b") + " --count 5 --seed 9 --image-size 16") == 0);
    CHECK(slurp(tmp.str("a") + "/manifest.tsv") == slurp(tmp.str("b") + "/manifest.tsv"));
    CHECK(slurp(tmp.str("a") + "/s0_scene.fgrid") == slurp(tmp.str("b") + "/s0_scene.fgrid"));
}
