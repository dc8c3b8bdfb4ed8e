#include "pdp/io.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace fs = std::filesystem;

namespace pdp {

namespace {

void io_fail(const std::string& path, const std::string& what) {
    throw std::runtime_error(path + ": " + what);
}

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path);
    if (!f) io_fail(path, "cannot open for writing");
    return f;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream f(path);
    if (!f) io_fail(path, "cannot open for reading");
    return f;
}

double parse_double(const std::string& tok, const std::string& path, int line) {
    try {
        size_t pos = 0;
        double v = std::stod(tok, &pos);
        if (pos != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        io_fail(path, "line " + std::to_string(line) + ": bad number '" + tok + "'");
    }
    return 0.0;
}

long parse_long(const std::string& tok, const std::string& path, int line) {
    try {
        size_t pos = 0;
        long v = std::stol(tok, &pos);
        if (pos != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        io_fail(path, "line " + std::to_string(line) + ": bad integer '" + tok + "'");
    }
    return 0;
}

} // namespace

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_fgrid(const std::string& path, const Grid& g) {
    auto f = open_out(path);
    f << "FGRID v1\n" << g.rows << ' ' << g.cols << '\n';
    for (int r = 0; r < g.rows; ++r) {
        for (int c = 0; c < g.cols; ++c) {
            if (c) f << ' ';
            f << format_double(g.at(r, c));
        }
        f << '\n';
    }
}

Grid read_fgrid(const std::string& path) {
    auto f = open_in(path);
    std::string line;
    if (!std::getline(f, line) || line != "FGRID v1")
        io_fail(path, "line 1: expected 'FGRID v1' header");
    if (!std::getline(f, line)) io_fail(path, "line 2: missing dimensions");
    std::istringstream dims(line);
    long rows = 0, cols = 0;
    std::string extra;
    if (!(dims >> rows >> cols) || (dims >> extra))
        io_fail(path, "line 2: expected '<rows> <cols>'");
    if (rows <= 0 || cols <= 0) io_fail(path, "line 2: extents must be positive");
    Grid g(static_cast<int>(rows), static_cast<int>(cols));
    size_t count = 0;
    int lineno = 2;
    std::string tok;
    while (std::getline(f, line)) {
        ++lineno;
        std::istringstream row(line);
        while (row >> tok) {
            if (count >= g.v.size())
                io_fail(path, "line " + std::to_string(lineno) + ": more values than rows*cols");
            g.v[count++] = parse_double(tok, path, lineno);
        }
    }
    if (count != g.v.size())
        io_fail(path, "line " + std::to_string(lineno) + ": expected " +
                          std::to_string(g.v.size()) + " values, got " + std::to_string(count));
    return g;
}

void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries) {
    auto f = open_out(path);
    for (const auto& e : entries) {
        int ann_count = 0;
        for (const auto& a : e.annotations)
            if (a.in_frame) ++ann_count;
        f << e.sample_id << '\t' << e.sequence_id << '\t' << e.frame_index << '\t'
          << (e.in_frame ? 1 : 0) << '\t' << e.scene_path << '\t' << e.mask_path << '\t'
          << e.depth_path << '\t' << e.headcrop_path << '\t' << ann_count;
        for (const auto& a : e.annotations) {
            if (!a.in_frame) continue;
            f << '\t' << format_double(a.x) << '\t' << format_double(a.y);
        }
        f << '\n';
    }
}

std::vector<ManifestEntry> read_manifest(const std::string& path) {
    auto f = open_in(path);
    std::vector<ManifestEntry> out;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::vector<std::string> tok;
        std::string t;
        while (std::getline(ss, t, '\t')) tok.push_back(t);
        if (tok.size() < 9)
            io_fail(path, "line " + std::to_string(lineno) + ": expected at least 9 fields");
        ManifestEntry e;
        e.sample_id = static_cast<int>(parse_long(tok[0], path, lineno));
        e.sequence_id = static_cast<int>(parse_long(tok[1], path, lineno));
        e.frame_index = static_cast<int>(parse_long(tok[2], path, lineno));
        e.in_frame = parse_long(tok[3], path, lineno) != 0;
        e.scene_path = tok[4];
        e.mask_path = tok[5];
        e.depth_path = tok[6];
        e.headcrop_path = tok[7];
        const long n = parse_long(tok[8], path, lineno);
        if (static_cast<long>(tok.size()) != 9 + 2 * n)
            io_fail(path, "line " + std::to_string(lineno) + ": ann_count disagrees with fields");
        for (long i = 0; i < n; ++i) {
            GazeAnnotation a;
            a.x = parse_double(tok[9 + 2 * i], path, lineno);
            a.y = parse_double(tok[10 + 2 * i], path, lineno);
            a.in_frame = true;
            e.annotations.push_back(a);
        }
        if (e.annotations.empty()) e.annotations.push_back(GazeAnnotation{0.0, 0.0, false});
        out.push_back(std::move(e));
    }
    return out;
}

namespace {

Grid stack_to_grid(const std::vector<float>& v, int channels, int s) {
    Grid g(channels * s, s);
    for (size_t i = 0; i < v.size(); ++i) g.v[i] = v[i];
    return g;
}

std::vector<float> grid_to_stack(const Grid& g, int channels, const std::string& path) {
    if (g.cols <= 0 || g.rows != channels * g.cols)
        io_fail(path, "expected a stacked " + std::to_string(channels) + "xSxS grid");
    return {g.v.begin(), g.v.end()};
}

} // namespace

std::string write_dataset(const std::string& dir, const std::vector<GazeSample>& samples) {
    fs::create_directories(dir);
    std::vector<ManifestEntry> entries;
    entries.reserve(samples.size());
    for (const auto& s : samples) {
        const std::string stem = "s" + std::to_string(s.sample_id);
        ManifestEntry e;
        e.sample_id = s.sample_id;
        e.sequence_id = s.sequence_id;
        e.frame_index = s.frame_index;
        e.in_frame = s.in_frame;
        e.scene_path = stem + "_scene.fgrid";
        e.mask_path = stem + "_mask.fgrid";
        e.depth_path = stem + "_depth.fgrid";
        e.headcrop_path = stem + "_crop.fgrid";
        e.annotations = s.annotations;
        const int sz = s.input.size;
        write_fgrid(dir + "/" + e.scene_path, stack_to_grid(s.input.scene, 3, sz));
        write_fgrid(dir + "/" + e.mask_path, stack_to_grid(s.input.head_mask, 1, sz));
        write_fgrid(dir + "/" + e.depth_path, stack_to_grid(s.input.depth, 1, sz));
        write_fgrid(dir + "/" + e.headcrop_path, stack_to_grid(s.input.head_crop, 3, sz));
        entries.push_back(std::move(e));
    }
    const std::string manifest = dir + "/manifest.tsv";
    write_manifest(manifest, entries);
    return manifest;
}

std::vector<GazeSample> load_dataset(const std::string& manifest_path) {
    const auto entries = read_manifest(manifest_path);
    const fs::path base = fs::path(manifest_path).parent_path();
    std::vector<GazeSample> out;
    out.reserve(entries.size());
    for (const auto& e : entries) {
        GazeSample s;
        s.sample_id = e.sample_id;
        s.sequence_id = e.sequence_id;
        s.frame_index = e.frame_index;
        s.in_frame = e.in_frame;
        s.annotations = e.annotations;
        const Grid scene = read_fgrid((base / e.scene_path).string());
        const Grid mask = read_fgrid((base / e.mask_path).string());
        const Grid depth = read_fgrid((base / e.depth_path).string());
        const Grid crop = read_fgrid((base / e.headcrop_path).string());
        s.input.size = scene.cols;
        s.input.scene = grid_to_stack(scene, 3, e.scene_path);
        s.input.head_mask = grid_to_stack(mask, 1, e.mask_path);
        s.input.depth = grid_to_stack(depth, 1, e.depth_path);
        s.input.head_crop = grid_to_stack(crop, 3, e.headcrop_path);
        if (s.input.head_mask.size() != static_cast<size_t>(scene.cols) * scene.cols)
            io_fail(e.mask_path, "mask extent disagrees with scene");
        out.push_back(std::move(s));
    }
    return out;
}

void save_checkpoint(const std::string& path, const PdpModel& model) {
    auto params = model.parameters();
    auto f = open_out(path);
    f << "PDPCKPT v1\n" << params.size() << '\n';
    for (const Parameter* p : params) {
        f << p->name << ' ' << p->tensor.rank();
        for (int d : p->tensor.shape()) f << ' ' << d;
        f << '\n';
        const auto& v = p->tensor.data();
        for (size_t i = 0; i < v.size(); ++i) {
            if (i) f << ' ';
            f << format_double(v[i]);
        }
        f << '\n';
    }
}

void load_checkpoint(const std::string& path, PdpModel& model) {
    auto f = open_in(path);
    std::string line;
    if (!std::getline(f, line) || line != "PDPCKPT v1")
        io_fail(path, "line 1: expected 'PDPCKPT v1' header (version mismatch?)");
    if (!std::getline(f, line)) io_fail(path, "line 2: missing tensor count");
    const long count = parse_long(line, path, 2);

    struct Entry {
        std::vector<int> shape;
        std::vector<double> data;
    };
    std::map<std::string, Entry> entries;
    int lineno = 2;
    for (long i = 0; i < count; ++i) {
        if (!std::getline(f, line))
            io_fail(path, "truncated file: expected " + std::to_string(count) + " tensors");
        ++lineno;
        std::istringstream hdr(line);
        std::string name;
        long ndim = 0;
        if (!(hdr >> name >> ndim) || ndim < 0)
            io_fail(path, "line " + std::to_string(lineno) + ": bad tensor header");
        Entry e;
        long total = 1;
        for (long d = 0; d < ndim; ++d) {
            long ext = 0;
            if (!(hdr >> ext) || ext <= 0)
                io_fail(path, "line " + std::to_string(lineno) + ": bad tensor extent");
            e.shape.push_back(static_cast<int>(ext));
            total *= ext;
        }
        if (!std::getline(f, line))
            io_fail(path, "truncated file: missing values for tensor '" + name + "'");
        ++lineno;
        std::istringstream vals(line);
        std::string tok;
        while (vals >> tok) e.data.push_back(parse_double(tok, path, lineno));
        if (static_cast<long>(e.data.size()) != total)
            io_fail(path, "line " + std::to_string(lineno) + ": tensor '" + name + "' has " +
                              std::to_string(e.data.size()) + " values, expected " +
                              std::to_string(total));
        if (!entries.emplace(name, std::move(e)).second)
            io_fail(path, "duplicate tensor name '" + name + "'");
    }

    auto params = model.parameters();
    for (Parameter* p : params) {
        auto it = entries.find(p->name);
        if (it == entries.end()) io_fail(path, "missing tensor '" + p->name + "'");
        if (it->second.shape != p->tensor.shape())
            io_fail(path, "shape mismatch for parameter '" + p->name + "'");
        p->tensor.data() = it->second.data;
        entries.erase(it);
    }
    if (!entries.empty()) {
        std::string names;
        for (const auto& [name, e] : entries) {
            if (!names.empty()) names += ", ";
            names += name;
        }
        io_fail(path, "unknown tensor names: " + names);
    }
}

void write_pgm(const std::string& path, const Grid& g) {
    double mn = g.v[0], mx = g.v[0];
    for (double v : g.v) {
        mn = std::min(mn, v);
        mx = std::max(mx, v);
    }
    const double scale = mx > mn ? 255.0 / (mx - mn) : 0.0;
    auto f = open_out(path);
    f << "P2\n" << g.cols << ' ' << g.rows << "\n255\n";
    for (int r = 0; r < g.rows; ++r) {
        for (int c = 0; c < g.cols; ++c) {
            if (c) f << ' ';
            f << static_cast<int>(std::lround((g.at(r, c) - mn) * scale));
        }
        f << '\n';
    }
}

std::pair<int, int> read_pgm_dims(const std::string& path) {
    auto f = open_in(path);
    std::string magic;
    f >> magic;
    if (magic != "P2") io_fail(path, "expected P2 PGM");
    int w = 0, h = 0;
    if (!(f >> w >> h)) io_fail(path, "bad PGM dimensions");
    return {w, h};
}

void write_report(const std::string& path, const MetricReport& r) {
    auto f = open_out(path);
    f << "n_samples=" << r.n_samples << '\n';
    f << "n_in_frame=" << r.n_in_frame << '\n';
    f << "auc=" << format_double(r.auc) << '\n';
    f << "avg_dist=" << format_double(r.avg_dist) << '\n';
    f << "min_dist=" << format_double(r.min_dist) << '\n';
    if (r.has_ap) f << "ap_out=" << format_double(r.ap_out) << '\n';
    if (r.has_consistency) {
        f << "bc_mean=" << format_double(r.bc_mean) << '\n';
        f << "js_mean=" << format_double(r.js_mean) << '\n';
    }
}

void write_quantile_csv(const std::string& path, const std::vector<QuantileRow>& rows) {
    auto f = open_out(path);
    f << "bin,var_lo,var_hi,mean_var,mean_auc,count\n";
    for (size_t i = 0; i < rows.size(); ++i) {
        const auto& q = rows[i];
        f << i << ',' << format_double(q.var_lo) << ',' << format_double(q.var_hi) << ','
          << format_double(q.mean_var) << ',' << format_double(q.mean_auc) << ',' << q.count
          << '\n';
    }
}

} // namespace pdp
