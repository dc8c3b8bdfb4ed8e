#pragma once

#include "pdp/grid.hpp"
#include "pdp/metrics.hpp"
#include "pdp/model.hpp"
#include "pdp/synth.hpp"

#include <string>
#include <vector>

namespace pdp {

// Text float-grid format:
//   FGRID v1
//   <rows> <cols>
//   rows lines of space-separated decimals
// Values are written with 17 significant digits, so round trips are exact.
void write_fgrid(const std::string& path, const Grid& g);
Grid read_fgrid(const std::string& path);

// One manifest record per sample, tab-separated:
//   sample_id sequence_id frame_index in_frame scene mask depth headcrop ann_count x1 y1 ...
// Paths are relative to the manifest's directory; ann_count counts in-frame
// annotation points (0 for out-of-frame samples).
struct ManifestEntry {
    int sample_id = 0;
    int sequence_id = 0;
    int frame_index = 0;
    bool in_frame = false;
    std::string scene_path, mask_path, depth_path, headcrop_path;
    std::vector<GazeAnnotation> annotations;
};

void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> read_manifest(const std::string& path);

// Writes per-sample grids plus the manifest into dir; returns the manifest path.
std::string write_dataset(const std::string& dir, const std::vector<GazeSample>& samples);
std::vector<GazeSample> load_dataset(const std::string& manifest_path);

// Checkpoint format:
//   PDPCKPT v1
//   <tensor count>
//   <name> <ndim> <d0> <d1> ...
//   <values on one line>
void save_checkpoint(const std::string& path, const PdpModel& model);
// Restores every model parameter bit-exactly; errors on version mismatch,
// missing tensors, shape mismatches, and unknown names (listing them).
void load_checkpoint(const std::string& path, PdpModel& model);

// Plain-text PGM (P2), min-max scaled to 0..255.
void write_pgm(const std::string& path, const Grid& g);
std::pair<int, int> read_pgm_dims(const std::string& path);

void write_report(const std::string& path, const MetricReport& r);
void write_quantile_csv(const std::string& path, const std::vector<QuantileRow>& rows);

std::string format_double(double v); // %.17g

} // namespace pdp
