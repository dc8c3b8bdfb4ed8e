#pragma once

#include "pdp/features.hpp"
#include "pdp/gt.hpp"

#include <cstdint>
#include <vector>

namespace pdp {

// Scene grids for one sample. Stored as float to keep large datasets
// affordable; the model promotes to 64-bit tensors at forward time.
struct SceneInput {
    int size = 0;
    std::vector<float> scene;     // 3*S*S in [0,1]
    std::vector<float> head_mask; // S*S in {0,1}
    std::vector<float> depth;     // S*S in [0,1]
    std::vector<float> head_crop; // 3*S*S in [0,1]
};

struct GazeSample {
    SceneInput input;
    std::vector<GazeAnnotation> annotations; // one out-of-frame marker when the target is outside
    bool in_frame = false;
    int sample_id = 0;
    int sequence_id = 0;
    int frame_index = 0;
    // Generator-side truth; not serialized to manifests.
    double target_x = 0.0, target_y = 0.0;
};

struct GeneratorSpec {
    int image_size = 64;
    double p_in_frame = 0.7;
    int annotators = 1;
    double jitter_sigma = 0.05; // sigma_a, normalized units
    double max_step = 0.08;     // per-frame target drift bound (sequences)
    int min_distractors = 1;
    int max_distractors = 3;
};

// Deterministic from seed: head blob with a gaze-direction pupil, a
// brightness ray from the head toward the target, a target object when the
// target is inside the frame, distractor blobs, and a radial depth gradient
// with the target object at a distinct depth.
GazeSample generate_sample(uint64_t seed, const GeneratorSpec& spec);

// Fixed head and scene layout; the target drifts by at most spec.max_step
// per frame. A frame is in-frame exactly when the drifted target lies in
// [0,1]^2, so clips can transition between in and out.
std::vector<GazeSample> generate_sequence(uint64_t seed, const GeneratorSpec& spec, int t,
                                          int sequence_id);

std::vector<GazeSample> generate_dataset(uint64_t base_seed, const GeneratorSpec& spec,
                                         int count);
std::vector<GazeSample> generate_sequence_dataset(uint64_t base_seed,
                                                  const GeneratorSpec& spec,
                                                  int n_sequences, int t);

SceneInputTensors to_tensors(const SceneInput& in);

} // namespace pdp
