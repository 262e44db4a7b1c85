#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "soma/body.hpp"
#include "soma/core.hpp"
#include "soma/rng.hpp"

namespace soma {

// Controls the corruption applied to clean virtual-marker frames. Presets
// follow the paper's regimes: "b" base, "bc" adds occlusions, "bg" adds
// ghosts, "bcg" both, "extreme" the ghost stress configuration.
struct NoiseConfig {
    int max_occlusions = 0;
    int max_ghosts = 0;
    bool jitter_layout = true;
    bool rotation_augment = true;
    double positional_noise_m = 0.005;
    std::map<std::string, double> per_label_noise;  // sigma overrides by label
    bool extreme_ghosts = false;

    static NoiseConfig preset(const std::string& name);
    nlohmann::json to_json() const;
    static NoiseConfig from_json(const nlohmann::json& j);

    std::vector<double> sigma_table(const LabelSet& labels) const;
};

// Knobs of the synthetic generator that are not noise per se.
struct SynthSettings {
    double pose_range = 0.85;  // fraction of joint-limit boxes for iid poses
    ShapePrior shape_prior;
    MotionParams motion;
    int tracklet_breaks = 0;  // applied to generated sequences
};

// --- Noise operations (deterministic given the rng state) ------------------

// Each vertex id is independently replaced by a uniform draw from
// {itself} + its 1-ring.
MarkerLayout jitter_layout(const MarkerLayout& layout, const SurrogateBody& topology, Rng& rng);

// Composes a yaw (rotation about world +y) onto the root orientation.
Pose compose_global_yaw(const Pose& pose, double angle);
// Samples r ~ U[0, 2pi) and composes it.
Pose rotate_globally(const Pose& pose, Rng& rng);

// X~[m] = X[m] + eps, eps ~ N(0, sigma[m]^2 I).
std::vector<Vec3> positional_noise(const std::vector<Vec3>& markers,
                                   const std::vector<double>& sigma, Rng& rng);

// Appends `count` ghost points drawn from N(median(points), std(points)^2 I);
// ghosts are labeled null and get tracklet id -1 when tracklets are present.
// Throws on an empty frame. The extreme flag mixes in uniform-cube and skewed
// Gaussian ghosts.
Frame add_ghost_points(const Frame& frame, int count, int null_id, Rng& rng, bool extreme = false);

struct OcclusionResult {
    Frame frame;
    std::vector<int> occluded_labels;  // marker labels removed (null drops are not recorded)
};
// Removes `count` uniformly chosen distinct points. Throws if count > n_t.
OcclusionResult occlude_markers(const Frame& frame, int count, int null_id, Rng& rng);

struct PermutationResult {
    Frame frame;
    std::vector<int> perm;  // perm[i] = original index of new point i
};
PermutationResult permute_points(const Frame& frame, Rng& rng);

// Breaks random (tracklet, time) pairs: points of the tracklet at or after
// the break move to a fresh id. Point positions are never modified.
MoCapSequence break_tracklets(const MoCapSequence& seq, int n_breaks, Rng& rng);

// --- Corpus generation ------------------------------------------------------

struct CorpusFrame {
    Frame frame;                      // labels filled with ground truth
    std::vector<int> occluded_labels;
};

struct Corpus {
    LabelSet labels;
    std::vector<CorpusFrame> frames;
    double rate_hz = 30.0;
};

// Per frame: sample shape + pose -> jitter layout -> skin -> place markers ->
// rotate -> positional noise -> occlude -> ghosts -> permute. Frames derive
// child seeds from (seed, index) so parallel and serial runs are identical.
Corpus generate_training_corpus(const SurrogateBody& body, const MarkerLayout& layout,
                                const NoiseConfig& noise, const SynthSettings& settings,
                                int n_frames, uint64_t seed);

struct SequenceWithGt {
    MoCapSequence seq;  // frames carry labels and tracklet ids
    std::vector<std::vector<int>> occluded;
    LabelSet labels;
};

// Temporally coherent sequence: one shape/motion per sequence, per-frame
// noise, stable tracklet ids (ghosts get fresh ids), optional breaks.
SequenceWithGt generate_sequence(const SurrogateBody& body, const MarkerLayout& layout,
                                 const NoiseConfig& noise, const SynthSettings& settings,
                                 double duration_s, double rate_hz, uint64_t seed);

}  // namespace soma
