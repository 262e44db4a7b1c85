#pragma once

#include <string>
#include <vector>

#include "soma/core.hpp"
#include "soma/net.hpp"

namespace soma {

enum class DecodeMode { argmax, greedy, exact };

DecodeMode decode_mode_from_string(const std::string& s);

struct DecodeResult {
    Labeling labels;                 // per point, null id = A.cols() - 1
    bool ci_ok = true;               // argmax may assign a non-null label twice
    double log_mass = 0.0;           // sum of log A[i, label_i]
    std::vector<double> confidence;  // A[i, label_i]
};

// Decodes a row-normalized assignment matrix A (n x (M+1), null column last)
// into hard labels.
//   argmax: per-point argmax; may violate C_i (flagged via ci_ok)
//   greedy: commit the globally largest remaining entry, removing its row and
//           (when non-null) its column; satisfies C_i by construction
//   exact:  maximum-weight assignment on log A (optimal; small instances)
DecodeResult decode_frame(const Mat& assignment, DecodeMode mode = DecodeMode::greedy);

// Full pipeline for one frame: forward -> augment -> sinkhorn -> drop row ->
// decode; labels returned in the input point order.
DecodeResult label_frame(const Model& model, const Frame& frame,
                         DecodeMode mode = DecodeMode::greedy);

// Per-frame independent labeling of a sequence (parallel over frames).
std::vector<DecodeResult> label_sequence(const Model& model, const MoCapSequence& mpc,
                                         DecodeMode mode = DecodeMode::greedy);

struct TrackletLabelResult {
    std::vector<Labeling> labels;
    std::vector<bool> ci_ok;  // per frame, after majority relabeling
};

// Assigns each tracklet's most frequent label to all member points. Ties
// break toward the smallest label index with null ordered last. Points
// without a tracklet id keep their per-frame labels.
TrackletLabelResult tracklet_label(const std::vector<Labeling>& per_frame,
                                   const std::vector<std::vector<int>>& tracklet_ids, int null_id);

}  // namespace soma
