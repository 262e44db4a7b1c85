#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "soma/core.hpp"

namespace soma {

// mpc-jsonl/1: line 0 is a header
//   {"format":"mpc-jsonl/1","rate_hz":30,"label_set":[...marker names...], ...}
// followed by one frame per line
//   {"t":<int>,"points":[[x,y,z],...],"tracklets":[<int|null>,...],"labels":[<str|null>,...]?}
// The null label is implicit (always last); ghost points carry a JSON null.

struct MpcFile {
    MoCapSequence seq;
    LabelSet labels;
    nlohmann::json header;
};

void write_mpc(const std::string& path, const MoCapSequence& seq, const LabelSet& labels,
               const nlohmann::json& extra_header = {});
MpcFile read_mpc(const std::string& path);

// Ground-truth sidecar (mpc-gt-jsonl/1): sparse triplets of the augmented
// assignment per frame. Rows 0..n-1 are points, row n the dustbin; columns
// 0..M-1 are labels, column M the null label. All stored values are 1.
struct GtSparseFrame {
    int t = 0;
    int n_points = 0;
    std::vector<std::pair<int, int>> entries;
};

void write_gt(const std::string& path, const LabelSet& labels,
              const std::vector<GtSparseFrame>& frames, const nlohmann::json& extra_header = {});
std::vector<GtSparseFrame> read_gt(const std::string& path, LabelSet* labels_out = nullptr);

// FNV-1a over the canonical dump; used to stamp outputs with their producing
// config.
std::string config_hash(const nlohmann::json& config);

}  // namespace soma
