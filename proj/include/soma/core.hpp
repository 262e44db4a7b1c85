#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "soma/math.hpp"

namespace soma {

// One frame of a mocap point cloud: unordered 3D points, optional tracklet
// ids and optional ground-truth label ids (index into a LabelSet; the null
// label is a valid id). Occluded markers are simply absent.
struct Frame {
    std::vector<Vec3> points;
    std::vector<int> tracklet_ids;  // empty, or one id per point (-1 = none)
    std::vector<int> labels;        // empty, or one label id per point

    int size() const { return int(points.size()); }
    bool has_tracklets() const { return !tracklet_ids.empty(); }
    bool has_labels() const { return !labels.empty(); }
};

struct MoCapSequence {
    std::vector<Frame> frames;
    double rate_hz = 30.0;

    int size() const { return int(frames.size()); }
};

// Ordered marker labels plus the distinguished null label (always last).
class LabelSet {
public:
    LabelSet() = default;
    // Builds from marker names; appends "null". Throws on duplicates or if a
    // marker is itself named "null".
    explicit LabelSet(std::vector<std::string> marker_names);

    int M() const { return int(names_.size()) - 1; }
    int size() const { return int(names_.size()); }  // M + 1
    int null_id() const { return M(); }
    const std::string& name(int id) const { return names_.at(id); }
    const std::vector<std::string>& names() const { return names_; }
    // -1 if unknown.
    int find(const std::string& name) const;

    bool operator==(const LabelSet& o) const { return names_ == o.names_; }

private:
    std::vector<std::string> names_;
};

struct MarkerLayout {
    LabelSet label_set;
    std::vector<int> vertex_ids;   // length M
    std::vector<double> offsets;   // length M, meters, >= 0

    int M() const { return label_set.M(); }
};

// Per-point label ids; null_id is allowed to repeat, other ids are not.
using Labeling = std::vector<int>;

// Soft assignment of points to labels, [0,1] entries. `values` is
// n_t x (M+1); the augmented variant carries one extra dustbin row.
struct AssignmentMatrix {
    Mat values;
    bool augmented = false;

    int points() const { return values.rows() - (augmented ? 1 : 0); }
    int labels() const { return values.cols(); }  // M + 1
};

// --- Operations -----------------------------------------------------------

// Subtracts the coordinate-wise median; returns the centered frame and the
// offset that restores the original. Throws on an empty frame.
std::pair<Frame, Vec3> median_center(const Frame& frame);

// Fraction of points whose predicted label equals ground truth (null counts
// as a label). Throws on length mismatch.
double accuracy(const Labeling& pred, const Labeling& gt);

// Per-frame F1 with non-null labels as the positive class. A prediction is
// correct when it matches a non-null ground-truth label. Empty frames score
// 1.0 (degenerate, avoids NaN in sequence means); P + R == 0 scores 0.
double f1_frame(const Labeling& pred, const Labeling& gt, int null_id);

// Arithmetic mean of per-frame F1 scores. Throws on an empty list.
double f1_sequence(const std::vector<double>& per_frame);

// Mean and population standard deviation of a per-frame metric.
std::pair<double, double> mean_std(const std::vector<double>& values);

}  // namespace soma
