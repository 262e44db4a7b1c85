#include "soma/core.hpp"

#include <algorithm>
#include <set>

namespace soma {

LabelSet::LabelSet(std::vector<std::string> marker_names) {
    std::set<std::string> seen;
    for (const auto& n : marker_names) {
        if (n == "null") throw std::invalid_argument("marker name 'null' is reserved");
        if (!seen.insert(n).second) throw std::invalid_argument("duplicate marker name: " + n);
    }
    names_ = std::move(marker_names);
    names_.push_back("null");
}

int LabelSet::find(const std::string& name) const {
    for (int i = 0; i < int(names_.size()); ++i)
        if (names_[i] == name) return i;
    return -1;
}

std::pair<Frame, Vec3> median_center(const Frame& frame) {
    if (frame.points.empty()) throw std::invalid_argument("empty frame");
    int n = frame.size();
    auto median_of = [n](std::vector<double>& v) {
        std::sort(v.begin(), v.end());
        if (n % 2 == 1) return v[n / 2];
        return 0.5 * (v[n / 2 - 1] + v[n / 2]);
    };
    std::vector<double> xs(n), ys(n), zs(n);
    for (int i = 0; i < n; ++i) {
        xs[i] = frame.points[i].x;
        ys[i] = frame.points[i].y;
        zs[i] = frame.points[i].z;
    }
    Vec3 med{median_of(xs), median_of(ys), median_of(zs)};
    Frame out = frame;
    for (auto& p : out.points) p -= med;
    return {std::move(out), med};
}

double accuracy(const Labeling& pred, const Labeling& gt) {
    if (pred.size() != gt.size()) throw std::invalid_argument("labeling length mismatch");
    if (pred.empty()) return 1.0;  // vacuous, mirrors the empty-frame F1 convention
    int correct = 0;
    for (size_t i = 0; i < pred.size(); ++i)
        if (pred[i] == gt[i]) ++correct;
    return double(correct) / double(pred.size());
}

double f1_frame(const Labeling& pred, const Labeling& gt, int null_id) {
    if (pred.size() != gt.size()) throw std::invalid_argument("labeling length mismatch");
    if (pred.empty()) return 1.0;
    int predicted_pos = 0, actual_pos = 0, correct_pos = 0;
    for (size_t i = 0; i < pred.size(); ++i) {
        bool p = pred[i] != null_id;
        bool a = gt[i] != null_id;
        predicted_pos += p;
        actual_pos += a;
        correct_pos += (p && a && pred[i] == gt[i]);
    }
    double precision = predicted_pos > 0 ? double(correct_pos) / predicted_pos : 0.0;
    double recall = actual_pos > 0 ? double(correct_pos) / actual_pos : 0.0;
    if (precision + recall == 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

double f1_sequence(const std::vector<double>& per_frame) {
    if (per_frame.empty()) throw std::invalid_argument("empty F1 list");
    double s = 0.0;
    for (double v : per_frame) s += v;
    return s / double(per_frame.size());
}

std::pair<double, double> mean_std(const std::vector<double>& values) {
    if (values.empty()) throw std::invalid_argument("empty metric list");
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= double(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= double(values.size());
    return {mean, std::sqrt(var)};
}

}  // namespace soma
