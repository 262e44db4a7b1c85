#include "soma/label.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "soma/ot.hpp"
#include "soma/parallel.hpp"
#include "soma/tape.hpp"

namespace soma {

namespace {

constexpr double kLogFloor = 1e-300;

double safe_log(double v) { return std::log(std::max(v, kLogFloor)); }

DecodeResult decode_argmax(const Mat& A) {
    DecodeResult res;
    const int n = A.rows(), null_id = A.cols() - 1;
    res.labels.resize(n);
    res.confidence.resize(n);
    std::vector<int> used(A.cols(), 0);
    for (int i = 0; i < n; ++i) {
        int best = 0;
        for (int j = 1; j < A.cols(); ++j)
            if (A(i, j) > A(i, best)) best = j;
        res.labels[i] = best;
        res.confidence[i] = A(i, best);
        res.log_mass += safe_log(A(i, best));
        if (best != null_id && used[best]++) res.ci_ok = false;
    }
    return res;
}

DecodeResult decode_greedy(const Mat& A) {
    DecodeResult res;
    const int n = A.rows(), null_id = A.cols() - 1;
    res.labels.assign(n, null_id);
    res.confidence.assign(n, 0.0);

    struct Entry {
        double v;
        int i, j;
    };
    std::vector<Entry> entries;
    entries.reserve(size_t(n) * A.cols());
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < A.cols(); ++j) entries.push_back({A(i, j), i, j});
    // value-descending; deterministic scan-order tie-break
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        if (a.v != b.v) return a.v > b.v;
        if (a.i != b.i) return a.i < b.i;
        return a.j < b.j;
    });

    std::vector<bool> row_done(n, false), col_done(A.cols(), false);
    int assigned = 0;
    for (const Entry& e : entries) {
        if (assigned == n) break;
        if (row_done[e.i]) continue;
        if (e.j != null_id && col_done[e.j]) continue;
        row_done[e.i] = true;
        if (e.j != null_id) col_done[e.j] = true;
        res.labels[e.i] = e.j;
        res.confidence[e.i] = e.v;
        res.log_mass += safe_log(e.v);
        ++assigned;
    }
    return res;
}

// Shortest-augmenting-path assignment (potentials form) minimizing cost over
// an n x m matrix with n <= m. Returns column per row.
std::vector<int> hungarian_min(const std::vector<std::vector<double>>& cost) {
    const int n = int(cost.size());
    const int m = int(cost[0].size());
    const double INF = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
    std::vector<int> p(m + 1, n);  // p[j] = row matched to column j (n = none)
    std::vector<int> way(m + 1, 0);
    for (int i = 0; i < n; ++i) {
        p[m] = i;
        int j0 = m;
        std::vector<double> minv(m + 1, INF);
        std::vector<bool> used(m + 1, false);
        do {
            used[j0] = true;
            int i0 = p[j0], j1 = -1;
            double delta = INF;
            for (int j = 0; j < m; ++j) {
                if (used[j]) continue;
                double cur = cost[i0][j] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != n);
        do {
            int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != m);
    }
    std::vector<int> row_to_col(n, -1);
    for (int j = 0; j < m; ++j)
        if (p[j] != n) row_to_col[p[j]] = j;
    return row_to_col;
}

DecodeResult decode_exact(const Mat& A) {
    DecodeResult res;
    const int n = A.rows(), M = A.cols() - 1, null_id = M;
    // columns: M real labels + n null replicas (null may repeat)
    std::vector<std::vector<double>> cost(n, std::vector<double>(M + n));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < M; ++j) cost[i][j] = -safe_log(A(i, j));
        for (int j = 0; j < n; ++j) cost[i][M + j] = -safe_log(A(i, null_id));
    }
    std::vector<int> match = hungarian_min(cost);
    res.labels.resize(n);
    res.confidence.resize(n);
    for (int i = 0; i < n; ++i) {
        int j = match[i] < M ? match[i] : null_id;
        res.labels[i] = j;
        res.confidence[i] = A(i, j);
        res.log_mass += safe_log(A(i, j));
    }
    return res;
}

}  // namespace

DecodeMode decode_mode_from_string(const std::string& s) {
    if (s == "argmax") return DecodeMode::argmax;
    if (s == "greedy") return DecodeMode::greedy;
    if (s == "exact") return DecodeMode::exact;
    throw std::invalid_argument("unknown decode mode: " + s);
}

DecodeResult decode_frame(const Mat& assignment, DecodeMode mode) {
    if (assignment.rows() == 0 || assignment.cols() < 1)
        throw std::invalid_argument("decode: empty assignment matrix");
    switch (mode) {
        case DecodeMode::argmax: return decode_argmax(assignment);
        case DecodeMode::greedy: return decode_greedy(assignment);
        case DecodeMode::exact: return decode_exact(assignment);
    }
    throw std::logic_error("unreachable");
}

DecodeResult label_frame(const Model& model, const Frame& frame, DecodeMode mode) {
    Tape tape;
    ForwardResult fwd = net_forward(tape, model.params, frame);
    const Mat& S = tape.val(fwd.score_node);  // canonical order
    Mat aug = augment_scores(S, model.params.t.alpha(0, 0));
    Mat A = sinkhorn_log(aug, Marginals::standard(S.rows(), S.cols()),
                         model.params.config.sinkhorn_iters);
    DecodeResult canon = decode_frame(drop_unmatched_row(A), mode);

    DecodeResult res;
    res.ci_ok = canon.ci_ok;
    res.log_mass = canon.log_mass;
    res.labels.resize(frame.size());
    res.confidence.resize(frame.size());
    for (int i = 0; i < frame.size(); ++i) {
        res.labels[fwd.order[i]] = canon.labels[i];
        res.confidence[fwd.order[i]] = canon.confidence[i];
    }
    return res;
}

std::vector<DecodeResult> label_sequence(const Model& model, const MoCapSequence& mpc,
                                         DecodeMode mode) {
    std::vector<DecodeResult> out(mpc.size());
    parallel_for(mpc.size(), [&](int i) {
        if (mpc.frames[i].size() == 0) {
            out[i] = DecodeResult{};
            return;
        }
        out[i] = label_frame(model, mpc.frames[i], mode);
    });
    return out;
}

TrackletLabelResult tracklet_label(const std::vector<Labeling>& per_frame,
                                   const std::vector<std::vector<int>>& tracklet_ids,
                                   int null_id) {
    if (per_frame.size() != tracklet_ids.size())
        throw std::invalid_argument("tracklet_label: frame count mismatch");

    // label histogram per tracklet
    std::map<int, std::map<int, int>> votes;
    for (size_t t = 0; t < per_frame.size(); ++t) {
        if (tracklet_ids[t].empty()) continue;
        if (tracklet_ids[t].size() != per_frame[t].size())
            throw std::invalid_argument("tracklet_label: id/label count mismatch");
        for (size_t i = 0; i < per_frame[t].size(); ++i) {
            int id = tracklet_ids[t][i];
            if (id >= 0) votes[id][per_frame[t][i]]++;
        }
    }

    // modal label; ties break to the smallest label index, null ordered last
    std::map<int, int> winner;
    for (const auto& [id, hist] : votes) {
        int best_label = -1, best_count = -1;
        for (const auto& [label, count] : hist) {
            bool better = count > best_count;
            if (count == best_count) {
                bool cur_null = label == null_id, best_null = best_label == null_id;
                if (cur_null != best_null) better = best_null;  // non-null wins ties
                else better = label < best_label;
            }
            if (better) {
                best_label = label;
                best_count = count;
            }
        }
        winner[id] = best_label;
    }

    TrackletLabelResult res;
    res.labels = per_frame;
    res.ci_ok.assign(per_frame.size(), true);
    for (size_t t = 0; t < per_frame.size(); ++t) {
        if (!tracklet_ids[t].empty()) {
            for (size_t i = 0; i < per_frame[t].size(); ++i) {
                int id = tracklet_ids[t][i];
                if (id >= 0) res.labels[t][i] = winner[id];
            }
        }
        std::vector<int> used;
        for (int lbl : res.labels[t])
            if (lbl != null_id) used.push_back(lbl);
        std::sort(used.begin(), used.end());
        res.ci_ok[t] = std::adjacent_find(used.begin(), used.end()) == used.end();
    }
    return res;
}

}  // namespace soma
