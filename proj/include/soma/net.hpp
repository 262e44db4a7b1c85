#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "soma/core.hpp"
#include "soma/tape.hpp"

namespace soma {

struct NetConfig {
    int d_model = 125;
    int heads = 5;
    int layers = 8;
    int feature_width = 256;
    int sinkhorn_iters = 35;

    int head_dim() const { return d_model / heads; }
    void validate() const;
    nlohmann::json to_json() const;
    static NetConfig from_json(const nlohmann::json& j);
};

// All trainable tensors, templated so the same structure can carry parameter
// matrices, gradient buffers or tape node ids.
template <typename T>
struct NetTensorsT {
    struct Block {
        std::vector<T> wq, bq, wk, bk, wv, bv;  // one entry per head
        T wo{}, bo{}, ln1_g{}, ln1_b{};
        T ff_w1{}, ff_b1{}, ff_w2{}, ff_b2{}, ln2_g{}, ln2_b{};
    };
    T embed_w{}, embed_b{};
    std::vector<Block> blocks;
    T head_w1{}, head_b1{}, head_w2{}, head_b2{};
    T alpha{};  // learned dustbin score

    // Visits every tensor in a fixed declared order; this order defines the
    // checkpoint layout and the flat gradient vector.
    template <class F>
    void for_each(F&& f) {
        f("embed.w", embed_w);
        f("embed.b", embed_b);
        for (size_t b = 0; b < blocks.size(); ++b) {
            auto& blk = blocks[b];
            std::string p = "block" + std::to_string(b) + ".";
            for (size_t h = 0; h < blk.wq.size(); ++h) {
                std::string hp = p + "head" + std::to_string(h) + ".";
                f(hp + "wq", blk.wq[h]);
                f(hp + "bq", blk.bq[h]);
                f(hp + "wk", blk.wk[h]);
                f(hp + "bk", blk.bk[h]);
                f(hp + "wv", blk.wv[h]);
                f(hp + "bv", blk.bv[h]);
            }
            f(p + "wo", blk.wo);
            f(p + "bo", blk.bo);
            f(p + "ln1.g", blk.ln1_g);
            f(p + "ln1.b", blk.ln1_b);
            f(p + "ff.w1", blk.ff_w1);
            f(p + "ff.b1", blk.ff_b1);
            f(p + "ff.w2", blk.ff_w2);
            f(p + "ff.b2", blk.ff_b2);
            f(p + "ln2.g", blk.ln2_g);
            f(p + "ln2.b", blk.ln2_b);
        }
        f("head.w1", head_w1);
        f("head.b1", head_b1);
        f("head.w2", head_w2);
        f("head.b2", head_b2);
        f("alpha", alpha);
    }

    template <class F>
    void for_each(F&& f) const {
        const_cast<NetTensorsT*>(this)->for_each(
            [&](const std::string& name, T& t) { f(name, const_cast<const T&>(t)); });
    }
};

struct NetParams {
    NetConfig config;
    int n_labels = 0;  // M
    NetTensorsT<Mat> t;

    // Scaled uniform fan-in init, deterministic for a seed. alpha starts at 1.
    static NetParams init(const NetConfig& config, int n_labels, uint64_t seed);

    size_t param_count() const;
    std::vector<double> flatten() const;
    void unflatten(const std::vector<double>& flat);
    bool all_finite() const;
};

struct ForwardOptions {
    bool want_attention = false;
    // Process points in a value-sorted order so reductions over points are
    // independent of the input permutation (restored on output).
    bool canonical_order = true;
};

struct ForwardResult {
    int score_node = -1;       // S (n x M) on the tape, processing order
    std::vector<int> order;    // processing row -> original point index
    NetTensorsT<int> ids;      // parameter leaf ids
    std::vector<std::vector<Mat>> attention;  // [layer][head], processing order
    Vec3 median_offset;

    // S with rows mapped back to the original point order.
    Mat scores_in_input_order(const Tape& tape) const;
};

// Median-center -> embed -> stacked attention blocks -> feature head -> score
// head. Throws on an empty frame.
ForwardResult net_forward(Tape& tape, const NetParams& params, const Frame& frame,
                          const ForwardOptions& options = {});

// --- Attention-span diagnostic ---------------------------------------------

// Mean over frames of per-head-max attention, remapped to label space.
// Frames must be clean: labeled, exactly M points, no null labels.
struct AttentionSpanResult {
    std::vector<double> per_layer_m;     // meters
    std::vector<Mat> mean_attention;     // [layer] (M x M), label space
};

AttentionSpanResult attention_span(const NetParams& params, const std::vector<Frame>& frames,
                                   int n_labels, const Mat& marker_distances);

// span = mean over rows of sum_j W(i,j) * D(i,j)
double span_scalar(const Mat& label_attention, const Mat& marker_distances);

// --- Checkpoints -------------------------------------------------------------

// Versioned container: magic "SOMACKP1", little-endian u64 header length,
// JSON header (config, label set, tensor table, metadata), then raw
// little-endian float32 tensor data in header order.
struct Model {
    NetParams params;
    LabelSet labels;
    nlohmann::json meta;
};

void save_checkpoint(const std::string& path, const NetParams& params, const LabelSet& labels,
                     const nlohmann::json& metadata);
Model load_checkpoint(const std::string& path);

}  // namespace soma
