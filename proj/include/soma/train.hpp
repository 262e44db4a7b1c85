#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "soma/core.hpp"
#include "soma/net.hpp"
#include "soma/noise.hpp"

namespace soma {

// Binary (n_t+1) x (M+1) ground-truth assignment: point -> its label (or the
// null column for ghosts); occluded labels -> the dustbin row. The corner is
// always zero.
struct GtAssignment {
    Mat m;

    static GtAssignment build(const std::vector<int>& point_labels,
                              const std::vector<int>& occluded_labels, int n_labels);
    void validate() const;
};

// Reweighting of the over-represented classes by reciprocal batch frequency.
// Zero-frequency classes keep weight 1 (no mass, no reweighting); otherwise
// the weight is min(1/freq, cap).
struct ClassWeightScales {
    double null_column = 1.0;
    double dustbin_row = 1.0;
};

ClassWeightScales class_weight_scales(const std::vector<GtAssignment>& batch, double cap = 100.0);
Mat class_weights_for(int rows, int cols, const ClassWeightScales& scales);
std::vector<Mat> class_weights(const std::vector<GtAssignment>& batch, double cap = 100.0);

// c_l * weighted NLL (Eq.-style, normalized by total GT mass) plus
// c_reg * squared parameter norm.
double loss_value(const Mat& aug_assignment, const GtAssignment& gt, const Mat& weights,
                  const NetParams& params, double c_l, double c_reg);

struct TrainConfig {
    double c_l = 1.0;
    double c_reg = 5e-5;
    double lr = 1e-3;
    double plateau_factor = 0.1;
    int plateau_patience = 3;
    int early_stop_patience = 8;
    int batch_size = 32;
    int max_epochs = 200;
    double weight_cap = 100.0;
    double adam_beta1 = 0.9, adam_beta2 = 0.999, adam_eps = 1e-8;
    uint64_t seed = 1;  // drives both init and the epoch shuffles

    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);
};

struct EpochStats {
    int epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double val_acc = 0.0;
    double val_f1 = 0.0;
};

struct TrainResult {
    NetParams best_params;
    NetParams last_params;
    std::vector<EpochStats> history;
    int best_epoch = -1;
    double best_val_acc = 0.0;
};

// Adam on all parameters (dustbin score included), lr x 0.1 on validation
// plateau, early stop when validation accuracy stops improving. Deterministic
// for a fixed config. Throws on divergence (non-finite loss).
TrainResult train(const NetConfig& net_config, const Corpus& train_corpus,
                  const Corpus& val_corpus, const TrainConfig& config,
                  std::ostream* log = nullptr);

// --- Gradient verification ----------------------------------------------------

struct GradCheckEntry {
    std::string tensor;
    double max_rel_err = 0.0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> tensors;
    double max_rel_err = 0.0;
};

// Central finite differences through the full pipeline (forward -> augment ->
// sinkhorn -> loss) for every trainable tensor of a small configuration.
GradCheckReport gradient_check(const NetConfig& net_config, double eps = 1e-5);

}  // namespace soma
