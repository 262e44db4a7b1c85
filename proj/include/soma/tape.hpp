#pragma once

#include <vector>

#include "soma/math.hpp"

namespace soma {

// Define-by-run reverse-mode differentiation over matrix-valued nodes.
// Construction order is a topological order, so the backward sweep is a
// single reverse pass visiting each node exactly once.
//
// Leaf nodes reference external storage (parameters); computed nodes own
// their values. Gradients accumulate into per-node buffers and are read back
// from the leaves after backward().
class Tape {
public:
    enum class Op {
        Leaf,
        MatmulNN,   // a(m,k) * b(k,n)
        MatmulNT,   // a(m,k) * b(n,k)^T
        Add,
        Sub,
        Mul,        // elementwise
        Scale,      // * scalar
        AddRowVec,  // a(n,m) + b(1,m)
        AddColVec,  // a(n,m) + b(n,1)
        Relu,
        RowSoftmax,
        LayerNorm,  // per-row normalization with gain/bias
        ConcatCols,
        LseRows,    // logsumexp over each row -> (n,1)
        LseCols,    // logsumexp over each column -> (1,m)
        Augment,    // append dustbin row/column filled with a scalar score
        Exp,
        SumAll,     // -> (1,1)
        SumSq,      // sum of squares -> (1,1)
        WeightedNll // -(1/sum gt) * sum W . gt . log(clamp(a)) -> (1,1)
    };

    struct Node {
        Op op = Op::Leaf;
        int a = -1, b = -1, c = -1;
        std::vector<int> parents;  // ConcatCols only
        Mat own_value;
        const Mat* external = nullptr;
        Mat grad;
        bool requires_grad = true;
        double scalar = 0.0;
        Mat aux1, aux2;            // op-specific caches
        const Mat* gt = nullptr;   // WeightedNll
        const Mat* weights = nullptr;
        double total_gt = 0.0;
    };

    int leaf(const Mat* external, bool requires_grad = true);
    int constant(Mat value);

    int matmul(int a, int b);
    int matmul_nt(int a, int b);
    int add(int a, int b);
    int sub(int a, int b);
    int mul(int a, int b);
    int scale(int a, double s);
    int add_rowvec(int a, int v);
    int add_colvec(int a, int u);
    int relu(int a);
    int row_softmax(int a);
    int layernorm_rows(int x, int gain, int bias, double eps = 1e-5);
    int concat_cols(const std::vector<int>& parts);
    int lse_rows(int a);
    int lse_cols(int a);
    int augment(int scores, int alpha);
    int exp(int a);
    int sum_all(int a);
    int sum_sq(int a);
    int weighted_nll(int a, const Mat* gt, const Mat* weights, double clamp_eps = 1e-12);

    const Mat& val(int id) const { return value(check(id)); }
    // Gradient of a node after backward(); zero-sized if never touched.
    const Mat& grad_of(int id) const { return nodes_[check(id)].grad; }

    // Reverse sweep seeding d(loss)/d(loss) = seed. Throws if no forward was
    // recorded or if called twice without a new forward.
    void backward(int id, double seed = 1.0);

    int size() const { return int(nodes_.size()); }
    bool backward_done() const { return backward_done_; }
    void reset();

private:
    int check(int id) const;
    const Mat& value(int idx) const {
        const Node& n = nodes_[idx];
        return n.external ? *n.external : n.own_value;
    }
    Mat& ensure_grad(int idx);
    int push(Node n);

    std::vector<Node> nodes_;
    bool backward_done_ = false;
};

}  // namespace soma
