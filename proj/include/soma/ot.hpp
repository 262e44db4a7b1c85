#pragma once

#include <vector>

#include "soma/math.hpp"
#include "soma/tape.hpp"

namespace soma {

// Target marginals of the augmented transport problem: real rows/columns get
// unit mass, the dustbin row absorbs up to M unmatched labels and the dustbin
// column up to n_t unmatched points.
struct Marginals {
    std::vector<double> row_masses;  // length n_t + 1
    std::vector<double> col_masses;  // length M + 1

    static Marginals standard(int n_points, int n_labels);
    void validate(int rows, int cols) const;
};

// Appends the dustbin row and column, filled with the scalar score alpha
// (bottom-right corner included). Throws on non-finite input.
Mat augment_scores(const Mat& scores, double alpha);

// Log-domain Sinkhorn: alternating row/column scaling of exp(S') toward the
// marginals. Column update runs last, so columns are satisfied exactly and
// rows converge with the iteration count. Returns probabilities.
Mat sinkhorn_log(const Mat& aug_scores, const Marginals& marginals, int iters);

// Removes the dustbin row (unmatched labels), keeping the null column.
Mat drop_unmatched_row(const Mat& aug_assignment);

// Differentiable variant recorded on a tape; the iteration is unrolled so
// backward() yields exact gradients of the fixed-iteration operator.
int sinkhorn_log_tape(Tape& tape, int aug_scores_node, const Marginals& marginals, int iters);

}  // namespace soma
