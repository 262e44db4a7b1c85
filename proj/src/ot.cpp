#include "soma/ot.hpp"

#include <cmath>
#include <stdexcept>

namespace soma {

Marginals Marginals::standard(int n_points, int n_labels) {
    Marginals m;
    m.row_masses.assign(n_points + 1, 1.0);
    m.row_masses.back() = double(n_labels);
    m.col_masses.assign(n_labels + 1, 1.0);
    m.col_masses.back() = double(n_points);
    return m;
}

void Marginals::validate(int rows, int cols) const {
    if (int(row_masses.size()) != rows || int(col_masses.size()) != cols)
        throw std::invalid_argument("marginals: size mismatch with augmented scores");
    double r = 0.0, c = 0.0;
    for (double v : row_masses) {
        if (v <= 0.0) throw std::invalid_argument("marginals: masses must be positive");
        r += v;
    }
    for (double v : col_masses) {
        if (v <= 0.0) throw std::invalid_argument("marginals: masses must be positive");
        c += v;
    }
    if (std::abs(r - c) > 1e-9 * std::max(1.0, r))
        throw std::invalid_argument("marginals: total row and column mass differ");
}

Mat augment_scores(const Mat& scores, double alpha) {
    if (!scores.all_finite() || !std::isfinite(alpha))
        throw std::invalid_argument("augment: scores and dustbin score must be finite");
    Mat out(scores.rows() + 1, scores.cols() + 1, alpha);
    for (int i = 0; i < scores.rows(); ++i)
        for (int j = 0; j < scores.cols(); ++j) out(i, j) = scores(i, j);
    return out;
}

namespace {

double lse_row(const Mat& Z, const std::vector<double>& v, int i) {
    double mx = Z(i, 0) + v[0];
    for (int j = 1; j < Z.cols(); ++j) mx = std::max(mx, Z(i, j) + v[j]);
    double s = 0.0;
    for (int j = 0; j < Z.cols(); ++j) s += std::exp(Z(i, j) + v[j] - mx);
    return mx + std::log(s);
}

double lse_col(const Mat& Z, const std::vector<double>& u, int j) {
    double mx = Z(0, j) + u[0];
    for (int i = 1; i < Z.rows(); ++i) mx = std::max(mx, Z(i, j) + u[i]);
    double s = 0.0;
    for (int i = 0; i < Z.rows(); ++i) s += std::exp(Z(i, j) + u[i] - mx);
    return mx + std::log(s);
}

}  // namespace

Mat sinkhorn_log(const Mat& aug_scores, const Marginals& marginals, int iters) {
    if (iters < 1) throw std::invalid_argument("sinkhorn: iters must be >= 1");
    if (!aug_scores.all_finite()) throw std::invalid_argument("sinkhorn: non-finite scores");
    marginals.validate(aug_scores.rows(), aug_scores.cols());

    const int R = aug_scores.rows(), C = aug_scores.cols();
    std::vector<double> log_mu(R), log_nu(C);
    for (int i = 0; i < R; ++i) log_mu[i] = std::log(marginals.row_masses[i]);
    for (int j = 0; j < C; ++j) log_nu[j] = std::log(marginals.col_masses[j]);

    std::vector<double> u(R, 0.0), v(C, 0.0);
    for (int it = 0; it < iters; ++it) {
        for (int i = 0; i < R; ++i) u[i] = log_mu[i] - lse_row(aug_scores, v, i);
        for (int j = 0; j < C; ++j) v[j] = log_nu[j] - lse_col(aug_scores, u, j);
    }

    Mat out(R, C);
    for (int i = 0; i < R; ++i)
        for (int j = 0; j < C; ++j) out(i, j) = std::exp(aug_scores(i, j) + u[i] + v[j]);
    return out;
}

Mat drop_unmatched_row(const Mat& aug_assignment) {
    if (aug_assignment.rows() < 1) throw std::invalid_argument("drop_unmatched_row: empty matrix");
    Mat out(aug_assignment.rows() - 1, aug_assignment.cols());
    for (int i = 0; i < out.rows(); ++i)
        for (int j = 0; j < out.cols(); ++j) out(i, j) = aug_assignment(i, j);
    return out;
}

int sinkhorn_log_tape(Tape& tape, int aug_scores_node, const Marginals& marginals, int iters) {
    if (iters < 1) throw std::invalid_argument("sinkhorn: iters must be >= 1");
    const Mat& Z = tape.val(aug_scores_node);
    marginals.validate(Z.rows(), Z.cols());
    if (!Z.all_finite()) throw std::invalid_argument("sinkhorn: non-finite scores");

    const int R = Z.rows(), C = Z.cols();
    Mat log_mu(R, 1), log_nu(1, C);
    for (int i = 0; i < R; ++i) log_mu(i, 0) = std::log(marginals.row_masses[i]);
    for (int j = 0; j < C; ++j) log_nu(0, j) = std::log(marginals.col_masses[j]);
    int mu = tape.constant(std::move(log_mu));
    int nu = tape.constant(std::move(log_nu));

    int u = tape.constant(Mat(R, 1));
    int v = tape.constant(Mat(1, C));
    for (int it = 0; it < iters; ++it) {
        u = tape.sub(mu, tape.lse_rows(tape.add_rowvec(aug_scores_node, v)));
        v = tape.sub(nu, tape.lse_cols(tape.add_colvec(aug_scores_node, u)));
    }
    return tape.exp(tape.add_rowvec(tape.add_colvec(aug_scores_node, u), v));
}

}  // namespace soma
