#include "soma/tape.hpp"

#include <cmath>
#include <stdexcept>

#include "soma/kernels.hpp"

namespace soma {

namespace {
const kern::Kernels& K() { return kern::k(); }
}

int Tape::check(int id) const {
    if (id < 0 || id >= int(nodes_.size()))
        throw std::logic_error("tape: invalid node id (backward before forward?)");
    return id;
}

int Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return int(nodes_.size()) - 1;
}

Mat& Tape::ensure_grad(int idx) {
    Node& n = nodes_[idx];
    const Mat& v = value(idx);
    if (n.grad.rows() != v.rows() || n.grad.cols() != v.cols()) n.grad = Mat(v.rows(), v.cols());
    return n.grad;
}

void Tape::reset() {
    nodes_.clear();
    backward_done_ = false;
}

int Tape::leaf(const Mat* external, bool requires_grad) {
    if (!external) throw std::invalid_argument("tape: null leaf");
    Node n;
    n.op = Op::Leaf;
    n.external = external;
    n.requires_grad = requires_grad;
    return push(std::move(n));
}

int Tape::constant(Mat value) {
    Node n;
    n.op = Op::Leaf;
    n.own_value = std::move(value);
    n.requires_grad = false;
    return push(std::move(n));
}

int Tape::matmul(int a, int b) {
    const Mat& A = val(a);
    const Mat& B = val(b);
    if (A.cols() != B.rows()) throw std::invalid_argument("matmul: inner dims mismatch");
    Node n;
    n.op = Op::MatmulNN;
    n.a = a;
    n.b = b;
    n.own_value = Mat(A.rows(), B.cols());
    K().matmul_nn(A.rows(), A.cols(), B.cols(), A.data(), B.data(), n.own_value.data());
    return push(std::move(n));
}

int Tape::matmul_nt(int a, int b) {
    const Mat& A = val(a);
    const Mat& B = val(b);
    if (A.cols() != B.cols()) throw std::invalid_argument("matmul_nt: inner dims mismatch");
    Node n;
    n.op = Op::MatmulNT;
    n.a = a;
    n.b = b;
    n.own_value = Mat(A.rows(), B.rows());
    K().matmul_nt(A.rows(), A.cols(), B.rows(), A.data(), B.data(), n.own_value.data());
    return push(std::move(n));
}

int Tape::add(int a, int b) {
    const Mat& A = val(a);
    const Mat& B = val(b);
    if (!A.same_shape(B)) throw std::invalid_argument("add: shape mismatch");
    Node n;
    n.op = Op::Add;
    n.a = a;
    n.b = b;
    n.own_value = Mat(A.rows(), A.cols());
    K().vadd(int(A.size()), A.data(), B.data(), n.own_value.data());
    return push(std::move(n));
}

int Tape::sub(int a, int b) {
    const Mat& A = val(a);
    const Mat& B = val(b);
    if (!A.same_shape(B)) throw std::invalid_argument("sub: shape mismatch");
    Node n;
    n.op = Op::Sub;
    n.a = a;
    n.b = b;
    n.own_value = Mat(A.rows(), A.cols());
    K().vsub(int(A.size()), A.data(), B.data(), n.own_value.data());
    return push(std::move(n));
}

int Tape::mul(int a, int b) {
    const Mat& A = val(a);
    const Mat& B = val(b);
    if (!A.same_shape(B)) throw std::invalid_argument("mul: shape mismatch");
    Node n;
    n.op = Op::Mul;
    n.a = a;
    n.b = b;
    n.own_value = Mat(A.rows(), A.cols());
    K().vmul(int(A.size()), A.data(), B.data(), n.own_value.data());
    return push(std::move(n));
}

int Tape::scale(int a, double s) {
    const Mat& A = val(a);
    Node n;
    n.op = Op::Scale;
    n.a = a;
    n.scalar = s;
    n.own_value = A;
    K().scale(int(A.size()), s, n.own_value.data());
    return push(std::move(n));
}

int Tape::add_rowvec(int a, int v) {
    const Mat& A = val(a);
    const Mat& V = val(v);
    if (V.rows() != 1 || V.cols() != A.cols())
        throw std::invalid_argument("add_rowvec: vector shape mismatch");
    Node n;
    n.op = Op::AddRowVec;
    n.a = a;
    n.b = v;
    n.own_value = Mat(A.rows(), A.cols());
    for (int i = 0; i < A.rows(); ++i)
        K().vadd(A.cols(), A.row(i), V.data(), n.own_value.row(i));
    return push(std::move(n));
}

int Tape::add_colvec(int a, int u) {
    const Mat& A = val(a);
    const Mat& U = val(u);
    if (U.cols() != 1 || U.rows() != A.rows())
        throw std::invalid_argument("add_colvec: vector shape mismatch");
    Node n;
    n.op = Op::AddColVec;
    n.a = a;
    n.b = u;
    n.own_value = A;
    for (int i = 0; i < A.rows(); ++i) {
        double c = U(i, 0);
        double* row = n.own_value.row(i);
        for (int j = 0; j < A.cols(); ++j) row[j] += c;
    }
    return push(std::move(n));
}

int Tape::relu(int a) {
    const Mat& A = val(a);
    Node n;
    n.op = Op::Relu;
    n.a = a;
    n.own_value = Mat(A.rows(), A.cols());
    for (size_t i = 0; i < A.size(); ++i)
        n.own_value.data()[i] = A.data()[i] > 0.0 ? A.data()[i] : 0.0;
    return push(std::move(n));
}

int Tape::row_softmax(int a) {
    const Mat& A = val(a);
    Node n;
    n.op = Op::RowSoftmax;
    n.a = a;
    n.own_value = Mat(A.rows(), A.cols());
    for (int i = 0; i < A.rows(); ++i) {
        const double* x = A.row(i);
        double* y = n.own_value.row(i);
        double mx = K().vmax(A.cols(), x);
        for (int j = 0; j < A.cols(); ++j) y[j] = x[j] - mx;
        K().vexp(A.cols(), y, y);
        double s = K().sum(A.cols(), y);
        K().scale(A.cols(), 1.0 / s, y);
    }
    return push(std::move(n));
}

int Tape::layernorm_rows(int x, int gain, int bias, double eps) {
    const Mat& X = val(x);
    const Mat& G = val(gain);
    const Mat& B = val(bias);
    if (G.rows() != 1 || G.cols() != X.cols() || B.rows() != 1 || B.cols() != X.cols())
        throw std::invalid_argument("layernorm: gain/bias shape mismatch");
    Node n;
    n.op = Op::LayerNorm;
    n.a = x;
    n.b = gain;
    n.c = bias;
    n.scalar = eps;
    n.own_value = Mat(X.rows(), X.cols());
    n.aux1 = Mat(X.rows(), X.cols());  // xhat
    n.aux2 = Mat(X.rows(), 1);         // inv std
    const int m = X.cols();
    for (int i = 0; i < X.rows(); ++i) {
        const double* row = X.row(i);
        double mu = K().sum(m, row) / m;
        double var = 0.0;
        for (int j = 0; j < m; ++j) var += (row[j] - mu) * (row[j] - mu);
        var /= m;
        double inv = 1.0 / std::sqrt(var + eps);
        n.aux2(i, 0) = inv;
        double* xh = n.aux1.row(i);
        double* y = n.own_value.row(i);
        for (int j = 0; j < m; ++j) {
            xh[j] = (row[j] - mu) * inv;
            y[j] = xh[j] * G(0, j) + B(0, j);
        }
    }
    return push(std::move(n));
}

int Tape::concat_cols(const std::vector<int>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: empty");
    int rows = val(parts[0]).rows();
    int cols = 0;
    for (int p : parts) {
        if (val(p).rows() != rows) throw std::invalid_argument("concat_cols: row mismatch");
        cols += val(p).cols();
    }
    Node n;
    n.op = Op::ConcatCols;
    n.parents = parts;
    n.own_value = Mat(rows, cols);
    int off = 0;
    for (int p : parts) {
        const Mat& P = val(p);
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < P.cols(); ++j) n.own_value(i, off + j) = P(i, j);
        off += P.cols();
    }
    return push(std::move(n));
}

namespace {

// stable logsumexp of a strided sequence
double lse_of(const double* x, int n, int stride) {
    double mx = x[0];
    for (int i = 1; i < n; ++i)
        if (x[size_t(i) * stride] > mx) mx = x[size_t(i) * stride];
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += std::exp(x[size_t(i) * stride] - mx);
    return mx + std::log(s);
}

}  // namespace

int Tape::lse_rows(int a) {
    const Mat& A = val(a);
    Node n;
    n.op = Op::LseRows;
    n.a = a;
    n.own_value = Mat(A.rows(), 1);
    for (int i = 0; i < A.rows(); ++i) n.own_value(i, 0) = lse_of(A.row(i), A.cols(), 1);
    return push(std::move(n));
}

int Tape::lse_cols(int a) {
    const Mat& A = val(a);
    Node n;
    n.op = Op::LseCols;
    n.a = a;
    n.own_value = Mat(1, A.cols());
    for (int j = 0; j < A.cols(); ++j) n.own_value(0, j) = lse_of(A.data() + j, A.rows(), A.cols());
    return push(std::move(n));
}

int Tape::augment(int scores, int alpha) {
    const Mat& S = val(scores);
    const Mat& A = val(alpha);
    if (A.rows() != 1 || A.cols() != 1) throw std::invalid_argument("augment: alpha must be 1x1");
    if (!S.all_finite() || !A.all_finite())
        throw std::invalid_argument("augment: scores and dustbin score must be finite");
    double a = A(0, 0);
    Node n;
    n.op = Op::Augment;
    n.a = scores;
    n.b = alpha;
    n.own_value = Mat(S.rows() + 1, S.cols() + 1, a);
    for (int i = 0; i < S.rows(); ++i)
        for (int j = 0; j < S.cols(); ++j) n.own_value(i, j) = S(i, j);
    return push(std::move(n));
}

int Tape::exp(int a) {
    const Mat& A = val(a);
    Node n;
    n.op = Op::Exp;
    n.a = a;
    n.own_value = Mat(A.rows(), A.cols());
    K().vexp(int(A.size()), A.data(), n.own_value.data());
    return push(std::move(n));
}

int Tape::sum_all(int a) {
    const Mat& A = val(a);
    Node n;
    n.op = Op::SumAll;
    n.a = a;
    n.own_value = Mat(1, 1);
    n.own_value(0, 0) = K().sum(int(A.size()), A.data());
    return push(std::move(n));
}

int Tape::sum_sq(int a) {
    const Mat& A = val(a);
    Node n;
    n.op = Op::SumSq;
    n.a = a;
    n.own_value = Mat(1, 1);
    n.own_value(0, 0) = K().dot(int(A.size()), A.data(), A.data());
    return push(std::move(n));
}

int Tape::weighted_nll(int a, const Mat* gt, const Mat* weights, double clamp_eps) {
    const Mat& A = val(a);
    if (!gt || !weights || !A.same_shape(*gt) || !A.same_shape(*weights))
        throw std::invalid_argument("weighted_nll: shape mismatch");
    double total = K().sum(int(gt->size()), gt->data());
    if (total <= 0.0) throw std::invalid_argument("weighted_nll: ground truth carries no mass");
    Node n;
    n.op = Op::WeightedNll;
    n.a = a;
    n.gt = gt;
    n.weights = weights;
    n.total_gt = total;
    n.scalar = clamp_eps;
    double acc = 0.0;
    for (size_t i = 0; i < A.size(); ++i) {
        double g = gt->data()[i];
        if (g == 0.0) continue;
        double v = std::max(A.data()[i], clamp_eps);
        acc += weights->data()[i] * g * std::log(v);
    }
    n.own_value = Mat(1, 1);
    n.own_value(0, 0) = -acc / total;
    return push(std::move(n));
}

void Tape::backward(int id, double seed) {
    check(id);
    if (nodes_.empty()) throw std::logic_error("tape: backward before forward");
    if (backward_done_) throw std::logic_error("tape: backward called twice without a new forward");
    backward_done_ = true;

    ensure_grad(id).fill(seed);

    // gradients are not propagated into constant leaves
    auto needs = [&](int i) { return nodes_[i].requires_grad || nodes_[i].op != Op::Leaf; };

    for (int idx = int(nodes_.size()) - 1; idx >= 0; --idx) {
        Node& n = nodes_[idx];
        if (n.grad.empty()) continue;  // no gradient flowed here
        const Mat& dY = n.grad;
        switch (n.op) {
            case Op::Leaf:
                break;
            case Op::MatmulNN: {
                const Mat& A = value(n.a);
                const Mat& B = value(n.b);
                if (needs(n.a)) {
                    Mat dA(A.rows(), A.cols());
                    K().matmul_nt(dY.rows(), dY.cols(), B.rows(), dY.data(), B.data(), dA.data());
                    K().axpy(int(dA.size()), 1.0, dA.data(), ensure_grad(n.a).data());
                }
                if (needs(n.b)) {
                    Mat dB(B.rows(), B.cols());
                    K().matmul_tn(A.cols(), A.rows(), dY.cols(), A.data(), dY.data(), dB.data());
                    K().axpy(int(dB.size()), 1.0, dB.data(), ensure_grad(n.b).data());
                }
                break;
            }
            case Op::MatmulNT: {
                const Mat& A = value(n.a);
                const Mat& B = value(n.b);
                // C = A B^T: dA = dC * B ; dB = dC^T * A
                if (needs(n.a)) {
                    Mat dA(A.rows(), A.cols());
                    K().matmul_nn(dY.rows(), dY.cols(), B.cols(), dY.data(), B.data(), dA.data());
                    K().axpy(int(dA.size()), 1.0, dA.data(), ensure_grad(n.a).data());
                }
                if (needs(n.b)) {
                    Mat dB(B.rows(), B.cols());
                    K().matmul_tn(dY.cols(), dY.rows(), A.cols(), dY.data(), A.data(), dB.data());
                    K().axpy(int(dB.size()), 1.0, dB.data(), ensure_grad(n.b).data());
                }
                break;
            }
            case Op::Add:
                K().axpy(int(dY.size()), 1.0, dY.data(), ensure_grad(n.a).data());
                K().axpy(int(dY.size()), 1.0, dY.data(), ensure_grad(n.b).data());
                break;
            case Op::Sub:
                K().axpy(int(dY.size()), 1.0, dY.data(), ensure_grad(n.a).data());
                K().axpy(int(dY.size()), -1.0, dY.data(), ensure_grad(n.b).data());
                break;
            case Op::Mul: {
                const Mat& A = value(n.a);
                const Mat& B = value(n.b);
                Mat tmp(dY.rows(), dY.cols());
                K().vmul(int(dY.size()), dY.data(), B.data(), tmp.data());
                K().axpy(int(tmp.size()), 1.0, tmp.data(), ensure_grad(n.a).data());
                K().vmul(int(dY.size()), dY.data(), A.data(), tmp.data());
                K().axpy(int(tmp.size()), 1.0, tmp.data(), ensure_grad(n.b).data());
                break;
            }
            case Op::Scale:
                K().axpy(int(dY.size()), n.scalar, dY.data(), ensure_grad(n.a).data());
                break;
            case Op::AddRowVec: {
                K().axpy(int(dY.size()), 1.0, dY.data(), ensure_grad(n.a).data());
                Mat& dV = ensure_grad(n.b);
                for (int i = 0; i < dY.rows(); ++i) K().axpy(dY.cols(), 1.0, dY.row(i), dV.data());
                break;
            }
            case Op::AddColVec: {
                K().axpy(int(dY.size()), 1.0, dY.data(), ensure_grad(n.a).data());
                Mat& dU = ensure_grad(n.b);
                for (int i = 0; i < dY.rows(); ++i) dU(i, 0) += K().sum(dY.cols(), dY.row(i));
                break;
            }
            case Op::Relu: {
                const Mat& A = value(n.a);
                Mat& dA = ensure_grad(n.a);
                for (size_t i = 0; i < A.size(); ++i)
                    if (A.data()[i] > 0.0) dA.data()[i] += dY.data()[i];
                break;
            }
            case Op::RowSoftmax: {
                const Mat& Y = n.own_value;
                Mat& dA = ensure_grad(n.a);
                for (int i = 0; i < Y.rows(); ++i) {
                    const double* y = Y.row(i);
                    const double* dy = dY.row(i);
                    double dot = K().dot(Y.cols(), dy, y);
                    double* da = dA.row(i);
                    for (int j = 0; j < Y.cols(); ++j) da[j] += y[j] * (dy[j] - dot);
                }
                break;
            }
            case Op::LayerNorm: {
                const Mat& G = value(n.b);
                const Mat& xhat = n.aux1;
                Mat& dX = ensure_grad(n.a);
                Mat& dG = ensure_grad(n.b);
                Mat& dB = ensure_grad(n.c);
                const int m = dY.cols();
                for (int i = 0; i < dY.rows(); ++i) {
                    const double* dy = dY.row(i);
                    const double* xh = xhat.row(i);
                    double inv = n.aux2(i, 0);
                    double mean_dxh = 0.0, mean_dxh_xh = 0.0;
                    for (int j = 0; j < m; ++j) {
                        double dxh = dy[j] * G(0, j);
                        mean_dxh += dxh;
                        mean_dxh_xh += dxh * xh[j];
                        dG(0, j) += dy[j] * xh[j];
                        dB(0, j) += dy[j];
                    }
                    mean_dxh /= m;
                    mean_dxh_xh /= m;
                    double* dx = dX.row(i);
                    for (int j = 0; j < m; ++j) {
                        double dxh = dy[j] * G(0, j);
                        dx[j] += inv * (dxh - mean_dxh - xh[j] * mean_dxh_xh);
                    }
                }
                break;
            }
            case Op::ConcatCols: {
                int off = 0;
                for (int p : n.parents) {
                    const Mat& P = value(p);
                    Mat& dP = ensure_grad(p);
                    for (int i = 0; i < dY.rows(); ++i)
                        for (int j = 0; j < P.cols(); ++j) dP(i, j) += dY(i, off + j);
                    off += P.cols();
                }
                break;
            }
            case Op::LseRows: {
                const Mat& A = value(n.a);
                Mat& dA = ensure_grad(n.a);
                for (int i = 0; i < A.rows(); ++i) {
                    double L = n.own_value(i, 0);
                    double g = dY(i, 0);
                    if (g == 0.0) continue;
                    const double* x = A.row(i);
                    double* d = dA.row(i);
                    for (int j = 0; j < A.cols(); ++j) d[j] += g * std::exp(x[j] - L);
                }
                break;
            }
            case Op::LseCols: {
                const Mat& A = value(n.a);
                Mat& dA = ensure_grad(n.a);
                for (int j = 0; j < A.cols(); ++j) {
                    double L = n.own_value(0, j);
                    double g = dY(0, j);
                    if (g == 0.0) continue;
                    for (int i = 0; i < A.rows(); ++i) dA(i, j) += g * std::exp(A(i, j) - L);
                }
                break;
            }
            case Op::Augment: {
                const Mat& S = value(n.a);
                Mat& dS = ensure_grad(n.a);
                Mat& dAl = ensure_grad(n.b);
                for (int i = 0; i < S.rows(); ++i)
                    for (int j = 0; j < S.cols(); ++j) dS(i, j) += dY(i, j);
                double da = 0.0;
                for (int j = 0; j <= S.cols(); ++j) da += dY(S.rows(), j);
                for (int i = 0; i < S.rows(); ++i) da += dY(i, S.cols());
                dAl(0, 0) += da;
                break;
            }
            case Op::Exp: {
                Mat tmp(dY.rows(), dY.cols());
                K().vmul(int(dY.size()), dY.data(), n.own_value.data(), tmp.data());
                K().axpy(int(tmp.size()), 1.0, tmp.data(), ensure_grad(n.a).data());
                break;
            }
            case Op::SumAll: {
                Mat& dA = ensure_grad(n.a);
                double g = dY(0, 0);
                for (size_t i = 0; i < dA.size(); ++i) dA.data()[i] += g;
                break;
            }
            case Op::SumSq: {
                const Mat& A = value(n.a);
                K().axpy(int(A.size()), 2.0 * dY(0, 0), A.data(), ensure_grad(n.a).data());
                break;
            }
            case Op::WeightedNll: {
                const Mat& A = value(n.a);
                Mat& dA = ensure_grad(n.a);
                double g = dY(0, 0);
                for (size_t i = 0; i < A.size(); ++i) {
                    double gt = n.gt->data()[i];
                    if (gt == 0.0) continue;
                    double v = A.data()[i];
                    if (v <= n.scalar) continue;  // clamped region: zero gradient
                    dA.data()[i] += g * (-n.weights->data()[i] * gt / v) / n.total_gt;
                }
                break;
            }
        }
    }
}

}  // namespace soma
