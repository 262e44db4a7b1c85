#include "soma/kernels.hpp"

#include <cmath>
#include <cstring>

// Reference kernels. Plain loops, no tricks: these define the semantics the
// SIMD variants are tested against.

namespace soma::kern {
namespace {

void axpy_s(int n, double a, const double* x, double* y) {
    for (int i = 0; i < n; ++i) y[i] += a * x[i];
}

void scale_s(int n, double a, double* x) {
    for (int i = 0; i < n; ++i) x[i] *= a;
}

void vadd_s(int n, const double* x, const double* y, double* out) {
    for (int i = 0; i < n; ++i) out[i] = x[i] + y[i];
}

void vsub_s(int n, const double* x, const double* y, double* out) {
    for (int i = 0; i < n; ++i) out[i] = x[i] - y[i];
}

void vmul_s(int n, const double* x, const double* y, double* out) {
    for (int i = 0; i < n; ++i) out[i] = x[i] * y[i];
}

void vexp_s(int n, const double* x, double* out) {
    for (int i = 0; i < n; ++i) out[i] = std::exp(x[i]);
}

double dot_s(int n, const double* x, const double* y) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += x[i] * y[i];
    return s;
}

double sum_s(int n, const double* x) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += x[i];
    return s;
}

double vmax_s(int n, const double* x) {
    double m = x[0];
    for (int i = 1; i < n; ++i)
        if (x[i] > m) m = x[i];
    return m;
}

void matmul_nn_s(int m, int k, int n, const double* A, const double* B, double* C) {
    std::memset(C, 0, size_t(m) * n * sizeof(double));
    for (int i = 0; i < m; ++i) {
        const double* a = A + size_t(i) * k;
        double* c = C + size_t(i) * n;
        for (int p = 0; p < k; ++p) {
            double av = a[p];
            const double* b = B + size_t(p) * n;
            for (int j = 0; j < n; ++j) c[j] += av * b[j];
        }
    }
}

void matmul_nt_s(int m, int k, int n, const double* A, const double* B, double* C) {
    for (int i = 0; i < m; ++i) {
        const double* a = A + size_t(i) * k;
        double* c = C + size_t(i) * n;
        for (int j = 0; j < n; ++j) {
            const double* b = B + size_t(j) * k;
            double s = 0.0;
            for (int p = 0; p < k; ++p) s += a[p] * b[p];
            c[j] = s;
        }
    }
}

void matmul_tn_s(int m, int k, int n, const double* A, const double* B, double* C) {
    std::memset(C, 0, size_t(m) * n * sizeof(double));
    for (int p = 0; p < k; ++p) {
        const double* a = A + size_t(p) * m;
        const double* b = B + size_t(p) * n;
        for (int i = 0; i < m; ++i) {
            double av = a[i];
            double* c = C + size_t(i) * n;
            for (int j = 0; j < n; ++j) c[j] += av * b[j];
        }
    }
}

}  // namespace

const Kernels& reference() {
    static const Kernels table{axpy_s, scale_s, vadd_s, vsub_s, vmul_s, vexp_s,
                               dot_s,  sum_s,   vmax_s, matmul_nn_s, matmul_nt_s, matmul_tn_s};
    return table;
}

}  // namespace soma::kern
