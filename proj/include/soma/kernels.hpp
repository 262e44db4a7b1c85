#pragma once

#include <cstddef>

// Data-parallel arithmetic kernels used by the network, the transport layer
// and the loss. A scalar reference implementation always exists; an AVX2
// variant is selected at runtime on capable x86-64 hosts. Both variants are
// equivalence-tested against each other (tests/test_kernels.cpp).
//
// Override selection with SOMA_KERNEL=scalar|avx2 (default: auto).

namespace soma::kern {

struct Kernels {
    // y[i] += a * x[i]
    void (*axpy)(int n, double a, const double* x, double* y);
    // x[i] *= a
    void (*scale)(int n, double a, double* x);
    void (*vadd)(int n, const double* x, const double* y, double* out);
    void (*vsub)(int n, const double* x, const double* y, double* out);
    void (*vmul)(int n, const double* x, const double* y, double* out);
    // out[i] = exp(x[i])
    void (*vexp)(int n, const double* x, double* out);
    double (*dot)(int n, const double* x, const double* y);
    double (*sum)(int n, const double* x);
    double (*vmax)(int n, const double* x);

    // Row-major matrix products. C is overwritten.
    // C(m x n) = A(m x k) * B(k x n)
    void (*matmul_nn)(int m, int k, int n, const double* A, const double* B, double* C);
    // C(m x n) = A(m x k) * B(n x k)^T
    void (*matmul_nt)(int m, int k, int n, const double* A, const double* B, double* C);
    // C(m x n) = A(k x m)^T * B(k x n)
    void (*matmul_tn)(int m, int k, int n, const double* A, const double* B, double* C);
};

enum class Backend { scalar, avx2 };

// Active kernel table (dispatched once at startup).
const Kernels& k();

// Scalar reference table, always available (the oracle for equivalence tests).
const Kernels& reference();

Backend active_backend();
const char* backend_name();
bool avx2_supported();

// Force a backend; throws std::runtime_error if unsupported on this host.
void force_backend(Backend b);

}  // namespace soma::kern
