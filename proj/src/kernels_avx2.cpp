// AVX2+FMA variants of the arithmetic kernels. This translation unit is only
// compiled on x86-64 (see src/CMakeLists.txt) and only entered at runtime
// after a cpuid check in kernels_dispatch.cpp.

#include "soma/kernels.hpp"

#include <cmath>
#include <cstring>
#include <immintrin.h>

namespace soma::kern::detail {
namespace {

inline double hsum4(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d sh = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

void axpy_v(int n, double a, const double* x, double* y) {
    __m256d va = _mm256_set1_pd(a);
    int i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vy = _mm256_loadu_pd(y + i);
        vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
        _mm256_storeu_pd(y + i, vy);
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

void scale_v(int n, double a, double* x) {
    __m256d va = _mm256_set1_pd(a);
    int i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(x + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) x[i] *= a;
}

void vadd_v(int n, const double* x, const double* y, double* out) {
    int i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) out[i] = x[i] + y[i];
}

void vsub_v(int n, const double* x, const double* y, double* out) {
    int i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) out[i] = x[i] - y[i];
}

void vmul_v(int n, const double* x, const double* y, double* out) {
    int i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) out[i] = x[i] * y[i];
}

// exp on 4 lanes: Cody-Waite range reduction x = k*ln2 + r, degree-13
// Taylor polynomial on |r| <= ln2/2, 2^k folded in via the exponent field.
// Max observed error vs std::exp is a few ULP; saturation bounds match the
// double overflow/underflow thresholds.
inline __m256d exp4(__m256d x) {
    const __m256d clamp_hi = _mm256_set1_pd(709.0);
    const __m256d clamp_lo = _mm256_set1_pd(-708.0);
    const __m256d inv_ln2 = _mm256_set1_pd(1.4426950408889634074);
    const __m256d ln2_hi = _mm256_set1_pd(6.93147180369123816490e-01);
    const __m256d ln2_lo = _mm256_set1_pd(1.90821492927058770002e-10);

    __m256d xc = _mm256_min_pd(_mm256_max_pd(x, clamp_lo), clamp_hi);
    __m256d kf = _mm256_round_pd(_mm256_mul_pd(xc, inv_ln2),
                                 _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
    __m256d r = _mm256_fnmadd_pd(kf, ln2_hi, xc);
    r = _mm256_fnmadd_pd(kf, ln2_lo, r);

    // Horner over 1/n! coefficients.
    __m256d p = _mm256_set1_pd(1.6059043836821614599e-10);  // 1/13!
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(2.0876756987868098979e-09));   // 1/12!
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(2.5052108385441718775e-08));   // 1/11!
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(2.7557319223985890653e-07));   // 1/10!
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(2.7557319223985892511e-06));   // 1/9!
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(2.4801587301587301566e-05));   // 1/8!
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.9841269841269841253e-04));   // 1/7!
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.3888888888888889419e-03));   // 1/6!
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(8.3333333333333332177e-03));   // 1/5!
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(4.1666666666666664354e-02));   // 1/4!
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.6666666666666665741e-01));   // 1/3!
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(5.0000000000000000000e-01));   // 1/2!
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0));
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0));

    // 2^k through the exponent bits; k is in [-1022, 1023] after clamping.
    __m128i k32 = _mm256_cvtpd_epi32(kf);
    __m256i k64 = _mm256_cvtepi32_epi64(k32);
    __m256i expo = _mm256_slli_epi64(_mm256_add_epi64(k64, _mm256_set1_epi64x(1023)), 52);
    p = _mm256_mul_pd(p, _mm256_castsi256_pd(expo));

    // Saturate true overflow/underflow and propagate NaN.
    __m256d inf = _mm256_set1_pd(HUGE_VAL);
    p = _mm256_blendv_pd(p, inf, _mm256_cmp_pd(x, _mm256_set1_pd(709.782712893384), _CMP_GT_OQ));
    p = _mm256_blendv_pd(p, _mm256_setzero_pd(),
                         _mm256_cmp_pd(x, _mm256_set1_pd(-745.133219101941), _CMP_LT_OQ));
    p = _mm256_blendv_pd(p, x, _mm256_cmp_pd(x, x, _CMP_UNORD_Q));
    return p;
}

void vexp_v(int n, const double* x, double* out) {
    int i = 0;
    for (; i + 4 <= n; i += 4) _mm256_storeu_pd(out + i, exp4(_mm256_loadu_pd(x + i)));
    for (; i < n; ++i) out[i] = std::exp(x[i]);
}

double dot_v(int n, const double* x, const double* y) {
    __m256d acc = _mm256_setzero_pd();
    int i = 0;
    for (; i + 4 <= n; i += 4)
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc);
    double s = hsum4(acc);
    for (; i < n; ++i) s += x[i] * y[i];
    return s;
}

double sum_v(int n, const double* x) {
    __m256d acc = _mm256_setzero_pd();
    int i = 0;
    for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
    double s = hsum4(acc);
    for (; i < n; ++i) s += x[i];
    return s;
}

double vmax_v(int n, const double* x) {
    if (n < 8) {
        double m = x[0];
        for (int i = 1; i < n; ++i)
            if (x[i] > m) m = x[i];
        return m;
    }
    __m256d acc = _mm256_loadu_pd(x);
    int i = 4;
    for (; i + 4 <= n; i += 4) acc = _mm256_max_pd(acc, _mm256_loadu_pd(x + i));
    __m128d lo = _mm_max_pd(_mm256_castpd256_pd128(acc), _mm256_extractf128_pd(acc, 1));
    lo = _mm_max_sd(lo, _mm_unpackhi_pd(lo, lo));
    double m = _mm_cvtsd_f64(lo);
    for (; i < n; ++i)
        if (x[i] > m) m = x[i];
    return m;
}

void matmul_nn_v(int m, int k, int n, const double* A, const double* B, double* C) {
    std::memset(C, 0, size_t(m) * n * sizeof(double));
    for (int i = 0; i < m; ++i) {
        const double* a = A + size_t(i) * k;
        double* c = C + size_t(i) * n;
        for (int p = 0; p < k; ++p) axpy_v(n, a[p], B + size_t(p) * n, c);
    }
}

void matmul_nt_v(int m, int k, int n, const double* A, const double* B, double* C) {
    for (int i = 0; i < m; ++i) {
        const double* a = A + size_t(i) * k;
        double* c = C + size_t(i) * n;
        for (int j = 0; j < n; ++j) c[j] = dot_v(k, a, B + size_t(j) * k);
    }
}

void matmul_tn_v(int m, int k, int n, const double* A, const double* B, double* C) {
    std::memset(C, 0, size_t(m) * n * sizeof(double));
    for (int p = 0; p < k; ++p) {
        const double* a = A + size_t(p) * m;
        const double* b = B + size_t(p) * n;
        for (int i = 0; i < m; ++i) axpy_v(n, a[i], b, C + size_t(i) * n);
    }
}

}  // namespace

const Kernels& avx2_table() {
    static const Kernels table{axpy_v, scale_v, vadd_v, vsub_v, vmul_v, vexp_v,
                               dot_v,  sum_v,   vmax_v, matmul_nn_v, matmul_nt_v, matmul_tn_v};
    return table;
}

}  // namespace soma::kern::detail
