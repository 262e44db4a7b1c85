#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "soma/kernels.hpp"

using namespace soma;

namespace {

std::vector<double> random_vec(std::mt19937_64& rng, int n, double lo = -3.0, double hi = 3.0) {
    std::uniform_real_distribution<double> d(lo, hi);
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

double rel_err(double a, double b) {
    double denom = std::max({std::abs(a), std::abs(b), 1e-300});
    return std::abs(a - b) / denom;
}

// relative where values are large, absolute near zero
double mixed_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1.0});
}

}  // namespace

TEST_CASE("scalar kernels: basic identities") {
    const auto& ops = kern::reference();
    std::vector<double> x{1, 2, 3, 4, 5};
    std::vector<double> y{0.5, -1, 2, 0, 3};
    CHECK(ops.dot(5, x.data(), y.data()) == doctest::Approx(1 * 0.5 - 2 + 6 + 0 + 15));
    CHECK(ops.sum(5, x.data()) == 15.0);
    CHECK(ops.vmax(5, y.data()) == 3.0);
    std::vector<double> z(5);
    ops.vadd(5, x.data(), y.data(), z.data());
    CHECK(z[0] == 1.5);
    ops.axpy(5, 2.0, x.data(), z.data());
    CHECK(z[0] == 3.5);
}

TEST_CASE("scalar matmul against hand example") {
    const auto& ops = kern::reference();
    // A = [[1,2],[3,4]], B = [[5,6],[7,8]]
    std::vector<double> A{1, 2, 3, 4}, B{5, 6, 7, 8}, C(4);
    ops.matmul_nn(2, 2, 2, A.data(), B.data(), C.data());
    CHECK(C == std::vector<double>{19, 22, 43, 50});
    // A * B^T with B stored (2x2): rows of B are [5,6],[7,8]
    ops.matmul_nt(2, 2, 2, A.data(), B.data(), C.data());
    CHECK(C == std::vector<double>{17, 23, 39, 53});
    // A^T * B with A stored (2x2)
    ops.matmul_tn(2, 2, 2, A.data(), B.data(), C.data());
    CHECK(C == std::vector<double>{26, 30, 38, 44});
}

TEST_CASE("avx2 kernels match scalar reference") {
    if (!kern::avx2_supported()) {
        MESSAGE("AVX2 not supported on this host; skipping equivalence tests");
        return;
    }
    const auto& ref = kern::reference();
    kern::force_backend(kern::Backend::avx2);
    const auto& vec = kern::k();
    std::mt19937_64 rng(42);

    // Odd sizes exercise remainder lanes.
    for (int n : {1, 2, 3, 4, 5, 7, 8, 15, 16, 31, 64, 127, 1000}) {
        auto x = random_vec(rng, n);
        auto y = random_vec(rng, n);

        CHECK(rel_err(ref.dot(n, x.data(), y.data()), vec.dot(n, x.data(), y.data())) < 1e-12);
        CHECK(rel_err(ref.sum(n, x.data()), vec.sum(n, x.data())) < 1e-12);
        CHECK(ref.vmax(n, x.data()) == vec.vmax(n, x.data()));

        std::vector<double> a(n), b(n);
        ref.vadd(n, x.data(), y.data(), a.data());
        vec.vadd(n, x.data(), y.data(), b.data());
        CHECK(a == b);
        ref.vmul(n, x.data(), y.data(), a.data());
        vec.vmul(n, x.data(), y.data(), b.data());
        CHECK(a == b);
        ref.vsub(n, x.data(), y.data(), a.data());
        vec.vsub(n, x.data(), y.data(), b.data());
        CHECK(a == b);

        a = y;
        b = y;
        ref.axpy(n, 1.7, x.data(), a.data());
        vec.axpy(n, 1.7, x.data(), b.data());
        for (int i = 0; i < n; ++i) CHECK(rel_err(a[i], b[i]) < 1e-13);
    }
    kern::force_backend(kern::Backend::avx2);
}

TEST_CASE("avx2 exp matches std::exp") {
    if (!kern::avx2_supported()) return;
    kern::force_backend(kern::Backend::avx2);
    const auto& vec = kern::k();
    std::mt19937_64 rng(7);

    std::vector<double> xs;
    // dense random coverage of the ranges softmax/sinkhorn hit
    auto r1 = random_vec(rng, 4096, -40.0, 5.0);
    xs.insert(xs.end(), r1.begin(), r1.end());
    auto r2 = random_vec(rng, 512, -700.0, 700.0);
    xs.insert(xs.end(), r2.begin(), r2.end());
    for (double v : {0.0, 1.0, -1.0, 709.0, 710.0, -745.0, -746.0, -0.5, 0.5})
        xs.push_back(v);

    std::vector<double> out(xs.size());
    vec.vexp(int(xs.size()), xs.data(), out.data());
    for (size_t i = 0; i < xs.size(); ++i) {
        double expect = std::exp(xs[i]);
        if (expect < 1e-300) {
            // subnormal/underflow region; only absolute agreement is meaningful
            CHECK(std::abs(out[i]) < 1e-300);
        } else if (std::isinf(expect)) {
            CHECK(std::isinf(out[i]));
        } else {
            CHECK(rel_err(expect, out[i]) < 5e-15);
        }
    }
}

TEST_CASE("avx2 matmul variants match scalar") {
    if (!kern::avx2_supported()) return;
    const auto& ref = kern::reference();
    kern::force_backend(kern::Backend::avx2);
    const auto& vec = kern::k();
    std::mt19937_64 rng(99);

    for (auto [m, kk, n] : {std::tuple{1, 1, 1}, {3, 5, 7}, {8, 8, 8}, {13, 21, 5}, {50, 41, 33}}) {
        auto A = random_vec(rng, m * kk);
        auto Bn = random_vec(rng, kk * n);
        auto Bt = random_vec(rng, n * kk);
        auto At = random_vec(rng, kk * m);
        std::vector<double> C1(m * n), C2(m * n);

        ref.matmul_nn(m, kk, n, A.data(), Bn.data(), C1.data());
        vec.matmul_nn(m, kk, n, A.data(), Bn.data(), C2.data());
        for (int i = 0; i < m * n; ++i) CHECK(mixed_err(C1[i], C2[i]) < 1e-12);

        ref.matmul_nt(m, kk, n, A.data(), Bt.data(), C1.data());
        vec.matmul_nt(m, kk, n, A.data(), Bt.data(), C2.data());
        for (int i = 0; i < m * n; ++i) CHECK(mixed_err(C1[i], C2[i]) < 1e-12);

        ref.matmul_tn(m, kk, n, At.data(), Bn.data(), C1.data());
        vec.matmul_tn(m, kk, n, At.data(), Bn.data(), C2.data());
        for (int i = 0; i < m * n; ++i) CHECK(mixed_err(C1[i], C2[i]) < 1e-12);
    }
}

TEST_CASE("backend dispatch reports a valid backend") {
    CHECK((std::string(kern::backend_name()) == "scalar" || std::string(kern::backend_name()) == "avx2"));
}
