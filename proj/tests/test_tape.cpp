#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <functional>
#include <random>

#include "soma/tape.hpp"

using namespace soma;

namespace {

Mat random_mat(std::mt19937_64& rng, int r, int c, double scale = 1.0) {
    std::uniform_real_distribution<double> d(-scale, scale);
    Mat m(r, c);
    for (size_t i = 0; i < m.size(); ++i) m.data()[i] = d(rng);
    return m;
}

// Central finite differences against the tape gradient of a scalar-valued
// graph. `build` receives leaf ids in the same order as `inputs`.
void check_gradients(std::vector<Mat> inputs,
                     const std::function<int(Tape&, const std::vector<int>&)>& build,
                     double tol = 1e-6, double eps = 1e-6) {
    auto eval = [&](const std::vector<Mat>& vals) {
        Tape t;
        std::vector<int> ids;
        for (const Mat& m : vals) ids.push_back(t.leaf(&m));
        return t.val(build(t, ids))(0, 0);
    };

    Tape t;
    std::vector<int> ids;
    for (Mat& m : inputs) ids.push_back(t.leaf(&m));
    int loss = build(t, ids);
    REQUIRE(t.val(loss).rows() == 1);
    REQUIRE(t.val(loss).cols() == 1);
    t.backward(loss);

    for (size_t k = 0; k < inputs.size(); ++k) {
        const Mat& g = t.grad_of(ids[k]);
        for (size_t i = 0; i < inputs[k].size(); ++i) {
            std::vector<Mat> plus = inputs, minus = inputs;
            plus[k].data()[i] += eps;
            minus[k].data()[i] -= eps;
            double numeric = (eval(plus) - eval(minus)) / (2.0 * eps);
            double analytic = g.empty() ? 0.0 : g.data()[i];
            double err = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1.0});
            CHECK(err < tol);
        }
    }
}

}  // namespace

TEST_CASE("tape values: basic ops") {
    Mat a(2, 2);
    a(0, 0) = 1; a(0, 1) = 2; a(1, 0) = 3; a(1, 1) = 4;
    Mat b(2, 2);
    b(0, 0) = 5; b(0, 1) = 6; b(1, 0) = 7; b(1, 1) = 8;
    Tape t;
    int ia = t.leaf(&a), ib = t.leaf(&b);
    CHECK(t.val(t.matmul(ia, ib))(0, 0) == 19);
    CHECK(t.val(t.matmul_nt(ia, ib))(0, 0) == 17);
    CHECK(t.val(t.add(ia, ib))(1, 1) == 12);
    CHECK(t.val(t.mul(ia, ib))(1, 0) == 21);
    CHECK(t.val(t.scale(ia, -2.0))(0, 1) == -4);
    CHECK(t.val(t.sum_all(ia))(0, 0) == 10);
    CHECK(t.val(t.sum_sq(ia))(0, 0) == 30);
}

TEST_CASE("tape: row softmax rows sum to 1 and are stable for large inputs") {
    std::mt19937_64 rng(2);
    Mat a = random_mat(rng, 7, 9, 1000.0);
    Tape t;
    int y = t.row_softmax(t.leaf(&a));
    const Mat& Y = t.val(y);
    for (int i = 0; i < Y.rows(); ++i) {
        double s = 0.0;
        for (int j = 0; j < Y.cols(); ++j) {
            CHECK(std::isfinite(Y(i, j)));
            s += Y(i, j);
        }
        CHECK(std::abs(s - 1.0) < 1e-9);
    }
}

TEST_CASE("tape: backward contract") {
    Tape empty;
    CHECK_THROWS_AS(empty.backward(0), std::logic_error);

    Mat a(1, 1, 2.0);
    Tape t;
    int ia = t.leaf(&a);
    int loss = t.sum_sq(ia);
    t.backward(loss);
    CHECK(t.grad_of(ia)(0, 0) == doctest::Approx(4.0));
    CHECK_THROWS_AS(t.backward(loss), std::logic_error);

    // constant loss: nothing flows into the leaf
    Tape t2;
    int ia2 = t2.leaf(&a);
    (void)ia2;
    int c = t2.constant(Mat(1, 1, 3.0));
    t2.backward(c);
    CHECK(t2.grad_of(ia2).empty());
}

TEST_CASE("gradients: matmul chain") {
    std::mt19937_64 rng(3);
    check_gradients({random_mat(rng, 3, 4), random_mat(rng, 4, 2)},
                    [](Tape& t, const std::vector<int>& ids) {
                        return t.sum_sq(t.matmul(ids[0], ids[1]));
                    });
}

TEST_CASE("gradients: matmul_nt, add, sub, mul, scale") {
    std::mt19937_64 rng(4);
    check_gradients({random_mat(rng, 3, 5), random_mat(rng, 4, 5)},
                    [](Tape& t, const std::vector<int>& ids) {
                        return t.sum_sq(t.matmul_nt(ids[0], ids[1]));
                    });
    check_gradients({random_mat(rng, 3, 3), random_mat(rng, 3, 3)},
                    [](Tape& t, const std::vector<int>& ids) {
                        return t.sum_sq(t.sub(t.mul(ids[0], ids[1]), t.scale(ids[0], 0.3)));
                    });
}

TEST_CASE("gradients: broadcast adds") {
    std::mt19937_64 rng(5);
    check_gradients({random_mat(rng, 4, 3), random_mat(rng, 1, 3), random_mat(rng, 4, 1)},
                    [](Tape& t, const std::vector<int>& ids) {
                        return t.sum_sq(t.add_colvec(t.add_rowvec(ids[0], ids[1]), ids[2]));
                    });
}

TEST_CASE("gradients: relu and softmax") {
    std::mt19937_64 rng(6);
    check_gradients({random_mat(rng, 4, 4)}, [](Tape& t, const std::vector<int>& ids) {
        return t.sum_sq(t.relu(ids[0]));
    });
    check_gradients({random_mat(rng, 5, 6)}, [&rng](Tape& t, const std::vector<int>& ids) {
        return t.sum_sq(t.row_softmax(ids[0]));
    });
}

TEST_CASE("gradients: layernorm") {
    std::mt19937_64 rng(7);
    Mat g = random_mat(rng, 1, 6);
    for (size_t i = 0; i < g.size(); ++i) g.data()[i] += 1.5;  // keep gains away from 0
    check_gradients({random_mat(rng, 4, 6), g, random_mat(rng, 1, 6)},
                    [](Tape& t, const std::vector<int>& ids) {
                        return t.sum_sq(t.layernorm_rows(ids[0], ids[1], ids[2]));
                    },
                    2e-5);
}

TEST_CASE("gradients: concat, lse, exp, augment") {
    std::mt19937_64 rng(8);
    check_gradients({random_mat(rng, 3, 2), random_mat(rng, 3, 4)},
                    [](Tape& t, const std::vector<int>& ids) {
                        return t.sum_sq(t.concat_cols({ids[0], ids[1]}));
                    });
    check_gradients({random_mat(rng, 4, 5)}, [](Tape& t, const std::vector<int>& ids) {
        return t.sum_sq(t.lse_rows(ids[0]));
    });
    check_gradients({random_mat(rng, 4, 5)}, [](Tape& t, const std::vector<int>& ids) {
        return t.sum_sq(t.lse_cols(ids[0]));
    });
    check_gradients({random_mat(rng, 3, 3)}, [](Tape& t, const std::vector<int>& ids) {
        return t.sum_sq(t.exp(ids[0]));
    });
    check_gradients({random_mat(rng, 3, 4), random_mat(rng, 1, 1)},
                    [](Tape& t, const std::vector<int>& ids) {
                        return t.sum_sq(t.augment(ids[0], ids[1]));
                    });
}

TEST_CASE("gradients: weighted nll") {
    std::mt19937_64 rng(9);
    // assignment-like positive matrix
    Mat a(3, 4);
    std::uniform_real_distribution<double> d(0.05, 0.95);
    for (size_t i = 0; i < a.size(); ++i) a.data()[i] = d(rng);
    Mat gt(3, 4);
    gt(0, 1) = 1;
    gt(1, 3) = 1;
    gt(2, 0) = 1;
    Mat w(3, 4, 1.0);
    w(1, 3) = 4.0;
    check_gradients({a}, [&](Tape& t, const std::vector<int>& ids) {
        return t.weighted_nll(ids[0], &gt, &w);
    });
}

TEST_CASE("weighted nll: exact values") {
    // uniform 2x2 assignment, single GT at (0,0), W = 1 -> -log 0.5
    Mat a(2, 2, 0.5);
    Mat gt(2, 2);
    gt(0, 0) = 1;
    Mat w(2, 2, 1.0);
    Tape t;
    int ia = t.leaf(&a);
    CHECK(t.val(t.weighted_nll(ia, &gt, &w))(0, 0) == doctest::Approx(0.6931471805599453));

    // exact binary match -> 0
    Mat b(2, 2);
    b(0, 0) = 1;
    b(1, 1) = 1;
    Mat gtb(2, 2);
    gtb(0, 0) = 1;
    gtb(1, 1) = 1;
    Tape t2;
    CHECK(t2.val(t2.weighted_nll(t2.leaf(&b), &gtb, &w))(0, 0) == doctest::Approx(0.0));

    // doubling W doubles the loss
    Mat w2(2, 2, 2.0);
    Tape t3, t4;
    double l1 = t3.val(t3.weighted_nll(t3.leaf(&a), &gt, &w))(0, 0);
    double l2 = t4.val(t4.weighted_nll(t4.leaf(&a), &gt, &w2))(0, 0);
    CHECK(l2 == doctest::Approx(2.0 * l1));
}
