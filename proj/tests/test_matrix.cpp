#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "cora/matrix.hpp"
#include "cora/rng.hpp"
#include "support/oracles.hpp"

using namespace cora;

TEST_CASE("construction zero-fills and validates data") {
    Matrix z(2, 3);
    CHECK(z.rows() == 2);
    CHECK(z.cols() == 3);
    for (double v : z.data()) CHECK(v == 0.0);

    CHECK_THROWS_AS(Matrix(2, 2, {1.0, 2.0, 3.0}), std::invalid_argument);
    CHECK_THROWS_AS(Matrix(1, 2, {1.0, std::nan("")}), std::invalid_argument);
    CHECK_THROWS_AS(Matrix(1, 1, {INFINITY}), std::invalid_argument);
}

TEST_CASE("identity times anything is that thing") {
    Rng rng(42);
    const Matrix m = random_normal(3, 5, rng, 1.0);
    const Matrix p = matmul(Matrix::identity(3), m);
    CHECK(bit_equal(p, m));
}

TEST_CASE("hand-checked 2x2 times 2x1") {
    const Matrix a(2, 2, {1, 2, 3, 4});
    const Matrix b(2, 1, {0, 1});
    const Matrix p = matmul(a, b);
    CHECK(p(0, 0) == 2.0);
    CHECK(p(1, 0) == 4.0);
}

TEST_CASE("random product matches triple-loop oracle") {
    Rng rng(7);
    const Matrix a = random_normal(5, 7, rng, 1.0);
    const Matrix b = random_normal(7, 3, rng, 1.0);
    CHECK(max_abs_diff(matmul(a, b), oracle::naive_matmul(a, b)) <= 1e-12);
}

TEST_CASE("matmul shape mismatch reports both shapes") {
    const Matrix a(2, 3);
    const Matrix b(4, 2);
    try {
        matmul(a, b);
        FAIL("expected a shape error");
    } catch (const std::invalid_argument& e) {
        const std::string what = e.what();
        CHECK(what.find("2x3") != std::string::npos);
        CHECK(what.find("4x2") != std::string::npos);
    }
}

TEST_CASE("transpose is an involution") {
    Rng rng(3);
    const Matrix m = random_normal(4, 6, rng, 2.0);
    CHECK(bit_equal(transpose(transpose(m)), m));
    CHECK(transpose(m).rows() == 6);
    CHECK(transpose(m)(2, 3) == m(3, 2));
}

TEST_CASE("frobenius norm of identity is sqrt(n)") {
    CHECK(frobenius_norm(Matrix::identity(3)) == doctest::Approx(std::sqrt(3.0)).epsilon(1e-15));
}

TEST_CASE("triangle inequality on random pairs") {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix a = random_normal(6, 4, rng, 1.5);
        const Matrix b = random_normal(6, 4, rng, 0.5);
        CHECK(frobenius_norm(add(a, b)) <= frobenius_norm(a) + frobenius_norm(b) + 1e-12);
        CHECK(max_abs_diff(sub(add(a, b), b), a) <= 1e-12);
    }
}

TEST_CASE("scale and in-place helpers agree") {
    Rng rng(5);
    const Matrix a = random_normal(3, 3, rng, 1.0);
    const Matrix b = random_normal(3, 3, rng, 1.0);

    Matrix c = a;
    add_in_place(c, b);
    CHECK(bit_equal(c, add(a, b)));

    Matrix d = a;
    axpy_in_place(d, -2.5, b);
    CHECK(max_abs_diff(d, add(a, scale(b, -2.5))) <= 1e-15);

    Matrix e = a;
    scale_in_place(e, 0.25);
    CHECK(bit_equal(e, scale(a, 0.25)));

    CHECK(max_abs(scale(a, 0.0)) == 0.0);
}

TEST_CASE("vstack then row_slice round-trips") {
    Rng rng(9);
    const Matrix top = random_normal(2, 4, rng, 1.0);
    const Matrix mid = random_normal(3, 4, rng, 1.0);
    const Matrix bot = random_normal(1, 4, rng, 1.0);
    const Matrix all = vstack({&top, &mid, &bot});
    CHECK(all.rows() == 6);
    CHECK(bit_equal(row_slice(all, 0, 2), top));
    CHECK(bit_equal(row_slice(all, 2, 5), mid));
    CHECK(bit_equal(row_slice(all, 5, 6), bot));
    const Matrix narrow = Matrix::identity(3);
    CHECK_THROWS_AS(vstack({&top, &narrow}), std::invalid_argument);
    CHECK_THROWS_AS(row_slice(all, 4, 2), std::invalid_argument);
}

TEST_CASE("bit_equal distinguishes signed zeros, max_abs_diff does not") {
    const Matrix pos(1, 1, {0.0});
    const Matrix neg(1, 1, {-0.0});
    CHECK(!bit_equal(pos, neg));
    CHECK(max_abs_diff(pos, neg) == 0.0);
}
