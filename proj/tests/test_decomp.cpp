#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "cora/decomp.hpp"
#include "cora/matrix.hpp"
#include "cora/rng.hpp"
#include "support/oracles.hpp"

using namespace cora;

namespace {

Matrix reconstruct(const SvdFactors& f) {
    Matrix us = f.u;
    for (std::size_t i = 0; i < us.rows(); ++i)
        for (std::size_t j = 0; j < us.cols(); ++j) us(i, j) *= f.singular_values[j];
    return matmul(us, f.vt);
}

void check_svd_contract(const Matrix& m) {
    const SvdFactors f = svd(m);
    const std::size_t k = std::min(m.rows(), m.cols());
    REQUIRE(f.u.rows() == m.rows());
    REQUIRE(f.u.cols() == k);
    REQUIRE(f.vt.rows() == k);
    REQUIRE(f.vt.cols() == m.cols());
    REQUIRE(f.singular_values.size() == k);

    const double denom = std::max(frobenius_norm(m), 1e-300);
    CHECK(frobenius_norm(sub(reconstruct(f), m)) / denom <= 1e-6);
    CHECK(oracle::column_orthonormality_defect(f.u) <= 1e-8);
    CHECK(oracle::row_orthonormality_defect(f.vt) <= 1e-8);
    for (std::size_t i = 0; i + 1 < k; ++i)
        CHECK(f.singular_values[i] >= f.singular_values[i + 1]);
    CHECK(f.singular_values.back() >= 0.0);
    for (std::size_t i = 0; i < f.vt.rows(); ++i) {
        double lead = 0.0;
        for (std::size_t j = 0; j < f.vt.cols(); ++j)
            if (f.vt(i, j) != 0.0) {
                lead = f.vt(i, j);
                break;
            }
        CHECK(lead >= 0.0);
    }
}

}  // namespace

TEST_CASE("identity has unit singular values") {
    const SvdFactors f = svd(Matrix::identity(4));
    for (double s : f.singular_values) CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("rank-1 outer product with norms 2 and 3 has top value 6") {
    std::vector<double> u{1.2, -0.8, 1.0, 0.6};
    std::vector<double> v{0.5, -1.5, 2.0, 0.2, -1.0, 0.8};
    double nu = 0.0, nv = 0.0;
    for (double x : u) nu += x * x;
    for (double x : v) nv += x * x;
    nu = std::sqrt(nu);
    nv = std::sqrt(nv);
    Matrix m(4, 6);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 6; ++j) m(i, j) = (2.0 * u[i] / nu) * (3.0 * v[j] / nv);

    const SvdFactors f = svd(m);
    CHECK(f.singular_values[0] == doctest::Approx(6.0).epsilon(1e-10));
    for (std::size_t i = 1; i < f.singular_values.size(); ++i)
        CHECK(f.singular_values[i] <= 1e-10);
}

TEST_CASE("singular values match the eigen-of-Gram oracle") {
    Rng rng(101);
    const Matrix m = random_normal(12, 8, rng, 1.0);
    const SvdFactors f = svd(m);
    const std::vector<double> expected = oracle::gram_singular_values(m);
    REQUIRE(expected.size() == f.singular_values.size());
    const double top = std::max(expected[0], 1.0);
    for (std::size_t i = 0; i < expected.size(); ++i)
        CHECK(std::abs(f.singular_values[i] - expected[i]) <= 1e-8 * top);
}

TEST_CASE("svd contract holds across random shapes") {
    Rng rng(2024);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t rows = 1 + rng.uniform_int(40);
        const std::size_t cols = 1 + rng.uniform_int(40);
        check_svd_contract(random_normal(rows, cols, rng, 1.0));
    }
}

TEST_CASE("svd handles wide, tall, degenerate, and tiny shapes") {
    Rng rng(55);
    check_svd_contract(random_normal(5, 9, rng, 1.0));   // transpose path
    check_svd_contract(random_normal(9, 5, rng, 1.0));
    check_svd_contract(random_normal(1, 7, rng, 1.0));
    check_svd_contract(random_normal(7, 1, rng, 1.0));
    check_svd_contract(Matrix(1, 1, {-3.0}));
    check_svd_contract(Matrix(4, 4));  // all zeros: completion fills u

    // Rank-deficient: two identical columns.
    Matrix dup = random_normal(6, 3, rng, 1.0);
    for (std::size_t i = 0; i < 6; ++i) dup(i, 2) = dup(i, 1);
    check_svd_contract(dup);
}

TEST_CASE("svd is bit-deterministic") {
    Rng rng(77);
    const Matrix m = random_normal(10, 6, rng, 1.0);
    const SvdFactors a = svd(m);
    const SvdFactors b = svd(m);
    CHECK(bit_equal(a.u, b.u));
    CHECK(bit_equal(a.vt, b.vt));
    CHECK(a.singular_values == b.singular_values);
}

TEST_CASE("svd rejects bad input and reports non-convergence") {
    CHECK_THROWS_AS(svd(Matrix()), std::invalid_argument);
    Rng rng(13);
    const Matrix m = random_normal(6, 6, rng, 1.0);
    try {
        svd(m, 0);
        FAIL("expected a convergence error");
    } catch (const std::runtime_error& e) {
        const std::string what = e.what();
        CHECK(what.find("0 sweeps") != std::string::npos);
        CHECK(what.find("residual") != std::string::npos);
    }
}

TEST_CASE("sym_eigen on diagonal and textbook inputs") {
    const EigenFactors d = sym_eigen(Matrix(3, 3, {3, 0, 0, 0, 1, 0, 0, 0, 2}));
    CHECK(d.eigenvalues[0] == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(d.eigenvalues[1] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(d.eigenvalues[2] == doctest::Approx(1.0).epsilon(1e-12));

    const EigenFactors t = sym_eigen(Matrix(2, 2, {2, 1, 1, 2}));
    CHECK(t.eigenvalues[0] == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(t.eigenvalues[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("sym_eigen reconstructs and diagonalizes a random symmetric input") {
    Rng rng(31);
    Matrix s(10, 10);
    for (std::size_t i = 0; i < 10; ++i)
        for (std::size_t j = i; j < 10; ++j) {
            const double v = rng.normal();
            s(i, j) = v;
            s(j, i) = v;
        }
    const EigenFactors f = sym_eigen(s);
    CHECK(oracle::column_orthonormality_defect(f.eigenvectors) <= 1e-8);

    Matrix pd = f.eigenvectors;
    for (std::size_t i = 0; i < 10; ++i)
        for (std::size_t j = 0; j < 10; ++j) pd(i, j) *= f.eigenvalues[j];
    CHECK(frobenius_norm(sub(matmul(pd, transpose(f.eigenvectors)), s)) <= 1e-8);

    // Each pair satisfies s * v_i = lambda_i * v_i.
    const Matrix sv = matmul(s, f.eigenvectors);
    for (std::size_t j = 0; j < 10; ++j)
        for (std::size_t i = 0; i < 10; ++i)
            CHECK(std::abs(sv(i, j) - f.eigenvalues[j] * f.eigenvectors(i, j)) <= 1e-6);
}

TEST_CASE("sym_eigen matches the independent jacobi oracle") {
    Rng rng(37);
    Matrix s(8, 8);
    for (std::size_t i = 0; i < 8; ++i)
        for (std::size_t j = i; j < 8; ++j) {
            const double v = rng.normal();
            s(i, j) = v;
            s(j, i) = v;
        }
    const EigenFactors f = sym_eigen(s);
    const std::vector<double> expected = oracle::jacobi_eigenvalues(s);
    for (std::size_t i = 0; i < 8; ++i)
        CHECK(f.eigenvalues[i] == doctest::Approx(expected[i]).epsilon(1e-10));
}

TEST_CASE("sym_eigen rejects asymmetric input naming the defect") {
    Matrix s(2, 2, {1, 2, 0.5, 1});
    try {
        sym_eigen(s);
        FAIL("expected an asymmetry error");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("1.5") != std::string::npos);
    }
    CHECK_THROWS_AS(sym_eigen(Matrix(2, 3)), std::invalid_argument);
}

TEST_CASE("explained variance counts on hand and planted spectra") {
    CHECK(explained_variance_counts({4, 0, 0}, 0.999) == 1);
    CHECK(explained_variance_counts({1, 1, 1, 1}, 0.5) == 2);
    CHECK(explained_variance_counts({1, 1, 1, 1}, 1.0) == 4);

    // Planted rank-5 + small noise: counts agree with the cumulative oracle.
    Rng rng(91);
    Matrix planted(64, 32);
    for (int c = 0; c < 5; ++c) {
        const Matrix left = random_normal(64, 1, rng, 1.0);
        const Matrix right = random_normal(1, 32, rng, 1.0);
        add_in_place(planted, matmul(left, right));
    }
    axpy_in_place(planted, 1e-3, random_normal(64, 32, rng, 1.0));
    const SvdFactors f = svd(planted);
    std::vector<double> energy;
    for (double s : f.singular_values) energy.push_back(s * s);
    CHECK(explained_variance_counts(energy, 0.99) == oracle::cumulative_count(energy, 0.99));
    CHECK(explained_variance_counts(energy, 0.99) == 5);
}

TEST_CASE("explained variance counts are monotone in threshold") {
    Rng rng(19);
    std::vector<double> values;
    for (int i = 0; i < 20; ++i) values.push_back(rng.uniform() + 0.01);
    std::sort(values.begin(), values.end(), std::greater<double>());
    std::size_t prev = 0;
    for (double t : {0.1, 0.3, 0.5, 0.7, 0.9, 0.99, 1.0}) {
        const std::size_t count = explained_variance_counts(values, t);
        CHECK(count >= prev);
        CHECK(count == oracle::cumulative_count(values, t));
        prev = count;
    }
}

TEST_CASE("explained variance counts reject malformed spectra") {
    CHECK_THROWS_AS(explained_variance_counts({0, 0, 0}, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(explained_variance_counts({}, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(explained_variance_counts({1, 2}, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(explained_variance_counts({2, -1}, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(explained_variance_counts({1}, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(explained_variance_counts({1}, 1.5), std::invalid_argument);
}
