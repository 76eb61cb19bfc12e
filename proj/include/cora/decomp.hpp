#pragma once

#include <cstddef>
#include <vector>

#include "cora/matrix.hpp"

namespace cora {

// Thin SVD factors: u is m x k, vt is k x n, k = min(m, n).
// Singular values sorted non-increasing; factor columns/rows orthonormal.
// Sign convention: the first nonzero entry of each row of vt is positive.
struct SvdFactors {
    Matrix u;
    std::vector<double> singular_values;
    Matrix vt;
};

// Symmetric eigendecomposition: eigenvalues sorted non-increasing,
// eigenvectors as columns aligned with them.
struct EigenFactors {
    std::vector<double> eigenvalues;
    Matrix eigenvectors;
};

inline constexpr int kDecompMaxSweeps = 100;
inline constexpr double kDecompTol = 1e-12;

SvdFactors svd(const Matrix& m, int max_sweeps = kDecompMaxSweeps);

// Input must be square and symmetric to 1e-10 (max |m_ij - m_ji|).
EigenFactors sym_eigen(const Matrix& m, int max_sweeps = kDecompMaxSweeps);

// Smallest k such that the leading k entries reach `threshold` of the total.
// `values` must be non-negative, sorted non-increasing, not all zero.
// Callers pass squared singular values for SVD spectra, eigenvalues for PCA.
std::size_t explained_variance_counts(const std::vector<double>& values, double threshold);

}  // namespace cora
