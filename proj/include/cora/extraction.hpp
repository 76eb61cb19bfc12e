#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "cora/decomp.hpp"
#include "cora/matrix.hpp"

namespace cora {

// The Q/K/V projection weights of one attention block, stored stacked:
// rows of w_q, then w_k, then w_v, as one (3*d_model) x d_k matrix.
class StackedAttentionWeights {
public:
    StackedAttentionWeights() = default;

    static StackedAttentionWeights from_blocks(const Matrix& w_q, const Matrix& w_k, const Matrix& w_v);
    static StackedAttentionWeights from_stacked(Matrix stacked);

    const Matrix& stacked() const { return stacked_; }
    Matrix& mutable_stacked() { return stacked_; }
    Matrix w_q() const { return row_slice(stacked_, 0, block_rows()); }
    Matrix w_k() const { return row_slice(stacked_, block_rows(), 2 * block_rows()); }
    Matrix w_v() const { return row_slice(stacked_, 2 * block_rows(), 3 * block_rows()); }

    std::size_t d_model() const { return block_rows(); }
    std::size_t d_k() const { return stacked_.cols(); }

private:
    std::size_t block_rows() const { return stacked_.rows() / 3; }
    Matrix stacked_;
};

// n fine-tuned models' stacked attention weights, with source labels.
struct Ensemble {
    std::vector<StackedAttentionWeights> members;
    std::vector<std::string> source_labels;
};

void validate_ensemble(const Ensemble& e);

enum class BasisMethod { svd, pca };

std::string to_string(BasisMethod m);
BasisMethod basis_method_from_string(const std::string& name);

// The replacement for the adapter's B matrix: the leading r directions of
// the merged ensemble weights, as orthonormal rows (r x d_k).
struct CommonBasis {
    Matrix b;
    std::size_t rank = 0;
    BasisMethod method = BasisMethod::svd;
    double variance_captured = 0.0;
};

// Entrywise mean of the members' stacked matrices. Summation order is fixed
// (sorted by source label) so the result does not depend on member order.
Matrix merge_ensemble(const Ensemble& e);

CommonBasis extract_common_basis_svd(const Matrix& w0, std::size_t r);

// PCA alternative, kept for the variance comparison only; rows of w0 are the
// data points, covariance is over the centered rows. Not offered as an
// adapter initializer.
CommonBasis extract_common_basis_pca(const Matrix& w0, std::size_t r);

struct VarianceCountRow {
    BasisMethod method;
    double threshold;
    std::size_t count;
};

// Component counts needed to reach each threshold, for the uncentered SVD
// energy and the centered PCA eigenvalue spectrum.
std::vector<VarianceCountRow> variance_report(const Matrix& w0, const std::vector<double>& thresholds);

struct VarianceCurvePoint {
    BasisMethod method;
    std::size_t component;  // 1-based index
    double cumulative_fraction;
};

std::vector<VarianceCurvePoint> variance_curves(const Matrix& w0);

// Spectra used by the report: squared singular values of w0, and eigenvalues
// of the centered row covariance (clamped at zero).
std::vector<double> svd_energy_spectrum(const Matrix& w0);
std::vector<double> pca_eigenvalue_spectrum(const Matrix& w0);

}  // namespace cora
