#include "cora/extraction.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace cora {

StackedAttentionWeights StackedAttentionWeights::from_blocks(const Matrix& w_q, const Matrix& w_k,
                                                             const Matrix& w_v) {
    if (w_q.rows() != w_k.rows() || w_q.cols() != w_k.cols() || w_q.rows() != w_v.rows() ||
        w_q.cols() != w_v.cols()) {
        throw std::invalid_argument("StackedAttentionWeights: blocks differ in shape (q " + w_q.shape_str() +
                                    ", k " + w_k.shape_str() + ", v " + w_v.shape_str() + ")");
    }
    StackedAttentionWeights w;
    w.stacked_ = vstack({&w_q, &w_k, &w_v});
    return w;
}

StackedAttentionWeights StackedAttentionWeights::from_stacked(Matrix stacked) {
    if (stacked.empty() || stacked.rows() % 3 != 0) {
        throw std::invalid_argument("StackedAttentionWeights: row count " + std::to_string(stacked.rows()) +
                                    " not divisible by 3");
    }
    StackedAttentionWeights w;
    w.stacked_ = std::move(stacked);
    return w;
}

void validate_ensemble(const Ensemble& e) {
    if (e.members.empty()) {
        throw std::invalid_argument("ensemble: no members");
    }
    if (e.source_labels.size() != e.members.size()) {
        throw std::invalid_argument("ensemble: label count does not match member count");
    }
    const Matrix& first = e.members.front().stacked();
    for (std::size_t i = 1; i < e.members.size(); ++i) {
        const Matrix& m = e.members[i].stacked();
        if (m.rows() != first.rows() || m.cols() != first.cols()) {
            throw std::invalid_argument("ensemble: member '" + e.source_labels[i] + "' has shape " +
                                        m.shape_str() + ", expected " + first.shape_str());
        }
    }
}

Matrix merge_ensemble(const Ensemble& e) {
    validate_ensemble(e);
    std::vector<std::size_t> order(e.members.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return e.source_labels[a] < e.source_labels[b];
    });
    Matrix sum(e.members.front().stacked().rows(), e.members.front().stacked().cols());
    for (std::size_t idx : order) {
        add_in_place(sum, e.members[idx].stacked());
    }
    return scale(sum, 1.0 / static_cast<double>(e.members.size()));
}

namespace {

void check_rank_range(const Matrix& w0, std::size_t r) {
    const std::size_t cap = std::min(w0.rows(), w0.cols());
    if (r < 1 || r > cap) {
        std::ostringstream os;
        os << "extract_common_basis: rank " << r << " out of range [1, " << cap << "] for " << w0.shape_str();
        throw std::invalid_argument(os.str());
    }
    // Soft constraint: r should stay well below the attention dimensions.
    const std::size_t d_model = w0.rows() % 3 == 0 ? w0.rows() / 3 : w0.rows();
    const std::size_t soft_cap = std::min(d_model, w0.cols()) / 2;
    if (soft_cap > 0 && r > soft_cap) {
        std::cerr << "warning: rank " << r << " exceeds min(d_model, d_k)/2 = " << soft_cap
                  << "; the adapter is no longer strongly low-rank\n";
    }
}

}  // namespace

std::string to_string(BasisMethod m) { return m == BasisMethod::svd ? "svd" : "pca"; }

BasisMethod basis_method_from_string(const std::string& name) {
    if (name == "svd") return BasisMethod::svd;
    if (name == "pca") return BasisMethod::pca;
    throw std::invalid_argument("unknown basis method \"" + name + "\" (expected svd or pca)");
}

CommonBasis extract_common_basis_svd(const Matrix& w0, std::size_t r) {
    check_rank_range(w0, r);
    const SvdFactors f = svd(w0);
    double total = 0.0;
    double lead = 0.0;
    for (std::size_t i = 0; i < f.singular_values.size(); ++i) {
        const double e = f.singular_values[i] * f.singular_values[i];
        total += e;
        if (i < r) {
            lead += e;
        }
    }
    if (total == 0.0) {
        throw std::invalid_argument("extract_common_basis_svd: input has zero spectrum");
    }
    CommonBasis basis;
    basis.b = row_slice(f.vt, 0, r);
    basis.rank = r;
    basis.method = BasisMethod::svd;
    basis.variance_captured = lead / total;
    return basis;
}

std::vector<double> pca_eigenvalue_spectrum(const Matrix& w0) {
    if (w0.rows() < 2) {
        throw std::invalid_argument("pca: need at least 2 rows (data points), got " +
                                    std::to_string(w0.rows()));
    }
    const std::size_t m = w0.rows();
    const std::size_t n = w0.cols();
    std::vector<double> mean(n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            mean[j] += w0(i, j);
        }
    }
    for (double& v : mean) {
        v /= static_cast<double>(m);
    }
    Matrix centered(m, n);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            centered(i, j) = w0(i, j) - mean[j];
        }
    }
    Matrix cov = scale(matmul(transpose(centered), centered), 1.0 / static_cast<double>(m - 1));
    const EigenFactors f = sym_eigen(cov);
    std::vector<double> values = f.eigenvalues;
    for (double& v : values) {
        v = std::max(v, 0.0);
    }
    return values;
}

namespace {

// Eigenvectors of the centered row covariance, columns sorted by eigenvalue.
EigenFactors pca_eigen(const Matrix& w0) {
    const std::size_t m = w0.rows();
    const std::size_t n = w0.cols();
    std::vector<double> mean(n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            mean[j] += w0(i, j);
        }
    }
    for (double& v : mean) {
        v /= static_cast<double>(m);
    }
    Matrix centered(m, n);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            centered(i, j) = w0(i, j) - mean[j];
        }
    }
    Matrix cov = scale(matmul(transpose(centered), centered), 1.0 / static_cast<double>(m - 1));
    return sym_eigen(cov);
}

}  // namespace

CommonBasis extract_common_basis_pca(const Matrix& w0, std::size_t r) {
    check_rank_range(w0, r);
    if (w0.rows() < 2) {
        throw std::invalid_argument("pca: need at least 2 rows (data points), got " +
                                    std::to_string(w0.rows()));
    }
    const EigenFactors f = pca_eigen(w0);
    std::vector<double> lambda = f.eigenvalues;
    for (double& v : lambda) {
        v = std::max(v, 0.0);
    }
    const double top = lambda.empty() ? 0.0 : lambda.front();
    std::size_t positive = 0;
    for (double v : lambda) {
        if (v > top * 1e-12 && v > 0.0) {
            ++positive;
        }
    }
    if (r > positive) {
        std::ostringstream os;
        os << "extract_common_basis_pca: rank " << r << " exceeds number of positive eigenvalues (effective rank "
           << positive << ")";
        throw std::invalid_argument(os.str());
    }
    double total = 0.0;
    double leadsum = 0.0;
    for (std::size_t i = 0; i < lambda.size(); ++i) {
        total += lambda[i];
        if (i < r) {
            leadsum += lambda[i];
        }
    }
    // b rows = leading eigenvector directions, normalized to unit length.
    Matrix b(r, w0.cols());
    for (std::size_t i = 0; i < r; ++i) {
        double norm = 0.0;
        for (std::size_t j = 0; j < w0.cols(); ++j) {
            norm += f.eigenvectors(j, i) * f.eigenvectors(j, i);
        }
        norm = std::sqrt(norm);
        for (std::size_t j = 0; j < w0.cols(); ++j) {
            b(i, j) = f.eigenvectors(j, i) / norm;
        }
    }
    CommonBasis basis;
    basis.b = std::move(b);
    basis.rank = r;
    basis.method = BasisMethod::pca;
    basis.variance_captured = leadsum / total;
    return basis;
}

std::vector<double> svd_energy_spectrum(const Matrix& w0) {
    const SvdFactors f = svd(w0);
    std::vector<double> energy(f.singular_values.size());
    for (std::size_t i = 0; i < energy.size(); ++i) {
        energy[i] = f.singular_values[i] * f.singular_values[i];
    }
    return energy;
}

std::vector<VarianceCountRow> variance_report(const Matrix& w0, const std::vector<double>& thresholds) {
    const std::vector<double> energy = svd_energy_spectrum(w0);
    const std::vector<double> lambda = pca_eigenvalue_spectrum(w0);
    std::vector<VarianceCountRow> rows;
    rows.reserve(2 * thresholds.size());
    for (double t : thresholds) {
        rows.push_back({BasisMethod::svd, t, explained_variance_counts(energy, t)});
    }
    for (double t : thresholds) {
        rows.push_back({BasisMethod::pca, t, explained_variance_counts(lambda, t)});
    }
    return rows;
}

std::vector<VarianceCurvePoint> variance_curves(const Matrix& w0) {
    std::vector<VarianceCurvePoint> points;
    for (BasisMethod method : {BasisMethod::svd, BasisMethod::pca}) {
        const std::vector<double> values =
            method == BasisMethod::svd ? svd_energy_spectrum(w0) : pca_eigenvalue_spectrum(w0);
        double total = 0.0;
        for (double v : values) {
            total += v;
        }
        if (total == 0.0) {
            throw std::invalid_argument("variance_curves: all-zero spectrum");
        }
        double cum = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i) {
            cum += values[i];
            points.push_back({method, i + 1, cum / total});
        }
    }
    return points;
}

}  // namespace cora
