#include "cora/decomp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace cora {

namespace {

// Column-major working copy so Jacobi column sweeps touch contiguous memory.
struct ColMat {
    std::size_t rows, cols;
    std::vector<double> d;  // column-major

    ColMat(std::size_t r, std::size_t c) : rows(r), cols(c), d(r * c, 0.0) {}

    double* col(std::size_t j) { return d.data() + j * rows; }
    const double* col(std::size_t j) const { return d.data() + j * rows; }
};

ColMat to_col_major(const Matrix& m) {
    ColMat out(m.rows(), m.cols());
    for (std::size_t j = 0; j < m.cols(); ++j) {
        double* c = out.col(j);
        for (std::size_t i = 0; i < m.rows(); ++i) {
            c[i] = m(i, j);
        }
    }
    return out;
}

double dot(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        s += a[i] * b[i];
    }
    return s;
}

void rotate_cols(double* p, double* q, std::size_t n, double c, double s) {
    for (std::size_t i = 0; i < n; ++i) {
        const double vp = p[i];
        const double vq = q[i];
        p[i] = c * vp - s * vq;
        q[i] = s * vp + c * vq;
    }
}

[[noreturn]] void throw_no_convergence(const char* op, int cap, double residual) {
    std::ostringstream os;
    os << op << ": no convergence after " << cap << " sweeps (off-diagonal residual " << residual << ")";
    throw std::runtime_error(os.str());
}

// One-sided Jacobi on the columns of a (rows >= cols assumed by caller).
// Orthogonalizes columns in place while accumulating the right factor v.
void jacobi_orthogonalize(ColMat& a, ColMat& v, int max_sweeps) {
    const std::size_t n = a.cols;
    const std::size_t m = a.rows;
    // Rotations preserve total Frobenius mass, so the scale is fixed up front.
    // Columns below machine epsilon of it hold singular values that double
    // precision cannot separate from zero; left alone they keep rotating
    // against each other forever, so they are flushed to exact zero.
    const double scale = std::sqrt(dot(a.d.data(), a.d.data(), a.d.size()));
    const double negligible = std::numeric_limits<double>::epsilon() * scale;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double* ap = a.col(p);
                double* aq = a.col(q);
                double alpha = dot(ap, ap, m);
                double beta = dot(aq, aq, m);
                if (std::sqrt(alpha) <= negligible) {
                    std::fill(ap, ap + m, 0.0);
                    alpha = 0.0;
                }
                if (std::sqrt(beta) <= negligible) {
                    std::fill(aq, aq + m, 0.0);
                    beta = 0.0;
                }
                if (alpha == 0.0 || beta == 0.0) {
                    continue;
                }
                const double gamma = dot(ap, aq, m);
                if (std::fabs(gamma) <= kDecompTol * (std::sqrt(alpha) * std::sqrt(beta))) {
                    continue;
                }
                rotated = true;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) / (std::fabs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                rotate_cols(ap, aq, m, c, s);
                rotate_cols(v.col(p), v.col(q), n, c, s);
            }
        }
        if (!rotated) {
            return;
        }
    }
    // Residual = worst normalized column correlation remaining.
    double residual = 0.0;
    for (std::size_t p = 0; p + 1 < n; ++p) {
        for (std::size_t q = p + 1; q < n; ++q) {
            const double alpha = dot(a.col(p), a.col(p), m);
            const double beta = dot(a.col(q), a.col(q), m);
            if (alpha == 0.0 || beta == 0.0) {
                continue;
            }
            const double gamma = dot(a.col(p), a.col(q), m);
            residual = std::max(residual, std::fabs(gamma) / (std::sqrt(alpha) * std::sqrt(beta)));
        }
    }
    throw_no_convergence("svd", max_sweeps, residual);
}

// Replace zero columns of u with canonical basis vectors orthogonalized
// against the existing columns, so the thin factor stays orthonormal even
// for rank-deficient input.
void complete_orthonormal(ColMat& u, const std::vector<bool>& needs_fill) {
    const std::size_t m = u.rows;
    const std::size_t k = u.cols;
    std::size_t candidate = 0;
    for (std::size_t j = 0; j < k; ++j) {
        if (!needs_fill[j]) {
            continue;
        }
        while (candidate < m) {
            std::vector<double> e(m, 0.0);
            e[candidate] = 1.0;
            ++candidate;
            for (int pass = 0; pass < 2; ++pass) {
                for (std::size_t c = 0; c < k; ++c) {
                    if (needs_fill[c] && c >= j) {
                        continue;  // not yet filled
                    }
                    const double proj = dot(e.data(), u.col(c), m);
                    const double* uc = u.col(c);
                    for (std::size_t i = 0; i < m; ++i) {
                        e[i] -= proj * uc[i];
                    }
                }
            }
            const double norm = std::sqrt(dot(e.data(), e.data(), m));
            if (norm > 0.5) {
                double* uj = u.col(j);
                for (std::size_t i = 0; i < m; ++i) {
                    uj[i] = e[i] / norm;
                }
                break;
            }
        }
    }
}

Matrix from_col_major(const ColMat& c) {
    Matrix out(c.rows, c.cols);
    for (std::size_t j = 0; j < c.cols; ++j) {
        const double* cj = c.col(j);
        for (std::size_t i = 0; i < c.rows; ++i) {
            out(i, j) = cj[i];
        }
    }
    return out;
}

}  // namespace

SvdFactors svd(const Matrix& m, int max_sweeps) {
    if (m.empty()) {
        throw std::invalid_argument("svd: empty matrix");
    }
    for (double v : m.data()) {
        if (!std::isfinite(v)) {
            throw std::invalid_argument("svd: non-finite entry");
        }
    }
    const bool transposed = m.rows() < m.cols();
    const Matrix work_src = transposed ? transpose(m) : m;
    const std::size_t wr = work_src.rows();
    const std::size_t wc = work_src.cols();

    ColMat a = to_col_major(work_src);
    ColMat v(wc, wc);
    for (std::size_t j = 0; j < wc; ++j) {
        v.col(j)[j] = 1.0;
    }
    jacobi_orthogonalize(a, v, max_sweeps);

    std::vector<double> sigma(wc);
    for (std::size_t j = 0; j < wc; ++j) {
        sigma[j] = std::sqrt(dot(a.col(j), a.col(j), wr));
    }
    std::vector<std::size_t> order(wc);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

    ColMat u_sorted(wr, wc);
    ColMat v_sorted(wc, wc);
    std::vector<double> s_sorted(wc);
    std::vector<bool> needs_fill(wc, false);
    for (std::size_t j = 0; j < wc; ++j) {
        const std::size_t src = order[j];
        s_sorted[j] = sigma[src];
        std::copy(v.col(src), v.col(src) + wc, v_sorted.col(j));
        if (sigma[src] > 0.0) {
            const double inv = 1.0 / sigma[src];
            const double* ac = a.col(src);
            double* uc = u_sorted.col(j);
            for (std::size_t i = 0; i < wr; ++i) {
                uc[i] = ac[i] * inv;
            }
        } else {
            needs_fill[j] = true;
        }
    }
    complete_orthonormal(u_sorted, needs_fill);

    SvdFactors f;
    f.singular_values = std::move(s_sorted);
    if (!transposed) {
        f.u = from_col_major(u_sorted);        // m x k
        f.vt = transpose(from_col_major(v_sorted));  // k x n
    } else {
        // m = work^T = (u_w s vt_w)^T => u = v_w, vt = u_w^T
        f.u = from_col_major(v_sorted);
        f.vt = transpose(from_col_major(u_sorted));
    }

    // Deterministic signs: first nonzero entry of each vt row positive.
    for (std::size_t i = 0; i < f.vt.rows(); ++i) {
        double lead = 0.0;
        for (std::size_t j = 0; j < f.vt.cols(); ++j) {
            if (f.vt(i, j) != 0.0) {
                lead = f.vt(i, j);
                break;
            }
        }
        if (lead < 0.0) {
            for (std::size_t j = 0; j < f.vt.cols(); ++j) {
                f.vt(i, j) = -f.vt(i, j);
            }
            for (std::size_t r = 0; r < f.u.rows(); ++r) {
                f.u(r, i) = -f.u(r, i);
            }
        }
    }
    return f;
}

EigenFactors sym_eigen(const Matrix& m, int max_sweeps) {
    if (m.empty()) {
        throw std::invalid_argument("sym_eigen: empty matrix");
    }
    if (m.rows() != m.cols()) {
        throw std::invalid_argument("sym_eigen: matrix not square (" + m.shape_str() + ")");
    }
    const std::size_t n = m.rows();
    double asym = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            asym = std::max(asym, std::fabs(m(i, j) - m(j, i)));
        }
    }
    if (asym > 1e-10) {
        std::ostringstream os;
        os << "sym_eigen: input not symmetric (max |m_ij - m_ji| = " << asym << ")";
        throw std::invalid_argument(os.str());
    }

    Matrix a = m;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double avg = 0.5 * (a(i, j) + a(j, i));
            a(i, j) = avg;
            a(j, i) = avg;
        }
    }
    Matrix v = Matrix::identity(n);
    const double base = std::max(frobenius_norm(a), 1e-300);

    auto off_mass = [&]() {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                s += 2.0 * a(i, j) * a(i, j);
            }
        }
        return std::sqrt(s);
    };

    bool converged = n == 1;
    for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
        if (off_mass() <= kDecompTol * base) {
            converged = true;
            break;
        }
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) {
                    continue;
                }
                const double tau = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::fabs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                // Update rows/columns p and q of the symmetric matrix.
                for (std::size_t i = 0; i < n; ++i) {
                    const double aip = a(i, p);
                    const double aiq = a(i, q);
                    a(i, p) = c * aip - s * aiq;
                    a(i, q) = s * aip + c * aiq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double api = a(p, i);
                    const double aqi = a(q, i);
                    a(p, i) = c * api - s * aqi;
                    a(q, i) = s * api + c * aqi;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double vip = v(i, p);
                    const double viq = v(i, q);
                    v(i, p) = c * vip - s * viq;
                    v(i, q) = s * vip + c * viq;
                }
            }
        }
    }
    if (!converged && off_mass() > kDecompTol * base) {
        throw_no_convergence("sym_eigen", max_sweeps, off_mass() / base);
    }

    std::vector<double> lambda(n);
    for (std::size_t i = 0; i < n; ++i) {
        lambda[i] = a(i, i);
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return lambda[x] > lambda[y]; });

    EigenFactors f;
    f.eigenvalues.resize(n);
    f.eigenvectors = Matrix(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        f.eigenvalues[j] = lambda[order[j]];
        double lead = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (v(i, order[j]) != 0.0) {
                lead = v(i, order[j]);
                break;
            }
        }
        const double sign = lead < 0.0 ? -1.0 : 1.0;
        for (std::size_t i = 0; i < n; ++i) {
            f.eigenvectors(i, j) = sign * v(i, order[j]);
        }
    }
    return f;
}

std::size_t explained_variance_counts(const std::vector<double>& values, double threshold) {
    if (values.empty()) {
        throw std::invalid_argument("explained_variance_counts: empty spectrum");
    }
    if (!(threshold > 0.0 && threshold <= 1.0)) {
        throw std::invalid_argument("explained_variance_counts: threshold must be in (0, 1]");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (values[i] < 0.0) {
            throw std::invalid_argument("explained_variance_counts: negative value in spectrum");
        }
        if (i > 0 && values[i] > values[i - 1]) {
            throw std::invalid_argument("explained_variance_counts: spectrum not sorted non-increasing");
        }
        total += values[i];
    }
    if (total == 0.0) {
        throw std::invalid_argument("explained_variance_counts: all-zero spectrum");
    }
    double cum = 0.0;
    for (std::size_t k = 0; k < values.size(); ++k) {
        cum += values[k];
        if (cum / total >= threshold) {
            return k + 1;
        }
    }
    return values.size();  // rounding fallback; threshold <= 1 always reachable
}

}  // namespace cora
