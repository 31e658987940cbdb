#pragma once

// Dense small-matrix kernels backing the path engine: Gram columns and
// submatrices under the ||x_j||^2 = n standardization, row-pivoted solves
// for possibly indefinite systems, and Jacobi extreme eigenvalues.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <unordered_map>
#include <vector>

#include "plus/errors.hpp"

namespace plus {

using Vector = std::vector<double>;

class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    double* row_ptr(std::size_t i) { return data_.data() + i * cols_; }
    const double* row_ptr(std::size_t i) const { return data_.data() + i * cols_; }

    static Matrix identity(std::size_t k) {
        Matrix m(k, k);
        for (std::size_t i = 0; i < k; ++i) m(i, i) = 1.0;
        return m;
    }

    bool operator==(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_ && data_ == other.data_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline double dot(const Vector& a, const Vector& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(const Vector& a) { return std::sqrt(dot(a, a)); }

inline double norm_inf(const Vector& a) {
    double m = 0.0;
    for (double x : a) m = std::max(m, std::abs(x));
    return m;
}

inline Vector matvec(const Matrix& m, const Vector& x) {
    Vector y(m.rows(), 0.0);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const double* row = m.row_ptr(i);
        double s = 0.0;
        for (std::size_t j = 0; j < m.cols(); ++j) s += row[j] * x[j];
        y[i] = s;
    }
    return y;
}

// y = X'v / n for an n x p design; the workhorse behind Gram columns.
inline Vector crossprod_scaled(const Matrix& x, const Vector& v) {
    Vector y(x.cols(), 0.0);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const double* row = x.row_ptr(i);
        const double vi = v[i];
        if (vi == 0.0) continue;
        for (std::size_t j = 0; j < x.cols(); ++j) y[j] += row[j] * vi;
    }
    const double inv_n = 1.0 / static_cast<double>(x.rows());
    for (double& e : y) e *= inv_n;
    return y;
}

// ------------------------------------------------------------------
// Regression data under the ||x_j||^2 = n convention.

struct RegressionData {
    Matrix x;          // n x p, rows are observations
    Vector y;          // length n
    Vector col_norms;  // original column norms, for back-transforming coefficients
    bool standardized = false;

    std::size_t n() const { return x.rows(); }
    std::size_t p() const { return x.cols(); }
};

inline RegressionData make_data(Matrix x, Vector y) {
    if (x.rows() == 0 || x.cols() == 0 || y.size() != x.rows())
        throw DimensionError("design/response dimensions do not match");
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j)
            if (!std::isfinite(x(i, j))) throw DomainError("non-finite design entry");
    for (double v : y)
        if (!std::isfinite(v)) throw DomainError("non-finite response entry");
    RegressionData d;
    d.col_norms.assign(x.cols(), 0.0);
    for (std::size_t j = 0; j < x.cols(); ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < x.rows(); ++i) s += x(i, j) * x(i, j);
        d.col_norms[j] = std::sqrt(s);
    }
    d.x = std::move(x);
    d.y = std::move(y);
    return d;
}

// Scale every column to ||x_j||^2 = n; original norms stay in col_norms so
// fitted coefficients can be mapped back: beta_orig = beta_std * sqrt(n) / norm.
inline RegressionData standardize_columns(const RegressionData& data) {
    RegressionData out = data;
    const double root_n = std::sqrt(static_cast<double>(data.n()));
    for (std::size_t j = 0; j < data.p(); ++j) {
        const double norm = data.col_norms[j];
        if (norm == 0.0) throw ZeroColumnError(j);
        const double scale = root_n / norm;
        for (std::size_t i = 0; i < data.n(); ++i) out.x(i, j) *= scale;
    }
    out.standardized = true;
    return out;
}

inline Vector beta_to_original_scale(const RegressionData& data, const Vector& beta_std) {
    Vector out(beta_std.size());
    const double root_n = std::sqrt(static_cast<double>(data.n()));
    for (std::size_t j = 0; j < beta_std.size(); ++j)
        out[j] = data.col_norms[j] > 0.0 ? beta_std[j] * root_n / data.col_norms[j] : 0.0;
    return out;
}

// ------------------------------------------------------------------
// Lazy view of Sigma = X'X/n. Columns chi_j = X'x_j/n are cached on first
// use; the full Gram is materialized only for small p. Not synchronized:
// confine a view to one fit/thread.

class GramView {
public:
    static constexpr std::size_t kFullGramCap = 4096;

    explicit GramView(const RegressionData& data) : data_(&data) {}

    std::size_t p() const { return data_->p(); }
    const RegressionData& data() const { return *data_; }

    const Vector& column(std::size_t j) const {
        if (j >= p()) throw IndexError("gram column index out of range");
        auto it = cache_.find(j);
        if (it != cache_.end()) return it->second;
        Vector col(data_->n());
        for (std::size_t i = 0; i < data_->n(); ++i) col[i] = data_->x(i, j);
        auto chi = crossprod_scaled(data_->x, col);
        return cache_.emplace(j, std::move(chi)).first->second;
    }

    // Sigma_A for a set of distinct column indices.
    Matrix submatrix(const std::vector<std::size_t>& a) const {
        if (a.empty()) throw IndexError("empty index set for gram submatrix");
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (a[i] >= p()) throw IndexError("gram submatrix index out of range");
            for (std::size_t k = i + 1; k < a.size(); ++k)
                if (a[i] == a[k]) throw IndexError("duplicate index in gram submatrix");
        }
        Matrix m(a.size(), a.size());
        for (std::size_t c = 0; c < a.size(); ++c) {
            const Vector& chi = column(a[c]);
            for (std::size_t r = 0; r < a.size(); ++r) m(r, c) = chi[a[r]];
        }
        // enforce exact symmetry against rounding in the two dot products
        for (std::size_t r = 0; r < a.size(); ++r)
            for (std::size_t c = r + 1; c < a.size(); ++c) {
                const double v = 0.5 * (m(r, c) + m(c, r));
                m(r, c) = m(c, r) = v;
            }
        return m;
    }

    const Matrix& full() const {
        if (!full_) {
            if (p() > kFullGramCap)
                throw DimensionError("full Gram materialization above the p cap");
            Matrix m(p(), p());
            for (std::size_t j = 0; j < p(); ++j) {
                const Vector& chi = column(j);
                for (std::size_t i = 0; i < p(); ++i) m(i, j) = chi[i];
            }
            for (std::size_t i = 0; i < p(); ++i)
                for (std::size_t j = i + 1; j < p(); ++j) {
                    const double v = 0.5 * (m(i, j) + m(j, i));
                    m(i, j) = m(j, i) = v;
                }
            full_ = std::move(m);
        }
        return *full_;
    }

private:
    const RegressionData* data_;
    mutable std::unordered_map<std::size_t, Vector> cache_;
    mutable std::optional<Matrix> full_;
};

// ------------------------------------------------------------------
// Row-pivoted Gaussian elimination. Q(eta) can be indefinite (the MCP
// subtracts diag(v)), so no Cholesky here.

inline constexpr double kSolvePivotTol = 1e-12;

inline Vector solve_dense(Matrix m, Vector rhs) {
    const std::size_t k = m.rows();
    if (k != m.cols() || rhs.size() != k) throw DimensionError("solve_dense: shape mismatch");
    double max_entry = 0.0;
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) {
            if (!std::isfinite(m(i, j))) throw DomainError("solve_dense: non-finite entry");
            max_entry = std::max(max_entry, std::abs(m(i, j)));
        }
    if (max_entry == 0.0) throw SingularMatrixError(std::numeric_limits<double>::infinity());

    double min_pivot = std::numeric_limits<double>::infinity();
    for (std::size_t col = 0; col < k; ++col) {
        std::size_t piv = col;
        double best = std::abs(m(col, col));
        for (std::size_t r = col + 1; r < k; ++r) {
            const double v = std::abs(m(r, col));
            if (v > best) {
                best = v;
                piv = r;
            }
        }
        if (best < kSolvePivotTol * max_entry)
            throw SingularMatrixError(best > 0.0 ? max_entry / best
                                                 : std::numeric_limits<double>::infinity());
        min_pivot = std::min(min_pivot, best);
        if (piv != col) {
            for (std::size_t j = 0; j < k; ++j) std::swap(m(col, j), m(piv, j));
            std::swap(rhs[col], rhs[piv]);
        }
        const double inv = 1.0 / m(col, col);
        for (std::size_t r = col + 1; r < k; ++r) {
            const double f = m(r, col) * inv;
            if (f == 0.0) continue;
            m(r, col) = 0.0;
            const double* src = m.row_ptr(col);
            double* dst = m.row_ptr(r);
            for (std::size_t j = col + 1; j < k; ++j) dst[j] -= f * src[j];
            rhs[r] -= f * rhs[col];
        }
    }
    Vector x(k, 0.0);
    for (std::size_t i = k; i-- > 0;) {
        double s = rhs[i];
        const double* row = m.row_ptr(i);
        for (std::size_t j = i + 1; j < k; ++j) s -= row[j] * x[j];
        x[i] = s / row[i];
    }
    return x;
}

// Same elimination with a matrix of right-hand sides.
inline Matrix solve_dense_multi(Matrix m, Matrix rhs) {
    const std::size_t k = m.rows();
    if (k != m.cols() || rhs.rows() != k) throw DimensionError("solve_dense_multi: shape mismatch");
    const std::size_t nr = rhs.cols();
    double max_entry = 0.0;
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) max_entry = std::max(max_entry, std::abs(m(i, j)));
    if (max_entry == 0.0) throw SingularMatrixError(std::numeric_limits<double>::infinity());

    for (std::size_t col = 0; col < k; ++col) {
        std::size_t piv = col;
        double best = std::abs(m(col, col));
        for (std::size_t r = col + 1; r < k; ++r)
            if (std::abs(m(r, col)) > best) {
                best = std::abs(m(r, col));
                piv = r;
            }
        if (best < kSolvePivotTol * max_entry)
            throw SingularMatrixError(best > 0.0 ? max_entry / best
                                                 : std::numeric_limits<double>::infinity());
        if (piv != col) {
            for (std::size_t j = 0; j < k; ++j) std::swap(m(col, j), m(piv, j));
            for (std::size_t j = 0; j < nr; ++j) std::swap(rhs(col, j), rhs(piv, j));
        }
        const double inv = 1.0 / m(col, col);
        for (std::size_t r = col + 1; r < k; ++r) {
            const double f = m(r, col) * inv;
            if (f == 0.0) continue;
            m(r, col) = 0.0;
            for (std::size_t j = col + 1; j < k; ++j) m(r, j) -= f * m(col, j);
            for (std::size_t j = 0; j < nr; ++j) rhs(r, j) -= f * rhs(col, j);
        }
    }
    for (std::size_t i = k; i-- > 0;) {
        const double inv = 1.0 / m(i, i);
        for (std::size_t j = 0; j < nr; ++j) {
            double s = rhs(i, j);
            for (std::size_t l = i + 1; l < k; ++l) s -= m(i, l) * rhs(l, j);
            rhs(i, j) = s * inv;
        }
    }
    return rhs;
}

// ------------------------------------------------------------------
// Extreme eigenvalues by cyclic Jacobi on the symmetrized matrix.

inline std::pair<double, double> eig_extremes(const Matrix& m_in) {
    const std::size_t k = m_in.rows();
    if (k != m_in.cols()) throw DimensionError("eig_extremes: matrix not square");
    double scale = 0.0;
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) scale = std::max(scale, std::abs(m_in(i, j)));
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = i + 1; j < k; ++j)
            if (std::abs(m_in(i, j) - m_in(j, i)) > 1e-12 * (1.0 + scale))
                throw NotSymmetricError("eig_extremes: matrix not symmetric");

    Matrix a = m_in;
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = i + 1; j < k; ++j) {
            const double v = 0.5 * (a(i, j) + a(j, i));
            a(i, j) = a(j, i) = v;
        }

    const double tol = 1e-14 * (1.0 + scale);
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = i + 1; j < k; ++j) off = std::max(off, std::abs(a(i, j)));
        if (off <= tol) break;
        for (std::size_t i = 0; i + 1 < k; ++i) {
            for (std::size_t j = i + 1; j < k; ++j) {
                const double apq = a(i, j);
                if (std::abs(apq) <= tol * 1e-2) continue;
                const double app = a(i, i);
                const double aqq = a(j, j);
                const double theta = 0.5 * (aqq - app) / apq;
                const double t = (theta >= 0.0 ? 1.0 : -1.0)
                                 / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t r = 0; r < k; ++r) {
                    const double ari = a(r, i);
                    const double arj = a(r, j);
                    a(r, i) = c * ari - s * arj;
                    a(r, j) = s * ari + c * arj;
                }
                for (std::size_t r = 0; r < k; ++r) {
                    const double air = a(i, r);
                    const double ajr = a(j, r);
                    a(i, r) = c * air - s * ajr;
                    a(j, r) = s * air + c * ajr;
                }
            }
        }
    }
    double lo = a(0, 0);
    double hi = a(0, 0);
    for (std::size_t i = 1; i < k; ++i) {
        lo = std::min(lo, a(i, i));
        hi = std::max(hi, a(i, i));
    }
    return {lo, hi};
}

// ------------------------------------------------------------------
// Householder QR with column pivoting on the n x p design: rank and the
// orthogonal projection of y onto the column span (mu_tilde).

struct QrProjection {
    std::size_t rank = 0;
    Vector projected;  // projection of the supplied vector onto span(X)
};

inline QrProjection project_onto_columns(const Matrix& x, const Vector& y,
                                         double rank_rel_tol = 1e-10) {
    const std::size_t n = x.rows();
    const std::size_t p = x.cols();
    if (y.size() != n) throw DimensionError("project_onto_columns: length mismatch");

    Matrix a = x;
    std::vector<double> col_ss(p, 0.0);
    double frob2 = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
        for (std::size_t i = 0; i < n; ++i) col_ss[j] += a(i, j) * a(i, j);
        frob2 += col_ss[j];
    }
    const double tol = rank_rel_tol * std::sqrt(frob2);

    const std::size_t kmax = std::min(n, p);
    std::vector<Vector> reflectors;
    Vector qy = y;  // y expressed in the reflected basis
    std::vector<std::size_t> perm(p);
    for (std::size_t j = 0; j < p; ++j) perm[j] = j;

    std::size_t rank = 0;
    for (std::size_t step = 0; step < kmax; ++step) {
        std::size_t best = step;
        double best_ss = col_ss[step];
        for (std::size_t j = step + 1; j < p; ++j)
            if (col_ss[j] > best_ss) {
                best_ss = col_ss[j];
                best = j;
            }
        if (std::sqrt(std::max(best_ss, 0.0)) <= tol) break;
        if (best != step) {
            for (std::size_t i = 0; i < n; ++i) std::swap(a(i, step), a(i, best));
            std::swap(col_ss[step], col_ss[best]);
            std::swap(perm[step], perm[best]);
        }
        // Householder vector for column `step` below the diagonal
        double norm_x = 0.0;
        for (std::size_t i = step; i < n; ++i) norm_x += a(i, step) * a(i, step);
        norm_x = std::sqrt(norm_x);
        if (norm_x <= tol) break;
        Vector v(n - step, 0.0);
        const double alpha = a(step, step) >= 0.0 ? -norm_x : norm_x;
        v[0] = a(step, step) - alpha;
        for (std::size_t i = step + 1; i < n; ++i) v[i - step] = a(i, step);
        double vv = 0.0;
        for (double e : v) vv += e * e;
        if (vv == 0.0) break;
        const double inv_vv = 2.0 / vv;
        for (std::size_t j = step; j < p; ++j) {
            double s = 0.0;
            for (std::size_t i = step; i < n; ++i) s += v[i - step] * a(i, j);
            s *= inv_vv;
            for (std::size_t i = step; i < n; ++i) a(i, j) -= s * v[i - step];
        }
        {
            double s = 0.0;
            for (std::size_t i = step; i < n; ++i) s += v[i - step] * qy[i];
            s *= inv_vv;
            for (std::size_t i = step; i < n; ++i) qy[i] -= s * v[i - step];
        }
        for (std::size_t j = step + 1; j < p; ++j)
            col_ss[j] = std::max(0.0, col_ss[j] - a(step, j) * a(step, j));
        reflectors.push_back(std::move(v));
        ++rank;
    }

    // zero the trailing coordinates and reflect back: Q (I_r 0) Q' y
    Vector proj(n, 0.0);
    for (std::size_t i = 0; i < rank; ++i) proj[i] = qy[i];
    for (std::size_t step = rank; step-- > 0;) {
        const Vector& v = reflectors[step];
        double vv = 0.0;
        for (double e : v) vv += e * e;
        const double inv_vv = 2.0 / vv;
        double s = 0.0;
        for (std::size_t i = step; i < n; ++i) s += v[i - step] * proj[i];
        s *= inv_vv;
        for (std::size_t i = step; i < n; ++i) proj[i] -= s * v[i - step];
    }
    return {rank, std::move(proj)};
}

inline std::size_t design_rank(const Matrix& x, double rank_rel_tol = 1e-10) {
    return project_onto_columns(x, Vector(x.rows(), 0.0), rank_rel_tol).rank;
}

} // namespace plus
