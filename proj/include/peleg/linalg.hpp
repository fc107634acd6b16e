#pragma once
// Small dense linear algebra for d up to a few dozen: quadratic forms,
// Cholesky solves, rank-one updates and a Jacobi symmetric eigensolver.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "peleg/errors.hpp"

namespace peleg {

using Vec = std::vector<double>;

/// Square dense matrix, row-major. Used for Gram/design matrices.
class Matrix {
public:
    Matrix() = default;
    explicit Matrix(std::size_t n, double fill = 0.0) : n_(n), a_(n * n, fill) {}

    static Matrix identity(std::size_t n, double scale = 1.0) {
        Matrix m(n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = scale;
        return m;
    }

    static Matrix diagonal(std::span<const double> diag) {
        Matrix m(diag.size());
        for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
        return m;
    }

    std::size_t dim() const noexcept { return n_; }
    double& operator()(std::size_t i, std::size_t j) noexcept { return a_[i * n_ + j]; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return a_[i * n_ + j]; }
    std::span<const double> row(std::size_t i) const noexcept { return {a_.data() + i * n_, n_}; }
    double* data() noexcept { return a_.data(); }
    const double* data() const noexcept { return a_.data(); }

    double trace() const noexcept {
        double s = 0.0;
        for (std::size_t i = 0; i < n_; ++i) s += (*this)(i, i);
        return s;
    }

    void fill(double v) { std::fill(a_.begin(), a_.end(), v); }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t n_ = 0;
    std::vector<double> a_;
};

namespace detail {

inline void check_dims(std::size_t a, std::size_t b, const char* what) {
    if (a != b) {
        throw DimensionError(std::string(what) + ": dimension mismatch (" + std::to_string(a) +
                             " vs " + std::to_string(b) + ")");
    }
}

}  // namespace detail

inline double dot(std::span<const double> x, std::span<const double> y) {
    detail::check_dims(x.size(), y.size(), "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
    return s;
}

inline double squared_norm(std::span<const double> x) noexcept {
    double s = 0.0;
    for (double v : x) s += v * v;
    return s;
}

inline Vec subtract(std::span<const double> x, std::span<const double> y) {
    detail::check_dims(x.size(), y.size(), "subtract");
    Vec out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i];
    return out;
}

inline Vec matvec(const Matrix& A, std::span<const double> x) {
    detail::check_dims(A.dim(), x.size(), "matvec");
    Vec out(x.size(), 0.0);
    for (std::size_t i = 0; i < A.dim(); ++i) {
        const auto r = A.row(i);
        double s = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) s += r[j] * x[j];
        out[i] = s;
    }
    return out;
}

/// xᵀAx.
inline double quad_form(std::span<const double> x, const Matrix& A) {
    detail::check_dims(A.dim(), x.size(), "quad_form");
    const std::size_t n = x.size();
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = A.row(i);
        double ri = 0.0;
        for (std::size_t j = 0; j < n; ++j) ri += r[j] * x[j];
        s += x[i] * ri;
    }
    return s;
}

/// A + scale·xxᵀ, written in place. Symmetric entries receive bitwise-identical
/// increments so symmetry is preserved exactly.
inline void add_outer(Matrix& A, std::span<const double> x, double scale = 1.0) {
    detail::check_dims(A.dim(), x.size(), "rank_one_update");
    const std::size_t n = x.size();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) A(i, j) += scale * (x[i] * x[j]);
}

inline Matrix rank_one_update(Matrix A, std::span<const double> x) {
    add_outer(A, x);
    return A;
}

inline bool is_symmetric(const Matrix& A, double rel_tol = 1e-12) {
    double scale = 0.0;
    for (std::size_t i = 0; i < A.dim(); ++i)
        for (std::size_t j = 0; j < A.dim(); ++j) scale = std::max(scale, std::abs(A(i, j)));
    for (std::size_t i = 0; i < A.dim(); ++i)
        for (std::size_t j = i + 1; j < A.dim(); ++j)
            if (std::abs(A(i, j) - A(j, i)) > rel_tol * scale) return false;
    return true;
}

/// Lower-triangular Cholesky factor A = LLᵀ with a scale-relative pivot test:
/// a pivot below 1e-12·trace(A)/d is reported as singular.
class Cholesky {
public:
    static constexpr double kPivotTolerance = 1e-12;

    Cholesky() = default;
    explicit Cholesky(const Matrix& A) { factor(A); }

    /// Refactors in place, reusing storage. Throws SingularMatrixError.
    void factor(const Matrix& A) {
        if (!try_factor(A)) {
            throw SingularMatrixError("matrix is singular within tolerance (pivot " +
                                      std::to_string(last_pivot_) + ")");
        }
    }

    bool try_factor(const Matrix& A) {
        n_ = A.dim();
        if (L_.size() != n_ * n_) L_.assign(n_ * n_, 0.0);
        const double threshold = kPivotTolerance * std::max(A.trace(), 0.0) / static_cast<double>(n_);
        for (std::size_t j = 0; j < n_; ++j) {
            double pivot = A(j, j);
            double* Lj = L_.data() + j * n_;
            for (std::size_t k = 0; k < j; ++k) pivot -= Lj[k] * Lj[k];
            if (!(pivot > threshold) || !std::isfinite(pivot)) {
                last_pivot_ = pivot;
                valid_ = false;
                return false;
            }
            const double ljj = std::sqrt(pivot);
            Lj[j] = ljj;
            const double inv = 1.0 / ljj;
            for (std::size_t i = j + 1; i < n_; ++i) {
                double* Li = L_.data() + i * n_;
                double s = A(i, j);
                for (std::size_t k = 0; k < j; ++k) s -= Li[k] * Lj[k];
                Li[j] = s * inv;
            }
        }
        valid_ = true;
        return true;
    }

    std::size_t dim() const noexcept { return n_; }
    bool valid() const noexcept { return valid_; }

    /// out = L⁻¹x (forward substitution). ‖out‖² = xᵀA⁻¹x.
    void whiten(std::span<const double> x, std::span<double> out) const {
        detail::check_dims(n_, x.size(), "whiten");
        for (std::size_t i = 0; i < n_; ++i) {
            const double* Li = L_.data() + i * n_;
            double s = x[i];
            for (std::size_t k = 0; k < i; ++k) s -= Li[k] * out[k];
            out[i] = s / Li[i];
        }
    }

    /// Solves Ay = b.
    Vec solve(std::span<const double> b) const {
        Vec y(n_);
        whiten(b, y);
        for (std::size_t ii = n_; ii-- > 0;) {
            double s = y[ii];
            for (std::size_t k = ii + 1; k < n_; ++k) s -= L_[k * n_ + ii] * y[k];
            y[ii] = s / L_[ii * n_ + ii];
        }
        return y;
    }

    double inv_quad(std::span<const double> x) const {
        Vec y(n_);
        whiten(x, y);
        return squared_norm(y);
    }

private:
    std::size_t n_ = 0;
    std::vector<double> L_;
    double last_pivot_ = 0.0;
    bool valid_ = false;
};

/// xᵀA⁻¹x through a Cholesky solve. Throws SingularMatrixError.
inline double inv_quad_form(std::span<const double> x, const Matrix& A) {
    detail::check_dims(A.dim(), x.size(), "inv_quad_form");
    return Cholesky(A).inv_quad(x);
}

struct EigenDecomposition {
    Vec values;     // ascending
    Matrix vectors; // column k is the eigenvector for values[k]
};

/// Cyclic Jacobi rotations. Converges quadratically; fine for d ≤ ~100.
inline EigenDecomposition symmetric_eigen(const Matrix& A) {
    if (!is_symmetric(A)) throw DimensionError("symmetric_eigen: matrix is not symmetric");
    const std::size_t n = A.dim();
    Matrix a = A;
    Matrix v = Matrix::identity(n);
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0, diag = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            diag += a(i, i) * a(i, i);
            for (std::size_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
        }
        if (off <= 1e-30 * std::max(diag, 1e-300)) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return a(i, i) < a(j, j); });
    EigenDecomposition out{Vec(n), Matrix(n)};
    for (std::size_t k = 0; k < n; ++k) {
        out.values[k] = a(order[k], order[k]);
        for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = v(i, order[k]);
    }
    return out;
}

inline double min_eigenvalue(const Matrix& A) { return symmetric_eigen(A).values.front(); }

/// Σ_k xₖxₖᵀ.
inline Matrix gram(std::span<const Vec> xs, std::size_t d) {
    Matrix G(d);
    for (const auto& x : xs) add_outer(G, x);
    return G;
}

}  // namespace peleg
