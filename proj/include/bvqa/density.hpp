#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "bvqa/statevector.hpp"

namespace bvqa {

/// Dense dim x dim complex matrix, row-major. Small (dim <= 16 in practice);
/// used for density operators in blindness audits.
class DenseMatrix {
  public:
    DenseMatrix() = default;
    explicit DenseMatrix(std::size_t dim) : dim_(dim), m_(dim * dim) {}

    [[nodiscard]] std::size_t dim() const { return dim_; }
    [[nodiscard]] cplx& at(std::size_t r, std::size_t c) { return m_[r * dim_ + c]; }
    [[nodiscard]] const cplx& at(std::size_t r, std::size_t c) const { return m_[r * dim_ + c]; }

    [[nodiscard]] cplx trace() const {
        cplx t{};
        for (std::size_t i = 0; i < dim_; ++i) t += at(i, i);
        return t;
    }

    [[nodiscard]] double max_hermiticity_defect() const {
        double d = 0.0;
        for (std::size_t r = 0; r < dim_; ++r) {
            for (std::size_t c = 0; c < dim_; ++c) {
                d = std::max(d, std::abs(at(r, c) - std::conj(at(c, r))));
            }
        }
        return d;
    }

    DenseMatrix& operator-=(const DenseMatrix& o) {
        if (o.dim_ != dim_) throw std::invalid_argument("DenseMatrix: dim mismatch");
        for (std::size_t i = 0; i < m_.size(); ++i) m_[i] -= o.m_[i];
        return *this;
    }

  private:
    std::size_t dim_ = 0;
    std::vector<cplx> m_;
};

/// Eigenvalues of a Hermitian matrix by cyclic Jacobi rotations. Adequate for
/// the tiny matrices this library handles; quadratically convergent.
[[nodiscard]] inline std::vector<double> hermitian_eigenvalues(DenseMatrix a,
                                                               double tol = 1e-14) {
    const std::size_t n = a.dim();
    if (a.max_hermiticity_defect() > 1e-9) {
        throw std::invalid_argument("hermitian_eigenvalues: matrix not Hermitian");
    }
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                off += std::norm(a.at(p, q));
            }
        }
        if (off < tol * tol) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const cplx z = a.at(p, q);
                const double az = std::abs(z);
                if (az < 1e-300) continue;
                const double app = std::real(a.at(p, p));
                const double aqq = std::real(a.at(q, q));
                const double theta = (aqq - app) / (2.0 * az);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const cplx s = (t * c) * (z / az);
                // Columns: [p q] <- [p q] * [[c, s],[-conj(s), c]].
                for (std::size_t r = 0; r < n; ++r) {
                    const cplx vp = a.at(r, p), vq = a.at(r, q);
                    a.at(r, p) = c * vp - std::conj(s) * vq;
                    a.at(r, q) = s * vp + c * vq;
                }
                // Rows: conjugate-transpose update.
                for (std::size_t col = 0; col < n; ++col) {
                    const cplx vp = a.at(p, col), vq = a.at(q, col);
                    a.at(p, col) = c * vp - s * vq;
                    a.at(q, col) = std::conj(s) * vp + c * vq;
                }
            }
        }
    }
    std::vector<double> ev(n);
    for (std::size_t i = 0; i < n; ++i) ev[i] = std::real(a.at(i, i));
    return ev;
}

/// Trace distance (1/2) ||a - b||_1 via eigenvalues of the Hermitian
/// difference.
[[nodiscard]] inline double trace_distance(const DenseMatrix& a, const DenseMatrix& b) {
    DenseMatrix d = a;
    d -= b;
    double td = 0.0;
    for (double ev : hermitian_eigenvalues(std::move(d))) {
        td += std::abs(ev);
    }
    return td / 2.0;
}

/// Reduced density matrix of a single wire (partial trace over the rest).
[[nodiscard]] inline DenseMatrix reduced_density(const Statevector& s, int wire) {
    DenseMatrix rho(2);
    const std::size_t str = s.stride(wire);
    const auto& a = s.amplitudes();
    const std::size_t size = a.size();
    for (std::size_t base = 0; base < size; base += 2 * str) {
        for (std::size_t i = base; i < base + str; ++i) {
            rho.at(0, 0) += a[i] * std::conj(a[i]);
            rho.at(0, 1) += a[i] * std::conj(a[i + str]);
            rho.at(1, 0) += a[i + str] * std::conj(a[i]);
            rho.at(1, 1) += a[i + str] * std::conj(a[i + str]);
        }
    }
    return rho;
}

/// Weighted average of projectors |psi><psi|. Weights must sum to 1 at
/// finalize; the result is then Hermitian with unit trace by construction.
class DensityAccumulator {
  public:
    explicit DensityAccumulator(std::size_t dim) : rho_(dim) {}

    [[nodiscard]] std::size_t dim() const { return rho_.dim(); }
    [[nodiscard]] double weight_sum() const { return weight_sum_; }
    [[nodiscard]] std::size_t samples() const { return samples_; }

    /// rho += weight |state><state|.
    void accumulate(const Statevector& state, double weight) {
        if (state.size() != rho_.dim()) {
            throw std::invalid_argument("DensityAccumulator: dimension mismatch");
        }
        const auto& a = state.amplitudes();
        for (std::size_t r = 0; r < rho_.dim(); ++r) {
            for (std::size_t c = 0; c < rho_.dim(); ++c) {
                rho_.at(r, c) += weight * a[r] * std::conj(a[c]);
            }
        }
        weight_sum_ += weight;
        ++samples_;
    }

    /// rho += weight * m for an already-reduced density term.
    void accumulate(const DenseMatrix& m, double weight) {
        if (m.dim() != rho_.dim()) {
            throw std::invalid_argument("DensityAccumulator: dimension mismatch");
        }
        for (std::size_t r = 0; r < rho_.dim(); ++r) {
            for (std::size_t c = 0; c < rho_.dim(); ++c) {
                rho_.at(r, c) += weight * m.at(r, c);
            }
        }
        weight_sum_ += weight;
        ++samples_;
    }

    /// Validates the invariants and returns the averaged density matrix.
    [[nodiscard]] const DenseMatrix& finalize() const {
        if (std::abs(weight_sum_ - 1.0) > 1e-10) {
            throw std::runtime_error("DensityAccumulator: weights do not sum to 1");
        }
        if (rho_.max_hermiticity_defect() > 1e-10 ||
            std::abs(rho_.trace() - cplx{1.0, 0.0}) > 1e-10) {
            throw std::runtime_error("DensityAccumulator: result not a density matrix");
        }
        return rho_;
    }

  private:
    DenseMatrix rho_;
    double weight_sum_ = 0.0;
    std::size_t samples_ = 0;
};

/// I/dim as a DenseMatrix; the blindness target.
[[nodiscard]] inline DenseMatrix maximally_mixed(std::size_t dim) {
    DenseMatrix m(dim);
    for (std::size_t i = 0; i < dim; ++i) m.at(i, i) = 1.0 / static_cast<double>(dim);
    return m;
}

}  // namespace bvqa
