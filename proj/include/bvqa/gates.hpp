#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <numbers>

namespace bvqa {

using cplx = std::complex<double>;

inline constexpr double pi = std::numbers::pi;

/// Row-major 2x2 complex matrix: m[2*r + c].
using Mat2 = std::array<cplx, 4>;
/// Row-major 4x4 complex matrix: m[4*r + c].
using Mat4 = std::array<cplx, 16>;

namespace gate {

inline const Mat2 kI{1.0, 0.0, 0.0, 1.0};
inline const Mat2 kX{0.0, 1.0, 1.0, 0.0};
inline const Mat2 kY{cplx(0, 0), cplx(0, -1), cplx(0, 1), cplx(0, 0)};
inline const Mat2 kZ{1.0, 0.0, 0.0, -1.0};
inline const Mat2 kH{std::numbers::sqrt2 / 2, std::numbers::sqrt2 / 2,
                     std::numbers::sqrt2 / 2, -std::numbers::sqrt2 / 2};
inline const Mat2 kS{1.0, 0.0, 0.0, cplx(0, 1)};
inline const Mat2 kT{1.0, 0.0, 0.0, std::polar(1.0, pi / 4)};

/// RZ(t) = diag(e^{-it/2}, e^{it/2}).
[[nodiscard]] inline Mat2 rz(double t) {
    return {std::polar(1.0, -t / 2), 0.0, 0.0, std::polar(1.0, t / 2)};
}

/// RX(t) = cos(t/2) I - i sin(t/2) X.
[[nodiscard]] inline Mat2 rx(double t) {
    const double c = std::cos(t / 2), s = std::sin(t / 2);
    return {cplx(c, 0), cplx(0, -s), cplx(0, -s), cplx(c, 0)};
}

/// RY(t) = cos(t/2) I - i sin(t/2) Y.
[[nodiscard]] inline Mat2 ry(double t) {
    const double c = std::cos(t / 2), s = std::sin(t / 2);
    return {cplx(c, 0), cplx(-s, 0), cplx(s, 0), cplx(c, 0)};
}

/// J(t) = H RZ(t), the only single-qubit primitive the delegated server runs.
[[nodiscard]] inline Mat2 j(double t);

/// CX with the first wire of the pair as control.
inline const Mat4 kCX{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 1, 0, 0, 1, 0};
/// CZ (wire-symmetric).
inline const Mat4 kCZ{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, -1};
inline const Mat4 kSWAP{1, 0, 0, 0, 0, 0, 1, 0, 0, 1, 0, 0, 0, 0, 0, 1};

}  // namespace gate

[[nodiscard]] inline Mat2 matmul(const Mat2& a, const Mat2& b) {
    return {a[0] * b[0] + a[1] * b[2], a[0] * b[1] + a[1] * b[3],
            a[2] * b[0] + a[3] * b[2], a[2] * b[1] + a[3] * b[3]};
}

[[nodiscard]] inline Mat4 matmul(const Mat4& a, const Mat4& b) {
    Mat4 out{};
    for (int r = 0; r < 4; ++r) {
        for (int k = 0; k < 4; ++k) {
            const cplx v = a[4 * r + k];
            if (v == cplx{}) continue;
            for (int c = 0; c < 4; ++c) {
                out[4 * r + c] += v * b[4 * k + c];
            }
        }
    }
    return out;
}

[[nodiscard]] inline Mat2 adjoint(const Mat2& a) {
    return {std::conj(a[0]), std::conj(a[2]), std::conj(a[1]), std::conj(a[3])};
}

[[nodiscard]] inline Mat4 adjoint(const Mat4& a) {
    Mat4 out;
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) {
            out[4 * r + c] = std::conj(a[4 * c + r]);
        }
    }
    return out;
}

/// Kronecker product; `a` acts on the first (more significant) wire.
[[nodiscard]] inline Mat4 kron(const Mat2& a, const Mat2& b) {
    Mat4 out;
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) {
            out[4 * r + c] = a[2 * (r >> 1) + (c >> 1)] * b[2 * (r & 1) + (c & 1)];
        }
    }
    return out;
}

[[nodiscard]] inline Mat2 scale(const Mat2& a, cplx s) {
    return {a[0] * s, a[1] * s, a[2] * s, a[3] * s};
}

/// Frobenius distance between matrices after aligning global phase, i.e.
/// min over |c|=1 of max-entry |a - c b|. Zero iff a = b up to global phase.
template <class Mat>
[[nodiscard]] inline double phase_aligned_deviation(const Mat& a, const Mat& b) {
    // Align on the largest entry of b.
    std::size_t pivot = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < b.size(); ++i) {
        if (std::abs(b[i]) > best) {
            best = std::abs(b[i]);
            pivot = i;
        }
    }
    cplx phase{1.0, 0.0};
    if (std::abs(a[pivot]) > 1e-14 && std::abs(b[pivot]) > 1e-14) {
        phase = (a[pivot] / b[pivot]);
        phase /= std::abs(phase);
    }
    double dev = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dev = std::max(dev, std::abs(a[i] - phase * b[i]));
    }
    return dev;
}

template <class Mat>
[[nodiscard]] inline bool is_unitary(const Mat& m, double tol = 1e-10) {
    const Mat prod = matmul(m, adjoint(m));
    const std::size_t dim = (m.size() == 4) ? 2 : 4;
    for (std::size_t r = 0; r < dim; ++r) {
        for (std::size_t c = 0; c < dim; ++c) {
            const cplx want = (r == c) ? cplx{1.0, 0.0} : cplx{};
            if (std::abs(prod[dim * r + c] - want) > tol) return false;
        }
    }
    return true;
}

inline Mat2 gate::j(double t) { return matmul(gate::kH, gate::rz(t)); }

}  // namespace bvqa
