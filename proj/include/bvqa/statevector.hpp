#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "bvqa/gates.hpp"
#include "bvqa/rng.hpp"

namespace bvqa {

/// Dense n-qubit state. Wire 0 is the MOST significant bit of the amplitude
/// index: |w0 w1 ... w_{n-1}>. Appending a qubit adds wire n (least
/// significant bit). All mutating operations preserve the L2 norm.
class Statevector {
  public:
    Statevector() = default;

    /// |0...0> on n wires.
    explicit Statevector(int n) : n_(checked_wires(n)), amps_(std::size_t{1} << n) {
        amps_[0] = 1.0;
    }

    static Statevector from_amplitudes(int n, std::vector<cplx> amps) {
        if (amps.size() != (std::size_t{1} << n)) {
            throw std::invalid_argument("Statevector: amplitude count mismatch");
        }
        Statevector s;
        s.n_ = n;
        s.amps_ = std::move(amps);
        return s;
    }

    [[nodiscard]] int wires() const { return n_; }
    [[nodiscard]] std::size_t size() const { return amps_.size(); }
    [[nodiscard]] const std::vector<cplx>& amplitudes() const { return amps_; }
    [[nodiscard]] cplx amplitude(std::size_t i) const { return amps_[i]; }

    /// Bit position of `wire` inside an amplitude index.
    [[nodiscard]] std::size_t stride(int wire) const {
        assert(wire >= 0 && wire < n_);
        return std::size_t{1} << (n_ - 1 - wire);
    }

    [[nodiscard]] double norm() const {
        double s = 0.0;
        for (const cplx& a : amps_) s += std::norm(a);
        return std::sqrt(s);
    }

    void normalize() {
        const double nm = norm();
        if (nm < 1e-300) throw std::runtime_error("Statevector: zero norm");
        const double inv = 1.0 / nm;
        for (cplx& a : amps_) a *= inv;
    }

    /// Reserves room for `extra` additional wires (avoids reallocation churn
    /// in the gadget loop).
    void reserve_wires(int extra) { amps_.reserve(std::size_t{1} << (n_ + extra)); }

    /// Appends a fresh wire (index n) in state amp0|0> + amp1|1>.
    void append_qubit(cplx amp0, cplx amp1) {
        const std::size_t old = amps_.size();
        amps_.resize(old * 2);
        for (std::size_t i = old; i-- > 0;) {
            const cplx a = amps_[i];
            amps_[2 * i] = a * amp0;
            amps_[2 * i + 1] = a * amp1;
        }
        ++n_;
    }

    std::vector<cplx>& raw() { return amps_; }

  private:
    static int checked_wires(int n) {
        if (n < 0 || n > 28) throw std::invalid_argument("Statevector: bad wire count");
        return n;
    }

    int n_ = 0;
    std::vector<cplx> amps_;
};

/// Measurement basis: computational Z, or the angular family M(phi) with
/// basis states (|0> + e^{i phi}|1>)/sqrt(2) ("+", outcome 0) and
/// (|0> - e^{i phi}|1>)/sqrt(2) ("-", outcome 1). X is exactly M(0).
struct MeasBasis {
    enum class Kind { Z, Angular };
    Kind kind = Kind::Z;
    double phi = 0.0;

    static MeasBasis z() { return {Kind::Z, 0.0}; }
    static MeasBasis m(double phi) { return {Kind::Angular, phi}; }
    static MeasBasis x() { return m(0.0); }
};

inline void apply_1q(Statevector& s, const Mat2& m, int wire) {
    const std::size_t str = s.stride(wire);
    auto& a = s.raw();
    const std::size_t size = a.size();
    for (std::size_t base = 0; base < size; base += 2 * str) {
        for (std::size_t i = base; i < base + str; ++i) {
            const cplx a0 = a[i], a1 = a[i + str];
            a[i] = m[0] * a0 + m[1] * a1;
            a[i + str] = m[2] * a0 + m[3] * a1;
        }
    }
}

inline void apply_h(Statevector& s, int wire) {
    constexpr double inv_sqrt2 = std::numbers::sqrt2 / 2;
    const std::size_t str = s.stride(wire);
    auto& a = s.raw();
    const std::size_t size = a.size();
    for (std::size_t base = 0; base < size; base += 2 * str) {
        for (std::size_t i = base; i < base + str; ++i) {
            const cplx a0 = a[i], a1 = a[i + str];
            a[i] = (a0 + a1) * inv_sqrt2;
            a[i + str] = (a0 - a1) * inv_sqrt2;
        }
    }
}

inline void apply_x(Statevector& s, int wire) {
    const std::size_t str = s.stride(wire);
    auto& a = s.raw();
    const std::size_t size = a.size();
    for (std::size_t base = 0; base < size; base += 2 * str) {
        for (std::size_t i = base; i < base + str; ++i) {
            std::swap(a[i], a[i + str]);
        }
    }
}

inline void apply_z(Statevector& s, int wire) {
    const std::size_t str = s.stride(wire);
    auto& a = s.raw();
    const std::size_t size = a.size();
    for (std::size_t base = str; base < size; base += 2 * str) {
        for (std::size_t i = base; i < base + str; ++i) {
            a[i] = -a[i];
        }
    }
}

/// Generic two-qubit gate; `m` is in the (wire_a, wire_b) = (MSB, LSB) order.
inline void apply_2q(Statevector& s, const Mat4& m, int wire_a, int wire_b) {
    if (wire_a == wire_b) throw std::invalid_argument("apply_2q: equal wires");
    const std::size_t sa = s.stride(wire_a), sb = s.stride(wire_b);
    auto& a = s.raw();
    const std::size_t size = a.size();
    const std::size_t mask = sa | sb;
    for (std::size_t i = 0; i < size; ++i) {
        if (i & mask) continue;
        const std::size_t i00 = i, i01 = i | sb, i10 = i | sa, i11 = i | mask;
        const cplx v00 = a[i00], v01 = a[i01], v10 = a[i10], v11 = a[i11];
        a[i00] = m[0] * v00 + m[1] * v01 + m[2] * v10 + m[3] * v11;
        a[i01] = m[4] * v00 + m[5] * v01 + m[6] * v10 + m[7] * v11;
        a[i10] = m[8] * v00 + m[9] * v01 + m[10] * v10 + m[11] * v11;
        a[i11] = m[12] * v00 + m[13] * v01 + m[14] * v10 + m[15] * v11;
    }
}

inline void apply_cx(Statevector& s, int control, int target) {
    if (control == target) throw std::invalid_argument("apply_cx: equal wires");
    const std::size_t sc = s.stride(control), st = s.stride(target);
    auto& a = s.raw();
    const std::size_t size = a.size();
    for (std::size_t i = 0; i < size; ++i) {
        // Visit each swapped pair once: control bit set, target bit clear.
        if ((i & sc) && !(i & st)) {
            std::swap(a[i], a[i | st]);
        }
    }
}

inline void apply_cz(Statevector& s, int wire_a, int wire_b) {
    if (wire_a == wire_b) throw std::invalid_argument("apply_cz: equal wires");
    const std::size_t mask = s.stride(wire_a) | s.stride(wire_b);
    auto& a = s.raw();
    const std::size_t size = a.size();
    for (std::size_t i = 0; i < size; ++i) {
        if ((i & mask) == mask) a[i] = -a[i];
    }
}

/// Probability of outcome 0 on `wire` in `basis`.
[[nodiscard]] inline double outcome0_probability(const Statevector& s, int wire,
                                                 const MeasBasis& basis) {
    const std::size_t str = s.stride(wire);
    const auto& a = s.amplitudes();
    const std::size_t size = a.size();
    double p = 0.0;
    if (basis.kind == MeasBasis::Kind::Z) {
        for (std::size_t base = 0; base < size; base += 2 * str) {
            for (std::size_t i = base; i < base + str; ++i) {
                p += std::norm(a[i]);
            }
        }
    } else {
        const cplx w = std::polar(1.0, -basis.phi);  // <u+| picks conj(e^{i phi}).
        for (std::size_t base = 0; base < size; base += 2 * str) {
            for (std::size_t i = base; i < base + str; ++i) {
                p += 0.5 * std::norm(a[i] + w * a[i + str]);
            }
        }
    }
    return p;
}

namespace detail {
/// Collapses `wire` onto the branch `outcome` of `basis` in place and
/// renormalizes. `branch_p` is the precomputed Born probability.
inline void collapse(Statevector& s, int wire, const MeasBasis& basis, int outcome,
                     double branch_p) {
    if (branch_p < 1e-300) throw std::runtime_error("collapse: zero-probability branch");
    const std::size_t str = s.stride(wire);
    auto& a = s.raw();
    const std::size_t size = a.size();
    const double inv = 1.0 / std::sqrt(branch_p);
    if (basis.kind == MeasBasis::Kind::Z) {
        for (std::size_t base = 0; base < size; base += 2 * str) {
            for (std::size_t i = base; i < base + str; ++i) {
                const std::size_t keep = outcome ? i + str : i;
                const std::size_t kill = outcome ? i : i + str;
                a[keep] *= inv;
                a[kill] = 0.0;
            }
        }
    } else {
        // Post state on the wire is u_pm = (|0> + s e^{i phi}|1>)/sqrt(2).
        const double sign = outcome ? -1.0 : 1.0;
        const cplx wconj = std::polar(1.0, -basis.phi) * sign;
        const cplx wfwd = std::polar(1.0, basis.phi) * sign;
        constexpr double inv_sqrt2 = std::numbers::sqrt2 / 2;
        for (std::size_t base = 0; base < size; base += 2 * str) {
            for (std::size_t i = base; i < base + str; ++i) {
                const cplx c = (a[i] + wconj * a[i + str]) * inv_sqrt2 * inv;
                a[i] = c * inv_sqrt2;
                a[i + str] = c * wfwd * inv_sqrt2;
            }
        }
    }
}
}  // namespace detail

/// Born-rule measurement of `wire` in `basis`; collapses in place and returns
/// the outcome (0 is the "+" branch of M(phi), or |0> for Z).
inline int measure(Statevector& s, int wire, const MeasBasis& basis, Rng& rng) {
    const double p0 = outcome0_probability(s, wire, basis);
    const int outcome = rng.uniform() < p0 ? 0 : 1;
    detail::collapse(s, wire, basis, outcome, outcome ? 1.0 - p0 : p0);
    return outcome;
}

/// Forces the measurement of `wire` onto `outcome`; collapses in place and
/// returns the Born probability of that branch. Used by branch-enumeration
/// oracles and validation sweeps.
inline double measure_forced(Statevector& s, int wire, const MeasBasis& basis, int outcome) {
    const double p0 = outcome0_probability(s, wire, basis);
    const double p = outcome ? 1.0 - p0 : p0;
    detail::collapse(s, wire, basis, outcome, p);
    return p;
}

/// Removes `wire`, which must be unentangled and in the known collapsed
/// branch `outcome` of `basis` (the state right after a measurement).
inline void remove_measured_wire(Statevector& s, int wire, const MeasBasis& basis,
                                 int outcome) {
    const std::size_t str = s.stride(wire);
    auto& a = s.raw();
    const std::size_t size = a.size();
    std::size_t out = 0;
    if (basis.kind == MeasBasis::Kind::Z) {
        const std::size_t off = outcome ? str : 0;
        for (std::size_t base = 0; base < size; base += 2 * str) {
            for (std::size_t i = base; i < base + str; ++i) {
                a[out++] = a[i + off];
            }
        }
    } else {
        // Contract with <u_pm|: sqrt(2)-normalized inner product of the pair.
        const double sign = outcome ? -1.0 : 1.0;
        const cplx wconj = std::polar(1.0, -basis.phi) * sign;
        constexpr double inv_sqrt2 = std::numbers::sqrt2 / 2;
        for (std::size_t base = 0; base < size; base += 2 * str) {
            for (std::size_t i = base; i < base + str; ++i) {
                a[out++] = (a[i] + wconj * a[i + str]) * inv_sqrt2;
            }
        }
    }
    a.resize(size / 2);
    s = Statevector::from_amplitudes(s.wires() - 1, std::move(a));
}

/// Measures `wire` and removes it from the register in one step.
inline int measure_remove(Statevector& s, int wire, const MeasBasis& basis, Rng& rng) {
    const int outcome = measure(s, wire, basis, rng);
    remove_measured_wire(s, wire, basis, outcome);
    return outcome;
}

/// <Z> or <X> on `wire`. Z uses populations; X uses coherences (equals the
/// Z expectation after an extra H on the wire).
[[nodiscard]] inline double expectation(const Statevector& s, int wire, char pauli) {
    const std::size_t str = s.stride(wire);
    const auto& a = s.amplitudes();
    const std::size_t size = a.size();
    double e = 0.0;
    if (pauli == 'Z') {
        for (std::size_t base = 0; base < size; base += 2 * str) {
            for (std::size_t i = base; i < base + str; ++i) {
                e += std::norm(a[i]) - std::norm(a[i + str]);
            }
        }
    } else if (pauli == 'X') {
        for (std::size_t base = 0; base < size; base += 2 * str) {
            for (std::size_t i = base; i < base + str; ++i) {
                e += 2.0 * std::real(std::conj(a[i]) * a[i + str]);
            }
        }
    } else {
        throw std::invalid_argument("expectation: observable must be Z or X");
    }
    return e;
}

/// |<a|b>|^2. States must have equal wire counts.
[[nodiscard]] inline double fidelity(const Statevector& a, const Statevector& b) {
    if (a.wires() != b.wires()) throw std::invalid_argument("fidelity: wire mismatch");
    cplx ov{};
    for (std::size_t i = 0; i < a.size(); ++i) {
        ov += std::conj(a.amplitude(i)) * b.amplitude(i);
    }
    return std::norm(ov);
}

/// Samples a full Z-basis readout of every wire without collapsing `s`.
/// Returns one bit per wire (wire 0 first).
[[nodiscard]] inline std::vector<int> sample_all_z(const Statevector& s, Rng& rng) {
    const auto& a = s.amplitudes();
    double u = rng.uniform();
    std::size_t idx = a.size() - 1;
    for (std::size_t i = 0; i < a.size(); ++i) {
        u -= std::norm(a[i]);
        if (u < 0.0) {
            idx = i;
            break;
        }
    }
    std::vector<int> bits(s.wires());
    for (int w = 0; w < s.wires(); ++w) {
        bits[w] = (idx >> (s.wires() - 1 - w)) & 1;
    }
    return bits;
}

}  // namespace bvqa
