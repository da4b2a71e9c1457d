#pragma once

#include <cstdint>
#include <vector>

#include "bvqa/angle.hpp"
#include "bvqa/errors.hpp"
#include "bvqa/statevector.hpp"

namespace bvqa {

/// Client-side secrets of one J gadget. k and r are drawn fresh per gadget;
/// s0 is the client's Bell-measurement outcome and completes the one-time
/// pad. None of these ever crosses the channel.
struct GadgetSecrets {
    int k = 0;   // Pre-rotation index, angle k * pi/4.
    int r = 0;   // Final-measurement flip bit.
    int s0 = 0;  // Client Bell-measurement outcome.

    static GadgetSecrets draw(Rng& rng) {
        GadgetSecrets s;
        s.k = static_cast<int>(rng.below(8));
        s.r = rng.bit();
        return s;
    }
};

/// Server-visible outcomes of one J gadget plus the client-computed X
/// byproduct (s3 XOR r) that feeds the Pauli frame.
struct GadgetOutcome {
    int s1 = 0;
    int s2 = 0;
    int s3 = 0;
    int byproduct_x = 0;
};

/// (|00> + |11>)/sqrt(2); wire 0 is the half the client measures.
[[nodiscard]] inline Statevector make_bell_pair() {
    constexpr double inv_sqrt2 = std::numbers::sqrt2 / 2;
    return Statevector::from_amplitudes(2, {inv_sqrt2, 0.0, 0.0, inv_sqrt2});
}

/// Amplitudes of Z^{s0} RZ(k pi/4)|+> = (|0> + e^{i(k/4 + s0) pi}|1>)/sqrt(2),
/// the state the server's Bell half holds after the client measures.
[[nodiscard]] inline std::pair<cplx, cplx> ancilla_a1_amplitudes(int k, int s0) {
    constexpr double inv_sqrt2 = std::numbers::sqrt2 / 2;
    const double arg = (k / 4.0 + s0) * pi;
    return {cplx{inv_sqrt2, 0.0}, std::polar(inv_sqrt2, arg)};
}

struct BellMeasurement {
    int s0 = 0;
    Statevector remote;  // Single-qubit state left on the server side.
};

/// Client measures its Bell half (wire 0 of `bell`) in M(-k pi/4). The
/// remaining wire collapses to Z^{s0} RZ(k pi/4)|+>.
[[nodiscard]] inline BellMeasurement client_bell_measure(Statevector bell, int k, Rng& rng) {
    if (bell.wires() != 2) throw std::invalid_argument("client_bell_measure: need 2 wires");
    const MeasBasis basis = MeasBasis::m(-k * pi / 4.0);
    BellMeasurement out;
    out.s0 = measure_remove(bell, 0, basis, rng);
    out.remote = std::move(bell);
    return out;
}

/// Forced-branch variant for enumeration oracles; returns branch probability.
[[nodiscard]] inline std::pair<double, Statevector> client_bell_measure_forced(
    Statevector bell, int k, int s0) {
    const MeasBasis basis = MeasBasis::m(-k * pi / 4.0);
    const double p = measure_forced(bell, 0, basis, s0);
    remove_measured_wire(bell, 0, basis, s0);
    return {p, std::move(bell)};
}

/// Encrypted measurement angle
///   phi' = -phi + (-1)^{s1} (k/4 + s0) pi + r pi   (mod 2 pi).
/// Grid angles stay exact: in pi/4 units the update is
///   g' = -g + (-1)^{s1} (k + 4 s0) + 4 r  (mod 8).
[[nodiscard]] inline Angle encrypted_angle(const Angle& phi, int s1,
                                           const GadgetSecrets& sec) {
    const int pad = (s1 ? -1 : 1) * (sec.k + 4 * sec.s0) + 4 * sec.r;
    if (phi.on_grid()) {
        return Angle::grid(-phi.grid_index() + pad);
    }
    const double raw = -phi.rad() + pad * (pi / 4.0);
    return Angle::radians(Angle::radians(raw).rad_mod_2pi());
}

/// Pauli byproduct frame, one (x, z) bit pair per register wire. The server
/// never holds these; the client uses them to adapt angles and to correct the
/// final readout.
struct PauliFrame {
    std::vector<std::uint8_t> x, z;

    explicit PauliFrame(int wires = 0) : x(wires, 0), z(wires, 0) {}

    /// J consumes the X byproduct into its angle and hands back
    /// (x, z) -> (z XOR new_x, x): H swaps the Pauli species.
    void after_j(int wire, int new_x) {
        const std::uint8_t old_x = x[wire];
        x[wire] = static_cast<std::uint8_t>(z[wire] ^ new_x);
        z[wire] = old_x;
    }

    /// CZ copies each X byproduct onto the partner's Z: CZ(X ox I)CZ = X ox Z.
    void after_cz(int a, int b) {
        z[a] = static_cast<std::uint8_t>(z[a] ^ x[b]);
        z[b] = static_cast<std::uint8_t>(z[b] ^ x[a]);
    }
};

/// Angle the client actually requests for a J on `wire`: the accumulated X
/// byproduct flips the sign of the target angle.
[[nodiscard]] inline Angle adaptive_angle(const PauliFrame& frame, int wire,
                                          const Angle& target) {
    return frame.x[wire] ? target.negated() : target;
}

/// Bernoulli-loss channel with unbounded retransmission (capped only by
/// `max_attempts` as a runaway guard). Counters aggregate across a run.
struct LossyChannel {
    double p_loss = 0.0;
    std::uint64_t max_attempts = 1'000'000;
    std::uint64_t sent = 0;     // Total transmission attempts.
    std::uint64_t lost = 0;     // Attempts flagged lost.
    std::uint64_t resends = 0;  // Attempts beyond the first, per payload.

    /// Per-attempt delivery status of one payload: 0 = delivered, 1 = lost.
    /// The final entry is always 0.
    std::vector<int> transmit(Rng& rng) {
        std::vector<int> statuses;
        for (std::uint64_t attempt = 1;; ++attempt) {
            if (attempt > max_attempts) {
                throw channel_fault("transmit: retransmission cap exceeded");
            }
            ++sent;
            if (rng.bernoulli(p_loss)) {
                ++lost;
                ++resends;
                statuses.push_back(1);
                continue;
            }
            statuses.push_back(0);
            return statuses;
        }
    }
};

/// Server half of the gadget, phase 1: couple and consume A1 (the delivered
/// Bell half) and A2 = |+>, reporting s1 and s2. The ancillas are appended,
/// entangled through CX + H on the register wire, measured in Z, and removed.
/// Each ancilla is appended only when its coupling starts; operations on
/// disjoint tensor factors commute, so this matches preparing all ancillas
/// up front.
[[nodiscard]] inline std::pair<int, int> j_gadget_couple(Statevector& reg, int wire,
                                                         cplx a1_0, cplx a1_1, Rng& rng) {
    reg.append_qubit(a1_0, a1_1);
    int anc = reg.wires() - 1;
    apply_cx(reg, wire, anc);
    apply_h(reg, wire);
    const int s1 = measure_remove(reg, anc, MeasBasis::z(), rng);

    constexpr double inv_sqrt2 = std::numbers::sqrt2 / 2;
    reg.append_qubit(inv_sqrt2, inv_sqrt2);
    anc = reg.wires() - 1;
    apply_cx(reg, wire, anc);
    apply_h(reg, wire);
    const int s2 = measure_remove(reg, anc, MeasBasis::z(), rng);
    return {s1, s2};
}

/// Server half of the gadget, phase 2: couple and consume A3 = |0>, measured
/// in M(phi') once the client has released the encrypted angle.
[[nodiscard]] inline int j_gadget_finish(Statevector& reg, int wire, double phi_prime,
                                         Rng& rng) {
    reg.append_qubit(1.0, 0.0);
    const int anc = reg.wires() - 1;
    apply_cx(reg, wire, anc);
    apply_h(reg, wire);
    return measure_remove(reg, anc, MeasBasis::m(phi_prime), rng);
}

/// Forced-branch gadget for oracles: runs the full sequence with every
/// outcome pinned, phi' derived from the forced s1. Returns the joint branch
/// probability (1/16 for any branch).
inline double j_gadget_forced(Statevector& reg, int wire, const Angle& target_phi,
                              const GadgetSecrets& sec, int s1, int s2, int s3) {
    double p = 1.0;
    const auto [a1_0, a1_1] = ancilla_a1_amplitudes(sec.k, sec.s0);

    reg.append_qubit(a1_0, a1_1);
    int anc = reg.wires() - 1;
    apply_cx(reg, wire, anc);
    apply_h(reg, wire);
    p *= measure_forced(reg, anc, MeasBasis::z(), s1);
    remove_measured_wire(reg, anc, MeasBasis::z(), s1);

    constexpr double inv_sqrt2 = std::numbers::sqrt2 / 2;
    reg.append_qubit(inv_sqrt2, inv_sqrt2);
    anc = reg.wires() - 1;
    apply_cx(reg, wire, anc);
    apply_h(reg, wire);
    p *= measure_forced(reg, anc, MeasBasis::z(), s2);
    remove_measured_wire(reg, anc, MeasBasis::z(), s2);

    const Angle phi_prime = encrypted_angle(target_phi, s1, sec);
    reg.append_qubit(1.0, 0.0);
    anc = reg.wires() - 1;
    apply_cx(reg, wire, anc);
    apply_h(reg, wire);
    const MeasBasis m3 = MeasBasis::m(phi_prime.rad());
    p *= measure_forced(reg, anc, m3, s3);
    remove_measured_wire(reg, anc, m3, s3);
    return p;
}

/// Complete sampled gadget on a local register: client Bell measurement,
/// server coupling rounds, encrypted-angle release, final measurement.
/// After this call the register wire holds X^{s3 XOR r} H RZ(phi)|psi> up to
/// global phase, with phi the (already frame-adapted) target angle.
inline GadgetOutcome run_j_gadget(Statevector& reg, int wire, const Angle& target_phi,
                                  GadgetSecrets& sec, Rng& rng) {
    BellMeasurement bell = client_bell_measure(make_bell_pair(), sec.k, rng);
    sec.s0 = bell.s0;
    GadgetOutcome out;
    std::tie(out.s1, out.s2) =
        j_gadget_couple(reg, wire, bell.remote.amplitude(0), bell.remote.amplitude(1), rng);
    const Angle phi_prime = encrypted_angle(target_phi, out.s1, sec);
    out.s3 = j_gadget_finish(reg, wire, phi_prime.rad(), rng);
    out.byproduct_x = out.s3 ^ sec.r;
    return out;
}

}  // namespace bvqa
