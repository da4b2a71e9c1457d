#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "bvqa/angle.hpp"
#include "bvqa/errors.hpp"
#include "bvqa/gadget.hpp"
#include "bvqa/gates.hpp"
#include "bvqa/rng.hpp"
#include "bvqa/statevector.hpp"

namespace bvqa {

/// ZXZ decomposition of H*U: e^{i phase} RZ(phi1) RX(phi2) RZ(phi3) = H*U,
/// equivalently U = e^{i phase} J(phi1) J(phi2) J(phi3).
struct EulerZXZ {
    double phi1 = 0.0;
    double phi2 = 0.0;
    double phi3 = 0.0;
    double phase = 0.0;
};

[[nodiscard]] inline EulerZXZ euler_zxz(const Mat2& u) {
    if (!is_unitary(u, 1e-12)) throw std::invalid_argument("euler_zxz: input not unitary");
    const Mat2 v = matmul(gate::kH, u);
    // Rescale to SU(2); the discarded factor is folded into `phase`.
    const cplx root = std::sqrt(v[0] * v[3] - v[1] * v[2]);
    const cplx v00 = v[0] / root, v01 = v[1] / root;

    EulerZXZ e;
    const double c = std::abs(v00), s = std::abs(v01);
    e.phi2 = 2.0 * std::atan2(s, c);
    constexpr double eps = 1e-9;
    if (s < eps) {
        e.phi3 = 0.0;  // Gimbal lock: only phi1 + phi3 is determined.
        e.phi1 = -2.0 * std::arg(v00);
    } else if (c < eps) {
        e.phi3 = 0.0;  // Only phi1 - phi3 is determined.
        e.phi1 = -2.0 * (std::arg(v01) + pi / 2.0);
    } else {
        const double sum = -2.0 * std::arg(v00);
        const double diff = -2.0 * (std::arg(v01) + pi / 2.0);
        e.phi1 = (sum + diff) / 2.0;
        e.phi3 = (sum - diff) / 2.0;
    }

    const Mat2 r = matmul(gate::rz(e.phi1), matmul(gate::rx(e.phi2), gate::rz(e.phi3)));
    int m = 0;
    for (int i = 1; i < 4; ++i) {
        if (std::abs(r[i]) > std::abs(r[m])) m = i;
    }
    e.phase = std::arg(v[m] * std::conj(r[m]));
    return e;
}

/// One two-wire block: four J slots per wire (time order), with a CZ after
/// slot 2 and another after slot 4. phi[0..3] belong to the top (even) wire,
/// phi[4..7] to the bottom wire.
struct Brick {
    std::array<Angle, 8> phi{};

    [[nodiscard]] const Angle& top(int slot) const { return phi[slot]; }
    [[nodiscard]] const Angle& bottom(int slot) const { return phi[4 + slot]; }

    /// Exchange the two wires' angle vectors (the layout is wire-symmetric).
    [[nodiscard]] Brick flipped() const {
        Brick b;
        for (int i = 0; i < 4; ++i) {
            b.phi[i] = phi[4 + i];
            b.phi[4 + i] = phi[i];
        }
        return b;
    }
};

inline constexpr int kBrickSlots = 4;  // J slots per wire; CZs follow slots 2 and 4.

using WireSlots = std::array<Angle, 4>;

[[nodiscard]] inline WireSlots identity_slots() { return {}; }

/// Slots realizing H on one wire: RZ(pi/2) RX(pi/2) RZ(pi/2) = e^{-i pi/2} H.
[[nodiscard]] inline WireSlots h_slots() {
    return {Angle::grid(2), Angle::grid(2), Angle::grid(2), Angle::grid(0)};
}

[[nodiscard]] inline Brick brick_from_slots(const WireSlots& top, const WireSlots& bottom) {
    Brick b;
    for (int i = 0; i < 4; ++i) {
        b.phi[i] = top[i];
        b.phi[4 + i] = bottom[i];
    }
    return b;
}

[[nodiscard]] inline Brick brick_identity() { return Brick{}; }

/// Net unitary by direct matrix product (top wire = more significant):
/// CZ * S4 * S3 * CZ * S2 * S1 with Si = J(top_i) kron J(bottom_i).
[[nodiscard]] inline Mat4 brick_unitary(const Brick& b) {
    Mat4 m{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1};
    for (int slot = 0; slot < kBrickSlots; ++slot) {
        m = matmul(kron(gate::j(b.top(slot).rad()), gate::j(b.bottom(slot).rad())), m);
        if (slot == 1 || slot == 3) m = matmul(gate::kCZ, m);
    }
    return m;
}

/// Brick realizing U1 (x) U2: per-wire slots (phi3, phi2, phi1, 0) from the
/// ZXZ decomposition U = RZ(phi1) RX(phi2) RZ(phi3) up to phase. With both
/// slot-4 angles zero the two internal CZs cancel, so the brick factorizes
/// exactly.
[[nodiscard]] inline Brick brick_single_pair(const Mat2& u1, const Mat2& u2) {
    const auto slots = [](const Mat2& u) -> WireSlots {
        const EulerZXZ e = euler_zxz(matmul(gate::kH, u));
        return {Angle::snapped(e.phi3), Angle::snapped(e.phi2), Angle::snapped(e.phi1),
                Angle::grid(0)};
    };
    return brick_from_slots(slots(u1), slots(u2));
}

/// Brick realizing CX exactly (up to global phase e^{-i pi/4}): control slots
/// (0, 0, pi/2, 0) and target slots (0, pi/2, 0, -pi/2). top_control selects
/// which wire is the control.
[[nodiscard]] inline Brick brick_cx(bool top_control = true) {
    const WireSlots control{Angle::grid(0), Angle::grid(0), Angle::grid(2), Angle::grid(0)};
    const WireSlots target{Angle::grid(0), Angle::grid(2), Angle::grid(0), Angle::grid(6)};
    return top_control ? brick_from_slots(control, target)
                       : brick_from_slots(target, control);
}

struct BrickValidation {
    bool pass = false;
    double deviation = 0.0;
};

/// Drive the brick through forced 0-branch gadgets (zero secrets, all
/// outcomes pinned to 0) on each basis state, track and apply the frame, and
/// compare the assembled 4x4 against `expected` up to global phase.
[[nodiscard]] inline BrickValidation validate_brick(const Brick& brick, const Mat4& expected) {
    Mat4 got{};
    for (int col = 0; col < 4; ++col) {
        std::vector<cplx> amps(4);
        amps[col] = 1.0;
        Statevector reg = Statevector::from_amplitudes(2, std::move(amps));
        PauliFrame frame(2);
        const GadgetSecrets zero{};
        for (int slot = 0; slot < kBrickSlots; ++slot) {
            for (int wire = 0; wire < 2; ++wire) {
                const Angle target = wire == 0 ? brick.top(slot) : brick.bottom(slot);
                const Angle adapted = adaptive_angle(frame, wire, target);
                (void)j_gadget_forced(reg, wire, adapted, zero, 0, 0, 0);
                frame.after_j(wire, 0);
            }
            if (slot == 1 || slot == 3) {
                apply_cz(reg, 0, 1);
                frame.after_cz(0, 1);
            }
        }
        for (int wire = 0; wire < 2; ++wire) {
            if (frame.x[wire]) apply_x(reg, wire);
            if (frame.z[wire]) apply_z(reg, wire);
        }
        for (int row = 0; row < 4; ++row) got[row * 4 + col] = reg.amplitude(row);
    }
    BrickValidation v;
    v.deviation = phase_aligned_deviation(got, expected);
    v.pass = v.deviation < 1e-9;
    return v;
}

/// Gate-model source circuit over w wires. Two-qubit gates must stay inside
/// a static wire pair {2i, 2i+1}; the brick layout never couples wires of
/// different pairs.
struct SourceGate {
    enum class Kind { OneQ, Cx, Cz, Rot };
    Kind kind = Kind::OneQ;
    int a = 0;             // wire (OneQ/Rot), control (Cx), first wire (Cz)
    int b = 0;             // target (Cx), second wire (Cz)
    Mat2 u = gate::kI;     // OneQ payload
    char axis = 'z';       // Rot payload: rotation axis
    int param = 0;         // Rot payload: index into the parameter vector
};

struct SourceCircuit {
    int wires = 0;
    std::vector<SourceGate> gates;
    std::vector<char> observables;  // per wire: 'Z' or 'X'

    SourceCircuit() = default;
    explicit SourceCircuit(int w) : wires(w), observables(w, 'Z') {
        if (w < 1) throw config_error("source circuit needs at least one wire");
    }

    SourceCircuit& gate1(int w, const Mat2& u) {
        check_wire(w);
        if (!is_unitary(u, 1e-10)) throw config_error("source gate not unitary");
        gates.push_back({SourceGate::Kind::OneQ, w, 0, u, 'z', 0});
        return *this;
    }
    SourceCircuit& h(int w) { return gate1(w, gate::kH); }
    SourceCircuit& x(int w) { return gate1(w, gate::kX); }
    SourceCircuit& z(int w) { return gate1(w, gate::kZ); }
    SourceCircuit& s(int w) { return gate1(w, gate::kS); }
    SourceCircuit& t(int w) { return gate1(w, gate::kT); }
    SourceCircuit& rx(int w, double t) { return gate1(w, gate::rx(t)); }
    SourceCircuit& ry(int w, double t) { return gate1(w, gate::ry(t)); }
    SourceCircuit& rz(int w, double t) { return gate1(w, gate::rz(t)); }

    SourceCircuit& cx(int control, int target) {
        check_pair(control, target);
        gates.push_back({SourceGate::Kind::Cx, control, target, gate::kI, 'z', 0});
        return *this;
    }
    SourceCircuit& cz(int a_, int b_) {
        check_pair(a_, b_);
        gates.push_back({SourceGate::Kind::Cz, a_, b_, gate::kI, 'z', 0});
        return *this;
    }

    /// Parameterized rotation; resolved to a concrete gate by instantiation
    /// with a parameter vector (the training layer does this per circuit).
    SourceCircuit& rot(int w, char axis, int param) {
        check_wire(w);
        if (axis != 'x' && axis != 'y' && axis != 'z') throw config_error("bad rotation axis");
        if (param < 0) throw config_error("negative parameter index");
        gates.push_back({SourceGate::Kind::Rot, w, 0, gate::kI, axis, param});
        return *this;
    }

    SourceCircuit& observable(int w, char o) {
        check_wire(w);
        if (o != 'Z' && o != 'X') throw config_error("observable must be Z or X");
        observables[w] = o;
        return *this;
    }

    [[nodiscard]] int max_param() const {
        int m = -1;
        for (const auto& g : gates) {
            if (g.kind == SourceGate::Kind::Rot) m = std::max(m, g.param);
        }
        return m;
    }

  private:
    void check_wire(int w) const {
        if (w < 0 || w >= wires) throw config_error("gate wire out of range");
    }
    void check_pair(int a_, int b_) const {
        check_wire(a_);
        check_wire(b_);
        if (a_ == b_) throw config_error("two-qubit gate needs distinct wires");
        if (a_ / 2 != b_ / 2) {
            throw config_error(
                "two-qubit gate must stay inside a wire pair {2i, 2i+1} (static pairing)");
        }
    }
};

/// Resolve every parameterized rotation against theta; other gates are
/// copied byte-identically.
[[nodiscard]] inline SourceCircuit instantiate(const SourceCircuit& src,
                                               const std::vector<double>& theta) {
    SourceCircuit out = src;
    for (auto& g : out.gates) {
        if (g.kind != SourceGate::Kind::Rot) continue;
        if (g.param >= static_cast<int>(theta.size())) {
            throw config_error("rotation references a parameter beyond the vector");
        }
        const double t = theta[g.param];
        g.u = g.axis == 'x' ? gate::rx(t) : g.axis == 'y' ? gate::ry(t) : gate::rz(t);
        g.kind = SourceGate::Kind::OneQ;
    }
    return out;
}

/// Reference execution of a source circuit on |0...0> by direct simulation.
[[nodiscard]] inline Statevector source_reference_state(const SourceCircuit& src) {
    Statevector s(src.wires);
    for (const auto& g : src.gates) {
        switch (g.kind) {
            case SourceGate::Kind::OneQ: apply_1q(s, g.u, g.a); break;
            case SourceGate::Kind::Cx: apply_cx(s, g.a, g.b); break;
            case SourceGate::Kind::Cz: apply_cz(s, g.a, g.b); break;
            case SourceGate::Kind::Rot: throw config_error("unbound parameterized rotation");
        }
    }
    return s;
}

enum class WireKind { Compute, XTrap, ZTrap };

/// Compiled N x M brick grid plus the client-secret layout data. The grid is
/// stored in physical (server-visible) wire order; pairing is static, brick
/// p covering wires (2p, 2p+1) at every depth. Everything except n, depth,
/// and the uniform brick shape is secret.
struct PatternCircuit {
    int n = 0;              // physical wires, N = 3 * compute_wires
    int depth = 0;          // brick depths, including the final basis depth
    int source_wires = 0;   // w as given
    int compute_wires = 0;  // w padded to even
    std::vector<std::vector<Brick>> grid;  // [depth][pair]
    std::vector<WireKind> trap_map;        // per physical wire
    std::vector<int> h_position;           // per physical wire; -1 when none
    std::vector<int> perm;                 // role index -> physical wire
    std::vector<int> source_of;            // physical wire -> source wire, -1 otherwise
    std::vector<char> measured_in_x;       // per physical wire (0/1)

    [[nodiscard]] int pairs() const { return n / 2; }
    [[nodiscard]] int gadget_count() const { return depth * n * kBrickSlots; }
    [[nodiscard]] const Angle& slot_angle(int d, int wire, int slot) const {
        return grid[d][wire / 2].phi[(wire % 2) * 4 + slot];
    }
};

namespace detail {

[[nodiscard]] inline bool nontrivial(const Mat2& u) {
    return phase_aligned_deviation(u, gate::kI) > 1e-12;
}

}  // namespace detail

/// Compile a source circuit into the brick pattern: schedule compute gates
/// onto their pairs (merging runs of single-qubit gates), pad to uniform
/// depth, lay out dummy bricks on trap wires (identity on Z-traps; identity
/// plus one H-brick at a uniformly random depth on each X-trap), append one
/// basis-change depth carrying H-bricks on every X-measured wire, and
/// scatter everything through a fresh uniform pairing-respecting
/// permutation.
[[nodiscard]] inline PatternCircuit compile(const SourceCircuit& src, Rng& rng) {
    if (src.wires < 1) throw config_error("empty source circuit");
    if (static_cast<int>(src.observables.size()) != src.wires) {
        throw config_error("observable list size mismatch");
    }
    const int w = src.wires;
    const int w_eff = w + (w % 2);
    const int n = 3 * w_eff;
    const int compute_pairs = w_eff / 2;
    const int trap_pairs = w_eff / 2;  // per trap kind

    // --- Schedule compute gates pair by pair. ---
    std::vector<std::vector<Brick>> pair_bricks(compute_pairs);
    std::vector<std::array<Mat2, 2>> pending(compute_pairs, {gate::kI, gate::kI});
    const auto flush = [&](int p) {
        if (detail::nontrivial(pending[p][0]) || detail::nontrivial(pending[p][1])) {
            pair_bricks[p].push_back(brick_single_pair(pending[p][0], pending[p][1]));
            pending[p] = {gate::kI, gate::kI};
        }
    };
    for (const auto& g : src.gates) {
        switch (g.kind) {
            case SourceGate::Kind::OneQ: {
                auto& acc = pending[g.a / 2][g.a % 2];
                acc = matmul(g.u, acc);
                break;
            }
            case SourceGate::Kind::Cx: {
                const int p = g.a / 2;
                flush(p);
                pair_bricks[p].push_back(brick_cx(g.a % 2 == 0));
                break;
            }
            case SourceGate::Kind::Cz: {
                // CZ = (I (x) H) CX (I (x) H) with H on the odd-side wire.
                const int p = g.a / 2;
                auto& odd = pending[p][1];
                odd = matmul(gate::kH, odd);
                flush(p);
                pair_bricks[p].push_back(brick_cx(true));
                pending[p][1] = gate::kH;
                break;
            }
            case SourceGate::Kind::Rot:
                throw config_error("compile needs a fully instantiated circuit");
        }
    }
    for (int p = 0; p < compute_pairs; ++p) flush(p);

    int m_compute = 1;
    for (const auto& bl : pair_bricks) {
        m_compute = std::max(m_compute, static_cast<int>(bl.size()));
    }
    for (auto& bl : pair_bricks) bl.resize(m_compute, brick_identity());
    const int depth = m_compute + 1;  // One extra basis-change depth.

    // --- Role layout: computes, then X-traps, then Z-traps. ---
    const int role_pairs_total = n / 2;
    std::vector<int> role_h(n, -1);
    std::vector<char> role_in_x(n, 0);
    for (int i = 0; i < w_eff; ++i) {
        role_in_x[i] = (i < w && src.observables[i] == 'X') ? 1 : 0;
    }
    for (int i = w_eff; i < 2 * w_eff; ++i) {
        role_h[i] = static_cast<int>(rng.below(static_cast<std::uint64_t>(m_compute)));
        role_in_x[i] = 1;
    }

    const auto role_brick = [&](int q, int d) -> Brick {
        if (q < compute_pairs) {
            if (d < m_compute) return pair_bricks[q][d];
            const int top = 2 * q, bot = 2 * q + 1;
            return brick_from_slots(role_in_x[top] ? h_slots() : identity_slots(),
                                    role_in_x[bot] ? h_slots() : identity_slots());
        }
        const int top = 2 * q, bot = 2 * q + 1;
        const auto side = [&](int role) -> WireSlots {
            if (d < m_compute) {
                return role_h[role] == d ? h_slots() : identity_slots();
            }
            return role_in_x[role] ? h_slots() : identity_slots();
        };
        return brick_from_slots(side(top), side(bot));
    };

    // --- Uniform pairing-respecting permutation: shuffle role pairs onto
    // physical pairs, then flip each pair's internal order with a fair coin.
    std::vector<int> pair_order(role_pairs_total);
    for (int i = 0; i < role_pairs_total; ++i) pair_order[i] = i;
    rng.shuffle(pair_order.begin(), pair_order.end());

    PatternCircuit pat;
    pat.n = n;
    pat.depth = depth;
    pat.source_wires = w;
    pat.compute_wires = w_eff;
    pat.grid.assign(depth, std::vector<Brick>(role_pairs_total));
    pat.trap_map.assign(n, WireKind::Compute);
    pat.h_position.assign(n, -1);
    pat.perm.assign(n, 0);
    pat.source_of.assign(n, -1);
    pat.measured_in_x.assign(n, 0);

    const auto kind_of_role = [&](int role) {
        if (role < w_eff) return WireKind::Compute;
        return role < 2 * w_eff ? WireKind::XTrap : WireKind::ZTrap;
    };

    for (int pp = 0; pp < role_pairs_total; ++pp) {
        const int q = pair_order[pp];
        const int flip = rng.bit();
        for (int d = 0; d < depth; ++d) {
            const Brick b = role_brick(q, d);
            pat.grid[d][pp] = flip ? b.flipped() : b;
        }
        for (int side = 0; side < 2; ++side) {
            const int role = 2 * q + side;
            const int phys = 2 * pp + (side ^ flip);
            pat.perm[role] = phys;
            pat.trap_map[phys] = kind_of_role(role);
            pat.h_position[phys] = role_h[role];
            pat.source_of[phys] = role < w ? role : -1;
            pat.measured_in_x[phys] = role_in_x[role];
        }
    }
    return pat;
}

/// Apply one brick of the pattern to a state by direct matrix application.
inline void apply_brick(Statevector& s, const Brick& b, int top_wire) {
    for (int slot = 0; slot < kBrickSlots; ++slot) {
        apply_1q(s, gate::j(b.top(slot).rad()), top_wire);
        apply_1q(s, gate::j(b.bottom(slot).rad()), top_wire + 1);
        if (slot == 1 || slot == 3) apply_cz(s, top_wire, top_wire + 1);
    }
}

/// Reference pre-measurement state of the whole compiled pattern on
/// |0...0>, basis-change depth included, by direct matrix simulation.
[[nodiscard]] inline Statevector pattern_reference_state(const PatternCircuit& pat) {
    Statevector s(pat.n);
    for (int d = 0; d < pat.depth; ++d) {
        for (int p = 0; p < pat.pairs(); ++p) apply_brick(s, pat.grid[d][p], 2 * p);
    }
    return s;
}

}  // namespace bvqa
