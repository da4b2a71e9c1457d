#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "bvqa/density.hpp"
#include "bvqa/errors.hpp"
#include "bvqa/gadget.hpp"
#include "bvqa/pattern.hpp"
#include "bvqa/rng.hpp"
#include "bvqa/statevector.hpp"

namespace bvqa {

/// One transcript event. Direction notes: the server streams Bell halves to
/// the client and reports (s1, s2) and s3; the client streams reception
/// statuses and encrypted angles back. Output bits travel server -> client.
struct Event {
    enum class Kind { BellSent, RecvStatus, S1S2, PhiPrime, S3, OutputBits, Abort };
    Kind kind = Kind::BellSent;
    int seq = 0;     // monotone within the run
    int gadget = -1; // owning gadget index; -1 for run-level events
    int bit_a = 0;   // RecvStatus: status; S1S2: s1; S3: s3
    int bit_b = 0;   // S1S2: s2
    double angle = 0.0;        // PhiPrime payload
    std::vector<int> bits;     // OutputBits payload
    std::string reason;        // Abort payload
};

/// Ordered, state-machine-checked event log. Any append that violates the
/// message flow (per gadget: Bell/status retransmission loop, then s1 s2,
/// then phi', then s3) throws protocol_error instead of recording garbage.
class Transcript {
  public:
    Transcript() = default;
    Transcript(std::uint64_t run_id, std::uint64_t seed, bool enabled = true)
        : run_id_(run_id), seed_(seed), enabled_(enabled) {}

    void bell_sent(int gadget) {
        if (!enabled_) return;
        require(state_ == State::AwaitBell, "Bell half sent out of turn");
        require_gadget(gadget, state_gadget_ok(gadget));
        push({Event::Kind::BellSent, 0, gadget});
        state_ = State::AwaitStatus;
        gadget_ = gadget;
    }
    void recv_status(int gadget, int status) {
        if (!enabled_) return;
        require(state_ == State::AwaitStatus && gadget == gadget_,
                "reception status without a pending Bell half");
        Event e{Event::Kind::RecvStatus, 0, gadget};
        e.bit_a = status;
        push(std::move(e));
        state_ = status == 0 ? State::AwaitS1S2 : State::AwaitBell;
    }
    void s1s2(int gadget, int s1, int s2) {
        if (!enabled_) return;
        require(state_ == State::AwaitS1S2 && gadget == gadget_, "s1 s2 out of turn");
        Event e{Event::Kind::S1S2, 0, gadget};
        e.bit_a = s1;
        e.bit_b = s2;
        push(std::move(e));
        state_ = State::AwaitPhi;
    }
    void phi_prime(int gadget, double angle) {
        if (!enabled_) return;
        require(state_ == State::AwaitPhi && gadget == gadget_, "phi' out of turn");
        Event e{Event::Kind::PhiPrime, 0, gadget};
        e.angle = angle;
        push(std::move(e));
        state_ = State::AwaitS3;
    }
    void s3(int gadget, int s3_bit) {
        if (!enabled_) return;
        require(state_ == State::AwaitS3 && gadget == gadget_, "s3 out of turn");
        Event e{Event::Kind::S3, 0, gadget};
        e.bit_a = s3_bit;
        push(std::move(e));
        state_ = State::AwaitBell;
        next_gadget_ = gadget + 1;
    }
    void output_bits(std::vector<int> bits) {
        if (!enabled_) return;
        require(state_ == State::AwaitBell, "output bits during an open gadget");
        Event e{Event::Kind::OutputBits, 0, -1};
        e.bits = std::move(bits);
        push(std::move(e));
        state_ = State::Done;
    }
    void abort(std::string reason) {
        if (!enabled_) return;
        require(state_ == State::AwaitBell || state_ == State::Done,
                "abort inside an open gadget");
        Event e{Event::Kind::Abort, 0, -1};
        e.reason = std::move(reason);
        push(std::move(e));
        state_ = State::Aborted;
    }

    [[nodiscard]] const std::vector<Event>& events() const { return events_; }
    [[nodiscard]] std::uint64_t run_id() const { return run_id_; }
    [[nodiscard]] std::uint64_t seed() const { return seed_; }
    [[nodiscard]] bool enabled() const { return enabled_; }

  private:
    enum class State { AwaitBell, AwaitStatus, AwaitS1S2, AwaitPhi, AwaitS3, Done, Aborted };

    static void require(bool ok, const char* what) {
        if (!ok) throw protocol_error(std::string("protocol order violation: ") + what);
    }
    [[nodiscard]] bool state_gadget_ok(int gadget) const {
        return gadget == next_gadget_ || gadget == gadget_;  // fresh or retransmission
    }
    void require_gadget(int gadget, bool ok) {
        if (gadget < 0 || !ok) throw protocol_error("protocol order violation: bad gadget index");
    }
    void push(Event e) {
        e.seq = static_cast<int>(events_.size());
        events_.push_back(std::move(e));
    }

    std::uint64_t run_id_ = 0;
    std::uint64_t seed_ = 0;
    bool enabled_ = true;
    std::vector<Event> events_;
    State state_ = State::AwaitBell;
    int gadget_ = -1;
    int next_gadget_ = 0;
};

/// Everything the client must keep private for one run: the per-gadget
/// secrets in execution order plus the pattern-level layout secrets.
struct ClientSecrets {
    std::vector<GadgetSecrets> gadgets;
    std::vector<int> perm;
    std::vector<WireKind> trap_map;
    std::vector<int> h_positions;
    std::vector<int> expected_trap;  // corrected trap outcome (0); -1 on compute wires

    [[nodiscard]] static ClientSecrets skeleton(const PatternCircuit& pat) {
        ClientSecrets s;
        s.perm = pat.perm;
        s.trap_map = pat.trap_map;
        s.h_positions = pat.h_position;
        s.expected_trap.assign(pat.n, -1);
        for (int i = 0; i < pat.n; ++i) {
            if (pat.trap_map[i] != WireKind::Compute) s.expected_trap[i] = 0;
        }
        return s;
    }
};

/// Pauli attack on the measured register: one operator per abstract
/// position; a placement permutation decides which physical wire each
/// position hits.
struct AttackSpec {
    enum Pauli : int { I = 0, X = 1, Z = 2, XZ = 3 };
    std::vector<int> pauli;

    AttackSpec() = default;
    explicit AttackSpec(int n) : pauli(n, I) {}

    /// "IXZB" string form, B meaning the combined XZ operator.
    [[nodiscard]] static AttackSpec from_string(const std::string& s) {
        AttackSpec a(static_cast<int>(s.size()));
        for (std::size_t i = 0; i < s.size(); ++i) {
            switch (s[i]) {
                case 'I': a.pauli[i] = I; break;
                case 'X': a.pauli[i] = X; break;
                case 'Z': a.pauli[i] = Z; break;
                case 'B': a.pauli[i] = XZ; break;
                default: throw config_error("attack characters must be I, X, Z, or B");
            }
        }
        return a;
    }
    /// count operators of one species on the first positions, I elsewhere.
    [[nodiscard]] static AttackSpec pure(char species, int count, int n) {
        if (count < 0 || count > n) throw config_error("attack count out of range");
        AttackSpec a(n);
        for (int i = 0; i < count; ++i) {
            a.pauli[i] = species == 'X' ? X : species == 'Z' ? Z : XZ;
        }
        if (species != 'X' && species != 'Z' && species != 'B') {
            throw config_error("attack species must be X, Z, or B");
        }
        return a;
    }

    [[nodiscard]] int count_x() const { return count(X); }
    [[nodiscard]] int count_z() const { return count(Z); }
    [[nodiscard]] int count_xz() const { return count(XZ); }
    [[nodiscard]] int weight() const { return count_x() + count_z() + count_xz(); }

  private:
    [[nodiscard]] int count(int p) const {
        return static_cast<int>(std::count(pauli.begin(), pauli.end(), p));
    }
};

/// Apply the attack: pauli[i] lands on wire placement[i].
inline void adversary_apply(Statevector& state, const AttackSpec& attack,
                            const std::vector<int>& placement) {
    if (attack.pauli.size() != placement.size() ||
        static_cast<int>(placement.size()) != state.wires()) {
        throw config_error("attack/placement size mismatch");
    }
    for (std::size_t i = 0; i < placement.size(); ++i) {
        const int w = placement[i];
        switch (attack.pauli[i]) {
            case AttackSpec::I: break;
            case AttackSpec::X: apply_x(state, w); break;
            case AttackSpec::Z: apply_z(state, w); break;
            case AttackSpec::XZ:
                apply_z(state, w);
                apply_x(state, w);
                break;
            default: throw config_error("unknown attack operator");
        }
    }
}

struct RunResult {
    bool accepted = false;
    std::vector<int> corrected_outputs;  // per source wire, in source order
    int trap_failures = 0;
    Transcript transcript;
    std::vector<double> exact_expectations;  // per source wire; empty unless requested
    std::uint64_t resends = 0;
    std::uint64_t bell_sends = 0;
};

/// Frame-correct raw Z outcomes and check every trap wire against its
/// expected value. All failures are counted before the verdict.
[[nodiscard]] inline std::pair<bool, int> verify_traps(const std::vector<int>& raw_bits,
                                                       const ClientSecrets& secrets,
                                                       const PauliFrame& frame) {
    if (raw_bits.size() != secrets.trap_map.size()) {
        throw config_error("output width does not match the pattern");
    }
    int failures = 0;
    for (std::size_t w = 0; w < raw_bits.size(); ++w) {
        if (secrets.expected_trap[w] < 0) continue;
        const int corrected = raw_bits[w] ^ frame.x[w];
        failures += corrected != secrets.expected_trap[w];
    }
    return {failures == 0, failures};
}

struct DelegationOptions {
    double p_loss = 0.0;
    std::uint64_t max_attempts = 1'000'000;
    const AttackSpec* attack = nullptr;          // optional adversary
    const std::vector<int>* placement = nullptr; // required with attack
    bool exact_expectations = false;
    bool record_transcript = true;
    std::uint64_t run_id = 0;
    std::uint64_t seed_label = 0;
};

/// Execute one full delegation: every J slot of the compiled pattern runs as
/// a gadget (Bell retransmission loop, s1/s2 report, encrypted adaptive
/// angle, M(phi') measurement), brick CZs are applied at their slots, the
/// adversary (if any) strikes before the final basis-change depth, outputs
/// are Z-measured jointly, frame-corrected, and trap-verified.
inline RunResult run_delegation(const PatternCircuit& pat, ClientSecrets& secrets,
                                const DelegationOptions& opt, Rng& rng) {
    if (opt.attack != nullptr && opt.placement == nullptr) {
        throw config_error("attack requires a placement");
    }
    secrets.gadgets.clear();

    Statevector reg(pat.n);
    reg.reserve_wires(1);
    PauliFrame frame(pat.n);
    LossyChannel channel;
    channel.p_loss = opt.p_loss;
    channel.max_attempts = opt.max_attempts;
    Transcript tx(opt.run_id, opt.seed_label, opt.record_transcript);

    int g = 0;
    const auto run_depth = [&](int d) {
        for (int slot = 0; slot < kBrickSlots; ++slot) {
            for (int wire = 0; wire < pat.n; ++wire) {
                const auto statuses = channel.transmit(rng);
                for (const int st : statuses) {
                    tx.bell_sent(g);
                    tx.recv_status(g, st);
                }
                GadgetSecrets sec = GadgetSecrets::draw(rng);
                const BellMeasurement bell = client_bell_measure(make_bell_pair(), sec.k, rng);
                sec.s0 = bell.s0;
                const auto [s1, s2] = j_gadget_couple(
                    reg, wire, bell.remote.amplitude(0), bell.remote.amplitude(1), rng);
                tx.s1s2(g, s1, s2);
                const Angle target = pat.slot_angle(d, wire, slot);
                const Angle adapted = adaptive_angle(frame, wire, target);
                const Angle phi_prime = encrypted_angle(adapted, s1, sec);
                tx.phi_prime(g, phi_prime.rad_mod_2pi());
                const int s3 = j_gadget_finish(reg, wire, phi_prime.rad(), rng);
                tx.s3(g, s3);
                frame.after_j(wire, s3 ^ sec.r);
                secrets.gadgets.push_back(sec);
                ++g;
            }
            if (slot == 1 || slot == 3) {
                for (int p = 0; p < pat.pairs(); ++p) {
                    apply_cz(reg, 2 * p, 2 * p + 1);
                    frame.after_cz(2 * p, 2 * p + 1);
                }
            }
        }
    };

    for (int d = 0; d + 1 < pat.depth; ++d) run_depth(d);
    if (opt.attack != nullptr) adversary_apply(reg, *opt.attack, *opt.placement);
    run_depth(pat.depth - 1);

    RunResult result;
    if (opt.exact_expectations) {
        Statevector corrected = reg;
        for (int w = 0; w < pat.n; ++w) {
            if (frame.x[w]) apply_x(corrected, w);
        }
        result.exact_expectations.resize(pat.source_wires);
        for (int s = 0; s < pat.source_wires; ++s) {
            result.exact_expectations[s] = expectation(corrected, pat.perm[s], 'Z');
        }
    }

    const std::vector<int> raw = sample_all_z(reg, rng);
    tx.output_bits(raw);

    const auto [accepted, failures] = verify_traps(raw, secrets, frame);
    if (!accepted) tx.abort("trap verification failed");

    result.accepted = accepted;
    result.trap_failures = failures;
    result.corrected_outputs.resize(pat.source_wires);
    for (int s = 0; s < pat.source_wires; ++s) {
        const int w = pat.perm[s];
        result.corrected_outputs[s] = raw[w] ^ frame.x[w];
    }
    result.resends = channel.resends;
    result.bell_sends = channel.sent;
    result.transcript = std::move(tx);
    return result;
}

// ---------------------------------------------------------------------------
// Detection statistics
// ---------------------------------------------------------------------------

namespace detail {

[[nodiscard]] inline double binom(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

}  // namespace detail

/// Exact escape probability of a Pauli attack under a uniform placement of
/// the attacked positions over the register: X escapes Z-traps, Z escapes
/// X-traps, XZ must land entirely on compute wires. The count sums over how
/// many X (resp. Z) operators land on compute wires.
[[nodiscard]] inline double escape_probability_exact(int n, const AttackSpec& attack) {
    if (n <= 0 || n % 3 != 0) throw config_error("register size must be a positive multiple of 3");
    if (static_cast<int>(attack.pauli.size()) != n) {
        throw config_error("attack size does not match the register");
    }
    const int w = n / 3;
    const int a = attack.count_x(), b = attack.count_z(), c = attack.count_xz();
    double count = 0.0;
    for (int m = 0; m <= std::min(a, w - c); ++m) {
        count += detail::binom(w - c, m) * detail::binom(w, a - m) *
                 detail::binom(2 * w - c - m, b);
    }
    count *= detail::binom(w, c);
    const double denom =
        detail::binom(n, c) * detail::binom(n - c, a) * detail::binom(n - c - a, b);
    return count / denom;
}

/// Theorem bound (2/3)^{|alpha|/3}.
[[nodiscard]] inline double escape_probability_bound(const AttackSpec& attack) {
    return std::pow(2.0 / 3.0, attack.weight() / 3.0);
}

struct DetectionReport {
    double escape_rate = 0.0;
    double bound = 0.0;
    double exact = 0.0;
    double aggregate_bound = 0.0;  // bound^repetitions
    std::uint64_t trials = 0;
    std::uint64_t escapes = 0;
    int attack_weight = 0;
};

/// One detection trial: fresh compile (fresh permutation and trap layout),
/// fresh uniform attack placement, one attacked delegation. True when the
/// attack escaped (the run was accepted).
[[nodiscard]] inline bool detection_trial(const SourceCircuit& idle, const AttackSpec& attack,
                                          Rng& rng) {
    const PatternCircuit pat = compile(idle, rng);
    ClientSecrets secrets = ClientSecrets::skeleton(pat);
    std::vector<int> placement(pat.n);
    for (int i = 0; i < pat.n; ++i) placement[i] = i;
    rng.shuffle(placement.begin(), placement.end());
    DelegationOptions opt;
    opt.attack = &attack;
    opt.placement = &placement;
    opt.record_transcript = false;
    return run_delegation(pat, secrets, opt, rng).accepted;
}

/// Monte Carlo detection experiment: per trial, compile a fresh pattern
/// (fresh permutation and trap layout) for an idle compute block of n/3
/// wires, run the delegation honestly, inject the attack through a fresh
/// uniform placement before the basis-change depth, and count accepted runs.
[[nodiscard]] inline DetectionReport detection_experiment(int n, const AttackSpec& attack,
                                                          std::uint64_t trials, Rng& rng,
                                                          int repetitions = 1) {
    if (n <= 0 || n % 3 != 0) throw config_error("register size must be a positive multiple of 3");
    if ((n / 3) % 2 != 0) {
        throw config_error("register size must give an even compute count (n = 6, 12, ...)");
    }
    if (trials < 1) throw config_error("detection experiment needs at least one trial");
    const SourceCircuit idle(n / 3);

    DetectionReport rep;
    rep.trials = trials;
    rep.attack_weight = attack.weight();
    rep.bound = escape_probability_bound(attack);
    rep.exact = escape_probability_exact(n, attack);
    rep.aggregate_bound = std::pow(rep.bound, repetitions);

    for (std::uint64_t t = 0; t < trials; ++t) {
        rep.escapes += detection_trial(idle, attack, rng) ? 1 : 0;
    }
    rep.escape_rate = static_cast<double>(rep.escapes) / static_cast<double>(trials);
    return rep;
}

/// Enumeration oracle for escape probabilities: average the escape indicator
/// over every valid pairing-respecting trap layout and every injective
/// placement of the nontrivial attack operators onto wires. Brute force,
/// feasible for n <= 12 and small weights; cross-checks the closed form.
[[nodiscard]] inline double escape_probability_enumerated(int n, const AttackSpec& attack) {
    if (n <= 0 || n % 3 != 0 || n > 12) throw config_error("enumeration supports n in {6, 12}");
    const int w = n / 3;
    if (w % 2 != 0) throw config_error("enumeration needs an even compute count");
    const int pairs = n / 2;

    std::vector<int> ops;
    for (const int p : attack.pauli) {
        if (p != AttackSpec::I) ops.push_back(p);
    }
    const int weight = static_cast<int>(ops.size());

    // Layouts: kinds assigned pairwise, w/2 pairs per kind.
    std::vector<int> pair_kind(pairs);  // 0 compute, 1 X-trap, 2 Z-trap
    for (int p = 0; p < pairs; ++p) pair_kind[p] = p / (w / 2);
    std::sort(pair_kind.begin(), pair_kind.end());

    double total = 0.0;
    std::uint64_t layouts = 0;
    do {
        double escapes = 0.0, cases = 0.0;
        // Odometer over all weight-length wire tuples; skip non-injective.
        std::vector<int> tuple(weight, 0);
        while (true) {
            bool distinct = true;
            for (int i = 0; i < weight && distinct; ++i) {
                for (int k = i + 1; k < weight; ++k) {
                    if (tuple[i] == tuple[k]) {
                        distinct = false;
                        break;
                    }
                }
            }
            if (distinct) {
                bool escape = true;
                for (int i = 0; i < weight && escape; ++i) {
                    const int kind = pair_kind[tuple[i] / 2];
                    escape = !((ops[i] == AttackSpec::X && kind == 2) ||
                               (ops[i] == AttackSpec::Z && kind == 1) ||
                               (ops[i] == AttackSpec::XZ && kind != 0));
                }
                escapes += escape;
                cases += 1.0;
            }
            int pos = weight - 1;
            while (pos >= 0 && tuple[pos] == n - 1) tuple[pos--] = 0;
            if (pos < 0) break;
            ++tuple[pos];
        }
        total += weight == 0 ? 1.0 : escapes / cases;
        ++layouts;
    } while (std::next_permutation(pair_kind.begin(), pair_kind.end()));
    return total / static_cast<double>(layouts);
}

// ---------------------------------------------------------------------------
// Blindness audit
// ---------------------------------------------------------------------------

struct BlindnessReport {
    double bell_trace_distance = 0.0;   // averaged Bell half vs I/2
    bool phi_support_shift = false;     // phi' support is target-independent up to shift
    double output_trace_distance = 0.0; // r-averaged uncorrected output vs I/2
    double min_corrected_fidelity = 0.0;
};

namespace detail {

[[nodiscard]] inline std::vector<double> phi_prime_support(const Angle& phi) {
    std::vector<double> vals;
    for (int k = 0; k < 8; ++k) {
        for (int r = 0; r < 2; ++r) {
            GadgetSecrets sec;
            sec.k = k;
            sec.r = r;
            sec.s0 = 0;
            vals.push_back(encrypted_angle(phi, 0, sec).rad_mod_2pi());
        }
    }
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end(),
                           [](double x, double y) { return std::abs(x - y) < 1e-12; }),
               vals.end());
    return vals;
}

[[nodiscard]] inline bool supports_match_up_to_shift(const std::vector<double>& s1,
                                                     const std::vector<double>& s2) {
    if (s1.size() != s2.size() || s1.empty()) return false;
    // Try aligning s2 to s1 with the shift fixed by each candidate pairing.
    for (std::size_t off = 0; off < s1.size(); ++off) {
        const double delta = s1[0] - s2[off];
        bool all = true;
        for (std::size_t i = 0; i < s1.size() && all; ++i) {
            const double target = s1[i];
            bool found = false;
            for (const double v : s2) {
                double d = std::fmod(std::abs(v + delta - target), 2 * pi);
                d = std::min(d, 2 * pi - d);
                if (d < 1e-9) {
                    found = true;
                    break;
                }
            }
            all = found;
        }
        if (all) return true;
    }
    return false;
}

}  // namespace detail

/// Three-part audit: (i) the (k, s0)-averaged server-held Bell half is
/// exactly I/2; (ii) the phi' support is target-independent up to a
/// constant shift; (iii) over the hidden r bits, the uncorrected output of
/// a two-gadget chain is maximally mixed, while the frame-corrected output
/// is the ideal state in every branch.
[[nodiscard]] inline BlindnessReport blindness_audit() {
    BlindnessReport rep;

    DensityAccumulator bell_acc(2);
    for (int k = 0; k < 8; ++k) {
        for (int s0 = 0; s0 < 2; ++s0) {
            auto [p, remote] = client_bell_measure_forced(make_bell_pair(), k, s0);
            bell_acc.accumulate(remote, p / 8.0);
        }
    }
    rep.bell_trace_distance = trace_distance(bell_acc.finalize(), maximally_mixed(2));

    const auto base = detail::phi_prime_support(Angle::grid(0));
    rep.phi_support_shift =
        detail::supports_match_up_to_shift(base, detail::phi_prime_support(Angle::grid(3))) &&
        detail::supports_match_up_to_shift(base, detail::phi_prime_support(Angle::radians(0.41))) &&
        detail::supports_match_up_to_shift(detail::phi_prime_support(Angle::radians(1.3)),
                                           detail::phi_prime_support(Angle::radians(2.9)));

    // Two-gadget chain J(phi2) J(phi1)|0>, all branches enumerated; weights
    // are r-coin times forced-branch probabilities.
    const Angle phi1 = Angle::radians(0.7), phi2 = Angle::radians(2.1);
    Statevector ideal(1);
    apply_1q(ideal, gate::j(phi1.rad()), 0);
    apply_1q(ideal, gate::j(phi2.rad()), 0);

    DensityAccumulator out_acc(2);
    double min_fid = 1.0;
    for (int r1 = 0; r1 < 2; ++r1) {
        for (int b1 = 0; b1 < 8; ++b1) {
            for (int r2 = 0; r2 < 2; ++r2) {
                for (int b2 = 0; b2 < 8; ++b2) {
                    GadgetSecrets sec1;
                    sec1.r = r1;
                    GadgetSecrets sec2;
                    sec2.r = r2;
                    PauliFrame frame(1);
                    Statevector reg(1);
                    double p = 0.25;  // the two r coins
                    p *= j_gadget_forced(reg, 0, adaptive_angle(frame, 0, phi1), sec1,
                                         b1 & 1, (b1 >> 1) & 1, (b1 >> 2) & 1);
                    frame.after_j(0, ((b1 >> 2) & 1) ^ r1);
                    p *= j_gadget_forced(reg, 0, adaptive_angle(frame, 0, phi2), sec2,
                                         b2 & 1, (b2 >> 1) & 1, (b2 >> 2) & 1);
                    frame.after_j(0, ((b2 >> 2) & 1) ^ r2);
                    out_acc.accumulate(reg, p);

                    Statevector corrected = reg;
                    if (frame.x[0]) apply_x(corrected, 0);
                    if (frame.z[0]) apply_z(corrected, 0);
                    min_fid = std::min(min_fid, fidelity(corrected, ideal));
                }
            }
        }
    }
    rep.output_trace_distance = trace_distance(out_acc.finalize(), maximally_mixed(2));
    rep.min_corrected_fidelity = min_fid;
    return rep;
}

// ---------------------------------------------------------------------------
// Loss analytics
// ---------------------------------------------------------------------------

struct LossReport {
    int gadgets = 0;
    double p_loss = 0.0;
    std::uint64_t trials = 0;
    double baseline_redelegation = 0.0;     // analytic 1 - (1-p)^gadgets
    double baseline_redelegation_mc = 0.0;  // Monte Carlo
    double resends_expected = 0.0;          // gadgets * p / (1-p)
    double resends_mean = 0.0;              // Monte Carlo, this protocol
    std::uint64_t redelegations = 0;        // this protocol: always zero
    std::uint64_t channel_faults = 0;
};

[[nodiscard]] inline double baseline_redelegation_probability(int gadgets, double p) {
    if (gadgets < 0 || p < 0.0 || p >= 1.0) throw config_error("bad loss parameters");
    return 1.0 - std::pow(1.0 - p, gadgets);
}

/// Compare the restart-everything baseline (a single lost ancilla voids the
/// whole circuit) against per-gadget Bell retransmission on the same
/// workload of independent transmissions.
[[nodiscard]] inline LossReport loss_experiment(int gadgets, double p, std::uint64_t trials,
                                                Rng& rng) {
    if (trials < 1) throw config_error("loss experiment needs at least one trial");
    LossReport rep;
    rep.gadgets = gadgets;
    rep.p_loss = p;
    rep.trials = trials;
    rep.baseline_redelegation = baseline_redelegation_probability(gadgets, p);
    rep.resends_expected = gadgets * p / (1.0 - p);

    std::uint64_t baseline_failures = 0;
    std::uint64_t resends_total = 0;
    for (std::uint64_t t = 0; t < trials; ++t) {
        bool lost_any = false;
        for (int gIdx = 0; gIdx < gadgets; ++gIdx) {
            lost_any = rng.bernoulli(p) || lost_any;
        }
        baseline_failures += lost_any;

        LossyChannel channel;
        channel.p_loss = p;
        for (int gIdx = 0; gIdx < gadgets; ++gIdx) {
            try {
                (void)channel.transmit(rng);
            } catch (const channel_fault&) {
                ++rep.channel_faults;
            }
        }
        resends_total += channel.resends;
    }
    rep.baseline_redelegation_mc =
        static_cast<double>(baseline_failures) / static_cast<double>(trials);
    rep.resends_mean = static_cast<double>(resends_total) / static_cast<double>(trials);
    return rep;
}

}  // namespace bvqa
