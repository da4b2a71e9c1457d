#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "bvqa/errors.hpp"
#include "bvqa/pattern.hpp"
#include "bvqa/protocol.hpp"
#include "bvqa/rng.hpp"
#include "bvqa/statevector.hpp"

namespace bvqa {

/// Scalar cost f(E) applied to the estimated expectation E of the base
/// circuit. Derivatives are analytic.
enum class CostKind { Identity, Mse, CrossEntropy };

namespace detail {

/// E in [-1, 1] mapped to an outcome probability, clamped away from the
/// logarithm's poles.
[[nodiscard]] inline double outcome_probability(double e) {
    const double p = 0.5 * (1.0 + e);
    constexpr double eps = 1e-12;
    return p < eps ? eps : p > 1.0 - eps ? 1.0 - eps : p;
}

}  // namespace detail

[[nodiscard]] inline double cost_value(CostKind kind, double e, double target) {
    switch (kind) {
        case CostKind::Identity: return e;
        case CostKind::Mse: return (e - target) * (e - target);
        case CostKind::CrossEntropy: {
            const double p = detail::outcome_probability(e);
            return -target * std::log(p) - (1.0 - target) * std::log(1.0 - p);
        }
    }
    throw config_error("unknown cost kind");
}

/// d f / d E at the same point. Identity -> 1; MSE -> 2 (E - t);
/// cross-entropy -> (p - y) / (2 p (1 - p)) with p = (1 + E)/2.
[[nodiscard]] inline double cost_derivative(CostKind kind, double e, double target) {
    switch (kind) {
        case CostKind::Identity: return 1.0;
        case CostKind::Mse: return 2.0 * (e - target);
        case CostKind::CrossEntropy: {
            const double p = detail::outcome_probability(e);
            return (p - target) / (2.0 * p * (1.0 - p));
        }
    }
    throw config_error("unknown cost kind");
}

/// The 2L + 1 circuits of one optimizer step: the base instantiation at
/// theta, then every +pi/2 shift, then every -pi/2 shift, in parameter
/// order. All expectation lists below use exactly this order.
[[nodiscard]] inline std::vector<SourceCircuit> shifted_circuits(
    const SourceCircuit& src, const std::vector<double>& theta) {
    const std::size_t L = theta.size();
    std::vector<SourceCircuit> out;
    out.reserve(2 * L + 1);
    out.push_back(instantiate(src, theta));
    for (int sign = 0; sign < 2; ++sign) {
        for (std::size_t j = 0; j < L; ++j) {
            std::vector<double> shifted = theta;
            shifted[j] += sign == 0 ? pi / 2.0 : -pi / 2.0;
            out.push_back(instantiate(src, shifted));
        }
    }
    return out;
}

/// Parameter-shift gradient from the expectations of shifted_circuits():
/// dC/dtheta_j = 1/2 * f'(E_base) * (E_{j+} - E_{j-}).
[[nodiscard]] inline std::vector<double> gradient(const std::vector<double>& e_values,
                                                  double f_prime) {
    if (e_values.empty() || e_values.size() % 2 != 1) {
        throw config_error("expectation list must have odd length 2L + 1");
    }
    const std::size_t L = e_values.size() / 2;
    std::vector<double> g(L);
    for (std::size_t j = 0; j < L; ++j) {
        g[j] = 0.5 * f_prime * (e_values[1 + j] - e_values[1 + L + j]);
    }
    return g;
}

/// Bias-corrected adaptive-moment optimizer state; hyperparameters ride
/// along so one struct fully determines the update.
struct AdamState {
    double step_size = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::vector<double> m, v;  // first/second moment accumulators
    std::uint64_t t = 0;       // completed steps

    void validate() const {
        if (step_size <= 0.0 || beta1 <= 0.0 || beta1 >= 1.0 || beta2 <= 0.0 ||
            beta2 >= 1.0 || epsilon <= 0.0) {
            throw config_error("adam hyperparameters out of range");
        }
    }
};

inline void adam_step(AdamState& state, std::vector<double>& theta,
                      const std::vector<double>& grad) {
    state.validate();
    if (theta.size() != grad.size()) throw config_error("adam: gradient size mismatch");
    if (state.m.empty()) state.m.assign(theta.size(), 0.0);
    if (state.v.empty()) state.v.assign(theta.size(), 0.0);
    if (state.m.size() != theta.size() || state.v.size() != theta.size()) {
        throw config_error("adam: moment size mismatch");
    }
    ++state.t;
    const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < theta.size(); ++i) {
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grad[i];
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grad[i] * grad[i];
        const double m_hat = state.m[i] / c1;
        const double v_hat = state.v[i] / c2;
        theta[i] -= state.step_size * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
}

/// Expectation backend: evaluates one concrete circuit and reports the
/// per-source-wire expectations of its declared observables. Rejected runs
/// are discarded and counted into `aborted`.
class Evaluator {
  public:
    virtual ~Evaluator() = default;
    [[nodiscard]] virtual std::vector<double> expectations(const SourceCircuit& circuit,
                                                           int repetitions,
                                                           std::uint64_t& aborted,
                                                           Rng& rng) = 0;
};

/// Plain statevector simulation; exact, so repetitions and randomness are
/// irrelevant and ignored.
class DirectEvaluator final : public Evaluator {
  public:
    [[nodiscard]] std::vector<double> expectations(const SourceCircuit& circuit, int,
                                                   std::uint64_t&, Rng&) override {
        const Statevector s = source_reference_state(circuit);
        std::vector<double> out(static_cast<std::size_t>(circuit.wires));
        for (int w = 0; w < circuit.wires; ++w) {
            out[static_cast<std::size_t>(w)] = expectation(s, w, circuit.observables[w]);
        }
        return out;
    }
};

/// Full delegated execution: each evaluation compiles a fresh pattern
/// (fresh trap layout and permutation) and runs the verified protocol. In
/// exact mode one accepted run suffices -- the corrected expectation values
/// are branch-independent, so further repetitions would repeat the same
/// numbers. In shot mode each repetition contributes one corrected readout
/// per wire.
class BlindEvaluator final : public Evaluator {
  public:
    bool exact = true;
    double p_loss = 0.0;

    [[nodiscard]] std::vector<double> expectations(const SourceCircuit& circuit,
                                                   int repetitions, std::uint64_t& aborted,
                                                   Rng& rng) override {
        if (repetitions < 1) throw config_error("evaluator needs at least one repetition");
        DelegationOptions opt;
        opt.p_loss = p_loss;
        opt.record_transcript = false;
        opt.exact_expectations = exact;

        if (exact) {
            for (int attempt = 0; attempt < repetitions; ++attempt) {
                const PatternCircuit pat = compile(circuit, rng);
                ClientSecrets secrets = ClientSecrets::skeleton(pat);
                const RunResult r = run_delegation(pat, secrets, opt, rng);
                if (r.accepted) return r.exact_expectations;
                ++aborted;
            }
            throw protocol_error("every delegation repetition was rejected");
        }

        std::vector<double> sum(static_cast<std::size_t>(circuit.wires), 0.0);
        int accepted = 0;
        for (int rep = 0; rep < repetitions; ++rep) {
            const PatternCircuit pat = compile(circuit, rng);
            ClientSecrets secrets = ClientSecrets::skeleton(pat);
            const RunResult r = run_delegation(pat, secrets, opt, rng);
            if (!r.accepted) {
                ++aborted;
                continue;
            }
            ++accepted;
            for (int w = 0; w < circuit.wires; ++w) {
                sum[static_cast<std::size_t>(w)] += 1.0 - 2.0 * r.corrected_outputs[w];
            }
        }
        if (accepted == 0) throw protocol_error("every delegation repetition was rejected");
        for (double& v : sum) v /= accepted;
        return sum;
    }
};

/// Training configuration. The circuit count per iteration is pinned to
/// G = 2L + 1 by construction: one base circuit plus two shifts per
/// parameter. eta = 0 is admitted as the documented degenerate case (theta
/// stays constant).
struct VqaConfig {
    std::vector<double> theta;  // initial parameters; L = theta.size()
    double eta = 0.1;
    int iterations = 1;
    int repetitions = 1;
    CostKind cost = CostKind::Identity;
    double target = 0.0;  // MSE target / cross-entropy label
    bool use_adam = false;
    AdamState adam;

    [[nodiscard]] int parameter_count() const { return static_cast<int>(theta.size()); }
    [[nodiscard]] int circuit_count() const { return 2 * parameter_count() + 1; }

    void validate() const {
        if (eta < 0.0) throw config_error("learning rate must be nonnegative");
        if (iterations < 1) throw config_error("need at least one iteration");
        if (repetitions < 1) throw config_error("need at least one repetition per circuit");
        if (cost == CostKind::CrossEntropy && (target < 0.0 || target > 1.0)) {
            throw config_error("cross-entropy label must lie in [0, 1]");
        }
        if (use_adam) adam.validate();
    }
};

/// One optimizer-step measurement: cost, f', expectations in
/// shifted_circuits order (scalar E per circuit = mean of its per-wire
/// observable expectations), and the discarded-run count.
struct Evaluation {
    double cost = 0.0;
    double f_prime = 0.0;
    std::vector<double> e_values;
    std::uint64_t aborted = 0;
};

[[nodiscard]] inline Evaluation evaluate(const VqaConfig& cfg, const SourceCircuit& src,
                                         const std::vector<double>& theta, Evaluator& eval,
                                         Rng& rng) {
    const std::vector<SourceCircuit> circuits = shifted_circuits(src, theta);
    Evaluation ev;
    ev.e_values.reserve(circuits.size());
    for (const SourceCircuit& c : circuits) {
        const std::vector<double> per_wire =
            eval.expectations(c, cfg.repetitions, ev.aborted, rng);
        double mean = 0.0;
        for (const double v : per_wire) mean += v;
        ev.e_values.push_back(mean / static_cast<double>(per_wire.size()));
    }
    ev.cost = cost_value(cfg.cost, ev.e_values[0], cfg.target);
    ev.f_prime = cost_derivative(cfg.cost, ev.e_values[0], cfg.target);
    if (!std::isfinite(ev.cost)) throw config_error("training cost is not finite");
    return ev;
}

struct TrainRecord {
    int iteration = 0;
    std::vector<double> theta;  // parameters the iteration was measured at
    double cost = 0.0;
    std::vector<double> grad;
    std::uint64_t aborted = 0;
};

/// Gradient-descent (or Adam) loop: per iteration evaluate all G circuits
/// through the supplied backend, form the parameter-shift gradient, record,
/// and update theta.
[[nodiscard]] inline std::vector<TrainRecord> train(const VqaConfig& cfg,
                                                    const SourceCircuit& src,
                                                    Evaluator& eval, Rng& rng) {
    cfg.validate();
    if (src.max_param() >= cfg.parameter_count()) {
        throw config_error("circuit references a parameter beyond theta");
    }
    std::vector<double> theta = cfg.theta;
    AdamState adam = cfg.adam;
    std::vector<TrainRecord> records;
    records.reserve(static_cast<std::size_t>(cfg.iterations));
    for (int it = 0; it < cfg.iterations; ++it) {
        const Evaluation ev = evaluate(cfg, src, theta, eval, rng);
        std::vector<double> grad = gradient(ev.e_values, ev.f_prime);
        records.push_back({it, theta, ev.cost, grad, ev.aborted});
        if (cfg.use_adam) {
            adam_step(adam, theta, grad);
        } else {
            for (std::size_t j = 0; j < theta.size(); ++j) theta[j] -= cfg.eta * grad[j];
        }
    }
    return records;
}

}  // namespace bvqa
