#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bvqa/errors.hpp"
#include "bvqa/pattern.hpp"
#include "bvqa/protocol.hpp"
#include "bvqa/report.hpp"
#include "bvqa/rng.hpp"
#include "bvqa/vqa.hpp"

namespace bvqa {

namespace detail {

template <class T>
[[nodiscard]] T json_get(const nlohmann::ordered_json& j, const char* key, T fallback) {
    if (!j.contains(key)) return std::move(fallback);
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw config_error(std::string("config field '") + key + "' has the wrong type");
    }
}

}  // namespace detail

/// Circuit description, e.g.
///   {"wires": 2, "observables": "ZX",
///    "gates": [["h", 0], ["cx", 0, 1], ["rz", 1, 0.7], ["rot", 0, "x", 0]]}
/// Gate names: h x z s t rx ry rz cx cz rot. "rot" takes (wire, axis,
/// parameter index) and stays symbolic until training instantiates it.
[[nodiscard]] inline SourceCircuit parse_circuit(const nlohmann::ordered_json& j) {
    if (!j.is_object()) throw config_error("circuit description must be an object");
    const int wires = detail::json_get(j, "wires", 0);
    if (wires < 1) throw config_error("circuit needs a positive 'wires' count");
    SourceCircuit src(wires);

    const std::string obs = detail::json_get<std::string>(j, "observables", "");
    if (!obs.empty()) {
        if (static_cast<int>(obs.size()) != wires) {
            throw config_error("'observables' length must equal 'wires'");
        }
        for (int w = 0; w < wires; ++w) src.observable(w, obs[static_cast<std::size_t>(w)]);
    }

    const auto gates = detail::json_get(j, "gates", nlohmann::ordered_json::array());
    for (std::size_t i = 0; i < gates.size(); ++i) {
        const auto& g = gates[i];
        const auto fail = [&](const char* why) -> config_error {
            return config_error("circuit gate #" + std::to_string(i) + ": " + why);
        };
        try {
            if (!g.is_array() || g.empty() || !g[0].is_string()) {
                throw fail("expected [\"name\", args...]");
            }
            const std::string name = g[0].get<std::string>();
            const auto arity = [&](std::size_t want) {
                if (g.size() != want + 1) throw fail("wrong argument count");
            };
            if (name == "h" || name == "x" || name == "z" || name == "s" || name == "t") {
                arity(1);
                const int w = g[1].get<int>();
                if (name == "h") src.h(w);
                else if (name == "x") src.x(w);
                else if (name == "z") src.z(w);
                else if (name == "s") src.s(w);
                else src.t(w);
            } else if (name == "rx" || name == "ry" || name == "rz") {
                arity(2);
                const int w = g[1].get<int>();
                const double t = g[2].get<double>();
                if (name == "rx") src.rx(w, t);
                else if (name == "ry") src.ry(w, t);
                else src.rz(w, t);
            } else if (name == "cx" || name == "cz") {
                arity(2);
                if (name == "cx") src.cx(g[1].get<int>(), g[2].get<int>());
                else src.cz(g[1].get<int>(), g[2].get<int>());
            } else if (name == "rot") {
                arity(3);
                const std::string axis = g[2].get<std::string>();
                if (axis.size() != 1) throw fail("axis must be one of x, y, z");
                src.rot(g[1].get<int>(), axis[0], g[3].get<int>());
            } else {
                throw fail("unknown gate name");
            }
        } catch (const nlohmann::json::exception&) {
            throw fail("malformed arguments");
        }
    }
    return src;
}

/// Everything one CLI invocation needs. A JSON config file fills the
/// fields; explicitly passed flags override it afterwards.
struct ExperimentConfig {
    std::string experiment = "delegate";
    std::uint64_t seed = 1;
    std::uint64_t trials = 2000;
    int parallel = 1;
    std::string out_dir = ".";

    int register_size = 6;  // verify: physical wires N (multiple of 6)
    std::string attack;     // I/X/Z/B string; empty = honest (or default sweep)
    double p_loss = 0.0;    // channel loss inside delegations

    int loss_gadgets = 108;  // loss: independent transmissions per circuit
    double loss_p = 0.01;    // loss: per-transmission loss probability

    SourceCircuit circuit = default_circuit();
    VqaConfig vqa = default_vqa();
    bool train_blind = true;  // train through the protocol vs direct simulation
    bool train_exact = true;  // exact expectations vs per-run readout shots

    // One wire, one trainable X rotation: delegate runs it at theta, train
    // drives <Z> from cos(0.1) down to -1.
    [[nodiscard]] static SourceCircuit default_circuit() {
        SourceCircuit c(1);
        c.rot(0, 'x', 0);
        return c;
    }
    [[nodiscard]] static VqaConfig default_vqa() {
        VqaConfig v;
        v.theta = {0.1};
        v.eta = 0.4;
        v.iterations = 100;
        return v;
    }
};

[[nodiscard]] inline ExperimentConfig config_from_json(const nlohmann::ordered_json& j) {
    if (!j.is_object()) throw config_error("config root must be an object");
    ExperimentConfig cfg;
    cfg.experiment = detail::json_get(j, "experiment", cfg.experiment);
    cfg.seed = detail::json_get(j, "seed", cfg.seed);
    cfg.trials = detail::json_get(j, "trials", cfg.trials);
    cfg.parallel = detail::json_get(j, "parallel", cfg.parallel);
    cfg.out_dir = detail::json_get(j, "out", cfg.out_dir);
    cfg.register_size = detail::json_get(j, "register_size", cfg.register_size);
    cfg.attack = detail::json_get(j, "attack", cfg.attack);
    cfg.p_loss = detail::json_get(j, "p_loss", cfg.p_loss);

    if (j.contains("loss")) {
        const auto& l = j.at("loss");
        if (!l.is_object()) throw config_error("config field 'loss' must be an object");
        cfg.loss_gadgets = detail::json_get(l, "gadgets", cfg.loss_gadgets);
        cfg.loss_p = detail::json_get(l, "p", cfg.loss_p);
    }
    if (j.contains("circuit")) cfg.circuit = parse_circuit(j.at("circuit"));
    if (j.contains("train")) {
        const auto& t = j.at("train");
        if (!t.is_object()) throw config_error("config field 'train' must be an object");
        cfg.vqa.theta = detail::json_get(t, "theta", cfg.vqa.theta);
        cfg.vqa.eta = detail::json_get(t, "eta", cfg.vqa.eta);
        cfg.vqa.iterations = detail::json_get(t, "iterations", cfg.vqa.iterations);
        cfg.vqa.repetitions = detail::json_get(t, "repetitions", cfg.vqa.repetitions);
        cfg.vqa.target = detail::json_get(t, "target", cfg.vqa.target);
        const std::string cost = detail::json_get<std::string>(t, "cost", "identity");
        if (cost == "identity") cfg.vqa.cost = CostKind::Identity;
        else if (cost == "mse") cfg.vqa.cost = CostKind::Mse;
        else if (cost == "cross_entropy") cfg.vqa.cost = CostKind::CrossEntropy;
        else throw config_error("unknown cost kind: " + cost);
        cfg.vqa.use_adam = detail::json_get(t, "adam", cfg.vqa.use_adam);
        cfg.vqa.adam.step_size = detail::json_get(t, "step_size", cfg.vqa.adam.step_size);
        cfg.train_blind = detail::json_get(t, "blind", cfg.train_blind);
        cfg.train_exact = detail::json_get(t, "exact", cfg.train_exact);
    }
    return cfg;
}

[[nodiscard]] inline ExperimentConfig config_from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw config_error("cannot open config file: " + path);
    nlohmann::ordered_json j;
    try {
        j = nlohmann::ordered_json::parse(f);
    } catch (const nlohmann::json::parse_error& e) {
        // nlohmann diagnostics carry position info (line/byte).
        throw config_error(std::string("config parse: ") + e.what());
    }
    return config_from_json(j);
}

/// Deterministic parallel map: body(i, rng_i) for every i in [0, total),
/// where rng_i = substream(root, tag, i). No stream is shared, so the
/// thread schedule cannot influence any result; workers only race for the
/// next index.
template <class Body>
inline void for_each_run(std::uint64_t total, int workers, std::uint64_t root,
                         std::string_view tag, Body&& body) {
    if (workers < 1) throw config_error("parallel worker count must be positive");
    if (workers == 1) {
        for (std::uint64_t i = 0; i < total; ++i) {
            Rng rng = substream(root, tag, i);
            body(i, rng);
        }
        return;
    }
    std::atomic<std::uint64_t> next{0};
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (;;) {
                    const std::uint64_t i = next.fetch_add(1);
                    if (i >= total) return;
                    Rng rng = substream(root, tag, i);
                    body(i, rng);
                }
            } catch (...) {
                errors[static_cast<std::size_t>(w)] = std::current_exception();
            }
        });
    }
    for (std::thread& t : pool) t.join();
    for (const std::exception_ptr& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

/// In-memory result of one experiment command: console lines, summary and
/// plot rows, extra (filename, content) outputs, and the process exit code
/// the CLI should use. Commands never touch the filesystem themselves.
struct Report {
    std::vector<std::string> lines;
    std::vector<SummaryRow> summary;
    std::vector<PlotPoint> plot;
    std::vector<std::pair<std::string, std::string>> files;
    int exit_code = 0;
};

[[nodiscard]] inline Report cmd_delegate(const ExperimentConfig& cfg) {
    Rng rng = substream(cfg.seed, "delegate");
    const SourceCircuit concrete = cfg.circuit.max_param() >= 0
                                       ? instantiate(cfg.circuit, cfg.vqa.theta)
                                       : cfg.circuit;
    const PatternCircuit pat = compile(concrete, rng);
    ClientSecrets secrets = ClientSecrets::skeleton(pat);

    DelegationOptions opt;
    opt.p_loss = cfg.p_loss;
    opt.seed_label = cfg.seed;
    opt.exact_expectations = cfg.attack.empty();  // only meaningful when honest

    AttackSpec attack;
    std::vector<int> placement;
    if (!cfg.attack.empty()) {
        attack = AttackSpec::from_string(cfg.attack);
        if (static_cast<int>(attack.pauli.size()) != pat.n) {
            throw config_error("attack string length must be " + std::to_string(pat.n) +
                               " (the register size)");
        }
        placement.resize(static_cast<std::size_t>(pat.n));
        for (int i = 0; i < pat.n; ++i) placement[static_cast<std::size_t>(i)] = i;
        rng.shuffle(placement.begin(), placement.end());
        opt.attack = &attack;
        opt.placement = &placement;
    }

    const RunResult r = run_delegation(pat, secrets, opt, rng);

    Report rep;
    rep.lines.push_back(r.accepted
                            ? "delegation accepted"
                            : "delegation rejected (" + std::to_string(r.trap_failures) +
                                  " trap failure(s))");
    std::string outs = "corrected outputs:";
    for (const int b : r.corrected_outputs) outs += ' ' + std::to_string(b);
    rep.lines.push_back(outs);
    if (opt.exact_expectations) {
        std::string exps = "exact expectations:";
        for (const double e : r.exact_expectations) exps += ' ' + format_double(e);
        rep.lines.push_back(exps);
    }
    rep.lines.push_back("bell sends: " + std::to_string(r.bell_sends) +
                        ", resends: " + std::to_string(r.resends));

    SummaryRow row;
    row.experiment = "delegate";
    row.n = pat.n;
    row.m = pat.depth;
    row.attack_weight = cfg.attack.empty() ? 0 : attack.weight();
    row.trials = 1;
    row.resends_mean = static_cast<double>(r.resends);
    row.accepted_rate = r.accepted ? 1.0 : 0.0;
    row.seed = cfg.seed;
    rep.summary.push_back(std::move(row));

    rep.files.emplace_back("transcript.log", transcript_jsonl(r.transcript));
    rep.files.emplace_back("server_view.json", server_view_json(pat, r.transcript).dump(2) + "\n");
    rep.exit_code = r.accepted ? 0 : 3;
    return rep;
}

[[nodiscard]] inline Report cmd_verify(const ExperimentConfig& cfg) {
    const int n = cfg.register_size;
    if (cfg.trials < 1) throw config_error("verify needs at least one trial");
    if (n < 6 || n % 6 != 0) {
        // Three roles per compute wire, and compute wires come in pairs.
        throw config_error("register_size must be a positive multiple of 6");
    }
    std::vector<AttackSpec> attacks;
    if (!cfg.attack.empty()) {
        attacks.push_back(AttackSpec::from_string(cfg.attack));
        if (static_cast<int>(attacks.back().pauli.size()) != n) {
            throw config_error("attack string length must equal register_size");
        }
    } else {
        attacks.push_back(AttackSpec(n));  // honest row
        for (int a = 1; a <= 3 && a <= n; ++a) attacks.push_back(AttackSpec::pure('X', a, n));
    }

    const SourceCircuit idle(n / 3);
    Rng shape_rng = substream(cfg.seed, "verify/shape");
    const int depth = compile(idle, shape_rng).depth;  // uniform across trials

    Report rep;
    rep.lines.push_back("escape rate vs attack weight (N = " + std::to_string(n) + ", " +
                        std::to_string(cfg.trials) + " trials per row)");
    for (std::size_t ai = 0; ai < attacks.size(); ++ai) {
        const AttackSpec& attack = attacks[ai];
        const double exact = escape_probability_exact(n, attack);
        const double bound = escape_probability_bound(attack);

        std::vector<char> escaped(cfg.trials, 0);
        const std::string tag = "verify/" + std::to_string(ai);
        for_each_run(cfg.trials, cfg.parallel, cfg.seed, tag,
                     [&](std::uint64_t i, Rng& rng) {
                         escaped[i] = detection_trial(idle, attack, rng) ? 1 : 0;
                     });
        std::uint64_t escapes = 0;
        for (const char e : escaped) escapes += e;
        const double rate = static_cast<double>(escapes) / static_cast<double>(cfg.trials);
        const double sigma =
            std::sqrt(rate * (1.0 - rate) / static_cast<double>(cfg.trials));

        SummaryRow row;
        row.experiment = "verify";
        row.n = n;
        row.m = depth;
        row.attack_weight = attack.weight();
        row.trials = cfg.trials;
        row.escape_rate = rate;
        row.bound = bound;
        row.accepted_rate = rate;  // acceptance == escape for attacked runs
        row.seed = cfg.seed;
        rep.summary.push_back(std::move(row));

        const double w = attack.weight();
        rep.plot.push_back({"escape_rate", w, rate, sigma});
        rep.plot.push_back({"escape_exact", w, exact, 0.0});
        rep.plot.push_back({"escape_bound", w, bound, 0.0});
        rep.lines.push_back("  |alpha| = " + std::to_string(attack.weight()) +
                            ": escape " + format_double(rate) + " (exact " +
                            format_double(exact) + ", bound " + format_double(bound) + ")");
    }
    return rep;
}

[[nodiscard]] inline Report cmd_loss(const ExperimentConfig& cfg) {
    Rng rng = substream(cfg.seed, "loss");
    const LossReport lr = loss_experiment(cfg.loss_gadgets, cfg.loss_p, cfg.trials, rng);

    Report rep;
    rep.lines.push_back("workload: " + std::to_string(lr.gadgets) +
                        " transmissions, loss probability " + format_double(lr.p_loss) +
                        ", " + std::to_string(lr.trials) + " trials");
    rep.lines.push_back("  restart-baseline re-delegation: analytic " +
                        format_double(lr.baseline_redelegation) + ", monte carlo " +
                        format_double(lr.baseline_redelegation_mc));
    rep.lines.push_back("  retransmitting protocol: re-delegations " +
                        std::to_string(lr.redelegations) + ", mean resends " +
                        format_double(lr.resends_mean) + " (expected " +
                        format_double(lr.resends_expected) + ")");

    SummaryRow row;
    row.experiment = "loss";
    row.trials = lr.trials;
    row.resends_mean = lr.resends_mean;
    row.accepted_rate = 1.0;  // retransmission never aborts a circuit
    row.seed = cfg.seed;
    rep.summary.push_back(std::move(row));

    rep.plot.push_back({"baseline_redelegation", lr.p_loss, lr.baseline_redelegation, 0.0});
    const double base_sigma = std::sqrt(lr.baseline_redelegation *
                                        (1.0 - lr.baseline_redelegation) /
                                        static_cast<double>(lr.trials));
    rep.plot.push_back(
        {"baseline_redelegation_mc", lr.p_loss, lr.baseline_redelegation_mc, base_sigma});
    rep.plot.push_back({"resends_expected", lr.p_loss, lr.resends_expected, 0.0});
    rep.plot.push_back({"resends_mean", lr.p_loss, lr.resends_mean, 0.0});
    return rep;
}

[[nodiscard]] inline Report cmd_blindness(const ExperimentConfig& cfg) {
    const BlindnessReport b = blindness_audit();

    Report rep;
    rep.lines.push_back("bell-half average trace distance to I/2: " +
                        format_double(b.bell_trace_distance));
    rep.lines.push_back(std::string("phi' support target-independent up to shift: ") +
                        (b.phi_support_shift ? "yes" : "NO"));
    rep.lines.push_back("uncorrected two-gadget output trace distance to I/2: " +
                        format_double(b.output_trace_distance));
    rep.lines.push_back("minimum corrected-output fidelity: " +
                        format_double(b.min_corrected_fidelity));

    SummaryRow row;
    row.experiment = "blindness";
    row.n = 1;
    row.m = 2;          // audited chain: two gadgets on one wire
    row.trials = 256;   // exhaustively enumerated branches, not samples
    row.seed = cfg.seed;
    rep.summary.push_back(std::move(row));

    for (const auto& [name, target] :
         {std::pair<const char*, Angle>{"phi_support_target_0", Angle::grid(0)},
          std::pair<const char*, Angle>{"phi_support_target_quarter", Angle::grid(2)}}) {
        for (const double v : detail::phi_prime_support(target)) {
            rep.plot.push_back({name, v, 1.0 / 8.0, 0.0});
        }
    }
    const bool healthy = b.bell_trace_distance < 1e-12 && b.phi_support_shift &&
                         b.output_trace_distance < 1e-12 &&
                         b.min_corrected_fidelity > 1.0 - 1e-10;
    rep.exit_code = healthy ? 0 : 3;
    return rep;
}

[[nodiscard]] inline Report cmd_train(const ExperimentConfig& cfg) {
    Rng rng = substream(cfg.seed, "train");
    DirectEvaluator direct;
    BlindEvaluator blind;
    blind.exact = cfg.train_exact;
    blind.p_loss = cfg.p_loss;
    Evaluator& eval = cfg.train_blind ? static_cast<Evaluator&>(blind) : direct;

    const std::vector<TrainRecord> records = train(cfg.vqa, cfg.circuit, eval, rng);

    Rng shape_rng = substream(cfg.seed, "train/shape");
    const PatternCircuit shape = compile(instantiate(cfg.circuit, cfg.vqa.theta), shape_rng);

    std::uint64_t aborted = 0;
    for (const TrainRecord& r : records) aborted += r.aborted;
    const double planned = static_cast<double>(cfg.vqa.iterations) *
                           static_cast<double>(cfg.vqa.circuit_count()) *
                           (cfg.train_exact ? 1.0 : static_cast<double>(cfg.vqa.repetitions));

    Report rep;
    rep.lines.push_back("trained " + std::to_string(cfg.vqa.iterations) + " iterations, " +
                        std::to_string(cfg.vqa.circuit_count()) + " circuits each (" +
                        (cfg.train_blind ? "blind protocol" : "direct simulation") + ", " +
                        (cfg.train_exact ? "exact expectations" : "sampled readout") + ")");
    rep.lines.push_back("final cost: " + format_double(records.back().cost));
    std::string th = "final theta:";
    for (const double t : records.back().theta) th += ' ' + format_double(t);
    rep.lines.push_back(th);
    rep.lines.push_back("aborted runs: " + std::to_string(aborted));

    SummaryRow row;
    row.experiment = "train";
    row.n = shape.n;
    row.m = shape.depth;
    row.trials = static_cast<std::uint64_t>(cfg.vqa.iterations);
    if (cfg.train_blind) {
        row.accepted_rate = (planned - static_cast<double>(aborted)) / planned;
    }
    row.seed = cfg.seed;
    rep.summary.push_back(std::move(row));

    for (const TrainRecord& r : records) {
        double norm2 = 0.0;
        for (const double g : r.grad) norm2 += g * g;
        rep.plot.push_back({"cost", static_cast<double>(r.iteration), r.cost, 0.0});
        rep.plot.push_back(
            {"grad_norm", static_cast<double>(r.iteration), std::sqrt(norm2), 0.0});
    }
    rep.files.emplace_back("train.csv", train_csv(records));
    return rep;
}

[[nodiscard]] inline Report run_experiment(const ExperimentConfig& cfg) {
    if (cfg.experiment == "delegate") return cmd_delegate(cfg);
    if (cfg.experiment == "verify") return cmd_verify(cfg);
    if (cfg.experiment == "loss") return cmd_loss(cfg);
    if (cfg.experiment == "blindness") return cmd_blindness(cfg);
    if (cfg.experiment == "train") return cmd_train(cfg);
    throw config_error("unknown experiment kind: " + cfg.experiment);
}

/// Write summary.csv, plotdata.csv, and the command's extra files under
/// cfg.out_dir (created if absent).
inline void write_report(const Report& rep, const ExperimentConfig& cfg) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(cfg.out_dir, ec);
    if (ec) throw config_error("cannot create output directory: " + cfg.out_dir);
    write_text_file(cfg.out_dir + "/summary.csv", summary_csv(rep.summary));
    write_text_file(cfg.out_dir + "/plotdata.csv", plotdata_csv(rep.plot));
    for (const auto& [name, content] : rep.files) {
        write_text_file(cfg.out_dir + "/" + name, content);
    }
}

}  // namespace bvqa
