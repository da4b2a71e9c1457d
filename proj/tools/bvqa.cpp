#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "bvqa/errors.hpp"
#include "bvqa/experiment.hpp"

namespace {

// Flags shared across subcommands; only present values override the config
// file, so "flag beats file beats default" falls out of std::optional.
struct Flags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::uint64_t> trials;
    std::optional<std::string> out;
    std::optional<int> parallel;
    std::optional<std::string> attack;
    std::optional<int> register_size;
    std::optional<double> p_loss;
    std::optional<int> loss_gadgets;
    std::optional<double> loss_p;
};

CLI::App* add_common(CLI::App* sub, Flags& fl) {
    sub->add_option("--config", fl.config, "JSON config file (flags override it)");
    sub->add_option("--seed", fl.seed, "root seed; every stream derives from it");
    sub->add_option("--trials", fl.trials, "Monte Carlo trial count");
    sub->add_option("--out", fl.out, "output directory (created if absent)");
    sub->add_option("--parallel", fl.parallel, "worker threads; results are thread-count invariant");
    return sub;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"blind, loss-tolerant delegation of variational quantum circuits"};
    app.require_subcommand(1);
    Flags fl;

    CLI::App* delegate = add_common(
        app.add_subcommand("delegate", "run one delegation and dump its transcript"), fl);
    delegate->add_option("--attack", fl.attack,
                         "per-wire Pauli string (I/X/Z/B) injected before readout");
    delegate->add_option("--p-loss", fl.p_loss, "ancilla loss probability per transmission");

    CLI::App* verify = add_common(
        app.add_subcommand("verify", "measure trap escape rates under Pauli attacks"), fl);
    verify->add_option("--attack", fl.attack, "single attack string; default sweeps X weights 0..3");
    verify->add_option("--register-size", fl.register_size, "physical wires N (multiple of 6)");

    CLI::App* loss = add_common(
        app.add_subcommand("loss", "compare restart baseline against per-gadget retransmission"),
        fl);
    loss->add_option("--gadgets", fl.loss_gadgets, "transmissions per delegated circuit");
    loss->add_option("--p-loss", fl.loss_p, "loss probability per transmission");

    add_common(app.add_subcommand("blindness", "audit what the server's view reveals"), fl);

    CLI::App* train = add_common(
        app.add_subcommand("train", "gradient-train a parameterized circuit via delegation"), fl);
    train->add_option("--p-loss", fl.p_loss, "ancilla loss probability during training runs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);  // prints help or the parse error
        return code == 0 ? 0 : 2;
    }

    try {
        bvqa::ExperimentConfig cfg;
        if (!fl.config.empty()) cfg = bvqa::config_from_file(fl.config);
        cfg.experiment = app.get_subcommands().front()->get_name();
        if (fl.seed) cfg.seed = *fl.seed;
        if (fl.trials) cfg.trials = *fl.trials;
        if (fl.out) cfg.out_dir = *fl.out;
        if (fl.parallel) cfg.parallel = *fl.parallel;
        if (fl.attack) cfg.attack = *fl.attack;
        if (fl.register_size) cfg.register_size = *fl.register_size;
        if (fl.p_loss) cfg.p_loss = *fl.p_loss;
        if (fl.loss_gadgets) cfg.loss_gadgets = *fl.loss_gadgets;
        if (fl.loss_p) cfg.loss_p = *fl.loss_p;

        const bvqa::Report rep = bvqa::run_experiment(cfg);
        bvqa::write_report(rep, cfg);
        for (const std::string& line : rep.lines) std::cout << line << '\n';
        std::cout << "wrote " << cfg.out_dir << "/summary.csv, " << cfg.out_dir
                  << "/plotdata.csv";
        for (const auto& [name, content] : rep.files) {
            (void)content;
            std::cout << ", " << cfg.out_dir << '/' << name;
        }
        std::cout << '\n';
        return rep.exit_code;
    } catch (const bvqa::config_error& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const bvqa::channel_fault& e) {
        std::cerr << "channel fault: " << e.what() << '\n';
        return 4;
    } catch (const bvqa::protocol_error& e) {
        std::cerr << "protocol violation: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
