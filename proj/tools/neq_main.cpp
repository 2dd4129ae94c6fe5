#include <CLI11.hpp>
#include <iostream>
#include <string>
#include <vector>

#include "neq/cli_commands.hpp"

namespace {

neq::RunConfig assemble_config(const std::string& config_path, const std::string& seed,
                               const std::vector<std::string>& overrides) {
    neq::RunConfig cfg;
    if (!config_path.empty()) cfg = neq::RunConfig::from_file(config_path);
    for (const std::string& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!seed.empty()) cfg.set("seed", seed);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Wireline equalization lab: FFE/DFE, forward-backward MAP, and NeuralEQ"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out", seed;
    std::vector<std::string> overrides;
    app.add_option("--config", config_path, "key=value configuration file");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--seed", seed, "seed override");
    app.add_option("--set", overrides, "override a config key (key=value)")->take_all();

    auto* sweep = app.add_subcommand("sweep", "BER-vs-SNR sweep over an equalizer roster");
    auto* train = app.add_subcommand("train", "train NeuralEQ and write a checkpoint");
    bool resume = false;
    train->add_flag("--resume", resume, "continue from train_state.bin in the output directory");
    auto* prune = app.add_subcommand("prune", "iterative magnitude pruning with fine-tuning");
    auto* robust = app.add_subcommand("robustness", "BER under randomly skewed channel taps");
    auto* grid = app.add_subcommand("gridsearch", "grid search over NeuralEQ layer widths");

    auto* gen = app.add_subcommand("gen-channel", "synthesize an exponential-decay channel file");
    double loss_db = 12.0;
    int taps = 12, pre = 2;
    std::string out_file = "channel.ch";
    gen->add_option("--loss-db", loss_db, "target loss at the Nyquist bin (dB)")->required();
    gen->add_option("--taps", taps, "number of taps")->required();
    gen->add_option("--pre-cursors", pre, "pre-cursor count");
    gen->add_option("--out-file", out_file, "output channel file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return neq::cmd_gen_channel(loss_db, taps, pre, out_file);
        neq::RunConfig cfg = assemble_config(config_path, seed, overrides);
        if (sweep->parsed()) return neq::cmd_sweep(cfg, out_dir);
        if (train->parsed()) {
            if (resume) cfg.set("resume", "true");
            return neq::cmd_train(cfg, out_dir);
        }
        if (prune->parsed()) return neq::cmd_prune(cfg, out_dir);
        if (robust->parsed()) return neq::cmd_robustness(cfg, out_dir);
        if (grid->parsed()) return neq::cmd_gridsearch(cfg, out_dir);
    } catch (const std::exception& e) {
        std::cerr << "neq: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
