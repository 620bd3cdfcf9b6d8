// Experiment runner: train, sweep-clients, sweep-threshold, ablation.
//
// Settings resolve as defaults < --preset < config file < FLQDSNN_SEED < flags.

#include "flqdsnn/errors.hpp"
#include "flqdsnn/experiment.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <map>
#include <string>
#include <string_view>

namespace {

using flqdsnn::experiment::ExperimentConfig;
using flqdsnn::experiment::Kind;

bool flag_on_command_line(int argc, char** argv, std::string_view flag) {
    for (int i = 1; i < argc; ++i) {
        const std::string_view arg = argv[i];
        if (arg == flag || (arg.starts_with(flag) && arg.size() > flag.size() && arg[flag.size()] == '=')) {
            return true;
        }
    }
    return false;
}

void print_result(const flqdsnn::experiment::ResultBundle& bundle) {
    for (const auto& run : bundle.runs) {
        std::cout << to_string(bundle.kind) << " seed=" << run.seed;
        if (!run.arm.empty()) {
            std::cout << " arm=" << run.arm;
        }
        if (bundle.kind == Kind::sweep_clients) {
            std::cout << " clients=" << run.clients;
        }
        if (run.tau_fixed) {
            std::cout << " tau=" << *run.tau_fixed;
        }
        std::cout << " accuracy=" << run.report.accuracy << " macro_f1=" << run.report.macro_f1 << '\n';
    }
    for (const auto& f : bundle.files) {
        std::cout << "wrote " << f.string() << '\n';
    }
}

} // namespace

int main(int argc, char** argv) {
    ExperimentConfig cfg = flqdsnn::experiment::desk_defaults();
    auto& fed = cfg.federation;

    CLI::App app{"Federated quantum dynamic spiking neural network simulator"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Key = value settings file (same keys as the long flags)");

    std::map<std::string, Kind> kinds{{"train", Kind::train},
                                      {"sweep-clients", Kind::sweep_clients},
                                      {"sweep-threshold", Kind::sweep_threshold},
                                      {"ablation", Kind::ablation}};
    app.add_subcommand("train", "Single federated training run per seed")->fallthrough();
    app.add_subcommand("sweep-clients", "Final accuracy across client counts")->fallthrough();
    app.add_subcommand("sweep-threshold", "Final accuracy across fixed spike thresholds")->fallthrough();
    app.add_subcommand("ablation", "Paired runs with spiking on and off")->fallthrough();

    std::string dataset = cfg.dataset;
    std::string spiking = "on";
    std::string spike_mode = "final";
    std::string encoding = "pi";
    std::string tau_tick = "global";
    std::string batch = "full";
    std::string preset = "desk";
    double tau_fixed = -1.0;
    std::string out_dir = cfg.out_dir.string();
    std::string data_dir = cfg.data_dir.string();

    app.add_option("--dataset", dataset, "iris | digits | breast_cancer | csv:<path>");
    auto* clients_opt = app.add_option("--clients", fed.n_clients, "Number of clients")->check(CLI::PositiveNumber);
    auto* rounds_opt = app.add_option("--rounds", fed.global_rounds, "Global rounds")->check(CLI::NonNegativeNumber);
    auto* local_opt =
        app.add_option("--local-iters", fed.local_iters, "Local iterations per round")->check(CLI::NonNegativeNumber);
    app.add_option("--lr", fed.learning_rate, "Adam step size")->check(CLI::PositiveNumber);
    app.add_option("--alpha", fed.dirichlet_alpha, "Dirichlet concentration for the non-IID split")
        ->check(CLI::PositiveNumber);
    app.add_option("--tau-init", fed.tau_initial, "Initial spike threshold")->check(CLI::Range(0.0, 1.0));
    app.add_option("--tau-inc", fed.tau_increment, "Threshold increment per tick")->check(CLI::NonNegativeNumber);
    app.add_option("--tau-max", fed.tau_max, "Threshold ceiling")->check(CLI::Range(0.0, 1.0));
    app.add_option("--tau-fixed", tau_fixed, "Hold the threshold at this value")->check(CLI::Range(0.0, 1.0));
    app.add_option("--tau-tick", tau_tick, "Counter driving the schedule")->check(CLI::IsMember({"global", "local"}));
    app.add_option("--spiking", spiking, "Spiking mechanism")->check(CLI::IsMember({"on", "off"}));
    app.add_option("--spike-mode", spike_mode, "Where spikes are checked")->check(CLI::IsMember({"final", "per-layer"}));
    app.add_option("--encoding", encoding, "Angle encoding scale")->check(CLI::IsMember({"pi", "one"}));
    app.add_option("--batch", batch, "Local gradient mode")->check(CLI::IsMember({"full", "per-sample"}));
    app.add_option("--layers", fed.n_layers, "Circuit layers")->check(CLI::PositiveNumber);
    app.add_option("--threads", fed.threads, "Client worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
    app.add_option("--seed", fed.seed, "Base seed (FLQDSNN_SEED overrides the config file)");
    app.add_option("--seeds", cfg.repeats, "Number of seeds")->check(CLI::PositiveNumber);
    app.add_option("--client-list", cfg.client_list, "Client counts for sweep-clients")->delimiter(',');
    app.add_option("--tau-list", cfg.tau_list, "Thresholds for sweep-threshold")->delimiter(',');
    app.add_option("--label-column", cfg.label_column, "Label column for csv: datasets");
    app.add_option("--data-dir", data_dir, "Directory holding the dataset fixtures");
    app.add_option("--preset", preset, "desk (default) or paper")->check(CLI::IsMember({"desk", "paper"}));
    app.add_option("--out", out_dir, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    for (const auto& [name, kind] : kinds) {
        if (app.got_subcommand(name)) {
            cfg.kind = kind;
        }
    }
    if (preset == "paper") {
        flqdsnn::fedcore::FederationConfig paper;
        flqdsnn::experiment::apply_paper_preset(paper);
        if (clients_opt->count() == 0) {
            fed.n_clients = paper.n_clients;
        }
        if (rounds_opt->count() == 0) {
            fed.global_rounds = paper.global_rounds;
        }
        if (local_opt->count() == 0) {
            fed.local_iters = paper.local_iters;
        }
    }
    if (const char* env = std::getenv("FLQDSNN_SEED"); env && !flag_on_command_line(argc, argv, "--seed")) {
        try {
            fed.seed = std::stoull(env);
        } catch (const std::exception&) {
            std::cerr << "error: FLQDSNN_SEED='" << env << "' is not an unsigned integer\n";
            return 2;
        }
    }

    cfg.dataset = dataset;
    cfg.preset = preset;
    cfg.out_dir = out_dir;
    cfg.data_dir = data_dir;
    fed.spiking_enabled = spiking == "on";
    fed.spiking_mode =
        spike_mode == "final" ? flqdsnn::circuit::SpikeMode::final_layer : flqdsnn::circuit::SpikeMode::per_layer;
    fed.encoding_scale = encoding == "pi" ? flqdsnn::circuit::EncodingScale::pi : flqdsnn::circuit::EncodingScale::one;
    fed.tau_tick = tau_tick == "global" ? flqdsnn::fedcore::TauTick::global : flqdsnn::fedcore::TauTick::local;
    fed.batch_mode = batch == "full" ? flqdsnn::fedcore::BatchMode::full : flqdsnn::fedcore::BatchMode::per_sample;
    if (tau_fixed >= 0.0) {
        fed.tau_fixed = tau_fixed;
    }

    try {
        std::cerr << "resolved config: " << cfg.snapshot().dump() << '\n';
        const auto bundle = flqdsnn::experiment::run(cfg);
        print_result(bundle);
    } catch (const flqdsnn::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
