#include "flqdsnn/experiment.hpp"

#include "flqdsnn/datasets.hpp"
#include "flqdsnn/errors.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace flqdsnn::experiment {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::string hex(std::uint64_t v) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

void write_text(const fs::path& path, const std::string& text, ResultBundle& bundle) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    out << text;
    if (!out) {
        throw Error("write failed for " + path.string());
    }
    bundle.files.push_back(path);
}

std::string series_csv(const RunRecord& run) {
    std::ostringstream os;
    os << "round,accuracy,loss,tau\n";
    for (const auto& r : run.result.rounds) {
        os << r.round << ',' << num(r.global_accuracy) << ',' << num(r.global_loss) << ',' << num(r.tau) << '\n';
    }
    return os.str();
}

ordered_json report_json(const metrics::ClassificationReport& report) {
    ordered_json j;
    for (const auto& [k, v] : report.flatten()) {
        j[k] = v;
    }
    return j;
}

ordered_json run_json(const RunRecord& run) {
    ordered_json j;
    j["seed"] = run.seed;
    if (!run.arm.empty()) {
        j["arm"] = run.arm;
    }
    j["clients"] = run.clients;
    if (run.tau_fixed) {
        j["tau_fixed"] = *run.tau_fixed;
    }
    j["partition_hash"] = hex(run.result.partition_hash);
    j["shard_sizes"] = run.result.shard_sizes;
    j["final_tau"] = run.result.final_tau;
    j["final_accuracy"] = run.report.accuracy;
    j["report"] = report_json(run.report);
    return j;
}

ResultBundle start_bundle(const ExperimentConfig& cfg) {
    cfg.validate();
    ResultBundle bundle;
    bundle.kind = cfg.kind;
    bundle.config = cfg.snapshot();
    return bundle;
}

void finish_bundle(const ExperimentConfig& cfg, ResultBundle& bundle, ordered_json summary) {
    ordered_json runs = ordered_json::array();
    for (const auto& r : bundle.runs) {
        runs.push_back(run_json(r));
    }
    ordered_json doc;
    doc["experiment"] = to_string(cfg.kind);
    doc["config"] = bundle.config;
    doc["runs"] = std::move(runs);
    doc["summary"] = std::move(summary);
    bundle.summary = doc["summary"];
    write_text(cfg.out_dir / "summary.json", doc.dump(2) + "\n", bundle);
}

std::vector<double> accuracies(const std::vector<RunRecord>& runs) {
    std::vector<double> out;
    for (const auto& r : runs) {
        out.push_back(r.report.accuracy);
    }
    return out;
}

std::string mode_name(circuit::SpikeMode m) { return m == circuit::SpikeMode::final_layer ? "final" : "per-layer"; }

} // namespace

std::string to_string(Kind kind) {
    switch (kind) {
    case Kind::train:
        return "train";
    case Kind::sweep_clients:
        return "sweep-clients";
    case Kind::sweep_threshold:
        return "sweep-threshold";
    case Kind::ablation:
        return "ablation";
    }
    return "unknown";
}

ExperimentConfig desk_defaults() {
    ExperimentConfig cfg;
    cfg.data_dir = FLQDSNN_DATA_DIR;
    cfg.federation.n_clients = 5;
    cfg.federation.local_iters = 20;
    cfg.federation.global_rounds = 30;
    return cfg;
}

void apply_paper_preset(fedcore::FederationConfig& cfg) {
    cfg.n_clients = 20;
    cfg.local_iters = 100;
    cfg.global_rounds = 100;
}

void ExperimentConfig::validate() const {
    federation.validate();
    if (repeats < 1) {
        throw ConfigError("repeat count (--seeds) must be at least 1");
    }
    if (kind == Kind::sweep_clients) {
        if (client_list.empty()) {
            throw ConfigError("client sweep needs a non-empty client list");
        }
        for (int c : client_list) {
            if (c < 1) {
                throw ConfigError("client counts must be positive");
            }
        }
    }
    if (kind == Kind::sweep_threshold) {
        if (tau_list.empty()) {
            throw ConfigError("threshold sweep needs a non-empty threshold list");
        }
        for (double t : tau_list) {
            if (!(t >= 0.0 && t <= 1.0)) {
                throw ConfigError("threshold " + num(t) + " is outside [0, 1]");
            }
        }
    }
}

ordered_json ExperimentConfig::snapshot() const {
    const auto& f = federation;
    ordered_json j;
    j["experiment"] = to_string(kind);
    j["dataset"] = dataset;
    j["label_column"] = label_column;
    j["preset"] = preset;
    j["clients"] = f.n_clients;
    j["rounds"] = f.global_rounds;
    j["local_iters"] = f.local_iters;
    j["lr"] = f.learning_rate;
    j["alpha"] = f.dirichlet_alpha;
    j["seed"] = f.seed;
    j["seeds"] = repeats;
    j["tau_init"] = f.tau_initial;
    j["tau_inc"] = f.tau_increment;
    j["tau_max"] = f.tau_max;
    j["tau_fixed"] = f.tau_fixed ? ordered_json(*f.tau_fixed) : ordered_json(nullptr);
    j["tau_tick"] = f.tau_tick == fedcore::TauTick::global ? "global" : "local";
    j["spiking"] = f.spiking_enabled ? "on" : "off";
    j["spike_mode"] = mode_name(f.spiking_mode);
    j["encoding"] = f.encoding_scale == circuit::EncodingScale::pi ? "pi" : "one";
    j["batch"] = f.batch_mode == fedcore::BatchMode::full ? "full" : "per-sample";
    j["layers"] = f.n_layers;
    j["client_list"] = client_list;
    j["tau_list"] = tau_list;
    j["test_fraction"] = 0.2;
    j["features"] = 4;
    return j;
}

double median(std::vector<double> values) {
    if (values.empty()) {
        throw UsageError("median of an empty list");
    }
    std::sort(values.begin(), values.end());
    const auto n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

RunRecord run_single(const ExperimentConfig& cfg, const fedcore::FederationConfig& federation, std::uint64_t seed) {
    const auto raw = datasets::load_named(cfg.dataset, cfg.data_dir, cfg.label_column);
    const auto data = datasets::prepare(raw, seed);

    fedcore::FederationConfig fc = federation;
    fc.seed = seed;
    RunRecord rec;
    rec.seed = seed;
    rec.clients = fc.n_clients;
    rec.tau_fixed = fc.tau_fixed;
    rec.result = fedcore::train_federated(data.train, data.test, fc);

    const auto& params = fc.global_rounds > 0 ? rec.result.final_params : rec.result.initial_params;
    const auto probs = fedcore::predict_probs(data.test.features, params, fedcore::spike_config(fc, rec.result.final_tau),
                                              data.test.n_classes, fc.encoding_scale);
    rec.report = metrics::evaluate(probs, data.test.labels);
    return rec;
}

ResultBundle run_train(const ExperimentConfig& cfg) {
    auto bundle = start_bundle(cfg);
    for (int k = 0; k < cfg.repeats; ++k) {
        const auto seed = cfg.federation.seed + static_cast<std::uint64_t>(k);
        auto rec = run_single(cfg, cfg.federation, seed);
        write_text(cfg.out_dir / ("train_seed" + std::to_string(seed) + ".csv"), series_csv(rec), bundle);
        bundle.runs.push_back(std::move(rec));
    }
    const auto acc = accuracies(bundle.runs);
    ordered_json summary;
    summary["median_accuracy"] = median(acc);
    std::vector<double> f1;
    for (const auto& r : bundle.runs) {
        f1.push_back(r.report.macro_f1);
    }
    summary["median_macro_f1"] = median(f1);
    finish_bundle(cfg, bundle, std::move(summary));
    return bundle;
}

ResultBundle run_sweep_clients(const ExperimentConfig& cfg) {
    auto bundle = start_bundle(cfg);
    std::ostringstream csv;
    csv << "clients,seed,final_accuracy\n";
    ordered_json medians = ordered_json::array();
    for (int clients : cfg.client_list) {
        auto fc = cfg.federation;
        fc.n_clients = clients;
        std::vector<double> acc;
        for (int k = 0; k < cfg.repeats; ++k) {
            const auto seed = cfg.federation.seed + static_cast<std::uint64_t>(k);
            auto rec = run_single(cfg, fc, seed);
            csv << clients << ',' << seed << ',' << num(rec.report.accuracy) << '\n';
            acc.push_back(rec.report.accuracy);
            bundle.runs.push_back(std::move(rec));
        }
        medians.push_back({{"clients", clients}, {"median_accuracy", median(acc)}});
    }
    write_text(cfg.out_dir / "sweep_clients.csv", csv.str(), bundle);
    finish_bundle(cfg, bundle, {{"points", std::move(medians)}});
    return bundle;
}

ResultBundle run_sweep_threshold(const ExperimentConfig& cfg) {
    auto bundle = start_bundle(cfg);
    std::ostringstream csv;
    csv << "tau,seed,final_accuracy\n";
    ordered_json medians = ordered_json::array();
    for (double tau : cfg.tau_list) {
        auto fc = cfg.federation;
        fc.tau_fixed = tau;
        std::vector<double> acc;
        for (int k = 0; k < cfg.repeats; ++k) {
            const auto seed = cfg.federation.seed + static_cast<std::uint64_t>(k);
            auto rec = run_single(cfg, fc, seed);
            csv << num(tau) << ',' << seed << ',' << num(rec.report.accuracy) << '\n';
            acc.push_back(rec.report.accuracy);
            bundle.runs.push_back(std::move(rec));
        }
        medians.push_back({{"tau", tau}, {"median_accuracy", median(acc)}});
    }
    write_text(cfg.out_dir / "sweep_threshold.csv", csv.str(), bundle);
    finish_bundle(cfg, bundle, {{"points", std::move(medians)}});
    return bundle;
}

ResultBundle run_ablation(const ExperimentConfig& cfg) {
    auto bundle = start_bundle(cfg);
    std::ostringstream csv;
    csv << "seed,arm,accuracy,partition_hash\n";
    std::vector<double> on_acc;
    std::vector<double> off_acc;
    ordered_json pairs = ordered_json::array();
    for (int k = 0; k < cfg.repeats; ++k) {
        const auto seed = cfg.federation.seed + static_cast<std::uint64_t>(k);
        double arm_acc[2] = {0.0, 0.0};
        for (int a = 0; a < 2; ++a) {
            auto fc = cfg.federation;
            fc.spiking_enabled = a == 0;
            auto rec = run_single(cfg, fc, seed);
            rec.arm = a == 0 ? "on" : "off";
            csv << seed << ',' << rec.arm << ',' << num(rec.report.accuracy) << ',' << hex(rec.result.partition_hash)
                << '\n';
            write_text(cfg.out_dir / ("ablation_seed" + std::to_string(seed) + "_" + rec.arm + ".csv"), series_csv(rec),
                       bundle);
            arm_acc[a] = rec.report.accuracy;
            bundle.runs.push_back(std::move(rec));
        }
        on_acc.push_back(arm_acc[0]);
        off_acc.push_back(arm_acc[1]);
        pairs.push_back({{"seed", seed},
                         {"on_accuracy", arm_acc[0]},
                         {"off_accuracy", arm_acc[1]},
                         {"gap", arm_acc[0] - arm_acc[1]}});
    }
    write_text(cfg.out_dir / "ablation.csv", csv.str(), bundle);
    ordered_json summary;
    summary["pairs"] = std::move(pairs);
    summary["median_on_accuracy"] = median(on_acc);
    summary["median_off_accuracy"] = median(off_acc);
    summary["median_gap"] = median(on_acc) - median(off_acc);
    finish_bundle(cfg, bundle, std::move(summary));
    return bundle;
}

ResultBundle run(const ExperimentConfig& cfg) {
    switch (cfg.kind) {
    case Kind::train:
        return run_train(cfg);
    case Kind::sweep_clients:
        return run_sweep_clients(cfg);
    case Kind::sweep_threshold:
        return run_sweep_threshold(cfg);
    case Kind::ablation:
        return run_ablation(cfg);
    }
    throw UsageError("unknown experiment kind");
}

} // namespace flqdsnn::experiment
