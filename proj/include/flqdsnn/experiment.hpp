#pragma once

#include "flqdsnn/fedcore.hpp"
#include "flqdsnn/metrics.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace flqdsnn::experiment {

enum class Kind { train, sweep_clients, sweep_threshold, ablation };

std::string to_string(Kind kind);

struct ExperimentConfig {
    Kind kind = Kind::train;
    /// "iris", "digits", "breast_cancer" or "csv:<path>".
    std::string dataset = "iris";
    std::string label_column = "label";
    std::filesystem::path data_dir;
    fedcore::FederationConfig federation;
    std::vector<int> client_list{5, 10, 15, 20, 25};
    std::vector<double> tau_list{0.0, 0.25, 0.5, 0.75, 1.0};
    /// Number of seeds; run k uses federation.seed + k.
    int repeats = 1;
    std::filesystem::path out_dir = "results";
    std::string preset = "desk";

    /// Throws ConfigError on empty sweep lists, thresholds outside [0, 1], etc.
    void validate() const;
    /// Every resolved setting, defaults included.
    nlohmann::ordered_json snapshot() const;
};

/// Desk-scale defaults: 5 clients, 20 local iterations, 30 rounds.
ExperimentConfig desk_defaults();

/// Full-scale preset: 20 clients, 100 local iterations, 100 rounds.
void apply_paper_preset(fedcore::FederationConfig& cfg);

struct RunRecord {
    std::uint64_t seed = 0;
    /// "on"/"off" for ablation arms, empty otherwise.
    std::string arm;
    int clients = 0;
    std::optional<double> tau_fixed;
    fedcore::FederatedResult result;
    metrics::ClassificationReport report;
};

struct ResultBundle {
    Kind kind = Kind::train;
    nlohmann::ordered_json config;
    std::vector<RunRecord> runs;
    nlohmann::ordered_json summary;
    std::vector<std::filesystem::path> files;
};

/// One federated training run on a freshly prepared split for `seed`.
RunRecord run_single(const ExperimentConfig& cfg, const fedcore::FederationConfig& federation, std::uint64_t seed);

ResultBundle run_train(const ExperimentConfig& cfg);
ResultBundle run_sweep_clients(const ExperimentConfig& cfg);
ResultBundle run_sweep_threshold(const ExperimentConfig& cfg);
ResultBundle run_ablation(const ExperimentConfig& cfg);

/// Dispatches on cfg.kind.
ResultBundle run(const ExperimentConfig& cfg);

double median(std::vector<double> values);

} // namespace flqdsnn::experiment
