#pragma once

#include "flqdsnn/circuit.hpp"
#include "flqdsnn/datasets.hpp"
#include "flqdsnn/matrix.hpp"
#include "flqdsnn/metrics.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace flqdsnn::fedcore {

using circuit::CircuitParams;

/// One client's private slice of the training data.
struct ClientShard {
    int client_id = 0;
    Matrix features;
    std::vector<int> labels;
    /// Row indices into the dataset the shard was cut from.
    std::vector<std::size_t> indices;

    std::size_t size() const { return labels.size(); }
};

/// Which counter advances the threshold schedule.
enum class TauTick { global, local };

/// Full-batch: one optimiser step per local iteration on the shard-mean
/// gradient. Per-sample: each local iteration is one pass over the shard with
/// a step per sample, in a freshly shuffled order.
enum class BatchMode { full, per_sample };

struct FederationConfig {
    int n_clients = 20;
    int local_iters = 100;
    int global_rounds = 100;
    double learning_rate = 0.05;
    double dirichlet_alpha = 0.5;
    std::uint64_t seed = 0;
    double tau_initial = 0.0;
    double tau_increment = 0.05;
    double tau_max = 1.0;
    std::optional<double> tau_fixed;
    TauTick tau_tick = TauTick::global;
    bool spiking_enabled = true;
    circuit::SpikeMode spiking_mode = circuit::SpikeMode::final_layer;
    circuit::EncodingScale encoding_scale = circuit::EncodingScale::pi;
    BatchMode batch_mode = BatchMode::full;
    int n_layers = 5;
    /// Worker threads for client training; 0 picks the hardware concurrency.
    int threads = 1;

    /// Throws ConfigError on any out-of-range field.
    void validate() const;
};

struct AdamState {
    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEpsilon = 1e-8;

    std::vector<double> m;
    std::vector<double> v;
    std::int64_t t = 0;

    AdamState() = default;
    explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

/// One bias-corrected Adam step, in place. Throws TrainingError on non-finite
/// gradients (parameters and state are left untouched) and UsageError on
/// shape mismatches.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, double lr);
void adam_step(CircuitParams& params, const CircuitParams& grads, AdamState& state, double lr);

/// Dirichlet(alpha) class allocation over clients. Every client receives at
/// least one row; the shards partition `labels` exactly. Returns row indices
/// per client, each sorted ascending.
std::vector<std::vector<std::size_t>> partition_indices(std::span<const int> labels, int n_classes, int n_clients,
                                                        double dirichlet_alpha, std::uint64_t seed);

std::vector<ClientShard> partition_non_iid(const datasets::Dataset& dataset, int n_clients, double dirichlet_alpha,
                                           std::uint64_t seed);

/// FNV-1a digest of the shard membership, used to pair runs that share a partition.
std::uint64_t partition_hash(std::span<const ClientShard> shards);

struct LocalOptions {
    int n_classes = 2;
    int local_iters = 1;
    double learning_rate = 0.05;
    circuit::SpikeConfig spike;
    circuit::EncodingScale encoding_scale = circuit::EncodingScale::pi;
    BatchMode batch_mode = BatchMode::full;
    /// Threshold for local iteration i; when empty `spike.threshold` is used throughout.
    std::function<double(int)> tau_at;
    /// Seed for the per-sample visiting order (per-sample mode only).
    std::uint64_t order_seed = 0;
};

struct LocalResult {
    CircuitParams params;
    /// Mean loss over the shard at the returned parameters.
    double final_loss = 0.0;
};

/// Mean loss and mean gradient over a set of rows at fixed parameters.
circuit::LossAndGradient batch_loss_and_gradient(const Matrix& features, std::span<const int> labels,
                                                 const CircuitParams& params, const circuit::SpikeConfig& spike,
                                                 int n_classes, circuit::EncodingScale scale);

/// Trains a private copy of `params` on the shard with a fresh Adam state.
LocalResult local_update(const ClientShard& shard, CircuitParams params, const LocalOptions& options);

/// Elementwise arithmetic mean. Throws UsageError on an empty list or mismatched shapes.
CircuitParams aggregate(std::span<const CircuitParams> client_params);

/// tau_fixed if set, else min(tau_initial + tau_increment * tick, tau_max).
double schedule_tau(std::int64_t tick, const FederationConfig& cfg);

struct RoundLog {
    int round = 0;
    double global_accuracy = 0.0;
    double global_loss = 0.0;
    double tau = 0.0;
    std::vector<double> per_client_loss;
};

struct FederatedResult {
    CircuitParams initial_params;
    CircuitParams final_params;
    std::vector<RoundLog> rounds;
    std::uint64_t partition_hash = 0;
    std::vector<std::size_t> shard_sizes;
    /// Threshold in force after the last round; used for evaluation.
    double final_tau = 0.0;
};

/// Class probabilities for every row, [N][n_classes].
Matrix predict_probs(const Matrix& features, const CircuitParams& params, const circuit::SpikeConfig& spike,
                     int n_classes, circuit::EncodingScale scale = circuit::EncodingScale::pi);

/// Observer invoked after each aggregation; may be empty.
using RoundObserver = std::function<void(const RoundLog&, const CircuitParams&)>;

/// Federated training: partition `train`, broadcast, local updates, mean
/// aggregation, per-round evaluation on `test`. Identical inputs give
/// bit-identical results regardless of `cfg.threads`.
FederatedResult train_federated(const datasets::Dataset& train, const datasets::Dataset& test,
                                const FederationConfig& cfg, const RoundObserver& observer = {});

/// Spike configuration the circuit sees at a given threshold.
circuit::SpikeConfig spike_config(const FederationConfig& cfg, double tau);

} // namespace flqdsnn::fedcore
