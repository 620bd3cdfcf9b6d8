#include "flqdsnn/fedcore.hpp"

#include "flqdsnn/errors.hpp"
#include "flqdsnn/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <numeric>
#include <random>
#include <string>
#include <thread>

namespace flqdsnn::fedcore {
namespace {

// Each attempt redraws every class allocation; after that, empty shards are
// filled from the largest one.
constexpr int kPartitionAttempts = 16;

std::vector<double> dirichlet(int k, double alpha, std::mt19937_64& rng) {
    std::gamma_distribution<double> gamma(alpha, 1.0);
    std::vector<double> w(static_cast<std::size_t>(k));
    double total = 0.0;
    for (auto& x : w) {
        x = gamma(rng);
        total += x;
    }
    if (!(total > 0.0)) {
        // Every draw underflowed (tiny alpha): put all mass on one client.
        std::uniform_int_distribution<int> pick(0, k - 1);
        std::fill(w.begin(), w.end(), 0.0);
        w[static_cast<std::size_t>(pick(rng))] = 1.0;
        return w;
    }
    for (auto& x : w) {
        x /= total;
    }
    return w;
}

void run_parallel(int n_tasks, int threads, const std::function<void(int)>& task) {
    if (threads <= 0) {
        threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    }
    threads = std::min(threads, n_tasks);
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n_tasks));
    auto guarded = [&](int i) {
        try {
            task(i);
        } catch (...) {
            errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
    };
    if (threads <= 1) {
        for (int i = 0; i < n_tasks; ++i) {
            guarded(i);
        }
    } else {
        std::atomic<int> next{0};
        std::vector<std::jthread> pool;
        for (int t = 0; t < threads; ++t) {
            pool.emplace_back([&] {
                for (int i = next++; i < n_tasks; i = next++) {
                    guarded(i);
                }
            });
        }
    }
    // Lowest failing task wins so the reported error does not depend on scheduling.
    for (auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

} // namespace

void FederationConfig::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) {
            throw ConfigError(what);
        }
    };
    require(n_clients >= 1, "n_clients must be positive");
    require(local_iters >= 0, "local_iters must be non-negative");
    require(global_rounds >= 0, "global_rounds must be non-negative");
    require(learning_rate > 0.0, "learning_rate must be positive");
    require(dirichlet_alpha > 0.0, "dirichlet_alpha must be positive");
    require(tau_initial >= 0.0 && tau_initial <= 1.0, "tau_initial must lie in [0, 1]");
    require(tau_max >= 0.0 && tau_max <= 1.0, "tau_max must lie in [0, 1]");
    require(tau_initial <= tau_max, "tau_initial must not exceed tau_max");
    require(tau_increment >= 0.0 && std::isfinite(tau_increment), "tau_increment must be a non-negative number");
    require(!tau_fixed || (*tau_fixed >= 0.0 && *tau_fixed <= 1.0), "tau_fixed must lie in [0, 1]");
    require(n_layers >= 1, "n_layers must be positive");
    require(threads >= 0, "threads must be non-negative");
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, double lr) {
    if (params.size() != grads.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
        throw UsageError("adam_step: parameter, gradient and moment sizes differ");
    }
    for (std::size_t i = 0; i < grads.size(); ++i) {
        if (!std::isfinite(grads[i])) {
            throw TrainingError("non-finite gradient at parameter " + std::to_string(i) + " (step " +
                                std::to_string(state.t + 1) + ")");
        }
    }
    ++state.t;
    const double c1 = 1.0 - std::pow(AdamState::kBeta1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(AdamState::kBeta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        state.m[i] = AdamState::kBeta1 * state.m[i] + (1.0 - AdamState::kBeta1) * g;
        state.v[i] = AdamState::kBeta2 * state.v[i] + (1.0 - AdamState::kBeta2) * g * g;
        const double m_hat = state.m[i] / c1;
        const double v_hat = state.v[i] / c2;
        params[i] -= lr * m_hat / (std::sqrt(v_hat) + AdamState::kEpsilon);
    }
}

void adam_step(CircuitParams& params, const CircuitParams& grads, AdamState& state, double lr) {
    if (!params.same_shape(grads)) {
        throw UsageError("adam_step: gradient shape differs from parameters");
    }
    adam_step(params.values(), grads.values(), state, lr);
}

std::vector<std::vector<std::size_t>> partition_indices(std::span<const int> labels, int n_classes, int n_clients,
                                                        double dirichlet_alpha, std::uint64_t seed) {
    if (n_clients < 1 || static_cast<std::size_t>(n_clients) > labels.size()) {
        throw ConfigError("cannot split " + std::to_string(labels.size()) + " samples across " +
                          std::to_string(n_clients) + " clients");
    }
    if (!(dirichlet_alpha > 0.0)) {
        throw ConfigError("dirichlet_alpha must be positive");
    }
    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(n_classes));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= n_classes) {
            throw ValidationError("label " + std::to_string(labels[i]) + " out of range at row " + std::to_string(i));
        }
        by_class[static_cast<std::size_t>(labels[i])].push_back(i);
    }

    std::mt19937_64 rng(derive_seed(seed, {kStreamPartition}));
    const auto k = static_cast<std::size_t>(n_clients);
    std::vector<std::vector<std::size_t>> shards;
    for (int attempt = 0; attempt < kPartitionAttempts; ++attempt) {
        shards.assign(k, {});
        for (auto members : by_class) {
            std::shuffle(members.begin(), members.end(), rng);
            const auto weights = dirichlet(n_clients, dirichlet_alpha, rng);
            double cumulative = 0.0;
            std::size_t start = 0;
            for (std::size_t c = 0; c < k; ++c) {
                cumulative += weights[c];
                const auto end = c + 1 == k ? members.size()
                                            : std::min(members.size(), static_cast<std::size_t>(std::llround(
                                                                           cumulative * static_cast<double>(members.size()))));
                for (std::size_t j = start; j < std::max(start, end); ++j) {
                    shards[c].push_back(members[j]);
                }
                start = std::max(start, end);
            }
        }
        if (std::none_of(shards.begin(), shards.end(), [](const auto& s) { return s.empty(); })) {
            break;
        }
    }
    for (auto& shard : shards) {
        if (!shard.empty()) {
            continue;
        }
        auto donor = std::max_element(shards.begin(), shards.end(),
                                      [](const auto& a, const auto& b) { return a.size() < b.size(); });
        shard.push_back(donor->back());
        donor->pop_back();
    }
    for (auto& shard : shards) {
        std::sort(shard.begin(), shard.end());
    }
    return shards;
}

std::vector<ClientShard> partition_non_iid(const datasets::Dataset& dataset, int n_clients, double dirichlet_alpha,
                                           std::uint64_t seed) {
    const auto parts = partition_indices(dataset.labels, dataset.n_classes, n_clients, dirichlet_alpha, seed);
    std::vector<ClientShard> shards;
    shards.reserve(parts.size());
    for (std::size_t c = 0; c < parts.size(); ++c) {
        ClientShard s;
        s.client_id = static_cast<int>(c);
        s.indices = parts[c];
        s.features = dataset.features.select_rows(s.indices);
        for (auto i : s.indices) {
            s.labels.push_back(dataset.labels[i]);
        }
        shards.push_back(std::move(s));
    }
    return shards;
}

std::uint64_t partition_hash(std::span<const ClientShard> shards) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&h](std::uint64_t v) {
        for (int b = 0; b < 8; ++b) {
            h ^= (v >> (8 * b)) & 0xff;
            h *= 0x100000001b3ULL;
        }
    };
    for (const auto& s : shards) {
        feed(static_cast<std::uint64_t>(s.client_id));
        feed(s.indices.size());
        for (auto i : s.indices) {
            feed(i);
        }
    }
    return h;
}

circuit::LossAndGradient batch_loss_and_gradient(const Matrix& features, std::span<const int> labels,
                                                 const CircuitParams& params, const circuit::SpikeConfig& spike,
                                                 int n_classes, circuit::EncodingScale scale) {
    if (features.rows() != labels.size() || labels.empty()) {
        throw UsageError("batch gradient needs a non-empty batch with one label per row");
    }
    circuit::LossAndGradient total;
    total.gradient = CircuitParams(params.n_layers(), params.n_qubits());
    auto acc = total.gradient.values();
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto one = circuit::loss_and_gradient(features.row(i), labels[i], params, spike, n_classes, scale);
        total.loss += one.loss;
        const auto g = one.gradient.values();
        for (std::size_t j = 0; j < acc.size(); ++j) {
            acc[j] += g[j];
        }
    }
    const auto n = static_cast<double>(labels.size());
    total.loss /= n;
    for (auto& v : acc) {
        v /= n;
    }
    return total;
}

LocalResult local_update(const ClientShard& shard, CircuitParams params, const LocalOptions& options) {
    if (shard.size() == 0) {
        throw UsageError("client " + std::to_string(shard.client_id) + " has an empty shard");
    }
    AdamState adam(params.size());
    circuit::SpikeConfig spike = options.spike;
    std::mt19937_64 order_rng(options.order_seed);
    std::vector<std::size_t> order(shard.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (int it = 0; it < options.local_iters; ++it) {
        if (options.tau_at) {
            spike.threshold = options.tau_at(it);
        }
        if (options.batch_mode == BatchMode::full) {
            const auto step = batch_loss_and_gradient(shard.features, shard.labels, params, spike, options.n_classes,
                                                      options.encoding_scale);
            adam_step(params, step.gradient, adam, options.learning_rate);
        } else {
            std::shuffle(order.begin(), order.end(), order_rng);
            for (auto i : order) {
                const auto step = circuit::loss_and_gradient(shard.features.row(i), shard.labels[i], params, spike,
                                                             options.n_classes, options.encoding_scale);
                adam_step(params, step.gradient, adam, options.learning_rate);
            }
        }
        if (!params.all_finite()) {
            throw TrainingError("client " + std::to_string(shard.client_id) + ": non-finite parameters after iteration " +
                                std::to_string(it));
        }
    }

    LocalResult out;
    double total = 0.0;
    for (std::size_t i = 0; i < shard.size(); ++i) {
        const auto fwd = circuit::forward(shard.features.row(i), params, spike, options.n_classes, options.encoding_scale);
        total += circuit::loss(fwd.class_probs, shard.labels[i], options.n_classes);
    }
    out.final_loss = total / static_cast<double>(shard.size());
    out.params = std::move(params);
    return out;
}

CircuitParams aggregate(std::span<const CircuitParams> client_params) {
    if (client_params.empty()) {
        throw UsageError("aggregate needs at least one client");
    }
    const auto& first = client_params.front();
    for (const auto& p : client_params) {
        if (!p.same_shape(first)) {
            throw UsageError("aggregate: client parameter shapes differ");
        }
    }
    // Extended-precision accumulation keeps the mean correctly rounded for
    // typical client counts, so identical inputs average to themselves.
    CircuitParams out(first.n_layers(), first.n_qubits());
    auto dst = out.values();
    const auto n = static_cast<long double>(client_params.size());
    for (std::size_t j = 0; j < dst.size(); ++j) {
        long double sum = 0.0L;
        for (const auto& p : client_params) {
            sum += p.values()[j];
        }
        dst[j] = static_cast<double>(sum / n);
    }
    return out;
}

double schedule_tau(std::int64_t tick, const FederationConfig& cfg) {
    if (cfg.tau_fixed) {
        return *cfg.tau_fixed;
    }
    return std::min(cfg.tau_initial + cfg.tau_increment * static_cast<double>(tick), cfg.tau_max);
}

circuit::SpikeConfig spike_config(const FederationConfig& cfg, double tau) {
    return circuit::SpikeConfig{cfg.spiking_enabled, tau, cfg.spiking_mode};
}

Matrix predict_probs(const Matrix& features, const CircuitParams& params, const circuit::SpikeConfig& spike,
                     int n_classes, circuit::EncodingScale scale) {
    Matrix out(features.rows(), static_cast<std::size_t>(n_classes));
    const auto mask = circuit::compute_spike_mask(params, spike);
    for (std::size_t r = 0; r < features.rows(); ++r) {
        const auto fwd = circuit::forward_with_mask(features.row(r), params, mask, n_classes, scale);
        std::copy(fwd.class_probs.begin(), fwd.class_probs.end(), out.row(r).begin());
    }
    return out;
}

FederatedResult train_federated(const datasets::Dataset& train, const datasets::Dataset& test,
                                const FederationConfig& cfg, const RoundObserver& observer) {
    cfg.validate();
    if (train.size() == 0 || test.size() == 0) {
        throw UsageError("train_federated needs non-empty train and test splits");
    }
    const int n_qubits = static_cast<int>(train.n_features());
    const auto shards = partition_non_iid(train, cfg.n_clients, cfg.dirichlet_alpha, cfg.seed);

    std::mt19937_64 init_rng(derive_seed(cfg.seed, {kStreamInit}));
    FederatedResult result;
    result.initial_params = CircuitParams::random_uniform(cfg.n_layers, n_qubits, init_rng);
    result.partition_hash = partition_hash(shards);
    for (const auto& s : shards) {
        result.shard_sizes.push_back(s.size());
    }

    const auto per_round = static_cast<std::int64_t>(cfg.local_iters);
    auto eval_tick = [&](int round) -> std::int64_t {
        if (cfg.tau_tick == TauTick::global) {
            return round;
        }
        return round * per_round + std::max<std::int64_t>(per_round - 1, 0);
    };

    CircuitParams global = result.initial_params;
    result.final_tau = schedule_tau(0, cfg);
    const auto n_clients = static_cast<int>(shards.size());

    for (int round = 0; round < cfg.global_rounds; ++round) {
        const double round_tau = schedule_tau(round, cfg);
        std::vector<LocalResult> locals(shards.size());

        run_parallel(n_clients, cfg.threads, [&](int c) {
            LocalOptions opts;
            opts.n_classes = train.n_classes;
            opts.local_iters = cfg.local_iters;
            opts.learning_rate = cfg.learning_rate;
            opts.spike = spike_config(cfg, round_tau);
            opts.encoding_scale = cfg.encoding_scale;
            opts.batch_mode = cfg.batch_mode;
            opts.order_seed = derive_seed(cfg.seed, {kStreamClient, static_cast<std::uint64_t>(round),
                                                     static_cast<std::uint64_t>(c)});
            if (cfg.tau_tick == TauTick::local) {
                opts.tau_at = [&cfg, round, per_round](int it) { return schedule_tau(round * per_round + it, cfg); };
            }
            locals[static_cast<std::size_t>(c)] = local_update(shards[static_cast<std::size_t>(c)], global, opts);
        });

        std::vector<CircuitParams> client_params;
        client_params.reserve(locals.size());
        RoundLog log;
        log.round = round;
        for (auto& l : locals) {
            log.per_client_loss.push_back(l.final_loss);
            client_params.push_back(std::move(l.params));
        }
        global = aggregate(client_params);

        log.tau = schedule_tau(eval_tick(round), cfg);
        const auto probs = predict_probs(test.features, global, spike_config(cfg, log.tau), test.n_classes,
                                         cfg.encoding_scale);
        const auto report = metrics::evaluate(probs, test.labels);
        log.global_accuracy = report.accuracy;
        log.global_loss = report.mse;
        result.final_tau = log.tau;
        if (observer) {
            observer(log, global);
        }
        result.rounds.push_back(std::move(log));
    }
    result.final_params = std::move(global);
    return result;
}

} // namespace flqdsnn::fedcore
