#include "flqdsnn/datasets.hpp"
#include "flqdsnn/errors.hpp"
#include "flqdsnn/fedcore.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>

using namespace flqdsnn;
using namespace flqdsnn::fedcore;

namespace {

double total_variation(const std::vector<double>& a, const std::vector<double>& b) {
    double tv = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        tv += std::abs(a[i] - b[i]);
    }
    return tv / 2;
}

std::vector<double> histogram(std::span<const int> labels, std::span<const std::size_t> rows, int n_classes) {
    std::vector<double> h(static_cast<std::size_t>(n_classes), 0.0);
    for (auto r : rows) {
        h[static_cast<std::size_t>(labels[r])] += 1.0;
    }
    for (auto& v : h) {
        v /= static_cast<double>(rows.size());
    }
    return h;
}

datasets::PreparedData prepared_iris(std::uint64_t seed = 0) {
    return datasets::prepare(datasets::load_builtin_iris(), seed);
}

FederationConfig small_config() {
    FederationConfig cfg;
    cfg.n_clients = 3;
    cfg.local_iters = 3;
    cfg.global_rounds = 3;
    return cfg;
}

} // namespace

TEST(Adam, ZeroGradientLeavesParamsUnchanged) {
    std::vector<double> p{0.3, -1.2, 4.0};
    const auto before = p;
    AdamState st(3);
    adam_step(p, std::vector<double>{0, 0, 0}, st, 0.05);
    EXPECT_EQ(p, before);
    EXPECT_EQ(st.t, 1);
}

TEST(Adam, FirstStepClosedForm) {
    std::vector<double> p{1.0};
    AdamState st(1);
    adam_step(p, std::vector<double>{1.0}, st, 0.05);
    // Step 1 reduces to lr * g / (|g| + eps).
    EXPECT_NEAR(p[0], 1.0 - 0.05 * 1.0 / (1.0 + 1e-8), 1e-12);
    EXPECT_NEAR(p[0], oracle::adam_scalar(1.0, 1.0, 0.05, 1), 1e-12);
}

TEST(Adam, TwoStepsMatchHandEvaluation) {
    for (double g : {1.0, -0.37, 2.5e-3}) {
        std::vector<double> p{0.7};
        AdamState st(1);
        adam_step(p, std::vector<double>{g}, st, 0.05);
        adam_step(p, std::vector<double>{g}, st, 0.05);
        EXPECT_NEAR(p[0], oracle::adam_scalar(0.7, g, 0.05, 2), 1e-12);
    }
}

TEST(Adam, NonFiniteGradientAbortsWithoutMutation) {
    std::vector<double> p{0.1, 0.2};
    AdamState st(2);
    EXPECT_THROW(adam_step(p, std::vector<double>{0.5, std::numeric_limits<double>::quiet_NaN()}, st, 0.05),
                 TrainingError);
    EXPECT_EQ(p, (std::vector<double>{0.1, 0.2}));
    EXPECT_EQ(st.t, 0);
    EXPECT_EQ(st.m, (std::vector<double>{0, 0}));
}

TEST(Adam, ShapeMismatch) {
    std::vector<double> p{0.1, 0.2};
    AdamState st(2);
    EXPECT_THROW(adam_step(p, std::vector<double>{0.5}, st, 0.05), UsageError);
}

TEST(Aggregate, Examples) {
    CircuitParams a(5, 4);
    CircuitParams b(5, 4);
    std::fill(a.values().begin(), a.values().end(), 1.0);
    std::fill(b.values().begin(), b.values().end(), 3.0);
    const std::vector<CircuitParams> one{a};
    EXPECT_EQ(aggregate(one), a);
    const std::vector<CircuitParams> two{a, b};
    const auto mean = aggregate(two);
    for (double v : mean.values()) {
        EXPECT_EQ(v, 2.0);
    }
    std::mt19937_64 rng(1);
    const auto r = CircuitParams::random_uniform(5, 4, rng);
    const std::vector<CircuitParams> copies(7, r);
    EXPECT_EQ(aggregate(copies), r);
}

TEST(Aggregate, Errors) {
    EXPECT_THROW(aggregate(std::vector<CircuitParams>{}), UsageError);
    EXPECT_THROW(aggregate(std::vector<CircuitParams>{CircuitParams(5, 4), CircuitParams(4, 4)}), UsageError);
}

TEST(AggregateProperty, ExactMeanAndPermutationInvariance) {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 50; ++trial) {
        const int k = 1 + trial % 25;
        std::vector<CircuitParams> clients;
        for (int c = 0; c < k; ++c) {
            clients.push_back(CircuitParams::random_uniform(5, 4, rng));
        }
        const auto mean = aggregate(clients);
        for (std::size_t i = 0; i < mean.size(); ++i) {
            long double s = 0.0L;
            for (const auto& c : clients) {
                s += c.values()[i];
            }
            EXPECT_NEAR(mean.values()[i], static_cast<double>(s / k), 1e-15);
        }
        std::shuffle(clients.begin(), clients.end(), rng);
        const auto shuffled = aggregate(clients);
        for (std::size_t i = 0; i < mean.size(); ++i) {
            EXPECT_NEAR(shuffled.values()[i], mean.values()[i], 1e-15);
        }
    }
}

TEST(Partition, IrisFiveClients) {
    const auto iris = datasets::load_builtin_iris();
    const auto shards = partition_non_iid(iris, 5, 0.5, 3);
    ASSERT_EQ(shards.size(), 5U);
    std::set<std::size_t> seen;
    std::size_t total = 0;
    for (const auto& s : shards) {
        EXPECT_GE(s.size(), 1U);
        total += s.size();
        for (auto i : s.indices) {
            EXPECT_TRUE(seen.insert(i).second) << "row " << i << " in two shards";
        }
        for (std::size_t r = 0; r < s.size(); ++r) {
            EXPECT_EQ(s.labels[r], iris.labels[s.indices[r]]);
        }
    }
    EXPECT_EQ(total, 150U);
}

TEST(PartitionProperty, DisjointAndCompleteOverRandomConfigs) {
    std::mt19937_64 rng(2025);
    for (int trial = 0; trial < 100; ++trial) {
        const int n_classes = 2 + static_cast<int>(rng() % 9);
        const std::size_t n = 30 + rng() % 500;
        std::vector<int> labels(n);
        for (auto& l : labels) {
            l = static_cast<int>(rng() % static_cast<std::uint64_t>(n_classes));
        }
        const int n_clients = 1 + static_cast<int>(rng() % 25);
        const double alpha = std::vector<double>{0.05, 0.1, 0.5, 1.0, 10.0, 1e6}[rng() % 6];
        const auto parts = partition_indices(labels, n_classes, n_clients, alpha, rng());
        ASSERT_EQ(parts.size(), static_cast<std::size_t>(n_clients));
        std::vector<int> hits(n, 0);
        for (const auto& p : parts) {
            EXPECT_FALSE(p.empty());
            EXPECT_TRUE(std::is_sorted(p.begin(), p.end()));
            for (auto i : p) {
                ASSERT_LT(i, n);
                ++hits[i];
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            EXPECT_EQ(hits[i], 1) << "trial " << trial << " row " << i;
        }
    }
}

TEST(PartitionProperty, LargeAlphaIsNearlyIid) {
    const auto iris = datasets::load_builtin_iris();
    std::vector<std::size_t> all(iris.size());
    std::iota(all.begin(), all.end(), 0);
    const auto global = histogram(iris.labels, all, 3);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        for (const auto& p : partition_indices(iris.labels, 3, 5, 1e6, seed)) {
            EXPECT_LT(total_variation(histogram(iris.labels, p, 3), global), 0.1) << "seed " << seed;
        }
    }
}

TEST(PartitionProperty, SmallAlphaIsSkewed) {
    const auto iris = datasets::load_builtin_iris();
    std::vector<std::size_t> all(iris.size());
    std::iota(all.begin(), all.end(), 0);
    const auto global = histogram(iris.labels, all, 3);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        double worst = 0.0;
        for (const auto& p : partition_indices(iris.labels, 3, 5, 0.1, seed)) {
            worst = std::max(worst, total_variation(histogram(iris.labels, p, 3), global));
        }
        EXPECT_GT(worst, 0.3) << "seed " << seed;
    }
}

TEST(Partition, DeterministicUnderSeed) {
    const auto iris = datasets::load_builtin_iris();
    EXPECT_EQ(partition_indices(iris.labels, 3, 7, 0.5, 11), partition_indices(iris.labels, 3, 7, 0.5, 11));
    EXPECT_EQ(partition_hash(partition_non_iid(iris, 7, 0.5, 11)), partition_hash(partition_non_iid(iris, 7, 0.5, 11)));
}

TEST(Partition, Errors) {
    const std::vector<int> labels{0, 1, 0};
    EXPECT_THROW(partition_indices(labels, 2, 4, 0.5, 0), ConfigError);
    EXPECT_THROW(partition_indices(labels, 2, 2, 0.0, 0), ConfigError);
    EXPECT_THROW(partition_indices(std::vector<int>{0, 5}, 2, 1, 0.5, 0), ValidationError);
}

TEST(Schedule, Examples) {
    FederationConfig cfg;
    EXPECT_DOUBLE_EQ(schedule_tau(0, cfg), 0.0);
    EXPECT_DOUBLE_EQ(schedule_tau(10, cfg), 0.5);
    EXPECT_DOUBLE_EQ(schedule_tau(40, cfg), 1.0);
    cfg.tau_fixed = 0.25;
    EXPECT_DOUBLE_EQ(schedule_tau(0, cfg), 0.25);
    EXPECT_DOUBLE_EQ(schedule_tau(40, cfg), 0.25);
}

TEST(ScheduleProperty, NonDecreasingAndCapped) {
    FederationConfig cfg;
    cfg.tau_initial = 0.1;
    cfg.tau_increment = 0.07;
    cfg.tau_max = 0.8;
    double prev = 0.0;
    for (int t = 0; t < 200; ++t) {
        const double tau = schedule_tau(t, cfg);
        EXPECT_GE(tau, prev);
        EXPECT_LE(tau, 0.8);
        prev = tau;
    }
}

TEST(Config, Validation) {
    FederationConfig cfg;
    EXPECT_NO_THROW(cfg.validate());
    auto bad = cfg;
    bad.n_clients = 0;
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = cfg;
    bad.learning_rate = 0;
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = cfg;
    bad.tau_max = 1.5;
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = cfg;
    bad.tau_fixed = -0.1;
    EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(LocalUpdate, ZeroIterationsReturnsParams) {
    const auto data = prepared_iris();
    const auto shards = partition_non_iid(data.train, 3, 0.5, 0);
    std::mt19937_64 rng(0);
    const auto p = CircuitParams::random_uniform(5, 4, rng);
    LocalOptions opts;
    opts.n_classes = 3;
    opts.local_iters = 0;
    EXPECT_EQ(local_update(shards[0], p, opts).params, p);
}

TEST(LocalUpdate, SingleSampleSingleStep) {
    const auto data = prepared_iris();
    ClientShard shard;
    shard.features.append_row(data.train.features.row(4));
    shard.labels = {data.train.labels[4]};
    shard.indices = {4};
    std::mt19937_64 rng(12);
    const auto p = CircuitParams::random_uniform(5, 4, rng);
    LocalOptions opts;
    opts.n_classes = 3;
    opts.local_iters = 1;
    opts.learning_rate = 0.05;
    opts.spike = {true, 0.3, circuit::SpikeMode::final_layer};

    const auto g = circuit::gradient(shard.features.row(0), shard.labels[0], p, opts.spike, 3);
    const auto out = local_update(shard, p, opts);
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double expected = oracle::adam_scalar(p.values()[i], g.values()[i], 0.05, 1);
        EXPECT_NEAR(out.params.values()[i], expected, 1e-12);
    }
    const auto fwd = circuit::forward(shard.features.row(0), out.params, opts.spike, 3);
    EXPECT_NEAR(out.final_loss, circuit::loss(fwd.class_probs, shard.labels[0], 3), 1e-15);
}

TEST(LocalUpdate, LossDecreasesOverIterations) {
    std::vector<double> one;
    std::vector<double> twenty;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto data = prepared_iris(seed);
        const auto shards = partition_non_iid(data.train, 3, 0.5, seed);
        std::mt19937_64 rng(seed);
        const auto p = CircuitParams::random_uniform(5, 4, rng);
        LocalOptions opts;
        opts.n_classes = 3;
        opts.spike = {true, 0.0, circuit::SpikeMode::final_layer};
        opts.local_iters = 1;
        one.push_back(local_update(shards[0], p, opts).final_loss);
        opts.local_iters = 20;
        twenty.push_back(local_update(shards[0], p, opts).final_loss);
    }
    std::sort(one.begin(), one.end());
    std::sort(twenty.begin(), twenty.end());
    EXPECT_LE(twenty[2], one[2]);
}

TEST(LocalUpdate, PerSampleModeRuns) {
    const auto data = prepared_iris();
    const auto shards = partition_non_iid(data.train, 3, 0.5, 0);
    std::mt19937_64 rng(0);
    const auto p = CircuitParams::random_uniform(5, 4, rng);
    LocalOptions opts;
    opts.n_classes = 3;
    opts.local_iters = 2;
    opts.batch_mode = BatchMode::per_sample;
    opts.order_seed = 5;
    const auto a = local_update(shards[0], p, opts);
    const auto b = local_update(shards[0], p, opts);
    EXPECT_EQ(a.params, b.params);
    EXPECT_NE(a.params, p);
    EXPECT_TRUE(a.params.all_finite());
}

TEST(Federated, ZeroRounds) {
    const auto data = prepared_iris();
    auto cfg = small_config();
    cfg.global_rounds = 0;
    const auto r = train_federated(data.train, data.test, cfg);
    EXPECT_TRUE(r.rounds.empty());
    EXPECT_EQ(r.final_params, r.initial_params);
}

TEST(Federated, InitialAnglesInRange) {
    const auto data = prepared_iris();
    const auto r = train_federated(data.train, data.test, small_config());
    for (double v : r.initial_params.values()) {
        EXPECT_GE(v, 0.0);
        EXPECT_LT(v, 2 * std::numbers::pi);
    }
}

TEST(Federated, SingleClientEqualsCentralTraining) {
    const auto data = prepared_iris(2);
    auto cfg = small_config();
    cfg.n_clients = 1;
    cfg.global_rounds = 1;
    cfg.local_iters = 7;
    const auto fed = train_federated(data.train, data.test, cfg);

    ClientShard all;
    all.features = data.train.features;
    all.labels = data.train.labels;
    all.indices.resize(data.train.size());
    std::iota(all.indices.begin(), all.indices.end(), 0);
    LocalOptions opts;
    opts.n_classes = 3;
    opts.local_iters = 7;
    opts.learning_rate = cfg.learning_rate;
    opts.spike = spike_config(cfg, schedule_tau(0, cfg));
    const auto central = local_update(all, fed.initial_params, opts);
    EXPECT_EQ(fed.final_params, central.params);
}

TEST(Federated, DeterministicAndThreadInvariant) {
    const auto data = prepared_iris(1);
    auto cfg = small_config();
    cfg.n_clients = 4;
    const auto a = train_federated(data.train, data.test, cfg);
    const auto b = train_federated(data.train, data.test, cfg);
    cfg.threads = 4;
    const auto c = train_federated(data.train, data.test, cfg);
    for (const auto* other : {&b, &c}) {
        EXPECT_EQ(a.final_params, other->final_params);
        ASSERT_EQ(a.rounds.size(), other->rounds.size());
        for (std::size_t i = 0; i < a.rounds.size(); ++i) {
            EXPECT_EQ(a.rounds[i].global_accuracy, other->rounds[i].global_accuracy);
            EXPECT_EQ(a.rounds[i].global_loss, other->rounds[i].global_loss);
            EXPECT_EQ(a.rounds[i].per_client_loss, other->rounds[i].per_client_loss);
            EXPECT_EQ(a.rounds[i].tau, other->rounds[i].tau);
        }
    }
}

TEST(Federated, TauTraceFollowsSchedule) {
    const auto data = prepared_iris();
    auto cfg = small_config();
    cfg.global_rounds = 5;
    cfg.tau_increment = 0.3;
    const auto r = train_federated(data.train, data.test, cfg);
    double prev = -1.0;
    for (const auto& log : r.rounds) {
        EXPECT_GE(log.tau, prev);
        EXPECT_LE(log.tau, cfg.tau_max);
        EXPECT_DOUBLE_EQ(log.tau, schedule_tau(log.round, cfg));
        EXPECT_GE(log.global_accuracy, 0.0);
        EXPECT_LE(log.global_accuracy, 1.0);
        prev = log.tau;
    }
}

TEST(Federated, ObserverSeesEveryRound) {
    const auto data = prepared_iris();
    int calls = 0;
    train_federated(data.train, data.test, small_config(), [&](const RoundLog& log, const CircuitParams& p) {
        EXPECT_EQ(log.round, calls);
        EXPECT_TRUE(p.all_finite());
        ++calls;
    });
    EXPECT_EQ(calls, 3);
}

TEST(Federated, SpikingDisabledTraceHasNoPauliX) {
    const auto data = prepared_iris();
    auto cfg = small_config();
    cfg.spiking_enabled = false;
    const auto r = train_federated(data.train, data.test, cfg);
    const auto spike = spike_config(cfg, r.final_tau);
    const auto mask = circuit::compute_spike_mask(r.final_params, spike);
    const auto trace = circuit::build_circuit(data.test.features.row(0), r.final_params, mask);
    EXPECT_TRUE(std::none_of(trace.begin(), trace.end(),
                             [](const qsim::Gate& g) { return g.kind == qsim::GateKind::PauliX; }));
}
