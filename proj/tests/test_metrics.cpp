#include "flqdsnn/errors.hpp"
#include "flqdsnn/metrics.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

using namespace flqdsnn;
using namespace flqdsnn::metrics;

namespace {

Matrix one_hot(const std::vector<int>& cls, int n_classes) {
    Matrix m(cls.size(), static_cast<std::size_t>(n_classes));
    for (std::size_t i = 0; i < cls.size(); ++i) {
        m(i, static_cast<std::size_t>(cls[i])) = 1.0;
    }
    return m;
}

} // namespace

TEST(Metrics, ArgmaxTiesGoLow) {
    EXPECT_EQ(argmax(std::vector<double>{0.2, 0.5, 0.3}), 1);
    EXPECT_EQ(argmax(std::vector<double>{0.4, 0.2, 0.4}), 0);
    EXPECT_EQ(argmax(std::vector<double>{0.25, 0.25, 0.25, 0.25}), 0);
}

TEST(Metrics, PerfectPredictions) {
    const std::vector<int> y{0, 1, 2, 2, 1};
    const auto r = evaluate(one_hot(y, 3), y);
    EXPECT_EQ(r.accuracy, 1.0);
    EXPECT_EQ(r.macro_precision, 1.0);
    EXPECT_EQ(r.macro_recall, 1.0);
    EXPECT_EQ(r.macro_f1, 1.0);
    EXPECT_EQ(r.mse, 0.0);
}

TEST(Metrics, AllPredictedClassZero) {
    const std::vector<int> y{0, 0, 1, 1};
    const auto r = evaluate(one_hot({0, 0, 0, 0}, 2), y);
    EXPECT_DOUBLE_EQ(r.accuracy, 0.5);
    EXPECT_DOUBLE_EQ(r.macro_recall, 0.5);
    EXPECT_DOUBLE_EQ(r.per_class[0].precision, 0.5);
    EXPECT_DOUBLE_EQ(r.per_class[1].precision, 0.0);
    EXPECT_DOUBLE_EQ(r.per_class[1].f1, 0.0);
}

TEST(Metrics, MatchesConfusionMatrixOracle) {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 30;
        const int k = 3;
        Matrix probs(n, k);
        std::vector<int> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (int c = 0; c < k; ++c) {
                probs(i, static_cast<std::size_t>(c)) = u(rng);
                s += probs(i, static_cast<std::size_t>(c));
            }
            for (int c = 0; c < k; ++c) {
                probs(i, static_cast<std::size_t>(c)) /= s;
            }
            y[i] = static_cast<int>(rng() % k);
        }
        // Oracle.
        int cm[3][3] = {};
        double mse = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            int best = 0;
            for (int c = 1; c < k; ++c) {
                if (probs(i, static_cast<std::size_t>(c)) > probs(i, static_cast<std::size_t>(best))) {
                    best = c;
                }
            }
            ++cm[y[i]][best];
            for (int c = 0; c < k; ++c) {
                const double d = (c == y[i] ? 1.0 : 0.0) - probs(i, static_cast<std::size_t>(c));
                mse += d * d / k;
            }
        }
        mse /= n;
        const auto r = evaluate(probs, y);
        double macro_p = 0.0;
        double macro_r = 0.0;
        double macro_f = 0.0;
        int correct = 0;
        for (int c = 0; c < k; ++c) {
            const int tp = cm[c][c];
            int col = 0;
            int row = 0;
            for (int o = 0; o < k; ++o) {
                col += cm[o][c];
                row += cm[c][o];
            }
            const double p = col ? static_cast<double>(tp) / col : 0.0;
            const double rc = row ? static_cast<double>(tp) / row : 0.0;
            const double f = p + rc > 0 ? 2 * p * rc / (p + rc) : 0.0;
            EXPECT_NEAR(r.per_class[static_cast<std::size_t>(c)].precision, p, 1e-15);
            EXPECT_NEAR(r.per_class[static_cast<std::size_t>(c)].recall, rc, 1e-15);
            EXPECT_NEAR(r.per_class[static_cast<std::size_t>(c)].f1, f, 1e-15);
            EXPECT_EQ(r.per_class[static_cast<std::size_t>(c)].support, static_cast<std::size_t>(row));
            macro_p += p / k;
            macro_r += rc / k;
            macro_f += f / k;
            correct += tp;
        }
        EXPECT_NEAR(r.macro_precision, macro_p, 1e-15);
        EXPECT_NEAR(r.macro_recall, macro_r, 1e-15);
        EXPECT_NEAR(r.macro_f1, macro_f, 1e-15);
        EXPECT_EQ(r.accuracy, static_cast<double>(correct) / n);
        EXPECT_NEAR(r.mse, mse, 1e-14);
    }
}

TEST(MetricsProperty, MacroF1BetweenExtremesAndOrderInvariant) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 40;
        std::vector<int> y(n);
        std::vector<int> pred(n);
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = static_cast<int>(rng() % 4);
            pred[i] = static_cast<int>(rng() % 4);
        }
        const auto r = evaluate(one_hot(pred, 4), y);
        double lo = 1.0;
        double hi = 0.0;
        std::size_t support = 0;
        for (const auto& c : r.per_class) {
            lo = std::min(lo, c.f1);
            hi = std::max(hi, c.f1);
            support += c.support;
        }
        EXPECT_GE(r.macro_f1, lo);
        EXPECT_LE(r.macro_f1, hi);
        EXPECT_EQ(support, n);

        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<int> y2(n);
        std::vector<int> pred2(n);
        for (std::size_t i = 0; i < n; ++i) {
            y2[i] = y[perm[i]];
            pred2[i] = pred[perm[i]];
        }
        const auto r2 = evaluate(one_hot(pred2, 4), y2);
        EXPECT_EQ(r2.per_class, r.per_class);
        EXPECT_EQ(r2.accuracy, r.accuracy);
    }
}

TEST(Metrics, Errors) {
    EXPECT_THROW(evaluate(one_hot({0, 1}, 2), std::vector<int>{0}), UsageError);
    EXPECT_THROW(evaluate(one_hot({0, 1}, 2), std::vector<int>{0, 2}), UsageError);
    Matrix bad(1, 2);
    bad(0, 0) = 0.5;
    bad(0, 1) = 0.6;
    EXPECT_THROW(evaluate(bad, std::vector<int>{0}), ValidationError);
}

TEST(Metrics, FlattenKeys) {
    const std::vector<int> y{0, 1};
    const auto flat = evaluate(one_hot(y, 2), y).flatten();
    EXPECT_EQ(flat.at("accuracy"), 1.0);
    EXPECT_EQ(flat.at("class_1_recall"), 1.0);
    EXPECT_TRUE(flat.contains("macro_f1"));
    EXPECT_TRUE(flat.contains("mse"));
}
