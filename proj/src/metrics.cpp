#include "flqdsnn/metrics.hpp"

#include "flqdsnn/errors.hpp"

#include <cmath>

namespace flqdsnn::metrics {
namespace {

double ratio(std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

} // namespace

std::map<std::string, double> ClassificationReport::flatten() const {
    std::map<std::string, double> out{
        {"accuracy", accuracy},       {"mse", mse},           {"macro_precision", macro_precision},
        {"macro_recall", macro_recall}, {"macro_f1", macro_f1},
    };
    for (const auto& c : per_class) {
        const auto prefix = "class_" + std::to_string(c.label) + "_";
        out[prefix + "precision"] = c.precision;
        out[prefix + "recall"] = c.recall;
        out[prefix + "f1"] = c.f1;
        out[prefix + "support"] = static_cast<double>(c.support);
    }
    return out;
}

int argmax(std::span<const double> probs) {
    int best = 0;
    for (std::size_t i = 1; i < probs.size(); ++i) {
        if (probs[i] > probs[static_cast<std::size_t>(best)]) {
            best = static_cast<int>(i);
        }
    }
    return best;
}

ClassificationReport evaluate(const Matrix& predicted_probs, std::span<const int> labels) {
    if (predicted_probs.rows() != labels.size()) {
        throw UsageError("evaluate: " + std::to_string(predicted_probs.rows()) + " prediction rows vs " +
                         std::to_string(labels.size()) + " labels");
    }
    if (labels.empty() || predicted_probs.cols() == 0) {
        throw UsageError("evaluate: empty input");
    }
    const std::size_t n_classes = predicted_probs.cols();
    std::vector<std::size_t> tp(n_classes, 0), predicted(n_classes, 0), actual(n_classes, 0);

    ClassificationReport report;
    double sq_total = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int y = labels[i];
        if (y < 0 || static_cast<std::size_t>(y) >= n_classes) {
            throw UsageError("evaluate: label " + std::to_string(y) + " out of range at row " + std::to_string(i));
        }
        const auto row = predicted_probs.row(i);
        double row_sum = 0.0;
        for (double v : row) {
            row_sum += v;
        }
        if (std::abs(row_sum - 1.0) > 1e-6) {
            throw ValidationError("evaluate: prediction row " + std::to_string(i) + " sums to " +
                                  std::to_string(row_sum));
        }
        const auto guess = static_cast<std::size_t>(argmax(row));
        ++predicted[guess];
        ++actual[static_cast<std::size_t>(y)];
        if (guess == static_cast<std::size_t>(y)) {
            ++tp[guess];
        }
        double sq = 0.0;
        for (std::size_t c = 0; c < n_classes; ++c) {
            const double d = (c == static_cast<std::size_t>(y) ? 1.0 : 0.0) - row[c];
            sq += d * d;
        }
        sq_total += sq / static_cast<double>(n_classes);
    }

    std::size_t correct = 0;
    for (std::size_t c = 0; c < n_classes; ++c) {
        ClassMetrics m;
        m.label = static_cast<int>(c);
        m.precision = ratio(tp[c], predicted[c]);
        m.recall = ratio(tp[c], actual[c]);
        m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
        m.support = actual[c];
        report.macro_precision += m.precision;
        report.macro_recall += m.recall;
        report.macro_f1 += m.f1;
        report.per_class.push_back(m);
        correct += tp[c];
    }
    const auto nc = static_cast<double>(n_classes);
    report.macro_precision /= nc;
    report.macro_recall /= nc;
    report.macro_f1 /= nc;
    report.accuracy = ratio(correct, labels.size());
    report.mse = sq_total / static_cast<double>(labels.size());
    return report;
}

} // namespace flqdsnn::metrics
