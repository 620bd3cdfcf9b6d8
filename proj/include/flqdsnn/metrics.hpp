#pragma once

#include "flqdsnn/matrix.hpp"

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace flqdsnn::metrics {

struct ClassMetrics {
    int label = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;

    bool operator==(const ClassMetrics&) const = default;
};

/// Accuracy, one-hot MSE and per-class precision/recall/F1 with macro
/// (unweighted) averages.
struct ClassificationReport {
    std::vector<ClassMetrics> per_class;
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_f1 = 0.0;
    double accuracy = 0.0;
    double mse = 0.0;

    /// Flat key/value view, e.g. "accuracy", "class_2_recall".
    std::map<std::string, double> flatten() const;

    bool operator==(const ClassificationReport&) const = default;
};

/// Index of the largest entry; ties go to the lowest index.
int argmax(std::span<const double> probs);

/// `predicted_probs` is [N][C]. Ratios with a zero denominator are 0.
/// Throws UsageError on shape mismatches or out-of-range labels and
/// ValidationError when a row does not sum to 1 within 1e-6.
ClassificationReport evaluate(const Matrix& predicted_probs, std::span<const int> labels);

} // namespace flqdsnn::metrics
