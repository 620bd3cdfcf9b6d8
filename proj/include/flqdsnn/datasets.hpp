#pragma once

#include "flqdsnn/matrix.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace flqdsnn::datasets {

struct Dataset {
    std::string name;
    Matrix features;
    std::vector<int> labels;
    int n_classes = 0;
    /// Category names in label order, when the source used strings.
    std::vector<std::string> class_names;
    std::uint64_t split_seed = 0;

    std::size_t size() const { return labels.size(); }
    std::size_t n_features() const { return features.cols(); }
    std::vector<std::size_t> class_counts() const;
    Dataset subset(std::span<const std::size_t> indices) const;
};

/// Fisher's Iris data compiled into the library: 150 rows, 4 features, 3 classes.
Dataset load_builtin_iris();

/// Reads a comma-separated file with one header row. `label_column` names the
/// label column; every other column must be numeric. Integer labels are used
/// as-is, otherwise distinct strings are mapped to 0..k-1 in sorted order.
/// `n_classes` = 0 infers the class count from the data.
/// Throws IngestionError with line/column coordinates.
Dataset load_csv(const std::filesystem::path& path, std::string_view label_column, int n_classes = 0);

/// Top-k principal directions of the training rows.
struct PcaReducer {
    std::vector<double> mean;
    /// [n_raw_features][k], orthonormal columns ordered by descending eigenvalue.
    Matrix components;
    /// Variance captured by each component.
    std::vector<double> eigenvalues;

    Matrix transform(const Matrix& features) const;
    Matrix inverse_transform(const Matrix& projected) const;
};

/// Throws ReductionError when the centred training data has rank < k, and
/// UsageError when there are fewer than k raw features or k + 1 rows.
PcaReducer fit_pca_reduce(const Matrix& train_features, int k = 4);

/// Per-feature min/max from the training split.
struct Scaler {
    std::vector<double> min;
    std::vector<double> max;
};

Scaler fit_scale(const Matrix& train_features);

/// (x - min) / (max - min), clamped to [0, 1]; constant features map to 0.5.
Matrix apply_scale(const Scaler& scaler, const Matrix& features);

struct Split {
    std::vector<std::size_t> train_indices;
    std::vector<std::size_t> test_indices;
};

/// Stratified split. Each class contributes round(test_fraction * class_size)
/// test rows, kept within [1, class_size - 1]. Indices are returned sorted.
Split train_test_split(const Dataset& dataset, double test_fraction, std::uint64_t seed);

/// A dataset ready for the circuit: features reduced to `n_features` columns
/// and scaled to [0, 1] with statistics fitted on the training rows only.
struct PreparedData {
    Dataset train;
    Dataset test;
    Split split;
    std::optional<PcaReducer> pca;
    Scaler scaler;
};

PreparedData prepare(const Dataset& raw, std::uint64_t seed, int n_features = 4, double test_fraction = 0.2);

/// Resolves "iris", "digits", "breast_cancer" or "csv:<path>". Fixture files
/// are looked up in `data_dir`; `label_column` applies to "csv:" sources.
Dataset load_named(std::string_view selector, const std::filesystem::path& data_dir,
                   std::string_view label_column = "label");

} // namespace flqdsnn::datasets
