#include "flqdsnn/datasets.hpp"

#include "flqdsnn/errors.hpp"
#include "flqdsnn/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

namespace flqdsnn::datasets {
namespace {

struct IrisRow {
    double sepal_length, sepal_width, petal_length, petal_width;
    int label;
};

constexpr IrisRow kIris[] = {
#include "iris_data.inc"
};

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma - start)));
        if (comma == std::string_view::npos) {
            break;
        }
        start = comma + 1;
    }
    return out;
}

std::optional<double> parse_double(std::string_view s) {
    if (!s.empty() && s.front() == '+') {
        s.remove_prefix(1);
    }
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) {
        return std::nullopt;
    }
    return v;
}

std::optional<int> parse_int(std::string_view s) {
    int v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
        return std::nullopt;
    }
    return v;
}

std::string where(const std::filesystem::path& path, std::size_t line, std::size_t column) {
    return path.string() + ":" + std::to_string(line) + ":" + std::to_string(column);
}

} // namespace

std::vector<std::size_t> Dataset::class_counts() const {
    std::vector<std::size_t> counts(static_cast<std::size_t>(std::max(n_classes, 0)), 0);
    for (int y : labels) {
        ++counts.at(static_cast<std::size_t>(y));
    }
    return counts;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
    Dataset out;
    out.name = name;
    out.n_classes = n_classes;
    out.class_names = class_names;
    out.split_seed = split_seed;
    out.features = features.select_rows(indices);
    out.labels.reserve(indices.size());
    for (auto i : indices) {
        out.labels.push_back(labels[i]);
    }
    return out;
}

Dataset load_builtin_iris() {
    Dataset d;
    d.name = "iris";
    d.n_classes = 3;
    d.class_names = {"setosa", "versicolor", "virginica"};
    d.features = Matrix(0, 4);
    for (const auto& r : kIris) {
        const double row[] = {r.sepal_length, r.sepal_width, r.petal_length, r.petal_width};
        d.features.append_row(row);
        d.labels.push_back(r.label);
    }
    return d;
}

Dataset load_csv(const std::filesystem::path& path, std::string_view label_column, int n_classes) {
    std::ifstream in(path);
    if (!in) {
        throw IngestionError("cannot open " + path.string());
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw IngestionError(where(path, 1, 1) + ": missing header row");
    }
    const auto header = split_fields(line);
    const auto label_it = std::find(header.begin(), header.end(), label_column);
    if (label_it == header.end()) {
        throw IngestionError(where(path, 1, 1) + ": no column named '" + std::string(label_column) + "'");
    }
    const auto label_idx = static_cast<std::size_t>(label_it - header.begin());

    Dataset d;
    d.name = path.stem().string();
    d.features = Matrix(0, header.size() - 1);
    std::vector<std::string> raw_labels;
    std::vector<std::size_t> label_lines;
    std::vector<double> row(header.size() - 1);

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        const auto fields = split_fields(line);
        if (fields.size() != header.size()) {
            throw IngestionError(where(path, line_no, fields.size()) + ": expected " +
                                 std::to_string(header.size()) + " fields, found " + std::to_string(fields.size()));
        }
        std::size_t out_col = 0;
        for (std::size_t c = 0; c < fields.size(); ++c) {
            if (c == label_idx) {
                continue;
            }
            const auto v = parse_double(fields[c]);
            if (!v) {
                throw IngestionError(where(path, line_no, c + 1) + ": non-numeric value '" + std::string(fields[c]) +
                                     "' in column '" + std::string(header[c]) + "'");
            }
            row[out_col++] = *v;
        }
        d.features.append_row(row);
        raw_labels.emplace_back(fields[label_idx]);
        label_lines.push_back(line_no);
    }
    if (raw_labels.empty()) {
        throw IngestionError(path.string() + ": no data rows");
    }

    const bool numeric = std::all_of(raw_labels.begin(), raw_labels.end(),
                                     [](const std::string& s) { return parse_int(s).has_value(); });
    const std::size_t label_col_no = label_idx + 1;
    if (numeric) {
        int max_label = 0;
        for (std::size_t i = 0; i < raw_labels.size(); ++i) {
            const int y = *parse_int(raw_labels[i]);
            if (y < 0 || (n_classes > 0 && y >= n_classes)) {
                throw IngestionError(where(path, label_lines[i], label_col_no) + ": unknown label '" + raw_labels[i] +
                                     "'");
            }
            max_label = std::max(max_label, y);
            d.labels.push_back(y);
        }
        d.n_classes = n_classes > 0 ? n_classes : max_label + 1;
    } else {
        const std::set<std::string> distinct(raw_labels.begin(), raw_labels.end());
        d.class_names.assign(distinct.begin(), distinct.end());
        if (n_classes > 0 && static_cast<int>(d.class_names.size()) > n_classes) {
            // Report the first row whose category falls beyond the allowed count.
            const auto& extra = d.class_names[static_cast<std::size_t>(n_classes)];
            const auto pos = std::find(raw_labels.begin(), raw_labels.end(), extra) - raw_labels.begin();
            throw IngestionError(where(path, label_lines[static_cast<std::size_t>(pos)], label_col_no) +
                                 ": unknown label '" + extra + "' (expected " + std::to_string(n_classes) +
                                 " classes)");
        }
        std::map<std::string, int> index;
        for (std::size_t i = 0; i < d.class_names.size(); ++i) {
            index[d.class_names[i]] = static_cast<int>(i);
        }
        for (const auto& s : raw_labels) {
            d.labels.push_back(index.at(s));
        }
        d.n_classes = n_classes > 0 ? n_classes : static_cast<int>(d.class_names.size());
    }
    return d;
}

Matrix PcaReducer::transform(const Matrix& features) const {
    if (features.cols() != mean.size()) {
        throw UsageError("PCA expects " + std::to_string(mean.size()) + " features, got " +
                         std::to_string(features.cols()));
    }
    const std::size_t k = components.cols();
    Matrix out(features.rows(), k);
    for (std::size_t r = 0; r < features.rows(); ++r) {
        for (std::size_t j = 0; j < k; ++j) {
            double acc = 0.0;
            for (std::size_t f = 0; f < mean.size(); ++f) {
                acc += (features(r, f) - mean[f]) * components(f, j);
            }
            out(r, j) = acc;
        }
    }
    return out;
}

Matrix PcaReducer::inverse_transform(const Matrix& projected) const {
    const std::size_t k = components.cols();
    if (projected.cols() != k) {
        throw UsageError("inverse_transform expects " + std::to_string(k) + " columns");
    }
    Matrix out(projected.rows(), mean.size());
    for (std::size_t r = 0; r < projected.rows(); ++r) {
        for (std::size_t f = 0; f < mean.size(); ++f) {
            double acc = mean[f];
            for (std::size_t j = 0; j < k; ++j) {
                acc += projected(r, j) * components(f, j);
            }
            out(r, f) = acc;
        }
    }
    return out;
}

PcaReducer fit_pca_reduce(const Matrix& train_features, int k) {
    const auto n = train_features.rows();
    const auto p = train_features.cols();
    if (k < 1 || p < static_cast<std::size_t>(k)) {
        throw UsageError("PCA needs at least k = " + std::to_string(k) + " raw features, got " + std::to_string(p));
    }
    if (n < static_cast<std::size_t>(k) + 1) {
        throw UsageError("PCA needs at least k + 1 training rows, got " + std::to_string(n));
    }

    Eigen::MatrixXd x(n, p);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < p; ++c) {
            x(r, c) = train_features(r, c);
        }
    }
    const Eigen::RowVectorXd mu = x.colwise().mean();
    x.rowwise() -= mu;
    const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n - 1);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) {
        throw ReductionError("covariance eigendecomposition failed");
    }
    // Eigen returns ascending eigenvalues.
    const Eigen::VectorXd& evals = solver.eigenvalues();
    const Eigen::MatrixXd& evecs = solver.eigenvectors();
    const double largest = std::max(evals(p - 1), 0.0);
    const double cutoff = std::max(largest, 1.0) * 1e-10;

    PcaReducer out;
    out.mean.assign(mu.data(), mu.data() + p);
    out.components = Matrix(p, static_cast<std::size_t>(k));
    for (int j = 0; j < k; ++j) {
        const auto src = static_cast<Eigen::Index>(p - 1 - j);
        if (evals(src) <= cutoff) {
            throw ReductionError("training data has rank " + std::to_string(j) + " < k = " + std::to_string(k));
        }
        Eigen::VectorXd v = evecs.col(src);
        Eigen::Index pivot = 0;
        v.cwiseAbs().maxCoeff(&pivot);
        if (v(pivot) < 0) {
            v = -v;
        }
        for (std::size_t f = 0; f < p; ++f) {
            out.components(f, static_cast<std::size_t>(j)) = v(static_cast<Eigen::Index>(f));
        }
        out.eigenvalues.push_back(evals(src));
    }
    return out;
}

Scaler fit_scale(const Matrix& train_features) {
    if (train_features.rows() == 0) {
        throw UsageError("cannot fit a scaler on an empty training split");
    }
    Scaler s;
    s.min.assign(train_features.cols(), 0.0);
    s.max.assign(train_features.cols(), 0.0);
    for (std::size_t c = 0; c < train_features.cols(); ++c) {
        double lo = train_features(0, c);
        double hi = lo;
        for (std::size_t r = 1; r < train_features.rows(); ++r) {
            lo = std::min(lo, train_features(r, c));
            hi = std::max(hi, train_features(r, c));
        }
        s.min[c] = lo;
        s.max[c] = hi;
    }
    return s;
}

Matrix apply_scale(const Scaler& scaler, const Matrix& features) {
    if (features.cols() != scaler.min.size()) {
        throw UsageError("scaler fitted on " + std::to_string(scaler.min.size()) + " features, got " +
                         std::to_string(features.cols()));
    }
    Matrix out(features.rows(), features.cols());
    for (std::size_t r = 0; r < features.rows(); ++r) {
        for (std::size_t c = 0; c < features.cols(); ++c) {
            const double range = scaler.max[c] - scaler.min[c];
            out(r, c) = range > 0.0 ? std::clamp((features(r, c) - scaler.min[c]) / range, 0.0, 1.0) : 0.5;
        }
    }
    return out;
}

Split train_test_split(const Dataset& dataset, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw SplitError("test_fraction must lie in (0, 1)");
    }
    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(dataset.n_classes));
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        by_class.at(static_cast<std::size_t>(dataset.labels[i])).push_back(i);
    }
    std::mt19937_64 rng(derive_seed(seed, {kStreamSplit}));
    Split split;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        auto& members = by_class[c];
        if (members.size() < 2) {
            throw SplitError("class " + std::to_string(c) + " has " + std::to_string(members.size()) +
                             " sample(s); stratified splitting needs at least 2");
        }
        std::shuffle(members.begin(), members.end(), rng);
        const auto target = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(members.size())));
        const auto n_test = std::clamp<std::size_t>(target, 1, members.size() - 1);
        split.test_indices.insert(split.test_indices.end(), members.begin(), members.begin() + n_test);
        split.train_indices.insert(split.train_indices.end(), members.begin() + n_test, members.end());
    }
    std::sort(split.train_indices.begin(), split.train_indices.end());
    std::sort(split.test_indices.begin(), split.test_indices.end());
    return split;
}

PreparedData prepare(const Dataset& raw, std::uint64_t seed, int n_features, double test_fraction) {
    PreparedData out;
    out.split = train_test_split(raw, test_fraction, seed);
    out.train = raw.subset(out.split.train_indices);
    out.test = raw.subset(out.split.test_indices);
    out.train.split_seed = out.test.split_seed = seed;

    if (raw.n_features() > static_cast<std::size_t>(n_features)) {
        out.pca = fit_pca_reduce(out.train.features, n_features);
        out.train.features = out.pca->transform(out.train.features);
        out.test.features = out.pca->transform(out.test.features);
    } else if (raw.n_features() < static_cast<std::size_t>(n_features)) {
        throw ConfigError(raw.name + " has " + std::to_string(raw.n_features()) + " features; the circuit needs " +
                          std::to_string(n_features));
    }
    out.scaler = fit_scale(out.train.features);
    out.train.features = apply_scale(out.scaler, out.train.features);
    out.test.features = apply_scale(out.scaler, out.test.features);
    return out;
}

Dataset load_named(std::string_view selector, const std::filesystem::path& data_dir, std::string_view label_column) {
    if (selector == "iris") {
        return load_builtin_iris();
    }
    if (selector == "digits") {
        auto d = load_csv(data_dir / "digits.csv", "label", 10);
        d.name = "digits";
        return d;
    }
    if (selector == "breast_cancer") {
        auto d = load_csv(data_dir / "breast_cancer.csv", "diagnosis", 2);
        d.name = "breast_cancer";
        return d;
    }
    if (selector.starts_with("csv:")) {
        return load_csv(std::filesystem::path(selector.substr(4)), label_column);
    }
    throw ConfigError("unknown dataset '" + std::string(selector) + "' (expected iris, digits, breast_cancer or csv:<path>)");
}

} // namespace flqdsnn::datasets
