#pragma once

#include "flqdsnn/qsim.hpp"

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace flqdsnn::circuit {

/// Trainable angle tensor of shape [n_layers][n_qubits][3], stored row-major.
/// Also used for gradients and optimiser moments, which share the shape.
class CircuitParams {
  public:
    static constexpr int kAnglesPerQubit = 3;

    CircuitParams() = default;
    /// Zero-filled tensor. Throws ConfigError on non-positive dimensions.
    CircuitParams(int n_layers, int n_qubits);

    /// Uniform angles in [0, 2pi).
    static CircuitParams random_uniform(int n_layers, int n_qubits, std::mt19937_64& rng);

    int n_layers() const { return n_layers_; }
    int n_qubits() const { return n_qubits_; }
    std::size_t size() const { return values_.size(); }

    double& at(int layer, int qubit, int k) { return values_[index(layer, qubit, k)]; }
    double at(int layer, int qubit, int k) const { return values_[index(layer, qubit, k)]; }

    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }

    bool same_shape(const CircuitParams& other) const {
        return n_layers_ == other.n_layers_ && n_qubits_ == other.n_qubits_;
    }
    bool all_finite() const;

    std::size_t index(int layer, int qubit, int k) const {
        return (static_cast<std::size_t>(layer) * n_qubits_ + qubit) * kAnglesPerQubit + k;
    }

    bool operator==(const CircuitParams&) const = default;

  private:
    int n_layers_ = 0;
    int n_qubits_ = 0;
    std::vector<double> values_;
};

enum class SpikeMode { final_layer, per_layer };

struct SpikeConfig {
    bool enabled = true;
    double threshold = 0.0;
    SpikeMode mode = SpikeMode::final_layer;

    /// Throws ConfigError unless 0 <= threshold <= 1.
    void validate() const;
};

/// Which qubits fire. One row in final_layer mode, one row per layer in
/// per_layer mode.
struct SpikeMask {
    SpikeMode mode = SpikeMode::final_layer;
    int rows = 0;
    int n_qubits = 0;
    std::vector<std::uint8_t> fired;

    bool at(int row, int qubit) const { return fired[static_cast<std::size_t>(row) * n_qubits + qubit] != 0; }
    bool any() const;

    bool operator==(const SpikeMask&) const = default;
};

/// Feature-to-angle scale of the RY encoding: pi * x or x.
enum class EncodingScale { pi, one };

struct ForwardResult {
    std::vector<double> class_probs;
    std::vector<double> raw_probs;
    SpikeMask mask;
};

/// One RY per qubit. Throws ValidationError naming the first feature outside
/// [0, 1] or on a length mismatch.
std::vector<qsim::Gate> encode(std::span<const double> x, EncodingScale scale = EncodingScale::pi);

/// Strict comparison of each qubit's last angle against the threshold.
SpikeMask compute_spike_mask(const CircuitParams& params, const SpikeConfig& cfg);

/// Full gate sequence executed for one sample: encoding, layers of Rot + ring
/// CZ, and the PauliX gates selected by `mask`.
std::vector<qsim::Gate> build_circuit(std::span<const double> x, const CircuitParams& params,
                                      const SpikeMask& mask, EncodingScale scale = EncodingScale::pi);

/// Sums basis-outcome probabilities by outcome index mod n_classes.
std::vector<double> group_classes(std::span<const double> raw_probs, int n_classes);

ForwardResult forward(std::span<const double> x, const CircuitParams& params, const SpikeConfig& cfg,
                      int n_classes, EncodingScale scale = EncodingScale::pi);

/// Forward pass with an explicitly supplied mask.
ForwardResult forward_with_mask(std::span<const double> x, const CircuitParams& params,
                                const SpikeMask& mask, int n_classes,
                                EncodingScale scale = EncodingScale::pi);

/// Mean squared error between one-hot(label) and class_probs.
double loss(std::span<const double> class_probs, int label, int n_classes);

struct LossAndGradient {
    double loss = 0.0;
    std::vector<double> class_probs;
    CircuitParams gradient;
};

/// Parameter-shift gradient of the MSE loss. The spike mask is evaluated once
/// at the unshifted parameters and held fixed for every shifted evaluation.
LossAndGradient loss_and_gradient(std::span<const double> x, int label, const CircuitParams& params,
                                  const SpikeConfig& cfg, int n_classes,
                                  EncodingScale scale = EncodingScale::pi);

CircuitParams gradient(std::span<const double> x, int label, const CircuitParams& params,
                       const SpikeConfig& cfg, int n_classes, EncodingScale scale = EncodingScale::pi);

} // namespace flqdsnn::circuit
