#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace flqdsnn::qsim {

using Complex = std::complex<double>;

inline constexpr int kMaxQubits = 12;

/// Dense n-qubit state. Qubit 0 is the least significant bit of the
/// basis-state index.
class Statevector {
  public:
    /// |0...0> on `n_qubits` qubits. Throws ConfigError outside [1, kMaxQubits].
    explicit Statevector(int n_qubits = 4);

    int n_qubits() const { return n_qubits_; }
    std::size_t dimension() const { return amplitudes_.size(); }

    std::span<const Complex> amplitudes() const { return amplitudes_; }
    std::span<Complex> amplitudes() { return amplitudes_; }

    const Complex& operator[](std::size_t i) const { return amplitudes_[i]; }
    Complex& operator[](std::size_t i) { return amplitudes_[i]; }

    /// Sum of |a_i|^2.
    double norm_squared() const;

  private:
    int n_qubits_;
    std::vector<Complex> amplitudes_;
};

enum class GateKind { RY, RZ, Rot, CZ, PauliX };

/// A single gate instance. Build through the factory functions below, which
/// enforce the per-kind angle count.
struct Gate {
    GateKind kind = GateKind::PauliX;
    int target = 0;
    std::optional<int> control;
    std::array<double, 3> angles{};

    /// Number of meaningful entries in `angles` (1 for RY/RZ, 3 for Rot, else 0).
    int angle_count() const;

    static Gate ry(int target, double phi);
    static Gate rz(int target, double phi);
    /// RZ(omega) * RY(theta) * RZ(phi): `phi` acts first.
    static Gate rot(int target, double phi, double theta, double omega);
    static Gate cz(int control, int target);
    static Gate pauli_x(int target);

    bool operator==(const Gate&) const = default;
};

Statevector init_zero(int n_qubits);

/// In-place application. Throws UsageError on invalid qubit indices.
void apply(Statevector& state, const Gate& gate);

/// Applies an arbitrary 2x2 matrix (row-major) to `target`.
void apply_matrix(Statevector& state, int target, const std::array<Complex, 4>& u);

/// Value-returning form of `apply`.
Statevector apply_gate(Statevector state, const Gate& gate);

/// 2x2 unitary of a single-qubit gate, row-major. CZ has no 2x2 form and is rejected.
std::array<Complex, 4> single_qubit_matrix(const Gate& gate);

/// Product a * b of two row-major 2x2 matrices.
std::array<Complex, 4> matmul(const std::array<Complex, 4>& a, const std::array<Complex, 4>& b);

std::vector<double> probabilities(const Statevector& state);

/// <Z_qubit> in [-1, 1].
double expectation_z(const Statevector& state, int qubit);

/// Unchecked in-place kernels over a raw amplitude buffer of length 2^n.
/// Callers guarantee valid, distinct qubit indices.
namespace kernels {

void apply_matrix(std::span<Complex> amps, int target, const std::array<Complex, 4>& u);
void apply_cz(std::span<Complex> amps, int control, int target);
void apply_x(std::span<Complex> amps, int target);

} // namespace kernels

} // namespace flqdsnn::qsim
