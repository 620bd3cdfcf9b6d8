#include "flqdsnn/qsim.hpp"

#include "flqdsnn/errors.hpp"

#include <cmath>
#include <string>
#include <utility>

namespace flqdsnn::qsim {
namespace {

void check_qubit(const Statevector& state, int qubit) {
    if (qubit < 0 || qubit >= state.n_qubits()) {
        throw UsageError("qubit index " + std::to_string(qubit) + " out of range for " +
                         std::to_string(state.n_qubits()) + "-qubit state");
    }
}

std::array<Complex, 4> ry_matrix(double phi) {
    const double c = std::cos(phi / 2);
    const double s = std::sin(phi / 2);
    return {Complex{c, 0}, Complex{-s, 0}, Complex{s, 0}, Complex{c, 0}};
}

std::array<Complex, 4> rz_matrix(double phi) {
    const Complex lo = std::polar(1.0, -phi / 2);
    const Complex hi = std::polar(1.0, phi / 2);
    return {lo, Complex{}, Complex{}, hi};
}

} // namespace

namespace kernels {

void apply_matrix(std::span<Complex> amps, int target, const std::array<Complex, 4>& u) {
    const std::size_t stride = std::size_t{1} << target;
    const double u0r = u[0].real(), u0i = u[0].imag(), u1r = u[1].real(), u1i = u[1].imag();
    const double u2r = u[2].real(), u2i = u[2].imag(), u3r = u[3].real(), u3i = u[3].imag();
    for (std::size_t base = 0; base < amps.size(); base += 2 * stride) {
        for (std::size_t i = base; i < base + stride; ++i) {
            const double ar = amps[i].real(), ai = amps[i].imag();
            const double br = amps[i + stride].real(), bi = amps[i + stride].imag();
            amps[i] = {u0r * ar - u0i * ai + u1r * br - u1i * bi, u0r * ai + u0i * ar + u1r * bi + u1i * br};
            amps[i + stride] = {u2r * ar - u2i * ai + u3r * br - u3i * bi, u2r * ai + u2i * ar + u3r * bi + u3i * br};
        }
    }
}

void apply_cz(std::span<Complex> amps, int control, int target) {
    const std::size_t both = (std::size_t{1} << target) | (std::size_t{1} << control);
    for (std::size_t i = both; i < amps.size(); i = (i + 1) | both) {
        amps[i] = -amps[i];
    }
}

void apply_x(std::span<Complex> amps, int target) {
    const std::size_t stride = std::size_t{1} << target;
    for (std::size_t base = 0; base < amps.size(); base += 2 * stride) {
        for (std::size_t i = base; i < base + stride; ++i) {
            std::swap(amps[i], amps[i + stride]);
        }
    }
}

} // namespace kernels

Statevector::Statevector(int n_qubits) : n_qubits_(n_qubits) {
    if (n_qubits < 1 || n_qubits > kMaxQubits) {
        throw ConfigError("n_qubits must be in [1, " + std::to_string(kMaxQubits) + "], got " +
                          std::to_string(n_qubits));
    }
    amplitudes_.assign(std::size_t{1} << n_qubits, Complex{});
    amplitudes_[0] = 1.0;
}

double Statevector::norm_squared() const {
    double total = 0.0;
    for (const auto& a : amplitudes_) {
        total += std::norm(a);
    }
    return total;
}

int Gate::angle_count() const {
    switch (kind) {
    case GateKind::RY:
    case GateKind::RZ:
        return 1;
    case GateKind::Rot:
        return 3;
    case GateKind::CZ:
    case GateKind::PauliX:
        return 0;
    }
    return 0;
}

Gate Gate::ry(int target, double phi) { return Gate{GateKind::RY, target, std::nullopt, {phi, 0, 0}}; }

Gate Gate::rz(int target, double phi) { return Gate{GateKind::RZ, target, std::nullopt, {phi, 0, 0}}; }

Gate Gate::rot(int target, double phi, double theta, double omega) {
    return Gate{GateKind::Rot, target, std::nullopt, {phi, theta, omega}};
}

Gate Gate::cz(int control, int target) { return Gate{GateKind::CZ, target, control, {}}; }

Gate Gate::pauli_x(int target) { return Gate{GateKind::PauliX, target, std::nullopt, {}}; }

std::array<Complex, 4> matmul(const std::array<Complex, 4>& a, const std::array<Complex, 4>& b) {
    return {a[0] * b[0] + a[1] * b[2], a[0] * b[1] + a[1] * b[3],
            a[2] * b[0] + a[3] * b[2], a[2] * b[1] + a[3] * b[3]};
}

Statevector init_zero(int n_qubits) { return Statevector(n_qubits); }

std::array<Complex, 4> single_qubit_matrix(const Gate& gate) {
    switch (gate.kind) {
    case GateKind::RY:
        return ry_matrix(gate.angles[0]);
    case GateKind::RZ:
        return rz_matrix(gate.angles[0]);
    case GateKind::Rot:
        return matmul(rz_matrix(gate.angles[2]),
                      matmul(ry_matrix(gate.angles[1]), rz_matrix(gate.angles[0])));
    case GateKind::PauliX:
        return {Complex{}, Complex{1, 0}, Complex{1, 0}, Complex{}};
    case GateKind::CZ:
        break;
    }
    throw UsageError("CZ is a two-qubit gate");
}

void apply_matrix(Statevector& state, int target, const std::array<Complex, 4>& u) {
    check_qubit(state, target);
    kernels::apply_matrix(state.amplitudes(), target, u);
}

void apply(Statevector& state, const Gate& gate) {
    check_qubit(state, gate.target);
    switch (gate.kind) {
    case GateKind::CZ: {
        if (!gate.control) {
            throw UsageError("CZ requires a control qubit");
        }
        check_qubit(state, *gate.control);
        if (*gate.control == gate.target) {
            throw UsageError("CZ control and target must differ");
        }
        kernels::apply_cz(state.amplitudes(), *gate.control, gate.target);
        return;
    }
    case GateKind::PauliX:
        if (gate.control) {
            throw UsageError("single-qubit gates take no control qubit");
        }
        kernels::apply_x(state.amplitudes(), gate.target);
        return;
    case GateKind::RY:
    case GateKind::RZ:
    case GateKind::Rot:
        if (gate.control) {
            throw UsageError("single-qubit gates take no control qubit");
        }
        kernels::apply_matrix(state.amplitudes(), gate.target, single_qubit_matrix(gate));
        return;
    }
}

Statevector apply_gate(Statevector state, const Gate& gate) {
    apply(state, gate);
    return state;
}

std::vector<double> probabilities(const Statevector& state) {
    std::vector<double> out;
    out.reserve(state.dimension());
    for (const auto& a : state.amplitudes()) {
        out.push_back(std::norm(a));
    }
    return out;
}

double expectation_z(const Statevector& state, int qubit) {
    check_qubit(state, qubit);
    const std::size_t mask = std::size_t{1} << qubit;
    double total = 0.0;
    const auto amps = state.amplitudes();
    for (std::size_t i = 0; i < amps.size(); ++i) {
        total += (i & mask) ? -std::norm(amps[i]) : std::norm(amps[i]);
    }
    return total;
}

} // namespace flqdsnn::qsim
