#include "flqdsnn/circuit.hpp"

#include "flqdsnn/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace flqdsnn::circuit {
namespace {

using qsim::Gate;
using qsim::GateKind;
using qsim::Statevector;

constexpr double kShift = std::numbers::pi / 2;

void check_classes(int n_classes, int n_qubits) {
    if (n_classes < 1 || static_cast<std::size_t>(n_classes) > (std::size_t{1} << n_qubits)) {
        throw ConfigError("n_classes must be in [1, 2^" + std::to_string(n_qubits) + "], got " +
                          std::to_string(n_classes));
    }
}

void check_label(int label, int n_classes) {
    if (label < 0 || label >= n_classes) {
        throw ValidationError("label " + std::to_string(label) + " outside [0, " +
                              std::to_string(n_classes) + ")");
    }
}

// Gate with its unitary precomputed. layer/qubit locate a trainable Rot, -1 otherwise.
struct CompiledGate {
    Gate gate;
    std::array<qsim::Complex, 4> matrix{};
    int layer = -1;
    int qubit = -1;
};

std::vector<CompiledGate> compile(std::span<const double> x, const CircuitParams& params,
                                  const SpikeMask& mask, EncodingScale scale) {
    const int nq = params.n_qubits();
    if (static_cast<int>(x.size()) != nq) {
        throw ValidationError("feature vector has " + std::to_string(x.size()) + " entries, circuit has " +
                              std::to_string(nq) + " qubits");
    }
    if (mask.rows > 0) {
        const int expected_rows = mask.mode == SpikeMode::final_layer ? 1 : params.n_layers();
        if (mask.n_qubits != nq || mask.rows != expected_rows ||
            mask.fired.size() != static_cast<std::size_t>(mask.rows) * nq) {
            throw UsageError("spike mask shape does not match the circuit");
        }
    }
    std::vector<CompiledGate> out;
    out.reserve(static_cast<std::size_t>(nq) * (1 + 3 * params.n_layers()));

    auto push = [&out](const Gate& g, int layer = -1, int qubit = -1) {
        CompiledGate c{g, {}, layer, qubit};
        if (g.kind != GateKind::CZ) {
            c.matrix = qsim::single_qubit_matrix(g);
        }
        out.push_back(c);
    };

    for (const auto& g : encode(x, scale)) {
        push(g);
    }
    for (int l = 0; l < params.n_layers(); ++l) {
        for (int q = 0; q < nq; ++q) {
            push(Gate::rot(q, params.at(l, q, 0), params.at(l, q, 1), params.at(l, q, 2)), l, q);
            // A one-qubit ring has no partner to entangle with.
            if (nq > 1) {
                push(Gate::cz(q, (q + 1) % nq));
            }
        }
        if (mask.mode == SpikeMode::per_layer && mask.rows > 0) {
            for (int q = 0; q < nq; ++q) {
                if (mask.at(l, q)) {
                    push(Gate::pauli_x(q));
                }
            }
        }
    }
    if (mask.mode == SpikeMode::final_layer && mask.rows > 0) {
        for (int q = 0; q < nq; ++q) {
            if (mask.at(0, q)) {
                push(Gate::pauli_x(q));
            }
        }
    }
    return out;
}

// compile() has already validated every index, so the unchecked kernels apply.
void run(std::span<qsim::Complex> amps, std::span<const CompiledGate> gates) {
    for (const auto& c : gates) {
        switch (c.gate.kind) {
        case GateKind::CZ:
            qsim::kernels::apply_cz(amps, *c.gate.control, c.gate.target);
            break;
        case GateKind::PauliX:
            qsim::kernels::apply_x(amps, c.gate.target);
            break;
        default:
            qsim::kernels::apply_matrix(amps, c.gate.target, c.matrix);
            break;
        }
    }
}

void grouped_probs(std::span<const qsim::Complex> amps, int n_classes, std::vector<double>& out) {
    out.assign(static_cast<std::size_t>(n_classes), 0.0);
    std::size_t c = 0;
    for (const auto& a : amps) {
        out[c] += std::norm(a);
        if (++c == static_cast<std::size_t>(n_classes)) {
            c = 0;
        }
    }
}

// The six parameter-shifted variants of a Rot gate, indexed [k][0 = +, 1 = -].
// RZ(a + s) = RZ(a) RZ(s) and likewise for RY, so the shifts are composed
// from the unshifted factors.
std::array<std::array<std::array<qsim::Complex, 4>, 2>, 3> shifted_rots(const Gate& rot) {
    using qsim::matmul;
    using qsim::single_qubit_matrix;
    static const std::array<std::array<qsim::Complex, 4>, 2> rz_shift{
        single_qubit_matrix(Gate::rz(0, kShift)), single_qubit_matrix(Gate::rz(0, -kShift))};
    static const std::array<std::array<qsim::Complex, 4>, 2> ry_shift{
        single_qubit_matrix(Gate::ry(0, kShift)), single_qubit_matrix(Gate::ry(0, -kShift))};

    const auto z0 = single_qubit_matrix(Gate::rz(0, rot.angles[0]));
    const auto y1 = single_qubit_matrix(Gate::ry(0, rot.angles[1]));
    const auto z2 = single_qubit_matrix(Gate::rz(0, rot.angles[2]));
    const auto z2y1 = matmul(z2, y1);
    const auto full = matmul(z2y1, z0);

    std::array<std::array<std::array<qsim::Complex, 4>, 2>, 3> out{};
    for (int s = 0; s < 2; ++s) {
        out[0][s] = matmul(full, rz_shift[s]);
        out[1][s] = matmul(z2y1, matmul(ry_shift[s], z0));
        out[2][s] = matmul(rz_shift[s], full);
    }
    return out;
}

double mse(std::span<const double> class_probs, int label) {
    double total = 0.0;
    for (std::size_t c = 0; c < class_probs.size(); ++c) {
        const double target = static_cast<int>(c) == label ? 1.0 : 0.0;
        const double d = target - class_probs[c];
        total += d * d;
    }
    return total / static_cast<double>(class_probs.size());
}

} // namespace

CircuitParams::CircuitParams(int n_layers, int n_qubits) : n_layers_(n_layers), n_qubits_(n_qubits) {
    if (n_layers < 1 || n_qubits < 1) {
        throw ConfigError("circuit dimensions must be positive");
    }
    values_.assign(static_cast<std::size_t>(n_layers) * n_qubits * kAnglesPerQubit, 0.0);
}

CircuitParams CircuitParams::random_uniform(int n_layers, int n_qubits, std::mt19937_64& rng) {
    CircuitParams p(n_layers, n_qubits);
    std::uniform_real_distribution<double> dist(0.0, 2 * std::numbers::pi);
    for (auto& v : p.values_) {
        v = dist(rng);
    }
    return p;
}

bool CircuitParams::all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

void SpikeConfig::validate() const {
    if (!(threshold >= 0.0 && threshold <= 1.0)) {
        throw ConfigError("spike threshold must lie in [0, 1], got " + std::to_string(threshold));
    }
}

bool SpikeMask::any() const {
    return std::any_of(fired.begin(), fired.end(), [](std::uint8_t f) { return f != 0; });
}

std::vector<Gate> encode(std::span<const double> x, EncodingScale scale) {
    const double factor = scale == EncodingScale::pi ? std::numbers::pi : 1.0;
    std::vector<Gate> gates;
    gates.reserve(x.size());
    for (std::size_t q = 0; q < x.size(); ++q) {
        if (!(x[q] >= 0.0 && x[q] <= 1.0)) {
            throw ValidationError("feature " + std::to_string(q) + " = " + std::to_string(x[q]) +
                                  " is outside [0, 1]");
        }
        gates.push_back(Gate::ry(static_cast<int>(q), factor * x[q]));
    }
    return gates;
}

SpikeMask compute_spike_mask(const CircuitParams& params, const SpikeConfig& cfg) {
    cfg.validate();
    SpikeMask mask;
    mask.mode = cfg.mode;
    mask.n_qubits = params.n_qubits();
    mask.rows = cfg.mode == SpikeMode::final_layer ? 1 : params.n_layers();
    mask.fired.assign(static_cast<std::size_t>(mask.rows) * mask.n_qubits, 0);
    if (!cfg.enabled) {
        return mask;
    }
    const int last = CircuitParams::kAnglesPerQubit - 1;
    for (int r = 0; r < mask.rows; ++r) {
        const int layer = cfg.mode == SpikeMode::final_layer ? params.n_layers() - 1 : r;
        for (int q = 0; q < mask.n_qubits; ++q) {
            mask.fired[static_cast<std::size_t>(r) * mask.n_qubits + q] = params.at(layer, q, last) > cfg.threshold;
        }
    }
    return mask;
}

std::vector<Gate> build_circuit(std::span<const double> x, const CircuitParams& params, const SpikeMask& mask,
                                EncodingScale scale) {
    std::vector<Gate> out;
    for (const auto& c : compile(x, params, mask, scale)) {
        out.push_back(c.gate);
    }
    return out;
}

std::vector<double> group_classes(std::span<const double> raw_probs, int n_classes) {
    if (n_classes < 1 || static_cast<std::size_t>(n_classes) > raw_probs.size()) {
        throw ConfigError("n_classes must be in [1, " + std::to_string(raw_probs.size()) + "]");
    }
    std::vector<double> out(static_cast<std::size_t>(n_classes), 0.0);
    for (std::size_t i = 0; i < raw_probs.size(); ++i) {
        out[i % n_classes] += raw_probs[i];
    }
    return out;
}

ForwardResult forward_with_mask(std::span<const double> x, const CircuitParams& params, const SpikeMask& mask,
                                int n_classes, EncodingScale scale) {
    check_classes(n_classes, params.n_qubits());
    const auto gates = compile(x, params, mask, scale);
    Statevector state(params.n_qubits());
    run(state.amplitudes(), gates);
    ForwardResult result;
    result.raw_probs = qsim::probabilities(state);
    result.class_probs = group_classes(result.raw_probs, n_classes);
    result.mask = mask;
    return result;
}

ForwardResult forward(std::span<const double> x, const CircuitParams& params, const SpikeConfig& cfg,
                      int n_classes, EncodingScale scale) {
    return forward_with_mask(x, params, compute_spike_mask(params, cfg), n_classes, scale);
}

double loss(std::span<const double> class_probs, int label, int n_classes) {
    if (n_classes < 1 || class_probs.size() != static_cast<std::size_t>(n_classes)) {
        throw UsageError("class_probs length " + std::to_string(class_probs.size()) + " != n_classes " +
                         std::to_string(n_classes));
    }
    check_label(label, n_classes);
    return mse(class_probs, label);
}

LossAndGradient loss_and_gradient(std::span<const double> x, int label, const CircuitParams& params,
                                  const SpikeConfig& cfg, int n_classes, EncodingScale scale) {
    check_classes(n_classes, params.n_qubits());
    check_label(label, n_classes);
    const auto mask = compute_spike_mask(params, cfg);
    const auto gates = compile(x, params, mask, scale);

    // Row g of `prefix` is the state immediately before gate g.
    const std::size_t dim = std::size_t{1} << params.n_qubits();
    std::vector<qsim::Complex> prefix((gates.size() + 1) * dim);
    prefix[0] = 1.0;
    for (std::size_t g = 0; g < gates.size(); ++g) {
        std::copy_n(prefix.begin() + static_cast<std::ptrdiff_t>(g * dim), dim,
                    prefix.begin() + static_cast<std::ptrdiff_t>((g + 1) * dim));
        run(std::span(prefix).subspan((g + 1) * dim, dim), std::span(&gates[g], 1));
    }

    LossAndGradient out;
    grouped_probs(std::span(prefix).subspan(gates.size() * dim, dim), n_classes, out.class_probs);
    out.loss = mse(out.class_probs, label);

    // dL/dp_c for L = (1/C) sum_c (y_c - p_c)^2.
    std::vector<double> dloss(static_cast<std::size_t>(n_classes));
    for (int c = 0; c < n_classes; ++c) {
        const double target = c == label ? 1.0 : 0.0;
        dloss[c] = 2.0 * (out.class_probs[c] - target) / n_classes;
    }

    out.gradient = CircuitParams(params.n_layers(), params.n_qubits());
    // The suffix after a Rot on qubit q is linear, so S(U psi) = sum_ab U_ab S(E_ab psi)
    // with E_ab = |a><b| on q. Four suffix runs give every shifted state.
    std::array<std::vector<qsim::Complex>, 4> basis_runs;
    for (auto& v : basis_runs) {
        v.resize(dim);
    }
    std::vector<qsim::Complex> shifted_state(dim);
    std::vector<double> plus;
    std::vector<double> minus;
    const std::span<const CompiledGate> all(gates);

    for (std::size_t g = 0; g < gates.size(); ++g) {
        const auto& c = gates[g];
        if (c.layer < 0) {
            continue;
        }
        const auto suffix = all.subspan(g + 1);
        const auto before = std::span<const qsim::Complex>(prefix).subspan(g * dim, dim);
        const std::size_t stride = std::size_t{1} << c.gate.target;
        for (std::size_t a = 0; a < 2; ++a) {
            for (std::size_t b = 0; b < 2; ++b) {
                auto& v = basis_runs[2 * a + b];
                std::fill(v.begin(), v.end(), qsim::Complex{});
                for (std::size_t base = 0; base < dim; base += 2 * stride) {
                    for (std::size_t i = base; i < base + stride; ++i) {
                        v[i + a * stride] = before[i + b * stride];
                    }
                }
                run(v, suffix);
            }
        }
        const auto shifted = shifted_rots(c.gate);
        for (int k = 0; k < CircuitParams::kAnglesPerQubit; ++k) {
            for (int s = 0; s < 2; ++s) {
                const auto& u = shifted[k][s];
                for (std::size_t i = 0; i < dim; ++i) {
                    shifted_state[i] = u[0] * basis_runs[0][i] + u[1] * basis_runs[1][i] + u[2] * basis_runs[2][i] +
                                       u[3] * basis_runs[3][i];
                }
                grouped_probs(shifted_state, n_classes, s == 0 ? plus : minus);
            }
            double d = 0.0;
            for (int cls = 0; cls < n_classes; ++cls) {
                d += dloss[cls] * 0.5 * (plus[cls] - minus[cls]);
            }
            out.gradient.at(c.layer, c.qubit, k) = d;
        }
    }
    return out;
}

CircuitParams gradient(std::span<const double> x, int label, const CircuitParams& params, const SpikeConfig& cfg,
                       int n_classes, EncodingScale scale) {
    return loss_and_gradient(x, label, params, cfg, n_classes, scale).gradient;
}

} // namespace flqdsnn::circuit
