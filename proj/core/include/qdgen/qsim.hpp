// Exact statevector simulation of the hardware-efficient ansatz: per
// rotation layer, Rx then Rz on every qubit followed by a linear CNOT chain.
// Conventions fixed for bit-stable tests: Rx(a)=exp(-i a X/2),
// Rz(a)=exp(-i a Z/2), amplitude index bit 0 = qubit 0 (LSB).
#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qdgen/rng.hpp"

namespace qdgen::qsim {

struct QcbmAnsatz {
    int n_qubits = 16;
    int n_rotation_layers = 3;

    int param_count() const { return 2 * n_qubits * n_rotation_layers; }
};

class ParamLengthMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class SupportMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Bits packed into an integer, LSB = qubit 0.
struct BitString {
    uint32_t bits = 0;
    int n_qubits = 0;

    bool bit(int q) const { return (bits >> q) & 1u; }
    std::string to_string() const;  // qubit 0 first
    bool operator==(const BitString& o) const = default;
    bool operator<(const BitString& o) const {
        return std::pair(n_qubits, bits) < std::pair(o.n_qubits, o.bits);
    }
};

class Statevector {
public:
    explicit Statevector(int n_qubits);

    int n_qubits() const { return n_qubits_; }
    size_t dim() const { return amps_.size(); }
    std::span<const std::complex<double>> amplitudes() const { return amps_; }
    std::complex<double>& amp(size_t i) { return amps_[i]; }
    const std::complex<double>& amp(size_t i) const { return amps_[i]; }

    void apply_rx(int qubit, double angle);
    void apply_rz(int qubit, double angle);
    void apply_cnot(int control, int target);

    double norm_squared() const;

private:
    int n_qubits_;
    std::vector<std::complex<double>> amps_;
};

struct BornDistribution {
    int n_qubits = 0;
    std::vector<double> probs;
};

// Softmax-normalized target over explicitly listed bitstrings; probabilities
// sum to 1 and bitstrings are distinct.
struct TargetDistribution {
    int n_qubits = 0;
    std::vector<std::pair<BitString, double>> entries;

    double entropy() const;
};

// |0..0> evolved through the ansatz. theta length must equal param_count.
// Parameter layout: for layer l and qubit q, theta[2*(l*n+q)] is the Rx angle
// and theta[2*(l*n+q)+1] the Rz angle.
Statevector build_state(const QcbmAnsatz& ansatz, std::span<const double> theta);

BornDistribution born_distribution(const Statevector& state);

// i.i.d. multinomial draws by inverse CDF; deterministic under a fixed seed.
std::vector<BitString> sample(const BornDistribution& dist, int count, Rng& rng);

// -sum_x target(x) * ln(max(p(x), 1e-12)); the floor keeps exact zeros in
// the Born distribution from producing an infinite loss.
double exact_nll(const BornDistribution& dist, const TargetDistribution& target);

}  // namespace qdgen::qsim
