#include "qdgen/qsim.hpp"

#include <algorithm>
#include <cmath>

namespace qdgen::qsim {

std::string BitString::to_string() const {
    std::string s;
    s.reserve(static_cast<size_t>(n_qubits));
    for (int q = 0; q < n_qubits; ++q) s += bit(q) ? '1' : '0';
    return s;
}

Statevector::Statevector(int n_qubits) : n_qubits_(n_qubits) {
    if (n_qubits < 1 || n_qubits > 24) throw std::invalid_argument("n_qubits out of range");
    amps_.assign(size_t{1} << n_qubits, {0.0, 0.0});
    amps_[0] = {1.0, 0.0};
}

void Statevector::apply_rx(int qubit, double angle) {
    const double c = std::cos(angle / 2.0);
    const double s = std::sin(angle / 2.0);
    const std::complex<double> m00(c, 0.0), m01(0.0, -s);
    const size_t step = size_t{1} << qubit;
    const size_t dim = amps_.size();
    for (size_t base = 0; base < dim; base += 2 * step) {
        for (size_t i = base; i < base + step; ++i) {
            const std::complex<double> a0 = amps_[i];
            const std::complex<double> a1 = amps_[i + step];
            amps_[i] = m00 * a0 + m01 * a1;
            amps_[i + step] = m01 * a0 + m00 * a1;
        }
    }
}

void Statevector::apply_rz(int qubit, double angle) {
    const std::complex<double> e0 = std::polar(1.0, -angle / 2.0);
    const std::complex<double> e1 = std::polar(1.0, angle / 2.0);
    const size_t step = size_t{1} << qubit;
    const size_t dim = amps_.size();
    for (size_t base = 0; base < dim; base += 2 * step) {
        for (size_t i = base; i < base + step; ++i) {
            amps_[i] *= e0;
            amps_[i + step] *= e1;
        }
    }
}

void Statevector::apply_cnot(int control, int target) {
    const size_t cmask = size_t{1} << control;
    const size_t tmask = size_t{1} << target;
    const size_t dim = amps_.size();
    for (size_t i = 0; i < dim; ++i) {
        if ((i & cmask) && !(i & tmask)) std::swap(amps_[i], amps_[i | tmask]);
    }
}

double Statevector::norm_squared() const {
    double sum = 0.0;
    for (const auto& a : amps_) sum += std::norm(a);
    return sum;
}

double TargetDistribution::entropy() const {
    double h = 0.0;
    for (const auto& [bits, p] : entries) {
        if (p > 0.0) h -= p * std::log(p);
    }
    return h;
}

Statevector build_state(const QcbmAnsatz& ansatz, std::span<const double> theta) {
    if (static_cast<int>(theta.size()) != ansatz.param_count())
        throw ParamLengthMismatch("theta length " + std::to_string(theta.size()) +
                                  " != param count " + std::to_string(ansatz.param_count()));
    Statevector state(ansatz.n_qubits);
    const int n = ansatz.n_qubits;
    for (int layer = 0; layer < ansatz.n_rotation_layers; ++layer) {
        for (int q = 0; q < n; ++q) {
            const size_t base = 2 * static_cast<size_t>(layer * n + q);
            state.apply_rx(q, theta[base]);
            state.apply_rz(q, theta[base + 1]);
        }
        for (int q = 0; q + 1 < n; ++q) state.apply_cnot(q, q + 1);
    }
    return state;
}

BornDistribution born_distribution(const Statevector& state) {
    BornDistribution dist;
    dist.n_qubits = state.n_qubits();
    dist.probs.resize(state.dim());
    for (size_t i = 0; i < state.dim(); ++i) dist.probs[i] = std::norm(state.amp(i));
    return dist;
}

std::vector<BitString> sample(const BornDistribution& dist, int count, Rng& rng) {
    std::vector<BitString> out;
    if (count <= 0) return out;
    out.reserve(static_cast<size_t>(count));
    std::vector<double> cdf(dist.probs.size());
    double acc = 0.0;
    for (size_t i = 0; i < dist.probs.size(); ++i) {
        acc += dist.probs[i];
        cdf[i] = acc;
    }
    for (int k = 0; k < count; ++k) {
        const double u = rng.uniform() * acc;
        const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        const auto idx = static_cast<uint32_t>(std::min<size_t>(
            static_cast<size_t>(it - cdf.begin()), cdf.size() - 1));
        out.push_back({idx, dist.n_qubits});
    }
    return out;
}

double exact_nll(const BornDistribution& dist, const TargetDistribution& target) {
    if (dist.n_qubits != target.n_qubits)
        throw SupportMismatch("distribution and target are over different qubit counts");
    double total = 0.0;
    for (const auto& [bits, p] : target.entries) {
        if (bits.bits >= dist.probs.size())
            throw SupportMismatch("target bitstring outside distribution support");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-6)
        throw SupportMismatch("target probabilities do not sum to 1");

    constexpr double kFloor = 1e-12;
    double loss = 0.0;
    for (const auto& [bits, p] : target.entries)
        loss -= p * std::log(std::max(dist.probs[bits.bits], kFloor));
    return loss;
}

}  // namespace qdgen::qsim
