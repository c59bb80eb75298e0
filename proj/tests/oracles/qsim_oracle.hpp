// Independent oracle for circuit states: builds each gate as a full dense
// 2^n x 2^n matrix and applies it by matrix-vector products. Shares no code
// with the statevector kernels.
#pragma once

#include <complex>
#include <span>
#include <vector>

#include "qdgen/qsim.hpp"

namespace qdgen::test_oracle {

using cd = std::complex<double>;
using Matrix = std::vector<std::vector<cd>>;

inline Matrix single_qubit_matrix(int n_qubits, int qubit, const cd u[2][2]) {
    const size_t dim = size_t{1} << n_qubits;
    Matrix m(dim, std::vector<cd>(dim, cd{0.0, 0.0}));
    for (size_t col = 0; col < dim; ++col) {
        for (size_t row = 0; row < dim; ++row) {
            if ((row | (size_t{1} << qubit)) != (col | (size_t{1} << qubit))) continue;
            const int rb = static_cast<int>((row >> qubit) & 1);
            const int cb = static_cast<int>((col >> qubit) & 1);
            m[row][col] = u[rb][cb];
        }
    }
    return m;
}

inline Matrix cnot_matrix(int n_qubits, int control, int target) {
    const size_t dim = size_t{1} << n_qubits;
    Matrix m(dim, std::vector<cd>(dim, cd{0.0, 0.0}));
    for (size_t col = 0; col < dim; ++col) {
        size_t row = col;
        if ((col >> control) & 1) row = col ^ (size_t{1} << target);
        m[row][col] = 1.0;
    }
    return m;
}

inline std::vector<cd> matvec(const Matrix& m, const std::vector<cd>& v) {
    std::vector<cd> out(v.size(), cd{0.0, 0.0});
    for (size_t r = 0; r < v.size(); ++r)
        for (size_t c = 0; c < v.size(); ++c) out[r] += m[r][c] * v[c];
    return out;
}

inline std::vector<cd> oracle_state(const qsim::QcbmAnsatz& ansatz, std::span<const double> theta) {
    const size_t dim = size_t{1} << ansatz.n_qubits;
    std::vector<cd> state(dim, cd{0.0, 0.0});
    state[0] = 1.0;
    const int n = ansatz.n_qubits;
    for (int layer = 0; layer < ansatz.n_rotation_layers; ++layer) {
        for (int q = 0; q < n; ++q) {
            const double ax = theta[2 * static_cast<size_t>(layer * n + q)];
            const double az = theta[2 * static_cast<size_t>(layer * n + q) + 1];
            const cd rx[2][2] = {{std::cos(ax / 2), cd(0, -std::sin(ax / 2))},
                                 {cd(0, -std::sin(ax / 2)), std::cos(ax / 2)}};
            state = matvec(single_qubit_matrix(n, q, rx), state);
            const cd rz[2][2] = {{std::polar(1.0, -az / 2), 0.0}, {0.0, std::polar(1.0, az / 2)}};
            state = matvec(single_qubit_matrix(n, q, rz), state);
        }
        for (int q = 0; q + 1 < n; ++q) state = matvec(cnot_matrix(n, q, q + 1), state);
    }
    return state;
}

}  // namespace qdgen::test_oracle
