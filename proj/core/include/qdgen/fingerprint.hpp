// Path-based structural fingerprints and Tanimoto similarity.
#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "qdgen/molgraph.hpp"

namespace qdgen::mol {

class WidthMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class Fingerprint {
public:
    explicit Fingerprint(int width = 2048);

    int width() const { return width_; }
    int n_set() const { return n_set_; }
    bool test(int bit) const;
    void set(int bit);

    const std::vector<uint64_t>& blocks() const { return blocks_; }

private:
    int width_;
    int n_set_ = 0;
    std::vector<uint64_t> blocks_;
};

// Hashes every linear atom/bond path of up to max_path_len bonds into the
// bitset. Paths are hashed direction-independently with a stable 64-bit hash
// so fingerprints are reproducible across runs and platforms.
Fingerprint path_fingerprint(const MolecularGraph& graph, int max_path_len = 7, int width = 2048);

// |a AND b| / |a OR b|; 1.0 when both are empty. Throws WidthMismatch.
double tanimoto(const Fingerprint& a, const Fingerprint& b);

}  // namespace qdgen::mol
