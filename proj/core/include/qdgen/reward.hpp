// Molecule quality filtering, graded reward shaping, the external-scorer
// subprocess protocol, and the softmax target distribution for circuit
// training.
#pragma once

#include <chrono>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qdgen/fingerprint.hpp"
#include "qdgen/molgraph.hpp"
#include "qdgen/qsim.hpp"

namespace qdgen::reward {

struct FilterReport {
    bool passed = false;
    int rules_total = 0;
    int rules_passed = 0;
    std::vector<std::string> violations;  // "<rule-id>: <reason>"
};

// Reference rule set standing in for a proprietary scorer: molecular weight
// 150..600, 10..50 heavy atoms, <=10 rotatable bonds, at least one ring, no
// ring larger than 8, no formal charges, no O/S-O/S single bonds, element
// whitelist.
FilterReport local_filter(const mol::MolecularGraph& graph);

// Fingerprints of (a sample of) the training set, for the novelty term.
struct RewardContext {
    std::vector<mol::Fingerprint> training_fps;
};

// Bounded [0,1]: decode failure 0; filter fail 0.1 x fraction of rules
// passed; pass 0.5 + 0.5 x (1 - max Tanimoto against the training sample).
double compute_reward(const std::optional<mol::MolecularGraph>& molecule,
                      const RewardContext& context);

enum class RewardErrorKind { SpawnFailure, Timeout, CountMismatch, ParseFailure };

class RewardError : public std::runtime_error {
public:
    RewardError(RewardErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}
    RewardErrorKind kind() const { return kind_; }

private:
    RewardErrorKind kind_;
};

// Spawns `command` (argv form), writes one SMILES per line to its stdin,
// closes it, and reads one decimal reward per line from its stdout. Line
// counts must match; a nonzero exit is a SpawnFailure; the child is killed
// on timeout.
std::vector<double> external_reward(const std::vector<std::string>& command,
                                    const std::vector<std::string>& smiles,
                                    std::chrono::seconds timeout = std::chrono::seconds(300));

class EmptyBatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// P(x_i) = exp(R_i) / sum_j exp(R_j), computed with max subtraction.
// Duplicate bitstrings must be pre-aggregated by the caller.
qsim::TargetDistribution build_target(
    std::span<const std::pair<qsim::BitString, double>> samples);

}  // namespace qdgen::reward
