// The hybrid training loop: an LSTM trained on the dataset with
// circuit-sampled priors injected, generation under each prior, reward
// aggregation into a softmax target, and derivative-free circuit training
// against that target each epoch. Fully deterministic given (config, dataset
// bytes), independent of worker thread count.
#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "qdgen/dataset.hpp"
#include "qdgen/neural.hpp"
#include "qdgen/optim.hpp"
#include "qdgen/qsim.hpp"
#include "qdgen/reward.hpp"
#include "qdgen/selfies.hpp"

namespace qdgen::engine {

class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& field, const std::string& what)
        : std::runtime_error(what), field_(field) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

class DatasetTooSmall : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct TrainingConfig {
    int n_qubits = 16;
    int n_rotation_layers = 3;
    int lstm_hidden = 256;
    int lstm_embed = 128;
    neural::PriorMode prior_mode = neural::PriorMode::Concat;
    int epochs_lstm = 40;        // dataset pre-training passes
    int epochs_qcbm = 30;        // hybrid epochs (one more LSTM pass each)
    int priors_per_epoch = 64;   // N
    int molecules_per_prior = 4;
    int reward_switch_epoch = -1;  // switch to the external scorer; -1 = never
    double temperature = 1.0;
    uint64_t master_seed = 0;
    std::string dataset_path;
    int max_len = 96;
    int batch_size = 16;
    double dropout = 0.1;
    double lstm_lr = 1e-3;
    bool pretrain_uniform_priors = false;
    bool early_stop = false;  // stop when mean reward moves < 1e-3 over 5 epochs
    optim::CobylaConfig cobyla;
    int n_threads = 0;  // 0 = hardware concurrency
    std::vector<std::string> scorer_command;
    int novelty_cache_size = 256;

    // Throws ConfigError naming the offending field.
    void validate() const;
};

struct EpochReport {
    int epoch = 0;  // 1-based
    double mean_reward = 0.0;
    double qcbm_nll = 0.0;
    double lstm_loss = 0.0;
    double sr = 0.0;  // percent
    double uf = 0.0;
    double df = 0.0;
    double seconds = 0.0;  // wall time; kept out of the deterministic CSV
};

struct MetricsReport {
    double sr = 0.0;
    double uf = 0.0;
    double df = 0.0;
};

struct Checkpoint {
    int schema_version = 1;
    int epoch = 0;
    uint64_t master_seed = 0;
    qsim::QcbmAnsatz ansatz;
    std::vector<double> theta;
    neural::LstmDims dims;
    std::vector<double> lstm_weights;
    std::vector<std::string> vocabulary;  // token texts in id order (ids from 3)
    double temperature = 1.0;
    int max_len = 96;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
// Throws CheckpointError on schema mismatch or malformed files.
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Per-epoch internals kept in memory for analysis and tests.
struct EpochDetail {
    std::vector<qsim::BitString> priors;  // the N priors the epoch generated under
    std::vector<std::pair<qsim::BitString, double>> aggregated_rewards;
    std::vector<double> theta_after;
};

struct TrainResult {
    Checkpoint checkpoint;
    std::vector<EpochReport> reports;
    std::vector<EpochDetail> history;
};

// Reward override for synthetic experiments; when set it replaces both the
// local filter reward and the external scorer.
using RewardFn = std::function<double(const std::optional<mol::MolecularGraph>&)>;

using EpochCallback = std::function<void(const EpochReport&, const Checkpoint&)>;

TrainResult hybrid_train(const TrainingConfig& config, const RewardFn& reward_override = nullptr,
                         const EpochCallback& on_epoch = nullptr);

// One COBYLA descent of theta against exact_nll(born(theta), target); the
// returned theta is never worse than the input.
std::vector<double> qcbm_train_step(const qsim::QcbmAnsatz& ansatz,
                                    std::span<const double> theta,
                                    const qsim::TargetDistribution& target,
                                    const optim::CobylaConfig& config);

struct Generated {
    std::optional<std::string> smiles;  // canonical; nullopt when decoding failed
    qsim::BitString prior;
};

// Samples `count` molecules from a checkpointed model; decode failures are
// reported, not dropped.
std::vector<Generated> generate(const Checkpoint& ckpt, int count, double temperature,
                                uint64_t seed, int n_threads = 0);

// SR/UF/DF over already-parsed molecules. DF averages pairwise Tanimoto over
// at most 1000 pairs (exact when fewer exist, seeded sampling otherwise).
MetricsReport metrics(std::span<const mol::MolecularGraph> molecules,
                      const std::function<bool(const mol::MolecularGraph&)>& filter,
                      uint64_t pair_seed);
MetricsReport metrics(std::span<const mol::MolecularGraph> molecules, uint64_t pair_seed = 0);

struct ScalingRow {
    int n_qubits = 0;
    double sr = 0.0;
    double uf = 0.0;
    double df = 0.0;
    double seconds = 0.0;
};

// Runs hybrid_train per qubit count with the shared seed and dataset and
// reports final-epoch metrics. The qubit/quality trend is reported for
// inspection, never asserted.
std::vector<ScalingRow> qubit_scaling_experiment(const TrainingConfig& base,
                                                 std::span<const int> qubit_counts,
                                                 const RewardFn& reward_override = nullptr);

// Deterministic columns only (no wall time):
// epoch,mean_reward,qcbm_nll,lstm_loss,sr,uf,df
std::string epoch_csv(std::span<const EpochReport> reports);

std::string scaling_csv(std::span<const ScalingRow> rows);

}  // namespace qdgen::engine
