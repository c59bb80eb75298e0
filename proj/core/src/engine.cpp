#include "qdgen/engine.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <thread>

#include "json.hpp"

namespace qdgen::engine {

namespace {

using nlohmann::json;

int resolve_threads(int requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

// Runs fn(0..n-1) on up to n_threads workers. fn must only write state owned
// by its index, which keeps results independent of scheduling.
void parallel_indexed(int n, int n_threads, const std::function<void(int)>& fn) {
    n_threads = std::min(resolve_threads(n_threads), n);
    if (n_threads <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> workers;
    workers.reserve(static_cast<size_t>(n_threads));
    for (int w = 0; w < n_threads; ++w) {
        workers.emplace_back([&] {
            for (;;) {
                const int i = next.fetch_add(1);
                if (i >= n) return;
                fn(i);
            }
        });
    }
    for (auto& t : workers) t.join();
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

struct EncodedCorpus {
    selfies::Alphabet alphabet;
    std::vector<std::vector<int>> token_ids;  // per molecule, ids >= 3
    std::vector<mol::MolecularGraph> molecules;
    int skipped_too_long = 0;
};

EncodedCorpus encode_corpus(const dataset::ParsedDataset& data, int max_len) {
    EncodedCorpus corpus;
    std::vector<selfies::TokenSequence> sequences;
    sequences.reserve(data.molecules.size());
    for (const auto& g : data.molecules) sequences.push_back(selfies::encode(g));
    corpus.alphabet = selfies::Alphabet::from_corpus(sequences);
    for (size_t i = 0; i < sequences.size(); ++i) {
        if (static_cast<int>(sequences[i].size()) > max_len) {
            ++corpus.skipped_too_long;
            continue;
        }
        std::vector<int> ids;
        ids.reserve(sequences[i].size());
        for (const auto& tok : sequences[i].tokens) ids.push_back(corpus.alphabet.id_of(tok.text));
        corpus.token_ids.push_back(std::move(ids));
        corpus.molecules.push_back(data.molecules[i]);
    }
    return corpus;
}

qsim::BitString random_bits(int n_qubits, Rng& rng) {
    uint32_t bits = 0;
    for (int q = 0; q < n_qubits; ++q)
        if (rng.bernoulli(0.5)) bits |= (1u << q);
    return {bits, n_qubits};
}

selfies::TokenSequence ids_to_tokens(std::span<const int> ids, const selfies::Alphabet& alphabet) {
    selfies::TokenSequence seq;
    seq.tokens.reserve(ids.size());
    for (int id : ids) seq.tokens.push_back(alphabet.token(id));
    return seq;
}

}  // namespace

void TrainingConfig::validate() const {
    auto need = [](bool ok, const char* field, const std::string& why) {
        if (!ok) throw ConfigError(field, std::string("config error: ") + field + ": " + why);
    };
    need(n_qubits >= 1 && n_qubits <= 24, "n_qubits", "must be in 1..24");
    need(n_rotation_layers >= 1, "n_rotation_layers", "must be >= 1");
    need(lstm_hidden >= 1, "lstm_hidden", "must be >= 1");
    need(lstm_embed >= 1, "lstm_embed", "must be >= 1");
    need(epochs_lstm >= 1, "epochs_lstm", "must be >= 1");
    need(epochs_qcbm >= 1, "epochs_qcbm", "must be >= 1");
    need(priors_per_epoch >= 1, "priors_per_epoch", "must be >= 1");
    need(molecules_per_prior >= 1, "molecules_per_prior", "must be >= 1");
    need(temperature > 0.0, "temperature", "must be > 0");
    need(!dataset_path.empty(), "dataset_path", "must be set");
    need(max_len >= 1, "max_len", "must be >= 1");
    need(batch_size >= 1, "batch_size", "must be >= 1");
    need(dropout >= 0.0 && dropout <= 1.0, "dropout", "must be in [0,1]");
    need(lstm_lr > 0.0, "lstm_lr", "must be > 0");
    need(cobyla.rho_end > 0.0 && cobyla.rho_end < cobyla.rho_begin, "cobyla",
         "need 0 < rho_end < rho_begin");
    need(cobyla.max_evals >= 1, "cobyla", "max_evals must be >= 1");
    need(novelty_cache_size >= 0, "novelty_cache_size", "must be >= 0");
    if (reward_switch_epoch >= 0)
        need(!scorer_command.empty(), "reward_switch_epoch",
             "external scorer command required when a switch epoch is set");
}

std::vector<double> qcbm_train_step(const qsim::QcbmAnsatz& ansatz,
                                    std::span<const double> theta,
                                    const qsim::TargetDistribution& target,
                                    const optim::CobylaConfig& config) {
    const auto objective = [&](std::span<const double> t) {
        return qsim::exact_nll(qsim::born_distribution(qsim::build_state(ansatz, t)), target);
    };
    const optim::CobylaResult result = optim::cobyla_minimize(objective, theta, config);
    return result.x_best;
}

MetricsReport metrics(std::span<const mol::MolecularGraph> molecules,
                      const std::function<bool(const mol::MolecularGraph&)>& filter,
                      uint64_t pair_seed) {
    if (molecules.empty()) throw reward::EmptyBatch("metrics over an empty molecule list");
    const int n = static_cast<int>(molecules.size());

    int passed = 0;
    std::set<std::string> keys;
    for (const auto& g : molecules) {
        if (filter(g)) ++passed;
        keys.insert(mol::canonical_key(g));
    }
    MetricsReport report;
    report.sr = 100.0 * passed / n;
    report.uf = 100.0 * static_cast<double>(keys.size()) / n;

    if (n < 2) {
        report.df = 0.0;
        return report;
    }
    std::vector<mol::Fingerprint> fps;
    fps.reserve(molecules.size());
    for (const auto& g : molecules) fps.push_back(mol::path_fingerprint(g));

    const long long all_pairs = static_cast<long long>(n) * (n - 1) / 2;
    double sim_sum = 0.0;
    long long pair_count = 0;
    if (all_pairs <= 1000) {
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                sim_sum += mol::tanimoto(fps[static_cast<size_t>(i)], fps[static_cast<size_t>(j)]);
                ++pair_count;
            }
    } else {
        Rng rng(derive_seed(pair_seed, "df-pairs"));
        for (int k = 0; k < 1000; ++k) {
            int i = static_cast<int>(rng.uniform_index(static_cast<size_t>(n)));
            int j = static_cast<int>(rng.uniform_index(static_cast<size_t>(n) - 1));
            if (j >= i) ++j;
            sim_sum += mol::tanimoto(fps[static_cast<size_t>(i)], fps[static_cast<size_t>(j)]);
            ++pair_count;
        }
    }
    report.df = 100.0 * (1.0 - sim_sum / static_cast<double>(pair_count));
    return report;
}

MetricsReport metrics(std::span<const mol::MolecularGraph> molecules, uint64_t pair_seed) {
    return metrics(
        molecules, [](const mol::MolecularGraph& g) { return reward::local_filter(g).passed; },
        pair_seed);
}

// ---------------------------------------------------------------------------
// Checkpoints

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    json j;
    j["schema_version"] = ckpt.schema_version;
    j["epoch"] = ckpt.epoch;
    j["master_seed"] = ckpt.master_seed;
    j["qcbm"] = {{"schema_version", 1},
                 {"n_qubits", ckpt.ansatz.n_qubits},
                 {"n_rotation_layers", ckpt.ansatz.n_rotation_layers},
                 {"theta", ckpt.theta}};
    j["lstm"] = {{"schema_version", 1},
                 {"mode", ckpt.dims.mode == neural::PriorMode::Concat ? "concat" : "add"},
                 {"vocab_size", ckpt.dims.vocab_size},
                 {"embed_dim", ckpt.dims.embed_dim},
                 {"hidden_dim", ckpt.dims.hidden_dim},
                 {"n_qubits", ckpt.dims.n_qubits},
                 {"weights", ckpt.lstm_weights},
                 {"vocabulary", ckpt.vocabulary}};
    j["gen"] = {{"temperature", ckpt.temperature}, {"max_len", ckpt.max_len}};

    std::ofstream out(path);
    if (!out) throw CheckpointError("cannot write checkpoint: " + path.string());
    out << j.dump(1) << "\n";
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw CheckpointError("cannot read checkpoint: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw CheckpointError(std::string("malformed checkpoint JSON: ") + e.what());
    }
    try {
        Checkpoint ckpt;
        ckpt.schema_version = j.at("schema_version").get<int>();
        if (ckpt.schema_version != 1)
            throw CheckpointError("unsupported checkpoint schema version " +
                                  std::to_string(ckpt.schema_version));
        ckpt.epoch = j.at("epoch").get<int>();
        ckpt.master_seed = j.at("master_seed").get<uint64_t>();
        const json& q = j.at("qcbm");
        ckpt.ansatz.n_qubits = q.at("n_qubits").get<int>();
        ckpt.ansatz.n_rotation_layers = q.at("n_rotation_layers").get<int>();
        ckpt.theta = q.at("theta").get<std::vector<double>>();
        const json& l = j.at("lstm");
        const std::string mode = l.at("mode").get<std::string>();
        if (mode != "concat" && mode != "add")
            throw CheckpointError("unknown prior mode: " + mode);
        ckpt.dims.mode = mode == "concat" ? neural::PriorMode::Concat : neural::PriorMode::Add;
        ckpt.dims.vocab_size = l.at("vocab_size").get<int>();
        ckpt.dims.embed_dim = l.at("embed_dim").get<int>();
        ckpt.dims.hidden_dim = l.at("hidden_dim").get<int>();
        ckpt.dims.n_qubits = l.at("n_qubits").get<int>();
        ckpt.lstm_weights = l.at("weights").get<std::vector<double>>();
        ckpt.vocabulary = l.at("vocabulary").get<std::vector<std::string>>();
        ckpt.temperature = j.at("gen").at("temperature").get<double>();
        ckpt.max_len = j.at("gen").at("max_len").get<int>();

        if (static_cast<int>(ckpt.theta.size()) != ckpt.ansatz.param_count())
            throw CheckpointError("theta length does not match the ansatz");
        if (ckpt.dims.vocab_size != static_cast<int>(ckpt.vocabulary.size()) + 3)
            throw CheckpointError("vocabulary size does not match dims");
        neural::LstmParams probe = neural::LstmParams::zeros(ckpt.dims);
        if (probe.size() != ckpt.lstm_weights.size())
            throw CheckpointError("weight count does not match dims");
        return ckpt;
    } catch (const CheckpointError&) {
        throw;
    } catch (const std::exception& e) {
        throw CheckpointError(std::string("invalid checkpoint: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Generation

std::vector<Generated> generate(const Checkpoint& ckpt, int count, double temperature,
                                uint64_t seed, int n_threads) {
    std::vector<Generated> out(static_cast<size_t>(std::max(0, count)));
    if (count <= 0) return out;

    const selfies::Alphabet alphabet = selfies::Alphabet::from_token_texts(ckpt.vocabulary);
    neural::LstmParams params = neural::LstmParams::zeros(ckpt.dims);
    params.data = ckpt.lstm_weights;
    const qsim::BornDistribution born =
        qsim::born_distribution(qsim::build_state(ckpt.ansatz, ckpt.theta));
    neural::GenConfig gen;
    gen.temperature = temperature;
    gen.max_len = ckpt.max_len;

    parallel_indexed(count, n_threads, [&](int k) {
        Rng rng(derive_seed(seed, "generate", static_cast<uint64_t>(k)));
        const qsim::BitString prior = qsim::sample(born, 1, rng)[0];
        const std::vector<int> ids = neural::sample_sequence(prior, params, gen, rng);
        Generated& slot = out[static_cast<size_t>(k)];
        slot.prior = prior;
        if (auto graph = selfies::decode(ids_to_tokens(ids, alphabet)))
            slot.smiles = mol::write_smiles(*graph);
    });
    return out;
}

// ---------------------------------------------------------------------------
// Hybrid training

namespace {

struct Trainer {
    const TrainingConfig& cfg;
    const RewardFn& reward_override;
    EncodedCorpus corpus;
    neural::LstmParams lstm;
    optim::AdamState adam;
    qsim::QcbmAnsatz ansatz;
    std::vector<double> theta;
    reward::RewardContext novelty_context;
    int n_threads;

    Trainer(const TrainingConfig& config, const RewardFn& override_fn)
        : cfg(config),
          reward_override(override_fn),
          adam(0),
          n_threads(resolve_threads(config.n_threads)) {}

    Checkpoint make_checkpoint(int epoch) const {
        Checkpoint ckpt;
        ckpt.epoch = epoch;
        ckpt.master_seed = cfg.master_seed;
        ckpt.ansatz = ansatz;
        ckpt.theta = theta;
        ckpt.dims = lstm.dims;
        ckpt.lstm_weights = lstm.data;
        ckpt.vocabulary = corpus.alphabet.token_texts();
        ckpt.temperature = cfg.temperature;
        ckpt.max_len = cfg.max_len;
        return ckpt;
    }

    // One pass over the shuffled dataset; priors drawn fresh per sequence,
    // either from the current circuit or uniformly at random.
    double lstm_pass(uint64_t pass_tag, const qsim::BornDistribution& born, bool uniform_priors) {
        const size_t n = corpus.token_ids.size();
        std::vector<int> order(n);
        for (size_t i = 0; i < n; ++i) order[i] = static_cast<int>(i);
        Rng shuffle_rng(derive_seed(cfg.master_seed, "shuffle", pass_tag));
        for (size_t i = n; i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.uniform_index(i)]);

        double loss_sum = 0.0;
        int batch_count = 0;
        std::vector<double> grad(lstm.size());
        std::vector<std::vector<double>> item_grads;
        std::vector<double> item_losses;

        for (size_t start = 0; start < n; start += static_cast<size_t>(cfg.batch_size)) {
            const size_t batch_n = std::min(static_cast<size_t>(cfg.batch_size), n - start);
            item_grads.assign(batch_n, {});
            item_losses.assign(batch_n, 0.0);

            parallel_indexed(static_cast<int>(batch_n), n_threads, [&](int k) {
                const auto& ids = corpus.token_ids[static_cast<size_t>(order[start + static_cast<size_t>(k)])];
                std::vector<int> input;
                input.reserve(ids.size() + 1);
                input.push_back(selfies::Alphabet::kStart);
                input.insert(input.end(), ids.begin(), ids.end());
                std::vector<int> target(ids.begin(), ids.end());
                target.push_back(selfies::Alphabet::kEnd);

                const uint64_t item_tag = pass_tag * 1000003ULL + start + static_cast<size_t>(k);
                Rng prior_rng(derive_seed(cfg.master_seed, "batch_prior", item_tag));
                const qsim::BitString prior = uniform_priors
                                                  ? random_bits(cfg.n_qubits, prior_rng)
                                                  : qsim::sample(born, 1, prior_rng)[0];

                Rng dropout_rng(derive_seed(cfg.master_seed, "dropout", item_tag));
                neural::ForwardPass pass = neural::forward_sequence(
                    input, prior, lstm, cfg.dropout, cfg.dropout > 0.0 ? &dropout_rng : nullptr);
                item_losses[static_cast<size_t>(k)] =
                    neural::nll_loss(pass.logits, target, selfies::Alphabet::kPad);
                item_grads[static_cast<size_t>(k)] = neural::backward_sequence(
                    pass, target, prior, lstm, selfies::Alphabet::kPad);
            });

            std::fill(grad.begin(), grad.end(), 0.0);
            double batch_loss = 0.0;
            for (size_t k = 0; k < batch_n; ++k) {
                batch_loss += item_losses[k];
                const auto& g = item_grads[k];
                for (size_t i = 0; i < grad.size(); ++i) grad[i] += g[i];
            }
            const double inv = 1.0 / static_cast<double>(batch_n);
            for (double& g : grad) g *= inv;
            optim::adam_step(lstm.data, grad, adam);
            loss_sum += batch_loss * inv;
            ++batch_count;
        }
        return batch_count > 0 ? loss_sum / batch_count : 0.0;
    }
};

}  // namespace

TrainResult hybrid_train(const TrainingConfig& config, const RewardFn& reward_override,
                         const EpochCallback& on_epoch) {
    config.validate();

    const auto records = dataset::read_smiles_file(config.dataset_path);
    const auto parsed = dataset::parse_dataset(records, /*lenient=*/false);
    if (static_cast<int>(parsed.molecules.size()) < 100)
        throw DatasetTooSmall("dataset has " + std::to_string(parsed.molecules.size()) +
                              " molecules; need at least 100");

    Trainer tr(config, reward_override);
    tr.corpus = encode_corpus(parsed, config.max_len);
    if (tr.corpus.token_ids.empty()) throw DatasetTooSmall("no dataset molecule fits max_len");

    neural::LstmDims dims;
    dims.vocab_size = tr.corpus.alphabet.vocab_size();
    dims.embed_dim = config.lstm_embed;
    dims.hidden_dim = config.lstm_hidden;
    dims.n_qubits = config.n_qubits;
    dims.mode = config.prior_mode;
    Rng init_rng(derive_seed(config.master_seed, "lstm_init"));
    tr.lstm = neural::LstmParams::init(dims, init_rng);
    tr.adam = optim::AdamState(tr.lstm.size(), {.lr = config.lstm_lr});

    tr.ansatz = {config.n_qubits, config.n_rotation_layers};
    Rng theta_rng(derive_seed(config.master_seed, "qcbm_init"));
    tr.theta.resize(static_cast<size_t>(tr.ansatz.param_count()));
    constexpr double kPi = 3.14159265358979323846;
    for (double& t : tr.theta) t = theta_rng.uniform(-kPi, kPi);

    // Novelty cache: an even stride through the corpus.
    const int cache_n =
        std::min<int>(config.novelty_cache_size, static_cast<int>(tr.corpus.molecules.size()));
    if (cache_n > 0) {
        const size_t stride = tr.corpus.molecules.size() / static_cast<size_t>(cache_n);
        for (int k = 0; k < cache_n; ++k)
            tr.novelty_context.training_fps.push_back(
                mol::path_fingerprint(tr.corpus.molecules[static_cast<size_t>(k) * std::max<size_t>(1, stride)]));
    }

    // Initial priors from the untrained circuit (no rewards exist yet).
    qsim::BornDistribution born =
        qsim::born_distribution(qsim::build_state(tr.ansatz, tr.theta));
    Rng prior0_rng(derive_seed(config.master_seed, "priors", 0));
    std::vector<qsim::BitString> priors =
        qsim::sample(born, config.priors_per_epoch, prior0_rng);

    // Dataset pre-training passes.
    for (int pass = 0; pass < config.epochs_lstm; ++pass)
        tr.lstm_pass(static_cast<uint64_t>(pass), born, config.pretrain_uniform_priors);

    TrainResult result;
    neural::GenConfig gen;
    gen.temperature = config.temperature;
    gen.max_len = config.max_len;

    std::vector<double> recent_rewards;
    for (int epoch = 1; epoch <= config.epochs_qcbm; ++epoch) {
        const auto t_start = std::chrono::steady_clock::now();

        // (1) One LSTM pass with priors from the current circuit.
        born = qsim::born_distribution(qsim::build_state(tr.ansatz, tr.theta));
        const double lstm_loss =
            tr.lstm_pass(static_cast<uint64_t>(1000000 + epoch), born, false);

        // (2) Generate molecules_per_prior sequences under each prior.
        const int n_items = config.priors_per_epoch * config.molecules_per_prior;
        std::vector<std::optional<mol::MolecularGraph>> graphs(static_cast<size_t>(n_items));
        parallel_indexed(n_items, tr.n_threads, [&](int item) {
            const int i = item / config.molecules_per_prior;
            Rng rng(derive_seed(config.master_seed, "gen",
                                (static_cast<uint64_t>(epoch) << 32) | static_cast<uint64_t>(item)));
            const std::vector<int> ids =
                neural::sample_sequence(priors[static_cast<size_t>(i)], tr.lstm, gen, rng);
            graphs[static_cast<size_t>(item)] = selfies::decode(ids_to_tokens(ids, tr.corpus.alphabet));
        });

        // (3) Rewards.
        std::vector<double> rewards(static_cast<size_t>(n_items), 0.0);
        const bool external_active = !config.scorer_command.empty() &&
                                     config.reward_switch_epoch >= 0 &&
                                     epoch >= config.reward_switch_epoch && !reward_override;
        if (reward_override) {
            parallel_indexed(n_items, tr.n_threads, [&](int item) {
                rewards[static_cast<size_t>(item)] = reward_override(graphs[static_cast<size_t>(item)]);
            });
        } else if (external_active) {
            std::vector<std::string> smiles;
            std::vector<int> owners;
            for (int item = 0; item < n_items; ++item) {
                if (graphs[static_cast<size_t>(item)]) {
                    smiles.push_back(mol::write_smiles(*graphs[static_cast<size_t>(item)]));
                    owners.push_back(item);
                }
            }
            if (!smiles.empty()) {
                const std::vector<double> scores =
                    reward::external_reward(config.scorer_command, smiles);
                for (size_t k = 0; k < owners.size(); ++k)
                    rewards[static_cast<size_t>(owners[k])] = std::clamp(scores[k], 0.0, 1.0);
            }
        } else {
            parallel_indexed(n_items, tr.n_threads, [&](int item) {
                rewards[static_cast<size_t>(item)] =
                    reward::compute_reward(graphs[static_cast<size_t>(item)], tr.novelty_context);
            });
        }

        // (4) Aggregate per prior bitstring (duplicates merge by mean).
        std::map<qsim::BitString, std::pair<double, int>> agg;
        for (int item = 0; item < n_items; ++item) {
            const auto& bits = priors[static_cast<size_t>(item / config.molecules_per_prior)];
            auto& slot = agg[bits];
            slot.first += rewards[static_cast<size_t>(item)];
            slot.second += 1;
        }
        std::vector<std::pair<qsim::BitString, double>> aggregated;
        aggregated.reserve(agg.size());
        for (const auto& [bits, sum_count] : agg)
            aggregated.push_back({bits, sum_count.first / sum_count.second});

        // (5) Softmax target; its normalization is a runtime invariant.
        const qsim::TargetDistribution target = reward::build_target(aggregated);
        double target_sum = 0.0;
        for (const auto& [bits, p] : target.entries) target_sum += p;
        if (std::abs(target_sum - 1.0) > 1e-9)
            throw std::logic_error("target distribution normalization broke");

        // (6) Circuit training step.
        tr.theta = qcbm_train_step(tr.ansatz, tr.theta, target, config.cobyla);
        born = qsim::born_distribution(qsim::build_state(tr.ansatz, tr.theta));
        const double qcbm_nll = qsim::exact_nll(born, target);

        // (7) Resample priors for the next epoch.
        Rng resample_rng(derive_seed(config.master_seed, "priors", static_cast<uint64_t>(epoch)));
        std::vector<qsim::BitString> next_priors =
            qsim::sample(born, config.priors_per_epoch, resample_rng);

        // (8) Report.
        EpochReport report;
        report.epoch = epoch;
        report.lstm_loss = lstm_loss;
        report.qcbm_nll = qcbm_nll;
        double reward_sum = 0.0;
        for (double r : rewards) reward_sum += r;
        report.mean_reward = reward_sum / n_items;

        std::vector<mol::MolecularGraph> decoded;
        for (auto& g : graphs)
            if (g) decoded.push_back(*g);
        if (!decoded.empty()) {
            const MetricsReport m =
                metrics(decoded, derive_seed(config.master_seed, "df", static_cast<uint64_t>(epoch)));
            report.sr = m.sr;
            report.uf = m.uf;
            report.df = m.df;
        }
        report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();

        EpochDetail detail;
        detail.priors = priors;
        detail.aggregated_rewards = aggregated;
        detail.theta_after = tr.theta;
        result.history.push_back(std::move(detail));
        result.reports.push_back(report);
        if (on_epoch) on_epoch(report, tr.make_checkpoint(epoch));

        priors = std::move(next_priors);

        if (config.early_stop) {
            recent_rewards.push_back(report.mean_reward);
            if (recent_rewards.size() >= 6) {
                const size_t last = recent_rewards.size() - 1;
                double span_max = recent_rewards[last], span_min = recent_rewards[last];
                for (size_t k = last - 5; k <= last; ++k) {
                    span_max = std::max(span_max, recent_rewards[k]);
                    span_min = std::min(span_min, recent_rewards[k]);
                }
                if (span_max - span_min < 1e-3) break;
            }
        }
    }

    result.checkpoint = tr.make_checkpoint(result.reports.empty() ? 0 : result.reports.back().epoch);
    return result;
}

std::vector<ScalingRow> qubit_scaling_experiment(const TrainingConfig& base,
                                                 std::span<const int> qubit_counts,
                                                 const RewardFn& reward_override) {
    std::vector<ScalingRow> rows;
    rows.reserve(qubit_counts.size());
    for (int count : qubit_counts) {
        TrainingConfig cfg = base;
        cfg.n_qubits = count;
        const auto t0 = std::chrono::steady_clock::now();
        const TrainResult result = hybrid_train(cfg, reward_override);
        ScalingRow row;
        row.n_qubits = count;
        if (!result.reports.empty()) {
            const EpochReport& last = result.reports.back();
            row.sr = last.sr;
            row.uf = last.uf;
            row.df = last.df;
        }
        row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        rows.push_back(row);
    }
    return rows;
}

std::string epoch_csv(std::span<const EpochReport> reports) {
    std::string out = "epoch,mean_reward,qcbm_nll,lstm_loss,sr,uf,df\n";
    for (const EpochReport& r : reports) {
        out += std::to_string(r.epoch);
        for (double v : {r.mean_reward, r.qcbm_nll, r.lstm_loss, r.sr, r.uf, r.df}) {
            out += ',';
            out += format_double(v);
        }
        out += '\n';
    }
    return out;
}

std::string scaling_csv(std::span<const ScalingRow> rows) {
    std::string out = "n_qubits,sr,uf,df\n";
    for (const ScalingRow& r : rows) {
        out += std::to_string(r.n_qubits);
        for (double v : {r.sr, r.uf, r.df}) {
            out += ',';
            out += format_double(v);
        }
        out += '\n';
    }
    return out;
}

}  // namespace qdgen::engine
