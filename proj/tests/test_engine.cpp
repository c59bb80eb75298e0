#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "qdgen/engine.hpp"

using namespace qdgen;
using namespace qdgen::engine;

namespace {

TrainingConfig toy_config() {
    TrainingConfig cfg;
    cfg.n_qubits = 4;
    cfg.n_rotation_layers = 2;
    cfg.lstm_hidden = 32;
    cfg.lstm_embed = 16;
    cfg.epochs_lstm = 1;
    cfg.epochs_qcbm = 2;
    cfg.priors_per_epoch = 16;
    cfg.molecules_per_prior = 2;
    cfg.temperature = 1.0;
    cfg.master_seed = 11;
    cfg.dataset_path = std::string(QDGEN_FIXTURE_DIR) + "/toy_dataset.smi";
    cfg.max_len = 64;
    cfg.batch_size = 16;
    cfg.dropout = 0.1;
    cfg.cobyla.max_evals = 120;
    cfg.n_threads = 1;
    cfg.novelty_cache_size = 32;
    return cfg;
}

bool reports_equal(const EpochReport& a, const EpochReport& b) {
    return a.epoch == b.epoch && a.mean_reward == b.mean_reward && a.qcbm_nll == b.qcbm_nll &&
           a.lstm_loss == b.lstm_loss && a.sr == b.sr && a.uf == b.uf && a.df == b.df;
}

}  // namespace

TEST_CASE("config validation names the offending field") {
    TrainingConfig cfg = toy_config();
    cfg.n_qubits = -2;
    try {
        cfg.validate();
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.field() == "n_qubits");
    }
    TrainingConfig sw = toy_config();
    sw.reward_switch_epoch = 3;  // no scorer command configured
    CHECK_THROWS_AS(sw.validate(), ConfigError);
}

TEST_CASE("hybrid_train: toy run completes with reloadable checkpoints") {
    const TrainingConfig cfg = toy_config();
    const TrainResult result = hybrid_train(cfg);
    REQUIRE(result.reports.size() == 2);
    for (const auto& r : result.reports) {
        CHECK(r.mean_reward >= 0.0);
        CHECK(r.mean_reward <= 1.0);
        CHECK(r.sr >= 0.0);
        CHECK(r.sr <= 100.0);
        CHECK(r.uf >= 0.0);
        CHECK(r.uf <= 100.0);
        CHECK(r.df >= 0.0);
        CHECK(r.df <= 100.0);
        CHECK(r.qcbm_nll >= 0.0);
    }
    const auto path = std::filesystem::temp_directory_path() / "qdgen_ckpt_test.json";
    save_checkpoint(result.checkpoint, path);
    const Checkpoint back = load_checkpoint(path);
    CHECK(back.epoch == result.checkpoint.epoch);
    CHECK(back.theta == result.checkpoint.theta);
    CHECK(back.lstm_weights == result.checkpoint.lstm_weights);
    CHECK(back.vocabulary == result.checkpoint.vocabulary);

    // Generation from the saved and in-memory checkpoints agrees.
    const auto a = generate(result.checkpoint, 20, 1.0, 5);
    const auto b = generate(back, 20, 1.0, 5);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].smiles == b[i].smiles);
        CHECK(a[i].prior.bits == b[i].prior.bits);
    }
}

TEST_CASE("hybrid_train: deterministic across reruns and thread counts") {
    TrainingConfig cfg = toy_config();
    const TrainResult first = hybrid_train(cfg);
    const TrainResult second = hybrid_train(cfg);
    REQUIRE(first.reports.size() == second.reports.size());
    for (size_t i = 0; i < first.reports.size(); ++i)
        CHECK(reports_equal(first.reports[i], second.reports[i]));

    cfg.n_threads = 3;
    const TrainResult threaded = hybrid_train(cfg);
    CHECK(epoch_csv(first.reports) == epoch_csv(threaded.reports));
    CHECK(first.checkpoint.theta == threaded.checkpoint.theta);
    CHECK(first.checkpoint.lstm_weights == threaded.checkpoint.lstm_weights);
}

TEST_CASE("qcbm_train_step: reaches a delta target") {
    qsim::QcbmAnsatz ansatz{2, 1};
    Rng rng(3);
    std::vector<double> theta(static_cast<size_t>(ansatz.param_count()));
    for (double& t : theta) t = rng.uniform(-1.5, 1.5);

    qsim::TargetDistribution delta;
    delta.n_qubits = 2;
    delta.entries.push_back({{0, 2}, 1.0});

    optim::CobylaConfig cc;
    cc.max_evals = 600;
    const auto theta2 = qcbm_train_step(ansatz, theta, delta, cc);
    const double nll =
        qsim::exact_nll(qsim::born_distribution(qsim::build_state(ansatz, theta2)), delta);
    CHECK(nll < 0.05);  // target entropy is 0
}

TEST_CASE("qcbm_train_step: stationary when the target equals the current distribution") {
    qsim::QcbmAnsatz ansatz{2, 1};
    Rng rng(9);
    std::vector<double> theta(static_cast<size_t>(ansatz.param_count()));
    for (double& t : theta) t = rng.uniform(-1.0, 1.0);
    const auto born = qsim::born_distribution(qsim::build_state(ansatz, theta));
    qsim::TargetDistribution target;
    target.n_qubits = 2;
    for (uint32_t x = 0; x < 4; ++x) target.entries.push_back({{x, 2}, born.probs[x]});

    const double before = qsim::exact_nll(born, target);
    const auto theta2 = qcbm_train_step(ansatz, theta, target, {});
    const double after =
        qsim::exact_nll(qsim::born_distribution(qsim::build_state(ansatz, theta2)), target);
    CHECK(after <= before + 1e-12);
    CHECK(before - after <= before - target.entropy() + 1e-9);
}

TEST_CASE("qcbm_train_step: Bell-pair target reaches ln 2") {
    qsim::QcbmAnsatz ansatz{2, 1};
    Rng rng(4);
    std::vector<double> theta(static_cast<size_t>(ansatz.param_count()));
    for (double& t : theta) t = rng.uniform(-1.5, 1.5);

    qsim::TargetDistribution bell;
    bell.n_qubits = 2;
    bell.entries.push_back({{0, 2}, 0.5});
    bell.entries.push_back({{3, 2}, 0.5});

    optim::CobylaConfig cc;
    cc.max_evals = 800;
    const auto theta2 = qcbm_train_step(ansatz, theta, bell, cc);
    const double nll =
        qsim::exact_nll(qsim::born_distribution(qsim::build_state(ansatz, theta2)), bell);
    CHECK(nll < std::log(2.0) + 0.05);
}

TEST_CASE("generate: count zero, determinism, decode robustness") {
    TrainingConfig cfg = toy_config();
    cfg.epochs_lstm = 6;  // enough training that empty sequences die out
    const TrainResult result = hybrid_train(cfg);
    CHECK(generate(result.checkpoint, 0, 1.0, 1).empty());

    const auto a = generate(result.checkpoint, 50, 1.0, 123);
    const auto b = generate(result.checkpoint, 50, 1.0, 123);
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i].smiles == b[i].smiles);

    const auto big = generate(result.checkpoint, 1000, 1.0, 7, 2);
    int failures = 0;
    for (const auto& g : big)
        if (!g.smiles) ++failures;
    // Decoding is total; the only failure mode is a sequence with no
    // realizable atom token, which training suppresses.
    CHECK(failures <= 20);
    MESSAGE("decode failures in 1000 samples: " << failures);
}

TEST_CASE("metrics: UF on the duplicate fixture") {
    std::vector<mol::MolecularGraph> mols = {mol::parse_smiles("CC"), mol::parse_smiles("CC"),
                                             mol::parse_smiles("CCO")};
    const MetricsReport m = metrics(mols, 0);
    CHECK(m.uf == doctest::Approx(100.0 * 2.0 / 3.0).epsilon(1e-9));
    CHECK(m.sr == doctest::Approx(0.0));
}

TEST_CASE("metrics: identical molecules have zero diversity") {
    std::vector<mol::MolecularGraph> mols(5, mol::parse_smiles("CC(=O)Oc1ccccc1C(=O)O"));
    const MetricsReport m = metrics(mols, 0);
    CHECK(m.df == doctest::Approx(0.0));
    CHECK(m.uf == doctest::Approx(20.0));
}

TEST_CASE("metrics: hand-evaluated success rate on ten molecules") {
    // Eight drug-like passers plus methane and benzene, which fail.
    const char* fixture[] = {
        "CC(=O)Oc1ccccc1C(=O)O",
        "CC(C)Cc1ccc(cc1)C(C)C(=O)O",
        "CC(=O)Nc1ccc(O)cc1",
        "CN1C=NC2=C1C(=O)N(C)C(=O)N2C",
        "COc1ccc2cc(ccc2c1)C(C)C(=O)O",
        "CC(C)(C)NCC(O)c1ccc(O)c(CO)c1",
        "CCN(CC)CC(=O)Nc1c(C)cccc1C",
        "CCOC(=O)c1ccc(N)cc1",
        "C",
        "c1ccccc1",
    };
    std::vector<mol::MolecularGraph> mols;
    for (const char* s : fixture) mols.push_back(mol::parse_smiles(s));
    const MetricsReport m = metrics(mols, 0);
    CHECK(m.sr == doctest::Approx(80.0));
    CHECK(m.uf == doctest::Approx(100.0));
    CHECK_THROWS_AS(metrics({}, 0), reward::EmptyBatch);
}

TEST_CASE("checkpoint: schema and shape validation") {
    const auto dir = std::filesystem::temp_directory_path();
    const auto bad_schema = dir / "qdgen_bad_schema.json";
    {
        std::FILE* f = std::fopen(bad_schema.string().c_str(), "w");
        std::fputs("{\"schema_version\": 99}", f);
        std::fclose(f);
    }
    CHECK_THROWS_AS(load_checkpoint(bad_schema), CheckpointError);

    const auto garbage = dir / "qdgen_garbage.json";
    {
        std::FILE* f = std::fopen(garbage.string().c_str(), "w");
        std::fputs("not json at all", f);
        std::fclose(f);
    }
    CHECK_THROWS_AS(load_checkpoint(garbage), CheckpointError);
    CHECK_THROWS_AS(load_checkpoint(dir / "qdgen_missing.json"), CheckpointError);
}

TEST_CASE("scaling: duplicate counts give identical rows") {
    TrainingConfig cfg = toy_config();
    cfg.epochs_qcbm = 1;
    const std::vector<int> counts = {4, 4};
    const auto rows = qubit_scaling_experiment(cfg, counts);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].sr == rows[1].sr);
    CHECK(rows[0].uf == rows[1].uf);
    CHECK(rows[0].df == rows[1].df);

    const std::vector<int> pair = {4, 6};
    const auto grown = qubit_scaling_experiment(cfg, pair);
    REQUIRE(grown.size() == 2);
    for (const auto& row : grown) {
        CHECK(row.sr >= 0.0);
        CHECK(row.sr <= 100.0);
        CHECK(row.seconds > 0.0);
    }
    const std::string csv = scaling_csv(grown);
    CHECK(csv.find("n_qubits,sr,uf,df") == 0);
}

TEST_CASE("dataset too small is rejected") {
    TrainingConfig cfg = toy_config();
    cfg.dataset_path = std::string(QDGEN_FIXTURE_DIR) + "/seeds_druglike.smi";
    CHECK_THROWS_AS(hybrid_train(cfg), DatasetTooSmall);
}

TEST_CASE("reward override drives the target distribution") {
    TrainingConfig cfg = toy_config();
    cfg.epochs_qcbm = 1;
    int calls = 0;
    const RewardFn constant = [&](const std::optional<mol::MolecularGraph>& g) {
        ++calls;
        return g ? 1.0 : 0.0;
    };
    const TrainResult result = hybrid_train(cfg, constant);
    CHECK(calls >= cfg.priors_per_epoch * cfg.molecules_per_prior);
    REQUIRE(result.history.size() == 1);
    double sum = 0.0;
    for (const auto& [bits, p] : result.history[0].aggregated_rewards) sum += p;
    CHECK(sum > 0.0);
}
