// qdgen command line: dataset augmentation, hybrid training, sampling,
// evaluation, and the qubit-scaling study.
//
// Exit codes: 0 ok, 2 input parse, 3 config, 4 scorer, 5 checkpoint.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "qdgen/dataset.hpp"
#include "qdgen/engine.hpp"
#include "qdgen/fingerprint.hpp"
#include "qdgen/molgraph.hpp"
#include "qdgen/reward.hpp"
#include "qdgen/rng.hpp"
#include "qdgen/selfies.hpp"
#include "run_config.hpp"
#include "svg_plot.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace qdgen;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitConfig = 3;
constexpr int kExitScorer = 4;
constexpr int kExitCheckpoint = 5;

int env_threads() {
    const char* env = std::getenv("QDGEN_THREADS");
    if (env == nullptr) return 0;
    try {
        return std::max(0, std::stoi(env));
    } catch (const std::exception&) {
        return 0;
    }
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw dataset::DatasetError("cannot write " + path.string(), 0);
    out << text;
}

int cmd_augment(const std::string& in_path, const std::string& out_path, int per_seed,
                int max_attempts, uint64_t seed, bool local_filter_on) {
    const auto records = dataset::read_smiles_file(in_path);
    const auto parsed = dataset::parse_dataset(records, /*lenient=*/false);

    std::vector<selfies::TokenSequence> sequences;
    for (const auto& g : parsed.molecules) sequences.push_back(selfies::encode(g));
    const selfies::Alphabet alphabet = selfies::Alphabet::from_corpus(sequences);

    auto filter = [&](const mol::MolecularGraph& g) {
        return !local_filter_on || reward::local_filter(g).passed;
    };

    std::vector<std::string> out_smiles;
    long long attempts_total = 0;
    for (size_t i = 0; i < parsed.molecules.size(); ++i) {
        Rng rng(derive_seed(seed, "augment", i));
        int used = 0;
        const auto mutants = selfies::stoned_expand(parsed.molecules[i], per_seed, max_attempts,
                                                    filter, alphabet, rng, &used);
        attempts_total += used;
        for (const auto& m : mutants) out_smiles.push_back(mol::write_smiles(m));
    }

    std::vector<std::string> header = {
        "augmented dataset",
        "seeds: " + std::to_string(parsed.molecules.size()) + " from " + in_path,
        "attempts: " + std::to_string(attempts_total) + " (max " + std::to_string(max_attempts) +
            " per seed)",
        "per-seed target: " + std::to_string(per_seed),
        "seed: " + std::to_string(seed),
    };
    dataset::write_smiles_file(out_path, out_smiles, header);
    std::cout << "seeds=" << parsed.molecules.size() << " attempts=" << attempts_total
              << " accepted=" << out_smiles.size() << "\n";
    return kExitOk;
}

int cmd_train(const std::string& config_path, const std::string& out_override) {
    cli::RunConfig rc = cli::parse_run_config(config_path);
    if (!out_override.empty()) rc.out_dir = out_override;
    if (rc.out_dir.empty())
        throw engine::ConfigError("out_dir", "out_dir missing (set it in the config or pass --out)");
    rc.training.n_threads = env_threads();
    rc.training.validate();

    fs::create_directories(rc.out_dir);
    const fs::path out_dir(rc.out_dir);

    auto on_epoch = [&](const engine::EpochReport& report, const engine::Checkpoint& ckpt) {
        engine::save_checkpoint(ckpt,
                                out_dir / ("checkpoint_epoch_" + std::to_string(report.epoch) +
                                           ".json"));
        std::cerr << "epoch " << report.epoch << ": mean_reward=" << report.mean_reward
                  << " qcbm_nll=" << report.qcbm_nll << " lstm_loss=" << report.lstm_loss
                  << " sr=" << report.sr << " uf=" << report.uf << " df=" << report.df << " ("
                  << report.seconds << "s)\n";
    };

    const engine::TrainResult result = engine::hybrid_train(rc.training, nullptr, on_epoch);

    write_text(out_dir / "epochs.csv", engine::epoch_csv(result.reports));
    engine::save_checkpoint(result.checkpoint, out_dir / "checkpoint_final.json");

    json summary;
    summary["epochs"] = result.reports.size();
    summary["dataset"] = rc.training.dataset_path;
    summary["n_qubits"] = rc.training.n_qubits;
    summary["master_seed"] = rc.training.master_seed;
    double total_seconds = 0.0;
    json per_epoch = json::array();
    for (const auto& r : result.reports) {
        total_seconds += r.seconds;
        per_epoch.push_back({{"epoch", r.epoch}, {"seconds", r.seconds}});
    }
    summary["seconds_total"] = total_seconds;
    summary["seconds_per_epoch"] = per_epoch;
    if (!result.reports.empty()) {
        const auto& last = result.reports.back();
        summary["final"] = {{"mean_reward", last.mean_reward}, {"qcbm_nll", last.qcbm_nll},
                            {"lstm_loss", last.lstm_loss},     {"sr", last.sr},
                            {"uf", last.uf},                   {"df", last.df}};
    }
    write_text(out_dir / "summary.json", summary.dump(1) + "\n");
    return kExitOk;
}

int cmd_sample(const std::string& ckpt_path, int count, double temperature,
               const std::string& out_path, uint64_t seed) {
    const engine::Checkpoint ckpt = engine::load_checkpoint(ckpt_path);
    const double temp = temperature > 0.0 ? temperature : ckpt.temperature;
    const auto generated = engine::generate(ckpt, count, temp, seed, env_threads());

    std::ofstream out(out_path);
    if (!out) throw dataset::DatasetError("cannot write " + out_path, 0);
    std::ofstream failures(out_path + ".failures");
    int ok = 0, failed = 0;
    for (const auto& g : generated) {
        if (g.smiles) {
            out << *g.smiles << "\n";
            ++ok;
        } else {
            failures << "prior=" << g.prior.to_string() << " empty-decode\n";
            ++failed;
        }
    }
    std::cout << "sampled=" << generated.size() << " decoded=" << ok << " failures=" << failed
              << "\n";
    return kExitOk;
}

int cmd_eval(const std::string& in_path, const std::string& train_set_path,
             const std::string& report_path, const std::string& svg_path, bool lenient,
             uint64_t seed) {
    const auto records = dataset::read_smiles_file(in_path);
    const auto parsed = dataset::parse_dataset(records, lenient);
    if (parsed.molecules.empty())
        throw dataset::DatasetError("no valid molecules in " + in_path, 0);

    const engine::MetricsReport m = engine::metrics(parsed.molecules, seed);

    json report;
    report["n_molecules"] = parsed.molecules.size();
    report["n_bad_lines"] = parsed.bad_lines.size();
    report["sr"] = m.sr;
    report["uf"] = m.uf;
    report["df"] = m.df;

    if (!train_set_path.empty()) {
        const auto train_records = dataset::read_smiles_file(train_set_path);
        const auto train = dataset::parse_dataset(train_records, /*lenient=*/true);
        std::vector<mol::Fingerprint> train_fps;
        for (const auto& g : train.molecules) train_fps.push_back(mol::path_fingerprint(g));
        double novelty_sum = 0.0;
        for (const auto& g : parsed.molecules) {
            const mol::Fingerprint fp = mol::path_fingerprint(g);
            double max_sim = 0.0;
            for (const auto& ref : train_fps) max_sim = std::max(max_sim, mol::tanimoto(fp, ref));
            novelty_sum += 1.0 - max_sim;
        }
        report["mean_novelty"] = novelty_sum / static_cast<double>(parsed.molecules.size());
    }
    write_text(report_path, report.dump(1) + "\n");

    if (!svg_path.empty()) {
        write_text(svg_path,
                   cli::metrics_bar_svg({{"SR", m.sr}, {"UF", m.uf}, {"DF", m.df}}));
    }
    std::cout << "sr=" << m.sr << " uf=" << m.uf << " df=" << m.df << "\n";
    return kExitOk;
}

int cmd_scaling(const std::string& config_path, const std::string& qubits_arg,
                const std::string& out_path) {
    std::vector<int> counts;
    {
        std::string token;
        std::istringstream list(qubits_arg);
        while (std::getline(list, token, ',')) {
            const std::string t = cli::strip(token);
            if (t.empty()) continue;
            try {
                counts.push_back(std::stoi(t));
            } catch (const std::exception&) {
                throw engine::ConfigError("qubits", "qubits: cannot parse '" + t + "'");
            }
        }
    }
    if (counts.empty()) throw engine::ConfigError("qubits", "qubit list is empty");

    cli::RunConfig rc = cli::parse_run_config(config_path);
    rc.training.n_threads = env_threads();

    const auto rows = engine::qubit_scaling_experiment(rc.training, counts);
    write_text(out_path, engine::scaling_csv(rows));

    // Line chart plus a wall-time sidecar.
    std::vector<std::pair<int, double>> points;
    json report;
    json timing = json::array();
    for (const auto& row : rows) {
        points.push_back({row.n_qubits, row.sr});
        timing.push_back({{"n_qubits", row.n_qubits}, {"seconds", row.seconds}});
    }
    fs::path svg_path(out_path);
    svg_path.replace_extension(".svg");
    write_text(svg_path, cli::scaling_line_svg(points, "SR"));
    report["timing"] = timing;
    report["note"] = "qubit count vs success rate trend is reported for inspection only";
    fs::path report_path(out_path);
    report_path.replace_extension(".report.json");
    write_text(report_path, report.dump(1) + "\n");
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"qdgen: quantum-prior molecular generation pipeline"};
    app.require_subcommand(1);

    // augment
    auto* augment = app.add_subcommand("augment", "Expand a seed set by SELFIES point mutations");
    std::string aug_in, aug_out;
    int per_seed = 100, max_attempts = 500;
    uint64_t aug_seed = 0;
    bool aug_local_filter = false;
    augment->add_option("--in", aug_in, "seed SMILES file")->required();
    augment->add_option("--out", aug_out, "output SMILES file")->required();
    augment->add_option("--per-seed", per_seed, "mutants to keep per seed");
    augment->add_option("--max-attempts", max_attempts, "mutation attempts per seed");
    augment->add_option("--seed", aug_seed, "random seed");
    augment->add_flag("--local-filter", aug_local_filter, "keep only molecules passing the local filter");

    // train
    auto* train = app.add_subcommand("train", "Run the hybrid training loop");
    std::string train_config, train_out;
    train->add_option("--config", train_config, "run configuration file")->required();
    train->add_option("--out", train_out, "output directory (overrides out_dir)");

    // sample
    auto* sample = app.add_subcommand("sample", "Sample molecules from a checkpoint");
    std::string sample_ckpt, sample_out;
    int sample_count = 1000;
    double sample_temp = -1.0;
    uint64_t sample_seed = 0;
    sample->add_option("--checkpoint", sample_ckpt, "checkpoint JSON")->required();
    sample->add_option("--count", sample_count, "molecules to sample");
    sample->add_option("--temperature", sample_temp, "sampling temperature (default: checkpoint)");
    sample->add_option("--out", sample_out, "output SMILES file")->required();
    sample->add_option("--seed", sample_seed, "random seed");

    // eval
    auto* eval = app.add_subcommand("eval", "Compute SR/UF/DF metrics for a molecule file");
    std::string eval_in, eval_train, eval_report, eval_svg;
    bool eval_lenient = false;
    uint64_t eval_seed = 0;
    eval->add_option("--in", eval_in, "molecule SMILES file")->required();
    eval->add_option("--train-set", eval_train, "training set for novelty statistics");
    eval->add_option("--report", eval_report, "output report JSON")->required();
    eval->add_option("--svg", eval_svg, "optional metrics bar chart");
    eval->add_flag("--lenient", eval_lenient, "skip unparseable lines instead of failing");
    eval->add_option("--seed", eval_seed, "random seed for pair sampling");

    // scaling
    auto* scaling = app.add_subcommand("scaling", "Qubit-count scaling study");
    std::string scaling_config, scaling_qubits, scaling_out;
    scaling->add_option("--config", scaling_config, "base run configuration")->required();
    scaling->add_option("--qubits", scaling_qubits, "comma-separated qubit counts")->required();
    scaling->add_option("--out", scaling_out, "output CSV table")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (augment->parsed())
            return cmd_augment(aug_in, aug_out, per_seed, max_attempts, aug_seed, aug_local_filter);
        if (train->parsed()) return cmd_train(train_config, train_out);
        if (sample->parsed())
            return cmd_sample(sample_ckpt, sample_count, sample_temp, sample_out, sample_seed);
        if (eval->parsed())
            return cmd_eval(eval_in, eval_train, eval_report, eval_svg, eval_lenient, eval_seed);
        if (scaling->parsed()) return cmd_scaling(scaling_config, scaling_qubits, scaling_out);
    } catch (const engine::ConfigError& e) {
        std::cerr << "config error (" << e.field() << "): " << e.what() << "\n";
        return kExitConfig;
    } catch (const reward::RewardError& e) {
        std::cerr << "scorer error: " << e.what() << "\n";
        return kExitScorer;
    } catch (const engine::CheckpointError& e) {
        std::cerr << "checkpoint error: " << e.what() << "\n";
        return kExitCheckpoint;
    } catch (const mol::SmilesError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kExitInput;
    } catch (const selfies::SelfiesError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kExitInput;
    } catch (const dataset::DatasetError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitInput;
    } catch (const engine::DatasetTooSmall& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kExitOk;
}
