// Flat key=value run configuration shared by the train and scaling commands.
// Unknown keys are rejected so typos cannot silently fall back to defaults.
#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "qdgen/engine.hpp"

namespace qdgen::cli {

struct RunConfig {
    engine::TrainingConfig training;
    std::string out_dir;
};

inline std::string strip(const std::string& s) {
    size_t a = s.find_first_not_of(" \t");
    size_t b = s.find_last_not_of(" \t\r");
    if (a == std::string::npos) return "";
    return s.substr(a, b - a + 1);
}

inline RunConfig parse_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw engine::ConfigError("config", "cannot read config file: " + path);

    RunConfig rc;
    engine::TrainingConfig& t = rc.training;

    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string text = strip(line);
        if (text.empty() || text[0] == '#') continue;
        const size_t eq = text.find('=');
        if (eq == std::string::npos)
            throw engine::ConfigError("config",
                                      "line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = strip(text.substr(0, eq));
        std::string value = strip(text.substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
            value = value.substr(1, value.size() - 2);

        auto as_int = [&](int& out) { out = std::stoi(value); };
        auto as_u64 = [&](uint64_t& out) { out = std::stoull(value); };
        auto as_double = [&](double& out) { out = std::stod(value); };
        auto as_bool = [&](bool& out) {
            if (value == "true") out = true;
            else if (value == "false") out = false;
            else throw engine::ConfigError(key, key + ": expected true or false");
        };

        try {
            if (key == "dataset") t.dataset_path = value;
            else if (key == "out_dir") rc.out_dir = value;
            else if (key == "n_qubits") as_int(t.n_qubits);
            else if (key == "n_rotation_layers") as_int(t.n_rotation_layers);
            else if (key == "lstm_hidden") as_int(t.lstm_hidden);
            else if (key == "lstm_embed") as_int(t.lstm_embed);
            else if (key == "prior_mode") {
                if (value == "concat") t.prior_mode = neural::PriorMode::Concat;
                else if (value == "add") t.prior_mode = neural::PriorMode::Add;
                else throw engine::ConfigError(key, "prior_mode: expected concat or add");
            } else if (key == "epochs_lstm") as_int(t.epochs_lstm);
            else if (key == "epochs_qcbm") as_int(t.epochs_qcbm);
            else if (key == "priors_per_epoch") as_int(t.priors_per_epoch);
            else if (key == "molecules_per_prior") as_int(t.molecules_per_prior);
            else if (key == "reward_switch_epoch") as_int(t.reward_switch_epoch);
            else if (key == "temperature") as_double(t.temperature);
            else if (key == "master_seed") as_u64(t.master_seed);
            else if (key == "max_len") as_int(t.max_len);
            else if (key == "batch_size") as_int(t.batch_size);
            else if (key == "dropout") as_double(t.dropout);
            else if (key == "lstm_lr") as_double(t.lstm_lr);
            else if (key == "pretrain_uniform_priors") as_bool(t.pretrain_uniform_priors);
            else if (key == "early_stop") as_bool(t.early_stop);
            else if (key == "cobyla_rho_begin") as_double(t.cobyla.rho_begin);
            else if (key == "cobyla_rho_end") as_double(t.cobyla.rho_end);
            else if (key == "cobyla_max_evals") as_int(t.cobyla.max_evals);
            else if (key == "novelty_cache_size") as_int(t.novelty_cache_size);
            else if (key == "scorer_command") {
                std::istringstream words(value);
                std::string word;
                t.scorer_command.clear();
                while (words >> word) t.scorer_command.push_back(word);
            } else {
                throw engine::ConfigError(key, "unknown config key: " + key);
            }
        } catch (const engine::ConfigError&) {
            throw;
        } catch (const std::exception&) {
            throw engine::ConfigError(key, key + ": cannot parse value '" + value + "'");
        }
    }
    return rc;
}

}  // namespace qdgen::cli
