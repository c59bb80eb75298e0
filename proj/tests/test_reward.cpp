#include "doctest.h"

#include <cmath>
#include <cstdlib>
#include <fstream>

#include "qdgen/molgraph.hpp"
#include "qdgen/reward.hpp"

using namespace qdgen;
using namespace qdgen::reward;
using qdgen::mol::parse_smiles;

namespace {

// Writes an executable shell script and returns its path.
std::string write_script(const std::string& name, const std::string& body) {
    const std::string path = std::string("/tmp/qdgen_test_") + name + ".sh";
    {
        std::ofstream out(path);
        out << "#!/bin/sh\n" << body;
    }
    std::string cmd = "chmod +x " + path;
    REQUIRE(std::system(cmd.c_str()) == 0);
    return path;
}

}  // namespace

TEST_CASE("local_filter: benzene fails the weight range") {
    FilterReport r = local_filter(parse_smiles("c1ccccc1"));
    CHECK_FALSE(r.passed);
    bool mw_hit = false;
    for (const auto& v : r.violations) mw_hit |= v.find("mw-range") == 0;
    CHECK(mw_hit);
}

TEST_CASE("local_filter: methane fails size and ring rules") {
    FilterReport r = local_filter(parse_smiles("C"));
    CHECK_FALSE(r.passed);
    bool heavy = false, ring = false;
    for (const auto& v : r.violations) {
        heavy |= v.find("heavy-atoms") == 0;
        ring |= v.find("ring-present") == 0;
    }
    CHECK(heavy);
    CHECK(ring);
    CHECK(r.rules_total == 8);
}

TEST_CASE("local_filter: a mid-weight bicyclic amide passes") {
    // Naphthalene-2-carboxamide with a cyclohexyl nitrogen substituent.
    FilterReport r = local_filter(parse_smiles("O=C(NC1CCCCC1)c1ccc2ccccc2c1"));
    CHECK(r.passed);
    CHECK(r.violations.empty());
    CHECK(r.rules_passed == r.rules_total);
}

TEST_CASE("local_filter: peroxide-like bonds and charges are rejected") {
    FilterReport per = local_filter(parse_smiles("OOc1ccc2ccccc2c1CC(C)C(=O)O"));
    bool hit = false;
    for (const auto& v : per.violations) hit |= v.find("no-peroxide-like") == 0;
    CHECK(hit);

    FilterReport chg = local_filter(parse_smiles("C[N+](C)(C)Cc1ccc2ccccc2c1"));
    bool charge_hit = false;
    for (const auto& v : chg.violations) charge_hit |= v.find("no-charges") == 0;
    CHECK(charge_hit);
}

TEST_CASE("compute_reward: decode failure scores zero") {
    RewardContext ctx;
    CHECK(compute_reward(std::nullopt, ctx) == 0.0);
}

TEST_CASE("compute_reward: benzene fails exactly two rules") {
    RewardContext ctx;
    const double r = compute_reward(parse_smiles("c1ccccc1"), ctx);
    CHECK(r == doctest::Approx(0.1 * 6.0 / 8.0));  // 0.075
}

TEST_CASE("compute_reward: training-set member gets exactly 0.5") {
    const auto passer = parse_smiles("O=C(NC1CCCCC1)c1ccc2ccccc2c1");
    RewardContext ctx;
    ctx.training_fps.push_back(mol::path_fingerprint(passer));
    CHECK(compute_reward(passer, ctx) == doctest::Approx(0.5));
}

TEST_CASE("compute_reward: monotone in rules passed") {
    RewardContext ctx;
    // methane fails more rules than benzene; both stay under any passer.
    const double methane = compute_reward(parse_smiles("C"), ctx);
    const double benzene = compute_reward(parse_smiles("c1ccccc1"), ctx);
    const double passer = compute_reward(parse_smiles("O=C(NC1CCCCC1)c1ccc2ccccc2c1"), ctx);
    CHECK(methane < benzene);
    CHECK(benzene < passer);
    CHECK(passer >= 0.5);
    CHECK(passer <= 1.0);
}

TEST_CASE("external_reward: constant scorer returns one value per molecule") {
    const std::string script = write_script("const", "while read line; do echo 0.5; done\n");
    const std::vector<std::string> mols = {"CC", "CCO", "c1ccccc1"};
    const auto rewards = external_reward({script}, mols);
    REQUIRE(rewards.size() == 3);
    for (double r : rewards) CHECK(r == doctest::Approx(0.5));
}

TEST_CASE("external_reward: count mismatch is detected") {
    const std::string script = write_script("short", "head -n 2 | while read line; do echo 0.1; done\n");
    try {
        external_reward({script}, {"CC", "CCO", "c1ccccc1"});
        FAIL("expected CountMismatch");
    } catch (const RewardError& e) {
        CHECK(e.kind() == RewardErrorKind::CountMismatch);
    }
}

TEST_CASE("external_reward: unparseable output is a ParseFailure") {
    const std::string script = write_script("garbage", "while read line; do echo not-a-number; done\n");
    try {
        external_reward({script}, {"CC"});
        FAIL("expected ParseFailure");
    } catch (const RewardError& e) {
        CHECK(e.kind() == RewardErrorKind::ParseFailure);
    }
}

TEST_CASE("external_reward: nonzero exit is a SpawnFailure") {
    const std::string script = write_script("fail", "cat > /dev/null\nexit 3\n");
    try {
        external_reward({script}, {"CC"});
        FAIL("expected SpawnFailure");
    } catch (const RewardError& e) {
        CHECK(e.kind() == RewardErrorKind::SpawnFailure);
    }
}

TEST_CASE("external_reward: a hanging child times out and is killed") {
    const std::string script = write_script("hang", "sleep 30\n");
    try {
        external_reward({script}, {"CC"}, std::chrono::seconds(1));
        FAIL("expected Timeout");
    } catch (const RewardError& e) {
        CHECK(e.kind() == RewardErrorKind::Timeout);
    }
}

TEST_CASE("external_reward: missing executable is a SpawnFailure") {
    try {
        external_reward({"/nonexistent/scorer"}, {"CC"});
        FAIL("expected SpawnFailure");
    } catch (const RewardError& e) {
        CHECK(e.kind() == RewardErrorKind::SpawnFailure);
    }
}

TEST_CASE("build_target: equal rewards give the uniform distribution") {
    std::vector<std::pair<qsim::BitString, double>> samples;
    for (uint32_t x = 0; x < 4; ++x) samples.push_back({{x, 2}, 0.7});
    const auto t = build_target(samples);
    for (const auto& [bits, p] : t.entries) CHECK(p == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("build_target: softmax of (0, ln 3) is (0.25, 0.75)") {
    std::vector<std::pair<qsim::BitString, double>> samples = {{{0, 1}, 0.0},
                                                               {{1, 1}, std::log(3.0)}};
    const auto t = build_target(samples);
    CHECK(t.entries[0].second == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(t.entries[1].second == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("build_target: single sample, empty batch, normalization, shift invariance") {
    std::vector<std::pair<qsim::BitString, double>> one = {{{3, 2}, 0.42}};
    CHECK(build_target(one).entries[0].second == doctest::Approx(1.0));

    CHECK_THROWS_AS(build_target({}), EmptyBatch);

    std::vector<std::pair<qsim::BitString, double>> samples = {
        {{0, 3}, 0.1}, {{1, 3}, 0.9}, {{5, 3}, 0.4}, {{7, 3}, 0.6}};
    const auto base = build_target(samples);
    double sum = 0.0;
    for (const auto& [bits, p] : base.entries) sum += p;
    CHECK(std::abs(sum - 1.0) <= 1e-9);

    auto shifted = samples;
    for (auto& [bits, r] : shifted) r += 17.5;
    const auto moved = build_target(shifted);
    for (size_t i = 0; i < base.entries.size(); ++i)
        CHECK(std::abs(base.entries[i].second - moved.entries[i].second) <= 1e-12);
}
