#include "doctest.h"

#include <set>

#include "qdgen/molgraph.hpp"
#include "qdgen/rng.hpp"
#include "qdgen/selfies.hpp"

using namespace qdgen;
using namespace qdgen::selfies;
using qdgen::mol::MolecularGraph;
using qdgen::mol::canonical_key;
using qdgen::mol::parse_smiles;

namespace {

// Token-level Levenshtein distance, the independent oracle for the
// single-edit mutation contract.
int levenshtein(const TokenSequence& a, const TokenSequence& b) {
    const size_t n = a.size(), m = b.size();
    std::vector<int> prev(m + 1), cur(m + 1);
    for (size_t j = 0; j <= m; ++j) prev[j] = static_cast<int>(j);
    for (size_t i = 1; i <= n; ++i) {
        cur[0] = static_cast<int>(i);
        for (size_t j = 1; j <= m; ++j) {
            const int sub = prev[j - 1] + (a.tokens[i - 1] == b.tokens[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

}  // namespace

TEST_CASE("tokenize: atom tokens and losslessness") {
    TokenSequence seq = tokenize("[C][C]");
    REQUIRE(seq.size() == 2);
    CHECK(seq.tokens[0].kind == TokenKind::Atom);
    CHECK(seq.tokens[1].kind == TokenKind::Atom);
    CHECK(seq.text() == "[C][C]");

    CHECK(tokenize("").empty());

    const char* inputs[] = {"[C][=C][Branch1][Ring2][N+1][O-1][nH1][-c][#Branch2]"};
    for (const char* s : inputs) CHECK(tokenize(s).text() == s);
}

TEST_CASE("tokenize: malformed tokens carry byte offsets") {
    try {
        tokenize("[C][X]");
        FAIL("expected MalformedToken");
    } catch (const SelfiesError& e) {
        CHECK(e.kind() == SelfiesErrorKind::MalformedToken);
        CHECK(e.offset() == 3);
    }
    CHECK_THROWS_AS(tokenize("[C]extra"), SelfiesError);
    CHECK_THROWS_AS(tokenize("[C][C"), SelfiesError);
    CHECK_THROWS_AS(tokenize("[]"), SelfiesError);
    CHECK_THROWS_AS(tokenize("[C][N+3]"), SelfiesError);
}

TEST_CASE("decode: ethane") {
    auto g = decode(tokenize("[C][C]"));
    REQUIRE(g.has_value());
    CHECK(canonical_key(*g) == canonical_key(parse_smiles("CC")));
}

TEST_CASE("decode: fluorine pair exhausts both valences") {
    auto g = decode(tokenize("[F][F]"));
    REQUIRE(g.has_value());
    REQUIRE(g->atom_count() == 2);
    CHECK(g->bond_count() == 1);
    CHECK(g->bonds()[0].order == mol::BondOrder::Single);
    // A third fluorine is unrealizable and is ignored.
    auto g3 = decode(tokenize("[F][F][F]"));
    REQUIRE(g3.has_value());
    CHECK(g3->atom_count() == 2);
}

TEST_CASE("decode: cumulated double bonds fit carbon valence") {
    // Middle atom ends at exactly four bonds; derivation keeps both doubles.
    auto g = decode(tokenize("[C][=C][=C]"));
    REQUIRE(g.has_value());
    CHECK(canonical_key(*g) == canonical_key(parse_smiles("C=C=C")));
    for (int i = 0; i < g->atom_count(); ++i) CHECK(g->valence_ok(i));

    // Requesting a triple on a saturated neighbor demotes it.
    auto h = decode(tokenize("[O][#C]"));
    REQUIRE(h.has_value());
    CHECK(canonical_key(*h) == canonical_key(parse_smiles("O=C")));
}

TEST_CASE("decode: benzene via ring token") {
    auto g = decode(tokenize("[C][=C][C][=C][C][=C][Ring1][=Branch1]"));
    REQUIRE(g.has_value());
    CHECK(canonical_key(*g) == canonical_key(parse_smiles("C1=CC=CC=C1")));
}

TEST_CASE("decode: branch with reserve keeps the chain alive") {
    auto g = decode(tokenize("[C][Branch1][C][O][N]"));
    REQUIRE(g.has_value());
    CHECK(canonical_key(*g) == canonical_key(parse_smiles("C(O)N")));
}

TEST_CASE("decode: no realizable atom yields empty result") {
    CHECK_FALSE(decode(tokenize("")).has_value());
    CHECK_FALSE(decode(tokenize("[Ring1][C]")).has_value());
    CHECK_FALSE(decode(tokenize("[Branch1]")).has_value());
}

TEST_CASE("encode: ethane and round trips") {
    CHECK(encode(parse_smiles("CC")).text() == "[C][C]");

    const char* molecules[] = {
        "CC",     "CCO",          "C=C=C",  "c1ccccc1",     "C1=CC=CC=C1",
        "C#N",    "CC(=O)O",      "C1CCNCC1", "c1cc[nH]c1", "c1ccoc1",
        "CS(=O)(=O)N", "C[N+](C)(C)C", "c1ccc2ccccc2c1", "ClC(Br)I",
        "CC(C)Cc1ccc(cc1)C(C)C(=O)O", "c1ccccc1-c1ccccc1", "[O-]S(=O)(=O)c1ccccc1",
        "CC12CCC(C1)C2", "FC(F)(F)c1ccc(N)cc1",
    };
    for (const char* smi : molecules) {
        CAPTURE(smi);
        MolecularGraph g = parse_smiles(smi);
        auto back = decode(encode(g));
        REQUIRE(back.has_value());
        CHECK(canonical_key(*back) == canonical_key(g));
    }
}

TEST_CASE("encode: errors") {
    CHECK_THROWS_AS(encode(MolecularGraph{}), SelfiesError);
    MolecularGraph two;
    two.add_atom({});
    two.add_atom({});
    try {
        encode(two);
        FAIL("expected DisconnectedGraph");
    } catch (const SelfiesError& e) {
        CHECK(e.kind() == SelfiesErrorKind::DisconnectedGraph);
    }
}

TEST_CASE("decode robustness: 10000 random sequences never violate valence") {
    Alphabet alphabet = Alphabet::baseline();
    Rng rng(1234);
    int decoded = 0;
    for (int trial = 0; trial < 10000; ++trial) {
        const size_t len = 1 + rng.uniform_index(30);
        TokenSequence seq;
        for (size_t k = 0; k < len; ++k)
            seq.tokens.push_back(
                alphabet.token(3 + static_cast<int>(rng.uniform_index(
                                       static_cast<size_t>(alphabet.generation_token_count())))));
        auto g = decode(seq);
        if (!g) continue;
        ++decoded;
        for (int i = 0; i < g->atom_count(); ++i) {
            if (!g->valence_ok(i)) {
                CAPTURE(seq.text());
                REQUIRE(g->valence_ok(i));
            }
        }
        CHECK(g->connected_components() == 1);
    }
    // Atom tokens dominate the alphabet, so nearly everything decodes.
    CHECK(decoded > 9000);
}

TEST_CASE("mutate: single edit contract") {
    Alphabet alphabet = Alphabet::baseline();
    TokenSequence base = tokenize("[C][C][O][N][=O]");
    Rng rng(2024);
    for (int trial = 0; trial < 300; ++trial) {
        TokenSequence mutated = mutate(base, rng, alphabet);
        const int dist = levenshtein(base, mutated);
        CHECK(dist <= 1);
        const auto diff = static_cast<long>(mutated.size()) - static_cast<long>(base.size());
        CHECK(diff >= -1);
        CHECK(diff <= 1);
        CHECK(!mutated.empty());
    }
}

TEST_CASE("mutate: replace keeps length, length-1 never empties") {
    Alphabet alphabet = Alphabet::baseline();
    TokenSequence pair = tokenize("[C][C]");
    Rng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        TokenSequence m = mutate(pair, rng, alphabet);
        CHECK(m.size() >= 1);
        CHECK(m.size() <= 3);
    }
    TokenSequence single = tokenize("[C]");
    for (int trial = 0; trial < 100; ++trial) {
        TokenSequence m = mutate(single, rng, alphabet);
        CHECK(m.size() >= 1);
        CHECK(m.size() <= 2);
    }
}

TEST_CASE("mutate: deterministic under a fixed seed") {
    Alphabet alphabet = Alphabet::baseline();
    TokenSequence base = tokenize("[C][C][O]");
    Rng a(42), b(42);
    CHECK(mutate(base, a, alphabet).text() == mutate(base, b, alphabet).text());
}

TEST_CASE("stoned_expand: unique filtered mutants from an ethanol seed") {
    Alphabet alphabet = Alphabet::baseline();
    MolecularGraph seed = parse_smiles("CCO");
    Rng rng(7);
    auto always = [](const MolecularGraph&) { return true; };
    auto mutants = stoned_expand(seed, 10, 500, always, alphabet, rng);
    CHECK(mutants.size() == 10);
    std::set<std::string> keys;
    for (const auto& m : mutants) {
        keys.insert(canonical_key(m));
        for (int i = 0; i < m.atom_count(); ++i) CHECK(m.valence_ok(i));
    }
    CHECK(keys.size() == mutants.size());
}

TEST_CASE("stoned_expand: trivial contracts") {
    Alphabet alphabet = Alphabet::baseline();
    MolecularGraph seed = parse_smiles("CCO");
    Rng rng(1);
    auto always = [](const MolecularGraph&) { return true; };
    CHECK(stoned_expand(seed, 0, 500, always, alphabet, rng).empty());
    auto never = [](const MolecularGraph&) { return false; };
    CHECK(stoned_expand(seed, 5, 100, never, alphabet, rng).empty());
}

TEST_CASE("alphabet: reserved ids and corpus construction") {
    Alphabet base = Alphabet::baseline();
    CHECK(Alphabet::kPad == 0);
    CHECK(Alphabet::kStart == 1);
    CHECK(Alphabet::kEnd == 2);
    CHECK(base.vocab_size() == base.generation_token_count() + 3);
    CHECK(base.id_of("[C]") == 3);
    CHECK(base.id_of("[missing]") == -1);

    std::vector<TokenSequence> corpus = {tokenize("[C][Br]"), tokenize("[c][c][I]")};
    Alphabet grown = Alphabet::from_corpus(corpus);
    CHECK(grown.id_of("[I]") >= 3);
    CHECK(grown.id_of("[c]") >= 3);
    CHECK(grown.vocab_size() > base.vocab_size());

    // Serialization round trip preserves ids.
    Alphabet reloaded = Alphabet::from_token_texts(grown.token_texts());
    CHECK(reloaded.vocab_size() == grown.vocab_size());
    CHECK(reloaded.id_of("[I]") == grown.id_of("[I]"));
}
