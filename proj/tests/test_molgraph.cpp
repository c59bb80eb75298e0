#include "doctest.h"

#include <algorithm>
#include <numeric>
#include <set>

#include "qdgen/fingerprint.hpp"
#include "qdgen/molgraph.hpp"
#include "qdgen/rng.hpp"

using namespace qdgen;
using namespace qdgen::mol;

namespace {

std::vector<int> random_permutation(int n, Rng& rng) {
    std::vector<int> p(static_cast<size_t>(n));
    std::iota(p.begin(), p.end(), 0);
    for (int i = n - 1; i > 0; --i) {
        const size_t j = rng.uniform_index(static_cast<size_t>(i) + 1);
        std::swap(p[static_cast<size_t>(i)], p[j]);
    }
    return p;
}

// Rebuilds the graph with atoms relabeled by perm (new index = perm[old]).
MolecularGraph relabel(const MolecularGraph& g, const std::vector<int>& perm) {
    MolecularGraph out;
    std::vector<int> inverse(perm.size());
    for (size_t i = 0; i < perm.size(); ++i) inverse[static_cast<size_t>(perm[i])] = static_cast<int>(i);
    for (size_t i = 0; i < perm.size(); ++i) out.add_atom(g.atom(inverse[i]));
    for (const Bond& b : g.bonds())
        out.add_bond(perm[static_cast<size_t>(b.a)], perm[static_cast<size_t>(b.b)], b.order);
    return out;
}

}  // namespace

TEST_CASE("parse_smiles: single carbon has four implicit hydrogens") {
    MolecularGraph g = parse_smiles("C");
    REQUIRE(g.atom_count() == 1);
    CHECK(g.atom(0).element == Element::C);
    CHECK(g.hydrogen_count(0) == 4);
    CHECK(g.bond_count() == 0);
}

TEST_CASE("parse_smiles: unbalanced branch reports position") {
    try {
        parse_smiles("C(");
        FAIL("expected UnbalancedBranch");
    } catch (const SmilesError& e) {
        CHECK(e.kind() == SmilesErrorKind::UnbalancedBranch);
        CHECK(e.position() == 1);
    }
}

TEST_CASE("parse_smiles: benzene is six aromatic carbons with one H each") {
    MolecularGraph g = parse_smiles("c1ccccc1");
    REQUIRE(g.atom_count() == 6);
    for (int i = 0; i < 6; ++i) {
        CHECK(g.atom(i).aromatic);
        CHECK(g.atom(i).element == Element::C);
        CHECK(g.hydrogen_count(i) == 1);
    }
    Descriptors d = descriptors(g);
    CHECK(d.ring_count == 1);
    CHECK(d.max_ring_size == 6);
    CHECK(d.aromatic_atom_fraction == doctest::Approx(1.0));
}

TEST_CASE("parse_smiles: error taxonomy") {
    CHECK_THROWS_AS(parse_smiles("C1CC"), SmilesError);  // unclosed ring
    try {
        parse_smiles("C1CC");
    } catch (const SmilesError& e) {
        CHECK(e.kind() == SmilesErrorKind::UnclosedRing);
    }
    try {
        parse_smiles("CX");
    } catch (const SmilesError& e) {
        CHECK(e.kind() == SmilesErrorKind::UnknownElement);
        CHECK(e.position() == 1);
    }
    try {
        parse_smiles("C(C)(C)(C)(C)C");
    } catch (const SmilesError& e) {
        CHECK(e.kind() == SmilesErrorKind::ValenceViolation);
    }
    try {
        parse_smiles("F=C");
    } catch (const SmilesError& e) {
        CHECK(e.kind() == SmilesErrorKind::ValenceViolation);
        CHECK(e.position() == 0);
    }
    CHECK_THROWS_AS(parse_smiles("CC.CC"), SmilesError);   // dots rejected
    CHECK_THROWS_AS(parse_smiles("[N+3]C"), SmilesError);  // charge out of range
    CHECK_THROWS_AS(parse_smiles(""), SmilesError);
    CHECK_THROWS_AS(parse_smiles(")C"), SmilesError);
}

TEST_CASE("parse_smiles: brackets, charges, stereo discarded") {
    MolecularGraph g = parse_smiles("[NH4+]");
    REQUIRE(g.atom_count() == 1);
    CHECK(g.atom(0).formal_charge == 1);
    CHECK(g.hydrogen_count(0) == 4);
    CHECK(g.valence_ok(0));

    // Stereo markers parse and vanish.
    MolecularGraph h = parse_smiles("F/C=C/F");
    CHECK(h.atom_count() == 4);
    MolecularGraph h2 = parse_smiles("FC=CF");
    CHECK(canonical_key(h) == canonical_key(h2));

    MolecularGraph chiral = parse_smiles("N[C@@H](C)C(=O)O");
    MolecularGraph plain = parse_smiles("N[CH](C)C(=O)O");
    CHECK(canonical_key(chiral) == canonical_key(plain));
}

TEST_CASE("parse_smiles: organic-subset multivalent sulfur and nitrogen") {
    MolecularGraph sulfone = parse_smiles("CS(=O)(=O)C");
    CHECK(sulfone.hydrogen_count(1) == 0);
    MolecularGraph nitro = parse_smiles("C[N+](=O)[O-]");
    CHECK(nitro.atom(1).formal_charge == 1);
    CHECK(nitro.valence_ok(1));
    // Pyridine nitrogen carries no H, pyrrole requires [nH].
    MolecularGraph pyridine = parse_smiles("c1ccncc1");
    int n_idx = -1;
    for (int i = 0; i < pyridine.atom_count(); ++i)
        if (pyridine.atom(i).element == Element::N) n_idx = i;
    CHECK(pyridine.hydrogen_count(n_idx) == 0);
    MolecularGraph pyrrole = parse_smiles("c1cc[nH]c1");
    CHECK(pyrrole.atom_count() == 5);
}

TEST_CASE("write_smiles: methane canonical form") {
    MolecularGraph g = parse_smiles("C");
    CHECK(write_smiles(g) == "C");
}

TEST_CASE("write_smiles: two atom orders give the same canonical key") {
    MolecularGraph ethanol = parse_smiles("CCO");
    const std::vector<int> order_a = {0, 1, 2};
    const std::vector<int> order_b = {2, 1, 0};
    const std::string sa = write_smiles(ethanol, order_a);
    const std::string sb = write_smiles(ethanol, order_b);
    CHECK(sa != sb);  // different traversal roots
    CHECK(canonical_key(parse_smiles(sa)) == canonical_key(parse_smiles(sb)));
}

TEST_CASE("write_smiles: empty graph is an error") {
    MolecularGraph g;
    CHECK_THROWS(write_smiles(g));
    CHECK_THROWS(canonical_key(g));
}

TEST_CASE("canonical_key: same molecule, different spellings") {
    CHECK(canonical_key(parse_smiles("CCO")) == canonical_key(parse_smiles("OCC")));
    CHECK(canonical_key(parse_smiles("CCO")) != canonical_key(parse_smiles("CCN")));
    CHECK(canonical_key(parse_smiles("c1ccccc1")) == canonical_key(parse_smiles("c1ccccc1")));
    CHECK(canonical_key(parse_smiles("C1=CC=CC=C1")) != canonical_key(parse_smiles("c1ccccc1")));
}

TEST_CASE("canonical_key: invariant under 100 random atom relabelings") {
    MolecularGraph g = parse_smiles("CCOc1ccc(F)cc1NC");  // 12 heavy atoms
    REQUIRE(g.atom_count() == 12);
    const std::string key = canonical_key(g);
    Rng rng(20240811);
    std::set<std::string> keys{key};
    for (int trial = 0; trial < 100; ++trial) {
        const std::vector<int> perm = random_permutation(g.atom_count(), rng);
        keys.insert(canonical_key(relabel(g, perm)));
        // Randomized writing round-trips to the same key too.
        keys.insert(canonical_key(parse_smiles(write_smiles(g, perm))));
    }
    CHECK(keys.size() == 1);
}

TEST_CASE("canonical_key: highly symmetric molecules stay stable") {
    for (const char* smi : {"c1ccccc1", "C1CCCCC1", "C1CC2CCC1CC2", "CC(C)(C)C"}) {
        MolecularGraph g = parse_smiles(smi);
        const std::string key = canonical_key(g);
        Rng rng(7);
        for (int trial = 0; trial < 25; ++trial) {
            const std::vector<int> perm = random_permutation(g.atom_count(), rng);
            CHECK(canonical_key(relabel(g, perm)) == key);
        }
    }
}

TEST_CASE("round trip: parse -> canonical write -> parse preserves the key") {
    const char* molecules[] = {
        "CCO", "c1ccccc1", "CC(=O)Oc1ccccc1C(=O)O", "C1CCNCC1",
        "CC(C)Cc1ccc(cc1)C(C)C(=O)O", "c1ccc2ccccc2c1", "C[N+](C)(C)C",
        "O=S(=O)(N)c1ccccc1", "FC(F)(F)c1ccccc1", "C#N", "CC#CC",
        "c1cc[nH]c1", "c1ccoc1", "c1ccsc1", "CNC(=O)N", "ClCBr",
        "[O-]C(=O)C", "C1CC1C2CC2", "CC12CCC(C1)C2",
    };
    for (const char* smi : molecules) {
        CAPTURE(smi);
        MolecularGraph g = parse_smiles(smi);
        const std::string canon = write_smiles(g);
        MolecularGraph g2 = parse_smiles(canon);
        CHECK(canonical_key(g2) == canonical_key(g));
    }
}

TEST_CASE("valence safety: parsed graphs always satisfy the valence bound") {
    const char* molecules[] = {"CCO", "c1ccccc1", "O=C=O", "C#N", "CS(=O)(=O)O",
                               "c1ccc2ccccc2c1", "C[N+](C)(C)C", "[nH]1cccc1"};
    for (const char* smi : molecules) {
        MolecularGraph g = parse_smiles(smi);
        for (int i = 0; i < g.atom_count(); ++i) {
            CAPTURE(smi);
            CHECK(g.valence_ok(i));
        }
    }
}

TEST_CASE("descriptors: ethanol molecular weight") {
    Descriptors d = descriptors(parse_smiles("CCO"));
    // 2 x 12.011 + 6 x 1.008 + 15.999
    CHECK(d.molecular_weight == doctest::Approx(46.069).epsilon(0.0002));
    CHECK(d.heavy_atom_count == 3);
    CHECK(d.heteroatom_count == 1);
}

TEST_CASE("descriptors: methane") {
    Descriptors d = descriptors(parse_smiles("C"));
    CHECK(d.rotatable_bond_count == 0);
    CHECK(d.ring_count == 0);
    CHECK(d.max_ring_size == 0);
    CHECK_FALSE(d.has_charged_atom);
}

TEST_CASE("descriptors: rotatable bonds need two non-terminal heavy ends") {
    CHECK(descriptors(parse_smiles("CCCC")).rotatable_bond_count == 1);
    CHECK(descriptors(parse_smiles("CCC")).rotatable_bond_count == 0);
    // Syntactic aromaticity: the inter-ring bond must be written explicitly.
    CHECK(descriptors(parse_smiles("c1ccccc1-c1ccccc1")).rotatable_bond_count == 1);
    CHECK(descriptors(parse_smiles("C1CCCCC1")).rotatable_bond_count == 0);
}

TEST_CASE("descriptors: fused rings use smallest-ring sizes") {
    Descriptors d = descriptors(parse_smiles("c1ccc2ccccc2c1"));
    CHECK(d.ring_count == 2);
    CHECK(d.max_ring_size == 6);
}

TEST_CASE("path_fingerprint: determinism and single atom") {
    Fingerprint a = path_fingerprint(parse_smiles("CCO"));
    Fingerprint b = path_fingerprint(parse_smiles("CCO"));
    CHECK(a.blocks() == b.blocks());
    CHECK(path_fingerprint(parse_smiles("C")).n_set() >= 1);
}

TEST_CASE("path_fingerprint: ethane paths are a subset of propane paths") {
    Fingerprint small = path_fingerprint(parse_smiles("CC"));
    Fingerprint big = path_fingerprint(parse_smiles("CCC"));
    for (size_t i = 0; i < small.blocks().size(); ++i)
        CHECK((small.blocks()[i] & ~big.blocks()[i]) == 0);
}

TEST_CASE("tanimoto: identities and hand value") {
    Fingerprint x = path_fingerprint(parse_smiles("CCO"));
    CHECK(tanimoto(x, x) == doctest::Approx(1.0));

    Fingerprint a(64), b(64);
    a.set(1);
    a.set(2);
    a.set(3);
    b.set(2);
    b.set(3);
    b.set(4);
    CHECK(tanimoto(a, b) == doctest::Approx(0.5));

    Fingerprint c(64), d(64);
    c.set(0);
    d.set(5);
    CHECK(tanimoto(c, d) == doctest::Approx(0.0));

    Fingerprint e1(64), e2(64);
    CHECK(tanimoto(e1, e2) == doctest::Approx(1.0));

    Fingerprint wrong(128);
    CHECK_THROWS_AS(tanimoto(a, wrong), WidthMismatch);
}

TEST_CASE("tanimoto: symmetric and bounded on random fingerprints") {
    Rng rng(99);
    for (int trial = 0; trial < 50; ++trial) {
        Fingerprint a(256), b(256);
        for (int k = 0; k < 40; ++k) {
            a.set(static_cast<int>(rng.uniform_index(256)));
            b.set(static_cast<int>(rng.uniform_index(256)));
        }
        const double ab = tanimoto(a, b);
        CHECK(ab == doctest::Approx(tanimoto(b, a)));
        CHECK(ab >= 0.0);
        CHECK(ab <= 1.0);
    }
}
