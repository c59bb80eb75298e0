// Molecular graphs: atoms, bonds, SMILES parsing/writing, canonical keys and
// 2D descriptors. Graphs are immutable once built; all free functions are
// pure and thread-safe.
#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace qdgen::mol {

enum class Element : uint8_t { B, C, N, O, P, S, F, Cl, Br, I };

std::string_view symbol(Element e);
std::optional<Element> element_from_symbol(std::string_view s);
bool element_supports_aromatic(Element e);

// IUPAC 2021 standard atomic weights, 3 decimals, compiled in so that
// molecular weights are bit-stable across runs.
double atomic_mass(Element e);
double hydrogen_mass();

// Allowed valences per element (e.g. N -> {3,5}); charge shifts the list.
std::span<const int> default_valences(Element e);
int max_valence(Element e, int formal_charge);

// Maximum bond-order sum (in half-bond units) tolerated on an aromatic atom;
// covers fused-ring junctions (c: 4.5) and furan/thiophene heteroatoms.
int aromatic_max_halves(Element e);

// Hydrogens the organic-subset rule would assign for a given bond-order sum:
// smallest charge-adjusted valence that fits (lowest only for aromatic
// atoms), zero when none does.
int implicit_hydrogens_for(Element e, bool aromatic, int formal_charge, int bond_halves);

enum class BondOrder : uint8_t { Single, Double, Triple, Aromatic };

// Bond orders are accounted in half-units (single=2, aromatic=3, double=4,
// triple=6) so valence sums stay in integer arithmetic.
int halves(BondOrder order);

struct Atom {
    Element element = Element::C;
    bool aromatic = false;
    int formal_charge = 0;
    std::optional<int> explicit_h;  // nullopt: hydrogens implied by valence
};

struct Bond {
    int a = 0;
    int b = 0;
    BondOrder order = BondOrder::Single;
};

struct Descriptors {
    double molecular_weight = 0.0;
    int heavy_atom_count = 0;
    int ring_count = 0;
    int max_ring_size = 0;
    int rotatable_bond_count = 0;
    int heteroatom_count = 0;
    double aromatic_atom_fraction = 0.0;
    bool has_charged_atom = false;
};

enum class SmilesErrorKind {
    UnbalancedBranch,
    UnclosedRing,
    UnknownElement,
    ValenceViolation,
    Syntax,
};

class SmilesError : public std::runtime_error {
public:
    SmilesError(SmilesErrorKind kind, size_t position, const std::string& what)
        : std::runtime_error(what), kind_(kind), position_(position) {}
    SmilesErrorKind kind() const { return kind_; }
    size_t position() const { return position_; }

private:
    SmilesErrorKind kind_;
    size_t position_;
};

class MolecularGraph {
public:
    int add_atom(const Atom& atom);
    // Rejects self-loops and duplicate atom pairs.
    void add_bond(int a, int b, BondOrder order);

    int atom_count() const { return static_cast<int>(atoms_.size()); }
    int bond_count() const { return static_cast<int>(bonds_.size()); }
    bool empty() const { return atoms_.empty(); }
    const Atom& atom(int i) const { return atoms_[static_cast<size_t>(i)]; }
    const std::vector<Bond>& bonds() const { return bonds_; }

    struct Neighbor {
        int atom = 0;
        BondOrder order = BondOrder::Single;
        int bond_index = 0;
    };
    const std::vector<Neighbor>& neighbors(int i) const { return adj_[static_cast<size_t>(i)]; }
    int degree(int i) const { return static_cast<int>(adj_[static_cast<size_t>(i)].size()); }
    bool has_bond(int a, int b) const;

    // Sum of bond-order halves incident to atom i (no hydrogens).
    int bond_halves_sum(int i) const;
    // Hydrogens on atom i: the explicit count if set, otherwise derived from
    // the smallest charge-adjusted valence that fits the bond-order sum.
    int hydrogen_count(int i) const;
    int total_h_halves(int i) const { return bond_halves_sum(i) + 2 * hydrogen_count(i); }

    // True when atom i satisfies its (charge-adjusted, aromatic-aware)
    // valence bound.
    bool valence_ok(int i) const;
    int connected_components() const;

private:
    std::vector<Atom> atoms_;
    std::vector<Bond> bonds_;
    std::vector<std::vector<Neighbor>> adj_;
};

// Grammar: organic-subset atoms, aromatic lowercase, bracket atoms with
// charge and H-count, branches, ring closures (digits and %nn), bond symbols
// - = # :. Stereo markers (/ \ @) are accepted and discarded. Dots (multi
// fragment) are rejected. Throws SmilesError with the offending byte offset.
MolecularGraph parse_smiles(std::string_view text);

// Writes the graph in canonical order; output reparses to the same
// canonical_key. Throws SmilesError(Syntax) on an empty graph.
std::string write_smiles(const MolecularGraph& graph);
// Writes with a caller-supplied atom priority (a permutation of 0..n-1);
// lower rank = visited earlier. Used for randomized-order SMILES.
std::string write_smiles(const MolecularGraph& graph, std::span<const int> priority);

// Label invariant under atom renumbering: Morgan-style iterative refinement
// with tie-breaking, then a canonical traversal. Returned string doubles as
// the canonical SMILES.
std::string canonical_key(const MolecularGraph& graph);

Descriptors descriptors(const MolecularGraph& graph);

// Bond index -> size of the smallest ring containing it, 0 for acyclic
// bonds. Shared by descriptors and the filter rules.
std::vector<int> smallest_ring_sizes(const MolecularGraph& graph);

}  // namespace qdgen::mol
