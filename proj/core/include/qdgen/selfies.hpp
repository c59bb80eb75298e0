// SELFIES grammar: tokenization, valence-constrained decoding, encoding from
// graphs, single-edit mutation and STONED-style dataset expansion.
//
// The derivation rules follow SELFIES v2 semantics (index-token lengths,
// state-dependent bond demotion, ring distances counted over realization
// order) restricted to the element whitelist, with two dialect extensions:
// aromatic atom tokens ([c], [n], ...) carry syntactic aromaticity so that
// aromatic graphs round-trip without kekulization, and a '-' prefix forces a
// single bond between two aromatic atoms.
#pragma once

#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qdgen/molgraph.hpp"
#include "qdgen/rng.hpp"

namespace qdgen::selfies {

enum class TokenKind { Atom, Branch, Ring };

// Bond request carried by a token: Default resolves to aromatic between two
// aromatic atoms and single otherwise; Single ('-') is the explicit override.
enum class BondPrefix { Default, Single, Double, Triple };

struct SelfiesToken {
    TokenKind kind = TokenKind::Atom;
    BondPrefix prefix = BondPrefix::Default;
    // Atom payload.
    mol::Element element = mol::Element::C;
    bool aromatic = false;
    int charge = 0;
    std::optional<int> explicit_h;
    // Branch/Ring payload: how many index tokens follow.
    int level = 1;

    std::string text;  // original spelling; token identity

    bool operator==(const SelfiesToken& other) const { return text == other.text; }
};

struct TokenSequence {
    std::vector<SelfiesToken> tokens;

    size_t size() const { return tokens.size(); }
    bool empty() const { return tokens.empty(); }
    std::string text() const;
};

enum class SelfiesErrorKind { MalformedToken, EmptyGraph, DisconnectedGraph };

class SelfiesError : public std::runtime_error {
public:
    SelfiesError(SelfiesErrorKind kind, size_t offset, const std::string& what)
        : std::runtime_error(what), kind_(kind), offset_(offset) {}
    SelfiesErrorKind kind() const { return kind_; }
    size_t offset() const { return offset_; }

private:
    SelfiesErrorKind kind_;
    size_t offset_;
};

// Token ids for the sequence model. PAD/START/END are reserved; generation
// tokens are dense from 3.
class Alphabet {
public:
    static constexpr int kPad = 0;
    static constexpr int kStart = 1;
    static constexpr int kEnd = 2;

    // The fixed baseline vocabulary for drug-like chemistry.
    static Alphabet baseline();
    // Baseline plus every token observed in the corpus.
    static Alphabet from_corpus(std::span<const TokenSequence> corpus);
    // Rebuild from serialized token texts (checkpoint reload).
    static Alphabet from_token_texts(std::span<const std::string> texts);

    int vocab_size() const { return static_cast<int>(tokens_.size()) + 3; }
    int generation_token_count() const { return static_cast<int>(tokens_.size()); }
    // id must be >= 3; reserved ids have no token.
    const SelfiesToken& token(int id) const;
    // -1 if unknown.
    int id_of(const std::string& text) const;
    std::vector<std::string> token_texts() const;

private:
    void add(const SelfiesToken& t);
    std::vector<SelfiesToken> tokens_;
};

// Lossless: concatenating token texts reproduces the input. Throws
// SelfiesError(MalformedToken) with the byte offset of the bad token.
TokenSequence tokenize(std::string_view text);

// Total on well-formed tokens: any sequence yields a valence-valid graph, or
// nullopt when no atom token is realizable.
std::optional<mol::MolecularGraph> decode(const TokenSequence& tokens);

// Inverse of decode for single-component graphs; traversal follows the
// graph's stored atom order, so differently-ordered copies of one molecule
// encode to different sequences.
TokenSequence encode(const mol::MolecularGraph& graph);

// Exactly one token edit: delete / replace / insert chosen uniformly, uniform
// position, tokens drawn uniformly from the alphabet. Never returns an empty
// sequence: delete on a length-1 input re-rolls to replace.
TokenSequence mutate(const TokenSequence& tokens, Rng& rng, const Alphabet& alphabet);

// Randomized-order write -> encode -> k point mutations (k uniform in 1..3)
// -> decode, keeping unique filter-passing mutants, up to max_attempts tries.
// attempts_used, when given, receives the number of attempts consumed.
std::vector<mol::MolecularGraph> stoned_expand(
    const mol::MolecularGraph& seed, int n_target, int max_attempts,
    const std::function<bool(const mol::MolecularGraph&)>& filter, const Alphabet& alphabet,
    Rng& rng, int* attempts_used = nullptr);

}  // namespace qdgen::selfies
