#include "qdgen/selfies.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>

namespace qdgen::selfies {

namespace {

using mol::Atom;
using mol::BondOrder;
using mol::Element;
using mol::MolecularGraph;

[[noreturn]] void malformed(size_t offset, const std::string& msg) {
    throw SelfiesError(SelfiesErrorKind::MalformedToken, offset,
                       msg + " (offset " + std::to_string(offset) + ")");
}

// Index-token values for reading branch lengths and ring distances, in the
// published v2 order; unknown tokens count as 0.
int index_value(const SelfiesToken& t) {
    static const std::string_view kOrder[16] = {
        "[C]",        "[Ring1]",    "[Ring2]",    "[Branch1]", "[=Branch1]", "[#Branch1]",
        "[Branch2]",  "[=Branch2]", "[#Branch2]", "[O]",       "[N]",        "[=N]",
        "[=C]",       "[#C]",       "[S]",        "[P]",
    };
    for (int i = 0; i < 16; ++i) {
        if (t.text == kOrder[i]) return i;
    }
    return 0;
}

// Parses the payload between '[' and ']'. base_offset points at '[' in the
// source, for diagnostics.
SelfiesToken parse_payload(std::string_view payload, size_t base_offset) {
    SelfiesToken tok;
    size_t i = 0;
    const size_t n = payload.size();
    if (n == 0) malformed(base_offset, "empty token");

    switch (payload[0]) {
    case '-': tok.prefix = BondPrefix::Single; i = 1; break;
    case '=': tok.prefix = BondPrefix::Double; i = 1; break;
    case '#': tok.prefix = BondPrefix::Triple; i = 1; break;
    default: break;
    }
    if (i >= n) malformed(base_offset, "token has only a bond prefix");

    auto rest = payload.substr(i);
    auto structural = [&](std::string_view name, TokenKind kind) -> bool {
        if (rest.size() == name.size() + 1 && rest.substr(0, name.size()) == name &&
            rest.back() >= '1' && rest.back() <= '3') {
            tok.kind = kind;
            tok.level = rest.back() - '0';
            return true;
        }
        return false;
    };
    if (structural("Branch", TokenKind::Branch) || structural("Ring", TokenKind::Ring)) return tok;

    // Atom token: element symbol (lowercase = aromatic), optional H count,
    // optional charge.
    tok.kind = TokenKind::Atom;
    size_t sym_len = 0;
    if (rest.size() >= 2 && std::isalpha(static_cast<unsigned char>(rest[0])) &&
        std::islower(static_cast<unsigned char>(rest[1]))) {
        std::string two(rest.substr(0, 2));
        two[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(two[0])));
        if (auto e = mol::element_from_symbol(two)) {
            const bool lower = std::islower(static_cast<unsigned char>(rest[0])) != 0;
            if (!lower || mol::element_supports_aromatic(*e)) {
                tok.element = *e;
                tok.aromatic = lower;
                sym_len = 2;
            }
        }
    }
    if (sym_len == 0 && !rest.empty() && std::isalpha(static_cast<unsigned char>(rest[0]))) {
        const char upper = static_cast<char>(std::toupper(static_cast<unsigned char>(rest[0])));
        auto e = mol::element_from_symbol(std::string_view(&upper, 1));
        const bool lower = std::islower(static_cast<unsigned char>(rest[0])) != 0;
        if (e && (!lower || mol::element_supports_aromatic(*e))) {
            tok.element = *e;
            tok.aromatic = lower;
            sym_len = 1;
        }
    }
    if (sym_len == 0) malformed(base_offset, "unknown element in token");
    tok.explicit_h = std::nullopt;

    size_t j = sym_len;
    if (j < rest.size() && rest[j] == 'H') {
        ++j;
        if (j >= rest.size() || !std::isdigit(static_cast<unsigned char>(rest[j])))
            malformed(base_offset, "H count needs a digit");
        tok.explicit_h = rest[j] - '0';
        ++j;
    }
    if (j < rest.size() && (rest[j] == '+' || rest[j] == '-')) {
        const int sign = rest[j] == '+' ? 1 : -1;
        ++j;
        int magnitude = 1;
        if (j < rest.size() && std::isdigit(static_cast<unsigned char>(rest[j]))) {
            magnitude = rest[j] - '0';
            ++j;
        }
        if (magnitude > 2) malformed(base_offset, "charge out of range");
        tok.charge = sign * magnitude;
    }
    if (j != rest.size()) malformed(base_offset, "trailing characters in token");
    return tok;
}

std::string canonical_text(const SelfiesToken& t) {
    std::string s = "[";
    switch (t.prefix) {
    case BondPrefix::Single: s += '-'; break;
    case BondPrefix::Double: s += '='; break;
    case BondPrefix::Triple: s += '#'; break;
    case BondPrefix::Default: break;
    }
    if (t.kind == TokenKind::Branch || t.kind == TokenKind::Ring) {
        s += t.kind == TokenKind::Branch ? "Branch" : "Ring";
        s += static_cast<char>('0' + t.level);
    } else {
        std::string sym(mol::symbol(t.element));
        if (t.aromatic)
            for (char& c : sym) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        s += sym;
        if (t.explicit_h) {
            s += 'H';
            s += static_cast<char>('0' + *t.explicit_h);
        }
        if (t.charge != 0) {
            s += t.charge > 0 ? '+' : '-';
            s += static_cast<char>('0' + std::abs(t.charge));
        }
    }
    s += ']';
    return s;
}

SelfiesToken make_token(const std::string& text) {
    SelfiesToken t = parse_payload(std::string_view(text).substr(1, text.size() - 2), 0);
    t.text = text;
    return t;
}

SelfiesToken index_token(int value) {
    static const char* kOrder[16] = {
        "[C]",       "[Ring1]",    "[Ring2]",    "[Branch1]", "[=Branch1]", "[#Branch1]",
        "[Branch2]", "[=Branch2]", "[#Branch2]", "[O]",       "[N]",        "[=N]",
        "[=C]",      "[#C]",       "[S]",        "[P]",
    };
    return make_token(kOrder[value & 15]);
}

// Remaining bonding capacity of a fresh atom, in half-bond units. Uses the
// molecule model's valence tables so every decoded bond is valence-legal by
// construction.
int capacity_halves(const SelfiesToken& t) {
    int base;
    if (t.aromatic) {
        const int shift = mol::max_valence(t.element, t.charge) - mol::max_valence(t.element, 0);
        base = mol::aromatic_max_halves(t.element) + 2 * shift;
    } else {
        base = 2 * mol::max_valence(t.element, t.charge);
    }
    if (t.explicit_h) base -= 2 * *t.explicit_h;
    return std::max(0, base);
}

BondOrder order_from_halves(int h) {
    switch (h) {
    case 3: return BondOrder::Aromatic;
    case 4: return BondOrder::Double;
    case 6: return BondOrder::Triple;
    default: return BondOrder::Single;
    }
}

// Highest bond order satisfying the request that fits the budget, walking
// the demotion ladder; 0 when not even a single bond fits.
int resolve_halves(BondPrefix prefix, bool aromatic_pair, int budget) {
    int ladder[4];
    int n = 0;
    switch (prefix) {
    case BondPrefix::Triple:
        ladder[n++] = 6;
        ladder[n++] = 4;
        if (aromatic_pair) ladder[n++] = 3;
        ladder[n++] = 2;
        break;
    case BondPrefix::Double:
        ladder[n++] = 4;
        if (aromatic_pair) ladder[n++] = 3;
        ladder[n++] = 2;
        break;
    case BondPrefix::Single: ladder[n++] = 2; break;
    case BondPrefix::Default:
        if (aromatic_pair) ladder[n++] = 3;
        ladder[n++] = 2;
        break;
    }
    for (int k = 0; k < n; ++k) {
        if (ladder[k] <= budget) return ladder[k];
    }
    return 0;
}

struct Decoder {
    const std::vector<SelfiesToken>& toks;
    MolecularGraph g;
    std::vector<int> cap;       // remaining halves per atom
    std::vector<int> realized;  // atom indices in realization order

    int realize(const SelfiesToken& t) {
        Atom a;
        a.element = t.element;
        a.aromatic = t.aromatic;
        a.formal_charge = t.charge;
        a.explicit_h = t.explicit_h;
        const int idx = g.add_atom(a);
        cap.push_back(capacity_halves(t));
        realized.push_back(idx);
        return idx;
    }

    // Reads `count` index tokens starting at p (clamped to end); returns the
    // encoded number N >= 1, or 0 when the tokens ran out.
    int read_number(size_t& p, size_t end, int count) {
        if (p + static_cast<size_t>(count) > end) {
            p = end;
            return 0;
        }
        int q = 0;
        for (int k = 0; k < count; ++k) q = q * 16 + index_value(toks[p++]);
        return q + 1;
    }

    // Derives tokens [begin, end) attaching to `parent` (or starting fresh
    // when parent < 0). entry_prefix/entry_budget govern the first bond of a
    // branch body; unrealizable tokens are skipped.
    void derive(size_t begin, size_t end, int parent, BondPrefix entry_prefix, int entry_budget) {
        int prev = parent;
        bool entry_bond = parent >= 0;
        size_t p = begin;
        while (p < end) {
            const SelfiesToken& t = toks[p++];
            switch (t.kind) {
            case TokenKind::Atom: {
                if (prev < 0) {
                    prev = realize(t);
                    break;
                }
                const int cap_new = capacity_halves(t);
                int budget = std::min(cap[static_cast<size_t>(prev)], cap_new);
                if (entry_bond) budget = std::min(budget, entry_budget);
                if (budget <= 0) break;
                const BondPrefix prefix = entry_bond ? entry_prefix : t.prefix;
                const bool pair = g.atom(prev).aromatic && t.aromatic;
                const int h = resolve_halves(prefix, pair, budget);
                if (h == 0) break;
                const int idx = realize(t);
                g.add_bond(prev, idx, order_from_halves(h));
                cap[static_cast<size_t>(prev)] -= h;
                cap[static_cast<size_t>(idx)] -= h;
                prev = idx;
                entry_bond = false;
                break;
            }
            case TokenKind::Branch: {
                const int n_body = read_number(p, end, t.level);
                if (n_body == 0) break;
                const size_t body_begin = p;
                const size_t body_end = std::min(body_begin + static_cast<size_t>(n_body), end);
                p = body_end;
                if (prev < 0) break;
                const int avail = cap[static_cast<size_t>(prev)];
                if (avail <= 2) break;  // reserve a single bond for the chain
                derive(body_begin, body_end, prev, t.prefix, avail - 2);
                break;
            }
            case TokenKind::Ring: {
                const int dist = read_number(p, end, t.level);
                if (dist == 0 || prev < 0) break;
                const int pos = std::max(0, static_cast<int>(realized.size()) - 1 - dist);
                const int partner = realized[static_cast<size_t>(pos)];
                if (partner == prev || g.has_bond(partner, prev)) break;
                const bool pair = g.atom(prev).aromatic && g.atom(partner).aromatic;
                const int budget =
                    std::min(cap[static_cast<size_t>(prev)], cap[static_cast<size_t>(partner)]);
                const int h = resolve_halves(t.prefix, pair, budget);
                if (h == 0) break;
                g.add_bond(partner, prev, order_from_halves(h));
                cap[static_cast<size_t>(prev)] -= h;
                cap[static_cast<size_t>(partner)] -= h;
                break;
            }
            }
        }
    }
};

}  // namespace

std::string TokenSequence::text() const {
    std::string s;
    for (const SelfiesToken& t : tokens) s += t.text;
    return s;
}

TokenSequence tokenize(std::string_view text) {
    TokenSequence seq;
    size_t i = 0;
    while (i < text.size()) {
        if (text[i] != '[') malformed(i, "expected '['");
        const size_t close = text.find(']', i);
        if (close == std::string_view::npos) malformed(i, "unterminated token");
        SelfiesToken tok = parse_payload(text.substr(i + 1, close - i - 1), i);
        tok.text = std::string(text.substr(i, close - i + 1));
        seq.tokens.push_back(std::move(tok));
        i = close + 1;
    }
    return seq;
}

std::optional<MolecularGraph> decode(const TokenSequence& tokens) {
    Decoder d{tokens.tokens, {}, {}, {}};
    d.derive(0, tokens.tokens.size(), -1, BondPrefix::Default, 0);
    if (d.g.empty()) return std::nullopt;
    return std::move(d.g);
}

// ---------------------------------------------------------------------------
// Encoding

namespace {

BondPrefix prefix_for(const MolecularGraph& g, int a, int b, BondOrder order) {
    switch (order) {
    case BondOrder::Single:
        return (g.atom(a).aromatic && g.atom(b).aromatic) ? BondPrefix::Single
                                                          : BondPrefix::Default;
    case BondOrder::Double: return BondPrefix::Double;
    case BondOrder::Triple: return BondPrefix::Triple;
    case BondOrder::Aromatic: return BondPrefix::Default;
    }
    return BondPrefix::Default;
}

SelfiesToken atom_token(const MolecularGraph& g, int idx, BondPrefix prefix) {
    const Atom& a = g.atom(idx);
    SelfiesToken t;
    t.kind = TokenKind::Atom;
    t.prefix = prefix;
    t.element = a.element;
    t.aromatic = a.aromatic;
    t.charge = a.formal_charge;
    if (a.explicit_h) {
        const int implied =
            mol::implicit_hydrogens_for(a.element, a.aromatic, a.formal_charge, g.bond_halves_sum(idx));
        if (*a.explicit_h != implied) t.explicit_h = *a.explicit_h;
    }
    t.text = canonical_text(t);
    return t;
}

void append_length_prefixed(std::vector<SelfiesToken>& out, TokenKind kind, BondPrefix prefix,
                            int number) {
    // number >= 1 is encoded as number-1 in base-16 index tokens.
    const int q = number - 1;
    int level;
    if (q < 16) level = 1;
    else if (q < 256) level = 2;
    else if (q < 4096) level = 3;
    else throw std::length_error("structure too large for SELFIES length tokens");
    SelfiesToken marker;
    marker.kind = kind;
    marker.prefix = prefix;
    marker.level = level;
    marker.text = canonical_text(marker);
    out.push_back(std::move(marker));
    for (int k = level - 1; k >= 0; --k) out.push_back(index_token((q >> (4 * k)) & 15));
}

}  // namespace

TokenSequence encode(const MolecularGraph& g) {
    if (g.empty())
        throw SelfiesError(SelfiesErrorKind::EmptyGraph, 0, "cannot encode an empty graph");
    if (g.connected_components() != 1)
        throw SelfiesError(SelfiesErrorKind::DisconnectedGraph, 0,
                           "cannot encode a disconnected graph");

    const int n = g.atom_count();
    // Spanning tree in stored-atom order; non-tree bonds become ring tokens.
    std::vector<char> visited(static_cast<size_t>(n), 0);
    std::vector<std::vector<int>> children(static_cast<size_t>(n));
    std::vector<char> bond_used(static_cast<size_t>(g.bond_count()), 0);
    std::vector<int> preorder(static_cast<size_t>(n), -1);
    struct Closure {
        int second;
        int first;
        BondOrder order;
    };
    std::vector<std::vector<Closure>> ring_at(static_cast<size_t>(n));

    struct Frame {
        int atom;
        size_t next = 0;
    };
    std::vector<Frame> stack;
    stack.push_back({0});
    visited[0] = 1;
    preorder[0] = 0;
    int counter = 1;
    while (!stack.empty()) {
        Frame& fr = stack.back();
        const auto& nbrs = g.neighbors(fr.atom);
        if (fr.next >= nbrs.size()) {
            stack.pop_back();
            continue;
        }
        const auto nb = nbrs[fr.next++];
        if (bond_used[static_cast<size_t>(nb.bond_index)]) continue;
        bond_used[static_cast<size_t>(nb.bond_index)] = 1;
        if (!visited[static_cast<size_t>(nb.atom)]) {
            visited[static_cast<size_t>(nb.atom)] = 1;
            preorder[static_cast<size_t>(nb.atom)] = counter++;
            children[static_cast<size_t>(fr.atom)].push_back(nb.atom);
            stack.push_back({nb.atom});
        } else {
            // Back edge: emitted at the later endpoint.
            ring_at[static_cast<size_t>(fr.atom)].push_back({fr.atom, nb.atom, nb.order});
        }
    }

    // Emit subtrees bottom-up. The first token of a subtree is the atom
    // itself; its incoming-bond prefix is applied by the caller (directly for
    // chain atoms, on the Branch marker for branches).
    auto emit = [&](auto&& self, int v) -> std::vector<SelfiesToken> {
        std::vector<SelfiesToken> out;
        out.push_back(atom_token(g, v, BondPrefix::Default));
        // Ring closures, nearest partner first for stable output.
        auto closures = ring_at[static_cast<size_t>(v)];
        std::sort(closures.begin(), closures.end(), [&](const Closure& x, const Closure& y) {
            return preorder[static_cast<size_t>(x.first)] > preorder[static_cast<size_t>(y.first)];
        });
        for (const Closure& cl : closures) {
            const int dist =
                preorder[static_cast<size_t>(cl.second)] - preorder[static_cast<size_t>(cl.first)];
            append_length_prefixed(out, TokenKind::Ring,
                                   prefix_for(g, cl.first, cl.second, cl.order), dist);
        }
        const auto& ch = children[static_cast<size_t>(v)];
        for (size_t k = 0; k < ch.size(); ++k) {
            BondOrder order = BondOrder::Single;
            for (const auto& nb : g.neighbors(v))
                if (nb.atom == ch[k]) order = nb.order;
            const BondPrefix prefix = prefix_for(g, v, ch[k], order);
            std::vector<SelfiesToken> sub = self(self, ch[k]);
            if (k + 1 < ch.size()) {
                append_length_prefixed(out, TokenKind::Branch, prefix,
                                       static_cast<int>(sub.size()));
                out.insert(out.end(), sub.begin(), sub.end());
            } else {
                sub.front() = atom_token(g, ch[k], prefix);
                out.insert(out.end(), sub.begin(), sub.end());
            }
        }
        return out;
    };

    TokenSequence seq;
    seq.tokens = emit(emit, 0);
    return seq;
}

// ---------------------------------------------------------------------------
// Alphabet

void Alphabet::add(const SelfiesToken& t) {
    for (const SelfiesToken& existing : tokens_)
        if (existing.text == t.text) return;
    tokens_.push_back(t);
}

Alphabet Alphabet::baseline() {
    static const char* kBaseline[] = {
        "[C]",   "[=C]", "[N]",  "[=N]",      "[O]",        "[=O]",    "[F]",
        "[S]",   "[Cl]", "[Br]", "[Branch1]", "[=Branch1]", "[Ring1]", "[Ring2]",
    };
    Alphabet a;
    for (const char* text : kBaseline) a.add(make_token(text));
    return a;
}

Alphabet Alphabet::from_corpus(std::span<const TokenSequence> corpus) {
    Alphabet a = baseline();
    for (const TokenSequence& seq : corpus)
        for (const SelfiesToken& t : seq.tokens) a.add(t);
    return a;
}

Alphabet Alphabet::from_token_texts(std::span<const std::string> texts) {
    Alphabet a;
    for (const std::string& text : texts) a.add(make_token(text));
    return a;
}

const SelfiesToken& Alphabet::token(int id) const {
    if (id < 3 || id >= vocab_size()) throw std::out_of_range("token id out of range");
    return tokens_[static_cast<size_t>(id - 3)];
}

int Alphabet::id_of(const std::string& text) const {
    for (size_t i = 0; i < tokens_.size(); ++i)
        if (tokens_[i].text == text) return static_cast<int>(i) + 3;
    return -1;
}

std::vector<std::string> Alphabet::token_texts() const {
    std::vector<std::string> out;
    out.reserve(tokens_.size());
    for (const SelfiesToken& t : tokens_) out.push_back(t.text);
    return out;
}

// ---------------------------------------------------------------------------
// Mutation and STONED expansion

TokenSequence mutate(const TokenSequence& tokens, Rng& rng, const Alphabet& alphabet) {
    const int n_gen = alphabet.generation_token_count();
    if (n_gen == 0) throw std::invalid_argument("mutation alphabet is empty");
    auto draw = [&] {
        return alphabet.token(3 + static_cast<int>(rng.uniform_index(static_cast<size_t>(n_gen))));
    };

    TokenSequence out = tokens;
    int op;
    if (tokens.empty()) {
        op = 2;  // only insertion keeps the result nonempty
    } else {
        op = static_cast<int>(rng.uniform_index(3));
        if (op == 0 && tokens.size() == 1) op = 1;
    }
    switch (op) {
    case 0: {
        const size_t pos = rng.uniform_index(out.tokens.size());
        out.tokens.erase(out.tokens.begin() + static_cast<ptrdiff_t>(pos));
        break;
    }
    case 1: {
        const size_t pos = rng.uniform_index(out.tokens.size());
        out.tokens[pos] = draw();
        break;
    }
    default: {
        const size_t pos = rng.uniform_index(out.tokens.size() + 1);
        out.tokens.insert(out.tokens.begin() + static_cast<ptrdiff_t>(pos), draw());
        break;
    }
    }
    return out;
}

std::vector<mol::MolecularGraph> stoned_expand(
    const MolecularGraph& seed, int n_target, int max_attempts,
    const std::function<bool(const MolecularGraph&)>& filter, const Alphabet& alphabet,
    Rng& rng, int* attempts_used) {
    std::vector<MolecularGraph> out;
    if (attempts_used) *attempts_used = 0;
    if (n_target <= 0) return out;
    std::set<std::string> seen;

    std::vector<int> perm(static_cast<size_t>(seed.atom_count()));
    for (int attempt = 0; attempt < max_attempts && static_cast<int>(out.size()) < n_target;
         ++attempt) {
        if (attempts_used) *attempts_used = attempt + 1;
        for (size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>(i);
        for (size_t i = perm.size(); i > 1; --i)
            std::swap(perm[i - 1], perm[rng.uniform_index(i)]);

        TokenSequence toks;
        try {
            toks = encode(mol::parse_smiles(mol::write_smiles(seed, perm)));
        } catch (const std::exception&) {
            continue;  // randomized spelling failed to re-encode
        }
        const int k = 1 + static_cast<int>(rng.uniform_index(3));
        for (int j = 0; j < k; ++j) toks = mutate(toks, rng, alphabet);

        std::optional<MolecularGraph> mutant = decode(toks);
        if (!mutant) continue;
        const std::string key = mol::canonical_key(*mutant);
        if (seen.count(key)) continue;
        if (!filter(*mutant)) continue;
        seen.insert(key);
        out.push_back(std::move(*mutant));
    }
    return out;
}

}  // namespace qdgen::selfies
