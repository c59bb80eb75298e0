#include "qdgen/molgraph.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <deque>
#include <limits>
#include <map>
#include <tuple>

namespace qdgen::mol {

namespace {

struct ElementInfo {
    std::string_view sym;
    double mass;
    std::array<int, 3> valences;  // ascending, 0-padded
    int n_valences;
    bool aromatic_ok;
    int aromatic_max_halves;  // max bond-order sum (halves) when aromatic
};

// IUPAC 2021 standard atomic weights, abridged to 3 decimals.
constexpr std::array<ElementInfo, 10> kElements = {{
    {"B", 10.811, {3, 0, 0}, 1, true, 8},
    {"C", 12.011, {4, 0, 0}, 1, true, 9},
    {"N", 14.007, {3, 5, 0}, 2, true, 9},
    {"O", 15.999, {2, 0, 0}, 1, true, 6},
    {"P", 30.974, {3, 5, 0}, 2, true, 9},
    {"S", 32.060, {2, 4, 6}, 3, true, 8},
    {"F", 18.998, {1, 0, 0}, 1, false, 0},
    {"Cl", 35.450, {1, 0, 0}, 1, false, 0},
    {"Br", 79.904, {1, 0, 0}, 1, false, 0},
    {"I", 126.904, {1, 0, 0}, 1, false, 0},
}};

const ElementInfo& info(Element e) { return kElements[static_cast<size_t>(e)]; }

// Charge shifts the usable valence: cations of N/P/O/S/halogens gain a bond,
// anions lose one; carbon loses a bond either way; boron is the mirror case
// (borate B- is tetravalent).
int charge_shift(Element e, int q) {
    switch (e) {
    case Element::C: return -std::abs(q);
    case Element::B: return -q;
    default: return q;
    }
}

int implicit_h_from_tables(Element e, bool aromatic, int q, int bond_halves) {
    const ElementInfo& ei = info(e);
    const int shift = charge_shift(e, q);
    // Aromatic atoms never step up to a hypervalent state to gain hydrogens;
    // only the lowest valence applies (a pyridinium-like n gets no H).
    const int entries = aromatic ? 1 : ei.n_valences;
    for (int k = 0; k < entries; ++k) {
        const int v = ei.valences[static_cast<size_t>(k)] + shift;
        if (2 * v >= bond_halves) return (2 * v - bond_halves) / 2;
    }
    return 0;
}

}  // namespace

std::string_view symbol(Element e) { return info(e).sym; }

std::optional<Element> element_from_symbol(std::string_view s) {
    for (size_t i = 0; i < kElements.size(); ++i) {
        if (kElements[i].sym == s) return static_cast<Element>(i);
    }
    return std::nullopt;
}

bool element_supports_aromatic(Element e) { return info(e).aromatic_ok; }

double atomic_mass(Element e) { return info(e).mass; }
double hydrogen_mass() { return 1.008; }

std::span<const int> default_valences(Element e) {
    const ElementInfo& ei = info(e);
    return {ei.valences.data(), static_cast<size_t>(ei.n_valences)};
}

int max_valence(Element e, int formal_charge) {
    const ElementInfo& ei = info(e);
    const int base = ei.valences[static_cast<size_t>(ei.n_valences - 1)];
    return std::max(0, base + charge_shift(e, formal_charge));
}

int aromatic_max_halves(Element e) { return info(e).aromatic_max_halves; }

int implicit_hydrogens_for(Element e, bool aromatic, int formal_charge, int bond_halves) {
    return implicit_h_from_tables(e, aromatic, formal_charge, bond_halves);
}

int halves(BondOrder order) {
    switch (order) {
    case BondOrder::Single: return 2;
    case BondOrder::Double: return 4;
    case BondOrder::Triple: return 6;
    case BondOrder::Aromatic: return 3;
    }
    return 2;
}

int MolecularGraph::add_atom(const Atom& atom) {
    atoms_.push_back(atom);
    adj_.emplace_back();
    return static_cast<int>(atoms_.size()) - 1;
}

void MolecularGraph::add_bond(int a, int b, BondOrder order) {
    if (a == b) throw std::invalid_argument("self-loop bond");
    if (a < 0 || b < 0 || a >= atom_count() || b >= atom_count())
        throw std::out_of_range("bond atom index out of range");
    if (has_bond(a, b)) throw std::invalid_argument("duplicate bond");
    const int idx = static_cast<int>(bonds_.size());
    bonds_.push_back({a, b, order});
    adj_[static_cast<size_t>(a)].push_back({b, order, idx});
    adj_[static_cast<size_t>(b)].push_back({a, order, idx});
}

bool MolecularGraph::has_bond(int a, int b) const {
    for (const Neighbor& n : adj_[static_cast<size_t>(a)]) {
        if (n.atom == b) return true;
    }
    return false;
}

int MolecularGraph::bond_halves_sum(int i) const {
    int sum = 0;
    for (const Neighbor& n : adj_[static_cast<size_t>(i)]) sum += halves(n.order);
    return sum;
}

int MolecularGraph::hydrogen_count(int i) const {
    const Atom& a = atoms_[static_cast<size_t>(i)];
    if (a.explicit_h) return *a.explicit_h;
    return implicit_h_from_tables(a.element, a.aromatic, a.formal_charge, bond_halves_sum(i));
}

bool MolecularGraph::valence_ok(int i) const {
    const Atom& a = atoms_[static_cast<size_t>(i)];
    const int used = total_h_halves(i);
    if (a.aromatic) {
        if (!element_supports_aromatic(a.element)) return false;
        const int shift = charge_shift(a.element, a.formal_charge);
        return used <= aromatic_max_halves(a.element) + 2 * shift;
    }
    return used <= 2 * max_valence(a.element, a.formal_charge);
}

int MolecularGraph::connected_components() const {
    const int n = atom_count();
    std::vector<char> seen(static_cast<size_t>(n), 0);
    int components = 0;
    std::vector<int> stack;
    for (int s = 0; s < n; ++s) {
        if (seen[static_cast<size_t>(s)]) continue;
        ++components;
        stack.push_back(s);
        seen[static_cast<size_t>(s)] = 1;
        while (!stack.empty()) {
            const int v = stack.back();
            stack.pop_back();
            for (const Neighbor& nb : adj_[static_cast<size_t>(v)]) {
                if (!seen[static_cast<size_t>(nb.atom)]) {
                    seen[static_cast<size_t>(nb.atom)] = 1;
                    stack.push_back(nb.atom);
                }
            }
        }
    }
    return components;
}

// ---------------------------------------------------------------------------
// SMILES parsing

namespace {

[[noreturn]] void fail(SmilesErrorKind kind, size_t pos, const std::string& msg) {
    throw SmilesError(kind, pos, msg + " (position " + std::to_string(pos) + ")");
}

struct BracketAtom {
    Atom atom;
    size_t end;  // index one past ']'
};

BracketAtom parse_bracket(std::string_view text, size_t start) {
    size_t i = start + 1;  // past '['
    const size_t n = text.size();
    Atom atom;

    if (i < n && std::isdigit(static_cast<unsigned char>(text[i])))
        fail(SmilesErrorKind::Syntax, i, "isotopes are not supported");

    if (i >= n) fail(SmilesErrorKind::Syntax, start, "unterminated bracket atom");

    // Element symbol: try two letters, then one; lowercase means aromatic.
    size_t sym_pos = i;
    std::string sym;
    bool aromatic = false;
    auto try_symbol = [&](std::string_view cand, bool lower) -> bool {
        std::string upper(cand);
        if (lower) upper[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(upper[0])));
        auto e = element_from_symbol(upper);
        if (!e) return false;
        if (lower && !element_supports_aromatic(*e)) return false;
        sym = upper;
        aromatic = lower;
        atom.element = *e;
        return true;
    };
    if (i + 1 < n && std::isalpha(static_cast<unsigned char>(text[i])) &&
        std::islower(static_cast<unsigned char>(text[i + 1])) &&
        try_symbol(text.substr(i, 2), std::islower(static_cast<unsigned char>(text[i])))) {
        i += 2;
    } else if (std::isalpha(static_cast<unsigned char>(text[i])) &&
               try_symbol(text.substr(i, 1), std::islower(static_cast<unsigned char>(text[i])))) {
        i += 1;
    } else {
        fail(SmilesErrorKind::UnknownElement, sym_pos, "unknown element in bracket atom");
    }
    atom.aromatic = aromatic;

    // Chirality markers discarded.
    while (i < n && text[i] == '@') ++i;

    int h_count = 0;
    bool h_seen = false;
    if (i < n && text[i] == 'H') {
        h_seen = true;
        ++i;
        if (i < n && std::isdigit(static_cast<unsigned char>(text[i]))) {
            h_count = text[i] - '0';
            ++i;
        } else {
            h_count = 1;
        }
    }
    atom.explicit_h = h_seen ? std::optional<int>(h_count) : std::optional<int>(0);

    if (i < n && (text[i] == '+' || text[i] == '-')) {
        const char sign_char = text[i];
        const int sign = sign_char == '+' ? 1 : -1;
        size_t charge_pos = i;
        ++i;
        int magnitude = 1;
        if (i < n && std::isdigit(static_cast<unsigned char>(text[i]))) {
            magnitude = text[i] - '0';
            ++i;
        } else {
            while (i < n && text[i] == sign_char) {
                ++magnitude;
                ++i;
            }
        }
        if (magnitude > 2) fail(SmilesErrorKind::Syntax, charge_pos, "formal charge out of range");
        atom.formal_charge = sign * magnitude;
    }

    if (i >= n || text[i] != ']')
        fail(SmilesErrorKind::Syntax, i < n ? i : start, "unterminated bracket atom");
    return {atom, i + 1};
}

}  // namespace

MolecularGraph parse_smiles(std::string_view text) {
    if (text.empty()) fail(SmilesErrorKind::Syntax, 0, "empty SMILES");

    MolecularGraph g;
    std::vector<size_t> atom_pos;  // source position per atom, for diagnostics

    struct RingSlot {
        int atom;
        std::optional<BondOrder> order;
        size_t pos;
    };
    std::map<int, RingSlot> open_rings;
    std::vector<int> branch_atoms;
    std::vector<size_t> branch_pos;
    int prev = -1;
    std::optional<BondOrder> pending;
    size_t pending_pos = 0;

    auto default_order = [&](int a, int b) {
        return (g.atom(a).aromatic && g.atom(b).aromatic) ? BondOrder::Aromatic
                                                          : BondOrder::Single;
    };

    auto attach_atom = [&](const Atom& atom, size_t pos) {
        const int idx = g.add_atom(atom);
        atom_pos.push_back(pos);
        if (prev >= 0) {
            g.add_bond(prev, idx, pending ? *pending : default_order(prev, idx));
        } else if (pending) {
            fail(SmilesErrorKind::Syntax, pending_pos, "bond symbol with no preceding atom");
        }
        pending.reset();
        prev = idx;
    };

    auto close_or_open_ring = [&](int number, size_t pos) {
        if (prev < 0) fail(SmilesErrorKind::Syntax, pos, "ring closure before any atom");
        auto it = open_rings.find(number);
        if (it == open_rings.end()) {
            open_rings.emplace(number, RingSlot{prev, pending, pos});
        } else {
            const RingSlot slot = it->second;
            if (slot.atom == prev)
                fail(SmilesErrorKind::Syntax, pos, "ring closure bonds an atom to itself");
            if (g.has_bond(slot.atom, prev))
                fail(SmilesErrorKind::Syntax, pos, "ring closure duplicates an existing bond");
            BondOrder order;
            if (pending && slot.order && *pending != *slot.order)
                fail(SmilesErrorKind::UnclosedRing, pos, "conflicting ring-closure bond orders");
            if (pending) order = *pending;
            else if (slot.order) order = *slot.order;
            else order = default_order(slot.atom, prev);
            g.add_bond(slot.atom, prev, order);
            open_rings.erase(it);
        }
        pending.reset();
    };

    size_t i = 0;
    const size_t n = text.size();
    while (i < n) {
        const char c = text[i];
        switch (c) {
        case '-': case '/': case '\\':
            if (pending) fail(SmilesErrorKind::Syntax, i, "consecutive bond symbols");
            pending = BondOrder::Single;
            pending_pos = i;
            ++i;
            break;
        case '=':
            if (pending) fail(SmilesErrorKind::Syntax, i, "consecutive bond symbols");
            pending = BondOrder::Double;
            pending_pos = i;
            ++i;
            break;
        case '#':
            if (pending) fail(SmilesErrorKind::Syntax, i, "consecutive bond symbols");
            pending = BondOrder::Triple;
            pending_pos = i;
            ++i;
            break;
        case ':':
            if (pending) fail(SmilesErrorKind::Syntax, i, "consecutive bond symbols");
            pending = BondOrder::Aromatic;
            pending_pos = i;
            ++i;
            break;
        case '(':
            if (prev < 0) fail(SmilesErrorKind::UnbalancedBranch, i, "branch with no current atom");
            if (pending) fail(SmilesErrorKind::Syntax, pending_pos, "bond symbol before branch open");
            branch_atoms.push_back(prev);
            branch_pos.push_back(i);
            ++i;
            break;
        case ')':
            if (branch_atoms.empty())
                fail(SmilesErrorKind::UnbalancedBranch, i, "unmatched branch close");
            if (pending) fail(SmilesErrorKind::Syntax, pending_pos, "dangling bond before branch close");
            prev = branch_atoms.back();
            branch_atoms.pop_back();
            branch_pos.pop_back();
            ++i;
            break;
        case '%': {
            if (i + 2 >= n || !std::isdigit(static_cast<unsigned char>(text[i + 1])) ||
                !std::isdigit(static_cast<unsigned char>(text[i + 2])))
                fail(SmilesErrorKind::Syntax, i, "%% ring closure needs two digits");
            close_or_open_ring((text[i + 1] - '0') * 10 + (text[i + 2] - '0'), i);
            i += 3;
            break;
        }
        case '[': {
            BracketAtom ba = parse_bracket(text, i);
            attach_atom(ba.atom, i);
            i = ba.end;
            break;
        }
        case '.':
            fail(SmilesErrorKind::Syntax, i, "multi-fragment SMILES unsupported");
        default: {
            if (std::isdigit(static_cast<unsigned char>(c))) {
                close_or_open_ring(c - '0', i);
                ++i;
                break;
            }
            if (std::isspace(static_cast<unsigned char>(c)))
                fail(SmilesErrorKind::Syntax, i, "unexpected whitespace");
            // Organic-subset atom: two-letter first.
            Atom atom;
            bool matched = false;
            if (i + 1 < n) {
                auto e2 = element_from_symbol(text.substr(i, 2));
                if (e2) {
                    atom.element = *e2;
                    attach_atom(atom, i);
                    i += 2;
                    matched = true;
                }
            }
            if (!matched) {
                const char upper = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
                auto e1 = element_from_symbol(std::string_view(&upper, 1));
                if (!e1) fail(SmilesErrorKind::UnknownElement, i, "unknown element");
                const bool lower = std::islower(static_cast<unsigned char>(c)) != 0;
                if (lower && !element_supports_aromatic(*e1))
                    fail(SmilesErrorKind::UnknownElement, i, "element cannot be aromatic");
                atom.element = *e1;
                atom.aromatic = lower;
                attach_atom(atom, i);
                ++i;
            }
            break;
        }
        }
    }

    if (pending) fail(SmilesErrorKind::Syntax, pending_pos, "dangling bond symbol");
    if (!branch_atoms.empty())
        fail(SmilesErrorKind::UnbalancedBranch, branch_pos.front(), "unclosed branch");
    if (!open_rings.empty())
        fail(SmilesErrorKind::UnclosedRing, open_rings.begin()->second.pos, "unclosed ring");

    for (int a = 0; a < g.atom_count(); ++a) {
        if (!g.valence_ok(a))
            fail(SmilesErrorKind::ValenceViolation, atom_pos[static_cast<size_t>(a)],
                 "valence exceeded on " + std::string(symbol(g.atom(a).element)));
    }
    return g;
}

// ---------------------------------------------------------------------------
// Writing

namespace {

void append_atom_token(std::string& out, const MolecularGraph& g, int idx) {
    const Atom& a = g.atom(idx);
    std::string sym(symbol(a.element));
    if (a.aromatic) {
        for (char& c : sym) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    // Brackets only when the organic-subset reading would not reproduce the
    // atom: charge, or an H count that differs from the implicit rule.
    bool bracket = a.formal_charge != 0;
    if (!bracket && a.explicit_h) {
        const int implied = implicit_h_from_tables(a.element, a.aromatic, a.formal_charge,
                                                   g.bond_halves_sum(idx));
        bracket = *a.explicit_h != implied;
    }
    if (!bracket) {
        out += sym;
        return;
    }
    out += '[';
    out += sym;
    const int h = g.hydrogen_count(idx);
    if (h == 1) out += 'H';
    else if (h > 1) {
        out += 'H';
        out += std::to_string(h);
    }
    if (a.formal_charge != 0) {
        out += a.formal_charge > 0 ? '+' : '-';
        if (std::abs(a.formal_charge) > 1) out += std::to_string(std::abs(a.formal_charge));
    }
    out += ']';
}

void append_bond_symbol(std::string& out, const MolecularGraph& g, int a, int b, BondOrder order) {
    const bool both_aromatic = g.atom(a).aromatic && g.atom(b).aromatic;
    switch (order) {
    case BondOrder::Single:
        if (both_aromatic) out += '-';
        break;
    case BondOrder::Double: out += '='; break;
    case BondOrder::Triple: out += '#'; break;
    case BondOrder::Aromatic:
        if (!both_aromatic) out += ':';
        break;
    }
}

std::string write_by_priority(const MolecularGraph& g, std::span<const int> priority) {
    const int n = g.atom_count();
    if (n == 0) throw SmilesError(SmilesErrorKind::Syntax, 0, "cannot write an empty graph");
    if (static_cast<int>(priority.size()) != n)
        throw std::invalid_argument("priority size does not match atom count");
    {
        std::vector<char> seen(static_cast<size_t>(n), 0);
        for (int p : priority) {
            if (p < 0 || p >= n || seen[static_cast<size_t>(p)])
                throw std::invalid_argument("priority is not a permutation");
            seen[static_cast<size_t>(p)] = 1;
        }
    }
    if (g.connected_components() != 1)
        throw std::invalid_argument("cannot write a disconnected graph");

    // Pass 1: DFS to classify tree edges vs ring closures and fix emission
    // order. Children visited in ascending priority.
    std::vector<char> visited(static_cast<size_t>(n), 0);
    std::vector<int> order;  // emission order of atoms
    std::vector<std::vector<int>> children(static_cast<size_t>(n));
    std::vector<char> bond_used(static_cast<size_t>(g.bond_count()), 0);
    struct Closure {
        int first, second, bond;
    };
    std::vector<Closure> closures;

    int start = 0;
    for (int i = 1; i < n; ++i) {
        if (priority[static_cast<size_t>(i)] < priority[static_cast<size_t>(start)]) start = i;
    }

    struct Frame {
        int atom;
        std::vector<int> nbrs;
        size_t next = 0;
    };
    auto sorted_neighbors = [&](int v) {
        std::vector<int> nb;
        for (const auto& x : g.neighbors(v)) nb.push_back(x.atom);
        std::sort(nb.begin(), nb.end(), [&](int p, int q) {
            return priority[static_cast<size_t>(p)] < priority[static_cast<size_t>(q)];
        });
        return nb;
    };
    std::vector<int> emit_rank(static_cast<size_t>(n), -1);
    std::vector<Frame> stack;
    stack.push_back({start, sorted_neighbors(start)});
    visited[static_cast<size_t>(start)] = 1;
    emit_rank[static_cast<size_t>(start)] = 0;
    order.push_back(start);
    while (!stack.empty()) {
        Frame& fr = stack.back();
        if (fr.next >= fr.nbrs.size()) {
            stack.pop_back();
            continue;
        }
        const int to = fr.nbrs[fr.next++];
        int bond_idx = -1;
        for (const auto& x : g.neighbors(fr.atom)) {
            if (x.atom == to) bond_idx = x.bond_index;
        }
        if (bond_used[static_cast<size_t>(bond_idx)]) continue;
        if (!visited[static_cast<size_t>(to)]) {
            bond_used[static_cast<size_t>(bond_idx)] = 1;
            visited[static_cast<size_t>(to)] = 1;
            emit_rank[static_cast<size_t>(to)] = static_cast<int>(order.size());
            order.push_back(to);
            children[static_cast<size_t>(fr.atom)].push_back(to);
            stack.push_back({to, sorted_neighbors(to)});
        } else {
            bond_used[static_cast<size_t>(bond_idx)] = 1;
            // Back edge; the endpoint emitted earlier carries the opening digit.
            const int a = fr.atom;
            const int first = emit_rank[static_cast<size_t>(to)] < emit_rank[static_cast<size_t>(a)] ? to : a;
            const int second = first == to ? a : to;
            closures.push_back({first, second, bond_idx});
        }
    }

    // Ring numbers: allocate at the first endpoint in emission order, free at
    // the second. Deterministic given the traversal.
    std::vector<std::vector<std::pair<int, int>>> ring_open(static_cast<size_t>(n));   // (closure idx, number)
    std::vector<std::vector<std::pair<int, int>>> ring_close(static_cast<size_t>(n));  // (closure idx, number)
    {
        // Sort closures by (open position, close position) for stable digits.
        std::vector<int> cidx(closures.size());
        for (size_t i = 0; i < closures.size(); ++i) cidx[i] = static_cast<int>(i);
        std::sort(cidx.begin(), cidx.end(), [&](int p, int q) {
            const auto& cp = closures[static_cast<size_t>(p)];
            const auto& cq = closures[static_cast<size_t>(q)];
            return std::pair(emit_rank[static_cast<size_t>(cp.first)], emit_rank[static_cast<size_t>(cp.second)]) <
                   std::pair(emit_rank[static_cast<size_t>(cq.first)], emit_rank[static_cast<size_t>(cq.second)]);
        });
        std::vector<std::pair<int, int>> events;  // (emit position, +closure / -closure)
        for (int ci : cidx) {
            ring_open[static_cast<size_t>(closures[static_cast<size_t>(ci)].first)].push_back({ci, -1});
            ring_close[static_cast<size_t>(closures[static_cast<size_t>(ci)].second)].push_back({ci, -1});
        }
        std::vector<int> number_of(closures.size(), -1);
        std::vector<char> in_use(100, 0);
        for (int atom : order) {
            for (auto& [ci, num] : ring_close[static_cast<size_t>(atom)]) {
                num = number_of[static_cast<size_t>(ci)];
                if (num >= 0) in_use[static_cast<size_t>(num)] = 0;
            }
            for (auto& [ci, num] : ring_open[static_cast<size_t>(atom)]) {
                int free_num = -1;
                for (int k = 1; k < 100; ++k) {
                    if (!in_use[static_cast<size_t>(k)]) {
                        free_num = k;
                        break;
                    }
                }
                if (free_num < 0) throw SmilesError(SmilesErrorKind::Syntax, 0, "too many open rings");
                in_use[static_cast<size_t>(free_num)] = 1;
                number_of[static_cast<size_t>(ci)] = free_num;
                num = free_num;
            }
        }
        // Second pass now that numbers are final: refresh close-side entries
        // (close events were assigned before their open in atom order only if
        // traversal visited close first, which cannot happen).
        for (int atom : order) {
            for (auto& [ci, num] : ring_close[static_cast<size_t>(atom)]) num = number_of[static_cast<size_t>(ci)];
        }
    }

    // Pass 2: emit.
    std::string out;
    struct EmitFrame {
        int atom;
        size_t child = 0;
        bool parenthesized = false;
    };
    // Closures emitted before opens so a digit freed at this atom can be
    // reallocated by an open at the same atom (spiro case).
    auto append_ring_digits = [&](int atom) {
        for (const auto& [ci, num] : ring_close[static_cast<size_t>(atom)]) {
            const Closure& cl = closures[static_cast<size_t>(ci)];
            append_bond_symbol(out, g, cl.first, cl.second, g.bonds()[static_cast<size_t>(cl.bond)].order);
            if (num >= 10) out += '%';
            out += std::to_string(num);
        }
        for (const auto& [ci, num] : ring_open[static_cast<size_t>(atom)]) {
            const Closure& cl = closures[static_cast<size_t>(ci)];
            append_bond_symbol(out, g, cl.first, cl.second, g.bonds()[static_cast<size_t>(cl.bond)].order);
            if (num >= 10) out += '%';
            out += std::to_string(num);
        }
    };

    std::vector<EmitFrame> estack;
    append_atom_token(out, g, start);
    append_ring_digits(start);
    estack.push_back({start});
    while (!estack.empty()) {
        EmitFrame& fr = estack.back();
        const auto& ch = children[static_cast<size_t>(fr.atom)];
        if (fr.child >= ch.size()) {
            if (fr.parenthesized) out += ')';
            estack.pop_back();
            continue;
        }
        const int to = ch[fr.child];
        const bool last = fr.child + 1 == ch.size();
        ++fr.child;
        BondOrder order_ab = BondOrder::Single;
        for (const auto& x : g.neighbors(fr.atom)) {
            if (x.atom == to) order_ab = x.order;
        }
        if (!last) out += '(';
        append_bond_symbol(out, g, fr.atom, to, order_ab);
        append_atom_token(out, g, to);
        append_ring_digits(to);
        estack.push_back({to, 0, !last});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Canonical ranks: iterative neighborhood refinement, then tie-breaking by
// exploring every member of the first ambiguous class and keeping the
// lexicographically smallest string.

std::vector<int> dense_ranks(std::vector<std::pair<std::string, int>>& keyed) {
    std::sort(keyed.begin(), keyed.end());
    std::vector<int> ranks(keyed.size());
    int rank = -1;
    std::string_view last;
    bool first = true;
    for (const auto& [key, idx] : keyed) {
        if (first || key != last) {
            ++rank;
            last = key;
            first = false;
        }
        ranks[static_cast<size_t>(idx)] = rank;
    }
    return ranks;
}

std::vector<int> refine_ranks(const MolecularGraph& g, std::vector<int> ranks) {
    const int n = g.atom_count();
    int classes = 1 + *std::max_element(ranks.begin(), ranks.end());
    for (;;) {
        std::vector<std::pair<std::string, int>> keyed;
        keyed.reserve(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) {
            std::vector<std::pair<int, int>> nbrs;
            for (const auto& x : g.neighbors(i))
                nbrs.push_back({halves(x.order), ranks[static_cast<size_t>(x.atom)]});
            std::sort(nbrs.begin(), nbrs.end());
            std::string key = std::to_string(ranks[static_cast<size_t>(i)]);
            for (const auto& [h, r] : nbrs) {
                key += ',';
                key += std::to_string(h);
                key += ':';
                key += std::to_string(r);
            }
            keyed.push_back({std::move(key), i});
        }
        std::vector<int> next = dense_ranks(keyed);
        const int next_classes = 1 + *std::max_element(next.begin(), next.end());
        if (next_classes == classes) return next;
        classes = next_classes;
        ranks = std::move(next);
    }
}

std::vector<int> initial_ranks(const MolecularGraph& g) {
    const int n = g.atom_count();
    std::vector<std::pair<std::string, int>> keyed;
    keyed.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        const Atom& a = g.atom(i);
        char buf[64];
        std::snprintf(buf, sizeof buf, "%02d|%d|%+d|%02d|%02d|%02d",
                      static_cast<int>(a.element), a.aromatic ? 1 : 0, a.formal_charge,
                      g.hydrogen_count(i), g.degree(i), g.bond_halves_sum(i));
        keyed.push_back({buf, i});
    }
    return dense_ranks(keyed);
}

std::string canonical_from_ranks(const MolecularGraph& g, const std::vector<int>& ranks) {
    const int n = g.atom_count();
    int classes = 1 + *std::max_element(ranks.begin(), ranks.end());
    if (classes == n) return write_by_priority(g, ranks);

    // First ambiguous class (lowest rank value with > 1 member).
    int target_rank = -1;
    for (int r = 0; r < classes && target_rank < 0; ++r) {
        int count = 0;
        for (int i = 0; i < n; ++i) count += ranks[static_cast<size_t>(i)] == r;
        if (count > 1) target_rank = r;
    }
    std::string best;
    for (int a = 0; a < n; ++a) {
        if (ranks[static_cast<size_t>(a)] != target_rank) continue;
        std::vector<int> split(ranks.size());
        for (size_t i = 0; i < ranks.size(); ++i) split[i] = 2 * ranks[i] + 1;
        split[static_cast<size_t>(a)] -= 1;
        std::string cand = canonical_from_ranks(g, refine_ranks(g, std::move(split)));
        if (best.empty() || cand < best) best = std::move(cand);
    }
    return best;
}

}  // namespace

std::string write_smiles(const MolecularGraph& graph) { return canonical_key(graph); }

std::string write_smiles(const MolecularGraph& graph, std::span<const int> priority) {
    return write_by_priority(graph, priority);
}

std::string canonical_key(const MolecularGraph& graph) {
    if (graph.empty()) throw SmilesError(SmilesErrorKind::Syntax, 0, "empty graph has no key");
    return canonical_from_ranks(graph, refine_ranks(graph, initial_ranks(graph)));
}

// ---------------------------------------------------------------------------
// Descriptors

std::vector<int> smallest_ring_sizes(const MolecularGraph& g) {
    const int n = g.atom_count();
    std::vector<int> sizes(static_cast<size_t>(g.bond_count()), 0);
    for (int bi = 0; bi < g.bond_count(); ++bi) {
        const Bond& bond = g.bonds()[static_cast<size_t>(bi)];
        // BFS shortest path a..b avoiding the bond itself.
        std::vector<int> dist(static_cast<size_t>(n), -1);
        std::deque<int> queue;
        dist[static_cast<size_t>(bond.a)] = 0;
        queue.push_back(bond.a);
        while (!queue.empty() && dist[static_cast<size_t>(bond.b)] < 0) {
            const int v = queue.front();
            queue.pop_front();
            for (const auto& nb : g.neighbors(v)) {
                if (nb.bond_index == bi) continue;
                if (dist[static_cast<size_t>(nb.atom)] < 0) {
                    dist[static_cast<size_t>(nb.atom)] = dist[static_cast<size_t>(v)] + 1;
                    queue.push_back(nb.atom);
                }
            }
        }
        if (dist[static_cast<size_t>(bond.b)] >= 0) sizes[static_cast<size_t>(bi)] = dist[static_cast<size_t>(bond.b)] + 1;
    }
    return sizes;
}

Descriptors descriptors(const MolecularGraph& g) {
    Descriptors d;
    const int n = g.atom_count();
    d.heavy_atom_count = n;
    int aromatic = 0;
    for (int i = 0; i < n; ++i) {
        const Atom& a = g.atom(i);
        d.molecular_weight += atomic_mass(a.element) + hydrogen_mass() * g.hydrogen_count(i);
        if (a.element != Element::C) ++d.heteroatom_count;
        if (a.aromatic) ++aromatic;
        if (a.formal_charge != 0) d.has_charged_atom = true;
    }
    d.aromatic_atom_fraction = n > 0 ? static_cast<double>(aromatic) / n : 0.0;
    d.ring_count = g.bond_count() - n + g.connected_components();

    const std::vector<int> ring_sizes = smallest_ring_sizes(g);
    for (int s : ring_sizes) d.max_ring_size = std::max(d.max_ring_size, s);
    for (int bi = 0; bi < g.bond_count(); ++bi) {
        const Bond& b = g.bonds()[static_cast<size_t>(bi)];
        if (b.order != BondOrder::Single) continue;
        if (ring_sizes[static_cast<size_t>(bi)] != 0) continue;
        if (g.degree(b.a) >= 2 && g.degree(b.b) >= 2) ++d.rotatable_bond_count;
    }
    return d;
}

}  // namespace qdgen::mol
