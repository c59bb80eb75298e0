#include "qdgen/fingerprint.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <string>

namespace qdgen::mol {

namespace {

uint64_t fnv1a(const std::string& s) {
    uint64_t h = 1469598103934665603ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    return h;
}

char bond_char(BondOrder o) {
    switch (o) {
    case BondOrder::Single: return '-';
    case BondOrder::Double: return '=';
    case BondOrder::Triple: return '#';
    case BondOrder::Aromatic: return ':';
    }
    return '-';
}

std::string atom_label(const Atom& a) {
    std::string s(symbol(a.element));
    if (a.aromatic)
        for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (a.formal_charge > 0) s += '+';
    if (a.formal_charge < 0) s += '-';
    return s;
}

}  // namespace

Fingerprint::Fingerprint(int width) : width_(width) {
    if (width <= 0) throw std::invalid_argument("fingerprint width must be positive");
    blocks_.assign(static_cast<size_t>((width + 63) / 64), 0);
}

bool Fingerprint::test(int bit) const {
    return (blocks_[static_cast<size_t>(bit) / 64] >> (static_cast<size_t>(bit) % 64)) & 1u;
}

void Fingerprint::set(int bit) {
    uint64_t& block = blocks_[static_cast<size_t>(bit) / 64];
    const uint64_t mask = 1ULL << (static_cast<size_t>(bit) % 64);
    if (!(block & mask)) {
        block |= mask;
        ++n_set_;
    }
}

Fingerprint path_fingerprint(const MolecularGraph& g, int max_path_len, int width) {
    Fingerprint fp(width);
    const int n = g.atom_count();

    std::vector<int> path_atoms;
    std::vector<char> on_path(static_cast<size_t>(n), 0);
    std::string fwd, rev;

    // Emits the current path once, picking the smaller of the two directional
    // spellings so a path and its reverse land on the same bit.
    auto emit = [&] {
        fwd.clear();
        rev.clear();
        for (size_t k = 0; k < path_atoms.size(); ++k) {
            if (k > 0) {
                BondOrder order = BondOrder::Single;
                for (const auto& nb : g.neighbors(path_atoms[k - 1]))
                    if (nb.atom == path_atoms[k]) order = nb.order;
                fwd += bond_char(order);
            }
            fwd += atom_label(g.atom(path_atoms[k]));
        }
        for (size_t k = path_atoms.size(); k-- > 0;) {
            if (k + 1 < path_atoms.size()) {
                BondOrder order = BondOrder::Single;
                for (const auto& nb : g.neighbors(path_atoms[k]))
                    if (nb.atom == path_atoms[k + 1]) order = nb.order;
                rev += bond_char(order);
            }
            rev += atom_label(g.atom(path_atoms[k]));
        }
        const std::string& key = fwd <= rev ? fwd : rev;
        fp.set(static_cast<int>(fnv1a(key) % static_cast<uint64_t>(width)));
    };

    // DFS over simple paths from every start atom.
    auto extend = [&](auto&& self, int atom, int bonds_left) -> void {
        path_atoms.push_back(atom);
        on_path[static_cast<size_t>(atom)] = 1;
        emit();
        if (bonds_left > 0) {
            for (const auto& nb : g.neighbors(atom)) {
                if (!on_path[static_cast<size_t>(nb.atom)]) self(self, nb.atom, bonds_left - 1);
            }
        }
        on_path[static_cast<size_t>(atom)] = 0;
        path_atoms.pop_back();
    };
    for (int a = 0; a < n; ++a) extend(extend, a, max_path_len);
    return fp;
}

double tanimoto(const Fingerprint& a, const Fingerprint& b) {
    if (a.width() != b.width()) throw WidthMismatch("fingerprint widths differ");
    int64_t inter = 0, uni = 0;
    for (size_t i = 0; i < a.blocks().size(); ++i) {
        inter += std::popcount(a.blocks()[i] & b.blocks()[i]);
        uni += std::popcount(a.blocks()[i] | b.blocks()[i]);
    }
    if (uni == 0) return 1.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace qdgen::mol
