#pragma once

/**
 * Block structure of the diagonal algebra D = span(p_1..p_d), typed
 * generators, typed words and scalar-component tables.
 *
 * Block indices are 0-based in the C++ API and 1-based in JSON documents.
 * A word is a sequence of letters (generator, star flag); the letter a has
 * the type (row, col) of its generator and a* has the swapped type. A word
 * is chain-consistent when the column type of each letter equals the row
 * type of the next one; chain-broken words are zero products. Tables store
 * one complex scalar per square word: φ_{i0}(w) for moments and
 * c^{(i0)}(w) for cumulants, where i0 is the row type of the first letter.
 */

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "rectfree/error.hpp"

namespace rectfree {

using cplx = std::complex<double>;

class BlockStructure {
public:
    BlockStructure() = default;

    /// Validates positivity and Σρ = 1 within 1e-12.
    explicit BlockStructure(std::vector<double> rho) : rho_(std::move(rho)) {
        if (rho_.empty()) throw ValidationError("block structure needs at least one block");
        double sum = 0.0;
        for (double r : rho_) {
            if (!(r > 0.0) || r > 1.0)
                throw ValidationError("block weights must lie in (0,1], got " + std::to_string(r));
            sum += r;
        }
        if (std::abs(sum - 1.0) > 1e-12)
            throw ValidationError("block weights must sum to 1 (sum = " + std::to_string(sum) + ")");
    }

    int d() const { return static_cast<int>(rho_.size()); }
    double rho(int k) const { return rho_.at(static_cast<std::size_t>(k)); }
    const std::vector<double>& rho() const { return rho_; }

    friend bool operator==(const BlockStructure& a, const BlockStructure& b) { return a.rho_ == b.rho_; }

private:
    std::vector<double> rho_;
};

struct BlockType {
    int row = 0;
    int col = 0;
    bool square() const { return row == col; }
    friend bool operator==(const BlockType& a, const BlockType& b) { return a.row == b.row && a.col == b.col; }
};

struct GeneratorDecl {
    std::string name;
    int row = 0;  ///< 0-based block index
    int col = 0;  ///< 0-based block index
};

struct Letter {
    int gen = 0;
    bool star = false;
    friend bool operator==(const Letter& a, const Letter& b) { return a.gen == b.gen && a.star == b.star; }
};

using Word = std::vector<Letter>;

/// Compact hash key of a word: one byte per letter (2·gen + star).
inline std::string word_key(const Word& w) {
    std::string k(w.size(), '\0');
    for (std::size_t i = 0; i < w.size(); ++i) k[i] = static_cast<char>(2 * w[i].gen + (w[i].star ? 1 : 0));
    return k;
}

inline Word word_from_key(std::string_view k) {
    Word w(k.size());
    for (std::size_t i = 0; i < k.size(); ++i) {
        const int c = static_cast<unsigned char>(k[i]);
        w[i] = Letter{c / 2, (c % 2) != 0};
    }
    return w;
}

/// w* : reversed word with every star flag flipped.
inline Word word_adjoint(const Word& w) {
    Word out(w.rbegin(), w.rend());
    for (auto& l : out) l.star = !l.star;
    return out;
}

/// Cyclic rotation moving the first letter to the end.
inline Word word_rotate(const Word& w) {
    if (w.empty()) return w;
    Word out(w.begin() + 1, w.end());
    out.push_back(w.front());
    return out;
}

/// Ordering used for deterministic output and witness tie-breaks: by length, then key.
inline bool word_less(const Word& a, const Word& b) {
    if (a.size() != b.size()) return a.size() < b.size();
    return word_key(a) < word_key(b);
}

class Alphabet {
public:
    Alphabet() = default;

    Alphabet(BlockStructure structure, std::vector<GeneratorDecl> gens)
        : structure_(std::move(structure)), gens_(std::move(gens)) {
        if (gens_.size() > 120) throw CapacityError("at most 120 generators are supported");
        for (std::size_t i = 0; i < gens_.size(); ++i) {
            const auto& g = gens_[i];
            if (g.name.empty()) throw ValidationError("generator with empty name");
            if (g.name.back() == '*') throw ValidationError("generator name may not end with '*': " + g.name);
            if (g.row < 0 || g.row >= structure_.d() || g.col < 0 || g.col >= structure_.d())
                throw ValidationError("generator " + g.name + " has a block index outside [1," +
                                      std::to_string(structure_.d()) + "]");
            if (!index_.emplace(g.name, static_cast<int>(i)).second)
                throw UsageError("duplicate generator name: " + g.name);
        }
    }

    const BlockStructure& structure() const { return structure_; }
    const std::vector<GeneratorDecl>& generators() const { return gens_; }
    int size() const { return static_cast<int>(gens_.size()); }

    bool has(std::string_view name) const { return index_.count(std::string(name)) != 0; }

    int index_of(std::string_view name) const {
        auto it = index_.find(std::string(name));
        if (it == index_.end()) throw UsageError("unknown generator: " + std::string(name));
        return it->second;
    }

    BlockType type(const Letter& l) const {
        if (l.gen < 0 || l.gen >= size()) throw UsageError("letter references an undeclared generator");
        const auto& g = gens_[static_cast<std::size_t>(l.gen)];
        return l.star ? BlockType{g.col, g.row} : BlockType{g.row, g.col};
    }

    /// Type chain (i0, i1, ..., in) or nullopt for a zero product.
    std::optional<std::vector<int>> chain(const Word& w) const {
        std::vector<int> c;
        c.reserve(w.size() + 1);
        for (std::size_t t = 0; t < w.size(); ++t) {
            const BlockType bt = type(w[t]);
            if (t == 0)
                c.push_back(bt.row);
            else if (c.back() != bt.row)
                return std::nullopt;
            c.push_back(bt.col);
        }
        return c;
    }

    bool is_square(const Word& w) const {
        if (w.empty()) return false;
        auto c = chain(w);
        return c && c->front() == c->back();
    }

    Letter parse_letter(std::string_view s) const {
        bool star = !s.empty() && s.back() == '*';
        if (star) s.remove_suffix(1);
        return Letter{index_of(s), star};
    }

    Word parse(const std::vector<std::string>& letters) const {
        Word w;
        w.reserve(letters.size());
        for (const auto& s : letters) w.push_back(parse_letter(s));
        return w;
    }

    /// Whitespace-separated form, e.g. "a a* b".
    Word parse(std::string_view text) const {
        std::vector<std::string> parts;
        std::istringstream is{std::string(text)};
        std::string tok;
        while (is >> tok) parts.push_back(tok);
        return parse(parts);
    }

    std::string letter_name(const Letter& l) const {
        return gens_.at(static_cast<std::size_t>(l.gen)).name + (l.star ? "*" : "");
    }

    std::vector<std::string> letter_names(const Word& w) const {
        std::vector<std::string> out;
        out.reserve(w.size());
        for (const auto& l : w) out.push_back(letter_name(l));
        return out;
    }

    std::string format(const Word& w) const {
        std::string s;
        for (std::size_t i = 0; i < w.size(); ++i) {
            if (i) s += ' ';
            s += letter_name(w[i]);
        }
        return s;
    }

    /**
     * Every chain-consistent square word of length 1..max_len over the
     * letters accepted by `allow` (all letters by default), sorted by
     * word_less.
     */
    std::vector<Word> square_words(int max_len, const std::function<bool(const Letter&)>& allow = {}) const {
        std::vector<Letter> letters;
        for (int g = 0; g < size(); ++g)
            for (bool st : {false, true}) {
                Letter l{g, st};
                if (!allow || allow(l)) letters.push_back(l);
            }
        std::vector<Word> out;
        Word cur;
        std::function<void(int, int)> rec = [&](int start, int col) {
            if (!cur.empty() && col == start) out.push_back(cur);
            if (static_cast<int>(cur.size()) == max_len) return;
            for (const auto& l : letters) {
                const BlockType bt = type(l);
                if (bt.row != col) continue;
                cur.push_back(l);
                rec(start, bt.col);
                cur.pop_back();
            }
        };
        for (int i0 = 0; i0 < structure_.d(); ++i0) rec(i0, i0);
        std::sort(out.begin(), out.end(), word_less);
        return out;
    }

private:
    BlockStructure structure_;
    std::vector<GeneratorDecl> gens_;
    std::unordered_map<std::string, int> index_;
};

/// The type chain of w, or nullopt ("zero-product") when consecutive types mismatch.
inline std::optional<std::vector<int>> word_type_chain(const Word& w, const Alphabet& alphabet) {
    return alphabet.chain(w);
}

/// value · dvec[junction_type]: inserting diag(dvec) at a junction of the given type.
inline cplx apply_diagonal_insertion(cplx value, int junction_type, const std::vector<cplx>& dvec) {
    if (junction_type < 0 || junction_type >= static_cast<int>(dvec.size()))
        throw UsageError("insertion junction type outside [1,d]");
    return value * dvec[static_cast<std::size_t>(junction_type)];
}

enum class TableKind { moments, cumulants };

namespace detail {

class TableBase {
public:
    TableBase() = default;
    TableBase(Alphabet alphabet, int degree) : alphabet_(std::move(alphabet)), degree_(degree) {
        if (degree < 1) throw ValidationError("table degree must be at least 1");
    }

    const Alphabet& alphabet() const { return alphabet_; }
    const BlockStructure& structure() const { return alphabet_.structure(); }
    int degree() const { return degree_; }
    std::size_t size() const { return values_.size(); }

    /// Stores a value; the word must be square and no longer than the degree.
    void set(const Word& w, cplx v) {
        if (w.empty()) throw ValidationError("tables do not store the empty word");
        if (static_cast<int>(w.size()) > degree_)
            throw ValidationError("word '" + alphabet_.format(w) + "' exceeds the table degree " +
                                  std::to_string(degree_));
        if (!alphabet_.is_square(w))
            throw ValidationError("word '" + alphabet_.format(w) + "' is not a square chain-consistent word");
        values_[word_key(w)] = v;
    }

    std::optional<cplx> find(const Word& w) const { return find_key(word_key(w)); }

    std::optional<cplx> find_key(const std::string& k) const {
        auto it = values_.find(k);
        if (it == values_.end()) return std::nullopt;
        return it->second;
    }

    bool contains(const Word& w) const { return values_.count(word_key(w)) != 0; }

    cplx at(const Word& w) const {
        auto v = find(w);
        if (!v) throw UsageError("table has no entry for word '" + alphabet_.format(w) + "'");
        return *v;
    }

    /// Stored words sorted by word_less.
    std::vector<Word> words() const {
        std::vector<Word> out;
        out.reserve(values_.size());
        for (const auto& [k, v] : values_) out.push_back(word_from_key(k));
        std::sort(out.begin(), out.end(), word_less);
        return out;
    }

    const std::unordered_map<std::string, cplx>& raw() const { return values_; }

    /// Square words up to the degree that are absent from the table.
    std::vector<Word> missing_words() const {
        std::vector<Word> out;
        for (const auto& w : alphabet_.square_words(degree_))
            if (!contains(w)) out.push_back(w);
        return out;
    }

private:
    Alphabet alphabet_;
    int degree_ = 0;
    std::unordered_map<std::string, cplx> values_;
};

}  // namespace detail

/// φ_{i0}(w) for square words w.
class ScalarMomentTable : public detail::TableBase {
public:
    using TableBase::TableBase;
    static constexpr TableKind kind = TableKind::moments;
};

/// c^{(i0)}(a_1 ⊗ ... ⊗ a_n) for square words a_1...a_n.
class ScalarCumulantTable : public detail::TableBase {
public:
    using TableBase::TableBase;
    static constexpr TableKind kind = TableKind::cumulants;
};

/// Fills a table with fn(w) on every square word up to `degree`.
template <class Table>
Table make_table(const Alphabet& alphabet, int degree, const std::function<cplx(const Word&)>& fn) {
    Table t(alphabet, degree);
    for (const auto& w : alphabet.square_words(degree)) t.set(w, fn(w));
    return t;
}

struct TableViolation {
    std::string kind;  ///< "rho-cyclicity" or "star-symmetry"
    Word word;
    Word partner;
    double discrepancy = 0.0;
    std::string description;
};

/// Absolute tolerance of validate_table, relative to max(1, |value|).
inline constexpr double kTableTolerance = 1e-10;

/**
 * Checks ρ-cyclicity ρ_{i0}·v(a1…an) = ρ_{i1}·v(a2…an a1) and star symmetry
 * v(w*) = conj v(w) on every stored pair. Both identities hold for moment and
 * cumulant tables alike. Each offending pair is reported once.
 */
template <class Table>
std::vector<TableViolation> validate_table(const Table& t, double tol = kTableTolerance) {
    std::vector<TableViolation> out;
    const auto& A = t.alphabet();
    const auto& S = t.structure();
    std::set<std::pair<std::string, std::string>> reported;
    for (const auto& w : t.words()) {
        const cplx v = *t.find(w);
        const auto ch = A.chain(w);
        const Word rot = word_rotate(w);
        if (auto vr = t.find(rot); vr && word_key(rot) != word_key(w)) {
            const cplx lhs = S.rho(ch->front()) * v;
            const cplx rhs = S.rho((*ch)[1]) * *vr;
            const double disc = std::abs(lhs - rhs);
            std::string k1 = word_key(w), k2 = word_key(rot);
            if (k2 < k1) std::swap(k1, k2);
            const std::pair<std::string, std::string> pair_key{k1, k2};
            if (disc > tol * std::max({1.0, std::abs(lhs), std::abs(rhs)}) && reported.insert(pair_key).second)
                out.push_back({"rho-cyclicity", w, rot, disc,
                               "rho-cyclicity fails for ('" + A.format(w) + "','" + A.format(rot) +
                                   "'): discrepancy " + std::to_string(disc)});
        }
        const Word adj = word_adjoint(w);
        if (word_key(w) <= word_key(adj)) {
            if (auto va = t.find(adj)) {
                const double disc = std::abs(*va - std::conj(v));
                if (disc > tol * std::max({1.0, std::abs(v)}))
                    out.push_back({"star-symmetry", w, adj, disc,
                                   "star symmetry fails for ('" + A.format(w) + "','" + A.format(adj) +
                                       "'): discrepancy " + std::to_string(disc)});
            }
        }
    }
    return out;
}

}  // namespace rectfree
