#pragma once

/**
 * Moment/cumulant transforms with amalgamation over D in scalar components.
 *
 * For a square word a_1…a_n with type chain i_0..i_n and σ ∈ NC(n), a block
 * V = {k_1<…<k_m} of σ is admissible when its sub-word is square
 * (row type of a_{k_1} equals column type of a_{k_m}); its factor is then the
 * table value of the sub-word, read at superscript i_{k_m}. Any
 * non-admissible block makes the whole term vanish. With these flat block
 * products
 *
 *   c(w) = Σ_σ μ(σ,1_n) Π_V m(w|V)      and      m(w) = Σ_σ Π_V c(w|V).
 */

#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "rectfree/dblock.hpp"
#include "rectfree/error.hpp"
#include "rectfree/ncpart.hpp"

namespace rectfree {

/// Largest word length accepted by the transforms (Möbius column cost grows as Catalan(n)^2).
inline constexpr int kMaxTransformDegree = 10;

namespace detail {

/// Sub-word of w made of the positions set in `mask`.
inline Word sub_word(const Word& w, std::uint32_t mask) {
    Word out;
    for (std::size_t i = 0; i < w.size(); ++i)
        if (mask & (1u << i)) out.push_back(w[i]);
    return out;
}

/**
 * Σ over NC(n) of weight(σ)·Π_V value(w|V), skipping partitions with a
 * non-admissible block. `value` is only queried for admissible sub-words that
 * occur in a partition whose blocks are all admissible.
 */
inline cplx nc_block_sum(const Word& w, const Alphabet& A, const std::function<cplx(const Word&)>& value,
                         bool mobius_weights, int max_degree = kMaxTransformDegree) {
    const int n = static_cast<int>(w.size());
    if (n == 0) throw UsageError("transforms are undefined on the empty word");
    if (n > max_degree)
        throw CapacityError("word length " + std::to_string(n) + " exceeds the transform ceiling " +
                            std::to_string(max_degree));
    std::vector<BlockType> types(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) types[i] = A.type(w[i]);

    const std::uint32_t full = (n == 32) ? 0xffffffffu : ((1u << n) - 1u);
    // admissible[mask]: sub-word chain-consistent and square.
    std::vector<char> admissible(static_cast<std::size_t>(full) + 1, 0);
    for (std::uint32_t mask = 1; mask <= full; ++mask) {
        int first = -1, prev = -1;
        bool ok = true;
        for (int i = 0; i < n && ok; ++i) {
            if (!(mask & (1u << i))) continue;
            if (first < 0)
                first = i;
            else if (types[static_cast<std::size_t>(prev)].col != types[static_cast<std::size_t>(i)].row)
                ok = false;
            prev = i;
        }
        admissible[mask] = ok && types[static_cast<std::size_t>(first)].row ==
                                     types[static_cast<std::size_t>(prev)].col;
    }
    std::vector<std::optional<cplx>> cache(static_cast<std::size_t>(full) + 1);
    const NCTable& nc = nc_table(n, mobius_weights);
    // Extended-precision accumulation: the signed Möbius sums cancel heavily
    // when cumulants are large compared with the moments.
    using wide = std::complex<long double>;
    wide total = 0.0L;
    for (std::size_t p = 0; p < nc.blocks.size(); ++p) {
        const auto& blocks = nc.blocks[p];
        bool ok = true;
        for (auto b : blocks)
            if (!admissible[b]) {
                ok = false;
                break;
            }
        if (!ok) continue;
        wide prod = mobius_weights ? wide(static_cast<long double>(nc.mobius_to_top[p])) : wide(1.0L);
        for (auto b : blocks) {
            auto& slot = cache[b];
            if (!slot) slot = value(sub_word(w, b));
            prod *= wide(*slot);
            if (prod == wide(0.0L)) break;
        }
        total += prod;
    }
    return cplx(static_cast<double>(total.real()), static_cast<double>(total.imag()));
}

template <class Table>
cplx lookup_or_throw(const Table& t, const Word& w, const char* what) {
    auto v = t.find(w);
    if (!v)
        throw ValidationError(std::string(what) + " table is incomplete: missing word '" + t.alphabet().format(w) +
                              "'");
    return *v;
}

template <class Table>
void require_valid(const Table& t, const char* what) {
    auto viol = validate_table(t);
    if (!viol.empty())
        throw ValidationError(std::string(what) + " table is invalid: " + viol.front().description + " (" +
                              std::to_string(viol.size()) + " violation(s))");
}

}  // namespace detail

/// Cumulant c^{(i0)}(w) of a single square word from a moment table.
inline cplx cumulant_of_word(const ScalarMomentTable& m, const Word& w) {
    return detail::nc_block_sum(
        w, m.alphabet(), [&](const Word& s) { return detail::lookup_or_throw(m, s, "moment"); }, true);
}

/// Moment φ_{i0}(w) of a single square word from a cumulant table.
inline cplx moment_of_word(const ScalarCumulantTable& c, const Word& w) {
    return detail::nc_block_sum(
        w, c.alphabet(), [&](const Word& s) { return detail::lookup_or_throw(c, s, "cumulant"); }, false);
}

/// c = Σ_σ μ(σ,1_n) E_σ on every stored word of length ≤ degree (default: table degree).
inline ScalarCumulantTable moments_to_cumulants(const ScalarMomentTable& m, int degree = -1) {
    detail::require_valid(m, "moment");
    const int r = degree < 0 ? m.degree() : std::min(degree, m.degree());
    if (r > kMaxTransformDegree)
        throw CapacityError("transform degree " + std::to_string(r) + " exceeds ceiling " +
                            std::to_string(kMaxTransformDegree));
    ScalarCumulantTable out(m.alphabet(), r);
    for (const auto& w : m.words())
        if (static_cast<int>(w.size()) <= r) out.set(w, cumulant_of_word(m, w));
    return out;
}

/// m = Σ_σ c_σ on every stored word of length ≤ degree (default: table degree).
inline ScalarMomentTable cumulants_to_moments(const ScalarCumulantTable& c, int degree = -1) {
    detail::require_valid(c, "cumulant");
    const int r = degree < 0 ? c.degree() : std::min(degree, c.degree());
    if (r > kMaxTransformDegree)
        throw CapacityError("transform degree " + std::to_string(r) + " exceeds ceiling " +
                            std::to_string(kMaxTransformDegree));
    ScalarMomentTable out(c.alphabet(), r);
    for (const auto& w : c.words())
        if (static_cast<int>(w.size()) <= r) out.set(w, moment_of_word(c, w));
    return out;
}

struct FreenessReport {
    double max_mixed_cumulant = 0.0;
    std::optional<Word> witness;  ///< word attaining the maximum (smallest by word_less on ties)
    std::string witness_text;
    std::size_t mixed_words = 0;
};

/**
 * Largest |c(w)| over words of length ≤ degree whose letters touch at least
 * two groups. `group_of[g]` is the group of generator g.
 */
inline FreenessReport is_free_with_amalgamation(const ScalarMomentTable& m, const std::vector<int>& group_of,
                                                int degree) {
    const auto& A = m.alphabet();
    if (static_cast<int>(group_of.size()) != A.size())
        throw UsageError("grouping must assign a group to every generator");
    detail::require_valid(m, "moment");
    FreenessReport rep;
    for (const auto& w : m.words()) {
        if (static_cast<int>(w.size()) > degree) continue;
        bool mixed = false;
        for (const auto& l : w)
            if (group_of[static_cast<std::size_t>(l.gen)] != group_of[static_cast<std::size_t>(w[0].gen)]) mixed = true;
        if (!mixed) continue;
        ++rep.mixed_words;
        const double v = std::abs(cumulant_of_word(m, w));
        if (!rep.witness || v > rep.max_mixed_cumulant) {
            rep.max_mixed_cumulant = v;
            rep.witness = w;
        }
    }
    if (rep.witness) rep.witness_text = A.format(*rep.witness);
    return rep;
}

/**
 * Moments of a family made of D-free marginal groups: the joint cumulant of a
 * word is the marginal cumulant when all letters belong to one marginal and 0
 * otherwise. Evaluates single words lazily with memoization.
 */
class FreeJointPredictor {
public:
    explicit FreeJointPredictor(std::vector<ScalarCumulantTable> marginals) : marginals_(std::move(marginals)) {
        if (marginals_.empty()) throw UsageError("free_joint_moments needs at least one marginal");
        std::vector<GeneratorDecl> gens;
        std::unordered_map<std::string, int> seen;
        for (std::size_t k = 0; k < marginals_.size(); ++k) {
            const auto& mk = marginals_[k];
            if (!(mk.structure() == marginals_[0].structure()))
                throw UsageError("marginals must share one block structure");
            detail::require_valid(mk, "marginal cumulant");
            for (int g = 0; g < mk.alphabet().size(); ++g) {
                const auto& decl = mk.alphabet().generators()[static_cast<std::size_t>(g)];
                if (!seen.emplace(decl.name, static_cast<int>(k)).second)
                    throw UsageError("generator '" + decl.name + "' appears in two marginals");
                owner_.push_back({static_cast<int>(k), g});
                gens.push_back(decl);
            }
        }
        alphabet_ = Alphabet(marginals_[0].structure(), gens);
    }

    const Alphabet& alphabet() const { return alphabet_; }
    const std::vector<ScalarCumulantTable>& marginals() const { return marginals_; }

    /// Joint cumulant: marginal value on pure words, 0 on mixed words.
    cplx joint_cumulant(const Word& w) const {
        const int k = owner_.at(static_cast<std::size_t>(w.front().gen)).first;
        Word local;
        local.reserve(w.size());
        for (const auto& l : w) {
            const auto& [mk, g] = owner_.at(static_cast<std::size_t>(l.gen));
            if (mk != k) return 0.0;
            local.push_back(Letter{g, l.star});
        }
        return detail::lookup_or_throw(marginals_[static_cast<std::size_t>(k)], local, "marginal cumulant");
    }

    /// φ_{i0}(w) for a word over the joint alphabet; chain-broken or non-square words give 0.
    cplx moment(const Word& w) {
        if (!alphabet_.is_square(w)) return 0.0;
        const std::string key = word_key(w);
        if (auto it = memo_.find(key); it != memo_.end()) return it->second;
        const cplx v =
            detail::nc_block_sum(w, alphabet_, [&](const Word& s) { return joint_cumulant(s); }, false);
        memo_.emplace(key, v);
        return v;
    }

    /// Joint moment table on all square words up to `degree` accepted by `filter`.
    ScalarMomentTable table(int degree, const std::function<bool(const Word&)>& filter = {}) {
        ScalarMomentTable out(alphabet_, degree);
        for (const auto& w : alphabet_.square_words(degree))
            if (!filter || filter(w)) out.set(w, moment(w));
        return out;
    }

private:
    std::vector<ScalarCumulantTable> marginals_;
    Alphabet alphabet_;
    std::vector<std::pair<int, int>> owner_;  // joint generator -> (marginal, local generator)
    std::unordered_map<std::string, cplx> memo_;
};

/// Joint moments of D-free marginals (mixed cumulants set to zero).
inline ScalarMomentTable free_joint_moments(const std::vector<ScalarCumulantTable>& marginals, int degree,
                                            const std::function<bool(const Word&)>& filter = {}) {
    FreeJointPredictor pred(marginals);
    return pred.table(degree, filter);
}

/**
 * Cumulants of (x_1+…+x_n)/√n for free copies x_i with cumulant table c:
 * every degree-m entry is multiplied by n^{1−m/2}.
 */
inline ScalarCumulantTable clt_scaled_cumulants(const ScalarCumulantTable& c, long long n) {
    if (n < 1) throw PreconditionError("clt_scaled_cumulants needs n >= 1");
    ScalarCumulantTable out(c.alphabet(), c.degree());
    for (const auto& w : c.words()) {
        const cplx v = *c.find(w);
        if (w.size() == 1 && std::abs(v) > 1e-12)
            throw PreconditionError("clt_scaled_cumulants requires centered input: c1('" + c.alphabet().format(w) +
                                    "') != 0");
        const double m = static_cast<double>(w.size());
        out.set(w, v * std::pow(static_cast<double>(n), 1.0 - m / 2.0));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Named tables
// ---------------------------------------------------------------------------

/**
 * D-circular compression X of type (k,l): c2^{(k)}(X⊗X*) = s·ρ_l,
 * c2^{(l)}(X*⊗X) = s·ρ_k, every other cumulant 0. The limit of a Ginibre
 * block p_k M p_l with entry variance 1/n corresponds to s = 1.
 */
inline ScalarCumulantTable circular_block_cumulants(const BlockStructure& S, const std::string& name, int k, int l,
                                                    int degree, double s = 1.0) {
    Alphabet A(S, {GeneratorDecl{name, k, l}});
    return make_table<ScalarCumulantTable>(A, degree, [&](const Word& w) -> cplx {
        if (w.size() != 2 || w[0].star == w[1].star) return 0.0;
        return w[0].star ? s * S.rho(k) : s * S.rho(l);
    });
}

/**
 * Cumulants of b of type (k,l), ρ_k ≤ ρ_l, whose alternating cumulants are
 * (λ,0,0,…) at superscript k with λ = ρ_l/ρ_k; then c2^{(l)}(b*⊗b) = 1.
 */
inline ScalarCumulantTable mp_block_cumulants(const BlockStructure& S, const std::string& name, int k, int l,
                                              int degree, double scale = 1.0) {
    return circular_block_cumulants(S, name, k, l, degree, scale / S.rho(k));
}

/// Compression p_k X p_k of a D-semicircular X with covariance s·φ: c2^{(k)} = s·ρ_k on every length-2 word.
inline ScalarCumulantTable semicircular_block_cumulants(const BlockStructure& S, const std::string& name, int k,
                                                        int degree, double s = 1.0) {
    Alphabet A(S, {GeneratorDecl{name, k, k}});
    return make_table<ScalarCumulantTable>(A, degree,
                                           [&](const Word& w) -> cplx { return w.size() == 2 ? s * S.rho(k) : 0.0; });
}

/// Haar unitary U of type (k,k): φ_k(w) = 1 when #U = #U* in w, else 0.
inline ScalarMomentTable haar_unitary_moments(const BlockStructure& S, const std::string& name, int k, int degree) {
    Alphabet A(S, {GeneratorDecl{name, k, k}});
    return make_table<ScalarMomentTable>(A, degree, [&](const Word& w) -> cplx {
        int net = 0;
        for (const auto& l : w) net += l.star ? -1 : 1;
        return net == 0 ? 1.0 : 0.0;
    });
}

/// Self-adjoint symmetry B of type (k,k) with B² = p_k and φ_k(B) = 0.
inline ScalarMomentTable symmetry_moments(const BlockStructure& S, const std::string& name, int k, int degree) {
    Alphabet A(S, {GeneratorDecl{name, k, k}});
    return make_table<ScalarMomentTable>(A, degree,
                                         [&](const Word& w) -> cplx { return w.size() % 2 == 0 ? 1.0 : 0.0; });
}

}  // namespace rectfree
