#pragma once

/**
 * Conjugate variables and the rectangular free Fisher information at the
 * level of scalar moments.
 *
 * A family of letters L (each generator a and its adjoint a*) has conjugate
 * variables ξ_L of type (c(L), r(L)) when, for every square word ξ_L w with
 * w = w_1…w_n over the family,
 *
 *   φ_{r(ξ)}(ξ_L w) = Σ_m δ(L, w_m) φ_{c(ξ)}(w_1…w_{m−1}) φ_{r(ξ)}(w_{m+1}…w_n),
 *
 * with φ(∅) = 1. Everything is checked up to a finite word length r, so
 * "a conjugate system exists" means "the relations hold up to degree r".
 *
 * The joint table stores a-only words, words with a single ξ letter in first
 * position, and the norm words ξξ* and ξ*ξ. Only the letters bound to a
 * member are ξ letters; the adjoint member, if not bound explicitly, uses
 * ξ_{L*} = (ρ_{r(L)}/ρ_{c(L)})·ξ_L*.
 */

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rectfree/cumulant.hpp"
#include "rectfree/dblock.hpp"
#include "rectfree/error.hpp"
#include "rectfree/measures.hpp"

namespace rectfree {

/// Default word length up to which conjugate relations are checked.
inline constexpr int kDefaultFisherDegree = 8;
/// Largest relation violation still counted as a conjugate system.
inline constexpr double kConjugateTolerance = 1e-8;

/// Binds the generator `xi` to the family letter `target` ("a" or "a*").
struct XiBinding {
    std::string xi;
    std::string target;
};

/**
 * Joint moment table of a family and its candidate conjugate variables.
 * Construction checks the type discipline and the shape of the stored words.
 */
class ConjugateCandidate {
public:
    /// One family letter with its conjugate written as coeff·xi.
    struct Member {
        Letter letter;
        Letter xi;
        double coeff = 1.0;
        bool derived = false;  ///< true when obtained by star pairing
    };

    ConjugateCandidate(ScalarMomentTable joint, std::vector<XiBinding> bindings)
        : joint_(std::move(joint)), bindings_(std::move(bindings)) {
        const auto& A = joint_.alphabet();
        const auto& S = A.structure();
        is_xi_.assign(static_cast<std::size_t>(A.size()), false);
        if (bindings_.empty()) throw UsageError("a conjugate candidate needs at least one xi binding");
        std::vector<std::pair<Letter, Letter>> explicit_pairs;  // (target, xi letter)
        for (const auto& b : bindings_) {
            if (!A.has(b.xi)) throw UsageError("unknown xi generator '" + b.xi + "'");
            const int g = A.index_of(b.xi);
            if (is_xi_[static_cast<std::size_t>(g)]) throw UsageError("xi generator '" + b.xi + "' bound twice");
            is_xi_[static_cast<std::size_t>(g)] = true;
            explicit_pairs.push_back({Letter{}, Letter{g, false}});
        }
        for (std::size_t i = 0; i < bindings_.size(); ++i) {
            const Letter target = A.parse_letter(bindings_[i].target);
            if (is_xi_[static_cast<std::size_t>(target.gen)])
                throw UsageError("xi generator '" + bindings_[i].xi + "' is bound to another xi letter");
            const BlockType tt = A.type(target), xt = A.type(explicit_pairs[i].second);
            if (xt.row != tt.col || xt.col != tt.row)
                throw ValidationError("xi generator '" + bindings_[i].xi + "' must have type (" +
                                      std::to_string(tt.col + 1) + "," + std::to_string(tt.row + 1) +
                                      ") to pair with '" + bindings_[i].target + "'");
            for (std::size_t j = 0; j < i; ++j)
                if (explicit_pairs[j].first == target)
                    throw UsageError("letter '" + bindings_[i].target + "' has two xi bindings");
            explicit_pairs[i].first = target;
        }
        for (int g = 0; g < A.size(); ++g) {
            if (is_xi_[static_cast<std::size_t>(g)]) continue;
            family_.push_back(g);
            for (bool st : {false, true}) {
                const Letter L{g, st};
                const Letter Ls{g, !st};
                Member m{L, {}, 1.0, false};
                bool found = false;
                for (const auto& [t, x] : explicit_pairs)
                    if (t == L) {
                        m.xi = x;
                        found = true;
                    }
                if (!found) {
                    for (const auto& [t, x] : explicit_pairs)
                        if (t == Ls) {
                            const BlockType bt = A.type(Ls);
                            m.xi = Letter{x.gen, true};
                            m.coeff = S.rho(bt.row) / S.rho(bt.col);
                            m.derived = true;
                            found = true;
                        }
                }
                if (!found)
                    throw UsageError("no xi binding for '" + A.letter_name(L) + "' or its adjoint");
                members_.push_back(m);
            }
        }
        if (family_.empty()) throw UsageError("the candidate has no family generators");
        check_word_shapes();
        detail::require_valid(joint_, "joint moment");
    }

    const ScalarMomentTable& joint() const { return joint_; }
    const Alphabet& alphabet() const { return joint_.alphabet(); }
    const std::vector<XiBinding>& bindings() const { return bindings_; }
    const std::vector<Member>& members() const { return members_; }
    /// Generator indices of the family (non-xi generators).
    const std::vector<int>& family() const { return family_; }
    bool is_xi(int gen) const { return is_xi_.at(static_cast<std::size_t>(gen)); }
    bool is_xi(const Letter& l) const { return is_xi(l.gen); }

    /// φ_{i0}(w) for an a-only word; 1 on the empty word.
    double family_moment(const Word& w) const {
        if (w.empty()) return 1.0;
        return detail::lookup_or_throw(joint_, w, "joint moment").real();
    }

    /// φ(ξξ*) = ρ_{r(ξ)}·φ_{r(ξ)}(ξξ*) for the xi letter x, from either norm word.
    double norm_squared(const Letter& x) const {
        const auto& A = alphabet();
        const Word xx{x, Letter{x.gen, !x.star}};
        const Word rev{Letter{x.gen, !x.star}, x};
        if (auto v = joint_.find(xx)) return A.structure().rho(A.type(x).row) * v->real();
        if (auto v = joint_.find(rev)) return A.structure().rho(A.type(rev[0]).row) * v->real();
        throw ValidationError("joint table has no norm word for '" + A.letter_name(x) + "'");
    }

private:
    void check_word_shapes() const {
        const auto& A = alphabet();
        for (const auto& w : joint_.words()) {
            int count = 0;
            for (const auto& l : w) count += is_xi(l) ? 1 : 0;
            if (count == 0) continue;
            const bool norm = w.size() == 2 && is_xi(w[0]) && w[1].gen == w[0].gen && w[1].star != w[0].star;
            if (norm) continue;
            if (count > 1)
                throw UsageError("word '" + A.format(w) +
                                 "' has more than one xi letter; conjugate relations are linear in xi");
            if (!is_xi(w[0]))
                throw UsageError("word '" + A.format(w) + "' has its xi letter outside the first position");
        }
    }

    ScalarMomentTable joint_;
    std::vector<XiBinding> bindings_;
    std::vector<bool> is_xi_;
    std::vector<int> family_;
    std::vector<Member> members_;
};

/// Which of the three equivalent formulations of the relations to evaluate.
enum class RelationForm { moments, expectations, cumulants };

inline const char* to_string(RelationForm f) {
    switch (f) {
        case RelationForm::moments: return "i";
        case RelationForm::expectations: return "ii";
        case RelationForm::cumulants: return "iii";
    }
    return "?";
}

struct RelationReport {
    RelationForm form = RelationForm::moments;
    int degree = 0;
    double max_violation = 0.0;
    std::string witness;          ///< word ξ_L w attaining the maximum ("" when none was checked)
    std::size_t relations = 0;    ///< number of (member, word) pairs checked
};

namespace detail {

/// Every a-only word w with (x w) square and 1 + |w| ≤ degree.
inline std::vector<Word> relation_words(const ConjugateCandidate& c, const Letter& x, int degree) {
    const auto& A = c.alphabet();
    std::vector<Letter> letters;
    for (int g : c.family())
        for (bool st : {false, true}) letters.push_back(Letter{g, st});
    const BlockType xt = A.type(x);
    std::vector<Word> out;
    Word cur;
    std::function<void(int)> rec = [&](int col) {
        if (col == xt.row) out.push_back(cur);
        if (static_cast<int>(cur.size()) + 1 == degree) return;
        for (const auto& l : letters) {
            const BlockType bt = A.type(l);
            if (bt.row != col) continue;
            cur.push_back(l);
            rec(bt.col);
            cur.pop_back();
        }
    };
    rec(xt.col);
    return out;
}

/// E-vector of an a-only word over D = C^d: φ_{i0}(w)·p_{i0}, or the unit for ∅.
inline std::vector<double> expectation_vector(const ConjugateCandidate& c, const Word& w) {
    const auto& A = c.alphabet();
    const int d = A.structure().d();
    if (w.empty()) return std::vector<double>(static_cast<std::size_t>(d), 1.0);
    std::vector<double> e(static_cast<std::size_t>(d), 0.0);
    e[static_cast<std::size_t>(A.type(w[0]).row)] = c.family_moment(w);
    return e;
}

}  // namespace detail

/**
 * Largest violation of the conjugate relations over all members and all
 * words of total length ≤ degree, evaluated in the requested form:
 * moments (scalar identity above), expectations (D-valued identity with the
 * coordinate swap η between r(ξ) and c(ξ)), or cumulants
 * (c_{n+1}(ξ_L, w_1, …, w_n) = δ_{n,1}δ(L, w_1)).
 */
inline RelationReport check_conjugate_relations(const ConjugateCandidate& c, int degree = kDefaultFisherDegree,
                                                RelationForm form = RelationForm::moments) {
    if (degree < 1) throw PreconditionError("relation degree must be at least 1");
    if (degree > c.joint().degree())
        throw PreconditionError("relation degree " + std::to_string(degree) + " exceeds the joint table degree " +
                                std::to_string(c.joint().degree()));
    if (form == RelationForm::cumulants && degree > kMaxTransformDegree)
        throw CapacityError("cumulant form is limited to degree " + std::to_string(kMaxTransformDegree));
    const auto& A = c.alphabet();
    const int d = A.structure().d();
    RelationReport rep;
    rep.form = form;
    rep.degree = degree;
    for (const auto& mem : c.members()) {
        const BlockType xt = A.type(mem.xi);
        const int r_xi = xt.row, c_xi = xt.col;
        for (const auto& w : detail::relation_words(c, mem.xi, degree)) {
            Word xw{mem.xi};
            xw.insert(xw.end(), w.begin(), w.end());
            const std::size_t n = w.size();
            double viol = 0.0;
            if (form == RelationForm::moments) {
                const double lhs = mem.coeff * detail::lookup_or_throw(c.joint(), xw, "joint moment").real();
                double rhs = 0.0;
                for (std::size_t m = 0; m < n; ++m) {
                    if (!(w[m] == mem.letter)) continue;
                    const Word pre(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(m));
                    const Word suf(w.begin() + static_cast<std::ptrdiff_t>(m) + 1, w.end());
                    rhs += c.family_moment(pre) * c.family_moment(suf);
                }
                viol = std::abs(lhs - rhs);
            } else if (form == RelationForm::expectations) {
                std::vector<double> lhs(static_cast<std::size_t>(d), 0.0);
                lhs[static_cast<std::size_t>(r_xi)] =
                    mem.coeff * detail::lookup_or_throw(c.joint(), xw, "joint moment").real();
                std::vector<double> rhs(static_cast<std::size_t>(d), 0.0);
                if (n == 1) {
                    if (w[0] == mem.letter) rhs[static_cast<std::size_t>(r_xi)] = 1.0;
                } else if (n >= 2) {
                    for (std::size_t m = 0; m < n; ++m) {
                        if (!(w[m] == mem.letter)) continue;
                        auto pre = detail::expectation_vector(
                            c, Word(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(m)));
                        std::swap(pre[static_cast<std::size_t>(r_xi)], pre[static_cast<std::size_t>(c_xi)]);
                        const auto suf = detail::expectation_vector(
                            c, Word(w.begin() + static_cast<std::ptrdiff_t>(m) + 1, w.end()));
                        for (int i = 0; i < d; ++i)
                            rhs[static_cast<std::size_t>(i)] +=
                                pre[static_cast<std::size_t>(i)] * suf[static_cast<std::size_t>(i)];
                    }
                }
                for (int i = 0; i < d; ++i)
                    viol = std::max(viol, std::abs(lhs[static_cast<std::size_t>(i)] - rhs[static_cast<std::size_t>(i)]));
            } else {
                const double lhs = mem.coeff * cumulant_of_word(c.joint(), xw).real();
                const double rhs = (n == 1 && w[0] == mem.letter) ? 1.0 : 0.0;
                viol = std::abs(lhs - rhs);
            }
            ++rep.relations;
            if (rep.relations == 1 || viol > rep.max_violation) {
                rep.max_violation = viol;
                rep.witness = A.format(xw);
            }
        }
    }
    return rep;
}

/// Φ_r of a candidate, or the +∞ sentinel with the reason in `provenance`.
struct FisherValue {
    ExtReal value;
    std::string provenance;
    RelationReport relations;
};

/**
 * Φ_r = Σ_L coeff_L²·φ(ξξ*) over the family members when the relations hold
 * up to `degree` within `tol`; otherwise +∞ ("no conjugate system at this
 * degree"). For one element of type (k,l) this is (1 + ρ_k²/ρ_l²)·φ(ξξ*).
 */
inline FisherValue fisher_info(const ConjugateCandidate& c, int degree = kDefaultFisherDegree,
                               double tol = kConjugateTolerance) {
    FisherValue out;
    out.relations = check_conjugate_relations(c, degree, RelationForm::moments);
    if (out.relations.max_violation > tol) {
        std::ostringstream os;
        os << "no conjugate system at degree " << degree << ": max violation " << out.relations.max_violation
           << " at '" << out.relations.witness << "'";
        out.value = ExtReal::pos_infinity();
        out.provenance = os.str();
        return out;
    }
    double phi = 0.0;
    for (const auto& m : c.members()) phi += m.coeff * m.coeff * c.norm_squared(m.xi);
    out.value = ExtReal(phi);
    std::ostringstream os;
    os << "conjugate relations hold to degree " << degree << " (max violation " << out.relations.max_violation
       << ")";
    out.provenance = os.str();
    return out;
}

/// Generator names used by the simple-element constructions.
struct ConjugateNames {
    std::string a = "a";
    std::string xi = "xi_a";
    std::string partner = "xi_astar";  ///< explicit conjugate of a*, when one is given
};

namespace detail {

inline void check_simple_element(const BlockStructure& S, int k, int l) {
    if (k < 0 || l < 0 || k >= S.d() || l >= S.d()) throw ValidationError("block index out of range");
    if (k == l) throw PreconditionError("simple-element conjugates need k != l");
}

}  // namespace detail

/**
 * Moments of a simple element a of type (k,l), k ≠ l, from the moments
 * m_n = φ_k((aa*)^n) (m_0 = 1): φ_k((aa*)^n) = m_n and
 * φ_l((a*a)^n) = (ρ_k/ρ_l)·m_n, on every square word up to `degree`.
 */
inline ScalarMomentTable simple_element_moments(const BlockStructure& S, int k, int l, const std::vector<double>& m,
                                                int degree, const std::string& name = "a") {
    detail::check_simple_element(S, k, l);
    if (static_cast<int>(m.size()) <= degree / 2)
        throw PreconditionError("need the moments m_0..m_" + std::to_string(degree / 2));
    Alphabet A(S, {{name, k, l}});
    return make_table<ScalarMomentTable>(A, degree, [&](const Word& w) -> cplx {
        const double mk = m[w.size() / 2];
        return w[0].star ? S.rho(k) / S.rho(l) * mk : mk;
    });
}

/**
 * Candidate for a simple element a of type (k,l) with
 * ξ = Σ_j β_j (a*a)^j a*, and optionally an explicit conjugate for a*,
 * ζ = Σ_j γ_j (aa*)^j a. All joint moments are read off m_n = φ_k((aa*)^n)
 * by substitution.
 */
inline ConjugateCandidate polynomial_conjugate(const BlockStructure& S, int k, int l, const std::vector<double>& m,
                                               const std::vector<double>& beta, int degree = kDefaultFisherDegree,
                                               const std::optional<std::vector<double>>& gamma = std::nullopt,
                                               const ConjugateNames& names = {}) {
    detail::check_simple_element(S, k, l);
    if (beta.empty()) throw PreconditionError("polynomial conjugate needs at least one coefficient");
    const std::size_t J = std::max(beta.size(), gamma ? gamma->size() : std::size_t{0});
    const std::size_t need = std::max<std::size_t>(J + static_cast<std::size_t>(degree) / 2, 2 * J);
    if (m.size() <= need)
        throw PreconditionError("need the moments m_0..m_" + std::to_string(need) + " of aa*");
    const double ratio = S.rho(k) / S.rho(l);
    auto M = [&](std::size_t s) { return s == 0 ? 1.0 : ratio * m[s]; };  // φ_l((a*a)^s)

    std::vector<GeneratorDecl> gens{{names.a, k, l}, {names.xi, l, k}};
    if (gamma) gens.push_back({names.partner, k, l});
    Alphabet A(S, gens);
    ScalarMomentTable t(A, degree);
    const Letter a{0, false}, as{0, true}, x{1, false}, xs{1, true}, z{2, false}, zs{2, true};
    for (int n = 1; 2 * n <= degree; ++n) {
        Word u, v;
        for (int i = 0; i < n; ++i) {
            u.insert(u.end(), {a, as});
            v.insert(v.end(), {as, a});
        }
        t.set(u, m[static_cast<std::size_t>(n)]);
        t.set(v, M(static_cast<std::size_t>(n)));
    }
    auto sum_b = [&](const std::vector<double>& c, auto&& mom, std::size_t shift) {
        double s = 0.0;
        for (std::size_t j = 0; j < c.size(); ++j) s += c[j] * mom(j + shift);
        return s;
    };
    auto mk = [&](std::size_t s) { return m[s]; };
    // ξ a (a*a)^q at l, ξ* a* (aa*)^q at k; likewise for ζ with the roles swapped.
    for (std::size_t q = 0; 2 * q + 2 <= static_cast<std::size_t>(degree); ++q) {
        Word wx{x, a}, wxs{xs, as};
        for (std::size_t i = 0; i < q; ++i) {
            wx.insert(wx.end(), {as, a});
            wxs.insert(wxs.end(), {a, as});
        }
        t.set(wx, sum_b(beta, M, q + 1));
        t.set(wxs, sum_b(beta, mk, q + 1));
        if (gamma) {
            Word wz{z, as}, wzs{zs, a};
            for (std::size_t i = 0; i < q; ++i) {
                wz.insert(wz.end(), {a, as});
                wzs.insert(wzs.end(), {as, a});
            }
            t.set(wz, sum_b(*gamma, mk, q + 1));
            t.set(wzs, sum_b(*gamma, M, q + 1));
        }
    }
    auto quad = [&](const std::vector<double>& c, auto&& mom) {
        double s = 0.0;
        for (std::size_t i = 0; i < c.size(); ++i)
            for (std::size_t j = 0; j < c.size(); ++j) s += c[i] * c[j] * mom(i + j + 1);
        return s;
    };
    t.set(Word{x, xs}, quad(beta, M));
    t.set(Word{xs, x}, quad(beta, mk));
    std::vector<XiBinding> bindings{{names.xi, names.a}};
    if (gamma) {
        t.set(Word{z, zs}, quad(*gamma, mk));
        t.set(Word{zs, z}, quad(*gamma, M));
        bindings.push_back({names.partner, names.a + "*"});
    }
    return ConjugateCandidate(std::move(t), std::move(bindings));
}

/**
 * ξ = c·a* with c = 1/φ_l(a*a), the conjugate of an element whose aa* is a
 * scaled Marchenko–Pastur law. MP-ness of the input is not checked here; a
 * non-MP input shows up as a relation violation.
 */
inline ConjugateCandidate build_mp_conjugate(const BlockStructure& S, int k, int l, const std::vector<double>& m,
                                             int degree = kDefaultFisherDegree, const ConjugateNames& names = {}) {
    detail::check_simple_element(S, k, l);
    if (m.size() < 2 || !(m[1] > 0.0)) throw PreconditionError("a must be non-null (phi_k(aa*) > 0)");
    const double c = S.rho(l) / (S.rho(k) * m[1]);
    return polynomial_conjugate(S, k, l, m, {c}, degree, std::nullopt, names);
}

/**
 * Coefficients β_0..β_J of the projection ξ = Σ_j β_j (a*a)^j a* that
 * satisfies the relations for the words ξ a (a*a)^q, q = 0..J: the Hankel
 * system Σ_j β_j M_{j+q+1} = Σ_{i≤q} m_i M_{q−i}, with M_s = φ_l((a*a)^s).
 */
inline std::vector<double> conjugate_projection_coefficients(const BlockStructure& S, int k, int l,
                                                             const std::vector<double>& m, int J) {
    detail::check_simple_element(S, k, l);
    if (J < 0) throw PreconditionError("projection order must be nonnegative");
    const auto n = static_cast<std::size_t>(J) + 1;
    if (m.size() < 2 * n + 1) throw PreconditionError("need the moments m_0..m_" + std::to_string(2 * n));
    if (!(m[1] > 0.0)) throw PreconditionError("a must be non-null (phi_k(aa*) > 0)");
    const double ratio = S.rho(k) / S.rho(l);
    auto M = [&](std::size_t s) { return s == 0 ? 1.0 : ratio * m[s]; };
    Eigen::MatrixXd H(n, n);
    Eigen::VectorXd R(n);
    for (std::size_t q = 0; q < n; ++q) {
        for (std::size_t j = 0; j < n; ++j)
            H(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(j)) = M(j + q + 1);
        double r = 0.0;
        for (std::size_t i = 0; i <= q; ++i) r += (i == 0 ? 1.0 : m[i]) * M(q - i);
        R(static_cast<Eigen::Index>(q)) = r;
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
        throw PreconditionError("moment Hankel matrix is not positive definite");
    const Eigen::VectorXd b = ldlt.solve(R);
    return std::vector<double>(b.data(), b.data() + b.size());
}

/// Best polynomial conjugate at `degree`, with J = (degree − 2)/2.
inline ConjugateCandidate best_conjugate_projection(const BlockStructure& S, int k, int l,
                                                    const std::vector<double>& m, int degree = kDefaultFisherDegree,
                                                    const ConjugateNames& names = {}) {
    if (degree < 2) throw PreconditionError("projection degree must be at least 2");
    const int J = (degree - 2) / 2;
    return polynomial_conjugate(S, k, l, m, conjugate_projection_coefficients(S, k, l, m, J), degree,
                                std::nullopt, names);
}

/// Moments m_n = ∫x^n dμ, n = 0..count−1, of the law of aa*.
inline std::vector<double> moment_sequence(const GridMeasure& mu, int count) {
    std::vector<double> m(static_cast<std::size_t>(count));
    for (int n = 0; n < count; ++n) m[static_cast<std::size_t>(n)] = n == 0 ? 1.0 : mu.moment(n);
    return m;
}

struct CramerRaoReport {
    double phi_aa = 0.0;  ///< φ(aa*) = ρ_k φ_k(aa*)
    FisherValue fisher;
    ExtReal lhs;          ///< φ(aa*)·Φ_r
    double rhs = 0.0;     ///< ρ_k² + ρ_l²
    ExtReal slack;        ///< lhs − rhs
};

/**
 * φ(aa*)·Φ_r(a,a*) against ρ_k² + ρ_l² for the single family generator a of
 * type (k,l), k ≠ l, ρ_k ≤ ρ_l. Equality holds exactly for scaled MP laws.
 */
inline CramerRaoReport cramer_rao(const ConjugateCandidate& c, int degree = kDefaultFisherDegree,
                                  double tol = kConjugateTolerance) {
    const auto& A = c.alphabet();
    if (c.family().size() != 1) throw UsageError("cramer_rao needs exactly one family generator");
    const int g = c.family().front();
    const auto& decl = A.generators()[static_cast<std::size_t>(g)];
    const auto& S = A.structure();
    if (decl.row == decl.col) throw PreconditionError("cramer_rao needs a generator of type (k,l) with k != l");
    if (S.rho(decl.row) > S.rho(decl.col))
        throw PreconditionError("cramer_rao needs rho_k <= rho_l; pass the adjoint generator instead");
    const double mk = c.family_moment(Word{Letter{g, false}, Letter{g, true}});
    if (!(mk > 0.0)) throw PreconditionError("a must be non-null (phi_k(aa*) > 0)");
    CramerRaoReport rep;
    rep.phi_aa = S.rho(decl.row) * mk;
    rep.fisher = fisher_info(c, degree, tol);
    rep.lhs = rep.phi_aa * rep.fisher.value;
    rep.rhs = S.rho(decl.row) * S.rho(decl.row) + S.rho(decl.col) * S.rho(decl.col);
    rep.slack = rep.lhs - ExtReal(rep.rhs);
    return rep;
}

struct AdditivityReport {
    FisherValue x;
    FisherValue y;
    FisherValue joint;
    ExtReal slack;  ///< Φ_joint − (Φ_x + Φ_y)
};

/// Keeps a-only words, words with one xi letter in first position, and the norm words.
inline std::function<bool(const Word&)> conjugate_word_filter(std::vector<bool> is_xi) {
    return [is_xi = std::move(is_xi)](const Word& w) {
        int count = 0;
        for (const auto& l : w) count += is_xi[static_cast<std::size_t>(l.gen)] ? 1 : 0;
        if (count == 0) return true;
        if (!is_xi[static_cast<std::size_t>(w[0].gen)]) return false;
        if (count == 1) return true;
        return w.size() == 2 && w[1].gen == w[0].gen && w[1].star != w[0].star;
    };
}

/**
 * Joint candidate of two candidates taken free with amalgamation: the joint
 * moments come from the marginal cumulants with all mixed cumulants zero.
 */
inline ConjugateCandidate free_joint_candidate(const ConjugateCandidate& x, const ConjugateCandidate& y,
                                               int degree = kDefaultFisherDegree) {
    if (!(x.alphabet().structure() == y.alphabet().structure()))
        throw UsageError("marginals must share one block structure");
    FreeJointPredictor pred({moments_to_cumulants(x.joint(), degree), moments_to_cumulants(y.joint(), degree)});
    std::vector<bool> is_xi;
    for (int g = 0; g < x.alphabet().size(); ++g) is_xi.push_back(x.is_xi(g));
    for (int g = 0; g < y.alphabet().size(); ++g) is_xi.push_back(y.is_xi(g));
    auto table = pred.table(degree, conjugate_word_filter(is_xi));
    std::vector<XiBinding> bindings = x.bindings();
    bindings.insert(bindings.end(), y.bindings().begin(), y.bindings().end());
    return ConjugateCandidate(std::move(table), std::move(bindings));
}

/**
 * Φ_r of the free joint of x and y against Φ_r(x,x*) + Φ_r(y,y*). Both
 * marginals must pass their own relations; a failing marginal is reported
 * as a PreconditionError carrying its provenance.
 */
inline AdditivityReport fisher_additivity_check(const ConjugateCandidate& x, const ConjugateCandidate& y,
                                                int degree = kDefaultFisherDegree, double tol = kConjugateTolerance) {
    for (const auto* c : {&x, &y})
        for (int g : c->family()) {
            const Word ww{Letter{g, false}, Letter{g, true}};
            if (!(c->family_moment(ww) > 0.0))
                throw PreconditionError("family generator '" +
                                        c->alphabet().generators()[static_cast<std::size_t>(g)].name +
                                        "' is null (phi(aa*) = 0)");
        }
    AdditivityReport rep;
    rep.x = fisher_info(x, degree, tol);
    rep.y = fisher_info(y, degree, tol);
    if (!rep.x.value.is_finite()) throw PreconditionError("first marginal: " + rep.x.provenance);
    if (!rep.y.value.is_finite()) throw PreconditionError("second marginal: " + rep.y.provenance);
    rep.joint = fisher_info(free_joint_candidate(x, y, degree), degree, tol);
    rep.slack = rep.joint.value - ExtReal(rep.x.value.value() + rep.y.value.value());
    return rep;
}

/// Φ_joint − (Φ_x + Φ_y) for a joint candidate supplied directly (e.g. a non-free pair).
inline AdditivityReport fisher_additivity_check(const ConjugateCandidate& x, const ConjugateCandidate& y,
                                                const ConjugateCandidate& joint, int degree = kDefaultFisherDegree,
                                                double tol = kConjugateTolerance) {
    AdditivityReport rep;
    rep.x = fisher_info(x, degree, tol);
    rep.y = fisher_info(y, degree, tol);
    if (!rep.x.value.is_finite()) throw PreconditionError("first marginal: " + rep.x.provenance);
    if (!rep.y.value.is_finite()) throw PreconditionError("second marginal: " + rep.y.provenance);
    rep.joint = fisher_info(joint, degree, tol);
    rep.slack = rep.joint.value - ExtReal(rep.x.value.value() + rep.y.value.value());
    return rep;
}

}  // namespace rectfree
