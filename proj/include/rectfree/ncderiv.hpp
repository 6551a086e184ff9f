#pragma once

/**
 * Noncommutative polynomials in X_i, X_i*, the derivations D_j into
 * M ⊗ M ⊗ C[S_2], and the change-of-variable Jacobian at matrix level.
 *
 * A tensor X ⊗ Y ⊗ e stands for the operator M ↦ X M Y and X ⊗ Y ⊗ τ for
 * M ↦ X M* Y. Products and adjoints are those of the operators, so the
 * second slot multiplies in the opposite order:
 *
 *   (X⊗Y⊗e)(Z⊗T⊗e) = XZ ⊗ TY ⊗ e        (X⊗Y⊗e)(Z⊗T⊗τ) = XZ ⊗ TY ⊗ τ
 *   (X⊗Y⊗τ)(Z⊗T⊗e) = XT* ⊗ Z*Y ⊗ τ      (X⊗Y⊗τ)(Z⊗T⊗τ) = XT* ⊗ Z*Y ⊗ e
 *   (X⊗Y⊗e)* = X* ⊗ Y* ⊗ e              (X⊗Y⊗τ)* = Y ⊗ X ⊗ τ
 *
 * A τ on the left conjugates the coefficient of the right factor, and the
 * adjoint of a τ-term keeps its coefficient, since Adj is conjugate-linear.
 *
 * Realification: a block matrix M in p_k M_n p_l has real coordinates
 * (Re M_rc, Im M_rc) interleaved, entries row-major within the block, and
 * the blocks of a system concatenated in generator order. The space carries
 * the Euclidean structure <M,N> = Re Tr M*N, for which these coordinates
 * are orthonormal.
 */

#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rectfree/dblock.hpp"
#include "rectfree/error.hpp"
#include "rectfree/measures.hpp"

namespace rectfree {

/// Default central-difference step of the finite-difference Jacobian.
inline constexpr double kJacobianFdStep = 1e-5;
/// Step used by the Richardson fallback when the Jacobian is poorly conditioned.
inline constexpr double kJacobianRichardsonStep = 1e-4;

/**
 * Block sizes q_k(n) = floor(ρ_k n) for k < d, with the remainder in the
 * last block so that the sizes sum to n. ConfigurationError on an empty block.
 */
inline std::vector<int> block_sizes(const BlockStructure& S, int n) {
    if (n < S.d()) throw ConfigurationError("matrix size n=" + std::to_string(n) + " is smaller than d");
    std::vector<int> q(static_cast<std::size_t>(S.d()));
    int used = 0;
    for (int k = 0; k + 1 < S.d(); ++k) {
        q[static_cast<std::size_t>(k)] = static_cast<int>(std::floor(S.rho(k) * n + 1e-12));
        used += q[static_cast<std::size_t>(k)];
    }
    q.back() = n - used;
    for (int k = 0; k < S.d(); ++k)
        if (q[static_cast<std::size_t>(k)] <= 0)
            throw ConfigurationError("block " + std::to_string(k + 1) + " is empty at n=" + std::to_string(n));
    return q;
}

/// Finite linear combination of words in the letters X_i, X_i*.
class NCPoly {
public:
    NCPoly() = default;
    explicit NCPoly(Alphabet alphabet) : alphabet_(std::move(alphabet)) {}

    static NCPoly monomial(const Alphabet& A, const Word& w, cplx c = 1.0) {
        NCPoly p(A);
        p.add(w, c);
        return p;
    }
    static NCPoly variable(const Alphabet& A, int gen, bool star = false, cplx c = 1.0) {
        return monomial(A, Word{Letter{gen, star}}, c);
    }
    /// c_1·w_1 + … from (coefficient, word text) pairs; "" is the empty word.
    static NCPoly from_terms(const Alphabet& A, const std::vector<std::pair<cplx, std::string>>& terms) {
        NCPoly p(A);
        for (const auto& [c, text] : terms) p.add(text.empty() ? Word{} : A.parse(text), c);
        return p;
    }

    const Alphabet& alphabet() const { return alphabet_; }

    /// Adds c·w; chain-broken words are the zero element and are dropped.
    void add(const Word& w, cplx c) {
        if (!w.empty() && !alphabet_.chain(w)) return;
        if (c == cplx(0.0)) return;
        auto& slot = terms_[word_key(w)];
        slot += c;
        if (slot == cplx(0.0)) terms_.erase(word_key(w));
    }

    std::vector<std::pair<Word, cplx>> monomials() const {
        std::vector<std::pair<Word, cplx>> out;
        for (const auto& [k, c] : terms_) out.emplace_back(word_from_key(k), c);
        return out;
    }
    bool empty() const { return terms_.empty(); }
    std::size_t size() const { return terms_.size(); }

    int degree() const {
        int d = 0;
        for (const auto& [k, c] : terms_) d = std::max(d, static_cast<int>(k.size()));
        return d;
    }

    /// True when every monomial runs from row type k(i) to column type l(i).
    bool in_class(int i) const {
        const auto& g = alphabet_.generators().at(static_cast<std::size_t>(i));
        for (const auto& [k, c] : terms_) {
            const Word w = word_from_key(k);
            if (w.empty()) {
                if (g.row != g.col) return false;
                continue;
            }
            if (alphabet_.type(w.front()).row != g.row || alphabet_.type(w.back()).col != g.col) return false;
        }
        return true;
    }

    NCPoly adjoint() const {
        NCPoly p(alphabet_);
        for (const auto& [w, c] : monomials()) p.add(word_adjoint(w), std::conj(c));
        return p;
    }

    friend NCPoly operator+(const NCPoly& a, const NCPoly& b) {
        NCPoly p = a;
        for (const auto& [w, c] : b.monomials()) p.add(w, c);
        return p;
    }
    friend NCPoly operator*(cplx s, const NCPoly& a) {
        NCPoly p(a.alphabet_);
        for (const auto& [w, c] : a.monomials()) p.add(w, s * c);
        return p;
    }
    friend NCPoly operator*(const NCPoly& a, const NCPoly& b) {
        NCPoly p(a.alphabet_);
        for (const auto& [u, cu] : a.monomials())
            for (const auto& [v, cv] : b.monomials()) {
                Word w = u;
                w.insert(w.end(), v.begin(), v.end());
                p.add(w, cu * cv);
            }
        return p;
    }

    std::string to_string() const {
        if (terms_.empty()) return "0";
        std::ostringstream os;
        bool first = true;
        for (const auto& [w, c] : monomials()) {
            if (!first) os << " + ";
            first = false;
            os << "(" << c.real() << (c.imag() < 0 ? "-" : "+") << std::abs(c.imag()) << "i)";
            os << "[" << (w.empty() ? std::string("1") : alphabet_.format(w)) << "]";
        }
        return os.str();
    }

private:
    Alphabet alphabet_;
    std::map<std::string, cplx> terms_;
};

/// Element of S_2 = {e, τ}.
enum class Perm { e, tau };

/// Finite linear combination of X ⊗ Y ⊗ g with X, Y words and g ∈ {e, τ}.
class TensorPoly {
public:
    struct Term {
        Word left;
        Word right;
        Perm g = Perm::e;
        cplx coeff = 0.0;
    };

    TensorPoly() = default;
    explicit TensorPoly(Alphabet alphabet) : alphabet_(std::move(alphabet)) {}

    static TensorPoly unit(const Alphabet& A, Perm g = Perm::e, cplx c = 1.0) {
        TensorPoly t(A);
        t.add(Word{}, Word{}, g, c);
        return t;
    }

    const Alphabet& alphabet() const { return alphabet_; }

    void add(const Word& left, const Word& right, Perm g, cplx c) {
        if ((!left.empty() && !alphabet_.chain(left)) || (!right.empty() && !alphabet_.chain(right))) return;
        if (c == cplx(0.0)) return;
        const Key k{word_key(left), word_key(right), g == Perm::tau};
        auto& slot = terms_[k];
        slot += c;
        if (slot == cplx(0.0)) terms_.erase(k);
    }

    std::vector<Term> terms() const {
        std::vector<Term> out;
        for (const auto& [k, c] : terms_)
            out.push_back({word_from_key(std::get<0>(k)), word_from_key(std::get<1>(k)),
                           std::get<2>(k) ? Perm::tau : Perm::e, c});
        return out;
    }
    bool empty() const { return terms_.empty(); }
    std::size_t size() const { return terms_.size(); }

    friend TensorPoly operator+(const TensorPoly& a, const TensorPoly& b) {
        TensorPoly t = a;
        for (const auto& x : b.terms()) t.add(x.left, x.right, x.g, x.coeff);
        return t;
    }
    friend TensorPoly operator*(cplx s, const TensorPoly& a) {
        TensorPoly t(a.alphabet_);
        for (const auto& x : a.terms()) t.add(x.left, x.right, x.g, s * x.coeff);
        return t;
    }

    /// Operator composition A∘B, per the rules in the file comment.
    friend TensorPoly operator*(const TensorPoly& a, const TensorPoly& b) {
        TensorPoly t(a.alphabet_);
        auto cat = [](Word x, const Word& y) {
            x.insert(x.end(), y.begin(), y.end());
            return x;
        };
        for (const auto& x : a.terms())
            for (const auto& y : b.terms()) {
                if (x.g == Perm::e) {
                    t.add(cat(x.left, y.left), cat(y.right, x.right), y.g, x.coeff * y.coeff);
                } else {
                    const Perm g = y.g == Perm::e ? Perm::tau : Perm::e;
                    t.add(cat(x.left, word_adjoint(y.right)), cat(word_adjoint(y.left), x.right), g,
                          x.coeff * std::conj(y.coeff));
                }
            }
        return t;
    }

    /// Adjoint for <M,N> = Re Tr M*N.
    TensorPoly adjoint() const {
        TensorPoly t(alphabet_);
        for (const auto& x : terms()) {
            if (x.g == Perm::e)
                t.add(word_adjoint(x.left), word_adjoint(x.right), Perm::e, std::conj(x.coeff));
            else
                t.add(x.right, x.left, Perm::tau, x.coeff);
        }
        return t;
    }

    std::string to_string() const {
        if (terms_.empty()) return "0";
        std::ostringstream os;
        bool first = true;
        for (const auto& x : terms()) {
            if (!first) os << " + ";
            first = false;
            os << "(" << x.coeff.real() << (x.coeff.imag() < 0 ? "-" : "+") << std::abs(x.coeff.imag()) << "i)";
            os << "[" << (x.left.empty() ? std::string("1") : alphabet_.format(x.left)) << " (x) "
               << (x.right.empty() ? std::string("1") : alphabet_.format(x.right)) << " (x) "
               << (x.g == Perm::e ? "e" : "tau") << "]";
        }
        return os.str();
    }

private:
    using Key = std::tuple<std::string, std::string, bool>;
    Alphabet alphabet_;
    std::map<Key, cplx> terms_;
};

/**
 * D_j P: every occurrence of X_j splits its monomial into prefix ⊗ suffix,
 * tagged e for X_j and τ for X_j*.
 */
inline TensorPoly derive(const NCPoly& P, int j) {
    const auto& A = P.alphabet();
    if (j < 0 || j >= A.size()) throw UsageError("derivation index out of range");
    TensorPoly t(A);
    for (const auto& [w, c] : P.monomials())
        for (std::size_t m = 0; m < w.size(); ++m) {
            if (w[m].gen != j) continue;
            t.add(Word(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(m)),
                  Word(w.begin() + static_cast<std::ptrdiff_t>(m) + 1, w.end()), w[m].star ? Perm::tau : Perm::e, c);
        }
    return t;
}

inline TensorPoly tensor_mul(const TensorPoly& a, const TensorPoly& b) { return a * b; }
inline TensorPoly tensor_adjoint(const TensorPoly& a) { return a.adjoint(); }

/// One complex matrix per generator, each supported on its (k,l) block of an n×n matrix.
class MatrixPoint {
public:
    MatrixPoint() = default;

    MatrixPoint(Alphabet alphabet, std::vector<int> sizes, std::vector<Eigen::MatrixXcd> matrices)
        : alphabet_(std::move(alphabet)), sizes_(std::move(sizes)), mats_(std::move(matrices)) {
        if (static_cast<int>(sizes_.size()) != alphabet_.structure().d())
            throw UsageError("matrix point needs one size per block");
        offsets_.assign(sizes_.size(), 0);
        n_ = 0;
        for (std::size_t k = 0; k < sizes_.size(); ++k) {
            if (sizes_[k] <= 0) throw ConfigurationError("matrix point has an empty block");
            offsets_[k] = n_;
            n_ += sizes_[k];
        }
        if (static_cast<int>(mats_.size()) != alphabet_.size())
            throw UsageError("matrix point needs one matrix per generator");
        for (int g = 0; g < alphabet_.size(); ++g) {
            const auto& M = mats_[static_cast<std::size_t>(g)];
            if (M.rows() != n_ || M.cols() != n_)
                throw UsageError("matrix for '" + alphabet_.generators()[static_cast<std::size_t>(g)].name +
                                 "' is not " + std::to_string(n_) + "x" + std::to_string(n_));
            const auto& decl = alphabet_.generators()[static_cast<std::size_t>(g)];
            for (int r = 0; r < n_; ++r)
                for (int c = 0; c < n_; ++c)
                    if (M(r, c) != cplx(0.0) && (block_of(r) != decl.row || block_of(c) != decl.col))
                        throw UsageError("matrix for '" + decl.name + "' is not supported on its (" +
                                         std::to_string(decl.row + 1) + "," + std::to_string(decl.col + 1) +
                                         ") block");
        }
    }

    /// Builds the point from the blocks themselves (q_k × q_l matrices).
    static MatrixPoint from_blocks(const Alphabet& A, const std::vector<int>& sizes,
                                   const std::vector<Eigen::MatrixXcd>& blocks) {
        int n = 0;
        std::vector<int> off;
        for (int s : sizes) {
            off.push_back(n);
            n += s;
        }
        std::vector<Eigen::MatrixXcd> mats;
        for (int g = 0; g < A.size(); ++g) {
            const auto& decl = A.generators()[static_cast<std::size_t>(g)];
            const auto& B = blocks.at(static_cast<std::size_t>(g));
            if (B.rows() != sizes.at(static_cast<std::size_t>(decl.row)) ||
                B.cols() != sizes.at(static_cast<std::size_t>(decl.col)))
                throw UsageError("block for '" + decl.name + "' has the wrong shape");
            Eigen::MatrixXcd M = Eigen::MatrixXcd::Zero(n, n);
            M.block(off[static_cast<std::size_t>(decl.row)], off[static_cast<std::size_t>(decl.col)], B.rows(),
                    B.cols()) = B;
            mats.push_back(std::move(M));
        }
        return MatrixPoint(A, sizes, std::move(mats));
    }

    /// Independent complex Gaussian entries with E|M_rc|² = scale², on every generator block.
    static MatrixPoint random(const Alphabet& A, const std::vector<int>& sizes, std::mt19937_64& rng,
                              double scale = 1.0) {
        std::normal_distribution<double> N(0.0, scale / std::sqrt(2.0));
        std::vector<Eigen::MatrixXcd> blocks;
        for (const auto& g : A.generators()) {
            Eigen::MatrixXcd B(sizes.at(static_cast<std::size_t>(g.row)), sizes.at(static_cast<std::size_t>(g.col)));
            for (Eigen::Index r = 0; r < B.rows(); ++r)
                for (Eigen::Index c = 0; c < B.cols(); ++c) {
                    const double re = N(rng);
                    const double im = N(rng);
                    B(r, c) = cplx(re, im);
                }
            blocks.push_back(std::move(B));
        }
        return from_blocks(A, sizes, blocks);
    }

    const Alphabet& alphabet() const { return alphabet_; }
    int n() const { return n_; }
    const std::vector<int>& sizes() const { return sizes_; }
    int block_size(int k) const { return sizes_.at(static_cast<std::size_t>(k)); }
    int block_offset(int k) const { return offsets_.at(static_cast<std::size_t>(k)); }
    const Eigen::MatrixXcd& matrix(int g) const { return mats_.at(static_cast<std::size_t>(g)); }

    int block_of(int index) const {
        for (std::size_t k = 0; k < sizes_.size(); ++k)
            if (index < offsets_[k] + sizes_[k]) return static_cast<int>(k);
        throw UsageError("index outside the matrix");
    }

    /// Real dimension 2·q_k·q_l of the block space of generator g.
    int real_dim(int g) const {
        const auto& d = alphabet_.generators().at(static_cast<std::size_t>(g));
        return 2 * block_size(d.row) * block_size(d.col);
    }
    int total_real_dim() const {
        int s = 0;
        for (int g = 0; g < alphabet_.size(); ++g) s += real_dim(g);
        return s;
    }

    /// The block of M at the type of generator g, realified.
    Eigen::VectorXd realify(int g, const Eigen::MatrixXcd& M) const {
        const auto& d = alphabet_.generators().at(static_cast<std::size_t>(g));
        const int qk = block_size(d.row), ql = block_size(d.col), r0 = block_offset(d.row), c0 = block_offset(d.col);
        Eigen::VectorXd v(2 * qk * ql);
        for (int r = 0; r < qk; ++r)
            for (int c = 0; c < ql; ++c) {
                v(2 * (r * ql + c)) = M(r0 + r, c0 + c).real();
                v(2 * (r * ql + c) + 1) = M(r0 + r, c0 + c).imag();
            }
        return v;
    }

    /// Full realified coordinates of the point.
    Eigen::VectorXd coordinates() const {
        Eigen::VectorXd v(total_real_dim());
        int pos = 0;
        for (int g = 0; g < alphabet_.size(); ++g) {
            v.segment(pos, real_dim(g)) = realify(g, matrix(g));
            pos += real_dim(g);
        }
        return v;
    }

    /// The point with realified coordinates v (same alphabet and sizes).
    MatrixPoint with_coordinates(const Eigen::VectorXd& v) const {
        if (v.size() != total_real_dim()) throw UsageError("coordinate vector has the wrong dimension");
        std::vector<Eigen::MatrixXcd> mats;
        int pos = 0;
        for (int g = 0; g < alphabet_.size(); ++g) {
            const auto& d = alphabet_.generators()[static_cast<std::size_t>(g)];
            const int qk = block_size(d.row), ql = block_size(d.col), r0 = block_offset(d.row),
                      c0 = block_offset(d.col);
            Eigen::MatrixXcd M = Eigen::MatrixXcd::Zero(n_, n_);
            for (int r = 0; r < qk; ++r)
                for (int c = 0; c < ql; ++c)
                    M(r0 + r, c0 + c) = cplx(v(pos + 2 * (r * ql + c)), v(pos + 2 * (r * ql + c) + 1));
            pos += real_dim(g);
            mats.push_back(std::move(M));
        }
        return MatrixPoint(alphabet_, sizes_, std::move(mats));
    }

    /// Product of the letters of w; the empty word gives the identity.
    Eigen::MatrixXcd evaluate(const Word& w) const {
        Eigen::MatrixXcd P = Eigen::MatrixXcd::Identity(n_, n_);
        for (const auto& l : w) {
            const auto& M = matrix(l.gen);
            if (l.star)
                P = P * M.adjoint();
            else
                P = P * M;
        }
        return P;
    }

    Eigen::MatrixXcd evaluate(const NCPoly& p) const {
        Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(n_, n_);
        for (const auto& [w, c] : p.monomials()) out += c * evaluate(w);
        return out;
    }

    /// p_k·evaluate(w)·p_k on the diagonal block k.
    Eigen::MatrixXcd diagonal_block(const Eigen::MatrixXcd& M, int k) const {
        return M.block(block_offset(k), block_offset(k), block_size(k), block_size(k));
    }

private:
    Alphabet alphabet_;
    std::vector<int> sizes_;
    std::vector<int> offsets_;
    std::vector<Eigen::MatrixXcd> mats_;
    int n_ = 0;
};

/**
 * Real matrix of the operator Σ c·L(U)∘R(V)[∘Adj] from the block space of
 * generator `from` to that of generator `to`, in realified coordinates.
 */
inline Eigen::MatrixXd evaluate_operator(const TensorPoly& T, const MatrixPoint& point, int from, int to) {
    const auto& A = point.alphabet();
    if (from < 0 || from >= A.size() || to < 0 || to >= A.size()) throw UsageError("generator index out of range");
    const auto& din = A.generators()[static_cast<std::size_t>(from)];
    const auto& dout = A.generators()[static_cast<std::size_t>(to)];
    struct Ev {
        Eigen::MatrixXcd U, V;
        bool tau;
        cplx c;
    };
    std::vector<Ev> ev;
    for (const auto& t : T.terms()) ev.push_back({point.evaluate(t.left), point.evaluate(t.right), t.g == Perm::tau, t.coeff});
    const int qk = point.block_size(din.row), ql = point.block_size(din.col);
    const int ik = point.block_offset(din.row), il = point.block_offset(din.col);
    const int ok = point.block_offset(dout.row), ol = point.block_offset(dout.col);
    const int pk = point.block_size(dout.row), pl = point.block_size(dout.col);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(2 * pk * pl, 2 * qk * ql);
    for (int r = 0; r < qk; ++r)
        for (int c = 0; c < ql; ++c) {
            const int R = ik + r, C = il + c;
            for (int part = 0; part < 2; ++part) {
                const cplx unit = part == 0 ? cplx(1.0) : cplx(0.0, 1.0);
                // Output block of Σ c·U E V (E = unit·E_RC) or Σ c·U E* V (E* = conj(unit)·E_CR).
                Eigen::MatrixXcd Y = Eigen::MatrixXcd::Zero(pk, pl);
                for (const auto& e : ev) {
                    if (!e.tau)
                        Y += (e.c * unit) * e.U.block(ok, R, pk, 1) * e.V.block(C, ol, 1, pl);
                    else
                        Y += (e.c * std::conj(unit)) * e.U.block(ok, C, pk, 1) * e.V.block(R, ol, 1, pl);
                }
                const int col = 2 * (r * ql + c) + part;
                for (int a = 0; a < pk; ++a)
                    for (int b = 0; b < pl; ++b) {
                        out(2 * (a * pl + b), col) = Y(a, b).real();
                        out(2 * (a * pl + b) + 1, col) = Y(a, b).imag();
                    }
            }
        }
    return out;
}

/// A system F = (F^(1),…,F^(N)) with F^(i) in the class of generator i.
using PolySystem = std::vector<NCPoly>;

namespace detail {

inline void check_system(const PolySystem& F) {
    if (F.empty()) throw UsageError("empty polynomial system");
    const auto& A = F.front().alphabet();
    if (static_cast<int>(F.size()) != A.size())
        throw UsageError("a square system needs one polynomial per generator");
    for (std::size_t i = 0; i < F.size(); ++i) {
        if (F[i].alphabet().generators().size() != A.generators().size())
            throw UsageError("polynomials of a system must share one alphabet");
        if (!F[i].in_class(static_cast<int>(i)))
            throw PreconditionError("F^(" + std::to_string(i + 1) + ") = " + F[i].to_string() +
                                    " does not have the type of generator " + std::to_string(i + 1));
    }
}

}  // namespace detail

/// The identity system F^(i) = X_i.
inline PolySystem identity_system(const Alphabet& A) {
    PolySystem F;
    for (int i = 0; i < A.size(); ++i) F.push_back(NCPoly::variable(A, i));
    return F;
}

/// F evaluated at the point, each output cut to its block.
inline MatrixPoint evaluate_system(const PolySystem& F, const MatrixPoint& point) {
    detail::check_system(F);
    std::vector<Eigen::MatrixXcd> mats;
    for (std::size_t i = 0; i < F.size(); ++i) {
        const auto& d = point.alphabet().generators()[i];
        const Eigen::MatrixXcd full = point.evaluate(F[i]);
        Eigen::MatrixXcd M = Eigen::MatrixXcd::Zero(point.n(), point.n());
        M.block(point.block_offset(d.row), point.block_offset(d.col), point.block_size(d.row),
                point.block_size(d.col)) = full.block(point.block_offset(d.row), point.block_offset(d.col),
                                                      point.block_size(d.row), point.block_size(d.col));
        mats.push_back(std::move(M));
    }
    return MatrixPoint(point.alphabet(), point.sizes(), std::move(mats));
}

/// The substitution F∘G: X_i ↦ G^(i), X_i* ↦ G^(i)*.
inline PolySystem compose(const PolySystem& F, const PolySystem& G) {
    detail::check_system(F);
    detail::check_system(G);
    const auto& A = F.front().alphabet();
    std::vector<NCPoly> gs, gadj;
    for (const auto& g : G) {
        gs.push_back(g);
        gadj.push_back(g.adjoint());
    }
    PolySystem out;
    for (const auto& f : F) {
        NCPoly sum(A);
        for (const auto& [w, c] : f.monomials()) {
            NCPoly prod = NCPoly::monomial(A, Word{}, c);
            for (const auto& l : w) prod = prod * (l.star ? gadj : gs)[static_cast<std::size_t>(l.gen)];
            sum = sum + prod;
        }
        out.push_back(std::move(sum));
    }
    return out;
}

/// Realified differential DF(A), block (i,j) = evaluate_operator(D_j F^(i)).
inline Eigen::MatrixXd differential(const PolySystem& F, const MatrixPoint& point) {
    detail::check_system(F);
    const int N = static_cast<int>(F.size());
    const int D = point.total_real_dim();
    Eigen::MatrixXd DF = Eigen::MatrixXd::Zero(D, D);
    int row = 0;
    for (int i = 0; i < N; ++i) {
        int col = 0;
        for (int j = 0; j < N; ++j) {
            DF.block(row, col, point.real_dim(i), point.real_dim(j)) =
                evaluate_operator(derive(F[static_cast<std::size_t>(i)], j), point, j, i);
            col += point.real_dim(j);
        }
        row += point.real_dim(i);
    }
    return DF;
}

namespace detail {

/// log|det M| via partial-pivot LU; −∞ when a pivot vanishes relative to the largest one.
inline ExtReal log_abs_det(const Eigen::MatrixXd& M) {
    if (M.rows() == 0) return ExtReal(0.0);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(M);
    const Eigen::MatrixXd& U = lu.matrixLU();
    double big = 0.0;
    for (Eigen::Index i = 0; i < U.rows(); ++i) big = std::max(big, std::abs(U(i, i)));
    if (big == 0.0) return ExtReal::neg_infinity();
    double s = 0.0;
    for (Eigen::Index i = 0; i < U.rows(); ++i) {
        const double p = std::abs(U(i, i));
        if (p <= 1e-14 * big) return ExtReal::neg_infinity();
        s += std::log(p);
    }
    return ExtReal(s);
}

/// max/min pivot magnitude of the LU factorization, a cheap conditioning proxy.
inline double pivot_ratio(const Eigen::MatrixXd& M) {
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(M);
    const Eigen::MatrixXd& U = lu.matrixLU();
    double big = 0.0, small = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < U.rows(); ++i) {
        big = std::max(big, std::abs(U(i, i)));
        small = std::min(small, std::abs(U(i, i)));
    }
    return small == 0.0 ? std::numeric_limits<double>::infinity() : big / small;
}

}  // namespace detail

/**
 * log of the Jacobian |det DF(A)| = (det DF·DFᵀ)^{1/2} of the realified
 * differential; −∞ when DF is singular.
 */
inline ExtReal jacobian_log(const PolySystem& F, const MatrixPoint& point) {
    return detail::log_abs_det(differential(F, point));
}

/// Central-difference Jacobian matrix of the realified map A ↦ F(A) with step h.
inline Eigen::MatrixXd differential_fd(const PolySystem& F, const MatrixPoint& point, double h) {
    detail::check_system(F);
    const Eigen::VectorXd x = point.coordinates();
    const int D = static_cast<int>(x.size());
    Eigen::MatrixXd J(D, D);
    for (int p = 0; p < D; ++p) {
        Eigen::VectorXd xp = x, xm = x;
        xp(p) += h;
        xm(p) -= h;
        J.col(p) = (evaluate_system(F, point.with_coordinates(xp)).coordinates() -
                    evaluate_system(F, point.with_coordinates(xm)).coordinates()) /
                   (2.0 * h);
    }
    return J;
}

struct FiniteDifferenceJacobian {
    ExtReal log_jacobian;
    double step = 0.0;
    bool richardson = false;
};

/**
 * Finite-difference log-Jacobian: central differences at `step`; when the
 * result is poorly conditioned (pivot ratio above 1e8), Richardson
 * extrapolation of the steps 1e-4 and 5e-5 is used instead.
 */
inline FiniteDifferenceJacobian jacobian_log_fd(const PolySystem& F, const MatrixPoint& point,
                                                double step = kJacobianFdStep) {
    const Eigen::MatrixXd J = differential_fd(F, point, step);
    if (detail::pivot_ratio(J) <= 1e8) return {detail::log_abs_det(J), step, false};
    const double h = kJacobianRichardsonStep;
    const Eigen::MatrixXd R = (4.0 * differential_fd(F, point, h / 2) - differential_fd(F, point, h)) / 3.0;
    return {detail::log_abs_det(R), h, true};
}

/**
 * A state on words: value(w, empty_block) is the global φ(w); the empty word
 * stands for the projection p_{empty_block}.
 */
using MomentFunctional = std::function<cplx(const Word&, int)>;

/// φ(w) = ρ_{i0}·φ_{i0}(w) from a moment table; 0 on non-square words, ρ_k on p_k.
inline MomentFunctional table_state(const ScalarMomentTable& m) {
    return [m](const Word& w, int empty_block) -> cplx {
        const auto& A = m.alphabet();
        const auto& S = A.structure();
        if (w.empty()) return S.rho(empty_block);
        if (!A.is_square(w)) return 0.0;
        auto v = m.find(w);
        if (!v) throw UsageError("state has no moment for word '" + A.format(w) + "'");
        return S.rho(A.type(w.front()).row) * *v;
    };
}

/// Normalized trace (1/n)·Tr at a matrix point; (1/n)·Tr p_k = q_k/n on the empty word.
inline MomentFunctional trace_state(const MatrixPoint& point) {
    return [point](const Word& w, int empty_block) -> cplx {
        const double n = point.n();
        if (w.empty()) return point.block_size(empty_block) / n;
        return point.evaluate(w).trace() / n;
    };
}

/**
 * factor·(f ⊗ f ⊗ δ_e)(T): the τ-terms drop out. Empty left and right words
 * are the projections onto `left_block` and `right_block`.
 */
inline cplx tensor_functional(const TensorPoly& T, const MomentFunctional& f, int left_block, int right_block,
                              double factor = 2.0) {
    cplx s = 0.0;
    for (const auto& t : T.terms())
        if (t.g == Perm::e) s += t.coeff * f(t.left, left_block) * f(t.right, right_block);
    return factor * s;
}

/**
 * First-order coefficient factor·Re(φ⊗φ⊗δ_e)(D_{i0}P) of the log-Jacobian of
 * X_{i0} ↦ X_{i0} + αP. With factor 2 and φ the normalized trace at a
 * matrix point, this is (1/n²)·d/dα log Jacobian at α = 0.
 */
inline double first_order_jacobian(const NCPoly& P, int i0, const MomentFunctional& state, double factor = 2.0) {
    const auto& A = P.alphabet();
    if (i0 < 0 || i0 >= A.size()) throw UsageError("generator index out of range");
    if (!P.in_class(i0)) throw PreconditionError("P does not have the type of generator " + std::to_string(i0 + 1));
    const auto& d = A.generators()[static_cast<std::size_t>(i0)];
    return tensor_functional(derive(P, i0), state, d.row, d.col, factor).real();
}

/// The system X_i + α·δ_{i,i0}·P.
inline PolySystem perturbed_identity(const NCPoly& P, int i0, double alpha) {
    PolySystem F = identity_system(P.alphabet());
    F.at(static_cast<std::size_t>(i0)) = F[static_cast<std::size_t>(i0)] + cplx(alpha) * P;
    return F;
}

}  // namespace rectfree
