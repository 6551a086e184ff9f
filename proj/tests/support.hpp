#pragma once

// Test-only helpers: random table generators and independent oracles.
// Nothing here is used by the library itself.

#include <cmath>
#include <complex>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "rectfree/dblock.hpp"
#include "rectfree/fisher.hpp"
#include "rectfree/measures.hpp"
#include "rectfree/ncderiv.hpp"

namespace rftest {

using rectfree::cplx;

/// Binomial coefficient as double.
inline double binom(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

/// Σ_{π∈NC(n)} λ^{|π|} through Narayana numbers N(n,k) = C(n,k)C(n,k−1)/n.
inline double mp_moment_narayana(double lambda, int n) {
    if (n == 0) return 1.0;
    double s = 0.0;
    for (int k = 1; k <= n; ++k) s += binom(n, k) * binom(n, k - 1) / n * std::pow(lambda, k);
    return s;
}

/// ∫ log x dMP(c) = c log c − (c−1) log(c−1) − 1 (Laguerre partition-function asymptotics).
inline double mp_log_moment_oracle(double c) {
    const double t = c > 1.0 ? (c - 1.0) * std::log(c - 1.0) : 0.0;
    return c * std::log(c) - t - 1.0;
}

/// Σ(MP(c)) = −1/4 + ∫_{c−1}^{c} t log t dt − (c−1)·∫ log x dMP(c), same derivation.
inline double mp_energy_oracle(double c) {
    auto F = [](double t) { return t == 0.0 ? 0.0 : t * t / 2.0 * std::log(t) - t * t / 4.0; };
    return -0.25 + F(c) - F(c - 1.0) - (c - 1.0) * mp_log_moment_oracle(c);
}

/**
 * A random table satisfying ρ-cyclicity and star symmetry: the ρ-weighted
 * value f(w) = ρ_{i0}·v(w) is drawn once per orbit of the group generated by
 * rotations and the adjoint; orbits that contain w* get a real value.
 */
template <class Table>
Table random_valid_table(const rectfree::Alphabet& A, int degree, std::mt19937_64& rng, double scale = 1.0) {
    Table t(A, degree);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    std::set<std::string> done;
    for (const auto& w : A.square_words(degree)) {
        if (done.count(rectfree::word_key(w))) continue;
        std::vector<rectfree::Word> orbit, adj_orbit;
        rectfree::Word r = w;
        for (std::size_t i = 0; i < w.size(); ++i) {
            orbit.push_back(r);
            r = rectfree::word_rotate(r);
        }
        r = rectfree::word_adjoint(w);
        for (std::size_t i = 0; i < w.size(); ++i) {
            adj_orbit.push_back(r);
            r = rectfree::word_rotate(r);
        }
        bool self_adjoint_orbit = false;
        for (const auto& a : adj_orbit)
            for (const auto& o : orbit)
                if (rectfree::word_key(a) == rectfree::word_key(o)) self_adjoint_orbit = true;
        const double m = scale / static_cast<double>(w.size());
        cplx z(m * U(rng), self_adjoint_orbit ? 0.0 : m * U(rng));
        for (const auto& o : orbit) {
            const int i0 = A.chain(o)->front();
            t.set(o, z / A.structure().rho(i0));
            done.insert(rectfree::word_key(o));
        }
        for (const auto& a : adj_orbit) {
            const int i0 = A.chain(a)->front();
            t.set(a, std::conj(z) / A.structure().rho(i0));
            done.insert(rectfree::word_key(a));
        }
    }
    return t;
}

/// Random smooth density on [xmin, xmax]: a floor plus three Gaussian bumps, at `cells` cells.
inline rectfree::GridMeasure random_smooth_grid(std::mt19937_64& rng, double xmin, double xmax, int cells) {
    std::uniform_real_distribution<double> U(0.0, 1.0);
    double amp[3], mid[3], wid[3];
    for (int j = 0; j < 3; ++j) {
        amp[j] = 0.2 + U(rng);
        mid[j] = xmin + (xmax - xmin) * U(rng);
        wid[j] = (xmax - xmin) * (0.05 + 0.25 * U(rng));
    }
    const double floor = 0.05 + 0.3 * U(rng);
    return rectfree::GridMeasure::from_density(xmin, xmax, cells, [=](double x) {
        double v = floor;
        for (int j = 0; j < 3; ++j) v += amp[j] * std::exp(-(x - mid[j]) * (x - mid[j]) / (2.0 * wid[j] * wid[j]));
        return v;
    });
}

/**
 * Classical scalar free moment-cumulant relation for one variable:
 * m_n = Σ_{s=1}^{n} κ_s Σ_{i_1+…+i_s = n−s} m_{i_1}…m_{i_s}.
 * Returns κ_1..κ_n from m_0..m_n.
 */
inline std::vector<double> scalar_free_cumulants(const std::vector<double>& m) {
    const int n = static_cast<int>(m.size()) - 1;
    std::vector<double> kappa(n + 1, 0.0);
    // P[s][j] = Σ over compositions of j into s nonnegative parts of Π m.
    for (int N = 1; N <= n; ++N) {
        std::vector<std::vector<double>> P(N + 1, std::vector<double>(N + 1, 0.0));
        P[0][0] = 1.0;
        for (int s = 1; s <= N; ++s)
            for (int j = 0; j <= N; ++j)
                for (int i = 0; i <= j; ++i) P[s][j] += m[i] * P[s - 1][j - i];
        double rest = 0.0;
        for (int s = 1; s < N; ++s) rest += kappa[s] * P[s][N - s];
        kappa[N] = m[N] - rest;  // s = N term has P[N][0] = 1
    }
    return kappa;
}

/// m_n = s^n·Narayana moment of MP(λ), n = 0..count−1.
inline std::vector<double> mp_moments(double lambda, double scale, int count) {
    std::vector<double> m(static_cast<std::size_t>(count));
    for (int n = 0; n < count; ++n) m[static_cast<std::size_t>(n)] = std::pow(scale, n) * mp_moment_narayana(lambda, n);
    return m;
}

/// MP(λ) scaled by s with its density tilted by 1 + ε·cos(ωπ(x−a)/(b−a)), renormalized.
inline rectfree::GridMeasure tilted_mp(double lambda, double scale, double eps, double omega, int cells = 2000) {
    const double a = scale * std::pow(1.0 - std::sqrt(lambda), 2), b = scale * std::pow(1.0 + std::sqrt(lambda), 2);
    auto dens = [=](double x) {
        const double base = std::sqrt(std::max(0.0, (b - x) * (x - a))) / (2.0 * std::acos(-1.0) * scale * x);
        return base * (1.0 + eps * std::cos(omega * std::acos(-1.0) * (x - a) / (b - a)));
    };
    return rectfree::GridMeasure::from_density(a, b, cells, dens);
}

/**
 * Joint candidate of x and an identical copy y = x (with ξ_y = ξ_x): every
 * joint moment is the marginal moment after renaming y → x. Far from free.
 * Assumes x has a single family generator.
 */
inline rectfree::ConjugateCandidate identified_copy_joint(const rectfree::ConjugateCandidate& x, int degree,
                                                          const std::string& y = "y", const std::string& xi_y = "xi_y") {
    using namespace rectfree;
    const auto& A = x.alphabet();
    std::vector<GeneratorDecl> gens = A.generators();
    const int n = A.size();
    std::vector<bool> is_xi;
    for (int g = 0; g < n; ++g) is_xi.push_back(x.is_xi(g));
    for (int g = 0; g < n; ++g) {
        GeneratorDecl d = A.generators()[static_cast<std::size_t>(g)];
        d.name = x.is_xi(g) ? xi_y : y;
        gens.push_back(d);
        is_xi.push_back(x.is_xi(g));
    }
    Alphabet J(A.structure(), gens);
    ScalarMomentTable t(J, degree);
    auto keep = conjugate_word_filter(is_xi);
    for (const auto& w : J.square_words(degree)) {
        if (!keep(w)) continue;
        Word local;
        for (const auto& l : w) local.push_back(Letter{l.gen % n, l.star});
        if (auto v = x.joint().find(local)) t.set(w, *v);
    }
    std::vector<XiBinding> bindings = x.bindings();
    for (const auto& b : x.bindings()) bindings.push_back({xi_y, b.target.back() == '*' ? y + "*" : y});
    return ConjugateCandidate(std::move(t), std::move(bindings));
}

/// Every word over A of length 1..max_len running from row type `row` to column type `col`.
inline std::vector<rectfree::Word> typed_words(const rectfree::Alphabet& A, int row, int col, int max_len) {
    using namespace rectfree;
    std::vector<Word> out;
    Word cur;
    std::function<void(int)> rec = [&](int at) {
        if (!cur.empty() && at == col) out.push_back(cur);
        if (static_cast<int>(cur.size()) == max_len) return;
        for (int g = 0; g < A.size(); ++g)
            for (bool st : {false, true}) {
                const Letter l{g, st};
                const auto t = A.type(l);
                if (t.row != at) continue;
                cur.push_back(l);
                rec(t.col);
                cur.pop_back();
            }
    };
    rec(row);
    return out;
}

/// X_i + Σ c·w with `extra` random words of the type of X_i and complex coefficients of size ≤ coeff.
inline rectfree::PolySystem random_system(const rectfree::Alphabet& A, std::mt19937_64& rng, int extra = 3,
                                          int max_len = 3, double coeff = 0.3) {
    using namespace rectfree;
    std::uniform_real_distribution<double> U(-coeff, coeff);
    PolySystem F;
    for (int i = 0; i < A.size(); ++i) {
        const auto& g = A.generators()[static_cast<std::size_t>(i)];
        const auto words = typed_words(A, g.row, g.col, max_len);
        NCPoly p = NCPoly::variable(A, i);
        std::uniform_int_distribution<std::size_t> pick(0, words.size() - 1);
        for (int t = 0; t < extra; ++t) {
            const double re = U(rng);
            const double im = U(rng);
            p.add(words[pick(rng)], cplx(re, im));
        }
        F.push_back(std::move(p));
    }
    return F;
}

}  // namespace rftest
