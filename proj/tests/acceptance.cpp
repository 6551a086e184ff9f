// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
//
// Reference values come from oracles written here (brute-force enumeration,
// closed forms, recursions and independent expansions), never from the
// library routine under test.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "rectfree/rectfree.hpp"
#include "support.hpp"

using namespace rectfree;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

class Clock {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// ---------------------------------------------------------------------------
// 1. Noncrossing partition lattice
// ---------------------------------------------------------------------------

std::uint64_t catalan_oracle(int n) {
    // C(2n, n)/(n+1) by exact integer recurrence C_{k+1} = C_k·2(2k+1)/(k+2).
    std::uint64_t c = 1;
    for (int k = 0; k < n; ++k) c = c * 2 * (2 * k + 1) / (k + 2);
    return c;
}

std::vector<std::vector<int>> set_partitions(int n) {
    std::vector<std::vector<int>> out;
    std::vector<int> a(static_cast<std::size_t>(n), 0);
    std::function<void(int, int)> rec = [&](int i, int m) {
        if (i == n) {
            out.push_back(a);
            return;
        }
        for (int b = 0; b <= m; ++b) {
            a[static_cast<std::size_t>(i)] = b;
            rec(i + 1, std::max(m, b + 1));
        }
    };
    rec(1, 1);
    return out;
}

bool crossing(const std::vector<int>& a) {
    const std::size_t n = a.size();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            for (std::size_t k = j + 1; k < n; ++k)
                for (std::size_t l = k + 1; l < n; ++l)
                    if (a[i] == a[k] && a[j] == a[l] && a[i] != a[j]) return true;
    return false;
}

Outcome criterion_nc_lattice() {
    Clock clock;
    Outcome o;
    for (int n = 1; n <= 12; ++n)
        if (enumerate_nc(n).size() != catalan_oracle(n)) {
            o.pass = false;
            o.detail += fmt("count(%d) wrong; ", n);
        }
    MobiusCache cache;
    for (int n = 1; n <= 8; ++n) {
        const long long expect = ((n - 1) % 2 ? -1 : 1) * static_cast<long long>(catalan_oracle(n - 1));
        if (cache.mobius(Partition::bottom(n), Partition::top(n)) != expect) {
            o.pass = false;
            o.detail += fmt("mobius(%d) wrong; ", n);
        }
    }
    for (int n = 1; n <= 8; ++n) {
        std::set<std::vector<int>> oracle, got;
        for (const auto& a : set_partitions(n))
            if (!crossing(a)) oracle.insert(a);
        for (const auto& p : enumerate_nc(n)) got.insert(std::vector<int>(p.rgs().begin(), p.rgs().end()));
        if (got != oracle) {
            o.pass = false;
            o.detail += fmt("brute force disagrees at n=%d; ", n);
        }
    }
    const double t = clock.seconds();
    if (t >= 10.0) o.pass = false;
    o.detail += fmt("Catalan n<=12, Mobius n<=8, brute force n<=8 checked in %.2f s (limit 10 s)", t);
    return o;
}

// ---------------------------------------------------------------------------
// 2. Transform round trip
// ---------------------------------------------------------------------------

Outcome criterion_round_trip() {
    Clock clock;
    std::mt19937_64 rng(20240601);
    double worst = 0.0;
    int tables = 0;
    bool valid = true;
    for (int rep = 0; rep < 100; ++rep) {
        const int d = 1 + rep % 3;
        const int degree = 2 + 2 * ((rep / 3) % 4);  // 2, 4, 6, 8
        std::vector<double> rho(static_cast<std::size_t>(d));
        std::uniform_real_distribution<double> U(0.5, 1.5);
        double total = 0.0;
        for (auto& r : rho) total += (r = U(rng));
        for (auto& r : rho) r /= total;
        std::vector<GeneratorDecl> gens{{"x", 0, d - 1}};
        if (rep % 2 == 0) gens.push_back({"y", d - 1, d - 1});
        Alphabet A(BlockStructure(rho), gens);
        auto m = rftest::random_valid_table<ScalarMomentTable>(A, degree, rng, 0.75 / d);
        const auto back = cumulants_to_moments(moments_to_cumulants(m));
        valid = valid && validate_table(back).empty();
        for (const auto& w : m.words()) worst = std::max(worst, std::abs(*back.find(w) - *m.find(w)));
        ++tables;
    }
    const double t = clock.seconds();
    Outcome o;
    o.pass = worst <= 1e-12 && valid && t < 30.0;
    o.detail = fmt("%d tables (d<=3, degree<=8): max |m - c2m(m2c(m))| = %.2e (tol 1e-12), %.2f s (limit 30 s)", tables,
                   worst, t);
    return o;
}

// ---------------------------------------------------------------------------
// 3. Marchenko-Pastur characterization
// ---------------------------------------------------------------------------

Outcome criterion_mp() {
    double worst_c = 0.0, worst_m = 0.0;
    for (double lambda : {1.0, 1.5, 2.0, 4.0}) {
        const double rk = 1.0 / (1.0 + lambda), rl = lambda / (1.0 + lambda);
        const BlockStructure S({rk, rl});
        const Alphabet A(S, {{"b", 0, 1}});
        const auto mu = GridMeasure::mp(lambda);
        // φ_k((bb*)^n) from quadrature; φ_l((b*b)^n) from ρ-cyclicity.
        auto quad = [&](const Word& w) -> cplx {
            const double mk = mu.moment(static_cast<int>(w.size() / 2));
            return w[0].star ? rk / rl * mk : mk;
        };
        const auto m = make_table<ScalarMomentTable>(A, 8, quad);
        const auto c = moments_to_cumulants(m);
        Word w;
        for (int n = 1; n <= 4; ++n) {
            w.push_back(A.parse_letter("b"));
            w.push_back(A.parse_letter("b*"));
            worst_c = std::max(worst_c, std::abs(*c.find(w) - cplx(n == 1 ? lambda : 0.0)));
        }
        // Reverse: cumulants (λ, 0, 0, 0) at superscript k, and ρ_k/ρ_l·λ at l.
        ScalarCumulantTable cc(A, 8);
        for (const auto& v : A.square_words(8))
            cc.set(v, v.size() == 2 ? (v[0].star ? rk / rl * lambda : lambda) : 0.0);
        const auto mm = cumulants_to_moments(cc);
        for (const auto& v : A.square_words(8)) worst_m = std::max(worst_m, std::abs(*mm.find(v) - quad(v)));
    }
    Outcome o;
    o.pass = worst_c <= 1e-8 && worst_m <= 1e-8;
    o.detail = fmt("lambda in {1,1.5,2,4}: cumulant error %.2e, moment error %.2e (tol 1e-8)", worst_c, worst_m);
    return o;
}

// ---------------------------------------------------------------------------
// 4. Joint moments of a free MP family
// ---------------------------------------------------------------------------

// φ of b_{i1} b*_{i2} ... b_{i_{2r+1}} b*_{i0}: ρ_l Σ_{j: i_{2j+1} = i0} φ_k(prefix) φ_l(gap).
struct MPFamilyOracle {
    double rho_k, rho_l;
    std::map<std::vector<int>, double> memo;

    double phi_k(const std::vector<int>& idx) {
        if (idx.empty()) return 1.0;
        if (auto it = memo.find(idx); it != memo.end()) return it->second;
        const std::size_t m = idx.size();
        const int i0 = idx.back();
        double s = 0.0;
        for (std::size_t p = 0; p + 1 < m; p += 2) {
            if (idx[p] != i0) continue;
            s += phi_k({idx.begin(), idx.begin() + static_cast<long>(p)}) *
                 phi_l({idx.begin() + static_cast<long>(p) + 1, idx.end() - 1});
        }
        // Global φ = ρ_l Σ ..., and φ = ρ_k φ_k.
        s *= rho_l / rho_k;
        memo[idx] = s;
        return s;
    }
    double phi_l(const std::vector<int>& idx) {
        if (idx.empty()) return 1.0;
        std::vector<int> rot(idx.begin() + 1, idx.end());
        rot.push_back(idx.front());
        return rho_k / rho_l * phi_k(rot);
    }
};

Outcome criterion_mp_family() {
    double worst = 0.0;
    std::size_t words = 0;
    for (auto rho : {std::vector<double>{0.5, 0.5}, {1.0 / 3.0, 2.0 / 3.0}, {0.25, 0.75}}) {
        const BlockStructure S(rho);
        const auto joint =
            free_joint_moments({mp_block_cumulants(S, "b1", 0, 1, 8), mp_block_cumulants(S, "b2", 0, 1, 8)}, 8);
        MPFamilyOracle oracle{rho[0], rho[1], {}};
        for (const auto& w : joint.alphabet().square_words(8)) {
            std::vector<int> idx;
            for (const auto& l : w) idx.push_back(l.gen);
            const double expect = w[0].star ? oracle.phi_l(idx) : oracle.phi_k(idx);
            worst = std::max(worst, std::abs(*joint.find(w) - cplx(expect)));
            ++words;
        }
    }
    Outcome o;
    o.pass = worst <= 1e-10 && words == 3 * 2 * (4 + 16 + 64 + 256);
    o.detail = fmt("%zu words of length <= 8 over 3 block structures: max error %.2e (tol 1e-10)", words, worst);
    return o;
}

// ---------------------------------------------------------------------------
// 5. Entropy formula consistency
// ---------------------------------------------------------------------------

Outcome criterion_entropy() {
    std::mt19937_64 rng(5150);
    double red = 0.0, scal = 0.0, rate = 0.0;
    // α = β: χ = ρ²(Σ + log π + 3/2 − log ρ); at ρ = 1 this is Σ + log π + 3/2.
    for (double rho : {1.0, 0.5, 1.0 / 3.0}) {
        for (const auto& mu : {rftest::random_smooth_grid(rng, 0.0, 3.0, 600), GridMeasure::mp(1.0),
                               GridMeasure::uniform(0.0, 2.0)}) {
            const double sigma = mu.log_energy().value();
            const double expect = rho * rho * (sigma + std::log(std::numbers::pi) + 1.5 - std::log(rho));
            red = std::max(red, std::abs(chi_single(EntropyInput{mu, rho, rho}).value() - expect));
        }
    }
    // χ(λa) = χ(a) + 2αβ log λ, with f(t) = λt applied to a.
    for (auto [a, b] : {std::pair{0.5, 0.5}, std::pair{0.25, 0.75}, std::pair{1.0 / 3.0, 2.0 / 3.0}}) {
        for (const auto& mu : {GridMeasure::mp(b / a), rftest::random_smooth_grid(rng, 0.0, 2.0, 600)}) {
            const EntropyInput in{mu, a, b};
            const double base = chi_single(in).value();
            for (double lam : {0.5, 2.0, 3.7}) {
                const double v = chi_functional_calculus(in, MonotoneMap::linear(lam)).value();
                scal = std::max(scal, std::abs(v - (base + 2 * a * b * std::log(lam))));
            }
        }
    }
    // χ = −J + C on 5 random grid measures.
    std::uniform_real_distribution<double> U(0.05, 0.45);
    for (int rep = 0; rep < 5; ++rep) {
        const double rk = U(rng), rl = 1.0 - rk;
        const auto mu = rftest::random_smooth_grid(rng, 0.0, 4.0, 800);
        const double chi = chi_single(EntropyInput{mu, rk, rl}).value();
        rate = std::max(rate, std::abs(chi - (-rate_J(mu, rk, rl).value() + rate_constant_C(rk, rl))));
    }
    Outcome o;
    o.pass = red <= 1e-9 && scal <= 1e-6 && rate <= 1e-6;
    o.detail = fmt("alpha=beta reduction %.2e (tol 1e-9), scaling law %.2e (tol 1e-6), chi=-J+C %.2e (tol 1e-6)", red,
                   scal, rate);
    return o;
}

// ---------------------------------------------------------------------------
// 6. Entropy maximization under a mean constraint
// ---------------------------------------------------------------------------

Outcome criterion_maximizer() {
    const double c = 1.5;
    std::mt19937_64 rng(777);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    struct Member {
        GridMeasure mu;
        double rk, rl;
        bool maximizer;
    };
    std::vector<Member> family;
    const std::pair<double, double> rhos[] = {{0.5, 0.5}, {0.25, 0.75}};
    for (auto [rk, rl] : rhos) family.push_back({GridMeasure::mp(rl / rk, c / (rl / rk)), rk, rl, true});
    for (int i = 0; family.size() < 50; ++i) {
        const auto [rk, rl] = rhos[i % 2];
        const double lambda = rl / rk;
        switch (i % 5) {
            case 0: {  // smooth random density rescaled to a mean at most c
                auto mu = rftest::random_smooth_grid(rng, 0.0, 1.0, 400);
                const double target = c * (0.3 + 0.7 * U(rng));
                family.push_back({pushforward_increasing(mu, MonotoneMap::linear(target / mu.mean())), rk, rl, false});
                break;
            }
            case 1: {  // tilted MP with mean at most c
                const double eps = (U(rng) < 0.5 ? -1 : 1) * (0.2 + 0.3 * U(rng));
                auto mu = rftest::tilted_mp(lambda, 1.0, eps, 1.0 + std::floor(3 * U(rng)));
                family.push_back({pushforward_increasing(mu, MonotoneMap::linear(c * (0.7 + 0.3 * U(rng)) / mu.mean())),
                                  rk, rl, false});
                break;
            }
            case 2:  // the right MP shape at a smaller mean
                family.push_back({GridMeasure::mp(lambda, c * (0.4 + 0.5 * U(rng)) / lambda), rk, rl, false});
                break;
            case 3: {  // MP of the wrong parameter
                const double other = lambda * (1.5 + U(rng));
                family.push_back({GridMeasure::mp(other, c * (0.5 + 0.5 * U(rng)) / other), rk, rl, false});
                break;
            }
            default: {  // uniform law
                const double top = 2 * c * (0.4 + 0.6 * U(rng));
                family.push_back({GridMeasure::uniform(0.0, top, 200), rk, rl, false});
                break;
            }
        }
    }
    double min_gap = INFINITY, min_other = INFINITY, max_mp = 0.0;
    bool ok = true;
    for (const auto& m : family) {
        const ExtReal g = maximizer_gap(m.mu, m.rk, m.rl, c);
        const double v = g.is_finite() ? g.value() : (g.is_pos_inf() ? INFINITY : -INFINITY);
        min_gap = std::min(min_gap, v);
        if (m.maximizer) {
            max_mp = std::max(max_mp, std::abs(v));
            ok = ok && v < 1e-6;
        } else {
            min_other = std::min(min_other, v);
            ok = ok && v >= 1e-6;
        }
    }
    Outcome o;
    o.pass = ok && min_gap >= -1e-6;
    o.detail = fmt("%zu measures: min gap %.2e (>= -1e-6), |gap| at scaled MP %.2e, smallest other gap %.2e (>= 1e-6)",
                   family.size(), min_gap, max_mp, min_other);
    return o;
}

// ---------------------------------------------------------------------------
// 7. Cramér–Rao inequality and Fisher additivity
// ---------------------------------------------------------------------------

Outcome criterion_cramer_rao() {
    double eq = 0.0;
    for (auto [rk, rl] : {std::pair{0.5, 0.5}, std::pair{1.0 / 3.0, 2.0 / 3.0}, std::pair{0.25, 0.75}}) {
        const BlockStructure S({rk, rl});
        for (double s : {1.0, 0.4, 2.5}) {
            const auto rep = cramer_rao(build_mp_conjugate(S, 0, 1, rftest::mp_moments(rl / rk, s, 16)));
            const double lhs = rep.lhs.is_finite() ? rep.lhs.value() : INFINITY;
            eq = std::max(eq, std::abs(lhs - (rk * rk + rl * rl)));
        }
    }
    struct Tilt {
        double rk, rl, scale, eps, omega;
    };
    const Tilt tilts[] = {
        {0.5, 0.5, 1.0, 0.2, 1.0},          {0.5, 0.5, 1.0, -0.3, 2.0},         {0.5, 0.5, 2.0, 0.4, 3.0},
        {1.0 / 3, 2.0 / 3, 1.0, 0.2, 1.0},  {1.0 / 3, 2.0 / 3, 0.5, -0.4, 2.0}, {1.0 / 3, 2.0 / 3, 1.5, 0.3, 3.0},
        {0.25, 0.75, 1.0, 0.2, 1.0},        {0.25, 0.75, 1.0, -0.3, 2.0},       {0.25, 0.75, 0.25, 0.5, 1.0},
        {0.4, 0.6, 1.0, 0.3, 2.0},
    };
    double min_slack = INFINITY;
    for (const auto& t : tilts) {
        const BlockStructure S({t.rk, t.rl});
        const auto mu = rftest::tilted_mp(t.rl / t.rk, t.scale, t.eps, t.omega);
        const auto rep = cramer_rao(best_conjugate_projection(S, 0, 1, moment_sequence(mu, 16)));
        const double slack = rep.slack.is_finite() ? rep.slack.value() : (rep.slack.is_pos_inf() ? INFINITY : -INFINITY);
        min_slack = std::min(min_slack, slack);
    }
    double add = 0.0;
    for (auto [rk, rl] : {std::pair{0.5, 0.5}, std::pair{1.0 / 3.0, 2.0 / 3.0}, std::pair{0.25, 0.75}}) {
        const BlockStructure S({rk, rl});
        const auto x = build_mp_conjugate(S, 0, 1, rftest::mp_moments(rl / rk, 1.0, 16), 8, {"x", "xi_x", "xi_xs"});
        const auto y = build_mp_conjugate(S, 0, 1, rftest::mp_moments(rl / rk, 2.0, 16), 8, {"y", "xi_y", "xi_ys"});
        const auto rep = fisher_additivity_check(x, y, 8);
        add = std::max(add, rep.slack.is_finite() ? std::abs(rep.slack.value()) : INFINITY);
    }
    Outcome o;
    o.pass = eq <= 1e-8 && min_slack > 1e-4 && add <= 1e-8;
    o.detail = fmt("MP equality error %.2e (tol 1e-8), min slack over 10 perturbations %.2e (> 1e-4), additivity slack "
                   "%.2e (tol 1e-8)",
                   eq, min_slack, add);
    return o;
}

// ---------------------------------------------------------------------------
// 8. Jacobian identity
// ---------------------------------------------------------------------------

Outcome criterion_jacobian() {
    std::mt19937_64 rng(31415);
    const std::vector<std::pair<std::vector<double>, std::vector<GeneratorDecl>>> shapes = {
        {{1.0}, {{"X", 0, 0}}},
        {{1.0}, {{"X", 0, 0}, {"Y", 0, 0}}},
        {{1.0 / 3.0, 2.0 / 3.0}, {{"X", 0, 1}}},
        {{1.0 / 3.0, 2.0 / 3.0}, {{"X", 0, 1}, {"Y", 1, 1}}},
        {{1.0 / 3.0, 2.0 / 3.0}, {{"X", 0, 1}, {"Y", 1, 0}}},
    };
    double fd_err = 0.0, slope_err = 0.0;
    int systems = 0, slopes = 0;
    for (int rep = 0; systems < 20; ++rep) {
        const auto& [rho, gens] = shapes[static_cast<std::size_t>(rep) % shapes.size()];
        const BlockStructure S(rho);
        const Alphabet A(S, gens);
        const int n = rho.size() == 1 ? 2 + rep % 2 : 3;
        const auto sizes = block_sizes(S, n);
        const auto F = rftest::random_system(A, rng);
        const auto pt = MatrixPoint::random(A, sizes, rng, 0.6);
        const ExtReal exact = jacobian_log(F, pt);
        const ExtReal fd = jacobian_log_fd(F, pt).log_jacobian;
        fd_err = std::max(fd_err, exact.is_finite() && fd.is_finite() ? std::abs(exact.value() - fd.value()) : INFINITY);
        ++systems;

        // d/dα log J(id + α·P e_{i0}) at α = 0 against n²·2Re(tr⊗tr⊗δ_e)(D_{i0} P).
        const auto P = rftest::random_system(A, rng, 4, 3, 1.0)[0];
        // Five-point central stencil, O(h^4) truncation.
        const double h = 1e-3;
        auto L = [&](double a) { return jacobian_log(perturbed_identity(P, 0, a), pt).value(); };
        const double slope = (-L(2 * h) + 8 * L(h) - 8 * L(-h) + L(-2 * h)) / (12 * h);
        const double predicted = static_cast<double>(n) * n * first_order_jacobian(P, 0, trace_state(pt));
        slope_err = std::max(slope_err, std::abs(slope - predicted));
        ++slopes;
    }
    Outcome o;
    o.pass = fd_err <= 1e-6 && slope_err <= 1e-6;
    o.detail = fmt("%d systems (n<=3, N<=2): tensor vs finite differences %.2e, first-order slope %.2e over %d "
                   "perturbations (tol 1e-6)",
                   systems, fd_err, slope_err, slopes);
    return o;
}

// ---------------------------------------------------------------------------
// 9. Asymptotic freeness battery
// ---------------------------------------------------------------------------

Outcome criterion_battery() {
    Clock clock;
    const auto plan = standard_battery_plan(20240531, 200);
    const auto words = standard_battery_words(plan.alphabet());
    const auto rep = convergence_experiment(plan, words);
    const double t = clock.seconds();
    Outcome o;
    o.pass = rep.passed(0.95) && t < 600.0 && plan.trials >= 200 && plan.n_grid.back() == 400;
    std::string maes;
    for (std::size_t i = 0; i < plan.n_grid.size(); ++i)
        maes += fmt("%s%d:%.4f", i ? ", " : "", plan.n_grid[i], rep.mean_abs_error[i]);
    o.detail = fmt("%zu words, %d trials: %.1f%% within 3 SE at n=400 (>= 95%%), MAE {%s} %s, %.0f s (limit 600 s)",
                   words.size(), plan.trials, 100.0 * rep.fraction_within.back(), maes.c_str(),
                   rep.error_decreasing ? "strictly decreasing" : "NOT decreasing", t);
    return o;
}

// ---------------------------------------------------------------------------
// 10. Singular-value law
// ---------------------------------------------------------------------------

Outcome criterion_singular() {
    const auto rep = singular_law_check(3, 5, 100000, 4242);
    std::string moments;
    for (const auto& m : rep.moments)
        moments += fmt("%sm%d %.3f/%.3f (%.1f SE)", moments.empty() ? "" : ", ", m.order, m.mc_mean, m.quadrature,
                       std::abs(m.mc_mean - m.quadrature) / m.mc_se);
    double worst_norm = 0.0;
    bool norm_ok = true;
    for (auto [q, qp] : {std::pair{1, 1}, std::pair{1, 3}, std::pair{2, 2}, std::pair{2, 4}, std::pair{3, 3},
                         std::pair{3, 5}}) {
        const auto r = singular_law_check(q, qp, kSingularLawMinSamples, 1);
        worst_norm = std::max(worst_norm, std::abs(r.normalization_constant - 1.0));
        norm_ok = norm_ok && r.normalization_ok;
    }
    Outcome o;
    o.pass = rep.moments_ok() && norm_ok && worst_norm <= 0.01;
    o.detail = fmt("q=3, q'=5, 1e5 samples: %s (within 3 SE: %s); normalization |C-1| <= %.2e for q<=3 (tol 1%%)",
                   moments.c_str(), rep.moments_ok() ? "yes" : "no", worst_norm);
    return o;
}

// ---------------------------------------------------------------------------
// 11. Polar decomposition scenario
// ---------------------------------------------------------------------------

Outcome criterion_polar() {
    const auto rep = polar_scenario(300, 1.0 / 3.0, GridMeasure::uniform(0.5, 1.5), 200, 8080);
    double worst = 0.0;
    for (const auto& w : rep.words) worst = std::max(worst, w.se > 0 ? w.error / w.se : (w.error > 0 ? INFINITY : 0.0));
    Outcome o;
    o.pass = rep.passed() && rep.trials >= 200 && rep.n == 300;
    o.detail = fmt("%zu alternating words of length <= 4 at n=300, %d trials: %.0f%% within 3 SE (worst %.2f SE)",
                   rep.words.size(), rep.trials, 100.0 * rep.fraction_within(), worst);
    return o;
}

// ---------------------------------------------------------------------------
// 12. CLT scaling
// ---------------------------------------------------------------------------

// Cumulants of Y = (X_1 + … + X_n)/√n for free copies X_i, computed the long
// way: joint moments of the copies, summed over all index assignments.
ScalarCumulantTable clt_by_expansion(const ScalarCumulantTable& c, int n) {
    const auto& A = c.alphabet();
    const auto& g = A.generators()[0];
    std::vector<ScalarCumulantTable> copies;
    for (int i = 0; i < n; ++i) {
        const Alphabet Ai(A.structure(), {{g.name + std::to_string(i), g.row, g.col}});
        ScalarCumulantTable ci(Ai, c.degree());
        for (const auto& w : c.words()) {
            Word wi;
            for (const auto& l : w) wi.push_back(Letter{0, l.star});
            ci.set(wi, *c.find(w));
        }
        copies.push_back(std::move(ci));
    }
    FreeJointPredictor joint(copies);
    ScalarMomentTable m(A, c.degree());
    for (const auto& w : A.square_words(c.degree())) {
        cplx sum = 0.0;
        std::vector<int> idx(w.size(), 0);
        while (true) {
            Word wj;
            for (std::size_t t = 0; t < w.size(); ++t) wj.push_back(Letter{idx[t], w[t].star});
            sum += joint.moment(wj);
            std::size_t t = 0;
            while (t < idx.size() && ++idx[t] == n) idx[t++] = 0;
            if (t == idx.size()) break;
        }
        m.set(w, sum / std::pow(static_cast<double>(n), static_cast<double>(w.size()) / 2.0));
    }
    return moments_to_cumulants(m);
}

Outcome criterion_clt() {
    const BlockStructure S({0.25, 0.75});
    const Alphabet A(S, {{"a", 0, 1}});
    std::mt19937_64 rng(12);
    // Centered random valid cumulants up to degree 6; |c_4| stays below |c_2|.
    auto c = rftest::random_valid_table<ScalarCumulantTable>(A, 6, rng, 0.5);
    for (const auto& w : A.square_words(2)) c.set(w, w[0].star ? 1.0 / 3.0 : 1.0);

    double exact = 0.0;
    for (int n : {2, 3}) {
        const auto scaled = clt_scaled_cumulants(c, n);
        const auto oracle = clt_by_expansion(c, n);
        for (const auto& w : c.words()) exact = std::max(exact, std::abs(*scaled.find(w) - *oracle.find(w)));
    }
    for (long long n : {1LL, 10LL, 1000LL, 10000LL, 1000000LL}) {
        const auto scaled = clt_scaled_cumulants(c, n);
        for (const auto& w : c.words()) {
            const double f = std::pow(static_cast<double>(n), 1.0 - static_cast<double>(w.size()) / 2.0);
            exact = std::max(exact, std::abs(*scaled.find(w) - f * *c.find(w)));
        }
    }
    // Degree-4 residual: moments of Y_n minus the moments of the degree-2 (circular) limit.
    const long long n = 10000;
    const auto mY = cumulants_to_moments(clt_scaled_cumulants(c, n));
    ScalarCumulantTable limit(A, 4);
    for (const auto& w : A.square_words(4)) limit.set(w, w.size() == 2 ? *c.find(w) : 0.0);
    const auto mL = cumulants_to_moments(limit);
    double resid = 0.0, deg2 = 0.0;
    for (const auto& w : A.square_words(4)) {
        if (w.size() == 4) resid = std::max(resid, std::abs(*mY.find(w) - *mL.find(w)));
        if (w.size() == 2) deg2 = std::max(deg2, std::abs(*mY.find(w)));
    }
    Outcome o;
    o.pass = exact <= 1e-12 && resid < 1e-4 * deg2;
    o.detail = fmt("c_m(Y_n) vs n^(1-m/2) c_m and free-sum expansion: %.2e (tol 1e-12); degree-4 residual at n=1e4 "
                   "%.2e vs 1e-4 * degree-2 value %.2e",
                   exact, resid, 1e-4 * deg2);
    return o;
}

}  // namespace

int main() {
    struct Entry {
        int id;
        const char* name;
        Outcome (*run)();
    };
    const Entry entries[] = {
        {1, "NC lattice", criterion_nc_lattice},
        {2, "transform round trip", criterion_round_trip},
        {3, "MP characterization", criterion_mp},
        {4, "free MP joint moments", criterion_mp_family},
        {5, "entropy formula consistency", criterion_entropy},
        {6, "entropy maximization", criterion_maximizer},
        {7, "Cramer-Rao and Fisher additivity", criterion_cramer_rao},
        {8, "Jacobian identity", criterion_jacobian},
        {9, "asymptotic freeness battery", criterion_battery},
        {10, "singular-value law", criterion_singular},
        {11, "polar decomposition scenario", criterion_polar},
        {12, "CLT scaling", criterion_clt},
    };
    int failed = 0;
    for (const auto& e : entries) {
        Clock clock;
        Outcome o;
        try {
            o = e.run();
        } catch (const std::exception& ex) {
            o.pass = false;
            o.detail = std::string("exception: ") + ex.what();
        }
        failed += o.pass ? 0 : 1;
        std::printf("[%s] %2d %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", e.id, e.name, o.detail.c_str(),
                    clock.seconds());
        std::fflush(stdout);
    }
    std::printf("%d/12 criteria passed\n", 12 - failed);
    return failed == 0 ? 0 : 1;
}
