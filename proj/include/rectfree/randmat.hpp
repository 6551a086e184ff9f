#pragma once

/**
 * @file randmat.hpp
 * Monte Carlo harness: Gaussian, hermitian and Haar blocks, empirical
 * D-valued traces of words, convergence of those traces to the free
 * prediction, the Laguerre law of squared singular values, and the polar
 * decomposition scenario.
 *
 * Every trial draws from its own mt19937_64 seeded by trial_seed(seed, n, t),
 * so results do not depend on how trials are spread over threads. Per-trial
 * values are stored and reduced sequentially in trial order.
 */

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "rectfree/cumulant.hpp"
#include "rectfree/dblock.hpp"
#include "rectfree/error.hpp"
#include "rectfree/measures.hpp"
#include "rectfree/ncderiv.hpp"

namespace rectfree {

/// Width of the acceptance band, in standard errors.
inline constexpr double kStandardErrorBand = 3.0;
/// Absolute slack for words whose empirical value is deterministic (zero standard error).
inline constexpr double kExactAgreement = 1e-10;
/// Largest operator norm accepted for a constant matrix.
inline constexpr double kMaxConstantNorm = 1e3;
inline constexpr int kMinTrials = 2;
inline constexpr int kSingularLawMaxQ = 6;
inline constexpr long kSingularLawMinSamples = 10000;
/// Longest (v, v*, h)-word supported by the polar scenario predictor.
inline constexpr int kPolarMaxLength = 4;

// ---------------------------------------------------------------------------
// Seeds and workers
// ---------------------------------------------------------------------------

/// One step of the splitmix64 generator, used as a mixing function.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed of trial `trial` at size `n`: splitmix64(splitmix64(splitmix64(seed) ^ n) ^ trial).
inline std::uint64_t trial_seed(std::uint64_t seed, std::uint64_t n, std::uint64_t trial) {
    return splitmix64(splitmix64(splitmix64(seed) ^ n) ^ trial);
}

/// Worker count for `tasks` independent units: RECTFREE_THREADS if set, else the hardware count.
inline int worker_count(int tasks) {
    int w = static_cast<int>(std::thread::hardware_concurrency());
    if (const char* env = std::getenv("RECTFREE_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || v < 1)
            throw ConfigurationError("RECTFREE_THREADS must be a positive integer, got '" + std::string(env) + "'");
        w = static_cast<int>(std::min<long>(v, 1024));
    }
    return std::max(1, std::min(w, tasks));
}

/// Runs fn(0), …, fn(count−1) on up to worker_count(count) threads; fn must only write its own slot.
template <class F>
void parallel_trials(int count, F&& fn) {
    const int workers = worker_count(count);
    if (workers <= 1) {
        for (int t = 0; t < count; ++t) fn(t);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            try {
                for (int t = w; t < count; t += workers) fn(t);
            } catch (...) {
                errors[static_cast<std::size_t>(w)] = std::current_exception();
            }
        });
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------------------
// Samplers
// ---------------------------------------------------------------------------

/// Independent complex Gaussian entries with E|z|² = variance (real and imaginary parts each variance/2).
inline Eigen::MatrixXcd complex_gaussian(int rows, int cols, double variance, std::mt19937_64& rng) {
    std::normal_distribution<double> N(0.0, std::sqrt(variance / 2.0));
    Eigen::MatrixXcd M(rows, cols);
    for (int c = 0; c < cols; ++c)
        for (int r = 0; r < rows; ++r) {
            const double re = N(rng);
            const double im = N(rng);
            M(r, c) = cplx(re, im);
        }
    return M;
}

/// Hermitian Gaussian matrix: off-diagonal E|z|² = variance, real diagonal N(0, variance).
inline Eigen::MatrixXcd hermitian_gaussian(int q, double variance, std::mt19937_64& rng) {
    std::normal_distribution<double> off(0.0, std::sqrt(variance / 2.0));
    std::normal_distribution<double> diag(0.0, std::sqrt(variance));
    Eigen::MatrixXcd M(q, q);
    for (int i = 0; i < q; ++i) {
        M(i, i) = diag(rng);
        for (int j = i + 1; j < q; ++j) {
            const double re = off(rng);
            const double im = off(rng);
            M(i, j) = cplx(re, im);
            M(j, i) = cplx(re, -im);
        }
    }
    return M;
}

/// Haar unitary: QR of a complex Ginibre matrix with the columns rescaled by the phases of diag(R).
inline Eigen::MatrixXcd haar_unitary(int q, std::mt19937_64& rng) {
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(complex_gaussian(q, q, 1.0, rng));
    Eigen::MatrixXcd Q = qr.householderQ();
    const Eigen::MatrixXcd& R = qr.matrixQR();
    for (int j = 0; j < q; ++j) {
        const cplx r = R(j, j);
        const double a = std::abs(r);
        Q.col(j) *= a > 0.0 ? r / a : cplx(1.0);
    }
    return Q;
}

// ---------------------------------------------------------------------------
// Ensemble plans
// ---------------------------------------------------------------------------

enum class MatrixKind { ginibre_block, hermitian_gaussian, haar_unitary_block, constant };

inline std::string to_string(MatrixKind k) {
    switch (k) {
        case MatrixKind::ginibre_block: return "ginibre_block";
        case MatrixKind::hermitian_gaussian: return "hermitian_gaussian";
        case MatrixKind::haar_unitary_block: return "haar_unitary_block";
        case MatrixKind::constant: return "constant";
    }
    return "?";
}

inline MatrixKind matrix_kind_from_string(const std::string& s) {
    for (auto k : {MatrixKind::ginibre_block, MatrixKind::hermitian_gaussian, MatrixKind::haar_unitary_block,
                   MatrixKind::constant})
        if (to_string(k) == s) return k;
    throw ValidationError("unknown matrix kind '" + s + "'");
}

/**
 * One named matrix of a plan. Ginibre blocks of type (row, col) have entry
 * variance scale²/n; hermitian blocks live on block `row` with the same
 * entry variance; Haar blocks are unitary on block `row`. A constant is a
 * p×p matrix C repeated along the diagonal of block `row` (I ⊗ C), so its
 * distribution does not depend on n.
 */
struct MatrixSpec {
    std::string name;
    MatrixKind kind = MatrixKind::ginibre_block;
    int row = 0;
    int col = 0;
    double scale = 1.0;
    Eigen::MatrixXcd matrix;

    static MatrixSpec ginibre(std::string name, int k, int l, double scale = 1.0) {
        return {std::move(name), MatrixKind::ginibre_block, k, l, scale, {}};
    }
    static MatrixSpec hermitian(std::string name, int k, double scale = 1.0) {
        return {std::move(name), MatrixKind::hermitian_gaussian, k, k, scale, {}};
    }
    static MatrixSpec haar(std::string name, int k) {
        return {std::move(name), MatrixKind::haar_unitary_block, k, k, 1.0, {}};
    }
    static MatrixSpec constant(std::string name, int k, Eigen::MatrixXcd C) {
        return {std::move(name), MatrixKind::constant, k, k, 1.0, std::move(C)};
    }
};

/// Matrix family sampled at every n of `n_grid`, `trials` times each.
struct EnsemblePlan {
    BlockStructure structure;
    std::vector<int> n_grid;
    int trials = 200;
    std::uint64_t seed = 0;
    std::vector<MatrixSpec> specs;

    Alphabet alphabet() const {
        std::vector<GeneratorDecl> gens;
        for (const auto& s : specs) gens.push_back(GeneratorDecl{s.name, s.row, s.col});
        return Alphabet(structure, gens);
    }

    /// Checks sizes, names, blocks and constants; throws the matching error kind.
    void validate() const {
        if (specs.empty()) throw UsageError("ensemble plan has no matrices");
        if (n_grid.empty()) throw UsageError("ensemble plan has an empty n grid");
        if (trials < kMinTrials) throw UsageError("ensemble plan needs at least 2 trials");
        const int d = structure.d();
        for (const auto& s : specs) {
            if (s.row < 0 || s.row >= d || s.col < 0 || s.col >= d)
                throw UsageError("matrix '" + s.name + "' refers to a block outside 1.." + std::to_string(d));
            if (!(s.scale > 0.0) || !std::isfinite(s.scale))
                throw UsageError("matrix '" + s.name + "' needs a positive finite scale");
            if (s.kind != MatrixKind::ginibre_block && s.row != s.col)
                throw UsageError("matrix '" + s.name + "' must sit on a diagonal block");
            if (s.kind == MatrixKind::constant) {
                if (s.matrix.size() == 0 || s.matrix.rows() != s.matrix.cols())
                    throw UsageError("constant '" + s.name + "' needs a nonempty square matrix");
                if (!s.matrix.allFinite()) throw ValidationError("constant '" + s.name + "' has non-finite entries");
                const double norm = Eigen::JacobiSVD<Eigen::MatrixXcd>(s.matrix).singularValues()(0);
                if (norm > kMaxConstantNorm)
                    throw ValidationError("constant '" + s.name + "' has operator norm " + std::to_string(norm) +
                                          " above " + std::to_string(kMaxConstantNorm));
            }
        }
        (void)alphabet();  // duplicate names and capacity
        for (int n : n_grid) {
            const auto q = block_sizes(structure, n);
            for (const auto& s : specs)
                if (s.kind == MatrixKind::constant && q[static_cast<std::size_t>(s.row)] % s.matrix.rows() != 0)
                    throw ConfigurationError("constant '" + s.name + "' of size " + std::to_string(s.matrix.rows()) +
                                             " does not tile block " + std::to_string(s.row + 1) + " of size " +
                                             std::to_string(q[static_cast<std::size_t>(s.row)]) + " at n = " +
                                             std::to_string(n));
        }
    }
};

/// Draws one matrix point of `plan` at size n from the given trial seed.
inline MatrixPoint sample(const EnsemblePlan& plan, int n, std::uint64_t seed) {
    const auto q = block_sizes(plan.structure, n);
    std::mt19937_64 rng(seed);
    std::vector<Eigen::MatrixXcd> blocks;
    blocks.reserve(plan.specs.size());
    for (const auto& s : plan.specs) {
        const int qr = q[static_cast<std::size_t>(s.row)];
        const int qc = q[static_cast<std::size_t>(s.col)];
        const double var = s.scale * s.scale / n;
        switch (s.kind) {
            case MatrixKind::ginibre_block: blocks.push_back(complex_gaussian(qr, qc, var, rng)); break;
            case MatrixKind::hermitian_gaussian: blocks.push_back(hermitian_gaussian(qr, var, rng)); break;
            case MatrixKind::haar_unitary_block: blocks.push_back(haar_unitary(qr, rng)); break;
            case MatrixKind::constant: {
                const auto p = static_cast<int>(s.matrix.rows());
                if (qr % p != 0)
                    throw ConfigurationError("constant '" + s.name + "' does not tile a block of size " +
                                             std::to_string(qr));
                Eigen::MatrixXcd B = Eigen::MatrixXcd::Zero(qr, qr);
                for (int r = 0; r < qr; r += p) B.block(r, r, p, p) = s.matrix;
                blocks.push_back(std::move(B));
                break;
            }
        }
    }
    return MatrixPoint::from_blocks(plan.alphabet(), q, blocks);
}

namespace detail {

/// Diagonal-free view of a matrix point: each generator's block and its adjoint.
struct BlockView {
    std::vector<Eigen::MatrixXcd> blocks;
    std::vector<Eigen::MatrixXcd> adjoints;
    std::vector<int> sizes;

    explicit BlockView(const MatrixPoint& p) : sizes(p.sizes()) {
        const auto& A = p.alphabet();
        for (int g = 0; g < A.size(); ++g) {
            const auto& decl = A.generators()[static_cast<std::size_t>(g)];
            blocks.push_back(p.matrix(g).block(p.block_offset(decl.row), p.block_offset(decl.col),
                                               p.block_size(decl.row), p.block_size(decl.col)));
            adjoints.push_back(blocks.back().adjoint());
        }
    }
    const Eigen::MatrixXcd& of(const Letter& l) const {
        return l.star ? adjoints[static_cast<std::size_t>(l.gen)] : blocks[static_cast<std::size_t>(l.gen)];
    }
};

/// Tr of a square chain-consistent word, multiplied from the cyclic start with the fewest flops.
inline cplx word_trace(const Word& w, const BlockView& v) {
    const std::size_t L = w.size();
    if (L == 1) return v.of(w[0]).trace();
    std::size_t best = 0;
    double best_cost = -1.0;
    for (std::size_t s = 0; s < L; ++s) {
        const double rows = static_cast<double>(v.of(w[s]).rows());
        double cost = 0.0;
        for (std::size_t j = 1; j + 1 < L; ++j) {
            const auto& M = v.of(w[(s + j) % L]);
            cost += rows * static_cast<double>(M.rows()) * static_cast<double>(M.cols());
        }
        if (best_cost < 0.0 || cost < best_cost) {
            best = s;
            best_cost = cost;
        }
    }
    Eigen::MatrixXcd P = v.of(w[best]);
    for (std::size_t j = 1; j + 1 < L; ++j) P = P * v.of(w[(best + j) % L]);
    const auto& last = v.of(w[(best + L - 1) % L]);
    return P.cwiseProduct(last.transpose()).sum();
}

inline double standard_error(const std::vector<cplx>& x, cplx mean) {
    const double T = static_cast<double>(x.size());
    double ss = 0.0;
    for (const auto& v : x) ss += std::norm(v - mean);
    return std::sqrt(ss / (T - 1.0) / T);
}

inline cplx sequential_mean(const std::vector<cplx>& x) {
    cplx s = 0.0;
    for (const auto& v : x) s += v;
    return s / static_cast<double>(x.size());
}

}  // namespace detail

/**
 * E of a word at a matrix point, as the d-vector of (1/q_k)·Tr(p_k W p_k).
 * Chain-broken and non-square words give the zero vector; the empty word gives all ones.
 */
inline std::vector<cplx> empirical_E(const Word& w, const MatrixPoint& point) {
    const auto& A = point.alphabet();
    const int d = A.structure().d();
    if (w.empty()) return std::vector<cplx>(static_cast<std::size_t>(d), 1.0);
    std::vector<cplx> out(static_cast<std::size_t>(d), 0.0);
    if (!A.is_square(w)) return out;
    const int k = A.type(w.front()).row;
    out[static_cast<std::size_t>(k)] = detail::word_trace(w, detail::BlockView(point)) / double(point.block_size(k));
    return out;
}

// ---------------------------------------------------------------------------
// Free prediction
// ---------------------------------------------------------------------------

/// φ_k moments of I ⊗ C for words over one constant generator on block k.
inline ScalarMomentTable constant_moments(const BlockStructure& S, const std::string& name, int k,
                                          const Eigen::MatrixXcd& C, int degree) {
    Alphabet A(S, {GeneratorDecl{name, k, k}});
    const Eigen::MatrixXcd Cs = C.adjoint();
    return make_table<ScalarMomentTable>(A, degree, [&](const Word& w) -> cplx {
        Eigen::MatrixXcd P = Eigen::MatrixXcd::Identity(C.rows(), C.cols());
        for (const auto& l : w) P = P * (l.star ? Cs : C);
        return P.trace() / static_cast<double>(C.rows());
    });
}

/// Limit D-distributions of the plan's matrices, as cumulant tables in spec order.
inline std::vector<ScalarCumulantTable> plan_marginals(const EnsemblePlan& plan, int degree) {
    std::vector<ScalarCumulantTable> out;
    const auto& S = plan.structure;
    for (const auto& s : plan.specs) {
        const double var = s.scale * s.scale;
        switch (s.kind) {
            case MatrixKind::ginibre_block:
                out.push_back(circular_block_cumulants(S, s.name, s.row, s.col, degree, var));
                break;
            case MatrixKind::hermitian_gaussian:
                out.push_back(semicircular_block_cumulants(S, s.name, s.row, degree, var));
                break;
            case MatrixKind::haar_unitary_block:
                out.push_back(moments_to_cumulants(haar_unitary_moments(S, s.name, s.row, degree)));
                break;
            case MatrixKind::constant:
                out.push_back(moments_to_cumulants(constant_moments(S, s.name, s.row, s.matrix, degree)));
                break;
        }
    }
    return out;
}

/// Prediction of φ_{i0}(w): a word ↦ value function.
using Predictor = std::function<cplx(const Word&)>;

/// Free-with-amalgamation prediction for the plan, valid on words up to `degree`.
inline Predictor free_predictor(const EnsemblePlan& plan, int degree) {
    auto pred = std::make_shared<FreeJointPredictor>(plan_marginals(plan, degree));
    return [pred](const Word& w) { return pred->moment(w); };
}

// ---------------------------------------------------------------------------
// Convergence experiments
// ---------------------------------------------------------------------------

struct SizeEstimate {
    int n = 0;
    cplx mean = 0.0;
    double se = 0.0;
    double error = 0.0;  ///< |mean − prediction|
    bool within = false;
};

/// Empirical φ_{i0}-value of one word per n, against its prediction.
struct WordEstimate {
    Word word;
    std::string text;
    cplx prediction = 0.0;
    std::vector<SizeEstimate> per_n;
};

struct ConvergenceReport {
    EnsemblePlan plan;
    std::vector<WordEstimate> words;
    std::vector<double> mean_abs_error;   ///< per n, averaged over words
    std::vector<double> fraction_within;  ///< per n
    bool error_decreasing = false;        ///< mean_abs_error strictly decreasing along n_grid

    /// Fraction within the band at the largest n reaches `min_fraction` and the error decreases.
    bool passed(double min_fraction = 0.95) const {
        return !fraction_within.empty() && fraction_within.back() >= min_fraction && error_decreasing;
    }
};

inline bool within_band(double error, double se) { return error <= kStandardErrorBand * se + kExactAgreement; }

/// Runs plan.trials trials at every n and compares the per-word means with `predictor`.
inline ConvergenceReport convergence_experiment(const EnsemblePlan& plan, const std::vector<Word>& words,
                                                const Predictor& predictor) {
    plan.validate();
    const Alphabet A = plan.alphabet();
    ConvergenceReport rep;
    rep.plan = plan;
    for (const auto& w : words) {
        WordEstimate e;
        e.word = w;
        e.text = A.format(w);
        e.prediction = w.empty() ? cplx(1.0) : A.is_square(w) ? predictor(w) : cplx(0.0);
        rep.words.push_back(std::move(e));
    }
    const std::size_t W = words.size();
    for (int n : plan.n_grid) {
        const auto T = static_cast<std::size_t>(plan.trials);
        std::vector<std::vector<cplx>> values(W, std::vector<cplx>(T));
        parallel_trials(plan.trials, [&](int t) {
            const auto point = sample(plan, n, trial_seed(plan.seed, static_cast<std::uint64_t>(n),
                                                          static_cast<std::uint64_t>(t)));
            const detail::BlockView view(point);
            for (std::size_t i = 0; i < W; ++i) {
                const Word& w = words[i];
                cplx v = 0.0;
                if (w.empty()) {
                    v = 1.0;
                } else if (A.is_square(w)) {
                    v = detail::word_trace(w, view) / double(point.block_size(A.type(w.front()).row));
                }
                values[i][static_cast<std::size_t>(t)] = v;
            }
        });
        double mae = 0.0;
        int inside = 0;
        for (std::size_t i = 0; i < W; ++i) {
            SizeEstimate s;
            s.n = n;
            s.mean = detail::sequential_mean(values[i]);
            s.se = detail::standard_error(values[i], s.mean);
            s.error = std::abs(s.mean - rep.words[i].prediction);
            s.within = within_band(s.error, s.se);
            mae += s.error;
            inside += s.within ? 1 : 0;
            rep.words[i].per_n.push_back(s);
        }
        rep.mean_abs_error.push_back(W ? mae / static_cast<double>(W) : 0.0);
        rep.fraction_within.push_back(W ? static_cast<double>(inside) / static_cast<double>(W) : 1.0);
    }
    rep.error_decreasing = true;
    for (std::size_t j = 1; j < rep.mean_abs_error.size(); ++j)
        if (!(rep.mean_abs_error[j] < rep.mean_abs_error[j - 1])) rep.error_decreasing = false;
    return rep;
}

/// Same, with the free-with-amalgamation prediction of the plan's own marginals.
inline ConvergenceReport convergence_experiment(const EnsemblePlan& plan, const std::vector<Word>& words) {
    std::size_t degree = 1;
    for (const auto& w : words) degree = std::max(degree, w.size());
    return convergence_experiment(plan, words, free_predictor(plan, static_cast<int>(degree)));
}

/**
 * The standard battery plan: ρ = (1/4, 3/4), n ∈ {100, 200, 400} (exact block
 * sizes), a Ginibre block X of type (1,2), a Haar unitary U and a hermitian
 * Gaussian H on block 1, a Haar unitary V on block 2, and a 5×5 constant B on
 * block 1.
 */
inline EnsemblePlan standard_battery_plan(std::uint64_t seed = 20240531, int trials = 200) {
    EnsemblePlan p;
    p.structure = BlockStructure({0.25, 0.75});
    p.n_grid = {100, 200, 400};
    p.trials = trials;
    p.seed = seed;
    Eigen::MatrixXcd C(5, 5);
    C << 1.0, 0.5, 0.0, 0.0, 0.0,  //
        0.0, -1.0, 0.5, 0.0, 0.0,  //
        0.0, 0.0, 0.5, cplx(0.0, 0.5), 0.0,  //
        0.0, 0.0, 0.0, -0.5, 0.5,  //
        0.25, 0.0, 0.0, 0.0, 1.5;
    p.specs = {MatrixSpec::ginibre("X", 0, 1), MatrixSpec::haar("U", 0), MatrixSpec::hermitian("H", 0),
               MatrixSpec::haar("V", 1), MatrixSpec::constant("B", 0, C)};
    return p;
}

/**
 * Every square word of length ≤ 2, followed by `extra` words of length 3 to
 * `max_len` drawn by random walks on the block chain (seeded), each using at
 * least two generators and listed once.
 */
inline std::vector<Word> standard_battery_words(const Alphabet& A, int extra = 24, int max_len = 6,
                                                std::uint64_t seed = 7) {
    std::vector<Word> out = A.square_words(2);
    std::set<std::string> seen;
    for (const auto& w : out) seen.insert(word_key(w));
    std::mt19937_64 rng(seed);
    const int letters = 2 * A.size();
    std::uniform_int_distribution<int> pick(0, letters - 1);
    std::uniform_int_distribution<int> len(3, std::max(3, max_len));
    int added = 0;
    for (int attempt = 0; added < extra && attempt < 100000; ++attempt) {
        const int L = len(rng);
        Word w;
        for (int j = 0; j < L; ++j) {
            const int c = pick(rng);
            w.push_back(Letter{c / 2, c % 2 == 1});
        }
        if (!A.is_square(w)) continue;
        std::set<int> gens;
        for (const auto& l : w) gens.insert(l.gen);
        if (gens.size() < 2 || !seen.insert(word_key(w)).second) continue;
        out.push_back(w);
        ++added;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Squared singular values of Gaussian matrices
// ---------------------------------------------------------------------------

/// Generalized Gauss–Laguerre rule for the weight x^α e^{−x} on (0, ∞), by Golub–Welsch.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> gauss_laguerre(int N, double alpha) {
    if (N < 1) throw UsageError("Gauss-Laguerre rule needs at least one node");
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(N, N);
    for (int i = 0; i < N; ++i) {
        J(i, i) = 2.0 * i + alpha + 1.0;
        if (i + 1 < N) J(i, i + 1) = J(i + 1, i) = std::sqrt((i + 1.0) * (i + 1.0 + alpha));
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    const double mass = std::tgamma(alpha + 1.0);
    Eigen::VectorXd w = mass * es.eigenvectors().row(0).transpose().array().square();
    return {es.eigenvalues(), w};
}

/// ∏_{j=1}^{q} j! · ∏_{j=q'−q}^{q'−1} j!, the integral of Δ(x)² ∏ x_i^{q'−q} e^{−x_i} over (0,∞)^q.
inline double laguerre_normalization(int q, int qp) {
    double logz = 0.0;
    for (int j = 1; j <= q; ++j) logz += std::lgamma(j + 1.0);
    for (int j = qp - q; j <= qp - 1; ++j) logz += std::lgamma(j + 1.0);
    return std::exp(logz);
}

/// π^{qq'} / (∏_{j=1}^{q−1} j! · ∏_{j=q'−q}^{q'−1} j!): density constant of the ordered squared singular values under Lebesgue measure.
inline double lebesgue_density_constant(int q, int qp) {
    double logc = static_cast<double>(q) * qp * std::log(std::numbers::pi);
    for (int j = 1; j <= q - 1; ++j) logc -= std::lgamma(j + 1.0);
    for (int j = qp - q; j <= qp - 1; ++j) logc -= std::lgamma(j + 1.0);
    return std::exp(logc);
}

struct SingularMoment {
    int order = 0;
    double mc_mean = 0.0;
    double mc_se = 0.0;
    double quadrature = 0.0;
    bool within = false;
};

struct SingularLawReport {
    int q = 0;
    int qp = 0;
    long samples = 0;
    std::uint64_t seed = 0;
    std::vector<SingularMoment> moments;  ///< E[(1/q) Σ λ_i^j], j = 1..max_order
    double normalization_quadrature = 0.0;
    double normalization_closed_form = 0.0;
    double normalization_constant = 0.0;  ///< closed form / quadrature; the Lebesgue constant C
    bool normalization_ok = false;        ///< |C − 1| ≤ 1%

    bool moments_ok() const {
        return std::all_of(moments.begin(), moments.end(), [](const SingularMoment& m) { return m.within; });
    }
    bool passed() const { return moments_ok() && normalization_ok; }
};

/**
 * Monte Carlo moments of the squared singular values of q×q' standard complex
 * Gaussian matrices (E|z|² = 1) against tensor Gauss–Laguerre quadrature of
 * Δ(x)² ∏ x^{q'−q} e^{−x}, and the normalization constant of that density.
 */
inline SingularLawReport singular_law_check(int q, int qp, long samples, std::uint64_t seed, int max_order = 4) {
    if (q < 1 || q > qp) throw UsageError("singular_law_check needs 1 <= q <= q'");
    if (qp > kSingularLawMaxQ) throw UsageError("singular_law_check supports q' <= 6");
    if (samples < kSingularLawMinSamples) throw UsageError("singular_law_check needs at least 10000 samples");
    if (max_order < 1) throw UsageError("singular_law_check needs max_order >= 1");
    SingularLawReport rep;
    rep.q = q;
    rep.qp = qp;
    rep.samples = samples;
    rep.seed = seed;

    // Quadrature: per-variable degree 2(q−1) + max_order is integrated exactly by N nodes.
    const double alpha = qp - q;
    const int N = q + max_order / 2 + 1;
    const auto [x, wt] = gauss_laguerre(N, alpha);
    std::vector<double> num(static_cast<std::size_t>(max_order), 0.0);
    double Z = 0.0;
    std::vector<int> idx(static_cast<std::size_t>(q), 0);
    for (;;) {
        double w = 1.0, vdm = 1.0;
        for (int i = 0; i < q; ++i) {
            w *= wt(idx[static_cast<std::size_t>(i)]);
            for (int j = i + 1; j < q; ++j) vdm *= x(idx[static_cast<std::size_t>(j)]) - x(idx[static_cast<std::size_t>(i)]);
        }
        const double f = w * vdm * vdm;
        Z += f;
        for (int m = 1; m <= max_order; ++m) {
            double s = 0.0;
            for (int i = 0; i < q; ++i) s += std::pow(x(idx[static_cast<std::size_t>(i)]), m);
            num[static_cast<std::size_t>(m - 1)] += f * s / q;
        }
        int p = 0;
        while (p < q && ++idx[static_cast<std::size_t>(p)] == N) idx[static_cast<std::size_t>(p++)] = 0;
        if (p == q) break;
    }
    rep.normalization_quadrature = Z;
    rep.normalization_closed_form = laguerre_normalization(q, qp);
    rep.normalization_constant = rep.normalization_closed_form / Z;
    rep.normalization_ok = std::abs(rep.normalization_constant - 1.0) <= 0.01;

    // Monte Carlo in 64 fixed chunks, each with its own seed.
    const int chunks = 64;
    std::vector<std::vector<double>> stat(static_cast<std::size_t>(max_order),
                                          std::vector<double>(static_cast<std::size_t>(samples)));
    parallel_trials(chunks, [&](int c) {
        std::mt19937_64 rng(trial_seed(seed, static_cast<std::uint64_t>(q * 100 + qp), static_cast<std::uint64_t>(c)));
        const long lo = samples * c / chunks, hi = samples * (c + 1) / chunks;
        for (long s = lo; s < hi; ++s) {
            const Eigen::MatrixXcd G = complex_gaussian(q, qp, 1.0, rng);
            const Eigen::MatrixXcd W = G * G.adjoint();
            const Eigen::VectorXd lam = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(W, Eigen::EigenvaluesOnly).eigenvalues();
            for (int m = 1; m <= max_order; ++m)
                stat[static_cast<std::size_t>(m - 1)][static_cast<std::size_t>(s)] = lam.array().pow(m).sum() / q;
        }
    });
    for (int m = 1; m <= max_order; ++m) {
        const auto& v = stat[static_cast<std::size_t>(m - 1)];
        double mean = 0.0;
        for (double a : v) mean += a;
        mean /= static_cast<double>(samples);
        double ss = 0.0;
        for (double a : v) ss += (a - mean) * (a - mean);
        SingularMoment sm;
        sm.order = m;
        sm.mc_mean = mean;
        sm.mc_se = std::sqrt(ss / (samples - 1.0) / static_cast<double>(samples));
        sm.quadrature = num[static_cast<std::size_t>(m - 1)] / Z;
        sm.within = std::abs(sm.mc_mean - sm.quadrature) <= kStandardErrorBand * sm.mc_se;
        rep.moments.push_back(sm);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Polar decomposition scenario
// ---------------------------------------------------------------------------

/// Inverse-CDF sample of a grid or atomic measure at u ∈ [0, 1).
inline double sample_measure(const GridMeasure& mu, double u) {
    switch (mu.kind()) {
        case GridMeasure::Kind::atoms: {
            double acc = 0.0;
            for (const auto& [x, w] : mu.atom_list()) {
                acc += w;
                if (u < acc) return x;
            }
            return mu.atom_list().back().first;
        }
        case GridMeasure::Kind::grid: {
            const auto [a, b] = mu.support();
            const auto& dens = mu.density();
            const double h = (b - a) / static_cast<double>(dens.size());
            double acc = 0.0;
            for (std::size_t i = 0; i < dens.size(); ++i) {
                const double m = dens[i] * h;
                if (u < acc + m || i + 1 == dens.size())
                    return a + h * (static_cast<double>(i) + (m > 0.0 ? std::min(1.0, (u - acc) / m) : 0.5));
                acc += m;
            }
            return b;
        }
        default: throw PreconditionError("sampling needs a grid or atomic measure, got " + mu.describe());
    }
}

/// Alternating words in v, v*, h of length 1..max_len (a v-letter and h alternate).
inline std::vector<std::string> polar_battery(int max_len = kPolarMaxLength) {
    std::vector<std::string> out;
    std::function<void(std::string, int, bool)> grow = [&](std::string w, int len, bool last_h) {
        if (len > 0) out.push_back(w);
        if (len == max_len) return;
        const std::string sep = len ? " " : "";
        if (len == 0 || !last_h) grow(w + sep + "h", len + 1, true);
        if (len == 0 || last_h) {
            grow(w + sep + "v", len + 1, false);
            grow(w + sep + "v*", len + 1, false);
        }
    };
    grow("", 0, false);
    return out;
}

struct PolarWordEstimate {
    std::string text;
    int block = 0;  ///< 0 for the kernel projection p1 of h, 1 for its range p2
    cplx prediction = 0.0;
    cplx mean = 0.0;
    double se = 0.0;
    double error = 0.0;
    bool within = false;
};

struct PolarReport {
    int n = 0;
    double kernel_fraction = 0.0;
    int trials = 0;
    std::uint64_t seed = 0;
    std::string h_law;
    int kernel_size = 0;
    std::vector<PolarWordEstimate> words;

    double fraction_within() const {
        if (words.empty()) return 1.0;
        return static_cast<double>(std::count_if(words.begin(), words.end(),
                                                 [](const PolarWordEstimate& w) { return w.within; })) /
               static_cast<double>(words.size());
    }
    bool passed() const { return fraction_within() == 1.0; }
};

namespace detail {

/// Letters of the polar words: 0 = v, 1 = v*, 2 = h.
inline std::vector<int> polar_letters(const std::string& text) {
    std::vector<int> out;
    std::istringstream in(text);
    std::string tok;
    while (in >> tok) {
        if (tok == "v") out.push_back(0);
        else if (tok == "v*") out.push_back(1);
        else if (tok == "h" || tok == "h*") out.push_back(2);
        else throw UsageError("polar words use the letters v, v* and h, got '" + tok + "'");
    }
    if (out.empty()) throw UsageError("empty polar word");
    return out;
}

/**
 * Free prediction of E(w) for words in v = u·p2 and h = p2 h p2. The
 * D-distribution of v (blocks v1 = p1 u p2 and v2 = p2 u p2) comes from a
 * scalar Haar unitary u free from a projection P of trace ρ2; h has the
 * moments of its law on block 2; v and h are free over D.
 */
class PolarPredictor {
public:
    PolarPredictor(double rho_kernel, const GridMeasure& h_law, int degree)
        : S_({rho_kernel, 1.0 - rho_kernel}), degree_(degree) {
        const BlockStructure S1({1.0});
        const int deg1 = 2 * degree + 1;
        const double r2 = 1.0 - rho_kernel;
        Alphabet AP(S1, {GeneratorDecl{"P", 0, 0}});
        auto proj = make_table<ScalarMomentTable>(AP, deg1, [&](const Word&) -> cplx { return r2; });
        scalar_ = std::make_unique<FreeJointPredictor>(std::vector<ScalarCumulantTable>{
            moments_to_cumulants(haar_unitary_moments(S1, "u", 0, deg1)), moments_to_cumulants(proj)});

        Alphabet AV(S_, {GeneratorDecl{"v1", 0, 1}, GeneratorDecl{"v2", 1, 1}});
        auto vm = make_table<ScalarMomentTable>(AV, degree, [&](const Word& w) { return v_moment(AV, w); });
        Alphabet AH(S_, {GeneratorDecl{"h", 1, 1}});
        auto hm = make_table<ScalarMomentTable>(AH, degree, [&](const Word& w) -> cplx {
            return h_law.moment(static_cast<int>(w.size()));
        });
        joint_ = std::make_unique<FreeJointPredictor>(
            std::vector<ScalarCumulantTable>{moments_to_cumulants(vm), moments_to_cumulants(hm)});
    }

    /// Predicted coordinate `block` of E(w) for a word over v (0), v* (1), h (2).
    cplx predict(const std::vector<int>& letters, int block) {
        if (static_cast<int>(letters.size()) > degree_) throw UsageError("polar word longer than the predictor degree");
        cplx total = 0.0;
        const std::size_t L = letters.size();
        const int nv = static_cast<int>(std::count_if(letters.begin(), letters.end(), [](int c) { return c < 2; }));
        for (int mask = 0; mask < (1 << nv); ++mask) {
            Word w;
            int bit = 0;
            for (std::size_t i = 0; i < L; ++i) {
                if (letters[i] == 2) {
                    w.push_back(Letter{2, false});
                } else {
                    const int gen = (mask >> bit++) & 1;  // 0 = v1, 1 = v2
                    w.push_back(Letter{gen, letters[i] == 1});
                }
            }
            const auto& A = joint_->alphabet();
            if (A.is_square(w) && A.type(w.front()).row == block) total += joint_->moment(w);
        }
        return total;
    }

private:
    // φ_k of a v-word: φ(p_k w(u, P) p_k)/ρ_k with v_j = p_j u P, v_j* = P u* p_j, p1 = 1 − P, p2 = P.
    cplx v_moment(const Alphabet& AV, const Word& w) {
        const int k = AV.type(w.front()).row;
        enum Factor { U, Ustar, Pp, Qp };  // Qp = 1 − P
        std::vector<Factor> f;
        auto proj = [&](int j) { f.push_back(j == 0 ? Qp : Pp); };
        proj(k);
        for (const auto& l : w) {
            if (!l.star) {
                proj(l.gen);
                f.push_back(U);
                f.push_back(Pp);
            } else {
                f.push_back(Pp);
                f.push_back(Ustar);
                proj(l.gen);
            }
        }
        proj(k);
        std::vector<std::pair<cplx, Word>> terms{{1.0, Word{}}};
        const Letter u{0, false}, us{0, true}, P{1, false};
        auto push = [&](Word x, const Letter& l) {
            if (l.gen == 1 && !x.empty() && x.back().gen == 1) return x;
            x.push_back(l);
            return x;
        };
        for (Factor fac : f) {
            std::vector<std::pair<cplx, Word>> next;
            for (auto& [c, x] : terms) {
                switch (fac) {
                    case U: next.emplace_back(c, push(x, u)); break;
                    case Ustar: next.emplace_back(c, push(x, us)); break;
                    case Pp: next.emplace_back(c, push(x, P)); break;
                    case Qp:
                        next.emplace_back(c, x);
                        next.emplace_back(-c, push(x, P));
                        break;
                }
            }
            terms = std::move(next);
        }
        cplx s = 0.0;
        for (const auto& [c, x] : terms) s += c * (x.empty() ? cplx(1.0) : scalar_->moment(x));
        return s / S_.rho(k);
    }

    BlockStructure S_;
    int degree_;
    std::unique_ptr<FreeJointPredictor> scalar_;
    std::unique_ptr<FreeJointPredictor> joint_;
};

}  // namespace detail

/**
 * x = U·H with U Haar n×n and H ≥ 0 having floor(κn) zero eigenvalues and
 * the rest i.i.d. from h_law. The polar parts v, h come from the SVD of x.
 * Empirical E over D = Span{p1, p2} (p2 the range projection of h) of each
 * alternating (v, v*, h)-word is compared with the free prediction.
 */
inline PolarReport polar_scenario(int n, double kernel_fraction, const GridMeasure& h_law, int trials,
                                  std::uint64_t seed, const std::vector<std::string>& texts) {
    if (!(kernel_fraction > 0.0 && kernel_fraction < 1.0))
        throw PreconditionError("kernel_fraction must lie in (0, 1)");
    if (trials < kMinTrials) throw UsageError("polar_scenario needs at least 2 trials");
    if (h_law.kind() != GridMeasure::Kind::grid && h_law.kind() != GridMeasure::Kind::atoms)
        throw PreconditionError("h_law must be a grid or atomic measure");
    if (!(h_law.support().first >= 0.0)) throw PreconditionError("h_law must live on (0, inf)");
    if (h_law.kind() == GridMeasure::Kind::atoms)
        for (const auto& [x, w] : h_law.atom_list())
            if (x <= 0.0 && w > 0.0) throw PreconditionError("h_law has an atom at 0");
    const int m = static_cast<int>(std::floor(kernel_fraction * n));
    if (m < 1) throw ConfigurationError("kernel_fraction * n < 1: the kernel is empty");
    if (m >= n) throw ConfigurationError("the range of h is empty");
    const int r = n - m;

    PolarReport rep;
    rep.n = n;
    rep.kernel_fraction = kernel_fraction;
    rep.trials = trials;
    rep.seed = seed;
    rep.h_law = h_law.describe();
    rep.kernel_size = m;

    std::vector<std::vector<int>> words;
    int max_len = 1;
    for (const auto& t : texts) {
        words.push_back(detail::polar_letters(t));
        max_len = std::max(max_len, static_cast<int>(words.back().size()));
    }
    if (max_len > kPolarMaxLength) throw UsageError("polar words have length at most 4");
    detail::PolarPredictor pred(static_cast<double>(m) / n, h_law, max_len);

    const std::size_t W = words.size();
    const auto T = static_cast<std::size_t>(trials);
    std::vector<std::vector<std::array<cplx, 2>>> values(W, std::vector<std::array<cplx, 2>>(T));
    parallel_trials(trials, [&](int t) {
        std::mt19937_64 rng(trial_seed(seed, static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(t)));
        const Eigen::MatrixXcd U = haar_unitary(n, rng);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        Eigen::VectorXd hd = Eigen::VectorXd::Zero(n);
        for (int i = m; i < n; ++i) hd(i) = sample_measure(h_law, unif(rng));
        const Eigen::MatrixXcd x = U * hd.asDiagonal();

        Eigen::BDCSVD<Eigen::MatrixXcd> svd(x, Eigen::ComputeFullU | Eigen::ComputeFullV);
        const Eigen::VectorXd& sv = svd.singularValues();
        int rank = 0;
        while (rank < n && sv(rank) > 1e-10 * sv(0)) ++rank;
        if (rank != r)
            throw DomainError("numerical rank " + std::to_string(rank) + " differs from " + std::to_string(r));
        // Basis Z' = [kernel | range] of h: there h = diag(0, σ), p1, p2 are coordinate blocks and
        // v = W_r Z_r* becomes [0 | Z'* W_r].
        const Eigen::MatrixXcd& Zf = svd.matrixV();
        Eigen::MatrixXcd Zp(n, n);
        Zp.leftCols(m) = Zf.rightCols(m);
        Zp.rightCols(r) = Zf.leftCols(r);
        Eigen::MatrixXcd v = Eigen::MatrixXcd::Zero(n, n);
        v.rightCols(r) = Zp.adjoint() * svd.matrixU().leftCols(r);
        const Eigen::MatrixXcd vs = v.adjoint();
        Eigen::VectorXd h = Eigen::VectorXd::Zero(n);
        h.tail(r) = sv.head(r);

        std::map<std::string, Eigen::MatrixXcd> cache;
        std::function<const Eigen::MatrixXcd&(const std::vector<int>&, std::size_t)> prefix =
            [&](const std::vector<int>& w, std::size_t len) -> const Eigen::MatrixXcd& {
            std::string key(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(len));
            if (auto it = cache.find(key); it != cache.end()) return it->second;
            Eigen::MatrixXcd P;
            if (len == 1) {
                P = w[0] == 0 ? v : w[0] == 1 ? vs : Eigen::MatrixXcd(h.cast<cplx>().asDiagonal());
            } else if (len == 2 && w[0] == 2) {
                P = w[1] == 2 ? Eigen::MatrixXcd(h.cwiseAbs2().cast<cplx>().asDiagonal())
                              : Eigen::MatrixXcd(h.cast<cplx>().asDiagonal() * (w[1] == 0 ? v : vs));
            } else {
                const auto& Q = prefix(w, len - 1);
                const int c = w[len - 1];
                P = c == 2 ? Eigen::MatrixXcd(Q * h.cast<cplx>().asDiagonal()) : Eigen::MatrixXcd(Q * (c == 0 ? v : vs));
            }
            return cache.emplace(std::move(key), std::move(P)).first->second;
        };
        for (std::size_t i = 0; i < W; ++i) {
            const auto& w = words[i];
            const std::size_t L = w.size();
            std::array<cplx, 2> tr{0.0, 0.0};
            for (int blk = 0; blk < 2; ++blk) {
                const int lo = blk == 0 ? 0 : m, hi = blk == 0 ? m : n;
                cplx s = 0.0;
                if (L == 1) {
                    for (int j = lo; j < hi; ++j) s += w[0] == 2 ? cplx(h(j)) : (w[0] == 0 ? v(j, j) : vs(j, j));
                } else {
                    const auto& Q = prefix(w, L - 1);
                    const int c = w[L - 1];
                    for (int j = lo; j < hi; ++j)
                        s += c == 2 ? Q(j, j) * h(j) : (Q.row(j) * (c == 0 ? v : vs).col(j)).value();
                }
                tr[static_cast<std::size_t>(blk)] = s / static_cast<double>(hi - lo);
            }
            values[i][static_cast<std::size_t>(t)] = tr;
        }
    });

    for (std::size_t i = 0; i < W; ++i)
        for (int blk = 0; blk < 2; ++blk) {
            std::vector<cplx> xs(T);
            for (std::size_t t = 0; t < T; ++t) xs[t] = values[i][t][static_cast<std::size_t>(blk)];
            PolarWordEstimate e;
            e.text = texts[i];
            e.block = blk;
            e.prediction = pred.predict(words[i], blk);
            e.mean = detail::sequential_mean(xs);
            e.se = detail::standard_error(xs, e.mean);
            e.error = std::abs(e.mean - e.prediction);
            e.within = within_band(e.error, e.se);
            rep.words.push_back(e);
        }
    return rep;
}

/// The scenario on the alternating battery of length ≤ max_len.
inline PolarReport polar_scenario(int n, double kernel_fraction, const GridMeasure& h_law, int trials,
                                  std::uint64_t seed, int max_len = kPolarMaxLength) {
    if (max_len < 1 || max_len > kPolarMaxLength) throw UsageError("polar words have length 1..4");
    return polar_scenario(n, kernel_fraction, h_law, trials, seed, polar_battery(max_len));
}

}  // namespace rectfree
