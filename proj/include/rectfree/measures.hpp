#pragma once

/**
 * Compactly supported probability measures on the real line, mostly on
 * [0,∞): piecewise-constant grid densities, finite atomic measures, the
 * Marchenko–Pastur family and pushforwards of those under increasing maps.
 *
 * MP(λ, s) for λ ≥ 1 is the law with all free cumulants λ, dilated by s:
 * support [s(√λ−1)², s(√λ+1)²], density √((b−x)(x−a)) / (2π s x), mean sλ.
 * Integrals against it are taken in the angle θ with x = c + r cos θ, which
 * removes the square-root edges; near θ = π the complement π − θ is carried
 * separately so the hard edge at 0 (λ = 1) keeps full relative precision.
 *
 * Logarithmic energies Σ(μ) = ∬ log|x−y| dμ(x)dμ(y):
 *   - grid: exact for the piecewise-constant density, from the second
 *     antiderivative H(u) = u²/2·log|u| − 3u²/4 of the kernel over cell pairs;
 *   - MP: Chebyshev expansion log|x−y| = log(r/2) − Σ_n (2/n) T_n(x̃)T_n(ỹ),
 *     with the Chebyshev moments from an N-point midpoint rule in θ;
 *   - pushforward f_*μ: Σ(μ) + ∬ log((f(x)−f(y))/(x−y)) dμ dμ;
 *   - atoms: −∞, reported as an ExtReal rather than a float infinity.
 */

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "rectfree/error.hpp"

namespace rectfree {

/// Default number of cells (grid factories) and of θ-nodes (MP energy).
inline constexpr int kDefaultCells = 2000;
/// Largest moment order accepted by GridMeasure::moment.
inline constexpr int kMaxMomentOrder = 64;
/// Accepted deviation of the total mass from 1.
inline constexpr double kMassTolerance = 1e-9;

/**
 * A real number or ±∞. Infinite values are explicit states, so they never
 * arise from overflow and can be reported as such.
 */
class ExtReal {
public:
    enum class State { finite, pos_inf, neg_inf };

    ExtReal(double v = 0.0) : v_(v) {  // NOLINT(google-explicit-constructor)
        if (!std::isfinite(v)) throw DomainError("ExtReal built from a non-finite double");
    }
    static ExtReal neg_infinity() { return ExtReal(State::neg_inf); }
    static ExtReal pos_infinity() { return ExtReal(State::pos_inf); }

    State state() const { return s_; }
    bool is_finite() const { return s_ == State::finite; }
    bool is_neg_inf() const { return s_ == State::neg_inf; }
    bool is_pos_inf() const { return s_ == State::pos_inf; }

    /// The finite value; DomainError for ±∞.
    double value() const {
        if (!is_finite()) throw DomainError("value() on an infinite ExtReal (" + to_string() + ")");
        return v_;
    }

    std::string to_string() const {
        if (s_ == State::neg_inf) return "-inf";
        if (s_ == State::pos_inf) return "+inf";
        std::ostringstream os;
        os.precision(17);
        os << v_;
        return os.str();
    }

    friend ExtReal operator+(const ExtReal& a, const ExtReal& b) {
        if (a.is_finite() && b.is_finite()) return ExtReal(a.v_ + b.v_);
        if ((a.is_neg_inf() && b.is_pos_inf()) || (a.is_pos_inf() && b.is_neg_inf()))
            throw DomainError("sum of +inf and -inf is undefined");
        return a.is_finite() ? b : a;
    }
    friend ExtReal operator-(const ExtReal& a) {
        if (a.is_finite()) return ExtReal(-a.v_);
        return a.is_neg_inf() ? pos_infinity() : neg_infinity();
    }
    friend ExtReal operator-(const ExtReal& a, const ExtReal& b) { return a + (-b); }
    /// Scalar multiple; 0·(±∞) is taken as 0 (a vanishing coefficient drops the term).
    friend ExtReal operator*(double c, const ExtReal& a) {
        if (a.is_finite()) return ExtReal(c * a.v_);
        if (c == 0.0) return ExtReal(0.0);
        return c > 0.0 ? a : -a;
    }

private:
    explicit ExtReal(State s) : s_(s) {}
    double v_ = 0.0;
    State s_ = State::finite;
};

namespace detail {

/// Node of the double-exponential rule on [0,1]; uc = 1 − u kept exactly.
struct DENode {
    double u, uc, w;
};

/**
 * Double-exponential (tanh-sinh) nodes on [0,1] with step h = 2^-level,
 * |t| ≤ tmax. With odd_only, only the nodes new at this level.
 */
inline std::vector<DENode> de_nodes(int level, bool odd_only = false, double tmax = 3.5) {
    const double h = std::ldexp(1.0, -level);
    const long kmax = static_cast<long>(std::floor(tmax / h));
    std::vector<DENode> out;
    for (long k = -kmax; k <= kmax; ++k) {
        if (odd_only && level > 0 && k % 2 == 0) continue;
        const double t = static_cast<double>(k) * h;
        const double s = std::numbers::pi / 2.0 * std::sinh(t);
        const double u = 1.0 / (1.0 + std::exp(-2.0 * s));
        const double uc = 1.0 / (1.0 + std::exp(2.0 * s));
        const double w = h * std::numbers::pi / 2.0 * std::cosh(t) * 2.0 * u * uc;
        out.push_back({u, uc, w});
    }
    return out;
}

/// ∫_0^1 f(u, 1−u) du by nested DE levels until the relative change is below rel_tol.
template <class F>
double de_integrate01(F&& f, double rel_tol = 1e-14, int max_level = 10) {
    double sum = 0.0;
    for (const auto& n : de_nodes(0)) sum += n.w * f(n.u, n.uc);
    double prev = sum;
    for (int level = 1; level <= max_level; ++level) {
        double add = 0.0;
        for (const auto& n : de_nodes(level, true)) add += n.w * f(n.u, n.uc);
        sum = 0.5 * sum + add;
        if (level >= 4 && std::abs(sum - prev) <= rel_tol * std::max(1.0, std::abs(sum))) return sum;
        prev = sum;
    }
    return sum;
}

/**
 * J_k = ∬_{[0,1]²} log|u − v + k| du dv, the cell-pair log-kernel integral
 * for cells k apart on a unit grid. Exact second difference of
 * H(u) = u²/2·log|u| − 3u²/4 for small k; for k ≥ 8 the even-moment series
 * log k − Σ_j k^{−2j} / (j(2j+1)(2j+2)) avoids the cancellation.
 */
inline double cell_pair_log_kernel(long k) {
    k = std::abs(k);
    if (k == 0) return -1.5;
    auto H = [](double u) { return u == 0.0 ? 0.0 : u * u / 2.0 * std::log(std::abs(u)) - 0.75 * u * u; };
    const double kd = static_cast<double>(k);
    if (k < 8) return H(kd + 1.0) - 2.0 * H(kd) + H(kd - 1.0);
    double s = std::log(kd);
    const double inv2 = 1.0 / (kd * kd);
    double p = 1.0;
    for (int j = 1; j <= 14; ++j) {
        p *= inv2;
        s -= p / (j * (2.0 * j + 1.0) * (2.0 * j + 2.0));
    }
    return s;
}

template <int N>
struct GaussRule {
    std::array<double, N> x{}, w{};  // on [0,1]
    GaussRule() {
        using G = boost::math::quadrature::gauss<double, N>;
        const auto& a = G::abscissa();
        const auto& wt = G::weights();
        std::vector<std::pair<double, double>> nodes;
        for (std::size_t i = 0; i < a.size(); ++i) {
            nodes.push_back({a[i], wt[i]});
            if (a[i] != 0.0) nodes.push_back({-a[i], wt[i]});
        }
        std::sort(nodes.begin(), nodes.end());
        for (int i = 0; i < N; ++i) {
            x[static_cast<std::size_t>(i)] = 0.5 * (nodes[static_cast<std::size_t>(i)].first + 1.0);
            w[static_cast<std::size_t>(i)] = 0.5 * nodes[static_cast<std::size_t>(i)].second;
        }
    }
};

template <int N>
const GaussRule<N>& gauss_rule() {
    static const GaussRule<N> rule;
    return rule;
}

}  // namespace detail

/**
 * A strictly increasing map of [0,∞) (or of an interval) into the reals.
 * Monomials c·t^p are tracked symbolically so compositions such as
 * t ↦ f(√t)² with linear f stay exact and dilations map grids to grids.
 */
class MonotoneMap {
public:
    using Fn = std::function<double(double)>;

    static MonotoneMap identity() { return monomial(1.0, 1.0, "identity"); }
    static MonotoneMap linear(double c) {
        if (!(c > 0.0)) throw PreconditionError("linear map needs a positive factor");
        return monomial(c, 1.0, "linear(" + num(c) + ")");
    }
    /// t ↦ c·t^p on [0,∞), p > 0.
    static MonotoneMap power(double p, double c = 1.0) {
        if (!(p > 0.0) || !(c > 0.0)) throw PreconditionError("power map needs p > 0 and c > 0");
        return monomial(c, p, "power(" + num(p) + (c == 1.0 ? "" : "," + num(c)) + ")");
    }
    /// Piecewise-linear interpolation of samples; both coordinates strictly increasing.
    static MonotoneMap from_samples(std::vector<double> xs, std::vector<double> ys) {
        if (xs.size() != ys.size() || xs.size() < 2)
            throw PreconditionError("sampled map needs at least two (x, y) samples of equal count");
        for (std::size_t i = 1; i < xs.size(); ++i) {
            if (!(xs[i] > xs[i - 1])) throw PreconditionError("sample abscissae must be strictly increasing");
            if (!(ys[i] > ys[i - 1]))
                throw PreconditionError("sampled map is not strictly increasing near x = " + num(xs[i]));
        }
        MonotoneMap m;
        m.name_ = "samples(" + std::to_string(xs.size()) + ")";
        m.lo_ = xs.front();
        m.hi_ = xs.back();
        auto seg = [xs](double x) {
            auto it = std::upper_bound(xs.begin(), xs.end(), x);
            std::size_t i = static_cast<std::size_t>(it - xs.begin());
            return std::clamp<std::size_t>(i == 0 ? 0 : i - 1, 0, xs.size() - 2);
        };
        m.f_ = [xs, ys, seg](double x) {
            const std::size_t i = seg(x);
            const double t = (x - xs[i]) / (xs[i + 1] - xs[i]);
            return ys[i] + t * (ys[i + 1] - ys[i]);
        };
        m.df_ = [xs, ys, seg](double x) {
            const std::size_t i = seg(x);
            return (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]);
        };
        return m;
    }
    /// An arbitrary map with its derivative; monotonicity is checked on use.
    static MonotoneMap custom(std::string name, Fn f, Fn df) {
        MonotoneMap m;
        m.name_ = std::move(name);
        m.f_ = std::move(f);
        m.df_ = std::move(df);
        return m;
    }

    /// outer ∘ inner.
    friend MonotoneMap compose(const MonotoneMap& outer, const MonotoneMap& inner) {
        if (outer.mono_ && inner.mono_) {
            const auto [c1, p1] = *outer.mono_;
            const auto [c2, p2] = *inner.mono_;
            const double c = c1 * std::pow(c2, p1), p = p1 * p2;
            MonotoneMap m = monomial(c, p, outer.name_ + "∘" + inner.name_);
            return m;
        }
        MonotoneMap m;
        m.name_ = outer.name_ + "∘" + inner.name_;
        m.lo_ = inner.lo_;
        m.hi_ = inner.hi_;
        m.f_ = [outer, inner](double x) { return outer(inner(x)); };
        m.df_ = [outer, inner](double x) { return outer.derivative(inner(x)) * inner.derivative(x); };
        return m;
    }

    double operator()(double x) const { return f_(x); }
    double derivative(double x) const { return df_(x); }
    const std::string& name() const { return name_; }
    /// (c, p) when the map is t ↦ c·t^p.
    const std::optional<std::pair<double, double>>& monomial_form() const { return mono_; }
    /// The factor c when the map is t ↦ c·t.
    std::optional<double> linear_factor() const {
        if (mono_ && mono_->second == 1.0) return mono_->first;
        return std::nullopt;
    }

    /// log f(x); −∞ is returned as the lowest double only through underflow of f.
    double log_value(double x) const {
        if (mono_) return std::log(mono_->first) + mono_->second * std::log(x);
        return std::log(f_(x));
    }

    /// log of the divided difference (f(x) − f(y))/(x − y), log f'(x) on the diagonal.
    double log_divided_difference(double x, double y) const {
        if (mono_) {
            const auto [c, p] = *mono_;
            if (x < y) std::swap(x, y);
            if (x == y) return std::log(c * p) + (p - 1.0) * std::log(x);
            const double lr = std::log(y / x);  // −∞ when y = 0
            const double ratio = y == 0.0 ? 1.0 : std::expm1(p * lr) / std::expm1(lr);
            return std::log(c) + (p - 1.0) * std::log(x) + std::log(ratio);
        }
        if (x != y) {
            const double dd = (f_(x) - f_(y)) / (x - y);
            if (dd > 0.0) return std::log(dd);
        }
        return std::log(df_(0.5 * (x + y)));
    }

    /**
     * Checks strict increase on [lo, hi] by sampling 4097 points (exact for
     * monomials and sampled maps, whose monotonicity is structural).
     */
    void check_increasing_on(double lo, double hi) const {
        if (lo_ && (lo < *lo_ - 1e-12 || hi > *hi_ + 1e-12))
            throw PreconditionError("map '" + name_ + "' is only defined on [" + num(*lo_) + ", " + num(*hi_) +
                                    "], support is [" + num(lo) + ", " + num(hi) + "]");
        if (mono_) {
            if (lo < 0.0) throw PreconditionError("monomial map '" + name_ + "' needs support in [0,∞)");
            return;
        }
        constexpr int kSamples = 4097;
        double prev = f_(lo);
        for (int i = 1; i < kSamples; ++i) {
            const double x = lo + (hi - lo) * i / (kSamples - 1);
            const double y = f_(x);
            if (!(y > prev))
                throw PreconditionError("map '" + name_ + "' is not strictly increasing near x = " + num(x));
            prev = y;
        }
    }

private:
    MonotoneMap() = default;

    static std::string num(double v) {
        std::ostringstream os;
        os << v;
        return os.str();
    }

    static MonotoneMap monomial(double c, double p, std::string name) {
        MonotoneMap m;
        m.name_ = std::move(name);
        m.mono_ = std::make_pair(c, p);
        m.f_ = [c, p](double x) { return p == 1.0 ? c * x : c * std::pow(x, p); };
        m.df_ = [c, p](double x) { return p == 1.0 ? c : c * p * std::pow(x, p - 1.0); };
        return m;
    }

    std::string name_;
    Fn f_, df_;
    std::optional<std::pair<double, double>> mono_;
    std::optional<double> lo_, hi_;
};

/**
 * A compactly supported probability measure. Variants: grid (uniform cells
 * with constant density), atoms, MP(λ, scale) and the pushforward of a grid
 * or MP measure under an increasing map.
 */
class GridMeasure {
public:
    enum class Kind { grid, atoms, mp, pushforward };

    /// Piecewise-constant density on `density.size()` equal cells of [xmin, xmax]; mass must be 1.
    static GridMeasure grid(double xmin, double xmax, std::vector<double> density) {
        if (!(xmax > xmin)) throw ValidationError("grid measure needs xmin < xmax");
        if (density.empty()) throw ValidationError("grid measure needs at least one cell");
        const double h = (xmax - xmin) / static_cast<double>(density.size());
        double mass = 0.0;
        for (double d : density) {
            if (!(d >= 0.0) || !std::isfinite(d)) throw ValidationError("grid density must be finite and nonnegative");
            mass += d * h;
        }
        if (std::abs(mass - 1.0) > kMassTolerance)
            throw ValidationError("grid measure has total mass " + std::to_string(mass) + ", expected 1");
        GridMeasure m(Kind::grid);
        m.xmin_ = xmin;
        m.xmax_ = xmax;
        m.density_ = std::move(density);
        return m;
    }

    /// Cell averages of a nonnegative function, renormalized to mass 1.
    static GridMeasure from_density(double xmin, double xmax, int cells, const std::function<double(double)>& rho) {
        if (cells < 1) throw ValidationError("grid measure needs at least one cell");
        const auto& g = detail::gauss_rule<8>();
        const double h = (xmax - xmin) / cells;
        std::vector<double> d(static_cast<std::size_t>(cells));
        double mass = 0.0;
        for (int i = 0; i < cells; ++i) {
            double s = 0.0;
            for (int q = 0; q < 8; ++q) s += g.w[q] * rho(xmin + (i + g.x[q]) * h);
            if (!(s >= 0.0)) throw ValidationError("density function is negative or not finite on the grid");
            d[static_cast<std::size_t>(i)] = s;
            mass += s * h;
        }
        if (!(mass > 0.0)) throw ValidationError("density function has zero mass on the grid");
        for (auto& v : d) v /= mass;
        return grid(xmin, xmax, std::move(d));
    }

    static GridMeasure uniform(double a, double b, int cells = 1) {
        return grid(a, b, std::vector<double>(static_cast<std::size_t>(cells), 1.0 / (b - a)));
    }

    /// Atoms (position, weight) with nonnegative weights summing to 1.
    static GridMeasure atoms(std::vector<std::pair<double, double>> atoms) {
        if (atoms.empty()) throw ValidationError("atomic measure needs at least one atom");
        double mass = 0.0;
        for (const auto& [x, w] : atoms) {
            if (!std::isfinite(x) || !(w >= 0.0)) throw ValidationError("atoms need finite positions and weights >= 0");
            mass += w;
        }
        if (std::abs(mass - 1.0) > kMassTolerance)
            throw ValidationError("atomic measure has total mass " + std::to_string(mass) + ", expected 1");
        std::sort(atoms.begin(), atoms.end());
        GridMeasure m(Kind::atoms);
        m.atoms_ = std::move(atoms);
        return m;
    }

    /// Marchenko–Pastur law MP(λ) dilated by `scale`; λ ≥ 1.
    static GridMeasure mp(double lambda, double scale = 1.0) {
        if (!(lambda >= 1.0) || !std::isfinite(lambda))
            throw ValidationError("MP parameter must satisfy lambda >= 1");
        if (!(scale > 0.0) || !std::isfinite(scale)) throw ValidationError("MP scale must be positive");
        GridMeasure m(Kind::mp);
        m.lambda_ = lambda;
        m.scale_ = scale;
        const double sl = std::sqrt(lambda);
        m.xmin_ = scale * (sl - 1.0) * (sl - 1.0);
        m.xmax_ = scale * (sl + 1.0) * (sl + 1.0);
        return m;
    }

    Kind kind() const { return kind_; }
    int cells() const { return static_cast<int>(density_.size()); }
    const std::vector<double>& density() const { return density_; }
    const std::vector<std::pair<double, double>>& atom_list() const { return atoms_; }
    double lambda() const { return lambda_; }
    double scale() const { return scale_; }
    /// Base measure of a pushforward (grid or MP).
    const GridMeasure& base() const { return *base_; }
    const MonotoneMap& map() const { return *map_; }

    /// Smallest closed interval containing the support.
    std::pair<double, double> support() const {
        switch (kind_) {
            case Kind::atoms: return {atoms_.front().first, atoms_.back().first};
            case Kind::pushforward: {
                auto [a, b] = base_->support();
                return {(*map_)(a), (*map_)(b)};
            }
            default: return {xmin_, xmax_};
        }
    }

    std::string describe() const {
        std::ostringstream os;
        os.precision(12);
        switch (kind_) {
            case Kind::grid: os << "grid[" << xmin_ << "," << xmax_ << "] cells=" << density_.size(); break;
            case Kind::atoms: os << "atoms(" << atoms_.size() << ")"; break;
            case Kind::mp: os << "MP(lambda=" << lambda_ << ",scale=" << scale_ << ")"; break;
            case Kind::pushforward: os << map_->name() << "_*" << base_->describe(); break;
        }
        return os.str();
    }

    /// ∫ g dμ: exact sums for atoms, 16-point Gauss per cell for grids, adaptive DE in θ for MP.
    double integrate(const std::function<double(double)>& g) const {
        switch (kind_) {
            case Kind::atoms: {
                double s = 0.0;
                for (const auto& [x, w] : atoms_) s += w * g(x);
                return s;
            }
            case Kind::grid: {
                const auto& r = detail::gauss_rule<16>();
                const double h = cell_width();
                double s = 0.0;
                for (std::size_t i = 0; i < density_.size(); ++i) {
                    if (density_[i] == 0.0) continue;
                    double c = 0.0;
                    for (int q = 0; q < 16; ++q) c += r.w[q] * g(xmin_ + (static_cast<double>(i) + r.x[q]) * h);
                    s += density_[i] * h * c;
                }
                return s;
            }
            case Kind::mp:
                return detail::de_integrate01([&](double u, double uc) {
                    const auto p = mp_point(u, uc);
                    return p.weight * g(p.x);
                });
            case Kind::pushforward: {
                const MonotoneMap& f = *map_;
                return base_->integrate([&](double x) { return g(f(x)); });
            }
        }
        return 0.0;
    }

    /// ∫ xⁿ dμ, 0 ≤ n ≤ kMaxMomentOrder.
    double moment(int n) const {
        if (n < 0 || n > kMaxMomentOrder)
            throw CapacityError("moment order must lie in [0, " + std::to_string(kMaxMomentOrder) + "]");
        if (n == 0) return 1.0;
        if (kind_ == Kind::grid) {
            const double h = cell_width();
            double s = 0.0;
            for (std::size_t i = 0; i < density_.size(); ++i) {
                if (density_[i] == 0.0) continue;
                const double a = xmin_ + static_cast<double>(i) * h, b = a + h;
                s += density_[i] * (std::pow(b, n + 1) - std::pow(a, n + 1)) / (n + 1);
            }
            return s;
        }
        if (kind_ == Kind::pushforward) {
            const MonotoneMap& f = *map_;
            return base_->integrate([&](double x) { return std::pow(f(x), n); });
        }
        return integrate([n](double x) { return std::pow(x, n); });
    }

    double mean() const { return moment(1); }

    /// ∫ log x dμ; −∞ for an atom at 0. Support must lie in [0,∞).
    ExtReal log_moment() const {
        if (support().first < 0.0) throw DomainError("log_moment needs support in [0,∞)");
        switch (kind_) {
            case Kind::atoms: {
                double s = 0.0;
                for (const auto& [x, w] : atoms_) {
                    if (w == 0.0) continue;
                    if (x == 0.0) return ExtReal::neg_infinity();
                    s += w * std::log(x);
                }
                return s;
            }
            case Kind::grid: {
                auto F = [](double x) { return x == 0.0 ? 0.0 : x * std::log(x) - x; };
                const double h = cell_width();
                double s = 0.0;
                for (std::size_t i = 0; i < density_.size(); ++i) {
                    if (density_[i] == 0.0) continue;
                    const double a = xmin_ + static_cast<double>(i) * h, b = a + h;
                    s += density_[i] * (F(b) - F(a));
                }
                return s;
            }
            case Kind::mp:
                return detail::de_integrate01([&](double u, double uc) {
                    const auto p = mp_point(u, uc);
                    return p.weight * p.log_x;
                });
            case Kind::pushforward: return pushforward_log_moment();
        }
        return 0.0;
    }

    /**
     * Σ(μ) = ∬ log|x−y| dμ dμ; −∞ for atoms. `resolution` is the number of
     * θ-nodes (and Chebyshev terms) for MP; grids are exact for their cells.
     */
    ExtReal log_energy(int resolution = kDefaultCells) const {
        switch (kind_) {
            case Kind::atoms: return ExtReal::neg_infinity();
            case Kind::grid: return grid_energy();
            case Kind::mp: return mp_energy(resolution);
            case Kind::pushforward: return base_->log_energy(resolution) + ExtReal(dd_energy());
        }
        return 0.0;
    }

    friend GridMeasure pushforward_increasing(const GridMeasure& mu, const MonotoneMap& f);

private:
    explicit GridMeasure(Kind k) : kind_(k) {}

    double cell_width() const { return (xmax_ - xmin_) / static_cast<double>(density_.size()); }

    struct MPPoint {
        double x, log_x, weight;  // weight includes the θ Jacobian and the π factor of θ = πu
    };

    /// Point of MP at θ = πu (uc = 1 − u exact) with its density weight per du.
    MPPoint mp_point(double u, double uc) const {
        const double sl = std::sqrt(lambda_);
        const double r = 2.0 * scale_ * sl;
        double s, co;  // sin(θ/2), cos(θ/2)
        if (u <= 0.5) {
            s = std::sin(std::numbers::pi * u / 2.0);
            co = std::cos(std::numbers::pi * u / 2.0);
        } else {
            s = std::cos(std::numbers::pi * uc / 2.0);
            co = std::sin(std::numbers::pi * uc / 2.0);
        }
        const double x = xmin_ + 2.0 * r * co * co;
        const double w = xmin_ == 0.0 ? r * s * s / (std::numbers::pi * scale_)
                                      : 2.0 * r * r * s * s * co * co / (std::numbers::pi * scale_ * x);
        const double lx = xmin_ == 0.0 ? std::log(2.0 * r) + 2.0 * std::log(co) : std::log(x);
        return {x, lx, w * std::numbers::pi};
    }

    ExtReal grid_energy() const {
        const std::size_t m = density_.size();
        const double h = cell_width();
        std::vector<double> mass(m);
        for (std::size_t i = 0; i < m; ++i) mass[i] = density_[i] * h;
        double total = 0.0;
        for (double v : mass) total += v;
        double s = total * total * std::log(h);
        for (std::size_t k = 0; k < m; ++k) {
            double c = 0.0;
            for (std::size_t i = 0; i + k < m; ++i) c += mass[i] * mass[i + k];
            if (c == 0.0) continue;
            s += (k == 0 ? 1.0 : 2.0) * c * detail::cell_pair_log_kernel(static_cast<long>(k));
        }
        return s;
    }

    ExtReal mp_energy(int n_nodes) const {
        if (n_nodes < 16) throw CapacityError("MP energy needs at least 16 nodes");
        const std::size_t N = static_cast<std::size_t>(n_nodes);
        std::vector<double> theta(N), w(N);
        for (std::size_t j = 0; j < N; ++j) {
            const double u = (static_cast<double>(j) + 0.5) / static_cast<double>(N);
            const double uc = (static_cast<double>(N - j) - 0.5) / static_cast<double>(N);
            theta[j] = std::numbers::pi * u;
            w[j] = mp_point(u, uc).weight / static_cast<double>(N);
        }
        // τ_n = Σ_j w_j cos(nθ_j) via the Chebyshev recurrence per node.
        std::vector<double> tau(N, 0.0);
        for (std::size_t j = 0; j < N; ++j) {
            const double c1 = std::cos(theta[j]);
            double tm1 = 1.0, t = c1;
            for (std::size_t n = 1; n < N; ++n) {
                tau[n] += w[j] * t;
                const double tn = 2.0 * c1 * t - tm1;
                tm1 = t;
                t = tn;
            }
        }
        const double r = 2.0 * scale_ * std::sqrt(lambda_);
        double s = 0.0;
        for (std::size_t n = N - 1; n >= 1; --n) s += tau[n] * tau[n] / static_cast<double>(n);
        return std::log(r / 2.0) - 2.0 * s;
    }

    /// Quadrature nodes of the base measure used for the double integral of the divided difference.
    std::vector<std::pair<double, double>> base_nodes(int de_level) const {
        std::vector<std::pair<double, double>> out;
        if (kind_ == Kind::grid) {
            const auto& r = detail::gauss_rule<3>();
            const double h = cell_width();
            for (std::size_t i = 0; i < density_.size(); ++i) {
                if (density_[i] == 0.0) continue;
                for (int q = 0; q < 3; ++q)
                    out.push_back({xmin_ + (static_cast<double>(i) + r.x[q]) * h, density_[i] * h * r.w[q]});
            }
        } else {
            for (const auto& n : detail::de_nodes(de_level)) {
                const auto p = mp_point(n.u, n.uc);
                out.push_back({p.x, n.w * p.weight});
            }
        }
        return out;
    }

    /// ∬ log((f(x) − f(y))/(x − y)) dν dν over the base ν.
    double dd_energy() const {
        const MonotoneMap& f = *map_;
        auto product = [&](const std::vector<std::pair<double, double>>& nodes) {
            double total = 0.0;
            for (std::size_t p = 0; p < nodes.size(); ++p) {
                const auto [xp, wp] = nodes[p];
                double row = 0.5 * wp * f.log_divided_difference(xp, xp);
                for (std::size_t q = p + 1; q < nodes.size(); ++q)
                    row += nodes[q].second * f.log_divided_difference(xp, nodes[q].first);
                total += 2.0 * wp * row;
            }
            return total;
        };
        if (base_->kind_ == Kind::grid) return product(base_->base_nodes(0));
        double prev = product(base_->base_nodes(4));
        for (int level = 5; level <= 7; ++level) {
            const double cur = product(base_->base_nodes(level));
            if (std::abs(cur - prev) < 1e-12) return cur;
            prev = cur;
        }
        return prev;
    }

    ExtReal pushforward_log_moment() const {
        const MonotoneMap& f = *map_;
        const GridMeasure& b = *base_;
        if (b.kind_ == Kind::mp)
            return detail::de_integrate01([&](double u, double uc) {
                const auto p = b.mp_point(u, uc);
                return p.weight * f.log_value(p.x);
            });
        // Grid base: DE rule per cell, so a zero of f at a cell edge is integrated accurately.
        const double h = b.cell_width();
        const auto nodes = detail::de_nodes(4);
        double s = 0.0;
        for (std::size_t i = 0; i < b.density_.size(); ++i) {
            if (b.density_[i] == 0.0) continue;
            const double a = b.xmin_ + static_cast<double>(i) * h;
            double c = 0.0;
            for (const auto& n : nodes) {
                const double x = n.u <= 0.5 ? a + h * n.u : a + h - h * n.uc;
                c += n.w * f.log_value(x);
            }
            s += b.density_[i] * h * c;
        }
        return s;
    }

    Kind kind_;
    double xmin_ = 0.0, xmax_ = 0.0;
    std::vector<double> density_;
    std::vector<std::pair<double, double>> atoms_;
    double lambda_ = 1.0, scale_ = 1.0;
    std::shared_ptr<const GridMeasure> base_;
    std::shared_ptr<const MonotoneMap> map_;
};

/**
 * Law of f(X) for X ~ μ and f strictly increasing on the support of μ.
 * Dilations of grids and MP laws and images of atoms are returned in closed
 * form; other cases keep (base, map) and integrate through the base.
 */
inline GridMeasure pushforward_increasing(const GridMeasure& mu, const MonotoneMap& f) {
    using Kind = GridMeasure::Kind;
    auto [lo, hi] = mu.support();
    f.check_increasing_on(lo, hi);
    if (mu.kind() == Kind::atoms) {
        auto atoms = mu.atom_list();
        for (auto& a : atoms) a.first = f(a.first);
        return GridMeasure::atoms(std::move(atoms));
    }
    if (auto c = f.linear_factor()) {
        if (*c == 1.0) return mu;
        if (mu.kind() == Kind::mp) return GridMeasure::mp(mu.lambda(), mu.scale() * *c);
        if (mu.kind() == Kind::grid) {
            auto d = mu.density();
            for (auto& v : d) v /= *c;
            return GridMeasure::grid(lo * *c, hi * *c, std::move(d));
        }
    }
    if (mu.kind() == Kind::pushforward) return pushforward_increasing(mu.base(), compose(f, mu.map()));
    GridMeasure out(Kind::pushforward);
    out.base_ = std::make_shared<const GridMeasure>(mu);
    out.map_ = std::make_shared<const MonotoneMap>(f);
    return out;
}

/// Free-function spellings of the accessors.
inline double moment(const GridMeasure& mu, int n) { return mu.moment(n); }
inline ExtReal log_moment(const GridMeasure& mu) { return mu.log_moment(); }
inline ExtReal log_energy(const GridMeasure& mu, int resolution = kDefaultCells) { return mu.log_energy(resolution); }

}  // namespace rectfree
