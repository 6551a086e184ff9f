#pragma once

/**
 * Noncrossing partitions of [n]: canonical encoding, enumeration,
 * refinement order and the Möbius function of NC(n).
 *
 * Partitions are stored as restricted-growth strings (RGS): position i
 * (0-based) carries the index of its block, blocks being numbered in the
 * order of their minima. This encoding is canonical, so it doubles as the
 * memoization key of MobiusCache.
 */

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "rectfree/error.hpp"

namespace rectfree {

/// Default ceiling on n for enumeration (Catalan(14) = 2674440 partitions).
inline constexpr int kMaxEnumerationN = 14;

/// Catalan number C_n, exact for n ≤ 33.
inline std::uint64_t catalan(int n) {
    std::uint64_t c = 1;
    for (int k = 0; k < n; ++k) c = c * 2 * (2 * k + 1) / (k + 2);
    return c;
}

class Partition {
public:
    Partition() = default;

    /// Builds a partition from 1-based blocks; validates cover and disjointness.
    static Partition from_blocks(int n, const std::vector<std::vector<int>>& blocks) {
        if (n < 1 || n > 255) throw ValidationError("partition size must lie in [1,255]");
        std::vector<int> owner(n, -1);
        for (std::size_t b = 0; b < blocks.size(); ++b) {
            if (blocks[b].empty()) throw ValidationError("partition has an empty block");
            for (int e : blocks[b]) {
                if (e < 1 || e > n)
                    throw ValidationError("partition element " + std::to_string(e) + " outside [1," +
                                          std::to_string(n) + "]");
                if (owner[e - 1] != -1)
                    throw ValidationError("partition element " + std::to_string(e) +
                                          " appears in two blocks");
                owner[e - 1] = static_cast<int>(b);
            }
        }
        for (int i = 0; i < n; ++i)
            if (owner[i] == -1)
                throw ValidationError("partition does not cover element " + std::to_string(i + 1));
        return from_labels(owner);
    }

    /// Builds a partition from arbitrary block labels per position (canonicalized).
    static Partition from_labels(const std::vector<int>& labels) {
        Partition p;
        p.rgs_.resize(labels.size());
        std::map<int, std::uint8_t> relabel;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            auto it = relabel.find(labels[i]);
            if (it == relabel.end())
                it = relabel.emplace(labels[i], static_cast<std::uint8_t>(relabel.size())).first;
            p.rgs_[i] = it->second;
        }
        p.nblocks_ = static_cast<int>(relabel.size());
        return p;
    }

    static Partition from_rgs(std::vector<std::uint8_t> rgs, int nblocks) {
        Partition p;
        p.rgs_ = std::move(rgs);
        p.nblocks_ = nblocks;
        return p;
    }

    /// The partition 1_n with a single block.
    static Partition top(int n) { return from_rgs(std::vector<std::uint8_t>(n, 0), 1); }

    /// The partition 0_n made of singletons.
    static Partition bottom(int n) {
        std::vector<std::uint8_t> r(n);
        for (int i = 0; i < n; ++i) r[i] = static_cast<std::uint8_t>(i);
        return from_rgs(std::move(r), n);
    }

    int n() const { return static_cast<int>(rgs_.size()); }
    int block_count() const { return nblocks_; }
    const std::vector<std::uint8_t>& rgs() const { return rgs_; }

    /// Blocks with 1-based elements, ascending, ordered by minima.
    std::vector<std::vector<int>> blocks() const {
        std::vector<std::vector<int>> out(nblocks_);
        for (int i = 0; i < n(); ++i) out[rgs_[i]].push_back(i + 1);
        return out;
    }

    /// Bit masks (bit i = position i, 0-based) of the blocks; requires n ≤ 32.
    std::vector<std::uint32_t> block_masks() const {
        std::vector<std::uint32_t> out(nblocks_, 0u);
        for (int i = 0; i < n(); ++i) out[rgs_[i]] |= (1u << i);
        return out;
    }

    std::string key() const { return std::string(rgs_.begin(), rgs_.end()); }

    std::string to_string() const {
        std::ostringstream os;
        os << '{';
        auto bl = blocks();
        for (std::size_t b = 0; b < bl.size(); ++b) {
            if (b) os << ',';
            os << '{';
            for (std::size_t j = 0; j < bl[b].size(); ++j) {
                if (j) os << ',';
                os << bl[b][j];
            }
            os << '}';
        }
        os << '}';
        return os.str();
    }

    friend bool operator==(const Partition& a, const Partition& b) { return a.rgs_ == b.rgs_; }
    friend bool operator<(const Partition& a, const Partition& b) { return a.rgs_ < b.rgs_; }

private:
    std::vector<std::uint8_t> rgs_;
    int nblocks_ = 0;
};

/// True iff no a<b<c<d with a,c in one block and b,d in another.
inline bool is_noncrossing(const Partition& p) {
    const auto& r = p.rgs();
    const int n = p.n();
    // For each block, the elements between two consecutive members must not
    // belong to a block that also has members outside that gap.
    std::vector<int> first(p.block_count(), n), last(p.block_count(), -1);
    for (int i = 0; i < n; ++i) {
        first[r[i]] = std::min(first[r[i]], i);
        last[r[i]] = std::max(last[r[i]], i);
    }
    for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b) {
            if (r[b] == r[a]) continue;
            for (int c = b + 1; c < n; ++c) {
                if (r[c] != r[a]) continue;
                // a < b < c with a,c in one block: b's block must not reach past c.
                if (last[r[b]] > c) return false;
            }
        }
    return true;
}

/// Calls `visit` on every noncrossing partition of [n] in canonical RGS order.
inline void for_each_nc(int n, const std::function<void(const Partition&)>& visit,
                        int max_n = kMaxEnumerationN) {
    if (n < 1 || n > max_n)
        throw CapacityError("noncrossing enumeration supports 1 <= n <= " + std::to_string(max_n) +
                            ", got n=" + std::to_string(n));
    std::vector<std::uint8_t> rgs(n, 0);
    std::vector<std::uint8_t> stack;  // open blocks, innermost last
    stack.reserve(n);
    // Position i either opens a new block or joins an open block, closing
    // every block opened after it; this stack discipline is exactly NC(n).
    std::function<void(int, int)> rec = [&](int i, int nblocks) {
        if (i == n) {
            visit(Partition::from_rgs(rgs, nblocks));
            return;
        }
        for (std::size_t s = 0; s < stack.size(); ++s) {
            std::vector<std::uint8_t> saved(stack.begin() + static_cast<long>(s) + 1, stack.end());
            stack.resize(s + 1);
            rgs[i] = stack[s];
            rec(i + 1, nblocks);
            stack.insert(stack.end(), saved.begin(), saved.end());
        }
        rgs[i] = static_cast<std::uint8_t>(nblocks);
        stack.push_back(static_cast<std::uint8_t>(nblocks));
        rec(i + 1, nblocks + 1);
        stack.pop_back();
    };
    rgs[0] = 0;
    stack.push_back(0);
    rec(1, 1);
}

/// All noncrossing partitions of [n], canonical, without duplicates.
inline std::vector<Partition> enumerate_nc(int n, int max_n = kMaxEnumerationN) {
    std::vector<Partition> out;
    out.reserve(static_cast<std::size_t>(catalan(std::clamp(n, 0, 20))));
    for_each_nc(n, [&](const Partition& p) { out.push_back(p); }, max_n);
    std::sort(out.begin(), out.end());
    return out;
}

/// Refinement order: every block of σ lies inside a block of π.
inline bool leq(const Partition& sigma, const Partition& pi) {
    if (sigma.n() != pi.n())
        throw UsageError("leq: partitions of different sizes (" + std::to_string(sigma.n()) + " vs " +
                         std::to_string(pi.n()) + ")");
    const auto& s = sigma.rgs();
    const auto& p = pi.rgs();
    std::vector<int> image(sigma.block_count(), -1);
    for (int i = 0; i < sigma.n(); ++i) {
        int& im = image[s[i]];
        if (im == -1)
            im = p[i];
        else if (im != p[i])
            return false;
    }
    return true;
}

/**
 * Memoized Möbius function of NC(n), evaluated by the defining recursion
 * μ(π,π) = 1 and μ(σ,π) = −Σ_{σ<τ≤π} μ(τ,π).
 */
class MobiusCache {
public:
    long long mobius(const Partition& sigma, const Partition& pi) {
        if (!leq(sigma, pi))
            throw DomainError("mobius: " + sigma.to_string() + " is not below " + pi.to_string());
        return rec(sigma, pi);
    }

    /// μ(σ,1_n) for every σ of enumerate_nc(n), in that order.
    std::vector<long long> mobius_to_top(int n) {
        const auto& all = partitions(n);
        const Partition one = Partition::top(n);
        std::vector<long long> out;
        out.reserve(all.size());
        for (const auto& s : all) out.push_back(rec(s, one));
        return out;
    }

    std::size_t size() const { return memo_.size(); }

private:
    const std::vector<Partition>& partitions(int n) {
        auto it = nc_.find(n);
        if (it == nc_.end()) it = nc_.emplace(n, enumerate_nc(n)).first;
        return it->second;
    }

    long long rec(const Partition& sigma, const Partition& pi) {
        if (sigma == pi) return 1;
        auto key = std::make_pair(sigma.key(), pi.key());
        auto it = memo_.find(key);
        if (it != memo_.end()) return it->second;
        long long sum = 0;
        for (const auto& tau : partitions(sigma.n())) {
            if (tau == sigma) continue;
            if (tau.block_count() >= sigma.block_count()) continue;  // τ > σ forces fewer blocks
            if (leq(sigma, tau) && leq(tau, pi)) sum += rec(tau, pi);
        }
        memo_.emplace(std::move(key), -sum);
        return -sum;
    }

    std::map<std::pair<std::string, std::string>, long long> memo_;
    std::map<int, std::vector<Partition>> nc_;
};

/// Precomputed view of NC(n) used by the transforms: block masks, and μ(σ,1_n) on demand.
struct NCTable {
    int n = 0;
    std::vector<std::vector<std::uint32_t>> blocks;
    std::vector<long long> mobius_to_top;  ///< empty unless requested
};

/**
 * Shared, lazily built NCTable for each n (thread-safe). The Möbius column
 * costs O(Catalan(n)^2) and is only built when `with_mobius` is set.
 */
inline const NCTable& nc_table(int n, bool with_mobius) {
    static std::mutex mu;
    static std::map<int, std::unique_ptr<NCTable>> tables;
    std::lock_guard<std::mutex> lock(mu);
    auto it = tables.find(n);
    if (it == tables.end()) {
        auto t = std::make_unique<NCTable>();
        t->n = n;
        for_each_nc(n, [&](const Partition& p) { t->blocks.push_back(p.block_masks()); });
        it = tables.emplace(n, std::move(t)).first;
    }
    NCTable& t = *it->second;
    if (with_mobius && t.mobius_to_top.empty()) {
        // for_each_nc visits in canonical order, as enumerate_nc returns.
        MobiusCache cache;
        t.mobius_to_top = cache.mobius_to_top(n);
    }
    return t;
}

}  // namespace rectfree
