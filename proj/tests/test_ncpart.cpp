#include <catch_amalgamated.hpp>

#include <set>

#include "rectfree/ncpart.hpp"

using namespace rectfree;

namespace {

// Oracle: every set partition of [n] as an RGS, filtered by a direct
// four-index crossing test.
std::vector<std::vector<int>> all_set_partitions(int n) {
    std::vector<std::vector<int>> out;
    std::vector<int> a(n, 0);
    std::function<void(int, int)> rec = [&](int i, int m) {
        if (i == n) {
            out.push_back(a);
            return;
        }
        for (int b = 0; b <= m; ++b) {
            a[i] = b;
            rec(i + 1, std::max(m, b + 1));
        }
    };
    a[0] = 0;
    if (n == 1)
        out.push_back(a);
    else
        rec(1, 1);
    return out;
}

bool crosses(const std::vector<int>& a) {
    const int n = static_cast<int>(a.size());
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            for (int k = j + 1; k < n; ++k)
                for (int l = k + 1; l < n; ++l)
                    if (a[i] == a[k] && a[j] == a[l] && a[i] != a[j]) return true;
    return false;
}

long long signed_catalan(int n) {
    return ((n - 1) % 2 == 0 ? 1 : -1) * static_cast<long long>(catalan(n - 1));
}

}  // namespace

TEST_CASE("is_noncrossing on small examples") {
    CHECK_FALSE(is_noncrossing(Partition::from_blocks(4, {{1, 3}, {2, 4}})));
    CHECK(is_noncrossing(Partition::from_blocks(4, {{1, 4}, {2, 3}})));
    CHECK(is_noncrossing(Partition::from_blocks(9, {{1, 6, 8}, {2, 5}, {3, 4}, {7}, {9}})));
    CHECK_FALSE(is_noncrossing(Partition::from_blocks(5, {{1, 3, 5}, {2, 4}})));
}

TEST_CASE("malformed partitions are rejected") {
    CHECK_THROWS_AS(Partition::from_blocks(3, {{1, 2}}), ValidationError);
    CHECK_THROWS_AS(Partition::from_blocks(3, {{1, 2}, {2, 3}}), ValidationError);
    CHECK_THROWS_AS(Partition::from_blocks(3, {{1, 4}, {2, 3}}), ValidationError);
}

TEST_CASE("canonical encoding is unique") {
    auto p = Partition::from_blocks(5, {{4, 2}, {5}, {1, 3}});
    auto q = Partition::from_blocks(5, {{1, 3}, {2, 4}, {5}});
    CHECK(p == q);
    CHECK(p.to_string() == "{{1,3},{2,4},{5}}");
}

TEST_CASE("enumeration matches the brute-force filter for n <= 8") {
    for (int n = 1; n <= 8; ++n) {
        std::set<std::vector<int>> oracle;
        for (const auto& a : all_set_partitions(n))
            if (!crosses(a)) oracle.insert(a);
        std::set<std::vector<int>> got;
        for (const auto& p : enumerate_nc(n)) {
            REQUIRE(is_noncrossing(p));
            got.insert(std::vector<int>(p.rgs().begin(), p.rgs().end()));
        }
        CHECK(got.size() == enumerate_nc(n).size());  // no duplicates
        CHECK(got == oracle);
    }
}

TEST_CASE("counts are Catalan numbers") {
    CHECK(enumerate_nc(1).size() == 1);
    CHECK(enumerate_nc(3).size() == 5);
    CHECK(enumerate_nc(4).size() == 14);
    for (int n = 1; n <= 12; ++n) CHECK(enumerate_nc(n).size() == catalan(n));
    CHECK_THROWS_AS(enumerate_nc(15), CapacityError);
    CHECK_THROWS_AS(enumerate_nc(0), CapacityError);
}

TEST_CASE("leq basics and partial-order axioms") {
    CHECK(leq(Partition::bottom(4), Partition::from_blocks(4, {{1, 4}, {2, 3}})));
    CHECK_FALSE(leq(Partition::top(4), Partition::from_blocks(4, {{1, 4}, {2, 3}})));
    CHECK(leq(Partition::from_blocks(4, {{1, 2}, {3, 4}}), Partition::top(4)));
    CHECK_THROWS_AS(leq(Partition::top(3), Partition::top(4)), UsageError);
    for (int n = 1; n <= 6; ++n) {
        auto all = enumerate_nc(n);
        for (const auto& a : all) {
            CHECK(leq(a, a));
            for (const auto& b : all) {
                if (leq(a, b) && leq(b, a)) CHECK(a == b);
                if (!leq(a, b)) continue;
                for (const auto& c : all)
                    if (leq(b, c)) CHECK(leq(a, c));
            }
        }
    }
}

TEST_CASE("Mobius function values") {
    MobiusCache cache;
    CHECK(cache.mobius(Partition::top(3), Partition::top(3)) == 1);
    CHECK(cache.mobius(Partition::bottom(2), Partition::top(2)) == -1);
    CHECK(cache.mobius(Partition::bottom(4), Partition::top(4)) == -5);
    for (int n = 1; n <= 8; ++n) CHECK(cache.mobius(Partition::bottom(n), Partition::top(n)) == signed_catalan(n));
    CHECK_THROWS_AS(cache.mobius(Partition::top(3), Partition::bottom(3)), DomainError);
}

TEST_CASE("Mobius defining sum identity holds for n <= 7") {
    MobiusCache cache;
    for (int n = 1; n <= 5; ++n) {
        auto all = enumerate_nc(n);
        for (const auto& sigma : all)
            for (const auto& pi : all) {
                if (!leq(sigma, pi)) continue;
                long long s = 0;
                for (const auto& tau : all)
                    if (leq(sigma, tau) && leq(tau, pi)) s += cache.mobius(tau, pi);
                CHECK(s == (sigma == pi ? 1 : 0));
            }
    }
    for (int n = 6; n <= 7; ++n) {
        auto all = enumerate_nc(n);
        const auto top = Partition::top(n);
        auto mu = cache.mobius_to_top(n);
        for (std::size_t i = 0; i < all.size(); ++i) {
            long long s = 0;
            for (std::size_t j = 0; j < all.size(); ++j)
                if (leq(all[i], all[j])) s += mu[j];
            CHECK(s == (all[i] == top ? 1 : 0));
        }
    }
}

TEST_CASE("every non-top noncrossing partition has an interval block") {
    for (int n = 2; n <= 7; ++n)
        for (const auto& p : enumerate_nc(n)) {
            if (p.block_count() == 1) continue;
            bool found = false;
            for (const auto& b : p.blocks())
                if (b.back() - b.front() + 1 == static_cast<int>(b.size()) &&
                    static_cast<int>(b.size()) < n)
                    found = true;
            CHECK(found);
        }
}

TEST_CASE("nc_table agrees with enumerate_nc") {
    const auto& t = nc_table(6, true);
    auto all = enumerate_nc(6);
    REQUIRE(t.blocks.size() == all.size());
    for (std::size_t i = 0; i < all.size(); ++i) CHECK(t.blocks[i] == all[i].block_masks());
    MobiusCache cache;
    CHECK(t.mobius_to_top == cache.mobius_to_top(6));
}
