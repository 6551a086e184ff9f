#include <catch_amalgamated.hpp>

#include <random>

#include "rectfree/dblock.hpp"
#include "support.hpp"

using namespace rectfree;

namespace {

Alphabet two_block(std::vector<double> rho) {
    return Alphabet(BlockStructure(std::move(rho)), {{"a", 0, 1}, {"b", 1, 1}});
}

}  // namespace

TEST_CASE("block structure validation") {
    CHECK_NOTHROW(BlockStructure({0.25, 0.75}));
    CHECK_THROWS_AS(BlockStructure({0.5, 0.6}), ValidationError);
    CHECK_THROWS_AS(BlockStructure({0.0, 1.0}), ValidationError);
    CHECK_THROWS_AS(BlockStructure(std::vector<double>{}), ValidationError);
    CHECK_THROWS_AS(Alphabet(BlockStructure({1.0}), {{"a", 0, 1}}), ValidationError);
    CHECK_THROWS_AS(Alphabet(BlockStructure({1.0}), {{"a", 0, 0}, {"a", 0, 0}}), UsageError);
}

TEST_CASE("word type chains") {
    auto A = two_block({0.5, 0.5});
    auto c = word_type_chain(A.parse("a a*"), A);
    REQUIRE(c);
    CHECK(*c == std::vector<int>{0, 1, 0});
    CHECK(A.is_square(A.parse("a a*")));
    CHECK_FALSE(word_type_chain(A.parse("a a"), A));
    auto c2 = word_type_chain(A.parse("a b a*"), A);
    REQUIRE(c2);
    CHECK(*c2 == std::vector<int>{0, 1, 1, 0});
    CHECK_THROWS_AS(A.parse("z"), UsageError);
}

TEST_CASE("rotation of a square word stays square") {
    auto A = two_block({0.3, 0.7});
    for (const auto& w : A.square_words(6)) {
        Word r = w;
        for (std::size_t i = 0; i < w.size(); ++i) {
            r = word_rotate(r);
            CHECK(A.is_square(r));
        }
        CHECK(A.is_square(word_adjoint(w)));
    }
}

TEST_CASE("validate_table examples") {
    {
        Alphabet A(BlockStructure({1.0}), {{"h", 0, 0}});
        ScalarMomentTable t(A, 2);
        t.set(A.parse("h"), 0.0);
        t.set(A.parse("h h"), 1.0);
        CHECK(validate_table(t).empty());
    }
    const double lambda = 2.0;
    BlockStructure S({1.0 / 3.0, 2.0 / 3.0});
    Alphabet A(S, {{"a", 0, 1}});
    ScalarMomentTable good(A, 2);
    good.set(A.parse("a a*"), lambda);
    good.set(A.parse("a* a"), lambda * S.rho(0) / S.rho(1));
    CHECK(validate_table(good).empty());
    ScalarMomentTable bad(A, 2);
    bad.set(A.parse("a a*"), lambda);
    bad.set(A.parse("a* a"), lambda);
    auto v = validate_table(bad);
    REQUIRE(v.size() == 1);
    CHECK(v[0].kind == "rho-cyclicity");
    CHECK(v[0].description.find("'a a*','a* a'") != std::string::npos);
}

TEST_CASE("star symmetry violation is reported") {
    Alphabet A(BlockStructure({1.0}), {{"x", 0, 0}});
    ScalarMomentTable t(A, 2);
    t.set(A.parse("x x"), cplx(1.0, 1.0));
    t.set(A.parse("x* x*"), cplx(1.0, 1.0));
    auto v = validate_table(t);
    REQUIRE_FALSE(v.empty());
    CHECK(v[0].kind == "star-symmetry");
}

TEST_CASE("tables reject non-square and over-degree words") {
    auto A = two_block({0.5, 0.5});
    ScalarMomentTable t(A, 3);
    CHECK_THROWS_AS(t.set(A.parse("a"), 1.0), ValidationError);
    CHECK_THROWS_AS(t.set(A.parse("a a"), 1.0), ValidationError);
    CHECK_THROWS_AS(t.set(A.parse("b b b b"), 1.0), ValidationError);
    CHECK_NOTHROW(t.set(A.parse("b b b"), 1.0));
}

TEST_CASE("diagonal insertion") {
    const cplx v(2.0, -1.0);
    CHECK(apply_diagonal_insertion(v, 1, {1.0, 1.0, 1.0}) == v);
    CHECK(apply_diagonal_insertion(v, 2, {0.0, 0.0, 1.0}) == v);
    CHECK(apply_diagonal_insertion(v, 0, {0.0, 0.0, 1.0}) == cplx(0.0));
}

TEST_CASE("random valid tables validate") {
    std::mt19937_64 rng(7);
    auto A = two_block({0.2, 0.8});
    auto t = rftest::random_valid_table<ScalarMomentTable>(A, 6, rng);
    CHECK(t.missing_words().empty());
    CHECK(validate_table(t).empty());
}

TEST_CASE("square word enumeration counts") {
    // One (1,2) generator: only alternating words of even length are square.
    Alphabet A(BlockStructure({0.5, 0.5}), {{"a", 0, 1}});
    auto ws = A.square_words(6);
    CHECK(ws.size() == 6);  // a a*, a* a at lengths 2, 4, 6
}
