#pragma once

/**
 * @file io.hpp
 * JSON interchange for block structures, moment and cumulant tables,
 * measures, polynomial systems, matrix points, ensemble plans and reports.
 *
 * Complex scalars are [re, im] pairs, words are arrays of letter names with
 * a trailing '*' for adjoints, and block indices are 1-based. Doubles are
 * written in shortest round-trip form, so parse(dump(x)) reproduces x.
 * Malformed documents raise ValidationError.
 */

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rectfree/cumulant.hpp"
#include "rectfree/dblock.hpp"
#include "rectfree/error.hpp"
#include "rectfree/measures.hpp"
#include "rectfree/ncderiv.hpp"
#include "rectfree/randmat.hpp"

namespace rectfree::io {

using json = nlohmann::json;

namespace detail {

template <class F>
auto guarded(const std::string& what, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const Error&) {
        throw;
    } catch (const json::exception& e) {
        throw ValidationError(what + ": " + e.what());
    }
}

inline const json& field(const json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) throw ValidationError(std::string("missing field '") + key + "'");
    return j.at(key);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Scalars, words, numbers
// ---------------------------------------------------------------------------

inline json to_json(cplx z) { return json::array({z.real(), z.imag()}); }

/// A complex value from [re, im] or a plain real number.
inline cplx complex_from_json(const json& j) {
    if (j.is_number()) return j.get<double>();
    if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
        return {j[0].get<double>(), j[1].get<double>()};
    throw ValidationError("expected a number or an [re, im] pair, got " + j.dump());
}

/// Finite values as numbers, infinities as the strings "+inf" and "-inf".
inline json to_json(const ExtReal& x) {
    if (x.is_finite()) return x.value();
    return x.is_pos_inf() ? "+inf" : "-inf";
}

inline json word_to_json(const Alphabet& A, const Word& w) {
    json out = json::array();
    for (const auto& l : w) out.push_back(A.letter_name(l));
    return out;
}

inline Word word_from_json(const Alphabet& A, const json& j) {
    if (j.is_string()) return A.parse(j.get<std::string>());
    if (!j.is_array()) throw ValidationError("a word must be an array of letter names, got " + j.dump());
    Word w;
    for (const auto& x : j) {
        if (!x.is_string()) throw ValidationError("letter names must be strings, got " + x.dump());
        w.push_back(A.parse_letter(x.get<std::string>()));
    }
    return w;
}

inline json matrix_to_json(const Eigen::MatrixXcd& M) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < M.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(to_json(M(r, c)));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Eigen::MatrixXcd matrix_from_json(const json& j) {
    if (!j.is_array() || j.empty()) throw ValidationError("a matrix must be a nonempty array of rows");
    const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
    if (cols == 0) throw ValidationError("matrix rows must be nonempty arrays");
    Eigen::MatrixXcd M(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < j.size(); ++r) {
        if (!j[r].is_array() || j[r].size() != cols) throw ValidationError("matrix rows have different lengths");
        for (std::size_t c = 0; c < cols; ++c)
            M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = complex_from_json(j[r][c]);
    }
    return M;
}

// ---------------------------------------------------------------------------
// Structures and alphabets
// ---------------------------------------------------------------------------

inline json alphabet_to_json(const Alphabet& A) {
    json gens = json::array();
    for (const auto& g : A.generators()) gens.push_back({{"name", g.name}, {"row", g.row + 1}, {"col", g.col + 1}});
    return {{"rho", A.structure().rho()}, {"generators", gens}};
}

inline Alphabet alphabet_from_json(const json& j) {
    return detail::guarded("alphabet", [&] {
        BlockStructure S(detail::field(j, "rho").get<std::vector<double>>());
        std::vector<GeneratorDecl> gens;
        for (const auto& g : detail::field(j, "generators")) {
            const int row = detail::field(g, "row").get<int>(), col = detail::field(g, "col").get<int>();
            if (row < 1 || row > S.d() || col < 1 || col > S.d())
                throw ValidationError("generator block indices must lie in 1.." + std::to_string(S.d()));
            gens.push_back(GeneratorDecl{detail::field(g, "name").get<std::string>(), row - 1, col - 1});
        }
        return Alphabet(S, gens);
    });
}

// ---------------------------------------------------------------------------
// Tables
// ---------------------------------------------------------------------------

namespace detail {

template <class Table>
json table_to_json(const Table& t, const char* key) {
    json j = alphabet_to_json(t.alphabet());
    j["degree"] = t.degree();
    json entries = json::array();
    for (const auto& w : t.words()) entries.push_back({{"word", word_to_json(t.alphabet(), w)}, {"value", to_json(*t.find(w))}});
    j[key] = std::move(entries);
    return j;
}

template <class Table>
Table table_from_json(const json& j, const char* key) {
    return guarded("table", [&] {
        Alphabet A = alphabet_from_json(j);
        Table t(A, field(j, "degree").get<int>());
        for (const auto& e : field(j, key)) t.set(word_from_json(A, field(e, "word")), complex_from_json(field(e, "value")));
        return t;
    });
}

}  // namespace detail

inline json to_json(const ScalarMomentTable& t) { return detail::table_to_json(t, "moments"); }
inline json to_json(const ScalarCumulantTable& t) { return detail::table_to_json(t, "cumulants"); }

/// "moments" or "cumulants", by the entry key present in the document.
inline std::string table_kind(const json& j) {
    const bool m = j.is_object() && j.contains("moments"), c = j.is_object() && j.contains("cumulants");
    if (m == c) throw ValidationError("a table document needs exactly one of 'moments' and 'cumulants'");
    return m ? "moments" : "cumulants";
}

inline ScalarMomentTable moment_table_from_json(const json& j) {
    return detail::table_from_json<ScalarMomentTable>(j, "moments");
}
inline ScalarCumulantTable cumulant_table_from_json(const json& j) {
    return detail::table_from_json<ScalarCumulantTable>(j, "cumulants");
}

// ---------------------------------------------------------------------------
// Measures
// ---------------------------------------------------------------------------

inline json to_json(const GridMeasure& mu) {
    switch (mu.kind()) {
        case GridMeasure::Kind::mp: return {{"kind", "mp"}, {"lambda", mu.lambda()}, {"scale", mu.scale()}};
        case GridMeasure::Kind::grid: {
            const auto [a, b] = mu.support();
            return {{"kind", "grid"}, {"xmin", a}, {"xmax", b}, {"density", mu.density()}};
        }
        case GridMeasure::Kind::atoms: {
            json atoms = json::array();
            for (const auto& [x, w] : mu.atom_list()) atoms.push_back({x, w});
            return {{"kind", "atoms"}, {"atoms", atoms}};
        }
        default: throw UsageError("pushforward measures have no JSON form: " + mu.describe());
    }
}

inline GridMeasure measure_from_json(const json& j) {
    return detail::guarded("measure", [&] {
        const auto kind = detail::field(j, "kind").get<std::string>();
        if (kind == "mp") return GridMeasure::mp(detail::field(j, "lambda").get<double>(), j.value("scale", 1.0));
        if (kind == "grid")
            return GridMeasure::grid(detail::field(j, "xmin").get<double>(), detail::field(j, "xmax").get<double>(),
                                     detail::field(j, "density").get<std::vector<double>>());
        if (kind == "atoms") {
            std::vector<std::pair<double, double>> atoms;
            for (const auto& a : detail::field(j, "atoms")) {
                if (!a.is_array() || a.size() != 2) throw ValidationError("atoms are [x, weight] pairs");
                atoms.emplace_back(a[0].get<double>(), a[1].get<double>());
            }
            return GridMeasure::atoms(std::move(atoms));
        }
        throw ValidationError("unknown measure kind '" + kind + "' (expected mp, grid or atoms)");
    });
}

// ---------------------------------------------------------------------------
// Polynomial systems and matrix points
// ---------------------------------------------------------------------------

inline json to_json(const PolySystem& F) {
    if (F.empty()) throw UsageError("empty polynomial system");
    const auto& A = F.front().alphabet();
    json j = alphabet_to_json(A);
    json polys = json::array();
    for (const auto& P : F) {
        json terms = json::array();
        for (const auto& [w, c] : P.monomials()) terms.push_back({{"coeff", to_json(c)}, {"word", word_to_json(A, w)}});
        polys.push_back(std::move(terms));
    }
    j["system"] = std::move(polys);
    return j;
}

inline PolySystem system_from_json(const json& j) {
    return detail::guarded("system", [&] {
        Alphabet A = alphabet_from_json(j);
        PolySystem F;
        for (const auto& poly : detail::field(j, "system")) {
            if (!poly.is_array()) throw ValidationError("a polynomial is an array of {coeff, word} terms");
            NCPoly P(A);
            for (const auto& t : poly) P.add(word_from_json(A, detail::field(t, "word")), complex_from_json(detail::field(t, "coeff")));
            F.push_back(std::move(P));
        }
        if (static_cast<int>(F.size()) != A.size())
            throw ValidationError("system has " + std::to_string(F.size()) + " polynomials for " +
                                  std::to_string(A.size()) + " generators");
        return F;
    });
}

/// {"sizes": [q_1, …], "blocks": {name: q_row × q_col matrix}}.
inline json to_json(const MatrixPoint& p) {
    json blocks = json::object();
    const auto& A = p.alphabet();
    for (int g = 0; g < A.size(); ++g) {
        const auto& d = A.generators()[static_cast<std::size_t>(g)];
        blocks[d.name] = matrix_to_json(
            p.matrix(g).block(p.block_offset(d.row), p.block_offset(d.col), p.block_size(d.row), p.block_size(d.col)));
    }
    return {{"sizes", p.sizes()}, {"blocks", blocks}};
}

inline MatrixPoint point_from_json(const Alphabet& A, const json& j) {
    return detail::guarded("point", [&] {
        const auto sizes = detail::field(j, "sizes").get<std::vector<int>>();
        const auto& blocks = detail::field(j, "blocks");
        std::vector<Eigen::MatrixXcd> mats;
        for (const auto& g : A.generators()) mats.push_back(matrix_from_json(detail::field(blocks, g.name.c_str())));
        if (static_cast<int>(sizes.size()) != A.structure().d())
            throw ValidationError("point needs one size per block");
        return MatrixPoint::from_blocks(A, sizes, mats);
    });
}

// ---------------------------------------------------------------------------
// Ensemble plans and reports
// ---------------------------------------------------------------------------

inline json to_json(const EnsemblePlan& p) {
    json specs = json::array();
    for (const auto& s : p.specs) {
        json m = {{"name", s.name}, {"kind", to_string(s.kind)}, {"row", s.row + 1}, {"col", s.col + 1}};
        if (s.kind != MatrixKind::haar_unitary_block && s.kind != MatrixKind::constant) m["scale"] = s.scale;
        if (s.kind == MatrixKind::constant) m["matrix"] = matrix_to_json(s.matrix);
        specs.push_back(std::move(m));
    }
    return {{"rho", p.structure.rho()}, {"n_grid", p.n_grid}, {"trials", p.trials}, {"seed", p.seed}, {"matrices", specs}};
}

inline EnsemblePlan plan_from_json(const json& j) {
    return detail::guarded("plan", [&] {
        EnsemblePlan p;
        p.structure = BlockStructure(detail::field(j, "rho").get<std::vector<double>>());
        p.n_grid = detail::field(j, "n_grid").get<std::vector<int>>();
        p.trials = j.value("trials", 200);
        p.seed = j.value("seed", std::uint64_t{0});
        for (const auto& m : detail::field(j, "matrices")) {
            MatrixSpec s;
            s.name = detail::field(m, "name").get<std::string>();
            s.kind = matrix_kind_from_string(detail::field(m, "kind").get<std::string>());
            s.row = detail::field(m, "row").get<int>() - 1;
            s.col = m.value("col", s.row + 1) - 1;
            s.scale = m.value("scale", 1.0);
            if (s.kind == MatrixKind::constant) s.matrix = matrix_from_json(detail::field(m, "matrix"));
            p.specs.push_back(std::move(s));
        }
        p.validate();
        return p;
    });
}

inline json to_json(const ConvergenceReport& r) {
    const Alphabet A = r.plan.alphabet();
    json words = json::array();
    for (const auto& w : r.words) {
        json per = json::array();
        for (const auto& s : w.per_n)
            per.push_back({{"n", s.n}, {"mean", to_json(s.mean)}, {"se", s.se}, {"error", s.error}, {"within", s.within}});
        words.push_back({{"word", word_to_json(A, w.word)}, {"prediction", to_json(w.prediction)}, {"per_n", per}});
    }
    return {{"plan", to_json(r.plan)},
            {"words", words},
            {"mean_abs_error", r.mean_abs_error},
            {"fraction_within", r.fraction_within},
            {"error_decreasing", r.error_decreasing},
            {"band_se", kStandardErrorBand},
            {"passed", r.passed()}};
}

/// One row per (word, n): word,n,mean_re,mean_im,se,prediction_re,prediction_im,within.
inline std::string to_csv(const ConvergenceReport& r) {
    const Alphabet A = r.plan.alphabet();
    std::ostringstream os;
    os.precision(17);
    os << "word,n,mean_re,mean_im,se,prediction_re,prediction_im,within\n";
    for (const auto& w : r.words)
        for (const auto& s : w.per_n)
            os << '"' << A.format(w.word) << "\"," << s.n << ',' << s.mean.real() << ',' << s.mean.imag() << ','
               << s.se << ',' << w.prediction.real() << ',' << w.prediction.imag() << ',' << (s.within ? 1 : 0)
               << '\n';
    return os.str();
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ValidationError("'" + path + "' is not valid JSON: " + e.what());
    }
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write '" + path + "'");
    out << text;
}

}  // namespace rectfree::io
