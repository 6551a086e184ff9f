// rectfree: command-line front end for the rectfree library.
//
// Exit codes: 0 success, 2 invalid input or failed precondition (JSON error
// body on stderr), 3 capacity exceeded, 4 `simulate --assert` failure,
// 64 command-line usage error.

#include <cmath>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rectfree/rectfree.hpp"

namespace {

using rectfree::io::json;

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 2;
constexpr int kExitCapacity = 3;
constexpr int kExitAssert = 4;
constexpr int kExitUsage = 64;

/// Integers print without exponent; other values in the shortest %g form that parses back to x.
std::string format_number(double x) {
    char buf[32];
    if (x == std::floor(x) && std::abs(x) < 1e15) {
        std::snprintf(buf, sizeof buf, "%.0f", x);
        return buf;
    }
    for (int p = 1; p <= 17; ++p) {
        std::snprintf(buf, sizeof buf, "%.*g", p, x);
        if (std::strtod(buf, nullptr) == x) break;
    }
    return buf;
}

void emit(const json& j, const std::string& out_path = "") {
    const std::string text = j.dump(2) + "\n";
    if (out_path.empty())
        std::cout << text;
    else
        rectfree::io::write_text_file(out_path, text);
}

json nullable(const std::optional<rectfree::ExtReal>& x) { return x ? rectfree::io::to_json(*x) : json(nullptr); }

// ---------------------------------------------------------------------------

struct NcArgs {
    int n = 0;
    bool list = false;
    bool count = false;
};

int run_nc(const NcArgs& a) {
    if (a.list) {
        rectfree::for_each_nc(a.n, [](const rectfree::Partition& p) { std::cout << p.to_string() << '\n'; });
        return kExitOk;
    }
    if (a.n < 0 || a.n > 30) throw rectfree::CapacityError("catalan numbers are available for 0 <= n <= 30");
    std::cout << rectfree::catalan(a.n) << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct CumulantArgs {
    std::string in, out, direction;
    int degree = -1;
};

int run_cumulant(const CumulantArgs& a) {
    const json doc = rectfree::io::read_json_file(a.in);
    const std::string kind = rectfree::io::table_kind(doc);
    json result;
    if (a.direction == "m2c") {
        if (kind != "moments") throw rectfree::ValidationError("m2c needs a moment table ('moments' entries)");
        result = rectfree::io::to_json(
            rectfree::moments_to_cumulants(rectfree::io::moment_table_from_json(doc), a.degree));
    } else {
        if (kind != "cumulants") throw rectfree::ValidationError("c2m needs a cumulant table ('cumulants' entries)");
        result = rectfree::io::to_json(
            rectfree::cumulants_to_moments(rectfree::io::cumulant_table_from_json(doc), a.degree));
    }
    result["config"] = {{"command", "cumulant"}, {"in", a.in}, {"direction", a.direction}, {"degree", a.degree}};
    emit(result, a.out);
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct FreenessArgs {
    std::string in, groups;
    int degree = -1;
    double tol = 1e-10;
};

/// {"groups": [["a", "b"], ["c"]]}: every generator in exactly one group.
std::vector<int> parse_groups(const rectfree::Alphabet& A, const json& doc) {
    std::vector<int> group_of(static_cast<std::size_t>(A.size()), -1);
    const json& groups = doc.is_object() && doc.contains("groups") ? doc.at("groups") : doc;
    if (!groups.is_array()) throw rectfree::ValidationError("groups must be an array of arrays of generator names");
    for (std::size_t g = 0; g < groups.size(); ++g) {
        if (!groups[g].is_array()) throw rectfree::ValidationError("each group is an array of generator names");
        for (const auto& name : groups[g]) {
            if (!name.is_string()) throw rectfree::ValidationError("generator names must be strings");
            const auto s = name.get<std::string>();
            if (!A.has(s)) throw rectfree::ValidationError("group lists unknown generator '" + s + "'");
            auto& slot = group_of[static_cast<std::size_t>(A.index_of(s))];
            if (slot != -1) throw rectfree::ValidationError("generator '" + s + "' appears in two groups");
            slot = static_cast<int>(g);
        }
    }
    for (int g = 0; g < A.size(); ++g)
        if (group_of[static_cast<std::size_t>(g)] == -1)
            throw rectfree::ValidationError("generator '" + A.generators()[static_cast<std::size_t>(g)].name +
                                            "' is in no group");
    return group_of;
}

int run_freeness(const FreenessArgs& a) {
    const json doc = rectfree::io::read_json_file(a.in);
    const rectfree::ScalarMomentTable m =
        rectfree::io::table_kind(doc) == "moments"
            ? rectfree::io::moment_table_from_json(doc)
            : rectfree::cumulants_to_moments(rectfree::io::cumulant_table_from_json(doc));
    const auto group_of = parse_groups(m.alphabet(), rectfree::io::read_json_file(a.groups));
    const int degree = a.degree < 0 ? m.degree() : a.degree;
    const auto rep = rectfree::is_free_with_amalgamation(m, group_of, degree);
    json out = {{"config",
                 {{"command", "freeness"}, {"in", a.in}, {"groups", a.groups}, {"degree", degree}, {"tol", a.tol}}},
                {"max_mixed_cumulant", rep.max_mixed_cumulant},
                {"witness", rep.witness ? json(rep.witness_text) : json(nullptr)},
                {"mixed_words", rep.mixed_words},
                {"free", rep.max_mixed_cumulant <= a.tol}};
    emit(out);
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct MpArgs {
    double lambda = 1.0;
    double scale = 1.0;
    int moments = 4;
};

int run_mp(const MpArgs& a) {
    if (!(a.lambda > 0.0) || !(a.scale > 0.0)) throw rectfree::ValidationError("lambda and scale must be positive");
    // Every free cumulant of MP(lambda) equals lambda, so m_n = sum over NC(n) of lambda^#blocks.
    std::string line = "[";
    for (int n = 1; n <= a.moments; ++n) {
        double m = 0.0;
        rectfree::for_each_nc(n, [&](const rectfree::Partition& p) { m += std::pow(a.lambda, p.block_count()); });
        if (n > 1) line += ", ";
        line += format_number(m * std::pow(a.scale, n));
    }
    std::cout << line << "]\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct EntropyArgs {
    std::string measure;
    double rho_k = 0.5, rho_l = 0.5;
    bool rate = false, max_gap = false;
    std::optional<double> mean_cap;
};

int run_entropy(const EntropyArgs& a) {
    const auto mu = rectfree::io::measure_from_json(rectfree::io::read_json_file(a.measure));
    const double lo = std::min(a.rho_k, a.rho_l), hi = std::max(a.rho_k, a.rho_l);
    const auto chi = rectfree::chi_single(rectfree::EntropyInput::from_rho(mu, a.rho_k, a.rho_l));
    std::optional<rectfree::ExtReal> J, C, gap;
    if (a.rate) {
        J = rectfree::rate_J(mu, lo, hi);
        C = rectfree::ExtReal(rectfree::rate_constant_C(lo, hi));
    }
    if (a.max_gap) {
        if (!a.mean_cap) throw rectfree::ValidationError("--max-gap needs --mean-cap");
        gap = rectfree::maximizer_gap(mu, lo, hi, *a.mean_cap);
    }
    json config = {{"command", "entropy"}, {"measure", rectfree::io::to_json(mu)}, {"rho_k", a.rho_k},
                   {"rho_l", a.rho_l},      {"rate", a.rate},                          {"max_gap", a.max_gap}};
    config["mean_cap"] = a.mean_cap ? json(*a.mean_cap) : json(nullptr);
    emit({{"config", config}, {"chi", rectfree::io::to_json(chi)}, {"J", nullable(J)}, {"C", nullable(C)},
          {"gap", nullable(gap)}});
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct FisherArgs {
    std::string joint;
    std::vector<std::string> xi_names;
    int degree = rectfree::kDefaultFisherDegree;
    double tol = rectfree::kConjugateTolerance;
};

/// "xi" or "xi=target"; without a target the xi generator is paired with the
/// unique non-adjoint family letter of transposed type.
std::vector<rectfree::XiBinding> parse_bindings(const rectfree::Alphabet& A, const std::vector<std::string>& names) {
    std::vector<rectfree::XiBinding> out;
    for (const auto& n : names) {
        const auto eq = n.find('=');
        if (eq != std::string::npos) {
            out.push_back({n.substr(0, eq), n.substr(eq + 1)});
            continue;
        }
        if (!A.has(n)) throw rectfree::ValidationError("unknown xi generator '" + n + "'");
        const auto xt = A.type(rectfree::Letter{A.index_of(n), false});
        std::vector<std::string> candidates;
        for (const auto& g : A.generators()) {
            if (g.name == n || std::find(names.begin(), names.end(), g.name) != names.end()) continue;
            if (g.row == xt.col && g.col == xt.row) candidates.push_back(g.name);
        }
        if (candidates.size() != 1)
            throw rectfree::ValidationError("cannot infer the letter paired with '" + n + "'; pass " + n +
                                            "=<letter> instead");
        out.push_back({n, candidates.front()});
    }
    return out;
}

int run_fisher(const FisherArgs& a) {
    auto table = rectfree::io::moment_table_from_json(rectfree::io::read_json_file(a.joint));
    auto bindings = parse_bindings(table.alphabet(), a.xi_names);
    const rectfree::ConjugateCandidate cand(std::move(table), bindings);
    const auto fisher = rectfree::fisher_info(cand, a.degree, a.tol);
    json slack = nullptr;
    const auto& A = cand.alphabet();
    if (cand.family().size() == 1) {
        const auto& g = A.generators()[static_cast<std::size_t>(cand.family().front())];
        const auto& S = A.structure();
        if (g.row != g.col && S.rho(g.row) <= S.rho(g.col))
            slack = rectfree::io::to_json(rectfree::cramer_rao(cand, a.degree, a.tol).slack);
    }
    json binds = json::array();
    for (const auto& b : bindings) binds.push_back({{"xi", b.xi}, {"target", b.target}});
    const auto& r = fisher.relations;
    emit({{"config",
           {{"command", "fisher"}, {"joint", a.joint}, {"bindings", binds}, {"degree", a.degree}, {"tol", a.tol}}},
          {"violations",
           {{"form", rectfree::to_string(r.form)},
            {"degree", r.degree},
            {"max_violation", r.max_violation},
            {"witness", r.witness},
            {"relations", r.relations}}},
          {"phi_r", rectfree::io::to_json(fisher.value)},
          {"provenance", fisher.provenance},
          {"cramer_rao_slack", slack}});
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct JacobianArgs {
    std::string system, point;
    double step = rectfree::kJacobianFdStep;
};

int run_jacobian(const JacobianArgs& a) {
    const auto F = rectfree::io::system_from_json(rectfree::io::read_json_file(a.system));
    const auto x = rectfree::io::point_from_json(F.front().alphabet(), rectfree::io::read_json_file(a.point));
    const auto exact = rectfree::jacobian_log(F, x);
    const auto fd = rectfree::jacobian_log_fd(F, x, a.step);
    json disc = nullptr;
    if (exact.is_finite() && fd.log_jacobian.is_finite())
        disc = std::abs(exact.value() - fd.log_jacobian.value());
    else if (exact.is_neg_inf() && fd.log_jacobian.is_neg_inf())
        disc = 0.0;
    emit({{"config", {{"command", "jacobian"}, {"system", a.system}, {"point", a.point}, {"step", a.step}}},
          {"log_jacobian", rectfree::io::to_json(exact)},
          {"fd_estimate", rectfree::io::to_json(fd.log_jacobian)},
          {"fd_step", fd.step},
          {"richardson", fd.richardson},
          {"discrepancy", disc}});
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
    std::string plan, out, csv;
    bool assert_pass = false;
    double min_fraction = 0.95;
    std::optional<std::uint64_t> seed;
    std::optional<int> trials;
};

int run_simulate(const SimulateArgs& a) {
    const json doc = rectfree::io::read_json_file(a.plan);
    auto plan = rectfree::io::plan_from_json(doc);
    if (a.seed) plan.seed = *a.seed;
    if (a.trials) plan.trials = *a.trials;
    plan.validate();
    const auto A = plan.alphabet();
    std::vector<rectfree::Word> words;
    if (doc.contains("words")) {
        for (const auto& w : doc.at("words")) words.push_back(rectfree::io::word_from_json(A, w));
    } else {
        words = rectfree::standard_battery_words(A);
    }
    const auto rep = rectfree::convergence_experiment(plan, words);
    json out = rectfree::io::to_json(rep);
    out["config"] = {{"command", "simulate"},
                     {"plan", a.plan},
                     {"seed", plan.seed},
                     {"trials", plan.trials},
                     {"n_grid", plan.n_grid},
                     {"min_fraction", a.min_fraction}};
    emit(out, a.out);
    if (!a.csv.empty()) rectfree::io::write_text_file(a.csv, rectfree::io::to_csv(rep));
    if (a.assert_pass && !rep.passed(a.min_fraction)) {
        std::cerr << "simulate: statistical check failed (fraction within band "
                  << rep.fraction_within.back() << ", error decreasing "
                  << (rep.error_decreasing ? "yes" : "no") << ")\n";
        return kExitAssert;
    }
    return kExitOk;
}

int report_error(const rectfree::Error& e) {
    const json body = {{"error", rectfree::to_string(e.kind())}, {"message", e.what()}};
    std::cerr << body.dump() << '\n';
    return e.kind() == rectfree::ErrorKind::capacity ? kExitCapacity : kExitInvalid;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Rectangular free probability toolkit"};
    app.require_subcommand(1);

    NcArgs nc;
    auto* c_nc = app.add_subcommand("nc", "Noncrossing partitions of [n]");
    c_nc->add_option("--n", nc.n, "Ground set size")->required();
    auto* list_flag = c_nc->add_flag("--list", nc.list, "Print every partition, one per line");
    c_nc->add_flag("--count", nc.count, "Print the number of partitions")->excludes(list_flag);

    CumulantArgs cu;
    auto* c_cu = app.add_subcommand("cumulant", "Moment/cumulant transforms of a table");
    c_cu->add_option("--in", cu.in, "Input table JSON")->required();
    c_cu->add_option("--direction", cu.direction, "m2c or c2m")
        ->required()
        ->check(CLI::IsMember({"m2c", "c2m"}));
    c_cu->add_option("--degree", cu.degree, "Output degree (default: input degree)");
    c_cu->add_option("--out", cu.out, "Output table JSON (default: stdout)");

    FreenessArgs fr;
    auto* c_fr = app.add_subcommand("freeness", "Test freeness with amalgamation over the diagonal");
    c_fr->add_option("--in", fr.in, "Moment or cumulant table JSON")->required();
    c_fr->add_option("--groups", fr.groups, "Groups JSON: {\"groups\": [[names...], ...]}")->required();
    c_fr->add_option("--degree", fr.degree, "Largest word length checked (default: table degree)");
    c_fr->add_option("--tol", fr.tol, "Largest mixed cumulant still counted as free");

    MpArgs mp;
    auto* c_mp = app.add_subcommand("mp", "Moments of the Marchenko-Pastur law");
    c_mp->add_option("--lambda", mp.lambda, "Rate parameter")->required();
    c_mp->add_option("--scale", mp.scale, "Dilation factor");
    c_mp->add_option("--moments", mp.moments, "Number of moments")->check(CLI::Range(1, 14));

    EntropyArgs en;
    auto* c_en = app.add_subcommand("entropy", "Free entropy of a simple element with law mu of aa*");
    c_en->add_option("--measure", en.measure, "Measure JSON")->required();
    c_en->add_option("--rho-k", en.rho_k, "Weight of the row block");
    c_en->add_option("--rho-l", en.rho_l, "Weight of the column block");
    c_en->add_flag("--rate", en.rate, "Also report the rate function J and constant C");
    auto* gap_flag = c_en->add_flag("--max-gap", en.max_gap, "Report the gap to the mean-constrained maximizer");
    c_en->add_option("--mean-cap", en.mean_cap, "Mean constraint for --max-gap")->needs(gap_flag);

    FisherArgs fi;
    auto* c_fi = app.add_subcommand("fisher", "Free Fisher information from a joint moment table");
    c_fi->add_option("--joint", fi.joint, "Joint moment table JSON of the family and its xi variables")->required();
    c_fi->add_option("--xi-names", fi.xi_names, "Conjugate generators, optionally as xi=letter")
        ->required()
        ->delimiter(',');
    c_fi->add_option("--degree", fi.degree, "Largest relation word length");
    c_fi->add_option("--tol", fi.tol, "Relation tolerance");

    JacobianArgs ja;
    auto* c_ja = app.add_subcommand("jacobian", "Log-Jacobian of a polynomial change of variables");
    c_ja->add_option("--system", ja.system, "Polynomial system JSON")->required();
    c_ja->add_option("--point", ja.point, "Matrix point JSON")->required();
    c_ja->add_option("--step", ja.step, "Finite-difference step");

    SimulateArgs si;
    auto* c_si = app.add_subcommand("simulate", "Monte Carlo convergence experiment");
    c_si->add_option("--plan", si.plan, "Ensemble plan JSON")->required();
    c_si->add_option("--out", si.out, "Report JSON (default: stdout)");
    c_si->add_option("--csv", si.csv, "Per (word, n) CSV export");
    c_si->add_option("--seed", si.seed, "Override the plan seed");
    c_si->add_option("--trials", si.trials, "Override the plan trial count");
    c_si->add_option("--min-fraction", si.min_fraction, "Fraction of words required within the band");
    c_si->add_flag("--assert", si.assert_pass, "Exit 4 unless the statistical check passes");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help();
        return kExitUsage;
    }

    try {
        if (*c_nc) return run_nc(nc);
        if (*c_cu) return run_cumulant(cu);
        if (*c_fr) return run_freeness(fr);
        if (*c_mp) return run_mp(mp);
        if (*c_en) return run_entropy(en);
        if (*c_fi) return run_fisher(fi);
        if (*c_ja) return run_jacobian(ja);
        if (*c_si) return run_simulate(si);
    } catch (const rectfree::Error& e) {
        return report_error(e);
    } catch (const std::exception& e) {
        std::cerr << json{{"error", "internal"}, {"message", e.what()}}.dump() << '\n';
        return 1;
    }
    return kExitUsage;
}
