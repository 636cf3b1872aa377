#pragma once

// Command-line front end. run() parses the arguments, computes the report and
// writes it; exit codes are 0 (success), 2 (invalid input), 3 (runtime failure).

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "thetacf/errors.hpp"
#include "thetacf/expansion.hpp"
#include "thetacf/families.hpp"
#include "thetacf/measure.hpp"
#include "thetacf/monte_carlo.hpp"
#include "thetacf/qtheta.hpp"
#include "thetacf/serialize.hpp"
#include "thetacf/transfer.hpp"

#ifndef THETACF_VERSION
#define THETACF_VERSION "unknown"
#endif

namespace thetacf::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitRuntime = 3;

inline constexpr std::int64_t kDecimalDenominatorBound = 1'000'000'000;
inline constexpr std::size_t kMaxExpandDigits = 5000;
inline constexpr std::size_t kMaxGkIterations = 200;
inline constexpr double kGkRatioSlack = 0.02;
inline constexpr double kMSlack = 1e-8;

struct RunConfig {
    std::string subcommand;
    std::int64_t m = 2;
    std::string format = "json";
    std::string out;
    std::uint64_t seed = 42;
    double tolerance = kDefaultConstantsTolerance;

    // expand
    std::string x;
    std::size_t digits = 20;
    std::string backend = "exact";

    // gk, operator
    std::size_t degree = 64;
    std::size_t iterations = 12;
    std::string start = "uniform";
    std::string grid_file;

    // ergodic
    std::size_t seeds = 20;
    std::size_t n = 200;
    std::size_t orbits = 10;
    std::size_t length = 100'000;
    std::vector<std::size_t> checkpoints = {1'000, 10'000, 100'000};
    std::int64_t cap = 100;
    std::size_t workers = 1;

    // operator
    std::string family = "all";
    std::size_t count = 50;
};

/// The options that apply to the chosen subcommand.
inline Json to_json(const RunConfig& c) {
    Json j{{"subcommand", c.subcommand}, {"m", c.m},       {"format", c.format},
           {"out", c.out},               {"seed", c.seed}, {"tolerance", c.tolerance}};
    if (c.subcommand == "expand") {
        j["x"] = c.x;
        j["digits"] = c.digits;
        j["backend"] = c.backend;
    } else if (c.subcommand == "gk") {
        j["degree"] = c.degree;
        j["iterations"] = c.iterations;
        j["start"] = c.start;
        j["grid_file"] = c.grid_file;
    } else if (c.subcommand == "ergodic") {
        j["seeds"] = c.seeds;
        j["n"] = c.n;
        j["orbits"] = c.orbits;
        j["length"] = c.length;
        j["checkpoints"] = c.checkpoints;
        j["cap"] = c.cap;
    } else if (c.subcommand == "operator") {
        j["degree"] = c.degree;
        j["family"] = c.family;
        j["count"] = c.count;
    }
    return j;
}

/// What a command produces: the main document and, for CSV output, a JSON summary.
struct Output {
    std::string main;
    std::string summary;
};

inline Json envelope(const RunConfig& c, Json reference, Json result) {
    return Json{{"tool", "thetacf"},
                {"version", THETACF_VERSION},
                {"command", c.subcommand},
                {"config", to_json(c)},
                {"reference", std::move(reference)},
                {"result", std::move(result)}};
}

inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

/// Closest fraction to r with denominator <= bound.
inline BigRational limit_denominator(const BigRational& r, const BigInt& bound) {
    if (denominator(r) <= bound) return r;
    BigInt p0 = 0, q0 = 1, p1 = 1, q1 = 0;
    BigInt n = numerator(r), d = denominator(r);
    while (true) {
        const BigInt a = detail::floor_div(n, d);
        const BigInt q2 = q0 + a * q1;
        if (q2 > bound) break;
        const BigInt p2 = p0 + a * p1;
        p0 = p1;
        q0 = q1;
        p1 = p2;
        q1 = q2;
        const BigInt rem = n - a * d;
        n = d;
        d = rem;
    }
    const BigInt k = (bound - q0) / q1;
    const BigRational b1(p0 + k * p1, q0 + k * q1);
    const BigRational b2(p1, q1);
    return abs(b2 - r) <= abs(b1 - r) ? b2 : b1;
}

struct ParsedPoint {
    QTheta x;
    std::string notice;
};

/// x as p/q, an integer, a decimal (rounded to the nearest fraction with
/// denominator <= 10^9) or "a,b" meaning a + b theta.
inline ParsedPoint parse_point(const std::string& text, std::int64_t m) {
    if (text.empty()) throw validation_error("x is required");
    if (const auto comma = text.find(','); comma != std::string::npos) {
        return {QTheta(m, parse_rational(text.substr(0, comma)), parse_rational(text.substr(comma + 1))), ""};
    }
    if (text.find('.') != std::string::npos) {
        const BigRational exact = parse_rational(text);
        const BigRational r = limit_denominator(exact, BigInt(kDecimalDenominatorBound));
        return {QTheta::rational(m, r),
                "decimal x = " + text + " read as " + r.str() + " (nearest fraction with denominator <= 10^9)"};
    }
    return {QTheta::rational(m, parse_rational(text)), ""};
}

inline Output cmd_expand(const RunConfig& c, std::ostream& err) {
    const ThetaParams params = ThetaParams::create(c.m);
    if (c.digits == 0 || c.digits > kMaxExpandDigits) {
        throw validation_error("--digits must lie in [1, " + std::to_string(kMaxExpandDigits) + "]");
    }
    const ParsedPoint pt = parse_point(c.x, c.m);
    if (!pt.notice.empty()) err << "note: " << pt.notice << "\n";
    detail::check_domain(pt.x, params);

    DigitSequence digits;
    if (c.backend == "exact") {
        digits = expand(pt.x, c.digits, params);
    } else {
        digits = expand(pt.x.to_double(), c.digits, params);
    }
    Json result{{"backend", c.backend},
                {"digits", digits.digits},
                {"terminated", digits.terminated},
                {"precision_exhausted", digits.precision_exhausted}};
    std::ostringstream csv;
    csv << "n,digit,p,q,convergent,error\n";
    if (!digits.empty()) {
        const auto conv = convergents(digits, params);
        Json rows = Json::array();
        for (std::size_t k = 0; k < conv.size(); ++k) {
            const QTheta value = conv[k].p / conv[k].q;
            const QTheta error = pt.x - value;
            rows.push_back(Json{{"n", k + 1},
                                {"p", to_json(conv[k].p)},
                                {"q", to_json(conv[k].q)},
                                {"value", value.to_double()},
                                {"error", error.to_double()},
                                {"log_abs_error", error.log_abs()}});
            csv << k + 1 << ',' << digits[k] << ',' << csv_number(conv[k].p.to_double()) << ','
                << csv_number(conv[k].q.to_double()) << ',' << csv_number(value.to_double()) << ','
                << csv_number(error.to_double()) << '\n';
        }
        result["convergents"] = std::move(rows);
        const Cylinder cyl = cylinder(digits, params);
        result["cylinder"] = Json{{"lower", to_json(cyl.lower)},
                                  {"upper", to_json(cyl.upper)},
                                  {"lower_closed", cyl.lower_closed},
                                  {"upper_closed", cyl.upper_closed},
                                  {"normalized_length", to_json(cyl.normalized_length())}};
    }
    Json input{{"x", to_json(pt.x)}};
    if (!pt.notice.empty()) input["notice"] = pt.notice;
    result["input"] = std::move(input);
    const Json report = envelope(c, Json{{"theta", params.theta()}}, std::move(result));
    if (c.format == "csv") return {csv.str(), dump(report)};
    return {dump(report), ""};
}

inline Output cmd_constants(const RunConfig& c) {
    const ThetaParams params = ThetaParams::create(c.m);
    const ConstantsReport r = constants_report(params, c.tolerance);
    const Json report = envelope(c, Json{{"theta", params.theta()}}, to_json(r));
    if (c.format == "csv") {
        std::ostringstream csv;
        csv << "quantity,value,error_bound\n";
        csv << "theta," << csv_number(r.theta) << ",0\n";
        csv << "beta," << csv_number(r.beta.value) << ',' << csv_number(r.beta.error) << '\n';
        csv << "beta_check," << csv_number(r.beta_check.value) << ',' << csv_number(r.beta_check.error) << '\n';
        csv << "entropy," << csv_number(r.entropy.value) << ',' << csv_number(r.entropy.error) << '\n';
        csv << "khintchin_geo," << csv_number(r.khintchin_geo.value) << ',' << csv_number(r.khintchin_geo.error) << '\n';
        csv << "k_m," << csv_number(r.k_m.convert_to<double>()) << ",0\n";
        csv << "q_contraction," << csv_number(r.q.value) << ',' << csv_number(r.q.error) << '\n';
        return {csv.str(), dump(report)};
    }
    return {dump(report), ""};
}

/// Reads "x F(x)" pairs (whitespace or comma separated, '#' comments) and
/// interpolates them linearly onto the Chebyshev grid of [0, theta].
inline GridFunction read_grid_file(const std::string& path, const TransferOperator& op) {
    std::ifstream in(path);
    if (!in) throw validation_error("cannot read grid file '" + path + "'");
    PiecewiseLinear f;
    std::string line;
    while (std::getline(in, line)) {
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        for (char& ch : line) {
            if (ch == ',') ch = ' ';
        }
        std::istringstream ls(line);
        double x, y;
        if (!(ls >> x)) continue;
        if (!(ls >> y)) throw validation_error("grid file line without a value: '" + line + "'");
        if (!f.xs.empty() && !(x > f.xs.back())) throw validation_error("grid file abscissae must increase");
        f.xs.push_back(x);
        f.ys.push_back(y);
    }
    const double th = op.params().theta();
    if (f.xs.size() < 2) throw validation_error("grid file needs at least two points");
    if (std::fabs(f.xs.front()) > 1e-12 || std::fabs(f.xs.back() - th) > 1e-9) {
        throw validation_error("grid file must cover [0, theta] from end to end");
    }
    return op.sample(f);
}

inline Output cmd_gk(const RunConfig& c) {
    const ThetaParams params = ThetaParams::create(c.m);
    OperatorConfig oc;
    oc.degree = c.degree;
    oc.validate();
    if (c.iterations == 0 || c.iterations > kMaxGkIterations) {
        throw validation_error("--iterations must lie in [1, " + std::to_string(kMaxGkIterations) + "]");
    }
    const TransferOperator op(params, oc);
    const double th = params.theta();
    const double L = params.log_normalizer();
    GridFunction F0, f0;
    if (c.start == "uniform") {
        F0 = op.sample([th](double x) { return x / th; });
        f0 = op.sample([th](double x) { return (1 + th * x) / th; });
    } else if (c.start == "gamma") {
        F0 = op.sample([&](double x) { return gk_limit_cdf(x, params); });
        f0 = op.sample([&](double) { return th / L; });
    } else {
        if (c.grid_file.empty()) throw validation_error("--start custom needs --grid-file");
        F0 = read_grid_file(c.grid_file, op);
        const GridFunction dF = F0.derivative();
        f0 = dF.map([th](double x, double v) { return (1 + th * x) * v; });
    }
    const double q = contraction_q(params, c.tolerance).value;
    const auto Fs = gk_iterate_cdf(F0, c.iterations, op);
    const auto fs = gk_iterate_density(f0, c.iterations, op);
    const DecayReport r = error_sequence(Fs, fs, params, q);

    bool ratios_ok = true, monotone = true, m_contracts = true;
    for (std::size_t n = 0; n + 1 < r.sup_errors.size(); ++n) {
        if (r.sup_errors[n] < r.noise_floor) break;
        monotone = monotone && r.sup_errors[n + 1] < r.sup_errors[n];
        if (n >= 2) ratios_ok = ratios_ok && r.ratios[n] <= q + kGkRatioSlack;
    }
    for (std::size_t n = 0; n + 1 < r.lipschitz_M.size(); ++n) {
        m_contracts = m_contracts && r.lipschitz_M[n + 1] <= q * r.lipschitz_M[n] + kMSlack;
    }
    Json result = to_json(r);
    result["summary"] = Json{{"ratios_within_q", ratios_ok},
                             {"ratio_slack", kGkRatioSlack},
                             {"monotone_until_noise_floor", monotone},
                             {"final_below_noise_floor", r.sup_errors.back() < r.noise_floor},
                             {"M_contraction_holds", m_contracts},
                             {"M_slack", kMSlack}};
    result["cutoff"] = op.cutoff();
    const Json report = envelope(c, Json{{"theta", th}, {"q_contraction", q}}, std::move(result));
    if (c.format == "csv") return {decay_csv(r), dump(report)};
    return {dump(report), ""};
}

inline Output cmd_ergodic(const RunConfig& c) {
    ErgodicConfig ec;
    ec.m = c.m;
    ec.exact_seeds = c.seeds;
    ec.exact_length = c.n;
    ec.float_orbits = c.orbits;
    ec.float_length = c.length;
    ec.checkpoints = c.checkpoints;
    ec.cap = c.cap;
    ec.rng.seed = c.seed;
    ec.tolerance = c.tolerance;
    ec.workers = c.workers;
    const ErgodicReport r = run_ergodic(ec);
    Json reference{{"theta", r.theta},
                   {"beta", r.beta.value},
                   {"two_beta", 2 * r.beta.value},
                   {"khintchin_geo", r.khintchin.value},
                   {"digit_law", "log((k+1)^2/(k(k+2)))/log(1+1/m)"}};
    const Json report = envelope(c, std::move(reference), to_json(r));
    if (c.format == "csv") return {histogram_csv(r.histogram), dump(report)};
    return {dump(report), ""};
}

struct OperatorRow {
    std::string family;
    std::size_t index = 0;
    std::string label;
    double before = 0.0;
    double after = 0.0;
    double bound = 0.0;
    bool within = false;
};

inline Output cmd_operator(const RunConfig& c) {
    const ThetaParams params = ThetaParams::create(c.m);
    OperatorConfig oc;
    oc.degree = c.degree;
    oc.validate();
    if (c.count == 0 || c.count > 10'000) throw validation_error("--count must lie in [1, 10000]");
    const bool all = c.family == "all";
    const TransferOperator op(params, oc);
    const double th = params.theta();
    const double km = contraction_km(params).convert_to<double>();
    const double q = contraction_q(params, c.tolerance).value;
    std::vector<OperatorRow> rows;

    auto sup_diff = [](const GridFunction& f, const GridFunction& g) {
        double best = 0.0;
        for (double x : f.dense_grid()) best = std::max(best, std::fabs(f(x) - g(x)));
        return best;
    };

    if (all || c.family == "constant") {
        // before: the constant; after: sup |U c - c|
        const double consts[] = {1.0, -2.5, std::numbers::pi};
        for (std::size_t i = 0; i < 3; ++i) {
            const auto f = op.sample([&](double) { return consts[i]; });
            const double d = sup_diff(op.apply_U(f), f);
            rows.push_back({"constant", i, "c", consts[i], d, 1e-12, d <= 1e-12});
        }
    }
    if (all || c.family == "invariant") {
        // V fixes c/(1 + theta x)
        const double consts[] = {1.0, 0.3};
        for (std::size_t i = 0; i < 2; ++i) {
            const auto f = op.sample([&](double x) { return consts[i] / (1 + th * x); });
            const double d = sup_diff(op.apply_V(f), f);
            rows.push_back({"invariant", i, "c/(1+theta x)", consts[i], d, 1e-10, d <= 1e-10});
        }
    }
    if (all || c.family == "monotone") {
        const auto family = monotone_family(c.count, th, derive_seed(c.seed, 3, static_cast<std::uint64_t>(c.m)));
        for (std::size_t i = 0; i < family.size(); ++i) {
            const auto& f = family[i];
            const double vf = variation_monotone(f, 0.0, th);
            const double vuf = variation_monotone([&](double x) { return op.U(f, x); }, 0.0, th);
            rows.push_back({"monotone", i, "piecewise-linear", vf, vuf, km, vuf <= km * vf + 1e-10});
        }
    }
    if (all || c.family == "lipschitz") {
        const auto family = smooth_family(c.count, derive_seed(c.seed, 4, static_cast<std::uint64_t>(c.m)));
        for (std::size_t i = 0; i < family.size(); ++i) {
            const auto f = op.sample(family[i]);
            const double sf = lipschitz_seminorm(f);
            const double suf = lipschitz_seminorm(op.apply_U(f));
            rows.push_back({"lipschitz", i, family[i].label(), sf, suf, q, suf <= q * sf + 1e-8});
        }
    }

    Json table = Json::array();
    std::ostringstream csv;
    csv << "family,index,label,before,after,ratio,bound,within_bound\n";
    bool all_within = true;
    for (const auto& r : rows) {
        const bool contraction = r.family == "monotone" || r.family == "lipschitz";
        const double ratio = contraction && r.before != 0.0 ? r.after / r.before : std::nan("");
        all_within = all_within && r.within;
        table.push_back(Json{{"family", r.family},
                             {"index", r.index},
                             {"label", r.label},
                             {"before", r.before},
                             {"after", r.after},
                             {"ratio", ratio},
                             {"bound", r.bound},
                             {"within_bound", r.within}});
        csv << r.family << ',' << r.index << ',' << r.label << ',' << csv_number(r.before) << ','
            << csv_number(r.after) << ',' << csv_number(ratio) << ',' << csv_number(r.bound) << ','
            << (r.within ? "true" : "false") << '\n';
    }
    Json result{{"rows", std::move(table)},
                {"all_within_bounds", all_within},
                {"columns",
                 "constant: after = sup|Uc - c|; invariant: after = sup|Vf - f|; monotone: var f, var Uf; "
                 "lipschitz: s(f), s(Uf)"},
                {"cutoff", op.cutoff()}};
    const Json report = envelope(c, Json{{"theta", th}, {"k_m", contraction_km(params).str()}, {"q_contraction", q}},
                                 std::move(result));
    if (c.format == "csv") return {csv.str(), dump(report)};
    return {dump(report), ""};
}

inline void write_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    f << text;
    if (!f) throw std::runtime_error("failed writing '" + path + "'");
}

/// CSV output to --out PATH also writes the JSON summary to PATH.summary.json.
inline void emit(const RunConfig& c, const Output& o, std::ostream& out) {
    if (c.out.empty()) {
        out << o.main;
        return;
    }
    write_file(c.out, o.main);
    if (!o.summary.empty()) write_file(c.out + ".summary.json", o.summary);
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    RunConfig c;
    CLI::App app{"theta-expansions: digits, invariant measure, transfer operators and ergodic averages", "thetacf"};
    app.set_version_flag("--version", THETACF_VERSION);
    app.require_subcommand(1);
    app.fallthrough();
    app.add_option("--m", c.m, "m >= 2, not a perfect square; theta = 1/sqrt(m)");
    app.add_option("--format", c.format, "output format")->check(CLI::IsMember({"json", "csv"}));
    app.add_option("--out", c.out, "output file (default: stdout)");
    app.add_option("--seed", c.seed, "random seed");
    app.add_option("--tolerance", c.tolerance, "target accuracy of the constants");

    auto* expand_cmd = app.add_subcommand("expand", "digits, convergents, errors and cylinder of a point");
    expand_cmd->add_option("--x", c.x, "p/q, a decimal, or 'a,b' for a + b theta")->required();
    expand_cmd->add_option("--digits", c.digits, "number of digits");
    expand_cmd->add_option("--backend", c.backend)->check(CLI::IsMember({"exact", "float"}));

    app.add_subcommand("constants", "beta, entropy, Khintchin product, k_m and q");

    auto* gk_cmd = app.add_subcommand("gk", "Gauss-Kuzmin decay experiment");
    gk_cmd->add_option("--iterations", c.iterations);
    gk_cmd->add_option("--degree", c.degree, "Chebyshev grid degree");
    gk_cmd->add_option("--start", c.start)->check(CLI::IsMember({"uniform", "gamma", "custom"}));
    gk_cmd->add_option("--grid-file", c.grid_file, "x F(x) pairs for --start custom");

    auto* erg_cmd = app.add_subcommand("ergodic", "Monte Carlo ergodic averages");
    erg_cmd->add_option("--seeds", c.seeds, "number of exact rational seeds");
    erg_cmd->add_option("--n", c.n, "exact orbit length");
    erg_cmd->add_option("--orbits,--samples", c.orbits, "number of float orbits");
    erg_cmd->add_option("--length", c.length, "float orbit length");
    erg_cmd->add_option("--checkpoints", c.checkpoints, "partial-mean checkpoints")->delimiter(',');
    erg_cmd->add_option("--cap", c.cap, "digit cap of the capped-mean control");
    erg_cmd->add_option("--workers", c.workers, "threads (results do not depend on it)");

    auto* op_cmd = app.add_subcommand("operator", "contraction and fixed-point checks of the transfer operators");
    op_cmd->add_option("--family", c.family)
        ->check(CLI::IsMember({"all", "constant", "invariant", "monotone", "lipschitz"}));
    op_cmd->add_option("--count", c.count, "functions per random family");
    op_cmd->add_option("--degree", c.degree, "Chebyshev grid degree");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            app.exit(e, out, err);
            return kExitOk;
        }
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    }
    c.subcommand = app.get_subcommands().front()->get_name();

    try {
        Output o;
        if (c.subcommand == "expand") {
            o = cmd_expand(c, err);
        } else if (c.subcommand == "constants") {
            detail::check_tolerance(c.tolerance);
            o = cmd_constants(c);
        } else if (c.subcommand == "gk") {
            detail::check_tolerance(c.tolerance);
            o = cmd_gk(c);
        } else if (c.subcommand == "ergodic") {
            o = cmd_ergodic(c);
        } else {
            detail::check_tolerance(c.tolerance);
            o = cmd_operator(c);
        }
        emit(c, o, out);
    } catch (const validation_error& e) {
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        err << "runtime error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}

}  // namespace thetacf::cli
