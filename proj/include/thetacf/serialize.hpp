#pragma once

// JSON and CSV forms of the reports. Numbers are written in shortest
// round-trip form; NaN and infinities become null (JSON) or an empty field (CSV).

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <string>

#include <json.hpp>

#include "thetacf/measure.hpp"
#include "thetacf/monte_carlo.hpp"
#include "thetacf/qtheta.hpp"
#include "thetacf/transfer.hpp"

namespace thetacf {

using Json = nlohmann::ordered_json;

inline constexpr const char* kDecayCsvHeader = "n,sup_error,ratio,M_n,q_reference";
inline constexpr const char* kHistogramCsvHeader = "k,count,frequency,law,sigma";

inline Json to_json(const Estimate& e) { return Json{{"value", e.value}, {"error_bound", e.error}}; }

inline Json to_json(const QTheta& x) {
    return Json{{"a", x.a().str()}, {"b", x.b().str()}, {"value", x.to_double()}};
}

inline Json to_json(const ConstantsReport& r) {
    return Json{{"m", r.m},
                {"theta", r.theta},
                {"beta", to_json(r.beta)},
                {"beta_check", to_json(r.beta_check)},
                {"entropy", to_json(r.entropy)},
                {"khintchin_geo", to_json(r.khintchin_geo)},
                {"k_m", r.k_m.str()},
                {"q_contraction", to_json(r.q)},
                {"q_less_than_theta", r.q_lt_theta},
                {"tolerance", r.tolerance}};
}

inline Json to_json(const DecayReport& r) {
    return Json{{"sup_errors", r.sup_errors},
                {"ratios", r.ratios},
                {"M_n", r.lipschitz_M},
                {"q_reference", r.q_reference},
                {"noise_floor", r.noise_floor}};
}

inline Json to_json(const DigitHistogram& h) {
    Json bins = Json::array();
    for (const auto& b : h.bins) {
        bins.push_back(Json{{"k", b.k}, {"count", b.count}, {"frequency", b.frequency}, {"law", b.law}, {"sigma", b.sigma}});
    }
    return Json{{"total", h.total},
                {"bins", std::move(bins)},
                {"overflow_count", h.overflow_count},
                {"overflow_law", h.overflow_law},
                {"tested_bins", h.tested_bins},
                {"max_deviation_sigma", h.max_deviation_sigma},
                {"worst_digit", h.worst_digit},
                {"sup_deviation", h.sup_deviation},
                {"bonferroni_sigmas", h.bonferroni_sigmas}};
}

inline Json to_json(const ErgodicConfig& c) {
    return Json{{"m", c.m},
                {"exact_seeds", c.exact_seeds},
                {"exact_length", c.exact_length},
                {"float_orbits", c.float_orbits},
                {"float_length", c.float_length},
                {"checkpoints", c.checkpoints},
                {"cap", c.cap},
                {"seed", c.rng.seed},
                {"rng_family", c.rng.family},
                {"tolerance", c.tolerance}};
}

/// The worker count is left out: it does not change the result.
inline Json to_json(const ErgodicReport& r) {
    Json exact = Json::array();
    for (std::size_t i = 0; i < r.exact.size(); ++i) {
        const auto& s = r.exact[i];
        exact.push_back(Json{{"seed", r.exact_seeds[i]},
                             {"levy", s.levy},
                             {"log_qn_over_n", s.log_qn_over_n},
                             {"approx_error", s.approx_error},
                             {"terminated", s.terminated},
                             {"measure_sandwich_holds", s.measure_sandwich_holds},
                             {"error_bounds_hold", s.error_bounds_hold},
                             {"error_identity_holds", s.error_identity_holds}});
    }
    return Json{
        {"m", r.config.m},
        {"theta", r.theta},
        {"n_orbits", r.config.exact_seeds},
        {"orbit_length", r.config.exact_length},
        {"reference",
         {{"beta", to_json(r.beta)}, {"beta_check", to_json(r.beta_check)}, {"khintchin_geo", to_json(r.khintchin)}}},
        {"levy",
         {{"estimate", r.levy_estimate},
          {"reference", r.levy_reference},
          {"rel_deviation", r.levy_rel_deviation},
          {"rel_tolerance", kLevyRelTolerance},
          {"within_tolerance", r.levy_within_tolerance}}},
        {"approx_error",
         {{"estimate", r.approx_error_estimate},
          {"reference", r.approx_error_reference},
          {"rel_deviation", r.approx_error_rel_deviation},
          {"rel_tolerance", kLevyRelTolerance},
          {"within_tolerance", r.approx_error_within_tolerance}}},
        {"log_qn_estimate", r.log_qn_estimate},
        {"exact_bounds_hold", r.exact_bounds_hold},
        {"exact_terminated", r.exact_terminated},
        {"exact_orbits", std::move(exact)},
        {"float_digits", r.float_digits},
        {"float_orbits", r.config.float_orbits},
        {"float_length", r.config.float_length},
        {"float_restarts", r.float_restarts},
        {"geo_mean",
         {{"estimate", r.geo_mean},
          {"reference", r.khintchin.value},
          {"rel_deviation", r.geo_mean_rel_deviation},
          {"rel_tolerance", kGeoMeanRelTolerance},
          {"within_tolerance", r.geo_mean_within_tolerance}}},
        {"arith_mean",
         {{"checkpoints", r.config.checkpoints},
          {"median_trend", r.arith_mean_trend},
          {"pooled_trend", r.arith_mean_pooled},
          {"increasing", r.arith_mean_increasing},
          {"capped_trend", r.capped_mean_trend},
          {"cap", r.config.cap},
          {"capped_limit", r.capped_mean_limit}}},
        {"digit_histogram", to_json(r.histogram)},
        {"histogram_sigmas", kHistogramSigmas},
        {"histogram_within_tolerance", r.histogram_within_tolerance},
        {"tolerances_note", "5% and 2% are engineering tolerances; the limit theorems give no rates"}};
}

/// Shortest decimal that reads back to the same double; empty for NaN or infinity.
inline std::string csv_number(double v) {
    if (!std::isfinite(v)) return "";
    char buf[32];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

/// Row n holds sup|e_n|, the ratio sup|e_n|/sup|e_{n-1}| (empty for n = 0 or below the noise floor) and M_n.
inline std::string decay_csv(const DecayReport& r) {
    std::ostringstream out;
    out << kDecayCsvHeader << '\n';
    for (std::size_t n = 0; n < r.sup_errors.size(); ++n) {
        out << n << ',' << csv_number(r.sup_errors[n]) << ',';
        if (n > 0) out << csv_number(r.ratios[n - 1]);
        out << ',';
        if (n < r.lipschitz_M.size()) out << csv_number(r.lipschitz_M[n]);
        out << ',' << csv_number(r.q_reference) << '\n';
    }
    return out.str();
}

inline std::string histogram_csv(const DigitHistogram& h) {
    std::ostringstream out;
    out << kHistogramCsvHeader << '\n';
    for (const auto& b : h.bins) {
        out << b.k << ',' << b.count << ',' << csv_number(b.frequency) << ',' << csv_number(b.law) << ','
            << csv_number(b.sigma) << '\n';
    }
    return out.str();
}

}  // namespace thetacf
