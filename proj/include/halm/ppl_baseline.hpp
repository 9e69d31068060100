#pragma once

// Perplexity-threshold baseline: answer when the base prediction's
// perplexity is at most tau, search when it exceeds tau.

#include <halm/errors.hpp>
#include <halm/inference.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace halm {

enum class Calibration { max_f1, target_search_rate };

inline std::string_view to_string(Calibration c) {
    return c == Calibration::max_f1 ? "max-f1" : "target-search-rate";
}

inline std::optional<Calibration> parse_calibration(std::string_view s) {
    if (s == "max-f1") return Calibration::max_f1;
    if (s == "target-search-rate") return Calibration::target_search_rate;
    return std::nullopt;
}

/// tau may be +inf (never search) or -inf (always search); otherwise finite and positive.
struct PplThreshold {
    double tau = std::numeric_limits<double>::infinity();
    Calibration calibration = Calibration::max_f1;
    std::optional<double> target_rate;
    std::string fitted_on;

    friend bool operator==(const PplThreshold&, const PplThreshold&) = default;
};

struct ScoredItem {
    double perplexity = 1.0;
    bool correct = false;
};

enum class Decision { answer, search };

/// Search iff perplexity strictly exceeds tau.
inline Decision decide(double perplexity, const PplThreshold& threshold) {
    if (!std::isfinite(perplexity)) throw DomainError("non-finite perplexity");
    return perplexity > threshold.tau ? Decision::search : Decision::answer;
}

inline Decision decide(const Prediction& prediction, const PplThreshold& threshold) {
    return decide(prediction.perplexity, threshold);
}

namespace detail {

/// A value in [lo, hi) strictly between two distinct doubles when one exists, else lo.
inline double midpoint_below(double lo, double hi) {
    const double mid = lo + (hi - lo) / 2.0;
    return mid < hi ? mid : lo;
}

/// F1 as an exact fraction 2tp / (2tp + fp + fn). A zero denominator (nothing
/// correct anywhere, nothing answered) counts as a perfect 1/1.
struct F1Fraction {
    std::uint64_t num = 0;
    std::uint64_t den = 1;

    static F1Fraction of(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn) {
        const std::uint64_t den = 2 * tp + fp + fn;
        if (den == 0) return {1, 1};
        return {2 * tp, den};
    }
    bool operator>(const F1Fraction& o) const { return num * o.den > o.num * den; }
    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

}  // namespace detail

struct CalibrationResult {
    PplThreshold threshold;
    double f1 = 0.0;
    std::size_t n_search = 0;
};

/// Fits tau on (perplexity, correct) pairs.
///
/// max-f1 scans every decision partition: -inf, the midpoints between
/// consecutive distinct perplexities, and +inf; the smallest tau with the
/// highest F1 wins. target-search-rate puts tau between the sorted items so
/// that round(rate * n) of them are searched (fewer when the cut falls
/// inside a run of tied perplexities).
inline CalibrationResult calibrate(std::vector<ScoredItem> scored, Calibration strategy,
                                   std::optional<double> target_rate = std::nullopt, std::string fitted_on = {}) {
    if (scored.empty()) throw DataError("calibration needs at least one scored item");
    for (const auto& s : scored) {
        if (!std::isfinite(s.perplexity) || s.perplexity <= 0.0) {
            throw DomainError("calibration perplexity must be finite and positive");
        }
    }
    std::sort(scored.begin(), scored.end(), [](const ScoredItem& a, const ScoredItem& b) { return a.perplexity < b.perplexity; });
    const std::size_t n = scored.size();
    constexpr double inf = std::numeric_limits<double>::infinity();

    CalibrationResult out;
    out.threshold.calibration = strategy;
    out.threshold.fitted_on = std::move(fitted_on);

    std::uint64_t total_correct = 0;
    for (const auto& s : scored) total_correct += s.correct ? 1 : 0;

    auto summarize = [&](double tau) {
        std::uint64_t tp = 0, fp = 0, fn = 0, searched = 0;
        for (const auto& s : scored) {
            const bool answer = !(s.perplexity > tau);
            if (answer) (s.correct ? tp : fp) += 1;
            else {
                fn += s.correct ? 1 : 0;
                ++searched;
            }
        }
        out.f1 = detail::F1Fraction::of(tp, fp, fn).value();
        out.n_search = searched;
    };

    if (strategy == Calibration::target_search_rate) {
        if (!target_rate) throw ConfigError("target-search-rate calibration needs a target rate");
        if (!(*target_rate >= 0.0 && *target_rate <= 1.0)) throw DomainError("target rate must lie in [0, 1]");
        out.threshold.target_rate = target_rate;
        const auto m = static_cast<std::size_t>(std::llround(*target_rate * static_cast<double>(n)));
        if (m == 0) out.threshold.tau = inf;
        else if (m >= n) out.threshold.tau = -inf;
        else out.threshold.tau = detail::midpoint_below(scored[n - m - 1].perplexity, scored[n - m].perplexity);
        summarize(out.threshold.tau);
        return out;
    }

    // Sweep candidates in ascending order; items with perplexity <= tau are answered.
    std::uint64_t tp = 0, fp = 0;
    detail::F1Fraction best = detail::F1Fraction::of(0, 0, total_correct);  // tau = -inf
    double best_tau = -inf;
    std::size_t i = 0;
    while (i < n) {
        const double v = scored[i].perplexity;
        while (i < n && scored[i].perplexity == v) {
            (scored[i].correct ? tp : fp) += 1;
            ++i;
        }
        const double tau = i < n ? detail::midpoint_below(v, scored[i].perplexity) : inf;
        const auto f = detail::F1Fraction::of(tp, fp, total_correct - tp);
        if (f > best) {
            best = f;
            best_tau = tau;
        }
    }
    out.threshold.tau = best_tau;
    summarize(best_tau);
    return out;
}

inline json tau_to_json(double tau) {
    if (std::isinf(tau)) return tau > 0 ? "+inf" : "-inf";
    return tau;
}

inline double tau_from_json(const json& j) {
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "+inf" || s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        throw DataError("bad tau value '" + s + "'");
    }
    return j.get<double>();
}

inline json to_json(const PplThreshold& t) {
    return json{{"tau", tau_to_json(t.tau)},
                {"strategy", to_string(t.calibration)},
                {"target_rate", t.target_rate ? json(*t.target_rate) : json(nullptr)},
                {"fitted_on", t.fitted_on}};
}

inline PplThreshold threshold_from_json(const json& j) {
    PplThreshold t;
    t.tau = tau_from_json(j.at("tau"));
    const auto c = parse_calibration(j.at("strategy").get<std::string>());
    if (!c) throw DataError("unknown calibration strategy");
    t.calibration = *c;
    if (j.contains("target_rate") && !j.at("target_rate").is_null()) t.target_rate = j.at("target_rate").get<double>();
    t.fitted_on = j.value("fitted_on", std::string{});
    if (t.fitted_on.empty()) throw DataError("threshold manifest lacks fitted_on provenance");
    if (std::isnan(t.tau) || (std::isfinite(t.tau) && t.tau <= 0.0)) throw DataError("tau must be positive");
    return t;
}

}  // namespace halm
