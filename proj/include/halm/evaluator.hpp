#pragma once

// Correct / Hallucinated / Search judgments, the (base, adapted) confusion
// mapping, F1, retention fractions and the linear search-vs-hallucination cost.

#include <halm/corpus.hpp>
#include <halm/errors.hpp>
#include <halm/inference.hpp>

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace halm {

enum class Judgment { correct, hallucinated, search };

inline std::string_view to_string(Judgment j) {
    switch (j) {
        case Judgment::correct: return "C";
        case Judgment::hallucinated: return "H";
        case Judgment::search: return "S";
    }
    return "?";
}

/// Recognizes a search output: the search token itself, or one of the
/// configured abstention phrases (compared trimmed, ASCII-case-insensitive,
/// ignoring trailing sentence punctuation and quotes).
struct SearchMatcher {
    std::string literal{default_search_literal};
    std::vector<std::string> aliases;

    static std::string loose(std::string_view s) {
        std::string t = detail::trim(s);
        while (!t.empty() && (t.back() == '.' || t.back() == '!' || t.back() == '"' || t.back() == '\'')) t.pop_back();
        while (!t.empty() && (t.front() == '"' || t.front() == '\'')) t.erase(t.begin());
        for (auto& c : t) {
            if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
        }
        return detail::trim(t);
    }

    bool matches(std::string_view output) const {
        if (detail::trim(output) == literal) return true;
        const std::string l = loose(output);
        for (const auto& a : aliases) {
            if (loose(a) == l) return true;
        }
        return false;
    }
};

inline Judgment judge(std::string_view output, const QaRecord& record, const NormalizationProfile& profile,
                      const SearchMatcher& search) {
    if (search.matches(output)) return Judgment::search;
    return exact_match(output, record.gold_answers, profile) ? Judgment::correct : Judgment::hallucinated;
}

enum class Cell { tp, fp, tn, fn };

inline std::string_view to_string(Cell c) {
    switch (c) {
        case Cell::tp: return "TP";
        case Cell::fp: return "FP";
        case Cell::tn: return "TN";
        case Cell::fn: return "FN";
    }
    return "?";
}

/// Adapted C is TP and adapted H is FP on both base rows; adapted S is FN when the base was correct, TN otherwise.
inline Cell confusion_cell(Judgment base, Judgment adapted) {
    if (base == Judgment::search) throw DataError("base-model judgment cannot be Search");
    switch (adapted) {
        case Judgment::correct: return Cell::tp;
        case Judgment::hallucinated: return Cell::fp;
        case Judgment::search: return base == Judgment::correct ? Cell::fn : Cell::tn;
    }
    throw DataError("bad judgment");
}

struct ConfusionCounts {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t tn = 0;
    std::size_t fn = 0;

    std::size_t total() const { return tp + fp + tn + fn; }
    void add(Cell c) {
        switch (c) {
            case Cell::tp: ++tp; break;
            case Cell::fp: ++fp; break;
            case Cell::tn: ++tn; break;
            case Cell::fn: ++fn; break;
        }
    }
    friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// 2tp / (2tp + fp + fn). Accepts fractional (rate-weighted) counts.
inline double f1_score(double tp, double fp, double fn) {
    const double den = 2.0 * tp + fp + fn;
    if (!(den > 0.0)) throw DomainError("F1 undefined: 2tp + fp + fn = 0");
    return 2.0 * tp / den;
}

inline double f1(const ConfusionCounts& c) {
    return f1_score(static_cast<double>(c.tp), static_cast<double>(c.fp), static_cast<double>(c.fn));
}

/// Confusion cells rebuilt from published rates, assuming no item moves
/// from base-H to adapted-C or from base-C to adapted-H.
struct RateConfusion {
    double tp = 0, fp = 0, tn = 0, fn = 0;
    double f1() const { return f1_score(tp, fp, fn); }
};

inline RateConfusion rate_weighted_confusion(double base_c, double base_h, double adapted_c, double adapted_h) {
    return {adapted_c, adapted_h, base_h - adapted_h, base_c - adapted_c};
}

struct JudgedItem {
    std::string record_id;
    Judgment judgment = Judgment::hallucinated;
};

struct EvalRates {
    double c = 0, h = 0, s = 0;
};

struct EvalReport {
    std::size_t n = 0;
    double lambda = 1.0;
    EvalRates adapted;
    double base_c = 0;
    double base_h = 0;
    std::optional<double> retention_c;
    std::optional<double> retention_h;
    ConfusionCounts confusion;
    std::optional<double> f1;
    double budget_cost = 0;
};

inline double budget_cost(double search_rate, double hallucination_rate, double lambda) {
    if (!(lambda >= 1.0)) throw DomainError("lambda must be >= 1");
    return search_rate + lambda * hallucination_rate;
}

inline EvalReport evaluate_pair(const std::vector<JudgedItem>& base, const std::vector<JudgedItem>& adapted,
                                double lambda = 1.0) {
    if (!(lambda >= 1.0)) throw DomainError("lambda must be >= 1");
    if (base.size() != adapted.size()) {
        throw PairingError("base has " + std::to_string(base.size()) + " items, adapted has " +
                           std::to_string(adapted.size()));
    }
    if (base.empty()) throw DataError("nothing to evaluate");
    EvalReport r;
    r.n = base.size();
    r.lambda = lambda;
    std::size_t base_c = 0, base_h = 0, kept_c = 0, kept_h = 0, ac = 0, ah = 0, as = 0;
    for (std::size_t i = 0; i < base.size(); ++i) {
        if (base[i].record_id != adapted[i].record_id) {
            throw PairingError("item " + std::to_string(i) + ": base id " + base[i].record_id + " vs adapted id " +
                               adapted[i].record_id);
        }
        const Judgment b = base[i].judgment;
        const Judgment a = adapted[i].judgment;
        r.confusion.add(confusion_cell(b, a));
        (b == Judgment::correct ? base_c : base_h) += 1;
        if (b == Judgment::correct && a == Judgment::correct) ++kept_c;
        if (b == Judgment::hallucinated && a == Judgment::hallucinated) ++kept_h;
        (a == Judgment::correct ? ac : a == Judgment::hallucinated ? ah : as) += 1;
    }
    const double n = static_cast<double>(r.n);
    r.adapted = {ac / n, ah / n, as / n};
    r.base_c = base_c / n;
    r.base_h = base_h / n;
    if (base_c > 0) r.retention_c = static_cast<double>(kept_c) / base_c;
    if (base_h > 0) r.retention_h = static_cast<double>(kept_h) / base_h;
    if (2 * r.confusion.tp + r.confusion.fp + r.confusion.fn > 0) r.f1 = f1(r.confusion);
    r.budget_cost = budget_cost(r.adapted.s, r.adapted.h, lambda);
    return r;
}

inline json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

inline json to_json(const EvalReport& r) {
    return json{{"n", r.n},
                {"lambda", r.lambda},
                {"adapted_rates", {{"c", r.adapted.c}, {"h", r.adapted.h}, {"s", r.adapted.s}}},
                {"base_rates", {{"c", r.base_c}, {"h", r.base_h}}},
                {"retention", {{"c_frac", optional_json(r.retention_c)}, {"h_frac", optional_json(r.retention_h)}}},
                {"confusion", {{"tp", r.confusion.tp}, {"fp", r.confusion.fp}, {"tn", r.confusion.tn}, {"fn", r.confusion.fn}}},
                {"f1", optional_json(r.f1)},
                {"budget_cost", r.budget_cost}};
}

inline EvalReport report_from_json(const json& j) {
    auto opt = [](const json& v) { return v.is_null() ? std::optional<double>{} : std::optional<double>{v.get<double>()}; };
    EvalReport r;
    r.n = j.at("n").get<std::size_t>();
    r.lambda = j.at("lambda").get<double>();
    const auto& a = j.at("adapted_rates");
    r.adapted = {a.at("c").get<double>(), a.at("h").get<double>(), a.at("s").get<double>()};
    r.base_c = j.at("base_rates").at("c").get<double>();
    r.base_h = j.at("base_rates").at("h").get<double>();
    r.retention_c = opt(j.at("retention").at("c_frac"));
    r.retention_h = opt(j.at("retention").at("h_frac"));
    const auto& c = j.at("confusion");
    r.confusion = {c.at("tp").get<std::size_t>(), c.at("fp").get<std::size_t>(), c.at("tn").get<std::size_t>(),
                   c.at("fn").get<std::size_t>()};
    r.f1 = opt(j.at("f1"));
    r.budget_cost = j.at("budget_cost").get<double>();
    return r;
}

namespace detail {

inline std::string fixed1(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", v);
    return buf;
}

}  // namespace detail

/// Human-readable table: rates in percent, retention in parentheses, then F1.
inline std::string format_report_table(const EvalReport& r, std::string_view label) {
    auto pct = [](double v) { return detail::fixed1(100.0 * v); };
    auto ret = [&](const std::optional<double>& v) { return v ? " (" + pct(*v) + "%)" : std::string(" (undef)"); };
    std::string out;
    out += "model\tC\tH\tSearch\tF1\tbudget_cost\n";
    out += "base\t" + pct(r.base_c) + "\t" + pct(r.base_h) + "\t0.0\t-\t" +
           detail::fixed1(100.0 * r.lambda * r.base_h) + "\n";
    out += std::string(label) + "\t" + pct(r.adapted.c) + ret(r.retention_c) + "\t" + pct(r.adapted.h) +
           ret(r.retention_h) + "\t" + pct(r.adapted.s) + "\t" + (r.f1 ? pct(*r.f1) : std::string("-")) + "\t" +
           detail::fixed1(100.0 * r.budget_cost) + "\n";
    out += "confusion\tTP=" + std::to_string(r.confusion.tp) + "\tFP=" + std::to_string(r.confusion.fp) +
           "\tTN=" + std::to_string(r.confusion.tn) + "\tFN=" + std::to_string(r.confusion.fn) + "\n";
    return out;
}

}  // namespace halm
