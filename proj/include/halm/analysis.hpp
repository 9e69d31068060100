#pragma once

// Search-quality trade-off curve, lambda sweep and perplexity histograms.

#include <halm/errors.hpp>
#include <halm/evaluator.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

namespace halm {

/// Percentages of correct and hallucinated final answers when a fraction
/// `ratio` of searches returns a correct answer.
struct TradeoffPoint {
    double ratio = 0;
    double c = 0;
    double h = 0;
};

/// Rates are percentages; their sum may be off 100 by up to this much (published rates are rounded).
inline constexpr double rate_sum_tolerance = 0.2;

inline std::vector<TradeoffPoint> tradeoff_curve(double c0, double h0, double s, const std::vector<double>& ratios) {
    if (c0 < 0 || h0 < 0 || s < 0) throw DataError("trade-off rates must be non-negative");
    if (std::abs(c0 + h0 + s - 100.0) > rate_sum_tolerance) {
        throw DataError("trade-off rates sum to " + std::to_string(c0 + h0 + s) + ", expected 100");
    }
    std::vector<TradeoffPoint> out;
    out.reserve(ratios.size());
    for (double r : ratios) {
        if (!(r >= 0.0 && r <= 1.0)) throw DomainError("search ratio " + std::to_string(r) + " outside [0, 1]");
        out.push_back({r, c0 + r * s, h0 + (1.0 - r) * s});
    }
    return out;
}

/// 0.0, step, 2*step, ... up to and including `last` (within half a step).
inline std::vector<double> ratio_grid(double step = 0.1, double last = 1.0) {
    if (!(step > 0)) throw DomainError("ratio step must be positive");
    std::vector<double> out;
    const auto n = static_cast<long>(std::floor(last / step + 0.5));
    for (long i = 0; i <= n; ++i) out.push_back(static_cast<double>(i) / static_cast<double>(n) * last);
    return out;
}

struct LambdaCost {
    double lambda = 1.0;
    double cost = 0.0;
};

inline std::vector<LambdaCost> lambda_sweep(double s_rate, double h_rate, std::vector<double> lambdas) {
    if (!(s_rate >= 0 && s_rate <= 1 && h_rate >= 0 && h_rate <= 1)) throw DomainError("rates must lie in [0, 1]");
    std::sort(lambdas.begin(), lambdas.end());
    std::vector<LambdaCost> out;
    out.reserve(lambdas.size());
    for (double l : lambdas) out.push_back({l, budget_cost(s_rate, h_rate, l)});
    return out;
}

enum class ValueTransform { identity, log };

struct HistogramSpec {
    std::vector<double> bin_edges;
    ValueTransform transform = ValueTransform::log;
    std::string class_key;
};

struct HistogramCounts {
    std::vector<std::size_t> counts;  // one per bin
    std::size_t overflow = 0;         // values outside [first edge, last edge]

    std::size_t total() const {
        std::size_t t = overflow;
        for (auto c : counts) t += c;
        return t;
    }
};

/// Bins are [e_i, e_{i+1}) except the last, which is closed.
inline HistogramCounts histogram(const std::vector<double>& values, const HistogramSpec& spec) {
    const auto& e = spec.bin_edges;
    if (e.size() < 2) throw DomainError("histogram needs at least two bin edges");
    for (std::size_t i = 1; i < e.size(); ++i) {
        if (!(e[i] > e[i - 1])) throw DomainError("histogram bin edges must be strictly increasing");
    }
    HistogramCounts h;
    h.counts.assign(e.size() - 1, 0);
    for (std::size_t i = 0; i < values.size(); ++i) {
        double v = values[i];
        if (spec.transform == ValueTransform::log) {
            if (!(v > 0)) throw DomainError("item " + std::to_string(i) + ": log of non-positive value " + std::to_string(v));
            v = std::log(v);
        }
        if (!(v >= e.front() && v <= e.back())) {
            ++h.overflow;
            continue;
        }
        auto bin = static_cast<std::size_t>(std::upper_bound(e.begin(), e.end(), v) - e.begin()) - 1;
        if (bin == h.counts.size()) --bin;  // v equals the last edge
        ++h.counts[bin];
    }
    return h;
}

namespace detail {

inline std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

}  // namespace detail

/// ratio, c, h rows.
inline std::string format_tradeoff_tsv(const std::vector<TradeoffPoint>& points) {
    std::string out = "ratio\tc\th\n";
    for (const auto& p : points) out += detail::num(p.ratio) + "\t" + detail::fixed1(p.c) + "\t" + detail::fixed1(p.h) + "\n";
    return out;
}

inline std::string format_lambda_tsv(const std::vector<LambdaCost>& rows) {
    std::string out = "lambda\tbudget_cost\n";
    for (const auto& r : rows) out += detail::num(r.lambda) + "\t" + detail::num(r.cost) + "\n";
    return out;
}

/// class, bin_lo, bin_hi, count rows; the overflow bucket has empty edges.
inline std::string format_histogram_tsv(const HistogramSpec& spec, const HistogramCounts& h) {
    std::string out;
    for (std::size_t i = 0; i < h.counts.size(); ++i) {
        out += spec.class_key + "\t" + detail::num(spec.bin_edges[i]) + "\t" + detail::num(spec.bin_edges[i + 1]) +
               "\t" + std::to_string(h.counts[i]) + "\n";
    }
    out += spec.class_key + "\toverflow\t\t" + std::to_string(h.overflow) + "\n";
    return out;
}

}  // namespace halm
