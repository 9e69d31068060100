#pragma once

// Prediction records, sequence perplexity and the three prompt styles.

#include <halm/corpus.hpp>
#include <halm/errors.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace halm {

inline constexpr std::string_view default_search_literal = "<search>";

enum class PromptStyle { zeroshot_qa, fewshot_balanced, instruct_idk };

inline std::string_view to_string(PromptStyle s) {
    switch (s) {
        case PromptStyle::zeroshot_qa: return "zeroshot-qa";
        case PromptStyle::fewshot_balanced: return "fewshot-balanced";
        case PromptStyle::instruct_idk: return "instruct-idk";
    }
    return "?";
}

inline std::optional<PromptStyle> parse_prompt_style(std::string_view s) {
    if (s == "zeroshot-qa") return PromptStyle::zeroshot_qa;
    if (s == "fewshot-balanced") return PromptStyle::fewshot_balanced;
    if (s == "instruct-idk") return PromptStyle::instruct_idk;
    return std::nullopt;
}

/// exp of the negative mean token log-probability.
///
/// The sum is taken over the sorted values so the result is exactly
/// invariant under permutation of the input.
inline double perplexity(std::span<const double> token_logprobs) {
    if (token_logprobs.empty()) throw DomainError("perplexity of an empty token sequence");
    std::vector<double> sorted(token_logprobs.begin(), token_logprobs.end());
    for (double lp : sorted) {
        if (!(lp <= 0.0)) throw DomainError("log-probability " + std::to_string(lp) + " is not <= 0");
    }
    std::sort(sorted.begin(), sorted.end());
    const double sum = std::accumulate(sorted.begin(), sorted.end(), 0.0);
    return std::exp(-sum / static_cast<double>(sorted.size()));
}

struct Prediction {
    std::string record_id;
    std::string text;
    std::vector<double> token_logprobs;
    double perplexity = 1.0;
    std::string model_tag;
    PromptStyle prompt_style = PromptStyle::zeroshot_qa;

    friend bool operator==(const Prediction&, const Prediction&) = default;
};

/// Builds a Prediction, deriving perplexity from the log-probabilities.
/// An empty generation (no text, no tokens) is assigned perplexity 1.
inline Prediction make_prediction(std::string record_id, std::string text, std::vector<double> token_logprobs,
                                  std::string model_tag, PromptStyle style) {
    Prediction p{std::move(record_id), std::move(text), std::move(token_logprobs), 1.0, std::move(model_tag), style};
    if (!p.token_logprobs.empty()) {
        p.perplexity = perplexity(p.token_logprobs);
    } else if (!p.text.empty()) {
        throw CapabilityError("record " + p.record_id + ": generated text without per-token log-probabilities");
    }
    return p;
}

inline json to_json(const Prediction& p) {
    return json{{"id", p.record_id},           {"text", p.text},           {"token_logprobs", p.token_logprobs},
                {"perplexity", p.perplexity}, {"model_tag", p.model_tag}, {"prompt_style", to_string(p.prompt_style)}};
}

inline Prediction prediction_from_json(const json& j) {
    Prediction p;
    p.record_id = j.at("id").get<std::string>();
    p.text = j.at("text").get<std::string>();
    p.token_logprobs = j.value("token_logprobs", std::vector<double>{});
    p.model_tag = j.value("model_tag", std::string{});
    const auto style = parse_prompt_style(j.value("prompt_style", std::string("zeroshot-qa")));
    if (!style) throw DataError("record " + p.record_id + ": unknown prompt_style");
    p.prompt_style = *style;
    if (j.contains("perplexity")) {
        p.perplexity = j.at("perplexity").get<double>();
    } else if (!p.token_logprobs.empty()) {
        p.perplexity = perplexity(p.token_logprobs);
    }
    return p;
}

inline std::string to_jsonl(const std::vector<Prediction>& predictions) {
    std::string out;
    for (const auto& p : predictions) {
        out += to_json(p).dump();
        out.push_back('\n');
    }
    return out;
}

inline std::vector<Prediction> read_predictions(const std::filesystem::path& path) {
    std::vector<Prediction> out;
    const auto lines = detail::read_lines(path);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (detail::is_blank(lines[i])) continue;
        try {
            out.push_back(prediction_from_json(json::parse(lines[i])));
        } catch (const json::exception& e) {
            throw ParseError(i + 1, path.string() + ": " + e.what());
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Prompt builders

struct TemplateError : ConfigError {
    using ConfigError::ConfigError;
};

inline constexpr std::string_view question_placeholder = "{q}";
inline constexpr std::string_view default_qa_template = "{q}";

inline std::string build_zeroshot_prompt(const QaRecord& record, std::string_view tmpl) {
    const auto pos = tmpl.find(question_placeholder);
    if (pos == std::string_view::npos) throw TemplateError("prompt template has no {q} placeholder");
    if (tmpl.find(question_placeholder, pos + question_placeholder.size()) != std::string_view::npos) {
        throw TemplateError("prompt template has more than one {q} placeholder");
    }
    std::string out(tmpl.substr(0, pos));
    out += record.question;
    out += tmpl.substr(pos + question_placeholder.size());
    return out;
}

inline constexpr std::string_view idk_instruction =
    "Answer to the question only if you know the answer, otherwise answer \"I don't know\"";

inline std::string build_instruct_prompt(const QaRecord& record) {
    return std::string(idk_instruction) + "\n" + record.question;
}

struct Demonstration {
    std::string question;
    std::string target;
};

struct FewShotPool {
    std::vector<Demonstration> examples;
    std::uint64_t seed = 0;
    std::string search_literal{default_search_literal};
};

struct BalanceError : DataError {
    BalanceError(std::string side, const std::string& what) : DataError(what), side_(std::move(side)) {}
    /// "answered" or "masked".
    const std::string& side() const noexcept { return side_; }

private:
    std::string side_;
};

namespace detail {

/// Uniform integer in [0, bound) by rejection; fully specified, unlike std::uniform_int_distribution.
inline std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % bound;
}

/// Fisher-Yates with a portable draw, so a seed means the same order on every platform.
template <typename T>
void seeded_shuffle(std::vector<T>& v, std::mt19937_64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(bounded(rng, i));
        std::swap(v[i - 1], v[j]);
    }
}

inline std::string format_demonstration(const std::string& question, const std::string& target) {
    return "Q: " + question + "\nA: " + target + "\n\n";
}

}  // namespace detail

/// k/2 answered and k/2 search-masked demonstrations in seeded order, then the target question.
inline std::string build_fewshot_balanced_prompt(const FewShotPool& pool, int k, const QaRecord& record) {
    if (k <= 0 || k % 2 != 0) throw ConfigError("few-shot k must be a positive even integer, got " + std::to_string(k));
    const auto half = static_cast<std::size_t>(k / 2);
    std::vector<const Demonstration*> answered;
    std::vector<const Demonstration*> masked;
    for (const auto& d : pool.examples) (d.target == pool.search_literal ? masked : answered).push_back(&d);
    if (answered.size() < half) {
        throw BalanceError("answered", "few-shot pool has " + std::to_string(answered.size()) +
                                           " answered examples, need " + std::to_string(half));
    }
    if (masked.size() < half) {
        throw BalanceError("masked", "few-shot pool has " + std::to_string(masked.size()) +
                                         " masked examples, need " + std::to_string(half));
    }
    std::mt19937_64 rng(pool.seed);
    detail::seeded_shuffle(answered, rng);
    detail::seeded_shuffle(masked, rng);
    std::vector<const Demonstration*> chosen(answered.begin(), answered.begin() + half);
    chosen.insert(chosen.end(), masked.begin(), masked.begin() + half);
    detail::seeded_shuffle(chosen, rng);

    std::string out;
    for (const auto* d : chosen) out += detail::format_demonstration(d->question, d->target);
    out += "Q: " + record.question + "\nA:";
    return out;
}

/// Turns records into prompts for one style.
struct PromptBuilder {
    PromptStyle style = PromptStyle::zeroshot_qa;
    std::string qa_template{default_qa_template};
    FewShotPool pool;
    int k = 16;

    std::string operator()(const QaRecord& record) const {
        switch (style) {
            case PromptStyle::zeroshot_qa: return build_zeroshot_prompt(record, qa_template);
            case PromptStyle::fewshot_balanced: return build_fewshot_balanced_prompt(pool, k, record);
            case PromptStyle::instruct_idk: return build_instruct_prompt(record);
        }
        throw ConfigError("unknown prompt style");
    }
};

}  // namespace halm
