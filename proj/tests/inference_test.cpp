#include <halm/inference.hpp>

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

using namespace halm;

namespace {

std::size_t count_occurrences(const std::string& hay, const std::string& needle) {
    std::size_t n = 0;
    for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + needle.size())) ++n;
    return n;
}

FewShotPool make_pool(std::size_t answered, std::size_t masked, std::uint64_t seed = 42) {
    FewShotPool pool;
    pool.seed = seed;
    for (std::size_t i = 0; i < answered; ++i) pool.examples.push_back({"aq" + std::to_string(i) + "?", "ans" + std::to_string(i)});
    for (std::size_t i = 0; i < masked; ++i) pool.examples.push_back({"mq" + std::to_string(i) + "?", "<search>"});
    return pool;
}

const QaRecord france{"q1", "capital of France?", {"Paris"}, Split::dev};

}  // namespace

TEST(Perplexity, Examples) {
    const std::vector<double> zeros{0.0, 0.0};
    EXPECT_DOUBLE_EQ(perplexity(zeros), 1.0);
    const std::vector<double> ones{-1.0, -1.0, -1.0};
    EXPECT_NEAR(perplexity(ones), std::exp(1.0), 1e-12);
    const std::vector<double> mixed{-0.5, -1.5};
    EXPECT_NEAR(perplexity(mixed), 2.718281828, 1e-9);
}

TEST(Perplexity, Errors) {
    EXPECT_THROW(perplexity(std::vector<double>{}), DomainError);
    EXPECT_THROW(perplexity(std::vector<double>{-0.1, 0.5}), DomainError);
}

TEST(Perplexity, AtLeastOneAndPermutationInvariant) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> lp(-12.0, 0.0);
    for (int trial = 0; trial < 2000; ++trial) {
        std::vector<double> v(1 + rng() % 40);
        for (auto& x : v) x = lp(rng);
        const double p = perplexity(v);
        ASSERT_GE(p, 1.0);
        auto w = v;
        std::shuffle(w.begin(), w.end(), rng);
        ASSERT_EQ(perplexity(w), p);  // exact, not approximate
    }
}

TEST(Prediction, MakeAndRoundTrip) {
    const auto p = make_prediction("q1", "Paris", {-0.1, -0.2}, "m", PromptStyle::zeroshot_qa);
    EXPECT_NEAR(p.perplexity, std::exp(0.15), 1e-12);
    EXPECT_NEAR(p.perplexity, 1.1618, 1e-4);
    EXPECT_EQ(prediction_from_json(to_json(p)), p);
    EXPECT_THROW(make_prediction("q1", "Paris", {}, "m", PromptStyle::zeroshot_qa), CapabilityError);
    EXPECT_DOUBLE_EQ(make_prediction("q1", "", {}, "m", PromptStyle::zeroshot_qa).perplexity, 1.0);
}

TEST(Prediction, ReadPredictionsReportsLine) {
    halm::testing::TempDir dir;
    const auto p = make_prediction("q1", "Paris", {-0.1}, "m", PromptStyle::zeroshot_qa);
    const auto path = dir.write("p.jsonl", to_jsonl({p}) + "{broken\n");
    try {
        read_predictions(path);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 2u);
    }
}

TEST(ZeroShotPrompt, Substitution) {
    EXPECT_EQ(build_zeroshot_prompt(france, "Q: {q}\nA:"), "Q: capital of France?\nA:");
    EXPECT_EQ(build_zeroshot_prompt(france, default_qa_template), "capital of France?");
    EXPECT_THROW(build_zeroshot_prompt(france, "Q: ?"), TemplateError);
    EXPECT_THROW(build_zeroshot_prompt(france, "{q} and {q}"), TemplateError);
}

TEST(InstructPrompt, InstructionThenQuestion) {
    EXPECT_EQ(build_instruct_prompt(france), std::string(idk_instruction) + "\ncapital of France?");
    const QaRecord other{"q2", "who wrote Hamlet?", {"Shakespeare"}, Split::dev};
    const auto a = build_instruct_prompt(france);
    const auto b = build_instruct_prompt(other);
    const std::string prefix = std::string(idk_instruction) + "\n";
    EXPECT_EQ(a.substr(0, prefix.size()), b.substr(0, prefix.size()));
    EXPECT_EQ(b.substr(prefix.size()), "who wrote Hamlet?");
}

TEST(FewShotPrompt, SixteenShotsAreBalanced) {
    const auto pool = make_pool(20, 20);
    const auto prompt = build_fewshot_balanced_prompt(pool, 16, france);
    EXPECT_EQ(count_occurrences(prompt, "A: <search>\n"), 8u);
    EXPECT_EQ(count_occurrences(prompt, "A: ans"), 8u);
    EXPECT_EQ(count_occurrences(prompt, "Q: "), 17u);
    EXPECT_TRUE(prompt.ends_with("Q: capital of France?\nA:"));
}

TEST(FewShotPrompt, TwoShotsUseBothAndSeedFixesOrder) {
    const auto pool = make_pool(1, 1);
    const auto p1 = build_fewshot_balanced_prompt(pool, 2, france);
    EXPECT_NE(p1.find("Q: aq0?\nA: ans0\n\n"), std::string::npos);
    EXPECT_NE(p1.find("Q: mq0?\nA: <search>\n\n"), std::string::npos);
    EXPECT_EQ(build_fewshot_balanced_prompt(pool, 2, france), p1);
}

TEST(FewShotPrompt, DeficientSideIsNamed) {
    try {
        build_fewshot_balanced_prompt(make_pool(1, 3), 4, france);
        FAIL() << "expected BalanceError";
    } catch (const BalanceError& e) {
        EXPECT_EQ(e.side(), "answered");
    }
    try {
        build_fewshot_balanced_prompt(make_pool(5, 0), 4, france);
        FAIL() << "expected BalanceError";
    } catch (const BalanceError& e) {
        EXPECT_EQ(e.side(), "masked");
    }
    EXPECT_THROW(build_fewshot_balanced_prompt(make_pool(5, 5), 3, france), ConfigError);
}

TEST(FewShotPrompt, BalanceHoldsForEverySeedAndK) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto pool = make_pool(9 + seed % 5, 9 + seed % 7, seed);
        for (int k = 2; k <= 18; k += 2) {
            const auto prompt = build_fewshot_balanced_prompt(pool, k, france);
            ASSERT_EQ(count_occurrences(prompt, "<search>"), static_cast<std::size_t>(k / 2)) << seed << " " << k;
        }
    }
}

TEST(FewShotPrompt, DifferentSeedsUsuallyDiffer) {
    std::set<std::string> seen;
    for (std::uint64_t seed = 0; seed < 10; ++seed) seen.insert(build_fewshot_balanced_prompt(make_pool(20, 20, seed), 16, france));
    EXPECT_GT(seen.size(), 5u);
}

TEST(SeededShuffle, IsPermutationAndDeterministic) {
    std::vector<int> v(100);
    std::iota(v.begin(), v.end(), 0);
    auto a = v, b = v;
    std::mt19937_64 r1(9), r2(9);
    detail::seeded_shuffle(a, r1);
    detail::seeded_shuffle(b, r2);
    EXPECT_EQ(a, b);
    EXPECT_NE(a, v);
    std::sort(a.begin(), a.end());
    EXPECT_EQ(a, v);
}

TEST(PromptStyleNames, RoundTrip) {
    for (auto s : {PromptStyle::zeroshot_qa, PromptStyle::fewshot_balanced, PromptStyle::instruct_idk}) {
        EXPECT_EQ(parse_prompt_style(to_string(s)), s);
    }
    EXPECT_FALSE(parse_prompt_style("chatty"));
}
