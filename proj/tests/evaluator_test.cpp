#include <halm/evaluator.hpp>

#include <gtest/gtest.h>

#include <random>

using namespace halm;

namespace {

const NormalizationProfile prof = default_profile();
const QaRecord paris{"q", "capital of France?", {"Paris"}, Split::dev};

constexpr Judgment C = Judgment::correct;
constexpr Judgment H = Judgment::hallucinated;
constexpr Judgment S = Judgment::search;

std::vector<JudgedItem> judged(const std::vector<Judgment>& js) {
    std::vector<JudgedItem> out;
    for (std::size_t i = 0; i < js.size(); ++i) out.push_back({"r" + std::to_string(i), js[i]});
    return out;
}

std::vector<Judgment> random_base(std::mt19937_64& rng, std::size_t n) {
    std::vector<Judgment> v(n);
    for (auto& j : v) j = rng() % 3 == 0 ? C : H;
    return v;
}

std::vector<Judgment> random_adapted(std::mt19937_64& rng, std::size_t n) {
    std::vector<Judgment> v(n);
    for (auto& j : v) j = static_cast<Judgment>(rng() % 3);
    return v;
}

}  // namespace

TEST(Judge, Examples) {
    const SearchMatcher m;
    EXPECT_EQ(judge("<search>", paris, prof, m), S);
    EXPECT_EQ(judge("  <search>\n", paris, prof, m), S);
    EXPECT_EQ(judge("Paris", paris, prof, m), C);
    EXPECT_EQ(judge("Lyon", paris, prof, m), H);
}

TEST(Judge, AbstentionAliases) {
    const SearchMatcher m{"<search>", {"I don't know"}};
    EXPECT_EQ(judge("I don't know", paris, prof, m), S);
    EXPECT_EQ(judge("i don't know.", paris, prof, m), S);
    EXPECT_EQ(judge("\"I don't know\"", paris, prof, m), S);
    EXPECT_EQ(judge("I don't know Paris", paris, prof, m), H);
    EXPECT_EQ(judge("I don't know", paris, prof, SearchMatcher{}), H);
}

TEST(ConfusionCell, FullTable) {
    EXPECT_EQ(confusion_cell(C, C), Cell::tp);
    EXPECT_EQ(confusion_cell(H, C), Cell::tp);
    EXPECT_EQ(confusion_cell(C, H), Cell::fp);
    EXPECT_EQ(confusion_cell(H, H), Cell::fp);
    EXPECT_EQ(confusion_cell(C, S), Cell::fn);
    EXPECT_EQ(confusion_cell(H, S), Cell::tn);
    EXPECT_THROW(confusion_cell(S, C), DataError);
}

TEST(F1, Examples) {
    EXPECT_NEAR(f1(ConfusionCounts{2, 1, 0, 1}), 2.0 / 3.0, 1e-12);
    EXPECT_NEAR(f1_score(21.3, 16.6, 6.0), 0.6534, 5e-5);
    EXPECT_DOUBLE_EQ(f1(ConfusionCounts{5, 0, 3, 0}), 1.0);
    EXPECT_THROW(f1(ConfusionCounts{0, 0, 4, 0}), DomainError);
}

TEST(F1, RateWeightedReconstruction) {
    const auto lora = rate_weighted_confusion(27.3, 72.7, 21.3, 16.6);
    EXPECT_NEAR(lora.fn, 6.0, 1e-9);
    EXPECT_NEAR(lora.tn, 56.1, 1e-9);
    EXPECT_NEAR(lora.f1(), 0.6534, 5e-5);
    const auto ppl = rate_weighted_confusion(27.3, 72.7, 18.6, 8.9);
    EXPECT_NEAR(ppl.f1(), 0.6788, 5e-5);
}

TEST(EvaluatePair, IdentityPolicy) {
    const auto base = judged({C, H, H, C, H});
    const auto r = evaluate_pair(base, base, 2.0);
    EXPECT_EQ(r.adapted.s, 0.0);
    EXPECT_EQ(r.retention_c, 1.0);
    EXPECT_EQ(r.retention_h, 1.0);
    EXPECT_DOUBLE_EQ(r.budget_cost, 2.0 * r.base_h);
    ASSERT_TRUE(r.f1);
    EXPECT_NEAR(*r.f1, 4.0 / 7.0, 1e-12);  // tp=2, fp=3
}

TEST(EvaluatePair, AlwaysSearch) {
    const auto r = evaluate_pair(judged({C, H, H}), judged({S, S, S}));
    EXPECT_EQ(r.adapted.c, 0.0);
    EXPECT_EQ(r.adapted.h, 0.0);
    EXPECT_EQ(r.adapted.s, 1.0);
    EXPECT_EQ(r.budget_cost, 1.0);
    EXPECT_EQ(r.retention_c, 0.0);
    ASSERT_TRUE(r.f1);
    EXPECT_EQ(*r.f1, 0.0);  // tp=0, fn=1
}

TEST(EvaluatePair, HandComputedFourItems) {
    const auto r = evaluate_pair(judged({C, C, H, H}), judged({C, S, S, H}));
    EXPECT_EQ(r.confusion, (ConfusionCounts{1, 1, 1, 1}));
    EXPECT_NEAR(*r.f1, 0.5, 1e-12);
    EXPECT_DOUBLE_EQ(r.adapted.s, 0.5);
    EXPECT_DOUBLE_EQ(r.budget_cost, 0.75);
    EXPECT_DOUBLE_EQ(*r.retention_c, 0.5);
    EXPECT_DOUBLE_EQ(*r.retention_h, 0.5);
}

TEST(EvaluatePair, HeadlineBudgetCost) {
    EXPECT_NEAR(budget_cost(0.620, 0.166, 1.0), 0.786, 1e-12);
    EXPECT_THROW(budget_cost(0.5, 0.1, 0.5), DomainError);
}

TEST(EvaluatePair, UndefinedRetentionIsNotZero) {
    const auto r = evaluate_pair(judged({H, H}), judged({H, S}));
    EXPECT_FALSE(r.retention_c);
    EXPECT_EQ(r.retention_h, 0.5);
    const auto all_tn = evaluate_pair(judged({H}), judged({S}));
    EXPECT_FALSE(all_tn.f1);
    const auto j = to_json(all_tn);
    EXPECT_TRUE(j.at("f1").is_null());
    EXPECT_TRUE(j.at("retention").at("c_frac").is_null());
}

TEST(EvaluatePair, Errors) {
    EXPECT_THROW(evaluate_pair(judged({C}), judged({C, C})), PairingError);
    auto other = judged({C});
    other[0].record_id = "zz";
    EXPECT_THROW(evaluate_pair(judged({C}), other), PairingError);
    EXPECT_THROW(evaluate_pair({}, {}), DataError);
    EXPECT_THROW(evaluate_pair(judged({S}), judged({S})), DataError);
    EXPECT_THROW(evaluate_pair(judged({C}), judged({C}), 0.9), DomainError);
}

TEST(EvaluatePair, InvariantsOnRandomJudgments) {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = 1 + rng() % 80;
        const auto b = random_base(rng, n);
        const auto a = random_adapted(rng, n);
        const double lambda = 1.0 + static_cast<double>(rng() % 40) / 10.0;
        const auto r = evaluate_pair(judged(b), judged(a), lambda);

        std::size_t ac = 0, ah = 0, as = 0;
        for (auto j : a) (j == C ? ac : j == H ? ah : as) += 1;
        ASSERT_EQ(r.confusion.total(), n);
        ASSERT_EQ(r.confusion.tp, ac);
        ASSERT_EQ(r.confusion.fp, ah);
        ASSERT_EQ(r.confusion.tn + r.confusion.fn, as);
        ASSERT_NEAR(r.adapted.c + r.adapted.h + r.adapted.s, 1.0, 1e-9);
        if (r.retention_c) ASSERT_TRUE(*r.retention_c >= 0 && *r.retention_c <= 1);
        if (r.retention_h) ASSERT_TRUE(*r.retention_h >= 0 && *r.retention_h <= 1);
        ASSERT_GE(r.budget_cost, 0.0);
        ASSERT_LE(r.budget_cost, lambda + 1e-12);
        ASSERT_LE(r.budget_cost, evaluate_pair(judged(b), judged(a), lambda + 1.0).budget_cost);

        // Uniform duplication leaves F1 unchanged.
        auto b2 = b, a2 = a;
        b2.insert(b2.end(), b.begin(), b.end());
        a2.insert(a2.end(), a.begin(), a.end());
        const auto r2 = evaluate_pair(judged(b2), judged(a2), lambda);
        ASSERT_EQ(r.f1.has_value(), r2.f1.has_value());
        if (r.f1) ASSERT_NEAR(*r.f1, *r2.f1, 1e-12);
    }
}

TEST(Report, JsonRoundTripAndTable) {
    const auto r = evaluate_pair(judged({C, C, H, H}), judged({C, S, S, H}));
    const auto back = report_from_json(to_json(r));
    EXPECT_EQ(to_json(back), to_json(r));
    const auto table = format_report_table(r, "halm");
    EXPECT_NE(table.find("halm\t25.0 (50.0%)\t25.0 (50.0%)\t50.0\t50.0\t75.0"), std::string::npos);
    EXPECT_NE(table.find("TP=1\tFP=1\tTN=1\tFN=1"), std::string::npos);
}
