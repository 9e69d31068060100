#include <halm/labeler.hpp>

#include "oracles.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace halm;
using halm::testing::TempDir;

namespace {

const NormalizationProfile prof = default_profile();
const SearchToken token{};

Prediction pred(const std::string& id, const std::string& text) {
    return make_prediction(id, text, {-0.5}, "base", PromptStyle::zeroshot_qa);
}

QaRecord rec(const std::string& id, std::vector<std::string> gold, const std::string& q = "question?") {
    return {id, q, std::move(gold), Split::dev};
}

}  // namespace

TEST(HalmMask, Examples) {
    EXPECT_EQ(halm_mask(pred("q", "Paris"), rec("q", {"Paris"}), prof, token),
              (MaskedExample{"q", "question?", "Paris", false}));
    EXPECT_EQ(halm_mask(pred("q", "Lyon"), rec("q", {"Paris"}), prof, token),
              (MaskedExample{"q", "question?", "<search>", true}));
    const auto kept = halm_mask(pred("q", "Napoleon I"), rec("q", {"Napoleon"}), prof, token);
    EXPECT_FALSE(kept.was_masked);
    EXPECT_EQ(kept.target, "Napoleon I");
}

TEST(HalmMask, IdMismatchIsPairingError) {
    EXPECT_THROW(halm_mask(pred("a", "x"), rec("b", {"x"}), prof, token), PairingError);
}

TEST(HalmMask, CustomTokenLiteral) {
    const auto e = halm_mask(pred("q", "Lyon"), rec("q", {"Paris"}), prof, SearchToken{"[SEARCH]"});
    EXPECT_EQ(e.target, "[SEARCH]");
}

TEST(HalmMask, AgreesWithOracleAndPreservesSurface) {
    std::mt19937_64 rng(21);
    const std::string alphabet = "aAIs .-\tTheb,";
    for (int i = 0; i < 20000; ++i) {
        const auto p = halm::testing::random_string(rng, alphabet, 6);
        std::vector<std::string> gold;
        for (std::size_t g = 1 + rng() % 3; g > 0; --g) {
            auto s = halm::testing::random_string(rng, alphabet, 6);
            if (s.find_first_not_of(" \t") == std::string::npos) s = "b";
            gold.push_back(s);
        }
        const auto e = halm_mask(pred("q", p), rec("q", gold), prof, token);
        ASSERT_EQ(!e.was_masked, oracle::exact_match_ascii(p, gold)) << "'" << p << "'";
        if (!e.was_masked) ASSERT_EQ(e.target, p);
        else ASSERT_EQ(e.target, token.literal);
    }
}

TEST(BuildMaskedDataset, CorpusOrderAndStats) {
    const Corpus c("nq", {rec("a", {"1"}), rec("b", {"2"}), rec("c", {"3"})});
    const auto ds = build_masked_dataset({pred("c", "3"), pred("a", "wrong")}, c, prof, token);
    ASSERT_EQ(ds.examples.size(), 2u);
    EXPECT_EQ(ds.examples[0].record_id, "a");
    EXPECT_EQ(ds.examples[1].record_id, "c");
    EXPECT_EQ(ds.stats, (MaskStats{2, 1, 1}));
    EXPECT_EQ(ds.provenance.model_tag, "base");
    EXPECT_EQ(ds.provenance.corpus_name, "nq");
    EXPECT_EQ(ds.provenance.source_split, "dev");
}

TEST(BuildMaskedDataset, AnswerRateMatchesCorrectFraction) {
    std::vector<QaRecord> records;
    std::vector<Prediction> preds;
    for (int i = 0; i < 1000; ++i) {
        const auto id = "r" + std::to_string(i);
        records.push_back(rec(id, {"gold" + std::to_string(i)}));
        preds.push_back(pred(id, i < 273 ? "gold" + std::to_string(i) : "other"));
    }
    const auto ds = build_masked_dataset(preds, Corpus("nq", records), prof, token);
    EXPECT_EQ(ds.stats.n_answer, 273u);
    EXPECT_DOUBLE_EQ(ds.stats.answer_rate(), 0.273);
    EXPECT_DOUBLE_EQ(ds.stats.mask_rate(), 0.727);
}

TEST(BuildMaskedDataset, EmptyAndErrors) {
    const Corpus c("nq", {rec("a", {"1"})});
    const auto empty = build_masked_dataset({}, c, prof, token);
    EXPECT_TRUE(empty.examples.empty());
    EXPECT_EQ(empty.stats, (MaskStats{0, 0, 0}));
    EXPECT_THROW(build_masked_dataset({pred("a", "1"), pred("a", "2")}, c, prof, token), PairingError);
    EXPECT_THROW(build_masked_dataset({pred("zz", "1")}, c, prof, token), PairingError);
}

TEST(BuildMaskedDataset, StatsInvariantsOnRandomData) {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<QaRecord> records;
        std::vector<Prediction> preds;
        std::size_t hallucinated = 0;
        const int n = static_cast<int>(rng() % 50);
        for (int i = 0; i < n; ++i) {
            const auto id = "r" + std::to_string(i);
            records.push_back(rec(id, {"x" + std::to_string(i)}));
            const bool ok = rng() % 2 == 0;
            hallucinated += ok ? 0 : 1;
            preds.push_back(pred(id, ok ? "X" + std::to_string(i) + "." : "y"));
        }
        const auto ds = build_masked_dataset(preds, Corpus("c", records), prof, token);
        ASSERT_EQ(ds.stats.n_answer + ds.stats.n_masked, ds.stats.n_total);
        ASSERT_EQ(ds.stats, compute_stats(ds.examples));
        ASSERT_EQ(ds.stats.n_masked, hallucinated);
        for (const auto& e : ds.examples) ASSERT_EQ(e.was_masked, e.target == token.literal);
    }
}

TEST(EmitDataset, RoundTripAndManifest) {
    TempDir dir;
    const Corpus c("nq", {rec("a", {"1"}, "q a?"), rec("b", {"2"}, "q \"b\"?")});
    auto ds = build_masked_dataset({pred("a", "1"), pred("b", "nope")}, c, prof, token);
    ds.provenance.training_hints = json{{"lora_r", 16}};
    const auto path = dir / "masked.dev.jsonl";
    emit_dataset(ds, c, path);
    EXPECT_EQ(read_masked_dataset(path), ds);

    const auto m = json::parse(detail::read_file(manifest_path_for(path)));
    EXPECT_EQ(m.at("stats"), (json{{"n_total", 2}, {"n_answer", 1}, {"n_masked", 1}}));
    EXPECT_EQ(m.at("provenance").at("search_token"), "<search>");
    EXPECT_EQ(m.at("provenance").at("profile_hash"), profile_hash(prof));
}

TEST(EmitDataset, RefusesSearchTokenCollision) {
    TempDir dir;
    const Corpus c("nq", {rec("ok", {"1"}), rec("bad", {"<search>"})});
    const auto ds = build_masked_dataset({pred("ok", "1")}, c, prof, token);
    try {
        emit_dataset(ds, c, dir / "x.jsonl");
        FAIL() << "expected CollisionError";
    } catch (const CollisionError& e) {
        EXPECT_EQ(e.record_id(), "bad");
        EXPECT_NE(std::string(e.what()).find("bad"), std::string::npos);
    }
    EXPECT_FALSE(std::filesystem::exists(dir / "x.jsonl"));
}

TEST(ReadMaskedDataset, DetectsTampering) {
    TempDir dir;
    const Corpus c("nq", {rec("a", {"1"})});
    const auto ds = build_masked_dataset({pred("a", "1")}, c, prof, token);
    const auto path = dir / "m.jsonl";
    emit_dataset(ds, c, path);
    detail::write_file_atomic(path, R"({"id":"a","question":"question?","target":"1","was_masked":true})" "\n");
    EXPECT_THROW(read_masked_dataset(path), DataError);
}

TEST(PoolFromDataset, CarriesTargetsAndLiteral) {
    MaskedDataset ds;
    ds.examples = {{"a", "qa?", "1", false}, {"b", "qb?", "<search>", true}};
    ds.provenance.search_literal = "<search>";
    const auto pool = pool_from_dataset(ds, 9);
    ASSERT_EQ(pool.examples.size(), 2u);
    EXPECT_EQ(pool.examples[1].target, "<search>");
    EXPECT_EQ(pool.seed, 9u);
    EXPECT_NO_THROW(build_fewshot_balanced_prompt(pool, 2, rec("z", {"x"})));
}
