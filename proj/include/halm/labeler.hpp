#pragma once

// Hallucination masking: a base model's prediction becomes its own training
// target when it is correct, and the search token otherwise.

#include <halm/corpus.hpp>
#include <halm/errors.hpp>
#include <halm/inference.hpp>

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <unordered_set>
#include <vector>

namespace halm {

struct SearchToken {
    std::string literal{default_search_literal};
};

struct MaskedExample {
    std::string record_id;
    std::string question;
    std::string target;
    bool was_masked = false;

    friend bool operator==(const MaskedExample&, const MaskedExample&) = default;
};

struct MaskStats {
    std::size_t n_total = 0;
    std::size_t n_answer = 0;
    std::size_t n_masked = 0;

    double mask_rate() const { return n_total == 0 ? 0.0 : static_cast<double>(n_masked) / n_total; }
    double answer_rate() const { return n_total == 0 ? 0.0 : static_cast<double>(n_answer) / n_total; }

    friend bool operator==(const MaskStats&, const MaskStats&) = default;
};

struct Provenance {
    std::string model_tag;
    std::string corpus_name;
    std::string source_split;
    NormalizationProfile profile;
    std::string search_literal{default_search_literal};
    /// Free-form metadata for the downstream trainer (e.g. adapter hyperparameters); not interpreted here.
    json training_hints = json::object();

    friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct MaskedDataset {
    std::vector<MaskedExample> examples;
    MaskStats stats;
    Provenance provenance;

    friend bool operator==(const MaskedDataset&, const MaskedDataset&) = default;
};

inline MaskStats compute_stats(const std::vector<MaskedExample>& examples) {
    MaskStats s;
    s.n_total = examples.size();
    for (const auto& e : examples) (e.was_masked ? s.n_masked : s.n_answer) += 1;
    return s;
}

inline MaskedExample halm_mask(const Prediction& prediction, const QaRecord& record,
                               const NormalizationProfile& profile, const SearchToken& token) {
    if (prediction.record_id != record.id) {
        throw PairingError("prediction for " + prediction.record_id + " paired with record " + record.id);
    }
    if (exact_match(prediction.text, record.gold_answers, profile)) {
        return {record.id, record.question, prediction.text, false};
    }
    return {record.id, record.question, token.literal, true};
}

/// One masked example per prediction, in corpus order.
inline MaskedDataset build_masked_dataset(const std::vector<Prediction>& predictions, const Corpus& corpus,
                                          const NormalizationProfile& profile, const SearchToken& token) {
    std::vector<std::pair<std::size_t, const Prediction*>> ordered;
    ordered.reserve(predictions.size());
    std::unordered_set<std::string> seen;
    std::string model_tag;
    for (const auto& p : predictions) {
        const auto pos = corpus.position(p.record_id);
        if (!pos) throw PairingError("prediction for unknown record id " + p.record_id);
        if (!seen.insert(p.record_id).second) throw PairingError("duplicate prediction for record id " + p.record_id);
        ordered.emplace_back(*pos, &p);
        if (model_tag.empty()) model_tag = p.model_tag;
    }
    std::sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

    MaskedDataset ds;
    ds.examples.reserve(ordered.size());
    for (const auto& [pos, p] : ordered) ds.examples.push_back(halm_mask(*p, corpus.records()[pos], profile, token));
    ds.stats = compute_stats(ds.examples);
    ds.provenance.model_tag = model_tag;
    ds.provenance.corpus_name = corpus.name();
    if (!ordered.empty()) ds.provenance.source_split = std::string(to_string(corpus.records()[ordered.front().first].split));
    ds.provenance.profile = profile;
    ds.provenance.search_literal = token.literal;
    return ds;
}

/// Id of the first record (corpus order) with a gold answer that the search token would match.
inline std::optional<std::string> search_token_collision(const Corpus& corpus, const NormalizationProfile& profile,
                                                         const SearchToken& token) {
    for (const auto& r : corpus) {
        if (exact_match(token.literal, r.gold_answers, profile)) return r.id;
    }
    return std::nullopt;
}

inline std::filesystem::path manifest_path_for(const std::filesystem::path& data_path) {
    auto p = data_path;
    p.replace_extension(".manifest.json");
    return p;
}

inline json to_json(const MaskedExample& e) {
    return json{{"id", e.record_id}, {"question", e.question}, {"target", e.target}, {"was_masked", e.was_masked}};
}

inline json manifest_json(const MaskedDataset& ds) {
    const auto& pv = ds.provenance;
    return json{{"stats", {{"n_total", ds.stats.n_total}, {"n_answer", ds.stats.n_answer}, {"n_masked", ds.stats.n_masked}}},
                {"provenance",
                 {{"model_tag", pv.model_tag},
                  {"corpus", pv.corpus_name},
                  {"source_split", pv.source_split},
                  {"normalization_profile", to_json(pv.profile)},
                  {"profile_hash", profile_hash(pv.profile)},
                  {"search_token", pv.search_literal},
                  {"training_hints", pv.training_hints}}}};
}

struct CollisionError : DataError {
    CollisionError(std::string record_id, const std::string& what) : DataError(what), record_id_(std::move(record_id)) {}
    const std::string& record_id() const noexcept { return record_id_; }

private:
    std::string record_id_;
};

/// Writes `<path>` (one example per line) and the sidecar manifest.
/// Refuses when the search token collides with a gold answer of `corpus`.
inline void emit_dataset(const MaskedDataset& ds, const Corpus& corpus, const std::filesystem::path& path,
                         const json& extra_manifest = json::object()) {
    const SearchToken token{ds.provenance.search_literal};
    if (auto id = search_token_collision(corpus, ds.provenance.profile, token)) {
        throw CollisionError(*id, "search token '" + token.literal + "' collides with a gold answer of record " + *id);
    }
    std::string body;
    for (const auto& e : ds.examples) {
        body += to_json(e).dump();
        body.push_back('\n');
    }
    json manifest = manifest_json(ds);
    for (auto it = extra_manifest.begin(); it != extra_manifest.end(); ++it) manifest[it.key()] = it.value();
    detail::write_file_atomic(path, body);
    detail::write_file_atomic(manifest_path_for(path), manifest.dump(2) + "\n");
}

inline MaskedDataset read_masked_dataset(const std::filesystem::path& path) {
    MaskedDataset ds;
    const auto lines = detail::read_lines(path);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (detail::is_blank(lines[i])) continue;
        try {
            const auto j = json::parse(lines[i]);
            ds.examples.push_back({j.at("id").get<std::string>(), j.at("question").get<std::string>(),
                                   j.at("target").get<std::string>(), j.at("was_masked").get<bool>()});
        } catch (const json::exception& e) {
            throw ParseError(i + 1, path.string() + ": " + e.what());
        }
    }
    ds.stats = compute_stats(ds.examples);
    const auto manifest_file = manifest_path_for(path);
    if (std::filesystem::exists(manifest_file)) {
        const auto m = json::parse(detail::read_file(manifest_file));
        const auto& pv = m.at("provenance");
        ds.provenance.model_tag = pv.at("model_tag").get<std::string>();
        ds.provenance.corpus_name = pv.at("corpus").get<std::string>();
        ds.provenance.source_split = pv.at("source_split").get<std::string>();
        ds.provenance.profile = profile_from_json(pv.at("normalization_profile"));
        ds.provenance.search_literal = pv.at("search_token").get<std::string>();
        ds.provenance.training_hints = pv.value("training_hints", json::object());
        const auto& st = m.at("stats");
        const MaskStats declared{st.at("n_total").get<std::size_t>(), st.at("n_answer").get<std::size_t>(),
                                 st.at("n_masked").get<std::size_t>()};
        if (declared != ds.stats) throw DataError(manifest_file.string() + ": stats disagree with " + path.string());
    }
    for (const auto& e : ds.examples) {
        if (e.was_masked != (e.target == ds.provenance.search_literal)) {
            throw DataError(path.string() + ": record " + e.record_id + " has inconsistent was_masked flag");
        }
    }
    return ds;
}

/// Few-shot demonstrations drawn from a masked dataset.
inline FewShotPool pool_from_dataset(const MaskedDataset& ds, std::uint64_t seed) {
    FewShotPool pool;
    pool.seed = seed;
    pool.search_literal = ds.provenance.search_literal;
    for (const auto& e : ds.examples) pool.examples.push_back({e.question, e.target});
    return pool;
}

}  // namespace halm
