#pragma once

// Pipeline configuration and the stage commands behind the `halm` CLI.
// Stages talk only through files in the output directory:
//
//   corpus.<split>.jsonl        ingest
//   predictions.<split>.jsonl   infer      (+ .manifest.json)
//   masked.<split>.jsonl        label      (+ .manifest.json)
//   threshold.json              calibrate
//   report.json, report.txt     evaluate
//   tradeoff.tsv, lambda.tsv    tradeoff
//   histogram.tsv               histogram
//
// Every output carries the config hash and normalization-profile hash,
// inline for JSON/TSV/text files and in the sidecar manifest for JSONL.

#include <halm/analysis.hpp>
#include <halm/client.hpp>
#include <halm/corpus.hpp>
#include <halm/errors.hpp>
#include <halm/evaluator.hpp>
#include <halm/hash.hpp>
#include <halm/inference.hpp>
#include <halm/labeler.hpp>
#include <halm/ppl_baseline.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

namespace halm {

namespace fs = std::filesystem;

struct CorpusSource {
    fs::path path;
    CorpusFormat format = CorpusFormat::canonical_jsonl;
    Split split = Split::dev;
};

/// Adapter-training metadata copied into masked-dataset manifests for the downstream trainer.
inline json default_training_hints() {
    return json{{"warmup_ratio", 0.1},
                {"lora_r", 16},
                {"lora_alpha", 32},
                {"learning_rate", {{"large", 1e-4}, {"xxl", 7e-5}}}};
}

struct PipelineConfig {
    fs::path base_dir = ".";
    std::string corpus_name = "corpus";
    std::vector<CorpusSource> corpora;

    EndpointConfig endpoint;
    std::string token_env = "HALM_API_TOKEN";
    int max_new_tokens = default_max_new_tokens;
    int max_in_flight = 4;

    json normalization = "default";
    NormalizationProfile profile;
    std::string search_token{default_search_literal};
    std::vector<std::string> search_aliases;

    PromptStyle prompt_style = PromptStyle::zeroshot_qa;
    std::string qa_template{default_qa_template};
    fs::path fewshot_pool;
    int fewshot_k = 16;
    std::uint64_t fewshot_seed = 0;

    Calibration ppl_strategy = Calibration::max_f1;
    std::optional<double> ppl_target_rate;

    double lambda = 1.0;
    fs::path cache_dir = "cache";
    fs::path output_dir = "out";
    json training_hints = default_training_hints();

    fs::path resolve(const fs::path& p) const { return p.is_absolute() ? p : base_dir / p; }
    fs::path out(const std::string& name) const { return resolve(output_dir) / name; }
    fs::path corpus_file(Split s) const { return out("corpus." + std::string(to_string(s)) + ".jsonl"); }
    SearchMatcher matcher() const { return {search_token, search_aliases}; }
};

/// Serialized form; excludes the auth token and the base directory.
inline json to_json(const PipelineConfig& c) {
    json corpora = json::array();
    for (const auto& s : c.corpora) {
        corpora.push_back({{"path", s.path.generic_string()},
                           {"format", s.format == CorpusFormat::canonical_jsonl ? "canonical-jsonl" : "tsv-pairs"},
                           {"split", to_string(s.split)}});
    }
    return json{
        {"corpus_name", c.corpus_name},
        {"corpora", corpora},
        {"endpoint",
         {{"url", c.endpoint.url},
          {"model_tag", c.endpoint.model_tag},
          {"token_env", c.token_env},
          {"max_new_tokens", c.max_new_tokens},
          {"max_in_flight", c.max_in_flight},
          {"retries", c.endpoint.max_retries},
          {"backoff_ms", c.endpoint.backoff.count()},
          {"timeout_ms", c.endpoint.timeout.count()}}},
        {"normalization", c.normalization},
        {"search_token", c.search_token},
        {"search_aliases", c.search_aliases},
        {"prompt",
         {{"style", to_string(c.prompt_style)},
          {"template", c.qa_template},
          {"fewshot_pool", c.fewshot_pool.generic_string()},
          {"k", c.fewshot_k},
          {"seed", c.fewshot_seed}}},
        {"ppl", {{"strategy", to_string(c.ppl_strategy)}, {"target_rate", optional_json(c.ppl_target_rate)}}},
        {"lambda", c.lambda},
        {"cache_dir", c.cache_dir.generic_string()},
        {"output_dir", c.output_dir.generic_string()},
        {"training_hints", c.training_hints},
    };
}

inline std::string config_hash(const PipelineConfig& c) { return sha256_hex(to_json(c).dump()); }

namespace detail {

inline void reject_unknown_keys(const json& j, const std::set<std::string>& known, const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!known.count(it.key())) throw ConfigError("unknown config key '" + where + it.key() + "'");
    }
}

}  // namespace detail

inline void validate(const PipelineConfig& c) {
    if (c.fewshot_k <= 0 || c.fewshot_k % 2 != 0) throw ConfigError("prompt.k must be a positive even integer");
    if (!(c.lambda >= 1.0)) throw ConfigError("lambda must be >= 1");
    if (c.max_in_flight <= 0) throw ConfigError("endpoint.max_in_flight must be positive");
    if (c.max_new_tokens <= 0) throw ConfigError("endpoint.max_new_tokens must be positive");
    if (c.endpoint.max_retries < 0) throw ConfigError("endpoint.retries must be >= 0");
    if (c.search_token.empty()) throw ConfigError("search_token must be non-empty");
    if (c.ppl_strategy == Calibration::target_search_rate) {
        if (!c.ppl_target_rate) throw ConfigError("ppl.target_rate is required for target-search-rate");
        if (!(*c.ppl_target_rate >= 0.0 && *c.ppl_target_rate <= 1.0)) throw ConfigError("ppl.target_rate must be in [0, 1]");
    }
    if (c.prompt_style == PromptStyle::zeroshot_qa) {
        // Surfaces placeholder errors at validation time.
        build_zeroshot_prompt(QaRecord{"x", "x", {"x"}, Split::dev}, c.qa_template);
    }
}

/// Builds a config from its JSON form. Unknown keys are rejected.
inline PipelineConfig config_from_json(const json& j, const fs::path& base_dir) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    detail::reject_unknown_keys(j,
                                {"corpus_name", "corpora", "endpoint", "normalization", "search_token", "search_aliases",
                                 "prompt", "ppl", "lambda", "cache_dir", "output_dir", "training_hints"},
                                "");
    PipelineConfig c;
    c.base_dir = base_dir;
    try {
        c.corpus_name = j.value("corpus_name", c.corpus_name);
        for (const auto& s : j.value("corpora", json::array())) {
            detail::reject_unknown_keys(s, {"path", "format", "split"}, "corpora.");
            CorpusSource src;
            src.path = s.at("path").get<std::string>();
            const auto fmt = parse_corpus_format(s.value("format", std::string("canonical-jsonl")));
            if (!fmt) throw ConfigError("unknown corpus format in corpora entry " + src.path.string());
            src.format = *fmt;
            const auto split = parse_split(s.at("split").get<std::string>());
            if (!split) throw ConfigError("unknown split in corpora entry " + src.path.string());
            src.split = *split;
            c.corpora.push_back(std::move(src));
        }
        if (j.contains("endpoint")) {
            const auto& e = j.at("endpoint");
            detail::reject_unknown_keys(e,
                                        {"url", "model_tag", "token_env", "max_new_tokens", "max_in_flight", "retries",
                                         "backoff_ms", "timeout_ms"},
                                        "endpoint.");
            c.endpoint.url = e.value("url", c.endpoint.url);
            c.endpoint.model_tag = e.value("model_tag", c.endpoint.model_tag);
            c.token_env = e.value("token_env", c.token_env);
            c.max_new_tokens = e.value("max_new_tokens", c.max_new_tokens);
            c.max_in_flight = e.value("max_in_flight", c.max_in_flight);
            c.endpoint.max_retries = e.value("retries", c.endpoint.max_retries);
            c.endpoint.backoff = std::chrono::milliseconds(e.value("backoff_ms", c.endpoint.backoff.count()));
            c.endpoint.timeout = std::chrono::milliseconds(e.value("timeout_ms", c.endpoint.timeout.count()));
        }
        c.normalization = j.value("normalization", c.normalization);
        c.profile = profile_from_json(c.normalization);
        c.search_token = j.value("search_token", c.search_token);
        c.search_aliases = j.value("search_aliases", c.search_aliases);
        if (j.contains("prompt")) {
            const auto& p = j.at("prompt");
            detail::reject_unknown_keys(p, {"style", "template", "fewshot_pool", "k", "seed"}, "prompt.");
            const auto style = parse_prompt_style(p.value("style", std::string(to_string(c.prompt_style))));
            if (!style) throw ConfigError("unknown prompt.style");
            c.prompt_style = *style;
            c.qa_template = p.value("template", c.qa_template);
            c.fewshot_pool = p.value("fewshot_pool", std::string{});
            c.fewshot_k = p.value("k", c.fewshot_k);
            c.fewshot_seed = p.value("seed", c.fewshot_seed);
        }
        if (j.contains("ppl")) {
            const auto& p = j.at("ppl");
            detail::reject_unknown_keys(p, {"strategy", "target_rate"}, "ppl.");
            const auto strategy = parse_calibration(p.value("strategy", std::string("max-f1")));
            if (!strategy) throw ConfigError("unknown ppl.strategy");
            c.ppl_strategy = *strategy;
            if (p.contains("target_rate") && !p.at("target_rate").is_null()) c.ppl_target_rate = p.at("target_rate").get<double>();
        }
        c.lambda = j.value("lambda", c.lambda);
        c.cache_dir = j.value("cache_dir", c.cache_dir.string());
        c.output_dir = j.value("output_dir", c.output_dir.string());
        c.training_hints = j.value("training_hints", c.training_hints);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad config value: ") + e.what());
    }
    if (const char* token = std::getenv(c.token_env.c_str())) c.endpoint.auth_token = token;
    validate(c);
    return c;
}

/// Reads the config file and applies `overrides` (a JSON merge patch) before validation.
inline PipelineConfig load_config(const fs::path& path, const json& overrides = json::object()) {
    if (!fs::exists(path)) throw ConfigError("config file not found: " + path.string());
    json j;
    try {
        j = json::parse(detail::read_file(path));
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    j.merge_patch(overrides);
    return config_from_json(j, path.has_parent_path() ? path.parent_path() : fs::path("."));
}

inline json provenance_json(const PipelineConfig& c) {
    return json{{"config_hash", config_hash(c)}, {"profile_hash", profile_hash(c.profile)}};
}

inline std::string provenance_comment(const PipelineConfig& c) {
    return "# config_hash=" + config_hash(c) + " profile_hash=" + profile_hash(c.profile) + "\n";
}

inline Corpus load_split_corpus(const PipelineConfig& c, Split split) {
    const auto path = c.corpus_file(split);
    if (!fs::exists(path)) throw DataError("missing " + path.string() + "; run `halm ingest` first");
    return ingest(path, CorpusFormat::canonical_jsonl, split, c.corpus_name, c.profile);
}

// ---------------------------------------------------------------------------
// Stage commands. Each writes its files and a short summary to `log`.

inline std::vector<fs::path> cmd_ingest(const PipelineConfig& c, std::ostream& log) {
    if (c.corpora.empty()) throw ConfigError("no corpora configured");
    for (const auto& s : c.corpora) {
        if (!fs::exists(c.resolve(s.path))) throw ConfigError("corpus file not found: " + c.resolve(s.path).string());
    }
    std::vector<Corpus> parts;
    for (const auto& s : c.corpora) {
        parts.push_back(ingest(c.resolve(s.path), s.format, s.split, c.corpus_name, c.profile));
    }
    const Corpus all = concat(c.corpus_name, parts, c.profile);  // rejects ids repeated across splits

    std::vector<fs::path> written;
    json counts = json::object();
    for (Split s : {Split::train, Split::dev, Split::test}) {
        const Corpus part = all.only(s);
        const bool configured = std::any_of(c.corpora.begin(), c.corpora.end(), [&](const CorpusSource& src) { return src.split == s; });
        if (!configured) continue;
        emit_canonical(part, c.corpus_file(s));
        written.push_back(c.corpus_file(s));
        counts[std::string(to_string(s))] = part.size();
        log << to_string(s) << "\t" << part.size() << "\n";
    }
    json manifest = provenance_json(c);
    manifest["corpus"] = c.corpus_name;
    manifest["counts"] = counts;
    manifest["normalization_profile"] = to_json(c.profile);
    detail::write_file_atomic(c.out("corpus.manifest.json"), manifest.dump(2) + "\n");
    written.push_back(c.out("corpus.manifest.json"));
    return written;
}

inline PromptBuilder make_prompt_builder(const PipelineConfig& c) {
    PromptBuilder b;
    b.style = c.prompt_style;
    b.qa_template = c.qa_template;
    b.k = c.fewshot_k;
    if (c.prompt_style == PromptStyle::fewshot_balanced) {
        if (c.fewshot_pool.empty()) throw ConfigError("prompt.fewshot_pool is required for fewshot-balanced");
        const auto pool_path = c.resolve(c.fewshot_pool);
        if (!fs::exists(pool_path)) throw ConfigError("few-shot pool not found: " + pool_path.string());
        b.pool = pool_from_dataset(read_masked_dataset(pool_path), c.fewshot_seed);
        b.pool.search_literal = c.search_token;
    }
    return b;
}

inline fs::path default_predictions_path(const PipelineConfig& c, Split split) {
    return c.out("predictions." + std::string(to_string(split)) + ".jsonl");
}

inline fs::path cmd_infer(const PipelineConfig& c, Split split, std::optional<fs::path> output, std::ostream& log) {
    const Corpus corpus = load_split_corpus(c, split);
    const fs::path out_path = output ? c.resolve(*output) : default_predictions_path(c, split);
    const PromptBuilder prompts = make_prompt_builder(c);
    GenerationClient client(c.endpoint, ResponseCache(c.resolve(c.cache_dir)));
    std::vector<Prediction> predictions;
    try {
        predictions = run_corpus(corpus, prompts, client, {c.prompt_style, c.max_new_tokens, c.max_in_flight});
    } catch (const RunAborted& e) {
        auto partial = out_path;
        partial.replace_extension(".partial.json");
        json m = e.manifest();
        m["provenance"] = provenance_json(c);
        detail::write_file_atomic(partial, m.dump(2) + "\n");
        log << "aborted at record " << e.failed_id() << "; " << e.done().size() << " done, manifest " << partial.string() << "\n";
        throw;
    }
    detail::write_file_atomic(out_path, to_jsonl(predictions));
    json manifest = provenance_json(c);
    manifest["split"] = to_string(split);
    manifest["model_tag"] = c.endpoint.model_tag;
    manifest["prompt_style"] = to_string(c.prompt_style);
    manifest["decoding"] = {{"mode", "greedy"}, {"max_new_tokens", c.max_new_tokens}};
    manifest["n"] = predictions.size();
    detail::write_file_atomic(manifest_path_for(out_path), manifest.dump(2) + "\n");
    log << "predictions\t" << predictions.size() << "\tnetwork_calls\t" << client.network_calls() << "\tcache_hits\t"
        << client.cache_hits() << "\n";
    return out_path;
}

inline fs::path cmd_label(const PipelineConfig& c, const fs::path& predictions_path, Split split,
                          std::optional<fs::path> output, std::ostream& log) {
    const Corpus corpus = load_split_corpus(c, split);
    const auto predictions = read_predictions(c.resolve(predictions_path));
    if (predictions.empty()) log << "warning: " << predictions_path.string() << " has no predictions\n";
    MaskedDataset ds = build_masked_dataset(predictions, corpus, c.profile, SearchToken{c.search_token});
    ds.provenance.training_hints = c.training_hints;
    const fs::path out_path = output ? c.resolve(*output) : c.out("masked." + std::string(to_string(split)) + ".jsonl");
    emit_dataset(ds, corpus, out_path, provenance_json(c));
    char rate[32];
    std::snprintf(rate, sizeof rate, "%.1f", 100.0 * ds.stats.mask_rate());
    log << "examples\t" << ds.stats.n_total << "\tanswered\t" << ds.stats.n_answer << "\tmasked\t" << ds.stats.n_masked
        << "\tmask_rate\t" << rate << "%\n";
    return out_path;
}

/// Judges predictions against their records; returned in prediction order.
inline std::vector<JudgedItem> judge_predictions(const std::vector<Prediction>& predictions, const Corpus& corpus,
                                                 const NormalizationProfile& profile, const SearchMatcher& matcher) {
    std::vector<JudgedItem> out;
    out.reserve(predictions.size());
    for (const auto& p : predictions) {
        const QaRecord* r = corpus.find(p.record_id);
        if (!r) throw PairingError("prediction for unknown record id " + p.record_id);
        out.push_back({p.record_id, judge(p.text, *r, profile, matcher)});
    }
    return out;
}

inline fs::path cmd_calibrate(const PipelineConfig& c, const fs::path& predictions_path, Split split,
                              std::optional<fs::path> output, std::ostream& log) {
    const Corpus corpus = load_split_corpus(c, split);
    const auto predictions = read_predictions(c.resolve(predictions_path));
    const auto judged = judge_predictions(predictions, corpus, c.profile, SearchMatcher{c.search_token, {}});
    std::vector<ScoredItem> scored;
    scored.reserve(predictions.size());
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        if (judged[i].judgment == Judgment::search) {
            throw DataError("record " + judged[i].record_id + ": base prediction is the search token");
        }
        scored.push_back({predictions[i].perplexity, judged[i].judgment == Judgment::correct});
    }
    const std::string model_tag = predictions.empty() ? std::string{} : predictions.front().model_tag;
    const auto fit = calibrate(std::move(scored), c.ppl_strategy, c.ppl_target_rate,
                               c.corpus_name + "/" + std::string(to_string(split)) + "/" + model_tag);
    json j = to_json(fit.threshold);
    j["fit"] = {{"n", predictions.size()}, {"n_search", fit.n_search}, {"f1", fit.f1}};
    j["provenance"] = provenance_json(c);
    const fs::path out_path = output ? c.resolve(*output) : c.out("threshold.json");
    detail::write_file_atomic(out_path, j.dump(2) + "\n");
    log << "tau\t" << tau_to_json(fit.threshold.tau).dump() << "\tf1\t" << fit.f1 << "\tsearched\t" << fit.n_search
        << "/" << predictions.size() << "\n";
    return out_path;
}

inline PplThreshold read_threshold(const fs::path& path) {
    try {
        return threshold_from_json(json::parse(detail::read_file(path)));
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

/// Adapted outputs under PPL-t: the base text when answered, the search token when searched.
inline std::vector<Prediction> apply_threshold(const std::vector<Prediction>& base, const PplThreshold& t,
                                               const std::string& search_token) {
    std::vector<Prediction> out = base;
    for (auto& p : out) {
        if (decide(p, t) == Decision::search) p.text = search_token;
        p.model_tag = p.model_tag + "+ppl-t";
    }
    return out;
}

struct EvaluateInputs {
    fs::path base_predictions;
    std::optional<fs::path> adapted_outputs;  // predictions-format file
    std::optional<fs::path> threshold;        // or derive adapted outputs by PPL-t
    Split split = Split::dev;
    std::optional<fs::path> output_prefix;    // default <out>/report
    std::string label = "adapted";
};

inline EvalReport cmd_evaluate(const PipelineConfig& c, const EvaluateInputs& in, std::ostream& log) {
    if (in.adapted_outputs.has_value() == in.threshold.has_value()) {
        throw ConfigError("evaluate needs exactly one of --adapted or --threshold");
    }
    const Corpus corpus = load_split_corpus(c, in.split);
    const auto base = read_predictions(c.resolve(in.base_predictions));
    const auto base_judged = judge_predictions(base, corpus, c.profile, SearchMatcher{c.search_token, {}});
    for (const auto& b : base_judged) {
        if (b.judgment == Judgment::search) throw DataError("record " + b.record_id + ": base model output is a search");
    }

    std::vector<Prediction> adapted;
    if (in.threshold) adapted = apply_threshold(base, read_threshold(c.resolve(*in.threshold)), c.search_token);
    else adapted = read_predictions(c.resolve(*in.adapted_outputs));

    std::unordered_map<std::string, const Prediction*> by_id;
    for (const auto& a : adapted) {
        if (!by_id.emplace(a.record_id, &a).second) throw PairingError("duplicate adapted output for " + a.record_id);
    }
    if (by_id.size() != base.size()) {
        throw PairingError("base has " + std::to_string(base.size()) + " predictions, adapted has " +
                           std::to_string(by_id.size()));
    }
    std::vector<Prediction> aligned;
    aligned.reserve(base.size());
    for (const auto& b : base) {
        const auto it = by_id.find(b.record_id);
        if (it == by_id.end()) throw PairingError("no adapted output for record " + b.record_id);
        aligned.push_back(*it->second);
    }
    const auto adapted_judged = judge_predictions(aligned, corpus, c.profile, c.matcher());
    const EvalReport report = evaluate_pair(base_judged, adapted_judged, c.lambda);

    const fs::path prefix = in.output_prefix ? c.resolve(*in.output_prefix) : c.out("report");
    json j = to_json(report);
    j["label"] = in.label;
    j["split"] = to_string(in.split);
    j["provenance"] = provenance_json(c);
    j["provenance"]["normalization_profile"] = to_json(c.profile);
    auto json_path = prefix;
    json_path += ".json";
    auto txt_path = prefix;
    txt_path += ".txt";
    detail::write_file_atomic(json_path, j.dump(2) + "\n");
    const std::string table = format_report_table(report, in.label);
    detail::write_file_atomic(txt_path, provenance_comment(c) + table);
    log << table;
    return report;
}

inline EvalReport read_report(const fs::path& path) {
    try {
        return report_from_json(json::parse(detail::read_file(path)));
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

inline std::vector<TradeoffPoint> cmd_tradeoff(const PipelineConfig& c, const fs::path& report_path,
                                               const std::vector<double>& ratios, const std::vector<double>& lambdas,
                                               std::optional<fs::path> output, std::ostream& log) {
    const EvalReport r = read_report(c.resolve(report_path));
    const auto points = tradeoff_curve(100.0 * r.adapted.c, 100.0 * r.adapted.h, 100.0 * r.adapted.s, ratios);
    const fs::path out_path = output ? c.resolve(*output) : c.out("tradeoff.tsv");
    const std::string table = format_tradeoff_tsv(points);
    detail::write_file_atomic(out_path, provenance_comment(c) + table);
    log << table;
    if (!lambdas.empty()) {
        const auto sweep = lambda_sweep(r.adapted.s, r.adapted.h, lambdas);
        auto lambda_path = out_path;
        lambda_path.replace_filename("lambda.tsv");
        detail::write_file_atomic(lambda_path, provenance_comment(c) + format_lambda_tsv(sweep));
        log << format_lambda_tsv(sweep);
    }
    return points;
}

struct HistogramInputs {
    fs::path predictions;
    Split split = Split::dev;
    std::vector<double> edges;
    ValueTransform transform = ValueTransform::log;
    std::optional<fs::path> output;
};

/// Perplexity histograms, one per judgment class (C, H, S) of the given outputs.
inline fs::path cmd_histogram(const PipelineConfig& c, const HistogramInputs& in, std::ostream& log) {
    const Corpus corpus = load_split_corpus(c, in.split);
    const auto predictions = read_predictions(c.resolve(in.predictions));
    const auto judged = judge_predictions(predictions, corpus, c.profile, c.matcher());
    std::string table = provenance_comment(c) + "class\tbin_lo\tbin_hi\tcount\n";
    for (Judgment cls : {Judgment::correct, Judgment::hallucinated, Judgment::search}) {
        std::vector<double> values;
        for (std::size_t i = 0; i < predictions.size(); ++i) {
            if (judged[i].judgment == cls) values.push_back(predictions[i].perplexity);
        }
        const HistogramSpec spec{in.edges, in.transform, std::string(to_string(cls))};
        table += format_histogram_tsv(spec, histogram(values, spec));
    }
    const fs::path out_path = in.output ? c.resolve(*in.output) : c.out("histogram.tsv");
    detail::write_file_atomic(out_path, table);
    log << "wrote " << out_path.string() << "\n";
    return out_path;
}

}  // namespace halm
