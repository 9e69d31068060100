#pragma once

// Canonical QA records, answer normalization and the exact-match judge.

#include <halm/detail/io.hpp>
#include <halm/detail/unicode.hpp>
#include <halm/errors.hpp>
#include <halm/hash.hpp>
#include <halm/stopwords.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace halm {

using json = nlohmann::json;

enum class Split { train, dev, test };

inline std::string_view to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::dev: return "dev";
        case Split::test: return "test";
    }
    return "?";
}

inline std::optional<Split> parse_split(std::string_view s) {
    if (s == "train") return Split::train;
    if (s == "dev") return Split::dev;
    if (s == "test") return Split::test;
    return std::nullopt;
}

struct QaRecord {
    std::string id;
    std::string question;
    std::vector<std::string> gold_answers;
    Split split = Split::dev;

    friend bool operator==(const QaRecord&, const QaRecord&) = default;
};

/// Throws DataError naming the record if any field invariant fails.
inline void validate(const QaRecord& r) {
    if (detail::trim(r.id).empty()) throw DataError("record with empty id");
    if (detail::trim(r.question).empty()) throw DataError("record " + r.id + ": empty question");
    if (r.gold_answers.empty()) throw DataError("record " + r.id + ": empty gold-answer list");
    for (const auto& a : r.gold_answers) {
        if (detail::trim(a).empty()) throw DataError("record " + r.id + ": empty gold answer");
    }
}

struct NormalizationProfile {
    bool lowercase = true;
    bool strip_punctuation = true;
    std::string stopword_list_id{english_stopwords_id};
    std::vector<std::string> stopwords = english_stopwords();
    bool collapse_whitespace = true;
    bool unicode_fold = true;

    friend bool operator==(const NormalizationProfile&, const NormalizationProfile&) = default;
};

/// Lowercase, fold, strip punctuation, drop English stopwords, single spaces.
inline NormalizationProfile default_profile() { return {}; }

/// Only trims and collapses whitespace.
inline NormalizationProfile raw_profile() {
    return {false, false, "none", {}, true, false};
}

inline json to_json(const NormalizationProfile& p) {
    return json{{"lowercase", p.lowercase},
                {"strip_punctuation", p.strip_punctuation},
                {"stopword_list_id", p.stopword_list_id},
                {"stopwords", p.stopwords},
                {"collapse_whitespace", p.collapse_whitespace},
                {"unicode_fold", p.unicode_fold}};
}

std::string normalize(std::string_view text, const NormalizationProfile& profile);

/// Accepts a profile name ("default", "raw") or a full profile object.
inline NormalizationProfile profile_from_json(const json& j) {
    if (j.is_string()) {
        const auto name = j.get<std::string>();
        if (name == "default") return default_profile();
        if (name == "raw") return raw_profile();
        throw ConfigError("unknown normalization profile '" + name + "'");
    }
    if (!j.is_object()) throw ConfigError("normalization profile must be a name or an object");
    NormalizationProfile p;
    p.lowercase = j.value("lowercase", p.lowercase);
    p.strip_punctuation = j.value("strip_punctuation", p.strip_punctuation);
    p.collapse_whitespace = j.value("collapse_whitespace", p.collapse_whitespace);
    p.unicode_fold = j.value("unicode_fold", p.unicode_fold);
    if (j.contains("stopwords")) {
        p.stopwords.clear();
        NormalizationProfile lower_only{true, false, "", {}, true, false};
        for (const auto& w : j.at("stopwords")) p.stopwords.push_back(normalize(w.get<std::string>(), lower_only));
        p.stopword_list_id = j.value("stopword_list_id", std::string("custom"));
    } else {
        p.stopword_list_id = j.value("stopword_list_id", p.stopword_list_id);
    }
    return p;
}

inline std::string profile_hash(const NormalizationProfile& p) { return sha256_hex(to_json(p).dump()); }

namespace detail {

inline std::string lower_utf8(std::u32string_view cps) {
    std::string out;
    for (char32_t c : cps) utf8_append(out, to_lower(c));
    return out;
}

}  // namespace detail

inline std::string normalize(std::string_view text, const NormalizationProfile& profile) {
    const std::u32string decoded = detail::utf8_decode(text);
    std::u32string cps;
    cps.reserve(decoded.size());
    for (char32_t c : decoded) {
        if (profile.unicode_fold) {
            if (auto folded = detail::fold_latin(c); !folded.empty()) {
                cps.append(folded);
                continue;
            }
        }
        cps.push_back(c);
    }
    if (profile.lowercase) {
        for (auto& c : cps) c = detail::to_lower(c);
    }

    // Tokenize; each token remembers the separator run that preceded it.
    struct Token {
        std::u32string separator;
        std::u32string text;
    };
    std::vector<Token> tokens;
    std::u32string pending_sep;
    bool in_token = false;
    for (char32_t c : cps) {
        const bool is_sep = detail::is_space(c) || (profile.strip_punctuation && detail::is_punctuation(c));
        if (is_sep) {
            pending_sep.push_back(detail::is_space(c) ? c : U' ');
            in_token = false;
        } else {
            if (!in_token) {
                tokens.push_back({std::move(pending_sep), {}});
                pending_sep.clear();
                in_token = true;
            }
            tokens.back().text.push_back(c);
        }
    }

    std::string out;
    bool first = true;
    for (const auto& tok : tokens) {
        if (!profile.stopwords.empty()) {
            const std::string lowered = detail::lower_utf8(tok.text);
            if (std::find(profile.stopwords.begin(), profile.stopwords.end(), lowered) != profile.stopwords.end()) {
                continue;
            }
        }
        if (!first) {
            if (profile.collapse_whitespace) {
                out.push_back(' ');
            } else {
                out += detail::utf8_encode(tok.separator.empty() ? std::u32string(U" ") : tok.separator);
            }
        }
        out += detail::utf8_encode(tok.text);
        first = false;
    }
    return out;
}

/// True iff the normalized prediction equals at least one normalized gold answer.
inline bool exact_match(std::string_view prediction, const std::vector<std::string>& gold_answers,
                        const NormalizationProfile& profile) {
    if (gold_answers.empty()) throw DomainError("exact_match: empty gold-answer list");
    const std::string p = normalize(prediction, profile);
    return std::any_of(gold_answers.begin(), gold_answers.end(),
                       [&](const std::string& g) { return normalize(g, profile) == p; });
}

/// Immutable ordered set of records with unique ids.
class Corpus {
public:
    Corpus() = default;
    Corpus(std::string name, std::vector<QaRecord> records, NormalizationProfile profile = default_profile())
        : name_(std::move(name)), records_(std::move(records)), profile_(std::move(profile)) {
        index_.reserve(records_.size());
        for (std::size_t i = 0; i < records_.size(); ++i) {
            validate(records_[i]);
            if (!index_.emplace(records_[i].id, i).second) throw DataError("duplicate id " + records_[i].id);
        }
    }

    const std::string& name() const noexcept { return name_; }
    const std::vector<QaRecord>& records() const noexcept { return records_; }
    const NormalizationProfile& profile() const noexcept { return profile_; }
    std::size_t size() const noexcept { return records_.size(); }
    bool empty() const noexcept { return records_.empty(); }
    auto begin() const noexcept { return records_.begin(); }
    auto end() const noexcept { return records_.end(); }

    const QaRecord* find(const std::string& id) const {
        const auto it = index_.find(id);
        return it == index_.end() ? nullptr : &records_[it->second];
    }
    std::optional<std::size_t> position(const std::string& id) const {
        const auto it = index_.find(id);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    Corpus with_profile(NormalizationProfile profile) const { return Corpus(name_, records_, std::move(profile)); }

    /// Records of one split, in corpus order.
    Corpus only(Split split) const {
        std::vector<QaRecord> out;
        std::copy_if(records_.begin(), records_.end(), std::back_inserter(out),
                     [&](const QaRecord& r) { return r.split == split; });
        return Corpus(name_, std::move(out), profile_);
    }

    friend bool operator==(const Corpus& a, const Corpus& b) {
        return a.name_ == b.name_ && a.records_ == b.records_ && a.profile_ == b.profile_;
    }

private:
    std::string name_;
    std::vector<QaRecord> records_;
    NormalizationProfile profile_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Concatenates corpora in order; duplicate ids across parts are an error naming the id.
inline Corpus concat(std::string name, const std::vector<Corpus>& parts, NormalizationProfile profile) {
    std::vector<QaRecord> all;
    for (const auto& c : parts) all.insert(all.end(), c.records().begin(), c.records().end());
    return Corpus(std::move(name), std::move(all), std::move(profile));
}

enum class CorpusFormat { canonical_jsonl, tsv_pairs };

inline std::optional<CorpusFormat> parse_corpus_format(std::string_view s) {
    if (s == "canonical-jsonl") return CorpusFormat::canonical_jsonl;
    if (s == "tsv-pairs") return CorpusFormat::tsv_pairs;
    return std::nullopt;
}

namespace detail {

inline std::string sequential_id(std::optional<Split> split, std::size_t ordinal) {
    return std::string(split ? to_string(*split) : std::string_view("rec")) + "-" + std::to_string(ordinal);
}

inline QaRecord parse_canonical_line(const std::string& line, std::size_t line_no, std::optional<Split> split,
                                     std::size_t ordinal) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::parse_error& e) {
        throw ParseError(line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ParseError(line_no, "expected a JSON object");
    QaRecord r;
    try {
        r.id = j.contains("id") ? j.at("id").get<std::string>() : sequential_id(split, ordinal);
        r.question = j.at("question").get<std::string>();
        r.gold_answers = j.at("answers").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        throw ParseError(line_no, std::string("bad record fields: ") + e.what());
    }
    if (j.contains("split")) {
        const auto s = j.at("split").is_string() ? parse_split(j.at("split").get<std::string>()) : std::nullopt;
        if (!s) throw ParseError(line_no, "unknown split");
        if (split && *s != *split) {
            throw ParseError(line_no, "record split " + std::string(to_string(*s)) + " does not match declared split " +
                                          std::string(to_string(*split)));
        }
        r.split = *s;
    } else if (split) {
        r.split = *split;
    } else {
        throw ParseError(line_no, "no split on record and none declared");
    }
    return r;
}

inline QaRecord parse_tsv_line(const std::string& line, std::size_t line_no, Split split, std::size_t ordinal) {
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError(line_no, "expected question<TAB>answers");
    if (line.find('\t', tab + 1) != std::string::npos) throw ParseError(line_no, "more than one TAB");
    QaRecord r;
    r.id = sequential_id(split, ordinal);
    r.question = line.substr(0, tab);
    r.split = split;
    const std::string answers = line.substr(tab + 1);
    if (!trim(answers).empty()) {
        std::size_t start = 0;
        while (true) {
            const auto bar = answers.find('|', start);
            r.gold_answers.push_back(trim(answers.substr(start, bar == std::string::npos ? bar : bar - start)));
            if (bar == std::string::npos) break;
            start = bar + 1;
        }
    }
    return r;
}

}  // namespace detail

/// Reads a corpus file, preserving line order. Blank lines are skipped.
/// `split` is required for tsv-pairs; for canonical files it is the default and must agree with per-line tags.
inline Corpus ingest(const std::filesystem::path& path, CorpusFormat format, std::optional<Split> split,
                     std::string name = {}, NormalizationProfile profile = default_profile()) {
    if (!std::filesystem::exists(path)) throw DataError("no such file: " + path.string());
    if (format == CorpusFormat::tsv_pairs && !split) throw ConfigError("tsv-pairs ingestion needs a declared split");
    if (name.empty()) name = path.stem().string();
    const auto lines = detail::read_lines(path);
    std::vector<QaRecord> records;
    std::unordered_map<std::string, std::size_t> seen;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (detail::is_blank(lines[i])) continue;
        const std::size_t line_no = i + 1;
        const std::size_t ordinal = records.size() + 1;
        QaRecord r = format == CorpusFormat::canonical_jsonl
                         ? detail::parse_canonical_line(lines[i], line_no, split, ordinal)
                         : detail::parse_tsv_line(lines[i], line_no, *split, ordinal);
        validate(r);
        if (!seen.emplace(r.id, line_no).second) {
            throw DataError("duplicate id " + r.id + " (lines " + std::to_string(seen[r.id]) + " and " +
                            std::to_string(line_no) + ")");
        }
        records.push_back(std::move(r));
    }
    return Corpus(std::move(name), std::move(records), std::move(profile));
}

inline json to_json(const QaRecord& r) {
    return json{{"id", r.id}, {"question", r.question}, {"answers", r.gold_answers}, {"split", to_string(r.split)}};
}

/// One canonical record per line.
inline std::string to_canonical_jsonl(const Corpus& corpus) {
    std::string out;
    for (const auto& r : corpus) {
        out += to_json(r).dump();
        out.push_back('\n');
    }
    return out;
}

inline void emit_canonical(const Corpus& corpus, const std::filesystem::path& path) {
    detail::write_file_atomic(path, to_canonical_jsonl(corpus));
}

}  // namespace halm
