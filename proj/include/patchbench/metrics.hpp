#pragma once

// Exact match, syntactic match and CodeBLEU per instance, and their
// aggregation over a test set (optionally across seeds).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <future>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "bleu.hpp"
#include "codeparse.hpp"
#include "error.hpp"
#include "keywords.hpp"
#include "language.hpp"

namespace patchbench {

using json = nlohmann::json;

enum class TokenizerMode { lexer, whitespace };

struct CodeBleuConfig {
    std::array<double, 4> weights{0.25, 0.25, 0.25, 0.25}; // ngram, weighted_ngram, ast, dataflow
    int max_order = 4;
    double keyword_weight = 1.0;
    double token_weight = 0.2;
    double epsilon = 0.1;
    bool auto_reweigh = true;
    TokenizerMode tokenizer = TokenizerMode::lexer;
    WeightedBrevity weighted_brevity = WeightedBrevity::reference_capped;
    bool floor_weighted_denominator = false;

    /// Settings that reproduce the reference scorer exactly, short inputs
    /// included (at the cost of codebleu(x, x) < 1 below four tokens).
    static CodeBleuConfig reference_exact() {
        CodeBleuConfig c;
        c.auto_reweigh = false;
        c.tokenizer = TokenizerMode::whitespace;
        c.weighted_brevity = WeightedBrevity::reference;
        c.floor_weighted_denominator = true;
        return c;
    }

    void validate() const {
        double sum = 0;
        for (double w : weights) {
            if (!(w >= 0)) throw config_error("CodeBLEU weights must be non-negative");
            sum += w;
        }
        if (std::abs(sum - 1.0) > 1e-9) throw config_error("CodeBLEU weights must sum to 1");
        if (max_order < 1) throw config_error("max n-gram order must be at least 1");
        if (!(keyword_weight >= 0) || !(token_weight >= 0)) throw config_error("token weights must be non-negative");
        if (!(epsilon > 0)) throw config_error("smoothing epsilon must be positive");
    }

    /// Short stable description, stored next to golden values.
    std::string fingerprint() const {
        std::ostringstream os;
        os << "w=" << weights[0] << ',' << weights[1] << ',' << weights[2] << ',' << weights[3] << ";n=" << max_order
           << ";kw=" << keyword_weight << '/' << token_weight << ";eps=" << epsilon << ";reweigh=" << auto_reweigh
           << ";tok=" << (tokenizer == TokenizerMode::lexer ? "lexer" : "whitespace")
           << ";wbp="
           << (weighted_brevity == WeightedBrevity::standard   ? "standard"
               : weighted_brevity == WeightedBrevity::reference ? "reference"
                                                                 : "capped")
           << ";floor=" << floor_weighted_denominator;
        return os.str();
    }
};

/// Parses "a,b,c,d".
inline std::array<double, 4> parse_weights(std::string_view text) {
    std::array<double, 4> w{};
    std::size_t k = 0, pos = 0;
    bool more = true;
    while (k < 4 && more) {
        const auto comma = text.find(',', pos);
        const std::string part(text.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
        try {
            std::size_t used = 0;
            w[k++] = std::stod(part, &used);
            if (used != part.size()) throw std::invalid_argument(part);
        } catch (const std::exception&) {
            throw config_error("bad weight list '" + std::string(text) + "'");
        }
        more = comma != std::string_view::npos;
        pos = comma + 1;
    }
    if (k != 4 || more) throw config_error("expected four weights, got '" + std::string(text) + "'");
    return w;
}

struct CodeBleuComponents {
    double ngram = 0;
    double weighted_ngram = 0;
    double ast_match = 0;
    double dataflow_match = 0;

    bool operator==(const CodeBleuComponents&) const = default;
};

struct CodeBleuResult {
    double score = 0;
    CodeBleuComponents components;
    bool parse_fallback = false;
};

struct MetricReport {
    std::string instance_id;
    bool em = false;
    bool sc = false;
    double codebleu = 0;
    CodeBleuComponents components;
    bool parse_fallback = false;
    std::optional<std::uint64_t> seed;
};

namespace detail {

inline std::string normalize_for_em(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '\r' && i + 1 < s.size() && s[i + 1] == '\n') continue;
        out += s[i];
    }
    const auto ws = " \t\n\r\f\v";
    const auto b = out.find_first_not_of(ws);
    if (b == std::string::npos) return {};
    const auto e = out.find_last_not_of(ws);
    return out.substr(b, e - b + 1);
}

inline std::vector<std::string> split_ws(std::string_view s) {
    std::vector<std::string> out;
    std::istringstream is{std::string(s)};
    std::string tok;
    while (is >> tok) out.push_back(tok);
    return out;
}

// Comments, plus Python docstrings (statement-level string expressions),
// which the reference scorer also drops before its structural terms.
inline SyntaxTree strip_for_scoring(const SyntaxTree& t) {
    const bool py = t.language == LanguageId::python;
    return strip_nodes(t, [py](const SyntaxTree& s, std::uint32_t i) {
        const auto& n = s.nodes[i];
        if (is_comment_kind(n.kind)) return true;
        if (!py || n.kind != "expression_statement") return false;
        std::size_t named = 0;
        bool only_string = true;
        for (auto c : n.children) {
            if (!s.nodes[c].named || is_comment_kind(s.nodes[c].kind)) continue;
            ++named;
            if (s.nodes[c].kind != "string" && s.nodes[c].kind != "concatenated_string") only_string = false;
        }
        return named == 1 && only_string;
    });
}

inline std::vector<std::string> scoring_tokens(const SyntaxTree& stripped, std::string_view text, TokenizerMode mode) {
    if (mode == TokenizerMode::whitespace) return split_ws(text);
    std::vector<std::string> out;
    for (auto& t : code_tokens(stripped)) {
        if (!t.text.empty()) out.push_back(std::move(t.text));
    }
    return out;
}

struct Prepared {
    SyntaxTree tree;     // snippet parse, comments kept
    SyntaxTree stripped; // comments and docstrings removed
    std::string text;    // trimmed, LF line endings
};

inline Prepared prepare(std::string_view code, LanguageId lang) {
    Prepared p;
    p.text = normalize_for_em(code);
    p.tree = parse_snippet(p.text, lang);
    p.stripped = strip_for_scoring(p.tree);
    return p;
}

inline double ast_match(const SyntaxTree& pred, const SyntaxTree& ref) {
    const auto ref_sigs = subtree_signatures(ref);
    if (ref_sigs.empty()) return trees_equal(pred, ref) ? 1.0 : 0.0;
    const auto cand = subtree_signatures(pred);
    const std::unordered_set<std::string> cand_set(cand.begin(), cand.end());
    std::size_t hit = 0;
    for (const auto& s : ref_sigs) hit += cand_set.count(s);
    return static_cast<double>(hit) / static_cast<double>(ref_sigs.size());
}

inline double dataflow_match(const SyntaxTree& pred, const SyntaxTree& ref, LanguageId lang) {
    const auto ref_flow = normalize_dataflow(extract_dataflow(ref, lang));
    if (ref_flow.empty()) return 1.0;
    auto cand_flow = normalize_dataflow(extract_dataflow(pred, lang));
    std::size_t hit = 0;
    for (const auto& f : ref_flow) {
        auto it = std::find(cand_flow.begin(), cand_flow.end(), f);
        if (it != cand_flow.end()) {
            ++hit;
            cand_flow.erase(it);
        }
    }
    return static_cast<double>(hit) / static_cast<double>(ref_flow.size());
}

inline CodeBleuResult codebleu_prepared(const Prepared& pred, const Prepared& ref, LanguageId lang, const CodeBleuConfig& cfg) {
    CodeBleuResult r;
    r.parse_fallback = pred.tree.has_errors() || ref.tree.has_errors();
    if (pred.text.empty()) return r;

    const auto hyp_toks = scoring_tokens(pred.stripped, pred.text, cfg.tokenizer);
    const auto ref_toks = scoring_tokens(ref.stripped, ref.text, cfg.tokenizer);
    const BleuOptions bo{cfg.max_order, cfg.epsilon, cfg.auto_reweigh, cfg.floor_weighted_denominator};
    const auto kw = keywords(lang);
    auto weight = [&](std::string_view tok) {
        return std::find(kw.begin(), kw.end(), tok) != kw.end() ? cfg.keyword_weight : cfg.token_weight;
    };
    auto& c = r.components;
    if (hyp_toks.empty() && ref_toks.empty()) {
        c.ngram = c.weighted_ngram = 1.0; // e.g. both sides are only a comment
    } else {
        c.ngram = sentence_bleu(hyp_toks, ref_toks, bo);
        c.weighted_ngram = weighted_ngram_score(hyp_toks, ref_toks, weight, bo, cfg.weighted_brevity);
    }
    // Parse errors keep the error-recovered trees: the structural terms are
    // then scored on whatever tree-sitter salvaged, and the report is flagged.
    c.ast_match = ast_match(pred.stripped, ref.stripped);
    c.dataflow_match = dataflow_match(pred.stripped, ref.stripped, lang);
    const auto& w = cfg.weights;
    r.score = w[0] * c.ngram + w[1] * c.weighted_ngram + w[2] * c.ast_match + w[3] * c.dataflow_match;
    r.score = std::clamp(r.score, 0.0, 1.0);
    return r;
}

} // namespace detail

/// Equality after CRLF -> LF and trimming the whole string. Inner
/// whitespace counts.
inline bool exact_match(std::string_view prediction, std::string_view reference) {
    return detail::normalize_for_em(prediction) == detail::normalize_for_em(reference);
}

struct SyntacticMatch {
    bool match = false;
    bool fallback = false; // a side failed to parse, so exact_match decided
};

inline SyntacticMatch syntactic_match_detail(std::string_view prediction, std::string_view reference, LanguageId lang) {
    const auto a = parse_snippet(detail::normalize_for_em(prediction), lang);
    const auto b = parse_snippet(detail::normalize_for_em(reference), lang);
    if (a.has_errors() || b.has_errors()) return {exact_match(prediction, reference), true};
    return {trees_equal(a, b), false};
}

inline bool syntactic_match(std::string_view prediction, std::string_view reference, LanguageId lang) {
    return syntactic_match_detail(prediction, reference, lang).match;
}

inline CodeBleuResult codebleu(std::string_view prediction, std::string_view reference, LanguageId lang,
                               const CodeBleuConfig& config = {}) {
    config.validate();
    return detail::codebleu_prepared(detail::prepare(prediction, lang), detail::prepare(reference, lang), lang, config);
}

/// All three metrics for one instance, parsing each side once. An empty
/// prediction scores zero everywhere.
inline MetricReport evaluate(const std::string& instance_id, std::string_view prediction, std::string_view reference,
                             LanguageId lang, const CodeBleuConfig& config = {}) {
    config.validate();
    MetricReport r;
    r.instance_id = instance_id;
    const auto pred = detail::prepare(prediction, lang);
    if (pred.text.empty()) {
        r.parse_fallback = false;
        return r;
    }
    const auto ref = detail::prepare(reference, lang);
    r.em = exact_match(prediction, reference);
    if (pred.tree.has_errors() || ref.tree.has_errors()) {
        r.sc = r.em;
        r.parse_fallback = true;
    } else {
        r.sc = trees_equal(pred.tree, ref.tree);
    }
    const auto cb = detail::codebleu_prepared(pred, ref, lang, config);
    r.codebleu = cb.score;
    r.components = cb.components;
    r.parse_fallback = r.parse_fallback || cb.parse_fallback;
    return r;
}

struct EvalItem {
    std::string id;
    LanguageId language = LanguageId::java;
    std::string prediction;
    std::string reference;
};

/// Evaluates items on up to `threads` workers; output order follows input.
inline std::vector<MetricReport> evaluate_all(const std::vector<EvalItem>& items, const CodeBleuConfig& config = {},
                                              unsigned threads = 0) {
    config.validate();
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(1, items.size())));
    std::vector<MetricReport> out(items.size());
    std::vector<std::future<void>> jobs;
    for (unsigned w = 0; w < threads; ++w) {
        jobs.push_back(std::async(std::launch::async, [&, w] {
            for (std::size_t i = w; i < items.size(); i += threads) {
                const auto& it = items[i];
                out[i] = evaluate(it.id, it.prediction, it.reference, it.language, config);
            }
        }));
    }
    for (auto& j : jobs) j.get();
    return out;
}

// ---------------------------------------------------------------------------
// Aggregation

enum class MetricMode { rate, count };

inline std::string_view to_string(MetricMode m) noexcept { return m == MetricMode::rate ? "rate" : "count"; }

inline MetricMode parse_metric_mode(std::string_view s) {
    if (s == "rate") return MetricMode::rate;
    if (s == "count") return MetricMode::count;
    throw config_error("unknown metric mode '" + std::string(s) + "'");
}

/// EM and SC are percentages in rate mode and raw counts in count mode;
/// codebleu is always the mean score times 100.
struct MetricSummary {
    std::size_t n = 0;
    std::size_t em_count = 0;
    std::size_t sc_count = 0;
    std::size_t fallback_count = 0;
    double em = 0;
    double sc = 0;
    double codebleu = 0;
};

struct AggregateSummary {
    MetricMode mode = MetricMode::rate;
    MetricSummary overall;
    std::map<std::uint64_t, MetricSummary> per_seed;
    std::optional<MetricSummary> cross_seed; // arithmetic mean of per_seed values
};

inline MetricSummary summarize(const std::vector<MetricReport>& reports, MetricMode mode) {
    if (reports.empty()) throw aggregation_error("cannot aggregate an empty report list");
    MetricSummary s;
    s.n = reports.size();
    double cb = 0;
    for (const auto& r : reports) {
        s.em_count += r.em;
        s.sc_count += r.sc;
        s.fallback_count += r.parse_fallback;
        cb += r.codebleu;
    }
    const double n = static_cast<double>(s.n);
    s.codebleu = cb / n * 100.0;
    if (mode == MetricMode::rate) {
        s.em = static_cast<double>(s.em_count) / n * 100.0;
        s.sc = static_cast<double>(s.sc_count) / n * 100.0;
    } else {
        s.em = static_cast<double>(s.em_count);
        s.sc = static_cast<double>(s.sc_count);
    }
    return s;
}

/// Mean of per-seed summaries, field by field.
inline MetricSummary average_summaries(const std::vector<MetricSummary>& per_seed) {
    if (per_seed.empty()) throw aggregation_error("no per-seed summaries to average");
    MetricSummary m;
    for (const auto& s : per_seed) {
        m.n += s.n;
        m.em_count += s.em_count;
        m.sc_count += s.sc_count;
        m.fallback_count += s.fallback_count;
        m.em += s.em;
        m.sc += s.sc;
        m.codebleu += s.codebleu;
    }
    const double k = static_cast<double>(per_seed.size());
    m.em /= k;
    m.sc /= k;
    m.codebleu /= k;
    return m;
}

inline AggregateSummary aggregate(const std::vector<MetricReport>& reports, MetricMode mode) {
    AggregateSummary a;
    a.mode = mode;
    a.overall = summarize(reports, mode);
    std::map<std::uint64_t, std::vector<MetricReport>> by_seed;
    for (const auto& r : reports) {
        if (r.seed) by_seed[*r.seed].push_back(r);
    }
    if (by_seed.empty()) return a;
    if (std::any_of(reports.begin(), reports.end(), [](const auto& r) { return !r.seed; })) {
        throw aggregation_error("reports mix seeded and unseeded entries");
    }
    std::vector<MetricSummary> seeds;
    for (const auto& [seed, rs] : by_seed) {
        a.per_seed[seed] = summarize(rs, mode);
        seeds.push_back(a.per_seed[seed]);
    }
    a.cross_seed = average_summaries(seeds);
    return a;
}

// ---------------------------------------------------------------------------
// JSON

inline void to_json(json& j, const CodeBleuComponents& c) {
    j = json{{"ngram", c.ngram}, {"weighted_ngram", c.weighted_ngram}, {"ast_match", c.ast_match}, {"dataflow_match", c.dataflow_match}};
}

inline void from_json(const json& j, CodeBleuComponents& c) {
    c.ngram = j.at("ngram").get<double>();
    c.weighted_ngram = j.at("weighted_ngram").get<double>();
    c.ast_match = j.at("ast_match").get<double>();
    c.dataflow_match = j.at("dataflow_match").get<double>();
}

inline void to_json(json& j, const MetricReport& r) {
    j = json{{"id", r.instance_id}, {"em", r.em}, {"sc", r.sc}, {"codebleu", r.codebleu},
             {"components", r.components}, {"parse_fallback", r.parse_fallback}};
    if (r.seed) j["seed"] = *r.seed;
}

inline void from_json(const json& j, MetricReport& r) {
    r.instance_id = j.at("id").get<std::string>();
    r.em = j.at("em").get<bool>();
    r.sc = j.at("sc").get<bool>();
    r.codebleu = j.at("codebleu").get<double>();
    r.components = j.at("components").get<CodeBleuComponents>();
    r.parse_fallback = j.value("parse_fallback", false);
    if (j.contains("seed")) r.seed = j.at("seed").get<std::uint64_t>();
}

inline void to_json(json& j, const MetricSummary& s) {
    j = json{{"n", s.n}, {"em_count", s.em_count}, {"sc_count", s.sc_count}, {"parse_fallback_count", s.fallback_count},
             {"em", s.em}, {"sc", s.sc}, {"codebleu", s.codebleu}};
}

inline void from_json(const json& j, MetricSummary& s) {
    s.n = j.at("n").get<std::size_t>();
    s.em_count = j.at("em_count").get<std::size_t>();
    s.sc_count = j.at("sc_count").get<std::size_t>();
    s.fallback_count = j.value("parse_fallback_count", std::size_t{0});
    s.em = j.at("em").get<double>();
    s.sc = j.at("sc").get<double>();
    s.codebleu = j.at("codebleu").get<double>();
}

inline void to_json(json& j, const AggregateSummary& a) {
    j = json{{"mode", to_string(a.mode)}, {"overall", a.overall}};
    if (!a.per_seed.empty()) {
        json ps = json::object();
        for (const auto& [seed, s] : a.per_seed) ps[std::to_string(seed)] = s;
        j["per_seed"] = ps;
    }
    if (a.cross_seed) j["cross_seed"] = *a.cross_seed;
}

} // namespace patchbench
