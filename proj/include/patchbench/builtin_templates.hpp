#pragma once

// The seven basic prompts (hard, soft with word init, soft with random init)
// and the knowledge prompts, one hard and one soft per knowledge kind plus
// the paired-knowledge variants.

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "error.hpp"
#include "template.hpp"

namespace patchbench {

enum class TemplateSet { bp, kp };

namespace detail {

// A basic prompt written as pieces: "X", "M", or prompt words.
struct BasicLayout {
    std::vector<std::string_view> pieces;
};

inline const std::vector<BasicLayout>& basic_layouts() {
    static const std::vector<BasicLayout> layouts{
        {{"X", "M", "is fixed program"}},
        {{"X", "fixed program is", "M"}},
        {{"Fix bug in", "X", "M"}},
        {{"Fix", "X", "fixed program is", "M"}},
        {{"Fix", "X", "M", "is fixed program"}},
        {{"X", "is buggy program", "M", "is fixed program"}},
        {{"Fix", "X", "is buggy program", "M", "is fixed program"}},
    };
    return layouts;
}

inline std::vector<std::string> split_words(std::string_view s) {
    std::vector<std::string> words;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && s[i] == ' ') ++i;
        const auto start = i;
        while (i < s.size() && s[i] != ' ') ++i;
        if (i > start) words.emplace_back(s.substr(start, i - start));
    }
    return words;
}

enum class SoftMode { hard, soft_init, soft_random };

// Turns a piece list into DSL. Word pieces become literal text (hard) or one
// soft token per word.
inline std::string layout_dsl(const std::vector<std::string>& pieces, SoftMode mode) {
    std::string out;
    for (const auto& p : pieces) {
        if (!out.empty()) out += ' ';
        if (p == "X") {
            out += "{X}";
        } else if (p == "M") {
            out += "{MASK}";
        } else if (p.rfind("K:", 0) == 0) {
            out += "{" + p + "}";
        } else if (mode == SoftMode::hard) {
            out += p;
        } else {
            const auto words = split_words(p);
            if (mode == SoftMode::soft_random) {
                out += words.size() == 1 ? std::string("{SOFT}") : "{SOFT*" + std::to_string(words.size()) + "}";
            } else {
                for (std::size_t i = 0; i < words.size(); ++i) {
                    if (i) out += ' ';
                    out += "{SOFT:\"" + words[i] + "\"}";
                }
            }
        }
    }
    return out;
}

inline std::string_view knowledge_phrase(KnowledgeKind kind) {
    switch (kind) {
    case KnowledgeKind::bug_type: return "the bug type is";
    case KnowledgeKind::repair_action: return "by taking repair actions";
    case KnowledgeKind::repair_pattern: return "by following repair patterns";
    case KnowledgeKind::buggy_node_ast: return "the AST of buggy nodes is";
    case KnowledgeKind::error_message: return "the error message is";
    case KnowledgeKind::algorithm_tags: return "the algorithm tags are";
    }
    return "";
}

inline const std::vector<std::vector<KnowledgeKind>>& knowledge_combos() {
    using K = KnowledgeKind;
    static const std::vector<std::vector<KnowledgeKind>> combos{
        {K::bug_type},
        {K::repair_action},
        {K::repair_pattern},
        {K::buggy_node_ast},
        {K::error_message},
        {K::algorithm_tags},
        {K::repair_action, K::repair_pattern},
        {K::bug_type, K::buggy_node_ast},
        {K::bug_type, K::error_message},
        {K::algorithm_tags, K::error_message},
    };
    return combos;
}

inline PromptTemplate make_template(const std::string& dsl, const std::string& id, TemplateKind kind, ModelStyle style) {
    auto t = parse_template(dsl);
    t.id = id;
    t.model_style = style;
    if (t.kind != kind) throw template_parse_error(id, "builtin kind mismatch");
    return t;
}

} // namespace detail

/// Id of a knowledge prompt, e.g. "KP-bug_type+error_message-soft".
inline std::string knowledge_template_id(const std::vector<KnowledgeKind>& kinds, bool soft) {
    std::string id = "KP-";
    for (std::size_t i = 0; i < kinds.size(); ++i) {
        if (i) id += '+';
        id += to_string(kinds[i]);
    }
    return id + (soft ? "-soft" : "-hard");
}

/// bp: HBP1..7, SBP1..7-init, SBP1..7-rand (21 templates, same content for
/// either style). kp: for every knowledge combination a hard and a soft
/// template; infilling puts the mask inside, generative puts it last.
inline std::vector<PromptTemplate> builtin_templates(TemplateSet set, ModelStyle style) {
    using detail::SoftMode;
    std::vector<PromptTemplate> out;
    if (set == TemplateSet::bp) {
        const auto& layouts = detail::basic_layouts();
        const std::pair<SoftMode, TemplateKind> variants[] = {
            {SoftMode::hard, TemplateKind::hbp},
            {SoftMode::soft_init, TemplateKind::sbp_initialized},
            {SoftMode::soft_random, TemplateKind::sbp_random},
        };
        for (const auto& [mode, kind] : variants) {
            for (std::size_t i = 0; i < layouts.size(); ++i) {
                const std::vector<std::string> pieces(layouts[i].pieces.begin(), layouts[i].pieces.end());
                const auto n = std::to_string(i + 1);
                const std::string id = mode == SoftMode::hard        ? "HBP" + n
                                       : mode == SoftMode::soft_init ? "SBP" + n + "-init"
                                                                     : "SBP" + n + "-rand";
                out.push_back(detail::make_template(detail::layout_dsl(pieces, mode), id, kind, style));
            }
        }
        return out;
    }
    for (const bool soft : {false, true}) {
        for (const auto& kinds : detail::knowledge_combos()) {
            std::vector<std::string> pieces{"Please fix a buggy program", "X"};
            for (std::size_t i = 0; i < kinds.size(); ++i) {
                if (i) pieces.emplace_back("and");
                pieces.emplace_back(detail::knowledge_phrase(kinds[i]));
                pieces.push_back("K:" + std::string(to_string(kinds[i])));
            }
            if (style == ModelStyle::infilling) {
                pieces.emplace_back("M");
                pieces.emplace_back("is the fixed version");
            } else {
                pieces.emplace_back("the fixed version is");
                pieces.emplace_back("M");
            }
            const auto dsl = detail::layout_dsl(pieces, soft ? SoftMode::soft_init : SoftMode::hard);
            out.push_back(detail::make_template(dsl, knowledge_template_id(kinds, soft),
                                                soft ? TemplateKind::kp_soft : TemplateKind::kp_hard, style));
        }
    }
    return out;
}

/// The plain "{X} {MASK}" layout used when fine-tuning without prompts.
inline PromptTemplate plain_template() {
    auto t = parse_template("{X} {MASK}");
    t.id = "FT";
    return t;
}

/// Every builtin for the style, plus the plain fine-tune layout.
inline std::vector<PromptTemplate> all_builtin_templates(ModelStyle style) {
    auto out = builtin_templates(TemplateSet::bp, style);
    auto kp = builtin_templates(TemplateSet::kp, style);
    out.insert(out.end(), kp.begin(), kp.end());
    out.push_back(plain_template());
    out.back().model_style = style;
    return out;
}

inline std::optional<PromptTemplate> find_builtin(const std::string& id, ModelStyle style) {
    for (auto& t : all_builtin_templates(style)) {
        if (t.id == id) return t;
    }
    return std::nullopt;
}

} // namespace patchbench
