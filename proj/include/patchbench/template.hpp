#pragma once

// Prompt templates: a small DSL, validation, and per-instance compilation.
//
// DSL tokens
//   {X}              the buggy program
//   {MASK}           where the model writes the fix
//   {SOFT}           one trainable token, random init
//   {SOFT*n}         n of them
//   {SOFT:"word"}    one trainable token initialised from "word"
//   {K:kind}         a knowledge slot (snake_case or camelCase kind name)
//   {{ and }}        literal braces
// Text between tokens is literal. Text made only of whitespace is a token
// separator and is dropped, so "{X} {MASK}" has no literal segment.
//
// An optional first line "#kind=<kind> style=<style> id=<id>" declares the
// template's metadata; without it the kind is inferred from the segments.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "instance.hpp"

namespace patchbench {

enum class TemplateKind { hbp, sbp_initialized, sbp_random, kp_hard, kp_soft };
enum class ModelStyle { infilling, generative };

constexpr std::string_view to_string(TemplateKind k) noexcept {
    switch (k) {
    case TemplateKind::hbp: return "hbp";
    case TemplateKind::sbp_initialized: return "sbp_initialized";
    case TemplateKind::sbp_random: return "sbp_random";
    case TemplateKind::kp_hard: return "kp_hard";
    case TemplateKind::kp_soft: return "kp_soft";
    }
    return "?";
}

constexpr std::string_view to_string(ModelStyle s) noexcept {
    return s == ModelStyle::infilling ? "infilling" : "generative";
}

inline std::optional<TemplateKind> parse_template_kind(std::string_view s) {
    for (auto k : {TemplateKind::hbp, TemplateKind::sbp_initialized, TemplateKind::sbp_random, TemplateKind::kp_hard,
                   TemplateKind::kp_soft}) {
        if (to_string(k) == s) return k;
    }
    return std::nullopt;
}

inline std::optional<ModelStyle> parse_model_style(std::string_view s) {
    if (s == "infilling") return ModelStyle::infilling;
    if (s == "generative") return ModelStyle::generative;
    return std::nullopt;
}

struct Literal {
    std::string text;
    bool operator==(const Literal&) const = default;
};
struct InputSlot {
    bool operator==(const InputSlot&) const = default;
};
struct MaskSlot {
    bool operator==(const MaskSlot&) const = default;
};
struct SoftSlot {
    std::size_t index = 0;
    std::optional<std::string> init;
    bool operator==(const SoftSlot&) const = default;
};
struct KnowledgeSlot {
    KnowledgeKind kind;
    bool operator==(const KnowledgeSlot&) const = default;
};

using Segment = std::variant<Literal, InputSlot, MaskSlot, SoftSlot, KnowledgeSlot>;

struct PromptTemplate {
    std::string id;
    std::vector<Segment> segments;
    TemplateKind kind = TemplateKind::hbp;
    ModelStyle model_style = ModelStyle::infilling;

    bool operator==(const PromptTemplate&) const = default;

    std::size_t soft_count() const {
        std::size_t n = 0;
        for (const auto& s : segments) n += std::holds_alternative<SoftSlot>(s);
        return n;
    }
};

namespace detail {

inline std::string kind_mismatch(TemplateKind k, const std::string& why) {
    return "template declared as " + std::string(to_string(k)) + " " + why;
}

/// Checks the structural invariants. `token_of` names the offending token.
inline void check_template(const PromptTemplate& t, const std::vector<std::string>& token_of) {
    auto tok = [&](std::size_t i) { return i < token_of.size() ? token_of[i] : std::string("?"); };
    std::optional<std::size_t> input, mask;
    std::size_t soft_seen = 0;
    bool has_knowledge = false;
    for (std::size_t i = 0; i < t.segments.size(); ++i) {
        const auto& seg = t.segments[i];
        if (const auto* lit = std::get_if<Literal>(&seg)) {
            if (lit->text.empty()) throw template_parse_error(tok(i), "empty literal segment");
        } else if (std::holds_alternative<InputSlot>(seg)) {
            if (input) throw template_parse_error(tok(i), "duplicate input slot");
            input = i;
        } else if (std::holds_alternative<MaskSlot>(seg)) {
            if (mask) throw template_parse_error(tok(i), "duplicate mask");
            mask = i;
        } else if (const auto* soft = std::get_if<SoftSlot>(&seg)) {
            if (soft->index != soft_seen) throw template_parse_error(tok(i), "soft indices must run 0..S-1 in order");
            ++soft_seen;
            const bool hard_kind = t.kind == TemplateKind::hbp || t.kind == TemplateKind::kp_hard;
            if (hard_kind) throw template_parse_error(tok(i), kind_mismatch(t.kind, "cannot hold soft tokens"));
            if (t.kind == TemplateKind::sbp_random && soft->init) {
                throw template_parse_error(tok(i), kind_mismatch(t.kind, "cannot initialise soft tokens"));
            }
            if (t.kind == TemplateKind::sbp_initialized && !soft->init) {
                throw template_parse_error(tok(i), kind_mismatch(t.kind, "needs an init word on every soft token"));
            }
        } else if (std::holds_alternative<KnowledgeSlot>(seg)) {
            has_knowledge = true;
            const bool kp = t.kind == TemplateKind::kp_hard || t.kind == TemplateKind::kp_soft;
            if (!kp) throw template_parse_error(tok(i), kind_mismatch(t.kind, "cannot hold knowledge slots"));
        }
    }
    if (!input) throw template_parse_error("{X}", "template has no input slot");
    if (!mask) throw template_parse_error("{MASK}", "template has no mask");
    if ((t.kind == TemplateKind::kp_hard || t.kind == TemplateKind::kp_soft) && !has_knowledge) {
        throw template_parse_error("{K:...}", kind_mismatch(t.kind, "needs at least one knowledge slot"));
    }
}

inline TemplateKind infer_kind(const std::vector<Segment>& segs, const std::vector<std::string>& token_of) {
    bool knowledge = false, with_init = false, without_init = false;
    std::size_t first_init = 0, first_plain = 0;
    for (std::size_t i = 0; i < segs.size(); ++i) {
        if (std::holds_alternative<KnowledgeSlot>(segs[i])) knowledge = true;
        if (const auto* s = std::get_if<SoftSlot>(&segs[i])) {
            if (s->init) {
                if (!with_init) first_init = i;
                with_init = true;
            } else {
                if (!without_init) first_plain = i;
                without_init = true;
            }
        }
    }
    if (knowledge) return (with_init || without_init) ? TemplateKind::kp_soft : TemplateKind::kp_hard;
    if (with_init && without_init) {
        const auto i = std::max(first_init, first_plain);
        throw template_parse_error(i < token_of.size() ? token_of[i] : "{SOFT}",
                                   "cannot mix initialised and random soft tokens in a basic prompt");
    }
    if (with_init) return TemplateKind::sbp_initialized;
    if (without_init) return TemplateKind::sbp_random;
    return TemplateKind::hbp;
}

inline bool is_blank(std::string_view s) {
    for (unsigned char c : s) {
        if (!std::isspace(c)) return false;
    }
    return true;
}

inline std::string_view trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

} // namespace detail

/// Parses a template. The optional header sets id, style and kind; a
/// declared kind is checked against the segments.
inline PromptTemplate parse_template(std::string_view text) {
    PromptTemplate t;
    std::optional<TemplateKind> declared;
    if (!text.empty() && text.front() == '#') {
        const auto nl = text.find('\n');
        std::string header(text.substr(1, nl == std::string_view::npos ? std::string_view::npos : nl - 1));
        if (!header.empty() && header.back() == '\r') header.pop_back();
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        std::istringstream hs(header);
        std::string field;
        while (hs >> field) {
            const auto eq = field.find('=');
            if (eq == std::string::npos) throw template_parse_error(field, "header fields look like key=value");
            const auto key = field.substr(0, eq);
            const auto value = field.substr(eq + 1);
            if (key == "kind") {
                declared = parse_template_kind(value);
                if (!declared) throw template_parse_error(field, "unknown template kind");
            } else if (key == "style") {
                auto s = parse_model_style(value);
                if (!s) throw template_parse_error(field, "unknown model style");
                t.model_style = *s;
            } else if (key == "id") {
                t.id = value;
            } else {
                throw template_parse_error(field, "unknown header key");
            }
        }
    }
    while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.remove_suffix(1);

    std::vector<std::string> token_of; // source token for each segment, for error messages
    std::string pending;
    auto flush = [&] {
        if (!pending.empty() && !detail::is_blank(pending)) {
            t.segments.push_back(Literal{pending});
            token_of.push_back(pending);
        }
        pending.clear();
    };
    std::size_t soft_index = 0;
    std::size_t i = 0;
    while (i < text.size()) {
        const char c = text[i];
        if (c == '{' && i + 1 < text.size() && text[i + 1] == '{') {
            pending += '{';
            i += 2;
            continue;
        }
        if (c == '}' && i + 1 < text.size() && text[i + 1] == '}') {
            pending += '}';
            i += 2;
            continue;
        }
        if (c == '}') throw template_parse_error("}", "unbalanced '}' (write '}}' for a literal brace)");
        if (c != '{') {
            pending += c;
            ++i;
            continue;
        }
        // scan to the matching '}' honouring a quoted init word
        std::size_t j = i + 1;
        bool quoted = false;
        while (j < text.size()) {
            if (quoted && text[j] == '\\' && j + 1 < text.size()) {
                j += 2;
                continue;
            }
            if (text[j] == '"') quoted = !quoted;
            if (!quoted && text[j] == '}') break;
            ++j;
        }
        if (j >= text.size()) throw template_parse_error(std::string(text.substr(i)), "unterminated token");
        const std::string token(text.substr(i, j - i + 1));
        const std::string_view body = text.substr(i + 1, j - i - 1);
        flush();
        if (body == "X") {
            t.segments.push_back(InputSlot{});
            token_of.push_back(token);
        } else if (body == "MASK") {
            t.segments.push_back(MaskSlot{});
            token_of.push_back(token);
        } else if (body == "SOFT") {
            t.segments.push_back(SoftSlot{soft_index++, std::nullopt});
            token_of.push_back(token);
        } else if (body.substr(0, 5) == "SOFT*") {
            const auto num = body.substr(5);
            std::size_t n = 0;
            if (num.empty() || num.size() > 6) throw template_parse_error(token, "bad soft repeat count");
            for (char d : num) {
                if (d < '0' || d > '9') throw template_parse_error(token, "bad soft repeat count");
                n = n * 10 + static_cast<std::size_t>(d - '0');
            }
            if (n == 0) throw template_parse_error(token, "soft repeat count must be positive");
            for (std::size_t k = 0; k < n; ++k) {
                t.segments.push_back(SoftSlot{soft_index++, std::nullopt});
                token_of.push_back(token);
            }
        } else if (body.substr(0, 5) == "SOFT:") {
            const auto q = body.substr(5);
            if (q.size() < 2 || q.front() != '"' || q.back() != '"') {
                throw template_parse_error(token, "soft init must be a quoted word");
            }
            std::string word;
            for (std::size_t k = 1; k + 1 < q.size(); ++k) {
                if (q[k] == '\\' && k + 2 < q.size()) ++k;
                word += q[k];
            }
            if (word.empty()) throw template_parse_error(token, "soft init word is empty");
            t.segments.push_back(SoftSlot{soft_index++, word});
            token_of.push_back(token);
        } else if (body.substr(0, 2) == "K:") {
            auto kind = parse_knowledge_kind(body.substr(2));
            if (!kind) throw template_parse_error(token, "unknown knowledge kind");
            t.segments.push_back(KnowledgeSlot{*kind});
            token_of.push_back(token);
        } else {
            throw template_parse_error(token, "unknown token");
        }
        i = j + 1;
    }
    flush();

    t.kind = declared ? *declared : detail::infer_kind(t.segments, token_of);
    detail::check_template(t, token_of);
    return t;
}

/// Serialises a template back to the DSL (with header when `with_header`).
/// parse_template(to_dsl(t)) == t for every valid template.
inline std::string to_dsl(const PromptTemplate& t, bool with_header = false) {
    std::string out;
    if (with_header) {
        out += "#kind=" + std::string(to_string(t.kind)) + " style=" + std::string(to_string(t.model_style));
        if (!t.id.empty()) out += " id=" + t.id;
        out += '\n';
    }
    auto escape = [](const std::string& s) {
        std::string r;
        for (char c : s) {
            if (c == '{' || c == '}') r += c;
            r += c;
        }
        return r;
    };
    bool prev_token = false;
    for (std::size_t i = 0; i < t.segments.size(); ++i) {
        const auto& seg = t.segments[i];
        if (const auto* lit = std::get_if<Literal>(&seg)) {
            out += escape(lit->text);
            prev_token = false;
            continue;
        }
        if (prev_token) out += ' ';
        prev_token = true;
        if (std::holds_alternative<InputSlot>(seg)) {
            out += "{X}";
        } else if (std::holds_alternative<MaskSlot>(seg)) {
            out += "{MASK}";
        } else if (const auto* k = std::get_if<KnowledgeSlot>(&seg)) {
            out += "{K:" + std::string(to_string(k->kind)) + "}";
        } else if (const auto* s = std::get_if<SoftSlot>(&seg)) {
            if (s->init) {
                std::string w;
                for (char c : *s->init) {
                    if (c == '"' || c == '\\') w += '\\';
                    w += c;
                }
                out += "{SOFT:\"" + w + "\"}";
            } else {
                std::size_t run = 1;
                while (i + run < t.segments.size()) {
                    const auto* nx = std::get_if<SoftSlot>(&t.segments[i + run]);
                    if (!nx || nx->init) break;
                    ++run;
                }
                out += run == 1 ? std::string("{SOFT}") : "{SOFT*" + std::to_string(run) + "}";
                i += run - 1;
            }
        }
    }
    return out;
}

/// Tabular notation: "[X] [mask] [SOFT] * 3", "[bugType]", literals trimmed.
inline std::string render_table(const PromptTemplate& t) {
    std::vector<std::string> parts;
    for (std::size_t i = 0; i < t.segments.size(); ++i) {
        const auto& seg = t.segments[i];
        if (const auto* lit = std::get_if<Literal>(&seg)) {
            const auto s = detail::trim(lit->text);
            if (!s.empty()) parts.emplace_back(s);
        } else if (std::holds_alternative<InputSlot>(seg)) {
            parts.emplace_back("[X]");
        } else if (std::holds_alternative<MaskSlot>(seg)) {
            parts.emplace_back("[mask]");
        } else if (const auto* k = std::get_if<KnowledgeSlot>(&seg)) {
            parts.push_back("[" + std::string(slot_name(k->kind)) + "]");
        } else {
            std::size_t run = 1;
            while (i + run < t.segments.size() && std::holds_alternative<SoftSlot>(t.segments[i + run])) ++run;
            parts.emplace_back(run == 1 ? std::string("[SOFT]") : "[SOFT] * " + std::to_string(run));
            i += run - 1;
        }
    }
    std::string out;
    for (const auto& p : parts) {
        if (!out.empty()) out += ' ';
        out += p;
    }
    return out;
}

/// Warnings about how the template suits a model style. Generative models
/// only see what precedes the mask, so a non-final mask is flagged.
inline std::vector<std::string> validate_for_style(const PromptTemplate& t, ModelStyle style) {
    std::vector<std::string> warnings;
    if (style != ModelStyle::generative) return warnings;
    for (std::size_t i = 0; i < t.segments.size(); ++i) {
        if (std::holds_alternative<MaskSlot>(t.segments[i]) && i + 1 != t.segments.size()) {
            warnings.push_back("template '" + t.id + "': mask is not the last segment; a generative model never sees the " +
                               std::to_string(t.segments.size() - i - 1) + " segment(s) after it");
        }
    }
    return warnings;
}

// ---------------------------------------------------------------------------
// Compiled prompts

enum class LiteralOrigin { template_text, input, knowledge };
enum class MaskPosition { final, internal };

struct CompiledLiteral {
    std::string text;
    LiteralOrigin origin = LiteralOrigin::template_text;
    bool operator==(const CompiledLiteral&) const = default;
};

using CompiledSegment = std::variant<CompiledLiteral, SoftSlot, MaskSlot>;

struct CompiledPrompt {
    std::string instance_id;
    std::string template_id;
    std::vector<CompiledSegment> segments;
    std::vector<std::pair<std::size_t, std::optional<std::string>>> soft_table;
    MaskPosition mask_position = MaskPosition::final;
    bool truncated = false;

    bool operator==(const CompiledPrompt&) const = default;

    /// Text of the input-origin literal, or "" if the input was empty.
    std::string input_text() const {
        for (const auto& s : segments) {
            if (const auto* l = std::get_if<CompiledLiteral>(&s); l && l->origin == LiteralOrigin::input) return l->text;
        }
        return {};
    }
};

inline constexpr std::size_t default_char_budget = 8192;

namespace detail {

// Number of UTF-8 code points.
inline std::size_t utf8_length(std::string_view s) {
    std::size_t n = 0;
    for (unsigned char c : s) n += (c & 0xC0) != 0x80;
    return n;
}

// Byte length of the first `cps` code points.
inline std::size_t utf8_prefix_bytes(std::string_view s, std::size_t cps) {
    std::size_t seen = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if ((static_cast<unsigned char>(s[i]) & 0xC0) != 0x80) {
            if (seen == cps) return i;
            ++seen;
        }
    }
    return s.size();
}

} // namespace detail

/// Resolves the input and knowledge slots against one instance. When the
/// literal text exceeds `char_budget` code points, the tail of the buggy
/// code is cut (knowledge and template text are never cut) and the prompt
/// is flagged as truncated.
inline CompiledPrompt instantiate(const PromptTemplate& t, const RepairInstance& inst,
                                  std::size_t char_budget = default_char_budget) {
    CompiledPrompt cp;
    cp.instance_id = inst.id;
    cp.template_id = t.id;
    std::size_t fixed_chars = 0;
    for (const auto& seg : t.segments) {
        if (const auto* lit = std::get_if<Literal>(&seg)) {
            cp.segments.emplace_back(CompiledLiteral{lit->text, LiteralOrigin::template_text});
            fixed_chars += detail::utf8_length(lit->text);
        } else if (std::holds_alternative<InputSlot>(seg)) {
            cp.segments.emplace_back(CompiledLiteral{inst.buggy_code, LiteralOrigin::input});
        } else if (const auto* k = std::get_if<KnowledgeSlot>(&seg)) {
            auto it = inst.knowledge.find(k->kind);
            if (it == inst.knowledge.end()) {
                throw instantiation_error("instance '" + inst.id + "' has no " + std::string(to_string(k->kind)) +
                                          " knowledge required by template '" + t.id + "'");
            }
            cp.segments.emplace_back(CompiledLiteral{it->second, LiteralOrigin::knowledge});
            fixed_chars += detail::utf8_length(it->second);
        } else if (const auto* s = std::get_if<SoftSlot>(&seg)) {
            cp.segments.emplace_back(*s);
            cp.soft_table.emplace_back(s->index, s->init);
        } else {
            cp.segments.emplace_back(MaskSlot{});
        }
    }
    cp.mask_position = std::holds_alternative<MaskSlot>(cp.segments.back()) ? MaskPosition::final
                                                                            : MaskPosition::internal;

    const std::size_t input_chars = detail::utf8_length(inst.buggy_code);
    if (fixed_chars + input_chars > char_budget) {
        const std::size_t keep = char_budget > fixed_chars ? char_budget - fixed_chars : 0;
        for (auto& seg : cp.segments) {
            if (auto* l = std::get_if<CompiledLiteral>(&seg); l && l->origin == LiteralOrigin::input) {
                l->text.resize(detail::utf8_prefix_bytes(l->text, keep));
            }
        }
        cp.truncated = true;
    }
    return cp;
}

/// One-line rendering for logs and golden files: template text trimmed,
/// input and knowledge verbatim, "[SOFT:i]" and "[MASK]" markers, pieces
/// joined by single spaces.
inline std::string render_debug(const CompiledPrompt& cp) {
    std::string out;
    auto add = [&](std::string_view piece) {
        if (piece.empty()) return;
        if (!out.empty()) out += ' ';
        out += piece;
    };
    for (const auto& seg : cp.segments) {
        if (const auto* l = std::get_if<CompiledLiteral>(&seg)) {
            add(l->origin == LiteralOrigin::template_text ? detail::trim(l->text) : std::string_view(l->text));
        } else if (const auto* s = std::get_if<SoftSlot>(&seg)) {
            add("[SOFT:" + std::to_string(s->index) + "]");
        } else {
            add("[MASK]");
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// JSON

constexpr std::string_view to_string(LiteralOrigin o) noexcept {
    switch (o) {
    case LiteralOrigin::template_text: return "template";
    case LiteralOrigin::input: return "input";
    case LiteralOrigin::knowledge: return "knowledge";
    }
    return "?";
}

/// Wire form: {"instance_id", "segments":[{"t":"lit","text","origin"} |
/// {"t":"soft","i","init"} | {"t":"mask"}], "truncated"}. "origin" tells the
/// worker which literal it may shorten to fit the model context.
inline void to_json(json& j, const CompiledPrompt& cp) {
    json segs = json::array();
    for (const auto& seg : cp.segments) {
        if (const auto* l = std::get_if<CompiledLiteral>(&seg)) {
            segs.push_back({{"t", "lit"}, {"text", l->text}, {"origin", std::string(to_string(l->origin))}});
        } else if (const auto* s = std::get_if<SoftSlot>(&seg)) {
            json o{{"t", "soft"}, {"i", static_cast<double>(s->index)}};
            o["init"] = s->init ? json(*s->init) : json(nullptr);
            segs.push_back(std::move(o));
        } else {
            segs.push_back({{"t", "mask"}});
        }
    }
    j = json{{"instance_id", cp.instance_id}, {"segments", std::move(segs)}, {"truncated", cp.truncated}};
    if (!cp.template_id.empty()) j["template_id"] = cp.template_id;
}

inline void from_json(const json& j, CompiledPrompt& cp) {
    cp = CompiledPrompt{};
    cp.instance_id = j.at("instance_id").get<std::string>();
    if (auto it = j.find("template_id"); it != j.end() && it->is_string()) cp.template_id = it->get<std::string>();
    cp.truncated = j.value("truncated", false);
    std::size_t masks = 0;
    for (const auto& s : j.at("segments")) {
        const auto t = s.at("t").get<std::string>();
        if (t == "lit") {
            CompiledLiteral l{s.at("text").get<std::string>(), LiteralOrigin::template_text};
            const auto origin = s.value("origin", std::string("template"));
            if (origin == "input") l.origin = LiteralOrigin::input;
            else if (origin == "knowledge") l.origin = LiteralOrigin::knowledge;
            cp.segments.emplace_back(std::move(l));
        } else if (t == "soft") {
            SoftSlot slot{static_cast<std::size_t>(s.at("i").get<double>()), std::nullopt};
            if (auto it = s.find("init"); it != s.end() && it->is_string()) slot.init = it->get<std::string>();
            cp.soft_table.emplace_back(slot.index, slot.init);
            cp.segments.emplace_back(std::move(slot));
        } else if (t == "mask") {
            ++masks;
            cp.segments.emplace_back(MaskSlot{});
        } else {
            throw validation_error("unknown segment type '" + t + "'");
        }
    }
    if (masks != 1) throw validation_error("compiled prompt must hold exactly one mask");
    cp.mask_position = std::holds_alternative<MaskSlot>(cp.segments.back()) ? MaskPosition::final
                                                                            : MaskPosition::internal;
}

/// Template wire form used in tune requests.
inline void to_json(json& j, const PromptTemplate& t) {
    j = json{{"id", t.id},
             {"kind", std::string(to_string(t.kind))},
             {"style", std::string(to_string(t.model_style))},
             {"dsl", to_dsl(t)},
             {"soft_count", static_cast<double>(t.soft_count())}};
}

} // namespace patchbench
