#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "error.hpp"
#include "language.hpp"

namespace patchbench {

using json = nlohmann::json;

/// Per-instance domain knowledge that knowledge prompts can splice in.
enum class KnowledgeKind {
    repair_action,
    repair_pattern,
    bug_type,
    buggy_node_ast,
    error_message,
    algorithm_tags,
};

inline constexpr std::array<KnowledgeKind, 6> all_knowledge_kinds{
    KnowledgeKind::repair_action, KnowledgeKind::repair_pattern, KnowledgeKind::bug_type,
    KnowledgeKind::buggy_node_ast, KnowledgeKind::error_message, KnowledgeKind::algorithm_tags};

constexpr std::string_view to_string(KnowledgeKind kind) noexcept {
    switch (kind) {
    case KnowledgeKind::repair_action: return "repair_action";
    case KnowledgeKind::repair_pattern: return "repair_pattern";
    case KnowledgeKind::bug_type: return "bug_type";
    case KnowledgeKind::buggy_node_ast: return "buggy_node_ast";
    case KnowledgeKind::error_message: return "error_message";
    case KnowledgeKind::algorithm_tags: return "algorithm_tags";
    }
    return "?";
}

/// Slot name used in the tabular template notation, e.g. "[repairAction]".
constexpr std::string_view slot_name(KnowledgeKind kind) noexcept {
    switch (kind) {
    case KnowledgeKind::repair_action: return "repairAction";
    case KnowledgeKind::repair_pattern: return "repairPattern";
    case KnowledgeKind::bug_type: return "bugType";
    case KnowledgeKind::buggy_node_ast: return "buggyNodeAST";
    case KnowledgeKind::error_message: return "errorMessage";
    case KnowledgeKind::algorithm_tags: return "algorithmTags";
    }
    return "?";
}

inline std::optional<KnowledgeKind> parse_knowledge_kind(std::string_view name) {
    for (auto kind : all_knowledge_kinds) {
        if (name == to_string(kind) || name == slot_name(kind)) return kind;
    }
    return std::nullopt;
}

/// Where a hunk-derived instance sits in its pre-fix file (1-based lines).
struct HunkOrigin {
    std::size_t old_start = 0;
    std::size_t old_count = 0;
    std::size_t new_start = 0;
    std::size_t new_count = 0;

    bool operator==(const HunkOrigin&) const = default;
};

struct RepairInstance {
    std::string id;
    LanguageId language = LanguageId::java;
    std::string buggy_code;
    std::string fixed_code;
    std::map<KnowledgeKind, std::string> knowledge;
    std::string source_dataset;
    std::optional<HunkOrigin> hunk;

    bool operator==(const RepairInstance&) const = default;
};

inline void validate(const RepairInstance& inst) {
    if (inst.id.empty()) throw record_error("instance id is empty");
    if (inst.buggy_code.empty()) throw record_error("instance '" + inst.id + "': buggy code is empty");
    if (inst.fixed_code.empty()) throw record_error("instance '" + inst.id + "': fixed code is empty");
}

inline void to_json(json& j, const RepairInstance& inst) {
    j = json{{"id", inst.id},
             {"language", std::string(to_string(inst.language))},
             {"buggy", inst.buggy_code},
             {"fixed", inst.fixed_code}};
    if (!inst.knowledge.empty()) {
        json k = json::object();
        for (const auto& [kind, text] : inst.knowledge) k[std::string(to_string(kind))] = text;
        j["knowledge"] = std::move(k);
    }
    if (!inst.source_dataset.empty()) j["dataset"] = inst.source_dataset;
}

/// Reads the canonical instance object. Field problems raise record_error;
/// an unknown language or knowledge kind raises schema_error.
inline void from_json(const json& j, RepairInstance& inst) {
    if (!j.is_object()) throw record_error("record is not a JSON object");
    auto req_string = [&](const char* key) -> std::string {
        auto it = j.find(key);
        if (it == j.end() || !it->is_string()) throw record_error(std::string("missing string field '") + key + "'");
        return it->get<std::string>();
    };
    inst = RepairInstance{};
    inst.id = req_string("id");
    const auto lang_tag = req_string("language");
    const auto lang = parse_language(lang_tag);
    if (!lang) throw schema_error("unknown language tag '" + lang_tag + "'");
    inst.language = *lang;
    inst.buggy_code = req_string("buggy");
    inst.fixed_code = req_string("fixed");
    if (auto it = j.find("knowledge"); it != j.end() && !it->is_null()) {
        if (!it->is_object()) throw record_error("'knowledge' must be an object");
        for (const auto& [key, value] : it->items()) {
            auto kind = parse_knowledge_kind(key);
            if (!kind) throw schema_error("unknown knowledge kind '" + key + "'");
            if (!value.is_string()) throw record_error("knowledge '" + key + "' must be a string");
            inst.knowledge[*kind] = value.get<std::string>();
        }
    }
    if (auto it = j.find("dataset"); it != j.end() && it->is_string()) inst.source_dataset = it->get<std::string>();
    validate(inst);
}

} // namespace patchbench
