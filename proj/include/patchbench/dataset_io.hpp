#pragma once

// JSON-Lines dataset loading and the per-benchmark field maps.

#include <algorithm>
#include <array>
#include <cctype>
#include <istream>
#include <ostream>
#include <cstddef>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "instance.hpp"
#include "language.hpp"

namespace patchbench {

enum class DatasetSchema {
    canonical,
    defects4j,
    manysstubs4j,
    tfix,
    xcodeeval,
    bugsinpy,
    code_refinement,
};

inline constexpr std::array<DatasetSchema, 7> all_schemas{
    DatasetSchema::canonical, DatasetSchema::defects4j, DatasetSchema::manysstubs4j,
    DatasetSchema::tfix,      DatasetSchema::xcodeeval, DatasetSchema::bugsinpy,
    DatasetSchema::code_refinement};

constexpr std::string_view to_string(DatasetSchema s) noexcept {
    switch (s) {
    case DatasetSchema::canonical: return "canonical";
    case DatasetSchema::defects4j: return "defects4j";
    case DatasetSchema::manysstubs4j: return "manysstubs4j";
    case DatasetSchema::tfix: return "tfix";
    case DatasetSchema::xcodeeval: return "xcodeeval";
    case DatasetSchema::bugsinpy: return "bugsinpy";
    case DatasetSchema::code_refinement: return "code_refinement";
    }
    return "?";
}

inline std::optional<DatasetSchema> parse_schema(std::string_view name) {
    for (auto s : all_schemas) {
        if (to_string(s) == name) return s;
    }
    return std::nullopt;
}

namespace detail {

struct KnowledgeField {
    KnowledgeKind kind;
    std::vector<std::string> path; // nested keys, tried as written
    const char* joiner;            // used when the value is an array
};

struct FieldMap {
    std::vector<std::string> id_keys;
    std::string buggy_key;
    std::string fixed_key;
    std::optional<LanguageId> fixed_language;
    std::vector<std::string> language_keys;
    std::vector<KnowledgeField> knowledge;
};

inline const FieldMap& field_map(DatasetSchema schema) {
    using K = KnowledgeKind;
    static const FieldMap defects4j{{"bug_id", "id"}, "buggy", "fix", LanguageId::java, {},
        {{K::repair_action, {"repair_actions"}, " "}, {K::repair_pattern, {"repair_patterns"}, " "}}};
    static const FieldMap manysstubs4j{{"id"}, "sourceBeforeFix", "sourceAfterFix", LanguageId::java, {},
        {{K::bug_type, {"bugType"}, " "}, {K::buggy_node_ast, {"bugNodeAST"}, " "}}};
    static const FieldMap tfix{{"id"}, "source_code", "target_code", LanguageId::javascript, {},
        {{K::bug_type, {"linter_report", "rule_id"}, " "},
         {K::bug_type, {"rule_id"}, " "},
         {K::error_message, {"linter_report", "message"}, " "},
         {K::error_message, {"message"}, " "}}};
    static const FieldMap xcodeeval{{"apr_id", "id"}, "bug_source_code", "fix_source_code", std::nullopt,
        {"lang_cluster", "lang"},
        {{K::error_message, {"bug_exec_outcome"}, " "}, {K::algorithm_tags, {"tags"}, ", "}}};
    static const FieldMap bugsinpy{{"id"}, "buggy", "fixed", LanguageId::python, {}, {}};
    static const FieldMap code_refinement{{"id"}, "buggy", "fixed", LanguageId::java, {}, {}};
    switch (schema) {
    case DatasetSchema::defects4j: return defects4j;
    case DatasetSchema::manysstubs4j: return manysstubs4j;
    case DatasetSchema::tfix: return tfix;
    case DatasetSchema::xcodeeval: return xcodeeval;
    case DatasetSchema::bugsinpy: return bugsinpy;
    case DatasetSchema::code_refinement: return code_refinement;
    case DatasetSchema::canonical: break;
    }
    throw schema_error("canonical schema has no field map");
}

inline const json* find_path(const json& j, const std::vector<std::string>& path) {
    const json* cur = &j;
    for (const auto& key : path) {
        if (!cur->is_object()) return nullptr;
        auto it = cur->find(key);
        if (it == cur->end()) return nullptr;
        cur = &*it;
    }
    return cur;
}

inline std::optional<std::string> as_text(const json& v, const char* joiner) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number() || v.is_boolean()) return v.dump();
    if (v.is_array()) {
        std::string out;
        for (const auto& e : v) {
            auto part = as_text(e, joiner);
            if (!part || part->empty()) continue;
            if (!out.empty()) out += joiner;
            out += *part;
        }
        return out;
    }
    return std::nullopt;
}

inline RepairInstance map_record(const json& j, DatasetSchema schema, std::size_t line) {
    if (schema == DatasetSchema::canonical) {
        auto inst = j.get<RepairInstance>();
        if (inst.source_dataset.empty()) inst.source_dataset = "canonical";
        return inst;
    }
    if (!j.is_object()) throw record_error("record is not a JSON object");
    const auto& fm = field_map(schema);
    RepairInstance inst;
    inst.source_dataset = std::string(to_string(schema));

    if (fm.fixed_language) {
        inst.language = *fm.fixed_language;
    } else {
        std::optional<std::string> tag;
        for (const auto& key : fm.language_keys) {
            if (auto it = j.find(key); it != j.end() && it->is_string()) {
                tag = it->get<std::string>();
                break;
            }
        }
        if (!tag) throw record_error("missing language field");
        auto lang = parse_language(*tag);
        if (!lang) throw schema_error("unknown language tag '" + *tag + "'");
        inst.language = *lang;
    }

    for (const auto& key : fm.id_keys) {
        if (auto it = j.find(key); it != j.end()) {
            if (auto s = as_text(*it, "-")) {
                inst.id = *s;
                break;
            }
        }
    }
    if (inst.id.empty()) inst.id = std::string(to_string(schema)) + "-" + std::to_string(line);

    auto req = [&](const std::string& key) {
        auto it = j.find(key);
        if (it == j.end() || !it->is_string()) throw record_error("missing string field '" + key + "'");
        return it->get<std::string>();
    };
    inst.buggy_code = req(fm.buggy_key);
    inst.fixed_code = req(fm.fixed_key);

    for (const auto& kf : fm.knowledge) {
        if (inst.knowledge.count(kf.kind)) continue;
        if (const json* v = find_path(j, kf.path); v && !v->is_null()) {
            auto text = as_text(*v, kf.joiner);
            if (!text) throw record_error("knowledge field '" + kf.path.back() + "' has an unsupported type");
            if (!text->empty()) inst.knowledge[kf.kind] = *text;
        }
    }
    validate(inst);
    return inst;
}

} // namespace detail

/// Parses JSON-Lines text. Blank lines are skipped. Malformed lines and
/// records with missing fields raise load_error naming the 1-based line;
/// an unknown language tag raises schema_error.
inline std::vector<RepairInstance> parse_dataset(std::istream& in, DatasetSchema schema) {
    std::vector<RepairInstance> out;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw load_error(lineno, std::string("malformed JSON: ") + e.what());
        }
        RepairInstance inst;
        try {
            inst = detail::map_record(j, schema, lineno);
        } catch (const record_error& e) {
            throw load_error(lineno, e.what());
        } catch (const schema_error& e) {
            throw schema_error("line " + std::to_string(lineno) + ": " + e.what());
        } catch (const json::exception& e) {
            throw load_error(lineno, e.what());
        }
        if (!seen.insert(inst.id).second) throw load_error(lineno, "duplicate id '" + inst.id + "'");
        out.push_back(std::move(inst));
    }
    return out;
}

inline std::vector<RepairInstance> load_dataset(const std::string& path, DatasetSchema schema = DatasetSchema::canonical) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw load_error(0, "cannot open '" + path + "'");
    return parse_dataset(in, schema);
}

/// Writes instances as canonical JSON-Lines.
inline void write_dataset(std::ostream& out, const std::vector<RepairInstance>& items) {
    for (const auto& inst : items) out << json(inst).dump() << '\n';
}

inline void save_dataset(const std::string& path, const std::vector<RepairInstance>& items) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw error("cannot write '" + path + "'");
    write_dataset(out, items);
}

} // namespace patchbench
