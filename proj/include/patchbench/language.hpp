#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <optional>
#include <string>
#include <string_view>

namespace patchbench {

enum class LanguageId { java, python, javascript, c };

inline constexpr std::array<LanguageId, 4> all_languages{
    LanguageId::java, LanguageId::python, LanguageId::javascript, LanguageId::c};

constexpr std::string_view to_string(LanguageId lang) noexcept {
    switch (lang) {
    case LanguageId::java: return "java";
    case LanguageId::python: return "python";
    case LanguageId::javascript: return "javascript";
    case LanguageId::c: return "c";
    }
    return "?";
}

/// Accepts the canonical names plus the spellings used by the dataset exports
/// ("py", "js", "GNU C11", ...). Case-insensitive.
inline std::optional<LanguageId> parse_language(std::string_view tag) {
    std::string t(tag);
    std::transform(t.begin(), t.end(), t.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (t == "java") return LanguageId::java;
    if (t == "python" || t == "py" || t == "python3") return LanguageId::python;
    if (t == "javascript" || t == "js" || t == "node.js" || t == "nodejs") return LanguageId::javascript;
    if (t == "c" || t == "gnu c" || t == "gnu c11" || t == "c11" || t == "c99") return LanguageId::c;
    return std::nullopt;
}

} // namespace patchbench
