#pragma once

// Keyword lists used to weight unigrams in the keyword-weighted n-gram term.
// Kept in the same order as the lists shipped with the reference CodeBLEU scorer.

#include <span>
#include <string_view>

#include "language.hpp"

namespace patchbench {

namespace detail {
inline constexpr std::string_view java_keywords[] = {
    "abstract", "assert", "boolean", "break", "byte", "case", "catch", "char", "class", "const",
    "continue", "default", "do", "double", "else", "enum", "extends", "final", "finally", "float",
    "for", "goto", "if", "implements", "import", "instanceof", "int", "interface", "long", "native",
    "new", "package", "private", "protected", "public", "return", "short", "static", "strictfp",
    "super", "switch", "synchronized", "this", "throw", "throws", "transient", "try", "void",
    "volatile", "while",
};
inline constexpr std::string_view python_keywords[] = {
    "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class", "continue",
    "def", "del", "elif", "else", "except", "finally", "for", "from", "global", "if", "import",
    "in", "is", "lambda", "nonlocal", "not", "or", "pass", "raise", "return", "try", "while",
    "with", "yield", "match", "case", "type",
};
inline constexpr std::string_view javascript_keywords[] = {
    "await", "break", "case", "catch", "class", "const", "continue", "debugger", "default",
    "delete", "do", "else", "enum", "export", "extends", "false", "finally", "for", "function",
    "if", "implements", "import", "in", "instanceof", "interface", "let", "new", "null", "package",
    "private", "protected", "public", "return", "super", "switch", "static", "this", "throw", "try",
    "True", "typeof", "var", "void", "while", "with", "yield",
};
inline constexpr std::string_view c_keywords[] = {
    "auto", "else", "long", "switch", "break", "enum", "register", "typedef", "case", "extern",
    "return", "union", "char", "float", "short", "unsigned", "const", "for", "signed", "void",
    "continue", "goto", "sizeof", "volatile", "default", "if", "static", "while", "do", "int",
    "struct", "_Packed", "double",
};
} // namespace detail

inline std::span<const std::string_view> keywords(LanguageId lang) noexcept {
    switch (lang) {
    case LanguageId::java: return detail::java_keywords;
    case LanguageId::python: return detail::python_keywords;
    case LanguageId::javascript: return detail::javascript_keywords;
    case LanguageId::c: return detail::c_keywords;
    }
    return {};
}

} // namespace patchbench
