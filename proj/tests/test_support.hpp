#pragma once

// Fixtures shared by the unit tests and the acceptance binary.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <patchbench/patchbench.hpp>

#ifndef PATCHBENCH_TEST_DATA
#error "PATCHBENCH_TEST_DATA must point at the tests directory"
#endif

namespace pbtest {

namespace pb = patchbench;

inline std::filesystem::path test_dir() { return PATCHBENCH_TEST_DATA; }

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("patchbench-test-" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

/// Random small functions that parse cleanly in each language.
class ProgramGen {
  public:
    explicit ProgramGen(std::uint64_t seed) : rng_(seed, 0x70726f67ULL) {}

    std::string program(pb::LanguageId lang) {
        lang_ = lang;
        const auto name = "f" + std::to_string(pick(1000));
        std::string body;
        const int stmts = 1 + static_cast<int>(pick(4));
        body += line(1, decl("x", expr(2)));
        body += line(1, decl("y", expr(1)));
        for (int i = 0; i < stmts; ++i) body += statement(1, 2);
        body += line(1, ret(expr(2)));
        switch (lang) {
        case pb::LanguageId::python: return "def " + name + "(a, b):\n" + body;
        case pb::LanguageId::javascript: return "function " + name + "(a, b) {\n" + body + "}\n";
        case pb::LanguageId::java:
        case pb::LanguageId::c: return "int " + name + "(int a, int b) {\n" + body + "}\n";
        }
        return {};
    }

  private:
    std::uint32_t pick(std::uint32_t n) { return rng_.bounded(n); }
    bool py() const { return lang_ == pb::LanguageId::python; }

    std::string atom() {
        static const char* vars[] = {"a", "b", "x", "y"};
        if (pick(3) == 0) return std::to_string(pick(50));
        return vars[pick(4)];
    }

    std::string expr(int depth) {
        static const char* ops[] = {"+", "-", "*"};
        if (depth == 0 || pick(3) == 0) return atom();
        return expr(depth - 1) + " " + ops[pick(3)] + " " + expr(depth - 1);
    }

    std::string cond() {
        static const char* rel[] = {"<", ">", "==", "!=", "<=", ">="};
        return expr(1) + " " + rel[pick(6)] + " " + expr(1);
    }

    std::string indent(int n) const { return std::string(static_cast<std::size_t>(n) * 4, ' '); }
    std::string line(int n, const std::string& s) const { return indent(n) + s + "\n"; }
    std::string end() const { return py() ? "" : ";"; }

    std::string decl(const std::string& v, const std::string& e) {
        switch (lang_) {
        case pb::LanguageId::python: return v + " = " + e;
        case pb::LanguageId::javascript: return "let " + v + " = " + e + ";";
        default: return "int " + v + " = " + e + ";";
        }
    }

    std::string ret(const std::string& e) { return "return " + e + end(); }

    std::string statement(int level, int depth) {
        const auto kind = depth == 0 ? 0 : pick(4);
        const std::string target = pick(2) ? "x" : "y";
        if (kind <= 1) return line(level, target + " = " + expr(2) + end());
        std::string inner;
        const int n = 1 + static_cast<int>(pick(2));
        for (int i = 0; i < n; ++i) inner += statement(level + 1, depth - 1);
        if (kind == 2) {
            if (py()) return line(level, "if " + cond() + ":") + inner;
            return line(level, "if (" + cond() + ") {") + inner + line(level, "}");
        }
        const auto bound = std::to_string(1 + pick(9));
        switch (lang_) {
        case pb::LanguageId::python: return line(level, "for i in range(" + bound + "):") + inner;
        case pb::LanguageId::javascript:
            return line(level, "for (let i = 0; i < " + bound + "; i++) {") + inner + line(level, "}");
        default: return line(level, "for (int i = 0; i < " + bound + "; i++) {") + inner + line(level, "}");
        }
    }

    pb::Pcg32 rng_;
    pb::LanguageId lang_ = pb::LanguageId::java;
};

/// Same program with different spacing: every layout collapsed onto one
/// line for brace languages, operator spacing removed for Python.
inline std::string whitespace_variant(const std::string& code, pb::LanguageId lang) {
    if (lang != pb::LanguageId::python) {
        std::string out;
        bool space = false;
        for (char c : code) {
            if (c == ' ' || c == '\n' || c == '\t') {
                space = true;
                continue;
            }
            if (space && !out.empty()) out += ' ';
            space = false;
            out += c;
        }
        return out;
    }
    std::string out = code;
    for (const char* op : {" == ", " != ", " <= ", " >= ", " + ", " - ", " * ", " < ", " > ", " = "}) {
        const std::string from(op);
        const std::string to = from.substr(1, from.size() - 2);
        std::size_t at = 0;
        while ((at = out.find(from, at)) != std::string::npos) {
            out.replace(at, from.size(), to);
            at += to.size();
        }
    }
    return out;
}

/// Synthetic corpus for the pipeline fixture: n Java one-liners with a
/// swapped operator.
inline std::vector<pb::RepairInstance> pipeline_corpus(std::size_t n = 960) {
    std::vector<pb::RepairInstance> out;
    for (std::size_t i = 0; i < n; ++i) {
        pb::RepairInstance r;
        char id[32];
        std::snprintf(id, sizeof id, "ms-%04zu", i);
        r.id = id;
        r.language = pb::LanguageId::java;
        const auto k = std::to_string(i);
        r.buggy_code = "int f" + k + "(int a) { return a - " + k + "; }";
        r.fixed_code = "int f" + k + "(int a) { return a + " + k + "; }";
        r.source_dataset = "synthetic";
        out.push_back(std::move(r));
    }
    return out;
}

/// Oracle table holding the fixed code for the first `covered` ids of the
/// seed's test split.
inline std::map<std::string, std::string> pipeline_table(const std::vector<pb::RepairInstance>& corpus, std::uint64_t seed,
                                                         std::size_t covered) {
    const auto split = pb::split_ids(pb::ids_of(corpus), seed);
    std::map<std::string, const pb::RepairInstance*> by_id;
    for (const auto& r : corpus) by_id[r.id] = &r;
    std::map<std::string, std::string> table;
    for (std::size_t i = 0; i < covered && i < split.test.size(); ++i) table[split.test[i]] = by_id.at(split.test[i])->fixed_code;
    return table;
}

inline pb::json load_json(const std::filesystem::path& p) { return pb::json::parse(pb::read_file(p)); }

} // namespace pbtest
