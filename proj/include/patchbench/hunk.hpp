#pragma once

// Unified-diff parsing: one repair instance per hunk, and the inverse
// operation that re-applies instances to the pre-fix file.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"
#include "instance.hpp"
#include "language.hpp"

namespace patchbench {

namespace detail {

struct FileLines {
    std::vector<std::string> lines;
    bool trailing_newline = false;
};

inline FileLines split_file(std::string_view text) {
    FileLines out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) {
            out.lines.emplace_back(text.substr(pos));
            return out;
        }
        std::string_view line = text.substr(pos, nl - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        out.lines.emplace_back(line);
        pos = nl + 1;
    }
    out.trailing_newline = !text.empty();
    return out;
}

// Every '\n' separates two lines, so "a\n" is {"a", ""}.
inline std::vector<std::string> split_raw(std::string_view text) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    for (;;) {
        const auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) {
            out.emplace_back(text.substr(pos));
            return out;
        }
        out.emplace_back(text.substr(pos, nl - pos));
        pos = nl + 1;
    }
}

inline std::string join_lines(const std::vector<std::string>& lines, std::size_t from, std::size_t to) {
    std::string out;
    for (std::size_t i = from; i < to; ++i) {
        if (i > from) out += '\n';
        out += lines[i];
    }
    return out;
}

// "@@ -a[,b] +c[,d] @@ ..." ; an omitted count means 1.
inline HunkOrigin parse_hunk_header(std::string_view line) {
    auto fail = [&] { return extraction_error("bad hunk header: " + std::string(line)); };
    if (line.substr(0, 3) != "@@ ") throw fail();
    std::size_t i = 3;
    auto read_num = [&]() -> std::size_t {
        if (i >= line.size() || line[i] < '0' || line[i] > '9') throw fail();
        std::size_t v = 0;
        while (i < line.size() && line[i] >= '0' && line[i] <= '9') v = v * 10 + static_cast<std::size_t>(line[i++] - '0');
        return v;
    };
    auto read_range = [&](char sign, std::size_t& start, std::size_t& count) {
        if (i >= line.size() || line[i] != sign) throw fail();
        ++i;
        start = read_num();
        count = 1;
        if (i < line.size() && line[i] == ',') {
            ++i;
            count = read_num();
        }
    };
    HunkOrigin h;
    read_range('-', h.old_start, h.old_count);
    if (i >= line.size() || line[i] != ' ') throw fail();
    ++i;
    read_range('+', h.new_start, h.new_count);
    if (line.substr(i, 3) != " @@") throw fail();
    return h;
}

} // namespace detail

/// Splits a unified diff into single-hunk instances. Context and removed
/// lines form buggy_code, context and added lines form fixed_code. Every
/// context/removed line is checked against before_file.
inline std::vector<RepairInstance> extract_single_hunk(std::string_view diff, std::string_view before_file,
                                                       LanguageId language, const std::string& id_prefix = "hunk") {
    const auto before = detail::split_file(before_file);
    const auto diff_lines = detail::split_file(diff).lines;
    std::vector<RepairInstance> out;
    std::size_t next_free = 0; // first pre-fix line index not yet covered by a hunk

    std::size_t i = 0;
    while (i < diff_lines.size()) {
        const auto& line = diff_lines[i];
        if (line.rfind("@@", 0) != 0) {
            ++i; // file headers and other preamble
            continue;
        }
        const HunkOrigin h = detail::parse_hunk_header(line);
        ++i;
        std::vector<std::string> old_side, new_side;
        while (i < diff_lines.size() && (old_side.size() < h.old_count || new_side.size() < h.new_count)) {
            const auto& body = diff_lines[i];
            if (body.rfind("\\", 0) == 0) { // "\ No newline at end of file"
                ++i;
                continue;
            }
            const char tag = body.empty() ? ' ' : body[0];
            const std::string text = body.empty() ? std::string() : body.substr(1);
            if (tag == ' ') {
                old_side.push_back(text);
                new_side.push_back(text);
            } else if (tag == '-') {
                old_side.push_back(text);
            } else if (tag == '+') {
                new_side.push_back(text);
            } else {
                throw extraction_error("unexpected line in hunk body: " + body);
            }
            ++i;
        }
        while (i < diff_lines.size() && diff_lines[i].rfind("\\", 0) == 0) ++i;
        if (old_side.size() != h.old_count || new_side.size() != h.new_count) {
            throw extraction_error("hunk line counts do not match its header: " + line);
        }

        const std::size_t first = h.old_count == 0 ? h.old_start : h.old_start - 1;
        if ((h.old_count > 0 && h.old_start == 0) || first < next_free || first + h.old_count > before.lines.size()) {
            throw extraction_error("hunk does not fit the pre-fix file: " + line);
        }
        for (std::size_t k = 0; k < old_side.size(); ++k) {
            if (before.lines[first + k] != old_side[k]) {
                throw extraction_error("pre-fix file differs from diff at line " + std::to_string(first + k + 1));
            }
        }
        next_free = first + h.old_count;

        if (old_side.empty() || new_side.empty()) {
            throw extraction_error("hunk has an empty side and no context: " + line);
        }
        RepairInstance inst;
        inst.id = id_prefix + "-" + std::to_string(out.size() + 1);
        inst.language = language;
        inst.buggy_code = detail::join_lines(old_side, 0, old_side.size());
        inst.fixed_code = detail::join_lines(new_side, 0, new_side.size());
        inst.hunk = h;
        out.push_back(std::move(inst));
    }
    return out;
}

/// Rebuilds the post-fix file by substituting each instance's fixed_code
/// for the pre-fix lines its hunk covers. Instances must carry hunk origins
/// and must not overlap. The trailing newline of before_file is kept.
inline std::string apply_hunks(std::string_view before_file, const std::vector<RepairInstance>& hunks) {
    const auto before = detail::split_file(before_file);
    std::vector<std::string> out;
    std::size_t cursor = 0;
    for (const auto& inst : hunks) {
        if (!inst.hunk) throw extraction_error("instance '" + inst.id + "' has no hunk origin");
        const auto& h = *inst.hunk;
        const std::size_t first = h.old_count == 0 ? h.old_start : h.old_start - 1;
        if (first < cursor || first + h.old_count > before.lines.size()) {
            throw extraction_error("hunks overlap or fall outside the file");
        }
        out.insert(out.end(), before.lines.begin() + static_cast<std::ptrdiff_t>(cursor),
                   before.lines.begin() + static_cast<std::ptrdiff_t>(first));
        const auto fixed = detail::split_raw(inst.fixed_code);
        out.insert(out.end(), fixed.begin(), fixed.end());
        cursor = first + h.old_count;
    }
    out.insert(out.end(), before.lines.begin() + static_cast<std::ptrdiff_t>(cursor), before.lines.end());
    std::string text = detail::join_lines(out, 0, out.size());
    if (before.trailing_newline && !out.empty()) text += '\n';
    return text;
}

} // namespace patchbench
