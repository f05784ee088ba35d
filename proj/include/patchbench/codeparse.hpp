#pragma once

// Syntax trees for Java, Python, JavaScript and C fragments, built on the
// vendored tree-sitter runtime and grammars.
//
// Trees are copied out of tree-sitter into plain value types, so they own
// their source text and can be shared freely between threads. Parsers are
// kept one per language per thread.

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <tree_sitter/api.h>

#include "error.hpp"
#include "language.hpp"

extern "C" {
const TSLanguage* tree_sitter_java(void);
const TSLanguage* tree_sitter_python(void);
const TSLanguage* tree_sitter_javascript(void);
const TSLanguage* tree_sitter_c(void);
}

namespace patchbench {

struct Point {
    std::uint32_t row = 0;
    std::uint32_t column = 0;
    auto operator<=>(const Point&) const = default;
};

struct SyntaxNode {
    std::string kind;
    std::string field; // field name under the parent, "" if none
    bool named = false;
    bool missing = false;
    bool is_error = false; // ERROR node or a token the parser had to invent
    bool extra = false;
    std::uint32_t start_byte = 0;
    std::uint32_t end_byte = 0;
    Point start;
    Point end;
    std::vector<std::uint32_t> children;
    std::uint32_t parent = 0;

    bool is_leaf() const noexcept { return children.empty(); }
};

class SyntaxTree {
  public:
    LanguageId language = LanguageId::java;
    std::string source;
    std::vector<SyntaxNode> nodes; // nodes[0] is the root, pre-order
    std::string wrapper;           // snippet wrapper that produced the tree, "" for a bare parse

    const SyntaxNode& root() const { return nodes.front(); }
    const SyntaxNode& node(std::uint32_t i) const { return nodes[i]; }
    bool empty() const noexcept { return nodes.empty(); }

    std::size_t error_count() const {
        return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const SyntaxNode& n) { return n.is_error; }));
    }
    bool has_errors() const { return error_count() > 0; }

    /// Source bytes covered by the node.
    std::string_view text(std::uint32_t i) const {
        const auto& n = nodes[i];
        return std::string_view(source).substr(n.start_byte, n.end_byte - n.start_byte);
    }

    /// First child carrying the given field name.
    std::optional<std::uint32_t> child_by_field(std::uint32_t i, std::string_view field) const {
        for (auto c : nodes[i].children) {
            if (nodes[c].field == field) return c;
        }
        return std::nullopt;
    }
};

namespace detail {

inline const TSLanguage* ts_language(LanguageId lang) {
    switch (lang) {
    case LanguageId::java: return tree_sitter_java();
    case LanguageId::python: return tree_sitter_python();
    case LanguageId::javascript: return tree_sitter_javascript();
    case LanguageId::c: return tree_sitter_c();
    }
    throw unsupported_language("no grammar for language");
}

struct ParserDeleter {
    void operator()(TSParser* p) const noexcept { ts_parser_delete(p); }
};
struct TreeDeleter {
    void operator()(TSTree* t) const noexcept { ts_tree_delete(t); }
};
using ParserPtr = std::unique_ptr<TSParser, ParserDeleter>;
using TreePtr = std::unique_ptr<TSTree, TreeDeleter>;

inline TSParser* thread_parser(LanguageId lang) {
    thread_local ParserPtr parsers[4];
    auto& slot = parsers[static_cast<int>(lang)];
    if (!slot) {
        slot.reset(ts_parser_new());
        if (!ts_parser_set_language(slot.get(), ts_language(lang))) {
            throw unsupported_language("grammar ABI not supported by the runtime");
        }
    }
    return slot.get();
}

inline TreePtr ts_parse(LanguageId lang, std::string_view text) {
    TSParser* parser = thread_parser(lang);
    ts_parser_reset(parser);
    TreePtr tree(ts_parser_parse_string(parser, nullptr, text.data(), static_cast<std::uint32_t>(text.size())));
    if (!tree) throw error("parser returned no tree");
    return tree;
}

inline SyntaxNode copy_node(TSNode n, const char* field) {
    SyntaxNode out;
    out.kind = ts_node_type(n);
    out.field = field ? field : "";
    out.named = ts_node_is_named(n);
    out.missing = ts_node_is_missing(n);
    out.extra = ts_node_is_extra(n);
    out.is_error = out.missing || ts_node_symbol(n) == static_cast<TSSymbol>(-1) || out.kind == "ERROR";
    out.start_byte = ts_node_start_byte(n);
    out.end_byte = ts_node_end_byte(n);
    const auto sp = ts_node_start_point(n);
    const auto ep = ts_node_end_point(n);
    out.start = {sp.row, sp.column};
    out.end = {ep.row, ep.column};
    return out;
}

// Copies the whole tree in pre-order using a cursor (for field names).
inline std::vector<SyntaxNode> copy_tree(TSNode root) {
    std::vector<SyntaxNode> nodes;
    TSTreeCursor cur = ts_tree_cursor_new(root);
    std::vector<std::uint32_t> stack; // ancestors of the cursor position
    nodes.push_back(copy_node(root, nullptr));
    stack.push_back(0);
    for (;;) {
        if (ts_tree_cursor_goto_first_child(&cur)) {
            // descend
        } else {
            // climb until a sibling exists
            bool moved = false;
            while (!moved) {
                if (ts_tree_cursor_goto_next_sibling(&cur)) {
                    stack.pop_back();
                    moved = true;
                } else if (ts_tree_cursor_goto_parent(&cur)) {
                    stack.pop_back();
                } else {
                    ts_tree_cursor_delete(&cur);
                    return nodes;
                }
            }
        }
        const auto parent = stack.back();
        auto node = copy_node(ts_tree_cursor_current_node(&cur), ts_tree_cursor_current_field_name(&cur));
        node.parent = parent;
        const auto idx = static_cast<std::uint32_t>(nodes.size());
        nodes.push_back(std::move(node));
        nodes[parent].children.push_back(idx);
        stack.push_back(idx);
    }
}

inline std::string_view synthetic_root_kind(LanguageId lang) {
    switch (lang) {
    case LanguageId::java: return "program";
    case LanguageId::python: return "module";
    case LanguageId::javascript: return "program";
    case LanguageId::c: return "translation_unit";
    }
    return "program";
}

struct Wrapper {
    std::string_view prefix;
    std::string_view suffix;
};

// Every prefix ends with a newline so that rows shift by a whole count and
// columns stay as written.
inline std::vector<Wrapper> wrappers(LanguageId lang, std::string_view code) {
    switch (lang) {
    case LanguageId::java:
        return {{"class __PBWrap__ { void __pbWrap__() {\n", "\n} }"}, {"class __PBWrap__ {\n", "\n}"}};
    case LanguageId::c:
        return {{"void __pb_wrap__(void) {\n", "\n}"}};
    case LanguageId::javascript:
        return {{"function __pbWrap__() {\n", "\n}"}, {"class __PBWrap__ {\n", "\n}"}};
    case LanguageId::python: {
        const bool indented = !code.empty() && (code.front() == ' ' || code.front() == '\t');
        if (!indented) return {};
        return {{"if True:\n", ""}, {"class _W:\n", ""}};
    }
    }
    return {};
}

// Re-roots a parse of prefix+code+suffix onto the nodes lying wholly
// inside the code, shifting spans back to code coordinates.
inline SyntaxTree extract_region(const std::vector<SyntaxNode>& all, LanguageId lang, std::string_view code,
                                 const Wrapper& w) {
    const auto lo = static_cast<std::uint32_t>(w.prefix.size());
    const auto hi = lo + static_cast<std::uint32_t>(code.size());
    const auto row_shift = static_cast<std::uint32_t>(std::count(w.prefix.begin(), w.prefix.end(), '\n'));

    SyntaxTree t;
    t.language = lang;
    t.source = std::string(code);
    t.wrapper = std::string(w.prefix);
    SyntaxNode root;
    root.kind = std::string(synthetic_root_kind(lang));
    root.named = true;
    root.end_byte = static_cast<std::uint32_t>(code.size());
    t.nodes.push_back(root);

    auto shift = [&](SyntaxNode n) {
        n.start_byte -= lo;
        n.end_byte -= lo;
        n.start.row -= row_shift;
        n.end.row -= row_shift;
        n.children.clear();
        return n;
    };
    // copy the subtree at src under dst
    auto copy_under = [&](auto&& self, std::uint32_t src, std::uint32_t dst) -> void {
        auto n = shift(all[src]);
        n.parent = dst;
        if (dst == 0) n.field.clear();
        const auto idx = static_cast<std::uint32_t>(t.nodes.size());
        t.nodes.push_back(std::move(n));
        t.nodes[dst].children.push_back(idx);
        for (auto c : all[src].children) self(self, c, idx);
    };
    // Python wrappers open a block that starts inside the code; look through it.
    auto transparent = [&](std::uint32_t c) {
        return lang == LanguageId::python && all[c].kind == "block" && all[all[c].parent].start_byte < lo;
    };
    auto visit = [&](auto&& self, std::uint32_t i) -> void {
        for (auto c : all[i].children) {
            const auto& n = all[c];
            if (n.start_byte >= lo && n.end_byte <= hi && !transparent(c)) {
                copy_under(copy_under, c, 0);
            } else if (n.start_byte <= hi && n.end_byte >= lo) {
                self(self, c);
            }
        }
    };
    visit(visit, 0);

    std::uint32_t row = 0, col = 0;
    for (char ch : code) {
        if (ch == '\n') {
            ++row;
            col = 0;
        } else {
            ++col;
        }
    }
    t.nodes[0].end = Point{row, col};
    return t;
}

inline SyntaxTree bare_tree(LanguageId lang, std::string_view code) {
    auto tree = ts_parse(lang, code);
    SyntaxTree t;
    t.language = lang;
    t.source = std::string(code);
    t.nodes = copy_tree(ts_tree_root_node(tree.get()));
    return t;
}

} // namespace detail

/// Plain parse of the whole text. Always returns a tree; syntax problems
/// show up as error nodes.
inline SyntaxTree parse(std::string_view code, LanguageId lang) { return detail::bare_tree(lang, code); }

/// Parse for code fragments. Tries the bare text first; if that has errors,
/// tries each documented wrapper for the language and keeps the first clean
/// result, else the candidate with the fewest errors (the bare parse wins
/// ties). Wrapper nodes never appear in the returned tree.
inline SyntaxTree parse_snippet(std::string_view code, LanguageId lang) {
    auto best = detail::bare_tree(lang, code);
    std::size_t best_errors = best.error_count();
    if (best_errors == 0) return best;
    for (const auto& w : detail::wrappers(lang, code)) {
        std::string text;
        text.reserve(w.prefix.size() + code.size() + w.suffix.size());
        text.append(w.prefix).append(code).append(w.suffix);
        auto tree = detail::ts_parse(lang, text);
        auto all = detail::copy_tree(ts_tree_root_node(tree.get()));
        auto region = detail::extract_region(all, lang, code, w);
        const auto errs = region.error_count();
        if (errs < best_errors) {
            best = std::move(region);
            best_errors = errs;
            if (errs == 0) break;
        }
    }
    return best;
}

inline bool is_comment_kind(std::string_view kind) {
    return kind == "comment" || kind == "line_comment" || kind == "block_comment";
}

/// Copy of the tree without the subtrees whose root matches drop. The root
/// itself is always kept.
template <class Pred>
SyntaxTree strip_nodes(const SyntaxTree& in, Pred drop) {
    SyntaxTree out;
    out.language = in.language;
    out.source = in.source;
    out.wrapper = in.wrapper;
    if (in.nodes.empty()) return out;
    auto copy = [&](auto&& self, std::uint32_t src, std::uint32_t parent, bool is_root) -> void {
        auto n = in.nodes[src];
        n.children.clear();
        n.parent = parent;
        const auto idx = static_cast<std::uint32_t>(out.nodes.size());
        out.nodes.push_back(std::move(n));
        if (!is_root) out.nodes[parent].children.push_back(idx);
        for (auto c : in.nodes[src].children) {
            if (!drop(in, c)) self(self, c, idx, false);
        }
    };
    copy(copy, 0, 0, true);
    return out;
}

/// Copy of the tree without comment nodes.
inline SyntaxTree strip_comments(const SyntaxTree& in) {
    return strip_nodes(in, [](const SyntaxTree& t, std::uint32_t i) { return is_comment_kind(t.nodes[i].kind); });
}

namespace detail {

inline bool nodes_equal(const SyntaxTree& a, std::uint32_t i, const SyntaxTree& b, std::uint32_t j) {
    const auto& x = a.nodes[i];
    const auto& y = b.nodes[j];
    if (x.kind != y.kind || x.children.size() != y.children.size()) return false;
    if (x.is_leaf()) return a.text(i) == b.text(j);
    for (std::size_t k = 0; k < x.children.size(); ++k) {
        if (!nodes_equal(a, x.children[k], b, y.children[k])) return false;
    }
    return true;
}

inline std::uint32_t height(const SyntaxTree& t, std::uint32_t i, std::vector<std::uint32_t>& memo) {
    if (memo[i]) return memo[i];
    std::uint32_t h = 1;
    for (auto c : t.nodes[i].children) h = std::max(h, 1 + height(t, c, memo));
    return memo[i] = h;
}

inline void write_char(std::string& out, std::uint32_t ch) {
    char buf[16];
    if (ch == 0) out += "'\\0'";
    else if (ch == '\n') out += "'\\n'";
    else if (ch == '\t') out += "'\\t'";
    else if (ch == '\r') out += "'\\r'";
    else if (ch < 128 && std::isprint(static_cast<int>(ch))) {
        std::snprintf(buf, sizeof buf, "'%c'", static_cast<int>(ch));
        out += buf;
    } else {
        std::snprintf(buf, sizeof buf, "%u", ch);
        out += buf;
    }
}

inline std::uint32_t first_codepoint(std::string_view s) {
    if (s.empty()) return 0;
    const auto b0 = static_cast<unsigned char>(s[0]);
    if (b0 < 0x80) return b0;
    int extra = b0 >= 0xF0 ? 3 : b0 >= 0xE0 ? 2 : 1;
    std::uint32_t cp = b0 & (0x3F >> extra);
    for (int k = 1; k <= extra && k < static_cast<int>(s.size()); ++k) cp = (cp << 6) | (static_cast<unsigned char>(s[k]) & 0x3F);
    return cp;
}

// Mirrors tree-sitter's own node-to-string output: named and missing nodes
// print as "(kind ...)" with "field: " prefixes, anonymous tokens are
// omitted, and error leaves print as "(UNEXPECTED 'c')".
inline void write_sexp(const SyntaxTree& t, std::uint32_t i, bool is_root, const std::string& inherited_field,
                       std::string& out) {
    const auto& n = t.nodes[i];
    const bool visible = n.named || n.missing;
    const std::string& field = n.field.empty() ? inherited_field : n.field;
    if (visible) {
        if (!is_root) {
            out += ' ';
            if (!field.empty()) out += field + ": ";
        }
        if (n.kind == "ERROR" && n.children.empty() && n.end_byte > n.start_byte) {
            out += "(UNEXPECTED ";
            write_char(out, first_codepoint(t.text(i)));
        } else if (n.missing) {
            out += "(MISSING ";
            out += n.named ? n.kind : "\"" + n.kind + "\"";
        } else {
            out += "(" + n.kind;
        }
    } else if (is_root) {
        if (!n.children.empty()) out += "(" + n.kind;
        else out += "(\"" + n.kind + "\")";
    }
    static const std::string none;
    for (auto c : n.children) {
        const bool child_extra = t.nodes[c].extra;
        write_sexp(t, c, false, (visible || child_extra) ? none : field, out);
    }
    if (visible) out += ')';
}

} // namespace detail

/// Structural equality: same kinds, same shape, same leaf text. Comments
/// are ignored; whitespace is never part of the tree.
inline bool trees_equal(const SyntaxTree& a, const SyntaxTree& b) {
    const auto sa = strip_comments(a);
    const auto sb = strip_comments(b);
    if (sa.empty() || sb.empty()) return sa.empty() == sb.empty();
    return detail::nodes_equal(sa, 0, sb, 0);
}

/// S-expression of the subtree rooted at node i.
inline std::string sexp(const SyntaxTree& t, std::uint32_t i = 0) {
    std::string out;
    detail::write_sexp(t, i, true, {}, out);
    return out;
}

/// One signature per subtree whose height is at least min_height (a leaf has
/// height 1), in pre-order. Leaf text never enters a signature.
inline std::vector<std::string> subtree_signatures(const SyntaxTree& t, std::uint32_t min_height = 2) {
    if (min_height == 0) throw error("min_height must be at least 1");
    std::vector<std::string> out;
    if (t.empty()) return out;
    std::vector<std::uint32_t> memo(t.nodes.size(), 0);
    for (std::uint32_t i = 0; i < t.nodes.size(); ++i) {
        if (detail::height(t, i, memo) >= min_height) out.push_back(sexp(t, i));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Code tokens

struct CodeToken {
    std::uint32_t node;
    std::string text;
};

namespace detail {

inline bool is_token_node(const SyntaxNode& n) {
    return (n.children.empty() || n.kind == "string_literal" || n.kind == "string" || n.kind == "character_literal") &&
           n.kind != "comment";
}

inline void collect_tokens(const SyntaxTree& t, std::uint32_t i, std::vector<CodeToken>& out) {
    const auto& n = t.nodes[i];
    if (is_token_node(n)) {
        std::string text;
        for (char ch : t.text(i)) {
            if (ch != '\n') text += ch;
        }
        out.push_back({i, std::move(text)});
        return;
    }
    for (auto c : n.children) collect_tokens(t, c, out);
}

} // namespace detail

/// Leaf tokens in document order. String literals count as one token and
/// comments are skipped. Newlines inside a token are dropped.
inline std::vector<CodeToken> code_tokens(const SyntaxTree& t) {
    std::vector<CodeToken> out;
    if (!t.empty()) detail::collect_tokens(t, 0, out);
    return out;
}

// ---------------------------------------------------------------------------
// Data flow

/// One variable occurrence and where its value comes from.
struct DataFlowEntry {
    std::string name;
    int position = 0; // token index
    std::string relation; // "comesFrom" or "computedFrom"
    std::vector<std::string> parent_names;
    std::vector<int> parent_positions;

    bool operator==(const DataFlowEntry&) const = default;
};

struct DataFlowGraph {
    std::vector<DataFlowEntry> entries;

    std::size_t edge_count() const {
        std::size_t n = 0;
        for (const auto& e : entries) n += e.parent_positions.size();
        return n;
    }
};

namespace detail {

// Port of the lightweight def-use walk used by the reference CodeBLEU
// scorer: the same node kinds, visiting order, state merging and loop
// double visits. Any structural surprise aborts the walk and yields an
// empty graph, as the reference does.
class DataFlowWalker {
  public:
    using States = std::map<std::string, std::vector<int>>;
    using Entries = std::vector<DataFlowEntry>;
    struct Abort {};

    DataFlowWalker(const SyntaxTree& t, LanguageId lang) : t_(t), lang_(lang) {
        const auto toks = code_tokens(t);
        for (std::size_t k = 0; k < toks.size(); ++k) {
            index_[key(toks[k].node)] = {static_cast<int>(k), toks[k].text};
        }
    }

    Entries run() {
        if (t_.empty()) return {};
        try {
            States s;
            auto [dfg, _] = walk(0, s);
            return dfg;
        } catch (const Abort&) {
            return {};
        }
    }

  private:
    using Key = std::array<std::uint32_t, 4>;

    Key key(std::uint32_t i) const {
        const auto& n = t_.nodes[i];
        return {n.start.row, n.start.column, n.end.row, n.end.column};
    }

    const std::pair<int, std::string>& lookup(std::uint32_t i) const {
        auto it = index_.find(key(i));
        if (it == index_.end()) throw Abort{};
        return it->second;
    }

    std::uint32_t need(std::optional<std::uint32_t> n) const {
        if (!n) throw Abort{};
        return *n;
    }

    void variables(std::uint32_t i, std::vector<std::uint32_t>& out) const {
        const auto& n = t_.nodes[i];
        if (is_token_node(n)) {
            if (n.kind != lookup(i).second) out.push_back(i);
            return;
        }
        for (auto c : n.children) variables(c, out);
    }
    std::vector<std::uint32_t> variables(std::uint32_t i) const {
        std::vector<std::uint32_t> out;
        variables(i, out);
        return out;
    }

    static void sort_by_pos(Entries& e) {
        std::stable_sort(e.begin(), e.end(), [](const auto& a, const auto& b) { return a.position < b.position; });
    }

    static void append(Entries& dst, const Entries& src) { dst.insert(dst.end(), src.begin(), src.end()); }

    // Loops are walked twice; collapse repeats of (name, position, relation).
    // The reference keeps merged name lists in Python set order, which is
    // hash dependent; sorting gives equal sets equal lists, as a set would
    // in nearly every run.
    static void set_union_into(std::vector<std::string>& into, const std::vector<std::string>& more) {
        into.insert(into.end(), more.begin(), more.end());
        std::sort(into.begin(), into.end());
        into.erase(std::unique(into.begin(), into.end()), into.end());
    }

    static Entries dedupe(const Entries& in) {
        Entries out;
        std::map<std::tuple<std::string, int, std::string>, std::size_t> seen;
        for (const auto& e : in) {
            auto k = std::make_tuple(e.name, e.position, e.relation);
            auto it = seen.find(k);
            if (it == seen.end()) {
                seen.emplace(k, out.size());
                out.push_back(e);
                continue;
            }
            auto& d = out[it->second];
            set_union_into(d.parent_names, e.parent_names);
            d.parent_positions.insert(d.parent_positions.end(), e.parent_positions.begin(), e.parent_positions.end());
            std::sort(d.parent_positions.begin(), d.parent_positions.end());
            d.parent_positions.erase(std::unique(d.parent_positions.begin(), d.parent_positions.end()), d.parent_positions.end());
        }
        sort_by_pos(out);
        return out;
    }

    static States merge_states(const std::vector<States>& all) {
        States out;
        for (const auto& s : all) {
            for (const auto& [k, v] : s) out[k].insert(out[k].end(), v.begin(), v.end());
        }
        for (auto& [k, v] : out) {
            std::sort(v.begin(), v.end());
            v.erase(std::unique(v.begin(), v.end()), v.end());
        }
        return out;
    }

    // name := every variable of `value`
    void link(std::uint32_t name_node, std::uint32_t value_node, const char* rel, Entries& dfg, States& states) const {
        const auto names = variables(name_node);
        const auto values = variables(value_node);
        for (auto n1 : names) {
            const auto& [idx1, code1] = lookup(n1);
            for (auto n2 : values) {
                const auto& [idx2, code2] = lookup(n2);
                dfg.push_back({code1, idx1, rel, {code2}, {idx2}});
            }
            states[code1] = {idx1};
        }
    }

    bool in(std::string_view kind, std::initializer_list<std::string_view> set) const {
        return std::find(set.begin(), set.end(), kind) != set.end();
    }

    std::pair<Entries, States> walk(std::uint32_t i, States states) {
        return lang_ == LanguageId::python ? walk_python(i, std::move(states)) : walk_c_family(i, std::move(states));
    }

    std::pair<Entries, States> leaf(std::uint32_t i, States states) const {
        const auto& n = t_.nodes[i];
        const auto& [idx, code] = lookup(i);
        if (n.kind == code) return {{}, states};
        if (auto it = states.find(code); it != states.end()) {
            return {{{code, idx, "comesFrom", {code}, it->second}}, states};
        }
        if (n.kind == "identifier") states[code] = {idx};
        return {{{code, idx, "comesFrom", {}, {}}}, states};
    }

    std::pair<Entries, States> walk_children(std::uint32_t i, States states) {
        Entries dfg;
        for (auto c : t_.nodes[i].children) {
            auto [d, s] = walk(c, std::move(states));
            append(dfg, d);
            states = std::move(s);
        }
        sort_by_pos(dfg);
        return {dfg, states};
    }

    // ---- Java, JavaScript, and C (which the reference scores with its C# rules)
    std::pair<Entries, States> walk_c_family(std::uint32_t i, States states) {
        const auto& n = t_.nodes[i];
        const auto& kind = n.kind;
        if (is_token_node(n)) return leaf(i, std::move(states));

        const bool is_java = lang_ == LanguageId::java;
        const bool is_js = lang_ == LanguageId::javascript;
        const bool is_csharp_rules = lang_ == LanguageId::c;

        const bool is_assignment = is_js ? in(kind, {"assignment_pattern", "augmented_assignment_expression"})
                                         : kind == "assignment_expression";
        const bool is_increment = is_csharp_rules ? kind == "postfix_unary_expression" : kind == "update_expression";
        const bool is_if = kind == "if_statement" || kind == "else";
        const bool is_enhanced_for = (is_java && kind == "enhanced_for_statement") ||
                                     (is_csharp_rules && kind == "for_each_statement");

        if (kind == "variable_declarator") {
            std::optional<std::uint32_t> name, value;
            if (is_csharp_rules) {
                if (n.children.empty()) throw Abort{};
                name = n.children[0];
                if (n.children.size() == 2) value = n.children[1];
            } else {
                name = need(t_.child_by_field(i, "name"));
                value = t_.child_by_field(i, "value");
            }
            Entries dfg;
            if (!value) {
                for (auto v : variables(*name)) {
                    const auto& [idx, code] = lookup(v);
                    dfg.push_back({code, idx, "comesFrom", {}, {}});
                    states[code] = {idx};
                }
                sort_by_pos(dfg);
                return {dfg, states};
            }
            auto [d, s] = walk(*value, std::move(states));
            states = std::move(s);
            append(dfg, d);
            link(*name, *value, "comesFrom", dfg, states);
            sort_by_pos(dfg);
            return {dfg, states};
        }
        if (is_assignment) {
            const auto left = need(t_.child_by_field(i, "left"));
            const auto right = need(t_.child_by_field(i, "right"));
            Entries dfg;
            auto [d, s] = walk(right, std::move(states));
            states = std::move(s);
            append(dfg, d);
            link(left, right, "computedFrom", dfg, states);
            sort_by_pos(dfg);
            return {dfg, states};
        }
        if (is_increment) {
            Entries dfg;
            const auto vars = variables(i);
            for (auto a : vars) {
                const auto& [idx1, code1] = lookup(a);
                for (auto b : vars) {
                    const auto& [idx2, code2] = lookup(b);
                    dfg.push_back({code1, idx1, "computedFrom", {code2}, {idx2}});
                }
                states[code1] = {idx1};
            }
            sort_by_pos(dfg);
            return {dfg, states};
        }
        if (is_if) {
            Entries dfg;
            States current = states;
            std::vector<States> others;
            bool flag = false;
            bool tag = kind.find("else") != std::string::npos;
            for (auto c : n.children) {
                const auto& ck = t_.nodes[c].kind;
                if (ck.find("else") != std::string::npos) tag = true;
                const bool c_is_if = ck == "if_statement" || ck == "else";
                if (!c_is_if && !flag) {
                    auto [d, s] = walk(c, std::move(current));
                    append(dfg, d);
                    current = std::move(s);
                } else {
                    flag = true;
                    auto [d, s] = walk(c, states);
                    append(dfg, d);
                    others.push_back(std::move(s));
                }
            }
            others.push_back(current);
            if (!tag) others.push_back(states);
            if (is_js) others.push_back(states);
            sort_by_pos(dfg);
            return {dfg, merge_states(others)};
        }
        if (kind == "for_statement") {
            Entries dfg;
            for (auto c : n.children) {
                auto [d, s] = walk(c, std::move(states));
                append(dfg, d);
                states = std::move(s);
            }
            const std::string_view decl = is_js ? "variable_declaration" : "local_variable_declaration";
            bool flag = false;
            for (auto c : n.children) {
                if (flag) {
                    auto [d, s] = walk(c, std::move(states));
                    append(dfg, d);
                    states = std::move(s);
                } else if (t_.nodes[c].kind == decl) {
                    flag = true;
                }
            }
            return {dedupe(dfg), states};
        }
        if (is_enhanced_for) {
            const auto name = need(t_.child_by_field(i, is_java ? "name" : "left"));
            const auto value = need(t_.child_by_field(i, is_java ? "value" : "right"));
            const auto body = need(t_.child_by_field(i, "body"));
            Entries dfg;
            for (int round = 0; round < 2; ++round) {
                auto [d, s] = walk(value, std::move(states));
                append(dfg, d);
                states = std::move(s);
                link(name, value, "computedFrom", dfg, states);
                auto [d2, s2] = walk(body, std::move(states));
                append(dfg, d2);
                states = std::move(s2);
            }
            return {dedupe(dfg), states};
        }
        if (kind == "while_statement") {
            Entries dfg;
            for (int round = 0; round < 2; ++round) {
                for (auto c : n.children) {
                    auto [d, s] = walk(c, std::move(states));
                    append(dfg, d);
                    states = std::move(s);
                }
            }
            return {dedupe(dfg), states};
        }
        return walk_children(i, std::move(states));
    }

    // ---- Python
    std::vector<std::uint32_t> non_comma_children(std::uint32_t i) const {
        std::vector<std::uint32_t> out;
        for (auto c : t_.nodes[i].children) {
            if (t_.nodes[c].kind != ",") out.push_back(c);
        }
        return out;
    }

    void pair_sides(std::uint32_t left, std::uint32_t right, std::vector<std::uint32_t>& lefts,
                    std::vector<std::uint32_t>& rights) const {
        lefts = non_comma_children(left);
        rights = non_comma_children(right);
        if (lefts.size() != rights.size()) {
            lefts = {left};
            rights = {right};
        }
        if (lefts.empty()) lefts = {left};
        if (rights.empty()) rights = {right};
    }

    void zip_assign(const std::vector<std::uint32_t>& lefts, const std::vector<std::uint32_t>& rights, Entries& dfg,
                    States& states) const {
        for (std::size_t k = 0; k < std::min(lefts.size(), rights.size()); ++k) {
            const auto rvars = variables(rights[k]);
            std::vector<std::string> names;
            std::vector<int> poss;
            for (auto r : rvars) {
                names.push_back(lookup(r).second);
                poss.push_back(lookup(r).first);
            }
            for (auto l : variables(lefts[k])) {
                const auto& [idx1, code1] = lookup(l);
                dfg.push_back({code1, idx1, "computedFrom", names, poss});
                states[code1] = {idx1};
            }
        }
    }

    std::pair<Entries, States> walk_python(std::uint32_t i, States states) {
        const auto& n = t_.nodes[i];
        const auto& kind = n.kind;
        if (is_token_node(n)) return leaf(i, std::move(states));

        if (kind == "default_parameter") {
            const auto name = need(t_.child_by_field(i, "name"));
            const auto value = t_.child_by_field(i, "value");
            Entries dfg;
            if (!value) {
                for (auto v : variables(name)) {
                    const auto& [idx, code] = lookup(v);
                    dfg.push_back({code, idx, "comesFrom", {}, {}});
                    states[code] = {idx};
                }
                sort_by_pos(dfg);
                return {dfg, states};
            }
            auto [d, s] = walk(*value, std::move(states));
            states = std::move(s);
            append(dfg, d);
            link(name, *value, "comesFrom", dfg, states);
            sort_by_pos(dfg);
            return {dfg, states};
        }
        if (kind == "assignment" || kind == "augmented_assignment" || kind == "for_in_clause") {
            std::vector<std::uint32_t> lefts, rights;
            if (kind == "for_in_clause") {
                if (n.children.empty()) throw Abort{};
                rights = {n.children.back()};
                lefts = {need(t_.child_by_field(i, "left"))};
            } else {
                const auto right = t_.child_by_field(i, "right");
                if (!right) return {{}, states};
                pair_sides(need(t_.child_by_field(i, "left")), *right, lefts, rights);
            }
            Entries dfg;
            for (auto r : rights) {
                auto [d, s] = walk(r, std::move(states));
                append(dfg, d);
                states = std::move(s);
            }
            zip_assign(lefts, rights, dfg, states);
            sort_by_pos(dfg);
            return {dfg, states};
        }
        if (kind == "if_statement") {
            Entries dfg;
            States current = states;
            std::vector<States> others;
            bool tag = false;
            for (auto c : n.children) {
                const auto& ck = t_.nodes[c].kind;
                if (ck.find("else") != std::string::npos) tag = true;
                if (ck != "elif_clause" && ck != "else_clause") {
                    auto [d, s] = walk(c, std::move(current));
                    append(dfg, d);
                    current = std::move(s);
                } else {
                    auto [d, s] = walk(c, states);
                    append(dfg, d);
                    others.push_back(std::move(s));
                }
            }
            others.push_back(current);
            if (!tag) others.push_back(states);
            sort_by_pos(dfg);
            return {dfg, merge_states(others)};
        }
        if (kind == "for_statement") {
            Entries dfg;
            for (int round = 0; round < 2; ++round) {
                std::vector<std::uint32_t> lefts, rights;
                pair_sides(need(t_.child_by_field(i, "left")), need(t_.child_by_field(i, "right")), lefts, rights);
                for (auto r : rights) {
                    auto [d, s] = walk(r, std::move(states));
                    append(dfg, d);
                    states = std::move(s);
                }
                zip_assign(lefts, rights, dfg, states);
                if (!n.children.empty() && t_.nodes[n.children.back()].kind == "block") {
                    auto [d, s] = walk(n.children.back(), std::move(states));
                    append(dfg, d);
                    states = std::move(s);
                }
            }
            return {dedupe(dfg), states};
        }
        if (kind == "while_statement") {
            Entries dfg;
            for (int round = 0; round < 2; ++round) {
                for (auto c : n.children) {
                    auto [d, s] = walk(c, std::move(states));
                    append(dfg, d);
                    states = std::move(s);
                }
            }
            return {dedupe(dfg), states};
        }
        // comprehension clauses bind before the expression that uses them
        Entries dfg;
        for (auto c : n.children) {
            if (t_.nodes[c].kind == "for_in_clause") {
                auto [d, s] = walk(c, std::move(states));
                append(dfg, d);
                states = std::move(s);
            }
        }
        for (auto c : n.children) {
            if (t_.nodes[c].kind != "for_in_clause") {
                auto [d, s] = walk(c, std::move(states));
                append(dfg, d);
                states = std::move(s);
            }
        }
        sort_by_pos(dfg);
        return {dfg, states};
    }

    const SyntaxTree& t_;
    LanguageId lang_;
    std::map<Key, std::pair<int, std::string>> index_;
};

} // namespace detail

/// Def-use entries for the fragment, after the same post-processing the
/// reference scorer applies: sorted by position, restricted to positions
/// that take part in at least one edge, and merged per position.
inline DataFlowGraph extract_dataflow(const SyntaxTree& tree, LanguageId lang) {
    const auto stripped = strip_comments(tree);
    auto raw = detail::DataFlowWalker(stripped, lang).run();
    std::stable_sort(raw.begin(), raw.end(), [](const auto& a, const auto& b) { return a.position < b.position; });
    std::vector<int> linked;
    for (const auto& e : raw) {
        if (!e.parent_positions.empty()) linked.push_back(e.position);
        linked.insert(linked.end(), e.parent_positions.begin(), e.parent_positions.end());
    }
    std::sort(linked.begin(), linked.end());
    DataFlowGraph g;
    std::map<int, std::size_t> at;
    for (const auto& e : raw) {
        if (!std::binary_search(linked.begin(), linked.end(), e.position)) continue;
        auto it = at.find(e.position);
        if (it == at.end()) {
            at.emplace(e.position, g.entries.size());
            g.entries.push_back(e);
            continue;
        }
        // A merge turns both parent lists into sets (kept sorted here).
        auto& d = g.entries[it->second];
        auto merge = [](auto& into, const auto& more) {
            into.insert(into.end(), more.begin(), more.end());
            std::sort(into.begin(), into.end());
            into.erase(std::unique(into.begin(), into.end()), into.end());
        };
        merge(d.parent_names, e.parent_names);
        merge(d.parent_positions, e.parent_positions);
    }
    return g;
}

/// Renames variables to var_0, var_1, ... in order of first appearance
/// (parents before the variable itself), so graphs over different names can
/// be compared.
struct NormalizedFlow {
    std::string var;
    std::string relation;
    std::vector<std::string> parents;
    bool operator==(const NormalizedFlow&) const = default;
};

inline std::vector<NormalizedFlow> normalize_dataflow(const DataFlowGraph& g) {
    std::map<std::string, std::string> names;
    auto name_of = [&](const std::string& v) -> const std::string& {
        auto it = names.find(v);
        if (it == names.end()) it = names.emplace(v, "var_" + std::to_string(names.size())).first;
        return it->second;
    };
    std::vector<NormalizedFlow> out;
    for (const auto& e : g.entries) {
        NormalizedFlow f;
        for (const auto& p : e.parent_names) name_of(p);
        f.var = name_of(e.name);
        f.relation = e.relation;
        for (const auto& p : e.parent_names) f.parents.push_back(name_of(p));
        out.push_back(std::move(f));
    }
    return out;
}

} // namespace patchbench
