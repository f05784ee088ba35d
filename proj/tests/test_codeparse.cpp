#include <gtest/gtest.h>

#include <future>

#include "test_support.hpp"

using namespace patchbench;

TEST(Parse, RootKinds) {
    EXPECT_EQ(parse("class A { void f() {} }", LanguageId::java).root().kind, "program");
    EXPECT_EQ(parse("def f():\n    return 1\n", LanguageId::python).root().kind, "module");
    EXPECT_EQ(parse("function f() { return 1; }", LanguageId::javascript).root().kind, "program");
    EXPECT_EQ(parse("int f(void) { return 1; }", LanguageId::c).root().kind, "translation_unit");
}

TEST(Parse, SexpShape) {
    EXPECT_EQ(sexp(parse("x = a + b\n", LanguageId::python)),
              "(module (expression_statement (assignment left: (identifier) right: (binary_operator left: (identifier) "
              "right: (identifier)))))");
}

TEST(Parse, ErrorsAreCounted) {
    EXPECT_TRUE(parse("int f( {", LanguageId::java).has_errors());
    EXPECT_TRUE(parse("def f(:\n", LanguageId::python).has_errors());
    EXPECT_FALSE(parse("int f(void) { return 0; }", LanguageId::c).has_errors());
}

TEST(Parse, SnippetWrappersHideTheirNodes) {
    // a lone catch clause only parses inside a try statement
    EXPECT_TRUE(parse("catch (E e) { f(); }", LanguageId::java).has_errors());
    const auto t = parse_snippet("catch (E e) { f(); }", LanguageId::java);
    EXPECT_FALSE(t.has_errors());
    EXPECT_FALSE(t.wrapper.empty());
    EXPECT_EQ(t.source, "catch (E e) { f(); }");
    for (const auto& n : t.nodes) EXPECT_LE(n.end_byte, t.source.size());
    const auto c = parse_snippet("x = a + b;", LanguageId::c);
    EXPECT_FALSE(c.has_errors());
}

TEST(Parse, TreesIgnoreLayout) {
    const auto a = parse("int f(int a){return a+1;}", LanguageId::c);
    const auto b = parse("int f(int a)\n{\n    return a + 1;\n}\n", LanguageId::c);
    const auto d = parse("int f(int a){return a-1;}", LanguageId::c);
    EXPECT_TRUE(trees_equal(a, b));
    EXPECT_FALSE(trees_equal(a, d));
    const auto p1 = parse("if x:\n    y = 1\n", LanguageId::python);
    const auto p2 = parse("if x:\n        y=1\n", LanguageId::python);
    EXPECT_TRUE(trees_equal(p1, p2));
}

TEST(Parse, IdentifierTextMatters) {
    EXPECT_FALSE(trees_equal(parse("let a = b;", LanguageId::javascript), parse("let a = c;", LanguageId::javascript)));
}

TEST(Parse, CommentsStripped) {
    const auto with = strip_comments(parse("let x = 1; // hi\n/* c */ x++;", LanguageId::javascript));
    const auto without = parse("let x = 1;\nx++;", LanguageId::javascript);
    EXPECT_TRUE(trees_equal(with, without));
}

TEST(Parse, Tokens) {
    std::vector<std::string> toks;
    for (const auto& t : code_tokens(parse("let x = 1; x++;", LanguageId::javascript))) toks.push_back(t.text);
    EXPECT_EQ(toks, (std::vector<std::string>{"let", "x", "=", "1", ";", "x", "++", ";"}));
    std::vector<std::string> str;
    for (const auto& t : code_tokens(parse("s = \"a b\"\n", LanguageId::python))) str.push_back(t.text);
    EXPECT_EQ(str, (std::vector<std::string>{"s", "=", "\"a b\""}));
}

TEST(Parse, SignaturesSkipLeaves) {
    const auto t = parse("let x = 1; x++;", LanguageId::javascript);
    const auto sigs = subtree_signatures(t);
    EXPECT_EQ(sigs.size(), 5u);
    for (const auto& s : sigs) EXPECT_NE(s, "(identifier)");
    EXPECT_GT(subtree_signatures(t, 1).size(), sigs.size());
}

TEST(Parse, ConcurrentParsesAgree) {
    pbtest::ProgramGen gen(3);
    std::vector<std::string> programs;
    for (int i = 0; i < 32; ++i) programs.push_back(gen.program(LanguageId::java));
    std::vector<std::string> serial;
    for (const auto& p : programs) serial.push_back(sexp(parse(p, LanguageId::java)));
    std::vector<std::future<std::string>> futs;
    for (const auto& p : programs) futs.push_back(std::async(std::launch::async, [&p] { return sexp(parse(p, LanguageId::java)); }));
    for (std::size_t i = 0; i < futs.size(); ++i) EXPECT_EQ(futs[i].get(), serial[i]);
}

TEST(DataFlow, PythonAssignment) {
    const auto t = parse("x = a + b\n", LanguageId::python);
    const auto flows = normalize_dataflow(extract_dataflow(t, LanguageId::python));
    ASSERT_FALSE(flows.empty());
    EXPECT_EQ(flows[0].var, "var_2");
    EXPECT_EQ(flows[0].relation, "computedFrom");
    EXPECT_EQ(flows[0].parents, (std::vector<std::string>{"var_0", "var_1"}));
}

TEST(DataFlow, RenamingInvariant) {
    for (auto lang : all_languages) {
        pbtest::ProgramGen gen(11);
        const auto code = gen.program(lang);
        std::string renamed = code;
        // x and y are locals in every generated program
        for (auto& ch : renamed) {
            if (ch == 'x') ch = 'q';
        }
        const auto a = normalize_dataflow(extract_dataflow(parse(code, lang), lang));
        const auto b = normalize_dataflow(extract_dataflow(parse(renamed, lang), lang));
        EXPECT_EQ(a, b) << code;
    }
}

TEST(DataFlow, JavaDeclarationChain) {
    const auto t = parse_snippet("int x = a; int y = x + 1;", LanguageId::java);
    const auto g = extract_dataflow(t, LanguageId::java);
    bool y_from_x = false;
    for (const auto& e : g.entries) {
        if (e.name == "y") {
            y_from_x = std::find(e.parent_names.begin(), e.parent_names.end(), "x") != e.parent_names.end();
        }
    }
    EXPECT_TRUE(y_from_x);
}
