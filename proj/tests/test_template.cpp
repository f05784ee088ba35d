#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace patchbench;

namespace {

// Basic prompt rows, hard and soft columns.
const std::vector<std::string> hard_rows{
    "[X] [mask] is fixed program",
    "[X] fixed program is [mask]",
    "Fix bug in [X] [mask]",
    "Fix [X] fixed program is [mask]",
    "Fix [X] [mask] is fixed program",
    "[X] is buggy program [mask] is fixed program",
    "Fix [X] is buggy program [mask] is fixed program",
};
const std::vector<std::string> soft_rows{
    "[X] [mask] [SOFT] * 3",
    "[X] [SOFT] * 3 [mask]",
    "[SOFT] * 3 [X] [mask]",
    "[SOFT] [X] [SOFT] * 3 [mask]",
    "[SOFT] [X] [mask] [SOFT] * 3",
    "[X] [SOFT] * 3 [mask] [SOFT] * 3",
    "[SOFT] [X] [SOFT] * 3 [mask] [SOFT] * 3",
};

RepairInstance inst(const std::string& buggy, std::map<KnowledgeKind, std::string> k = {}) {
    RepairInstance r;
    r.id = "i1";
    r.buggy_code = buggy;
    r.fixed_code = "y";
    r.knowledge = std::move(k);
    return r;
}

PromptTemplate builtin(const std::string& id, ModelStyle style = ModelStyle::infilling) {
    auto t = find_builtin(id, style);
    if (!t) throw std::runtime_error("no builtin " + id);
    return *t;
}

} // namespace

TEST(Dsl, FixBugIn) {
    const auto t = parse_template("Fix bug in {X} {MASK}");
    ASSERT_EQ(t.segments.size(), 3u);
    EXPECT_EQ(std::get<Literal>(t.segments[0]).text, "Fix bug in ");
    EXPECT_TRUE(std::holds_alternative<InputSlot>(t.segments[1]));
    EXPECT_TRUE(std::holds_alternative<MaskSlot>(t.segments[2]));
    EXPECT_EQ(t.kind, TemplateKind::hbp);
}

TEST(Dsl, SoftRun) {
    const auto t = parse_template("{X} {SOFT*3} {MASK}");
    ASSERT_EQ(t.segments.size(), 5u);
    for (std::size_t i = 0; i < 3; ++i) {
        const auto& s = std::get<SoftSlot>(t.segments[i + 1]);
        EXPECT_EQ(s.index, i);
        EXPECT_FALSE(s.init);
    }
    EXPECT_EQ(t.kind, TemplateKind::sbp_random);
}

TEST(Dsl, Errors) {
    EXPECT_THROW(parse_template("{X} {MASK} {MASK}"), template_parse_error);
    EXPECT_THROW(parse_template("{X} {X} {MASK}"), template_parse_error);
    EXPECT_THROW(parse_template("{X} is fixed"), template_parse_error);
    EXPECT_THROW(parse_template("#kind=sbp_random\n{X} {SOFT:\"fix\"} {MASK}"), template_parse_error);
    EXPECT_THROW(parse_template("#kind=hbp\n{X} {SOFT} {MASK}"), template_parse_error);
    EXPECT_THROW(parse_template("{X} {K:mood} {MASK}"), template_parse_error);
    try {
        parse_template("{X} {MASK} {MASK}");
    } catch (const template_parse_error& e) {
        EXPECT_EQ(e.token(), "{MASK}");
    }
}

TEST(Dsl, HeaderSetsIdAndStyle) {
    const auto t = parse_template("#kind=kp_hard style=generative id=mine\nfix {X} given {K:bug_type} answer {MASK}");
    EXPECT_EQ(t.id, "mine");
    EXPECT_EQ(t.kind, TemplateKind::kp_hard);
    EXPECT_EQ(t.model_style, ModelStyle::generative);
}

TEST(Builtins, BasicRowsVerbatim) {
    for (auto style : {ModelStyle::infilling, ModelStyle::generative}) {
        const auto bp = builtin_templates(TemplateSet::bp, style);
        ASSERT_EQ(bp.size(), 21u);
        for (std::size_t i = 0; i < 7; ++i) {
            EXPECT_EQ(render_table(bp[i]), hard_rows[i]);
            EXPECT_EQ(bp[i].kind, TemplateKind::hbp);
            EXPECT_EQ(render_table(bp[7 + i]), soft_rows[i]);
            EXPECT_EQ(bp[7 + i].kind, TemplateKind::sbp_initialized);
            EXPECT_EQ(render_table(bp[14 + i]), soft_rows[i]);
            EXPECT_EQ(bp[14 + i].kind, TemplateKind::sbp_random);
        }
    }
}

TEST(Builtins, SoftInitsCopyHardWords) {
    const auto t = builtin("SBP1-init");
    std::vector<std::string> inits;
    for (const auto& s : t.segments) {
        if (const auto* soft = std::get_if<SoftSlot>(&s)) inits.push_back(soft->init.value_or("?"));
    }
    EXPECT_EQ(inits, (std::vector<std::string>{"is", "fixed", "program"}));
}

TEST(Builtins, KnowledgeMaskPlacementText) {
    EXPECT_EQ(render_table(builtin("KP-repair_action-hard", ModelStyle::infilling)),
              "Please fix a buggy program [X] by taking repair actions [repairAction] [mask] is the fixed version");
    EXPECT_EQ(render_table(builtin("KP-repair_action-hard", ModelStyle::generative)),
              "Please fix a buggy program [X] by taking repair actions [repairAction] the fixed version is [mask]");
    EXPECT_EQ(render_table(builtin("KP-bug_type-hard", ModelStyle::infilling)),
              "Please fix a buggy program [X] the bug type is [bugType] [mask] is the fixed version");
    EXPECT_EQ(render_table(builtin("KP-repair_pattern-hard", ModelStyle::generative)),
              "Please fix a buggy program [X] by following repair patterns [repairPattern] the fixed version is [mask]");
}

TEST(Builtins, KnowledgeMaskPositionPerStyle) {
    std::map<KnowledgeKind, std::string> all;
    for (auto k : all_knowledge_kinds) all[k] = "k";
    for (auto style : {ModelStyle::infilling, ModelStyle::generative}) {
        const auto kp = builtin_templates(TemplateSet::kp, style);
        EXPECT_EQ(kp.size(), 20u);
        for (const auto& t : kp) {
            const auto cp = instantiate(t, inst("x", all));
            EXPECT_EQ(cp.mask_position, style == ModelStyle::generative ? MaskPosition::final : MaskPosition::internal) << t.id;
        }
    }
}

TEST(Builtins, FrozenGolden) {
    const auto g = pbtest::load_json(pbtest::test_dir() / "golden/builtin_templates.json");
    for (auto style : {ModelStyle::infilling, ModelStyle::generative}) {
        const auto all = all_builtin_templates(style);
        const auto& rows = g.at(std::string(to_string(style)));
        ASSERT_EQ(all.size(), rows.size());
        for (std::size_t i = 0; i < all.size(); ++i) {
            EXPECT_EQ(all[i].id, rows[i]["id"]);
            EXPECT_EQ(std::string(to_string(all[i].kind)), rows[i]["kind"]);
            EXPECT_EQ(render_table(all[i]), rows[i]["table"]);
        }
    }
}

TEST(Builtins, DslRoundTrip) {
    for (auto style : {ModelStyle::infilling, ModelStyle::generative}) {
        for (const auto& t : all_builtin_templates(style)) {
            auto back = parse_template(to_dsl(t, true));
            EXPECT_EQ(back.segments, t.segments) << t.id;
            EXPECT_EQ(back.kind, t.kind) << t.id;
            EXPECT_EQ(back.id, t.id);
        }
    }
}

TEST(Instantiate, BasicPromptThree) {
    const auto cp = instantiate(builtin("HBP3"), inst("return a - b ;"));
    ASSERT_EQ(cp.segments.size(), 3u);
    EXPECT_EQ(std::get<CompiledLiteral>(cp.segments[0]).text, "Fix bug in ");
    EXPECT_EQ(std::get<CompiledLiteral>(cp.segments[1]).text, "return a - b ;");
    EXPECT_TRUE(std::holds_alternative<MaskSlot>(cp.segments[2]));
    EXPECT_EQ(render_debug(instantiate(builtin("HBP3"), inst("x=1"))), "Fix bug in x=1 [MASK]");
}

TEST(Instantiate, SoftRender) {
    const auto cp = instantiate(builtin("SBP2-rand"), inst("{input}"));
    EXPECT_EQ(render_debug(cp), "{input} [SOFT:0] [SOFT:1] [SOFT:2] [MASK]");
    EXPECT_EQ(cp.soft_table.size(), 3u);
}

TEST(Instantiate, KnowledgeVerbatim) {
    const std::string actions = "condBranchAdd exThrowsAdd objInstAdd";
    const auto cp = instantiate(builtin("KP-repair_action-hard"), inst("a();", {{KnowledgeKind::repair_action, actions}}));
    const auto text = render_debug(cp);
    EXPECT_NE(text.find("by taking repair actions " + actions + " [MASK]"), std::string::npos) << text;
}

TEST(Instantiate, MissingKnowledgeNamesKind) {
    try {
        instantiate(builtin("KP-bug_type-hard"), inst("a();"));
        FAIL();
    } catch (const instantiation_error& e) {
        EXPECT_NE(std::string(e.what()).find("bug_type"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("i1"), std::string::npos);
    }
}

TEST(Instantiate, ByteIdenticalSubstitution) {
    const std::string code = "  x\t=  \"é\" ;\r\n\n";
    const auto cp = instantiate(builtin("HBP1"), inst(code));
    EXPECT_EQ(cp.input_text(), code);
    EXPECT_FALSE(cp.truncated);
}

TEST(Instantiate, BudgetCutsOnlyTheInputTail) {
    const std::string code(100, 'a');
    const auto cp = instantiate(builtin("HBP3"), inst(code), 50);
    EXPECT_TRUE(cp.truncated);
    EXPECT_EQ(std::get<CompiledLiteral>(cp.segments[0]).text, "Fix bug in ");
    EXPECT_EQ(cp.input_text().size(), 50u - std::string("Fix bug in ").size());
}

TEST(Instantiate, JsonWireForm) {
    const auto cp = instantiate(builtin("SBP4-init"), inst("q;"));
    const json j = cp;
    EXPECT_EQ(j.at("instance_id"), "i1");
    EXPECT_EQ(j.at("segments")[0].at("t"), "soft");
    EXPECT_EQ(j.at("segments")[0].at("init"), "Fix");
    EXPECT_EQ(j.at("truncated"), false);
    EXPECT_EQ(j.get<CompiledPrompt>(), cp);
}

TEST(Style, MaskPositionWarnings) {
    EXPECT_EQ(validate_for_style(builtin("HBP1"), ModelStyle::generative).size(), 1u);
    EXPECT_TRUE(validate_for_style(builtin("HBP2"), ModelStyle::generative).empty());
    for (const auto& t : builtin_templates(TemplateSet::bp, ModelStyle::infilling)) {
        EXPECT_TRUE(validate_for_style(t, ModelStyle::infilling).empty());
    }
}
