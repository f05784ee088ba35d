#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "test_support.hpp"

using namespace patchbench;
using pbtest::test_dir;

namespace {

std::vector<RepairInstance> parse(const std::string& text, DatasetSchema schema = DatasetSchema::canonical) {
    std::istringstream in(text);
    return parse_dataset(in, schema);
}

std::vector<std::string> make_ids(std::size_t n, const std::string& prefix = "id") {
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) ids.push_back(prefix + std::to_string(i));
    return ids;
}

} // namespace

// --- loading

TEST(Dataset, CanonicalRoundTrip) {
    const auto items = parse(
        R"({"id":"a","language":"java","buggy":"x--;","fixed":"x++;","knowledge":{"bug_type":"CHANGE_UNARY_OPERATOR"}})"
        "\n\n"
        R"({"id":"b","language":"python","buggy":"x = 1","fixed":"x = 2","dataset":"mine"})"
        "\n");
    ASSERT_EQ(items.size(), 2u);
    EXPECT_EQ(items[0].knowledge.at(KnowledgeKind::bug_type), "CHANGE_UNARY_OPERATOR");
    EXPECT_EQ(items[1].language, LanguageId::python);
    EXPECT_EQ(items[1].source_dataset, "mine");
    std::ostringstream out;
    write_dataset(out, items);
    const auto again = parse(out.str());
    ASSERT_EQ(again.size(), 2u);
    EXPECT_EQ(again[0].fixed_code, "x++;");
    EXPECT_EQ(again[0].knowledge, items[0].knowledge);
}

TEST(Dataset, EmptyInputGivesEmptyList) { EXPECT_TRUE(parse("").empty()); }

TEST(Dataset, ManyBugsInPyRecords) {
    std::string text;
    for (int i = 0; i < 932; ++i) {
        text += json{{"id", "bip-" + std::to_string(i)}, {"buggy", "x = " + std::to_string(i)}, {"fixed", "x = -1"}}.dump() + "\n";
    }
    const auto items = parse(text, DatasetSchema::bugsinpy);
    ASSERT_EQ(items.size(), 932u);
    EXPECT_EQ(items[5].id, "bip-5");
    EXPECT_EQ(items[5].language, LanguageId::python);
}

TEST(Dataset, MissingFixedNamesTheLine) {
    const std::string text = R"({"id":"a","language":"java","buggy":"x;","fixed":"y;"})"
                             "\n"
                             R"({"id":"b","language":"java","buggy":"x;"})"
                             "\n";
    try {
        parse(text);
        FAIL() << "expected load_error";
    } catch (const load_error& e) {
        EXPECT_EQ(e.line(), 2u);
    }
}

TEST(Dataset, MalformedJsonNamesTheLine) {
    try {
        parse("{\"id\":1\n");
        FAIL();
    } catch (const load_error& e) {
        EXPECT_EQ(e.line(), 1u);
    }
}

TEST(Dataset, UnknownLanguageIsSchemaError) {
    EXPECT_THROW(parse(R"({"id":"a","language":"cobol","buggy":"x","fixed":"y"})"), schema_error);
    EXPECT_THROW(parse(R"({"apr_id":"a","lang":"Haskell","bug_source_code":"x","fix_source_code":"y"})", DatasetSchema::xcodeeval),
                 schema_error);
}

TEST(Dataset, DuplicateIdRejected) {
    EXPECT_THROW(parse("{\"id\":\"a\",\"language\":\"c\",\"buggy\":\"x\",\"fixed\":\"y\"}\n"
                       "{\"id\":\"a\",\"language\":\"c\",\"buggy\":\"x\",\"fixed\":\"z\"}\n"),
                 load_error);
}

TEST(Dataset, EmptyCodeRejected) {
    EXPECT_THROW(parse(R"({"id":"a","language":"c","buggy":"","fixed":"y"})"), load_error);
}

TEST(Dataset, AdapterKnowledgeMaps) {
    auto d4j = parse(R"({"bug_id":"Lang-1","buggy":"a","fix":"b","repair_actions":["ifAdd","mcRepl"],"repair_patterns":["wrapsIf"]})",
                     DatasetSchema::defects4j);
    EXPECT_EQ(d4j[0].id, "Lang-1");
    EXPECT_EQ(d4j[0].knowledge.at(KnowledgeKind::repair_action), "ifAdd mcRepl");
    EXPECT_EQ(d4j[0].knowledge.at(KnowledgeKind::repair_pattern), "wrapsIf");

    auto ms = parse(R"({"id":"s1","sourceBeforeFix":"a<b","sourceAfterFix":"a<=b","bugType":"CHANGE_OPERATOR","bugNodeAST":"InfixExpression"})",
                    DatasetSchema::manysstubs4j);
    EXPECT_EQ(ms[0].knowledge.at(KnowledgeKind::bug_type), "CHANGE_OPERATOR");
    EXPECT_EQ(ms[0].knowledge.at(KnowledgeKind::buggy_node_ast), "InfixExpression");

    auto tfix = parse(R"({"id":"t1","source_code":"var x","target_code":"let x","linter_report":{"rule_id":"no-var","message":"Unexpected var"}})",
                      DatasetSchema::tfix);
    EXPECT_EQ(tfix[0].language, LanguageId::javascript);
    EXPECT_EQ(tfix[0].knowledge.at(KnowledgeKind::bug_type), "no-var");
    EXPECT_EQ(tfix[0].knowledge.at(KnowledgeKind::error_message), "Unexpected var");

    auto xc = parse(R"({"apr_id":"x1","lang_cluster":"C","bug_source_code":"a","fix_source_code":"b","bug_exec_outcome":"WRONG_ANSWER","tags":["greedy","math"]})",
                    DatasetSchema::xcodeeval);
    EXPECT_EQ(xc[0].language, LanguageId::c);
    EXPECT_EQ(xc[0].knowledge.at(KnowledgeKind::error_message), "WRONG_ANSWER");
    EXPECT_EQ(xc[0].knowledge.at(KnowledgeKind::algorithm_tags), "greedy, math");
}

TEST(Dataset, SchemaNames) {
    for (auto s : all_schemas) EXPECT_EQ(parse_schema(to_string(s)), s);
    EXPECT_FALSE(parse_schema("bears"));
}

TEST(Dataset, KnowledgeKindsAreClosed) {
    EXPECT_EQ(all_knowledge_kinds.size(), 6u);
    EXPECT_FALSE(parse_knowledge_kind("commit_message"));
}

// --- hunks

TEST(Hunk, ThreeHunksRebuildTheAfterFile) {
    const auto before = read_file(test_dir() / "data/hunk_before.java");
    const auto after = read_file(test_dir() / "data/hunk_after.java");
    const auto diff = read_file(test_dir() / "data/hunk.diff");
    const auto items = extract_single_hunk(diff, before, LanguageId::java);
    ASSERT_EQ(items.size(), 3u);
    EXPECT_EQ(items[0].buggy_code, "    int v4 = compute(4);\n    int v5 = compute(5);\n    int v6 = compute(6);");
    EXPECT_EQ(items[0].fixed_code, "    int v4 = compute(4);\n    int v5 = compute(5) + 1;\n    int v6 = compute(6);");
    EXPECT_EQ(apply_hunks(before, items), after);
    std::set<std::string> ids;
    for (const auto& i : items) ids.insert(i.id);
    EXPECT_EQ(ids.size(), 3u);
}

TEST(Hunk, SingleAndDoubleHunk) {
    const std::string before = "a\nb\nc\nd\ne\nf\ng\nh\n";
    const std::string one = "--- x\n+++ y\n@@ -2,1 +2,1 @@\n-b\n+B\n";
    EXPECT_EQ(extract_single_hunk(one, before, LanguageId::c).size(), 1u);
    const std::string two = "--- x\n+++ y\n@@ -2,1 +2,1 @@\n-b\n+B\n@@ -7,1 +7,1 @@\n-g\n+G\n";
    const auto items = extract_single_hunk(two, before, LanguageId::c);
    ASSERT_EQ(items.size(), 2u);
    EXPECT_EQ(items[0].buggy_code, "b");
    EXPECT_EQ(items[1].buggy_code, "g");
    EXPECT_EQ(apply_hunks(before, items), "a\nB\nc\nd\ne\nf\nG\nh\n");
}

TEST(Hunk, MismatchIsExtractionError) {
    const std::string before = "a\nb\nc\n";
    EXPECT_THROW(extract_single_hunk("--- x\n+++ y\n@@ -2,1 +2,1 @@\n-q\n+B\n", before, LanguageId::c), extraction_error);
    EXPECT_THROW(extract_single_hunk("--- x\n+++ y\n@@ -9,1 +9,1 @@\n-b\n+B\n", before, LanguageId::c), extraction_error);
}

// --- PRNG oracle

TEST(Prng, MatchesIndependentOracle) {
    const auto g = pbtest::load_json(test_dir() / "golden/prng_golden.json");
    for (const auto& r : g["raw"]) {
        Pcg32 rng(std::stoull(r["state"].get<std::string>()), std::stoull(r["seq"].get<std::string>()));
        for (const auto& v : r["out"]) EXPECT_EQ(rng.next(), v.get<std::uint32_t>());
    }
    const auto ids = g["ids"].get<std::vector<std::string>>();
    const std::map<std::string, RngStream> streams{{"split", RngStream::split},
                                                   {"fraction", RngStream::fraction},
                                                   {"shots", RngStream::shots},
                                                   {"test_reserve", RngStream::test_reserve}};
    for (const auto& p : g["permutations"]) {
        const auto got = seeded_permutation(ids, p["seed"].get<std::uint64_t>(), streams.at(p["stream"].get<std::string>()));
        EXPECT_EQ(got, p["perm"].get<std::vector<std::string>>()) << p["seed"] << " " << p["stream"];
    }
    const auto& sp = g["split_653"];
    std::vector<std::string> big;
    for (int i = 0; i < 653; ++i) {
        char b[16];
        std::snprintf(b, sizeof b, "cr%04d", i);
        big.push_back(b);
    }
    const auto s = split_ids(big, 1);
    EXPECT_EQ(s.val, sp["val"].get<std::vector<std::string>>());
    EXPECT_EQ(s.test, sp["test"].get<std::vector<std::string>>());
}

TEST(Prng, PublishedDemoVector) {
    Pcg32 rng(42, 54);
    const std::uint32_t expect[] = {0xa15c02b7, 0x7b47f409, 0xba1d3330, 0x83d2f293, 0xbfa4784b, 0xcbed606e};
    for (auto e : expect) EXPECT_EQ(rng.next(), e);
}

// --- splits and samples

TEST(Split, CodeRefinementSizes) {
    const auto s = split_ids(make_ids(653), 1);
    EXPECT_EQ(s.train.size(), 523u);
    EXPECT_EQ(s.val.size(), 65u);
    EXPECT_EQ(s.test.size(), 65u);
    EXPECT_EQ(s.source_count, 653u);
}

TEST(Split, MinimalAndTooSmall) {
    const auto s = split_ids(make_ids(10), 3);
    EXPECT_EQ(s.train.size(), 8u);
    EXPECT_EQ(s.val.size(), 1u);
    EXPECT_EQ(s.test.size(), 1u);
    EXPECT_THROW(split_ids(make_ids(9), 3), split_error);
}

TEST(Split, PartitionPropertyOnRandomSizes) {
    Pcg32 rng(7, 7);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 10 + rng.bounded(500);
        const std::uint64_t seed = rng.next();
        const auto ids = make_ids(n, "p");
        const auto s = split_ids(ids, seed);
        EXPECT_EQ(s.val.size(), n / 10);
        EXPECT_EQ(s.test.size(), n / 10);
        std::vector<std::string> all = s.train;
        all.insert(all.end(), s.val.begin(), s.val.end());
        all.insert(all.end(), s.test.begin(), s.test.end());
        std::sort(all.begin(), all.end());
        auto sorted = ids;
        std::sort(sorted.begin(), sorted.end());
        EXPECT_EQ(all, sorted);
        EXPECT_EQ(split_ids(ids, seed), s);
    }
}

TEST(Split, ManifestJson) {
    const auto s = split_ids(make_ids(30), 2);
    const json j = s;
    EXPECT_EQ(j.at("seed"), 2);
    EXPECT_EQ(j.get<DatasetSplit>(), s);
}

TEST(Sample, FractionCountsAndFloorMinimum) {
    const auto f = Fraction::parse("0.01");
    EXPECT_EQ(sample_fraction(make_ids(1000), f, 1).size(), 10u);
    EXPECT_EQ(sample_fraction(make_ids(50), f, 1).size(), 1u);
    EXPECT_EQ(sample_fraction(make_ids(50), Fraction::parse("1"), 1).size(), 50u);
    EXPECT_THROW(sample_fraction({}, f, 1), sampling_error);
    EXPECT_THROW(sample_fraction(make_ids(50), Fraction::parse("0"), 1), sampling_error);
    EXPECT_THROW(sample_fraction(make_ids(50), Fraction::parse("1.5"), 1), sampling_error);
    EXPECT_THROW(Fraction::parse("1/0"), sampling_error);
    EXPECT_THROW(Fraction::parse("one"), sampling_error);
    EXPECT_EQ(Fraction::parse("1/100").str(), Fraction::parse("0.01").str());
}

TEST(Sample, SeedsDifferAndRepeat) {
    const auto ids = make_ids(1000);
    const auto f = Fraction::parse("1/100");
    const auto a = sample_fraction(ids, f, 1);
    EXPECT_EQ(a, sample_fraction(ids, f, 1));
    EXPECT_NE(std::set<std::string>(a.begin(), a.end()), [&] {
        auto b = sample_fraction(ids, f, 2);
        return std::set<std::string>(b.begin(), b.end());
    }());
}

TEST(Sample, Shots) {
    const auto ids = make_ids(2000);
    EXPECT_EQ(sample_shots(ids, 1, 1).size(), 1u);
    for (std::uint64_t seed : {1, 2, 3}) {
        const auto s = sample_shots(ids, 32, seed);
        EXPECT_EQ(s.size(), 32u);
        EXPECT_EQ(std::set<std::string>(s.begin(), s.end()).size(), 32u);
        EXPECT_EQ(s, sample_shots(ids, 32, seed));
    }
    EXPECT_NE(sample_shots(ids, 32, 1), sample_shots(ids, 32, 2));
    auto all = sample_shots(make_ids(40), 40, 5);
    std::sort(all.begin(), all.end());
    auto sorted = make_ids(40);
    std::sort(sorted.begin(), sorted.end());
    EXPECT_EQ(all, sorted);
    EXPECT_THROW(sample_shots(make_ids(5), 6, 1), sampling_error);
    EXPECT_THROW(sample_shots(make_ids(5), 0, 1), sampling_error);
}

TEST(Sample, ReservedTestIsDisjointFromShots) {
    const auto ids = make_ids(1200);
    for (std::size_t k : {1u, 8u, 16u, 32u}) {
        for (std::uint64_t seed : {1, 2, 3}) {
            const auto d = reserve_then_shots(ids, k, 500, seed);
            EXPECT_EQ(d.test.size(), 500u);
            EXPECT_EQ(d.train.size(), k);
            const std::set<std::string> test(d.test.begin(), d.test.end());
            for (const auto& id : d.train) EXPECT_FALSE(test.count(id));
        }
    }
    EXPECT_THROW(reserve_then_shots(make_ids(520), 32, 500, 1), sampling_error);
}

TEST(Sample, PlanValidation) {
    SamplingPlan p;
    EXPECT_NO_THROW(p.validate());
    EXPECT_EQ(p.seeds, (std::vector<std::uint64_t>{1, 2, 3}));
    p.seeds = {1, 1};
    EXPECT_THROW(p.validate(), sampling_error);
    p.seeds = {};
    EXPECT_THROW(p.validate(), sampling_error);
    p.seeds = {4};
    p.mode = SamplingMode::shots;
    EXPECT_THROW(p.validate(), sampling_error);
}
