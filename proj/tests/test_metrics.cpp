#include <gtest/gtest.h>

#include <cmath>

#include "test_support.hpp"

using namespace patchbench;

namespace {

struct GoldenPair {
    LanguageId lang;
    std::string prediction, reference;
    CodeBleuComponents expect;
    double codebleu;
};

std::vector<GoldenPair> golden() {
    const auto g = pbtest::load_json(pbtest::test_dir() / "golden/codebleu_golden.json");
    std::vector<GoldenPair> out;
    for (const auto& p : g.at("pairs")) {
        GoldenPair gp;
        gp.lang = *parse_language(p.at("language").get<std::string>());
        gp.prediction = p.at("prediction");
        gp.reference = p.at("reference");
        gp.expect.ngram = p.at("ngram");
        gp.expect.weighted_ngram = p.at("weighted_ngram");
        gp.expect.ast_match = p.at("ast_match");
        // a reference without data flow scores 1 here; the oracle reports 0
        gp.expect.dataflow_match = p.at("ref_has_dataflow").get<bool>() ? p.at("dataflow_match").get<double>() : 1.0;
        gp.codebleu = p.at("codebleu");
        out.push_back(std::move(gp));
    }
    return out;
}

std::size_t ws_tokens(const std::string& s) { return detail::split_ws(s).size(); }

// Swaps the first binary operator it finds; returns the input if none.
std::string mutate(const std::string& code) {
    for (auto [from, to] : {std::pair{" + ", " - "}, {" - ", " + "}, {" * ", " + "}, {" < ", " > "}}) {
        if (auto at = code.find(from); at != std::string::npos) return code.substr(0, at) + to + code.substr(at + 3);
    }
    return code;
}

} // namespace

TEST(Golden, ReferenceExactConfigMatchesOracle) {
    const auto cfg = CodeBleuConfig::reference_exact();
    const auto pairs = golden();
    ASSERT_EQ(pairs.size(), 80u);
    for (const auto& p : pairs) {
        const auto r = codebleu(p.prediction, p.reference, p.lang, cfg);
        EXPECT_NEAR(r.components.ngram, p.expect.ngram, 1e-9) << p.prediction;
        EXPECT_NEAR(r.components.weighted_ngram, p.expect.weighted_ngram, 1e-9) << p.prediction;
        EXPECT_NEAR(r.components.ast_match, p.expect.ast_match, 1e-9) << p.prediction;
        EXPECT_NEAR(r.components.dataflow_match, p.expect.dataflow_match, 1e-9) << p.prediction;
        EXPECT_FALSE(r.parse_fallback) << p.prediction;
    }
}

TEST(Golden, FinalScoreMatchesWhereNoQuirkApplies) {
    // the oracle replaces a zero data-flow score by 1 in its final sum
    const auto cfg = CodeBleuConfig::reference_exact();
    for (const auto& p : golden()) {
        if (p.expect.dataflow_match == 0) continue;
        EXPECT_NEAR(codebleu(p.prediction, p.reference, p.lang, cfg).score, p.codebleu, 1e-9) << p.prediction;
    }
}

TEST(Golden, DefaultConfigWithinToleranceFromFourTokens) {
    for (const auto& p : golden()) {
        if (ws_tokens(p.prediction) < 4) continue;
        const auto r = codebleu(p.prediction, p.reference, p.lang);
        EXPECT_NEAR(r.components.ngram, p.expect.ngram, 0.01) << p.prediction;
        EXPECT_NEAR(r.components.weighted_ngram, p.expect.weighted_ngram, 0.01) << p.prediction;
        EXPECT_NEAR(r.components.ast_match, p.expect.ast_match, 0.01) << p.prediction;
        EXPECT_NEAR(r.components.dataflow_match, p.expect.dataflow_match, 0.01) << p.prediction;
    }
}

TEST(Bleu, KnownValues) {
    const std::vector<std::string> a{"a", "b", "c", "d"};
    EXPECT_DOUBLE_EQ(sentence_bleu(a, a), 1.0);
    EXPECT_DOUBLE_EQ(sentence_bleu({"x", "y", "z", "w"}, a), 0.0);
    // one matching bigram out of three, everything else matches
    const std::vector<std::string> h{"a", "b", "x", "d"};
    const double p1 = 3.0 / 4, p2 = 1.0 / 3, p3 = 0.1 / 2, p4 = 0.1 / 1;
    EXPECT_NEAR(sentence_bleu(h, a), std::exp((std::log(p1) + std::log(p2) + std::log(p3) + std::log(p4)) / 4), 1e-12);
    // brevity penalty
    const std::vector<std::string> r6{"a", "b", "c", "d", "e", "f"};
    EXPECT_NEAR(sentence_bleu(a, r6), std::exp(1.0 - 6.0 / 4.0), 1e-12);
}

TEST(Bleu, AutoReweighOnShortHypotheses) {
    const std::vector<std::string> s{"x", "=", "y"};
    EXPECT_DOUBLE_EQ(sentence_bleu(s, s), 1.0);
    BleuOptions off;
    off.auto_reweigh = false;
    EXPECT_LT(sentence_bleu(s, s, off), 1.0);
}

TEST(Bleu, KeywordWeighting) {
    const std::vector<std::string> ref{"return", "x", ";"};
    const std::vector<std::string> hyp{"return", "y", ";"};
    auto w = [](std::string_view t) { return t == "return" ? 1.0 : 0.2; };
    BleuOptions o;
    o.max_order = 1;
    o.auto_reweigh = false;
    // (1 + 0.2) / (1 + 0.2 + 0.2)
    EXPECT_NEAR(weighted_ngram_score(hyp, ref, w, o, WeightedBrevity::standard), 1.2 / 1.4, 1e-12);
}

TEST(Properties, IdentityOnGeneratedPrograms) {
    pbtest::ProgramGen gen(2024);
    for (int i = 0; i < 200; ++i) {
        const auto lang = all_languages[static_cast<std::size_t>(i) % 4];
        const auto code = gen.program(lang);
        const auto r = codebleu(code, code, lang);
        EXPECT_NEAR(r.score, 1.0, 1e-9) << code;
        EXPECT_FALSE(r.parse_fallback) << code;
    }
}

TEST(Properties, IdentityOnTinyInputs) {
    for (auto [code, lang] : {std::pair{"x", LanguageId::python}, {"x = y", LanguageId::python}, {"count ++ ;", LanguageId::java},
                              {"return ;", LanguageId::c}, {"f ( )", LanguageId::javascript}}) {
        EXPECT_NEAR(codebleu(code, code, lang).score, 1.0, 1e-9) << code;
    }
}

TEST(Properties, EmImpliesScAndFullScore) {
    pbtest::ProgramGen gen(99);
    Pcg32 rng(5, 5);
    int em = 0, sc_only = 0;
    for (int i = 0; i < 500; ++i) {
        const auto lang = all_languages[rng.bounded(4)];
        const auto code = gen.program(lang);
        std::string other;
        switch (rng.bounded(6)) {
        case 0: other = code; break;
        case 1: other = code + "\n\n"; break;
        case 2: other = pbtest::whitespace_variant(code, lang); break;
        case 3: other = mutate(code); break;
        case 4: other = gen.program(lang); break;
        default: {
            other = code;
            for (std::size_t at = 0; (at = other.find('\n', at)) != std::string::npos; at += 2) other.replace(at, 1, "\r\n");
        }
        }
        const auto r = evaluate("p" + std::to_string(i), other, code, lang);
        if (r.em) {
            ++em;
            EXPECT_TRUE(r.sc) << other;
            EXPECT_NEAR(r.codebleu, 1.0, 1e-9) << other;
        } else if (r.sc) {
            ++sc_only;
        }
    }
    EXPECT_GT(em, 0);
    EXPECT_GT(sc_only, 0);
}

TEST(Properties, WhitespaceVariantIsScNotEm) {
    pbtest::ProgramGen gen(7);
    for (auto lang : all_languages) {
        const auto code = gen.program(lang);
        const auto variant = pbtest::whitespace_variant(code, lang);
        const auto r = evaluate("w", variant, code, lang);
        EXPECT_FALSE(r.em) << variant;
        EXPECT_TRUE(r.sc) << variant;
        EXPECT_FALSE(r.parse_fallback);
    }
}

TEST(Properties, ScoreIsTheWeightedSum) {
    pbtest::ProgramGen gen(31);
    CodeBleuConfig cfg;
    cfg.weights = {0.1, 0.2, 0.3, 0.4};
    for (int i = 0; i < 40; ++i) {
        const auto lang = all_languages[static_cast<std::size_t>(i) % 4];
        const auto a = gen.program(lang);
        const auto b = mutate(a);
        const auto r = codebleu(b, a, lang, cfg);
        const auto& c = r.components;
        EXPECT_NEAR(r.score, 0.1 * c.ngram + 0.2 * c.weighted_ngram + 0.3 * c.ast_match + 0.4 * c.dataflow_match, 1e-12);
        for (double v : {c.ngram, c.weighted_ngram, c.ast_match, c.dataflow_match, r.score}) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
    }
}

TEST(Metrics, ExactMatchNormalization) {
    EXPECT_TRUE(exact_match("x = 1;\r\n", "x = 1;"));
    EXPECT_TRUE(exact_match("  x = 1;\n", "x = 1;"));
    EXPECT_FALSE(exact_match("x=1;", "x = 1;"));
}

TEST(Metrics, SyntacticMatchFallsBackOnParseErrors) {
    const auto d = syntactic_match_detail("int f( {", "int f( {", LanguageId::java);
    EXPECT_TRUE(d.fallback);
    EXPECT_TRUE(d.match);
    const auto e = syntactic_match_detail("int f( {", "int  f( {", LanguageId::java);
    EXPECT_TRUE(e.fallback);
    EXPECT_FALSE(e.match);
}

TEST(Metrics, EmptyPredictionScoresZero) {
    const auto r = evaluate("e", "", "return x;", LanguageId::java);
    EXPECT_FALSE(r.em);
    EXPECT_FALSE(r.sc);
    EXPECT_EQ(r.codebleu, 0.0);
    EXPECT_EQ(r.components, CodeBleuComponents{});
}

TEST(Metrics, CommentsDoNotChangeScores) {
    const std::string ref = "int f(int a) {\n    return a + 1;\n}";
    const std::string commented = "int f(int a) {\n    // add one\n    return a + 1;\n}";
    EXPECT_NEAR(codebleu(commented, ref, LanguageId::c).score, 1.0, 1e-9);
    const std::string py = "def f(a):\n    \"\"\"Adds one.\"\"\"\n    return a + 1\n";
    EXPECT_NEAR(codebleu(py, "def f(a):\n    return a + 1\n", LanguageId::python).score, 1.0, 1e-9);
}

TEST(Metrics, ParseFallbackIsFlagged) {
    const auto r = evaluate("f", "int f( {", "int f() { return 1; }", LanguageId::java);
    EXPECT_TRUE(r.parse_fallback);
    EXPECT_FALSE(r.sc);
    EXPECT_GE(r.codebleu, 0.0);
}

TEST(Metrics, ConfigValidation) {
    CodeBleuConfig c;
    c.weights = {0.5, 0.5, 0.5, 0.5};
    EXPECT_THROW(c.validate(), config_error);
    c.weights = {1.0, 0.0, 0.0, 0.0};
    EXPECT_NO_THROW(c.validate());
    EXPECT_EQ(parse_weights("0.1,0.2,0.3,0.4"), (std::array<double, 4>{0.1, 0.2, 0.3, 0.4}));
    EXPECT_THROW(parse_weights("1,2,3"), config_error);
    EXPECT_THROW(parse_weights("1,2,3,4,5"), config_error);
    EXPECT_THROW(parse_weights("a,b,c,d"), config_error);
}

TEST(Metrics, EvaluateAllKeepsOrder) {
    std::vector<EvalItem> items;
    pbtest::ProgramGen gen(1);
    for (int i = 0; i < 50; ++i) {
        const auto lang = all_languages[static_cast<std::size_t>(i) % 4];
        const auto code = gen.program(lang);
        items.push_back({"id" + std::to_string(i), lang, i % 2 ? code : mutate(code), code});
    }
    const auto par = evaluate_all(items, {}, 8);
    const auto ser = evaluate_all(items, {}, 1);
    ASSERT_EQ(par.size(), items.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
        EXPECT_EQ(par[i].instance_id, items[i].id);
        EXPECT_EQ(par[i].codebleu, ser[i].codebleu);
        EXPECT_EQ(par[i].em, ser[i].em);
    }
}

TEST(Aggregate, RateAndCount) {
    std::vector<MetricReport> rs(96);
    for (std::size_t i = 0; i < rs.size(); ++i) {
        rs[i].instance_id = std::to_string(i);
        rs[i].em = i < 55;
        rs[i].sc = i < 60;
        rs[i].codebleu = i < 55 ? 1.0 : 0.5;
    }
    const auto rate = summarize(rs, MetricMode::rate);
    EXPECT_EQ(fmt2(rate.em), "57.29");
    EXPECT_EQ(rate.em_count, 55u);
    EXPECT_NEAR(rate.sc, 62.5, 1e-12);
    const auto count = summarize(rs, MetricMode::count);
    EXPECT_EQ(count.em, 55.0);
    EXPECT_EQ(count.sc, 60.0);
    EXPECT_NEAR(count.codebleu, (55 + 41 * 0.5) / 96.0 * 100, 1e-9);
    EXPECT_THROW(summarize({}, MetricMode::rate), aggregation_error);
}

TEST(Aggregate, CrossSeedIsMeanOfSeeds) {
    std::vector<MetricReport> rs;
    for (std::uint64_t seed : {1, 2, 3}) {
        for (int i = 0; i < 10; ++i) {
            MetricReport r;
            r.instance_id = std::to_string(i);
            r.em = i < static_cast<int>(seed);
            r.sc = r.em;
            r.codebleu = r.em ? 1.0 : 0.0;
            r.seed = seed;
            rs.push_back(r);
        }
    }
    const auto a = aggregate(rs, MetricMode::rate);
    ASSERT_TRUE(a.cross_seed);
    EXPECT_NEAR(a.cross_seed->em, (10 + 20 + 30) / 3.0, 1e-12);
    EXPECT_EQ(a.per_seed.size(), 3u);
    rs.back().seed.reset();
    EXPECT_THROW(aggregate(rs, MetricMode::rate), aggregation_error);
}

TEST(Aggregate, ReportJsonRoundTrip) {
    const auto r = evaluate("j", "return a - b;", "return a + b;", LanguageId::java);
    json j = r;
    EXPECT_EQ(j.at("id"), "j");
    const auto back = j.get<MetricReport>();
    EXPECT_EQ(back.codebleu, r.codebleu);
    EXPECT_EQ(back.components, r.components);
    EXPECT_EQ(parse_metric_mode("count"), MetricMode::count);
    EXPECT_THROW(parse_metric_mode("ratio"), config_error);
}
