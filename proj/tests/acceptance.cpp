// One PASS/FAIL line per primary acceptance criterion. Exit status is the
// number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>

#include "test_support.hpp"

using namespace patchbench;

namespace {

// pinned tolerances
constexpr double oracle_tol = 0.01;
constexpr double identity_tol = 1e-9;
constexpr double naive_codebleu_floor = 0.5;
constexpr const char* pipeline_em = "57.29";

struct Outcome {
    bool ok = true;
    std::string detail;

    void check(bool cond, const std::string& what) {
        if (!cond) {
            ok = false;
            if (!detail.empty()) detail += "; ";
            detail += what;
        }
    }
};

struct Criterion {
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

Outcome template_golden() {
    Outcome o;
    const std::vector<std::string> hard{
        "[X] [mask] is fixed program",
        "[X] fixed program is [mask]",
        "Fix bug in [X] [mask]",
        "Fix [X] fixed program is [mask]",
        "Fix [X] [mask] is fixed program",
        "[X] is buggy program [mask] is fixed program",
        "Fix [X] is buggy program [mask] is fixed program",
    };
    const std::vector<std::string> soft{
        "[X] [mask] [SOFT] * 3",
        "[X] [SOFT] * 3 [mask]",
        "[SOFT] * 3 [X] [mask]",
        "[SOFT] [X] [SOFT] * 3 [mask]",
        "[SOFT] [X] [mask] [SOFT] * 3",
        "[X] [SOFT] * 3 [mask] [SOFT] * 3",
        "[SOFT] [X] [SOFT] * 3 [mask] [SOFT] * 3",
    };
    const auto bp = builtin_templates(TemplateSet::bp, ModelStyle::infilling);
    o.check(bp.size() == 21, "bp count " + std::to_string(bp.size()));
    if (bp.size() == 21) {
        for (std::size_t i = 0; i < 7; ++i) {
            o.check(render_table(bp[i]) == hard[i], bp[i].id);
            o.check(render_table(bp[7 + i]) == soft[i] && bp[7 + i].kind == TemplateKind::sbp_initialized, bp[7 + i].id);
            o.check(render_table(bp[14 + i]) == soft[i] && bp[14 + i].kind == TemplateKind::sbp_random, bp[14 + i].id);
        }
    }
    std::size_t kp_checked = 0;
    for (auto style : {ModelStyle::infilling, ModelStyle::generative}) {
        const std::string tail = style == ModelStyle::infilling ? "[mask] is the fixed version" : "the fixed version is [mask]";
        for (const auto& t : builtin_templates(TemplateSet::kp, style)) {
            if (t.kind != TemplateKind::kp_hard) continue;
            const auto text = render_table(t);
            const bool ends = text.size() >= tail.size() && text.compare(text.size() - tail.size(), tail.size(), tail) == 0;
            o.check(ends && text.rfind("Please fix a buggy program [X] ", 0) == 0, t.id + ": " + text);
            ++kp_checked;
        }
    }
    o.check(kp_checked > 0, "no hard KP templates");
    if (o.ok) o.detail = "21 BP rows verbatim, " + std::to_string(kp_checked) + " KP mask placements";
    return o;
}

Outcome naive_copy() {
    Outcome o;
    const auto data = load_dataset((pbtest::test_dir() / "data/naive_copy.jsonl").string());
    std::set<LanguageId> langs;
    for (const auto& r : data) langs.insert(r.language);
    o.check(data.size() == 30, "corpus has " + std::to_string(data.size()) + " pairs");
    o.check(langs.size() == 4, "corpus covers " + std::to_string(langs.size()) + " languages");

    auto backend = StubBackend::copy();
    std::vector<CompiledPrompt> prompts;
    const auto ft = plain_template();
    for (const auto& r : data) prompts.push_back(instantiate(ft, r));
    const auto gen = backend->generate(prompts, {});
    std::vector<EvalItem> items;
    for (std::size_t i = 0; i < data.size(); ++i) items.push_back({data[i].id, data[i].language, gen[i].text.value_or(""), data[i].fixed_code});
    const auto s = summarize(evaluate_all(items), MetricMode::rate);
    o.check(s.em_count == 0, "EM count " + std::to_string(s.em_count));
    o.check(s.sc_count == 0, "SC count " + std::to_string(s.sc_count));
    o.check(s.codebleu >= naive_codebleu_floor * 100, "mean CodeBLEU " + fmt2(s.codebleu));
    if (o.ok) o.detail = "EM " + fmt2(s.em) + " / SC " + fmt2(s.sc) + " / CodeBLEU " + fmt2(s.codebleu);
    return o;
}

Outcome metric_oracle() {
    Outcome o;
    const auto g = pbtest::load_json(pbtest::test_dir() / "golden/codebleu_golden.json");
    std::map<LanguageId, int> per_lang;
    double worst_exact = 0, worst_default = 0;
    int default_off = 0;
    for (const auto& p : g.at("pairs")) {
        const auto lang = *parse_language(p.at("language").get<std::string>());
        ++per_lang[lang];
        const std::string pred = p.at("prediction"), ref = p.at("reference");
        const double df = p.at("ref_has_dataflow").get<bool>() ? p.at("dataflow_match").get<double>() : 1.0;
        const std::array<double, 4> want{p.at("ngram"), p.at("weighted_ngram"), p.at("ast_match"), df};
        auto diff = [&](const CodeBleuConfig& cfg) {
            const auto c = codebleu(pred, ref, lang, cfg).components;
            const std::array<double, 4> got{c.ngram, c.weighted_ngram, c.ast_match, c.dataflow_match};
            double d = 0;
            for (std::size_t k = 0; k < 4; ++k) d = std::max(d, std::abs(got[k] - want[k]));
            return d;
        };
        const double e = diff(CodeBleuConfig::reference_exact());
        worst_exact = std::max(worst_exact, e);
        o.check(e <= oracle_tol, "oracle mismatch " + fmt("%.4f", e) + " on '" + pred + "'");
        const double d = diff(CodeBleuConfig{});
        worst_default = std::max(worst_default, d);
        default_off += d > oracle_tol;
    }
    for (auto lang : all_languages) o.check(per_lang[lang] == 20, std::string(to_string(lang)) + " has " + std::to_string(per_lang[lang]) + " pairs");

    pbtest::ProgramGen gen(2024);
    double worst_identity = 0;
    for (int i = 0; i < 200; ++i) {
        const auto lang = all_languages[static_cast<std::size_t>(i) % 4];
        const auto code = gen.program(lang);
        for (const auto& cfg : {CodeBleuConfig::reference_exact(), CodeBleuConfig{}}) {
            worst_identity = std::max(worst_identity, std::abs(codebleu(code, code, lang, cfg).score - 1.0));
        }
    }
    o.check(worst_identity <= identity_tol, "identity off by " + fmt("%.3g", worst_identity));
    if (o.ok) {
        o.detail = "reference profile max diff " + fmt("%.1e", worst_exact) + "; identity max diff " + fmt("%.1e", worst_identity) +
                   "; default profile outside tolerance on " + std::to_string(default_off) + "/80 (max " + fmt("%.3f", worst_default) +
                   ", hypotheses under 4 tokens)";
    }
    return o;
}

Outcome em_sc_ordering() {
    Outcome o;
    pbtest::ProgramGen gen(99);
    Pcg32 rng(5, 5);
    int em = 0, sc_only = 0;
    for (int i = 0; i < 500; ++i) {
        const auto lang = all_languages[rng.bounded(4)];
        const auto code = gen.program(lang);
        std::string other;
        switch (rng.bounded(5)) {
        case 0: other = code; break;
        case 1: other = code + "\n"; break;
        case 2: other = pbtest::whitespace_variant(code, lang); break;
        case 3: other = gen.program(lang); break;
        default: {
            other = code;
            if (auto at = other.find(" + "); at != std::string::npos) other.replace(at, 3, " - ");
        }
        }
        const auto r = evaluate("p", other, code, lang);
        if (r.em) {
            ++em;
            o.check(r.sc, "em without sc at pair " + std::to_string(i));
            o.check(std::abs(r.codebleu - 1.0) <= identity_tol, "em with codebleu " + fmt("%.6f", r.codebleu));
        } else if (r.sc) {
            ++sc_only;
        }
    }
    pbtest::ProgramGen wsgen(7);
    for (auto lang : all_languages) {
        const auto code = wsgen.program(lang);
        const auto r = evaluate("w", pbtest::whitespace_variant(code, lang), code, lang);
        o.check(r.sc && !r.em, std::string("no sc-not-em pair for ") + std::string(to_string(lang)));
    }
    if (o.ok) o.detail = std::to_string(em) + " em pairs, " + std::to_string(sc_only) + " sc-only pairs, 4/4 languages with sc and not em";
    return o;
}

std::vector<std::string> make_ids(std::size_t n, const char* prefix) {
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%s%04zu", prefix, i);
        ids.emplace_back(buf);
    }
    return ids;
}

Outcome sampler() {
    Outcome o;
    const auto s653 = split_ids(make_ids(653, "cr"), 1);
    o.check(s653.train.size() == 523 && s653.val.size() == 65 && s653.test.size() == 65,
            "653 split " + std::to_string(s653.train.size()) + "/" + std::to_string(s653.val.size()) + "/" + std::to_string(s653.test.size()));

    const auto ids = make_ids(1000, "id");
    auto draws = [&](std::uint64_t seed) {
        std::vector<std::vector<std::string>> d;
        const auto sp = split_ids(ids, seed);
        d.push_back(sp.train);
        d.push_back(sp.val);
        d.push_back(sp.test);
        d.push_back(sample_fraction(ids, Fraction(3, 10), seed));
        d.push_back(sample_shots(ids, 16, seed));
        const auto rs = reserve_then_shots(ids, 8, 500, seed);
        d.push_back(rs.train);
        d.push_back(rs.test);
        return d;
    };
    std::map<std::uint64_t, std::vector<std::vector<std::string>>> by_seed;
    for (std::uint64_t seed : {1, 2, 3}) {
        by_seed[seed] = draws(seed);
        o.check(draws(seed) == by_seed[seed], "seed " + std::to_string(seed) + " not reproducible");
    }
    for (std::size_t k = 0; k < by_seed[1].size(); ++k) {
        o.check(by_seed[1][k] != by_seed[2][k] && by_seed[2][k] != by_seed[3][k] && by_seed[1][k] != by_seed[3][k],
                "draw " + std::to_string(k) + " repeats across seeds");
    }

    for (std::uint64_t seed : {1, 2, 3}) {
        std::optional<std::vector<std::string>> reserved;
        for (std::size_t k : {1, 8, 16, 32}) {
            const auto d = reserve_then_shots(ids, k, 500, seed);
            o.check(d.train.size() == k && d.test.size() == 500, "shot draw sizes");
            const std::set<std::string> test(d.test.begin(), d.test.end());
            for (const auto& id : d.train) o.check(!test.count(id), "shot " + id + " is in the reserved test set");
            if (!reserved) reserved = d.test;
            o.check(*reserved == d.test, "reserved test set changes with k");
        }
    }
    if (o.ok) o.detail = "653 -> 523/65/65; 7 draws reproducible and seed-distinct on 1000 ids; k in {1,8,16,32} disjoint from 500 reserved";
    return o;
}

Outcome pipeline() {
    Outcome o;
    const auto dir = pbtest::scratch("acceptance-pipeline");
    const auto corpus = pbtest::pipeline_corpus(960);
    save_dataset((dir / "corpus.jsonl").string(), corpus);
    json table = pbtest::pipeline_table(corpus, 1, 55);
    write_file(dir / "table.json", table.dump());

    ExperimentSpec spec = parse_config("name = pipeline\n"
                                       "dataset = " + (dir / "corpus.jsonl").string() + "\n"
                                       "templates = HBP1\n"
                                       "seeds = 1\n"
                                       "backend = stub:table=" + (dir / "table.json").string() + "\n"
                                       "out = " + (dir / "out").string() + "\n");
    RunOptions first;
    first.resume = false;
    const auto r = run_experiment(spec, first);
    const auto bytes = read_file(dir / "out/result.json");
    run_experiment(spec, first);
    const auto again = read_file(dir / "out/result.json");
    const auto& s = r.arms.at(0).seeds.at(0).summary;
    o.check(s.n == 96, "test set has " + std::to_string(s.n) + " items");
    o.check(s.em_count == 55, "EM count " + std::to_string(s.em_count));
    o.check(fmt2(s.em) == pipeline_em, "EM " + fmt2(s.em));
    o.check(bytes == again, "result.json differs between runs");
    if (o.ok) o.detail = "EM " + fmt2(s.em) + "% (55/96); result.json byte-identical across runs";
    return o;
}

} // namespace

int main() {
    const std::vector<Criterion> criteria{
        {"template golden suite", 1.0, template_golden},
        {"naive-copy signature", 10.0, naive_copy},
        {"metric oracle equivalence", 30.0, metric_oracle},
        {"EM/SC ordering", 30.0, em_sc_ordering},
        {"sampler/splitter determinism", 5.0, sampler},
        {"pipeline determinism", 10.0, pipeline},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.ok = false;
            o.detail = std::string("threw: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (secs > c.budget_s) {
            o.ok = false;
            o.detail += (o.detail.empty() ? "" : "; ") + fmt("took %.2f s", secs) + fmt(" over the %.0f s budget", c.budget_s);
        }
        failed += !o.ok;
        std::printf("%s  %-30s %6.2fs  %s\n", o.ok ? "PASS" : "FAIL", c.name, secs, o.detail.c_str());
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed;
}
