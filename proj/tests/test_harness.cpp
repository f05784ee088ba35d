#include <gtest/gtest.h>

#include <atomic>

#include "test_support.hpp"

using namespace patchbench;

namespace {

/// Tuning backend with scripted jobs. Each job reports running once, then
/// done with checkpoint "ckpt-<n>", unless its number is in fail_jobs.
/// Generation copies the input and tags it with the active checkpoint.
class ScriptedTuner final : public Backend {
  public:
    std::set<int> fail_jobs;
    std::vector<double> loss{1.0, 0.5};
    std::atomic<int> submitted{0};
    std::vector<std::string> refs_seen;

    std::vector<GenerationResult> generate(const std::vector<CompiledPrompt>& prompts, const GenerationParams&) override {
        std::lock_guard lock(mu_);
        refs_seen.push_back(ref_);
        std::vector<GenerationResult> out;
        for (const auto& p : prompts) out.push_back({p.instance_id, p.input_text(), std::nullopt});
        return out;
    }
    std::string submit_tune(const RepairJob& job) override {
        validate_job(job);
        return "job-" + std::to_string(++submitted);
    }
    JobState poll(const std::string& id) override {
        std::lock_guard lock(mu_);
        JobState s;
        s.job_id = id;
        s.loss_curve = loss;
        if (polls_[id]++ == 0) {
            s.status = JobStatus::running;
        } else if (fail_jobs.count(std::stoi(id.substr(4)))) {
            s.status = JobStatus::failed;
            s.reason = "worker ran out of memory";
        } else {
            s.status = JobStatus::done;
            s.checkpoint_ref = "ckpt-" + id.substr(4);
        }
        return s;
    }
    HealthInfo health() override { return {true, {"codet5p-220m"}}; }
    std::string describe() const override { return "scripted"; }
    bool tunes() const override { return true; }
    void set_model_ref(const std::string& ref) override {
        std::lock_guard lock(mu_);
        ref_ = ref;
    }

  private:
    std::mutex mu_;
    std::string ref_;
    std::map<std::string, int> polls_;
};

class Unhealthy final : public Backend {
  public:
    std::vector<GenerationResult> generate(const std::vector<CompiledPrompt>&, const GenerationParams&) override { return {}; }
    std::string submit_tune(const RepairJob&) override { return {}; }
    JobState poll(const std::string&) override { return {}; }
    HealthInfo health() override { return {false, {}}; }
    std::string describe() const override { return "down"; }
    bool tunes() const override { return false; }
    void set_model_ref(const std::string&) override {}
};

ExperimentSpec spec_for(const std::string& name, const std::vector<RepairInstance>& data) {
    const auto dir = pbtest::scratch(name);
    save_dataset((dir / "data.jsonl").string(), data);
    ExperimentSpec s;
    s.name = name;
    s.dataset = (dir / "data.jsonl").string();
    s.out_dir = (dir / "out").string();
    s.template_ids = {"HBP1"};
    s.poll_interval = std::chrono::milliseconds(1);
    return s;
}

std::vector<RepairInstance> naive_pairs(std::size_t n) {
    auto data = pbtest::pipeline_corpus(n);
    for (auto& r : data) r.id = "np-" + r.id.substr(3);
    return data;
}

ExperimentResult fake_result(const std::string& name, double em, const std::string& manifest = "m") {
    ExperimentResult r;
    r.name = name;
    r.model_id = "codet5p-220m";
    r.dataset = "data.jsonl";
    ArmResult a;
    a.template_id = "HBP1";
    SeedOutcome s;
    s.seed = 1;
    s.ok = true;
    s.test_manifest_sha = manifest;
    s.summary.em = em;
    a.seeds = {s};
    a.cross_seed = s.summary;
    r.arms = {a};
    return r;
}

} // namespace

TEST(Config, ParsesSettings) {
    const auto s = parse_config(R"(# comment
name = pt-java
dataset = d.jsonl
schema = tfix
language = java
templates = HBP1, SBP3-init
style = generative
sampling = shots
shots = 32
test_size = 500
seeds = 1,2,3
metric_mode = count
beam_count = 10
tune_mode = fine_tune
learning_rate = 3e-5
weights = 0.4,0.2,0.2,0.2
codebleu_profile = reference_exact
)");
    EXPECT_EQ(s.name, "pt-java");
    EXPECT_EQ(s.schema, DatasetSchema::tfix);
    EXPECT_EQ(s.language, LanguageId::java);
    EXPECT_EQ(s.template_ids, (std::vector<std::string>{"HBP1", "SBP3-init"}));
    EXPECT_EQ(s.style, ModelStyle::generative);
    EXPECT_EQ(s.sampling.mode, SamplingMode::shots);
    EXPECT_EQ(s.sampling.shot_count, 32u);
    EXPECT_EQ(s.sampling.fixed_test_size, 500u);
    EXPECT_EQ(s.metric_mode, MetricMode::count);
    EXPECT_EQ(s.generation.beam_count, 10);
    EXPECT_EQ(s.tuning.mode, TuneMode::fine_tune);
    EXPECT_DOUBLE_EQ(s.tuning.learning_rate, 3e-5);
    EXPECT_EQ(s.codebleu.weights, (std::array<double, 4>{0.4, 0.2, 0.2, 0.2}));
    EXPECT_EQ(s.codebleu.tokenizer, TokenizerMode::whitespace);
}

TEST(Config, ErrorsCarryLineNumbers) {
    auto msg = [](const std::string& text) {
        try {
            parse_config(text);
        } catch (const config_error& e) {
            return std::string(e.what());
        }
        return std::string("no error");
    };
    EXPECT_EQ(msg("name = a\ncolour = red\n").rfind("line 2:", 0), 0u);
    EXPECT_EQ(msg("just words\n").rfind("line 1:", 0), 0u);
    EXPECT_NE(msg("seeds = 1,x\n").find("line 1"), std::string::npos);
    EXPECT_NE(msg("\n\nfraction = 1/0\n").find("line 3"), std::string::npos);
    EXPECT_NE(msg("sampling = some\n"), "no error");
    EXPECT_THROW(parse_seed_list(""), config_error);
}

TEST(Config, FingerprintTracksResultAffectingFields) {
    ExperimentSpec a;
    a.dataset = "d";
    auto b = a;
    b.out_dir = "elsewhere";
    b.poll_interval = std::chrono::milliseconds(5);
    EXPECT_EQ(spec_fingerprint(a, "data"), spec_fingerprint(b, "data"));
    EXPECT_NE(spec_fingerprint(a, "data"), spec_fingerprint(a, "data2"));
    b = a;
    b.sampling.seeds = {1, 2};
    EXPECT_NE(spec_fingerprint(a, "data"), spec_fingerprint(b, "data"));
    b = a;
    b.codebleu = CodeBleuConfig::reference_exact();
    EXPECT_NE(spec_fingerprint(a, "data"), spec_fingerprint(b, "data"));
    EXPECT_EQ(spec_fingerprint(a, "data").size(), 64u);
}

TEST(Config, TemplateFileBlocks) {
    const auto dir = pbtest::scratch("template-file");
    write_file(dir / "t.dsl", "#id=mine\nrepair {X} now {MASK}\n\n#id=other kind=hbp\n{X} done {MASK}\n");
    ExperimentSpec s;
    s.template_file = (dir / "t.dsl").string();
    s.template_ids = {"other", "HBP2", "mine"};
    const auto ts = detail::resolve_templates(s);
    ASSERT_EQ(ts.size(), 3u);
    EXPECT_EQ(ts[0].id, "other");
    EXPECT_EQ(ts[1].id, "HBP2");
    EXPECT_EQ(render_table(ts[2]), "repair [X] now [mask]");
    s.template_ids = {"nope"};
    EXPECT_THROW(detail::resolve_templates(s), validation_error);
    s.tuning.mode = TuneMode::fine_tune;
    EXPECT_EQ(detail::resolve_templates(s).at(0).id, "FT");
}

TEST(Run, StubRunIsDeterministic) {
    auto spec = spec_for("run-det", naive_pairs(200));
    spec.template_ids = {"HBP1", "HBP3"};
    RunOptions o;
    o.backend = StubBackend::copy();
    const auto r = run_experiment(spec, o);
    ASSERT_TRUE(r.complete);
    const auto first = read_file(fs::path(spec.out_dir) / "result.json");
    o.resume = false;
    run_experiment(spec, o);
    EXPECT_EQ(read_file(fs::path(spec.out_dir) / "result.json"), first);
    EXPECT_TRUE(fs::exists(fs::path(spec.out_dir) / "provenance.json"));
    EXPECT_EQ(load_result((fs::path(spec.out_dir) / "result.json").string()).fingerprint, r.fingerprint);

    ASSERT_EQ(r.arms.size(), 2u);
    for (const auto& arm : r.arms) {
        ASSERT_EQ(arm.seeds.size(), 3u);
        double em = 0, cb = 0;
        for (const auto& s : arm.seeds) {
            EXPECT_TRUE(s.ok);
            EXPECT_EQ(s.summary.em_count, 0u);
            EXPECT_EQ(s.summary.n, 20u);
            em += s.summary.em;
            cb += s.summary.codebleu;
        }
        ASSERT_TRUE(arm.cross_seed);
        EXPECT_NEAR(arm.cross_seed->em, em / 3, 1e-12);
        EXPECT_NEAR(arm.cross_seed->codebleu, cb / 3, 1e-12);
    }
}

TEST(Run, ManifestsAreDisjointAndSeedDependent) {
    auto spec = spec_for("run-manifests", naive_pairs(300));
    spec.sampling.fraction = Fraction(1, 2);
    RunOptions o;
    o.backend = StubBackend::copy();
    run_experiment(spec, o);
    std::set<std::string> tests;
    for (auto seed : {1, 2, 3}) {
        const auto m = pbtest::load_json(fs::path(spec.out_dir) / "HBP1" / ("seed-" + std::to_string(seed)) / "manifests.json");
        const auto train = m.at("train").get<std::vector<std::string>>();
        const auto test = m.at("test").get<std::vector<std::string>>();
        EXPECT_EQ(train.size(), 120u);
        EXPECT_EQ(test.size(), 30u);
        std::set<std::string> t(test.begin(), test.end());
        for (const auto& id : train) EXPECT_FALSE(t.count(id));
        for (const auto& id : m.at("val")) EXPECT_FALSE(t.count(id.get<std::string>()));
        std::string joined;
        for (const auto& id : test) joined += id + ",";
        tests.insert(joined);
    }
    EXPECT_EQ(tests.size(), 3u);
}

TEST(Run, ShotsModeWithReservedTestSet) {
    auto spec = spec_for("run-shots", naive_pairs(600));
    spec.sampling.mode = SamplingMode::shots;
    spec.sampling.shot_count = 32;
    spec.sampling.fixed_test_size = 500;
    spec.metric_mode = MetricMode::count;
    RunOptions o;
    o.backend = StubBackend::copy();
    const auto r = run_experiment(spec, o);
    std::set<std::string> shas;
    for (const auto& s : r.arms[0].seeds) {
        EXPECT_EQ(s.train_size, 32u);
        EXPECT_EQ(s.summary.n, 500u);
        EXPECT_EQ(s.summary.em, 0.0);
        shas.insert(s.test_manifest_sha);
    }
    EXPECT_EQ(r.arms[0].cross_seed->em, 0.0);
    EXPECT_EQ(r.shots, 32u);
    spec.sampling.fixed_test_size = 590;
    EXPECT_THROW(run_experiment(spec, o), validation_error);
}

TEST(Run, OracleTablePipeline) {
    const auto corpus = pbtest::pipeline_corpus(960);
    auto spec = spec_for("run-pipeline", corpus);
    spec.sampling.seeds = {1};
    RunOptions o;
    o.backend = StubBackend::oracle_table(pbtest::pipeline_table(corpus, 1, 55));
    const auto r = run_experiment(spec, o);
    const auto& s = r.arms[0].seeds[0];
    EXPECT_EQ(s.summary.n, 96u);
    EXPECT_EQ(s.summary.em_count, 55u);
    EXPECT_EQ(fmt2(s.summary.em), "57.29");
    EXPECT_EQ(s.generation_errors, 41u);
    const auto preds = read_file(fs::path(spec.out_dir) / "HBP1" / "seed-1" / "predictions.jsonl");
    EXPECT_NE(preds.find("no table entry"), std::string::npos);
}

TEST(Run, TuningBackendSequenceAndFlags) {
    auto spec = spec_for("run-tune", naive_pairs(100));
    auto tuner = std::make_shared<ScriptedTuner>();
    tuner->loss = {1.0, 1.2};
    RunOptions o;
    o.backend = tuner;
    const auto r = run_experiment(spec, o);
    ASSERT_TRUE(r.complete);
    EXPECT_EQ(tuner->submitted, 3);
    EXPECT_EQ(tuner->refs_seen, (std::vector<std::string>{"ckpt-1", "ckpt-2", "ckpt-3"}));
    for (const auto& s : r.arms[0].seeds) {
        EXPECT_TRUE(s.loss_not_decreasing);
        EXPECT_TRUE(s.checkpoint_ref);
    }
}

TEST(Run, FailedSeedGivesPartialResultThenResumes) {
    auto spec = spec_for("run-resume", naive_pairs(100));
    auto tuner = std::make_shared<ScriptedTuner>();
    tuner->fail_jobs = {2};
    RunOptions o;
    o.backend = tuner;
    const auto r = run_experiment(spec, o);
    EXPECT_FALSE(r.complete);
    const fs::path out(spec.out_dir);
    EXPECT_TRUE(fs::exists(out / "result.partial.json"));
    EXPECT_FALSE(fs::exists(out / "result.json"));
    EXPECT_FALSE(r.arms[0].seeds[1].ok);
    EXPECT_NE(r.arms[0].seeds[1].error.find("out of memory"), std::string::npos);
    ASSERT_TRUE(r.arms[0].cross_seed);
    EXPECT_EQ(r.arms[0].cross_seed->n, 20u);

    // only the failed seed is tuned again
    auto healthy = std::make_shared<ScriptedTuner>();
    o.backend = healthy;
    const auto again = run_experiment(spec, o);
    EXPECT_TRUE(again.complete);
    EXPECT_EQ(healthy->submitted, 1);
    EXPECT_TRUE(fs::exists(out / "result.json"));
    EXPECT_FALSE(fs::exists(out / "result.partial.json"));
    EXPECT_EQ(again.arms[0].seeds[0].checkpoint_ref, "ckpt-1");
}

TEST(Run, ChangedSpecInvalidatesState) {
    auto spec = spec_for("run-invalidate", naive_pairs(100));
    auto tuner = std::make_shared<ScriptedTuner>();
    RunOptions o;
    o.backend = tuner;
    run_experiment(spec, o);
    spec.generation.beam_count = 3;
    run_experiment(spec, o);
    EXPECT_EQ(tuner->submitted, 6);
}

TEST(Run, RejectsBadSetups) {
    auto spec = spec_for("run-bad", naive_pairs(50));
    RunOptions o;
    o.backend = std::make_shared<Unhealthy>();
    EXPECT_THROW(run_experiment(spec, o), validation_error);
    o.backend = StubBackend::copy();
    spec.language = LanguageId::python;
    EXPECT_THROW(run_experiment(spec, o), validation_error);
    spec.language.reset();
    spec.sampling.seeds = {1, 1};
    EXPECT_THROW(run_experiment(spec, o), sampling_error);
}

TEST(Compare, RelativeImprovement) {
    const auto t = compare_runs({fake_result("ft", 13.93), fake_result("pt", 15.57)}, "ft");
    ASSERT_EQ(t.rows.size(), 2u);
    EXPECT_FALSE(t.rows[0].em_improvement);
    EXPECT_EQ(fmt2(*t.rows[1].em_improvement), "11.77");
    EXPECT_NE(render_comparison(t).find("+11.77%"), std::string::npos);
    EXPECT_EQ(*compare_runs({fake_result("a", 40), fake_result("b", 40)}, "a").rows[1].em_improvement, 0.0);
}

TEST(Compare, ZeroBaselineNote) {
    const auto t = compare_runs({fake_result("ft", 0), fake_result("pt", 54.17)}, "ft");
    EXPECT_FALSE(t.rows[1].em_improvement);
    EXPECT_EQ(t.rows[1].note, "0 → 54.17");
}

TEST(Compare, MismatchedManifestsRejected) {
    EXPECT_THROW(compare_runs({fake_result("a", 1, "m1"), fake_result("b", 2, "m2")}, "a"), comparison_error);
    auto other = fake_result("b", 2);
    other.dataset = "other.jsonl";
    EXPECT_THROW(compare_runs({fake_result("a", 1), other}, "a"), comparison_error);
    EXPECT_THROW(compare_runs({fake_result("a", 1)}, "zzz"), comparison_error);
}

TEST(Compare, MultiArmRunsGetQualifiedIds) {
    auto r = fake_result("pt", 10);
    r.arms.push_back(r.arms[0]);
    r.arms[1].template_id = "HBP2";
    const auto t = compare_runs({r}, "pt/HBP1");
    EXPECT_EQ(t.rows[1].id, "pt/HBP2");
}

TEST(Report, Layouts) {
    auto ft = fake_result("ft", 13.93);
    ft.tune_mode = TuneMode::fine_tune;
    const auto pt = fake_result("pt", 15.57);
    const auto vi = render_report({ft, pt}, ReportLayout::table_vi);
    EXPECT_NE(vi.find("| data.jsonl | codet5p-220m | Fine-tuning | 13.93 |"), std::string::npos) << vi;
    EXPECT_NE(vi.find("| Prompt tuning | 15.57 |"), std::string::npos) << vi;
    EXPECT_NE(render_report({pt}, ReportLayout::csv).find("pt,data.jsonl,codet5p-220m,Prompt tuning,HBP1,0,rate,15.57"),
              std::string::npos);
    const auto j = json::parse(render_report({pt}, ReportLayout::json));
    EXPECT_EQ(j[0].at("em"), "15.57");
    EXPECT_THROW(parse_layout("tableV"), layout_error);
    EXPECT_EQ(parse_layout("tableIX"), ReportLayout::table_ix);
}

TEST(Report, TableSevenNeedsSevenRows) {
    auto r = fake_result("bp", 1);
    EXPECT_THROW(render_report({r}, ReportLayout::table_vii), layout_error);
    for (int i = 2; i <= 7; ++i) {
        r.arms.push_back(r.arms[0]);
        r.arms.back().template_id = "HBP" + std::to_string(i);
    }
    const auto text = render_report({r}, ReportLayout::table_vii);
    EXPECT_NE(text.find("| HBP7 | 1.00 |"), std::string::npos);
}

TEST(Report, TableNineGridsShots) {
    std::vector<ExperimentResult> rs;
    for (std::size_t k : {1, 8, 16, 32}) {
        for (auto mode : {TuneMode::fine_tune, TuneMode::prompt_tune}) {
            auto r = fake_result("k" + std::to_string(k), static_cast<double>(k));
            r.sampling = SamplingMode::shots;
            r.shots = k;
            r.tune_mode = mode;
            rs.push_back(r);
        }
    }
    const auto text = render_report(rs, ReportLayout::table_ix);
    EXPECT_NE(text.find("32-shot EM"), std::string::npos);
    EXPECT_NE(text.find("| codet5p-220m | Fine-tuning | 1.00 | 0.00 | 8.00 |"), std::string::npos) << text;
    rs.push_back(rs[0]);
    EXPECT_THROW(render_report(rs, ReportLayout::table_ix), layout_error);
    EXPECT_THROW(render_report({fake_result("x", 1)}, ReportLayout::table_ix), layout_error);
    const auto path = emit_report({fake_result("x", 1)}, ReportLayout::csv, pbtest::scratch("emit"));
    EXPECT_EQ(path.filename(), "report.csv");
}
