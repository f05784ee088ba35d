#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include "test_support.hpp"

using namespace patchbench;

namespace {

RepairInstance inst(const std::string& id, const std::string& buggy = "return a - b;", const std::string& fixed = "return a + b;") {
    RepairInstance r;
    r.id = id;
    r.buggy_code = buggy;
    r.fixed_code = fixed;
    return r;
}

std::vector<CompiledPrompt> prompts(std::size_t n) {
    const auto t = *find_builtin("HBP1", ModelStyle::infilling);
    std::vector<CompiledPrompt> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(instantiate(t, inst("p" + std::to_string(i), "code " + std::to_string(i))));
    return out;
}

RepairJob job(TuneMode mode = TuneMode::prompt_tune) {
    RepairJob j;
    j.mode = mode;
    j.params.mode = mode;
    j.params.epochs = 2;
    j.model_id = "codet5p-220m";
    j.templates = {*find_builtin("SBP1-init", ModelStyle::infilling)};
    j.train = {inst("t1"), inst("t2"), inst("t3")};
    j.val = {inst("v1")};
    return j;
}

/// In-process worker speaking the wire protocol. Paths under /flaky fail
/// with 503 a set number of times; paths under /bad answer 400.
class FakeWorker {
  public:
    FakeWorker() {
        srv_.Get("/v1/health", [this](const httplib::Request& req, httplib::Response& res) {
            saw_header_ = req.get_header_value(protocol_header) == std::to_string(protocol_version);
            reply(res, json{{"ok", true}, {"model_ids", {"codet5p-220m"}}});
        });
        srv_.Post("/v1/generate", [this](const httplib::Request& req, httplib::Response& res) {
            const auto body = json::parse(req.body);
            ++batches_;
            json results = json::array();
            for (const auto& p : body.at("prompts")) {
                const auto cp = p.get<CompiledPrompt>();
                results.push_back({{"instance_id", cp.instance_id}, {"text", body.at("model_ref").get<std::string>() + "|" + cp.input_text()}});
            }
            reply(res, json{{"results", results}});
        });
        srv_.Post("/v1/tune", [this](const httplib::Request& req, httplib::Response& res) {
            std::lock_guard lock(mu_);
            last_tune_ = json::parse(req.body);
            reply(res, json{{"job_id", "job-1"}});
        });
        srv_.Get(R"(/v1/jobs/([\w-]+))", [this](const httplib::Request& req, httplib::Response& res) {
            const auto n = polls_++;
            JobState s;
            s.job_id = req.matches[1];
            s.status = n == 0 ? JobStatus::queued : n == 1 ? JobStatus::running : JobStatus::done;
            s.steps_done = n * 3;
            s.loss_curve = {2.0, 1.5, 1.1};
            if (s.status == JobStatus::done) s.checkpoint_ref = "ckpt-" + s.job_id;
            reply(res, json(s));
        });
        srv_.Get("/flaky/v1/health", [this](const httplib::Request&, httplib::Response& res) {
            if (failures_left_-- > 0) {
                res.status = 503;
                return;
            }
            reply(res, json{{"ok", true}, {"model_ids", json::array()}});
        });
        srv_.Post("/bad/v1/generate", [](const httplib::Request&, httplib::Response& res) {
            res.status = 400;
            res.set_content(R"({"error":"unknown model_ref"})", "application/json");
        });
        srv_.Get("/future/v1/health", [](const httplib::Request&, httplib::Response& res) {
            res.set_header(protocol_header, "99");
            res.set_content(R"({"ok":true})", "application/json");
        });
        port_ = srv_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { srv_.listen_after_bind(); });
        srv_.wait_until_ready();
    }
    ~FakeWorker() {
        srv_.stop();
        thread_.join();
    }

    std::string url(const std::string& prefix = "") const { return "http://127.0.0.1:" + std::to_string(port_) + prefix; }
    void fail_next(int n) { failures_left_ = n; }
    int flaky_failures_left() const { return failures_left_; }
    int batches() const { return batches_; }
    bool saw_header() const { return saw_header_; }
    json last_tune() {
        std::lock_guard lock(mu_);
        return last_tune_;
    }

  private:
    static void reply(httplib::Response& res, const json& j) {
        res.set_header(protocol_header, std::to_string(protocol_version));
        res.set_content(j.dump(), "application/json");
    }

    httplib::Server srv_;
    std::thread thread_;
    int port_ = 0;
    std::atomic<int> failures_left_{0};
    std::atomic<int> batches_{0};
    std::atomic<int> polls_{0};
    std::atomic<bool> saw_header_{false};
    std::mutex mu_;
    json last_tune_;
};

RemoteOptions fast(std::string model_ref = "base") {
    RemoteOptions o;
    o.model_ref = std::move(model_ref);
    o.batch_size = 3;
    o.backoff = std::chrono::milliseconds(5);
    o.connect_timeout = std::chrono::seconds(1);
    o.read_timeout = std::chrono::seconds(5);
    return o;
}

} // namespace

TEST(Stub, CopyReturnsInput) {
    auto b = StubBackend::copy();
    const auto ps = prompts(4);
    const auto rs = b->generate(ps, {});
    ASSERT_EQ(rs.size(), 4u);
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_EQ(rs[i].instance_id, ps[i].instance_id);
        EXPECT_EQ(rs[i].text, ps[i].input_text());
    }
    EXPECT_FALSE(b->tunes());
    EXPECT_EQ(b->describe(), "stub:copy");
    EXPECT_TRUE(b->health().ok);
}

TEST(Stub, OracleTableAndFixedText) {
    auto t = StubBackend::oracle_table({{"p0", "fixed zero"}});
    const auto rs = t->generate(prompts(2), {});
    EXPECT_EQ(rs[0].text, "fixed zero");
    EXPECT_FALSE(rs[1].ok());
    EXPECT_NE(rs[1].error->find("p1"), std::string::npos);
    auto f = StubBackend::fixed_text("x");
    for (const auto& r : f->generate(prompts(3), {})) EXPECT_EQ(r.text, "x");
}

TEST(Stub, RejectsBadParams) {
    GenerationParams p;
    p.top_p = 0;
    EXPECT_THROW(StubBackend::copy()->generate(prompts(1), p), validation_error);
    p = {};
    p.beam_count = 0;
    EXPECT_THROW(p.validate(), validation_error);
}

TEST(Stub, TuneFinishesAtOnce) {
    auto b = StubBackend::copy();
    const auto id = b->submit_tune(job());
    EXPECT_EQ(id, "stub-job-1");
    const auto s = b->poll(id);
    EXPECT_EQ(s.status, JobStatus::done);
    EXPECT_EQ(s.checkpoint_ref, "stub-noop");
    EXPECT_EQ(s.steps_done, 6u);
    EXPECT_EQ(b->submit_tune(job()), "stub-job-2");
    EXPECT_THROW(b->poll("nope"), validation_error);
}

TEST(Jobs, AdvanceIsForwardOnly) {
    auto j = job();
    j.job_id = "j";
    JobState s;
    s.status = JobStatus::running;
    j.advance(s);
    s.status = JobStatus::running;
    EXPECT_NO_THROW(j.advance(s));
    s.status = JobStatus::queued;
    EXPECT_THROW(j.advance(s), protocol_error);
    s.status = JobStatus::failed;
    j.advance(s);
    s.status = JobStatus::done;
    EXPECT_THROW(j.advance(s), protocol_error);
}

TEST(Jobs, Validation) {
    EXPECT_NO_THROW(validate_job(job()));
    auto j = job();
    j.train.clear();
    EXPECT_THROW(validate_job(j), validation_error);
    j = job();
    j.params.mode = TuneMode::fine_tune;
    EXPECT_THROW(validate_job(j), validation_error);
    j = job();
    j.templates.clear();
    EXPECT_THROW(validate_job(j), validation_error);
    j = job(TuneMode::fine_tune);
    j.templates.clear();
    EXPECT_NO_THROW(validate_job(j));
    j = job();
    j.params.learning_rate = 0;
    EXPECT_THROW(validate_job(j), validation_error);
    j = job();
    j.train[0].fixed_code.clear();
    EXPECT_THROW(validate_job(j), record_error);
}

TEST(Jobs, ResolveManifestKeepsOrder) {
    const std::vector<RepairInstance> pool{inst("a"), inst("b"), inst("c")};
    const auto got = resolve_manifest({"c", "a"}, pool);
    ASSERT_EQ(got.size(), 2u);
    EXPECT_EQ(got[0].id, "c");
    EXPECT_EQ(got[1].id, "a");
    EXPECT_THROW(resolve_manifest({"z"}, pool), validation_error);
}

TEST(Wire, GenerateRequestShape) {
    const auto j = generate_request("ckpt", prompts(2), {});
    EXPECT_EQ(j.at("model_ref"), "ckpt");
    EXPECT_EQ(j.at("prompts").size(), 2u);
    EXPECT_EQ(j.at("params").at("beam_count"), 5);
    EXPECT_EQ(j.at("params").get<GenerationParams>(), GenerationParams{});
}

TEST(Wire, TuneRequestShape) {
    const auto pt = tune_request(job());
    EXPECT_EQ(pt.at("mode"), "prompt_tune");
    EXPECT_EQ(pt.at("templates").size(), 1u);
    EXPECT_EQ(pt.at("train").size(), 3u);
    EXPECT_EQ(pt.at("val").size(), 1u);
    EXPECT_EQ(pt.at("tune_params").get<TuneParams>(), job().params);
    const auto ft = tune_request(job(TuneMode::fine_tune));
    EXPECT_EQ(ft.at("mode"), "fine_tune");
    EXPECT_TRUE(ft.at("templates").empty());
}

TEST(Wire, JobStateAndResults) {
    JobState s;
    s.job_id = "j9";
    s.status = JobStatus::failed;
    s.reason = "out of memory";
    const json j = s;
    EXPECT_EQ(j.at("error"), "out of memory");
    const auto back = j.get<JobState>();
    EXPECT_EQ(back.status, JobStatus::failed);
    EXPECT_EQ(back.reason, "out of memory");
    EXPECT_THROW(json({{"status", "paused"}}).get<JobState>(), protocol_error);
    EXPECT_THROW(json({{"instance_id", "x"}}).get<GenerationResult>(), protocol_error);
    EXPECT_EQ(json({{"instance_id", "x"}, {"error", "oom"}}).get<GenerationResult>().error, "oom");
}

TEST(OracleTable, BothFormats) {
    const auto dir = pbtest::scratch("oracle-table");
    write_file(dir / "t.json", R"({"a": "x", "b": "y"})");
    write_file(dir / "t.jsonl", "{\"id\": \"a\", \"text\": \"x\"}\n\n{\"id\": \"b\", \"text\": \"y\"}\n");
    write_file(dir / "bad.jsonl", "{\"id\": \"a\", \"text\": \"x\"}\n{\"id\": \"b\"}\n");
    const std::map<std::string, std::string> want{{"a", "x"}, {"b", "y"}};
    EXPECT_EQ(load_oracle_table((dir / "t.json").string()), want);
    EXPECT_EQ(load_oracle_table((dir / "t.jsonl").string()), want);
    try {
        load_oracle_table((dir / "bad.jsonl").string());
        FAIL();
    } catch (const load_error& e) {
        EXPECT_EQ(e.line(), 2u);
    }
    EXPECT_THROW(load_oracle_table((dir / "missing").string()), config_error);
}

TEST(Factory, Specs) {
    EXPECT_EQ(make_backend("stub:copy")->describe(), "stub:copy");
    EXPECT_EQ(make_backend("stub:fixed=hi")->describe(), "stub:fixed");
    EXPECT_EQ(make_backend("remote:http://127.0.0.1:9/w/")->describe(), "remote:http://127.0.0.1:9/w");
    EXPECT_THROW(make_backend("gpt"), config_error);
    ::setenv("PATCHBENCH_WORKER_URL", "http://127.0.0.1:9", 1);
    EXPECT_EQ(make_backend("remote")->describe(), "remote:http://127.0.0.1:9");
    ::unsetenv("PATCHBENCH_WORKER_URL");
    EXPECT_THROW(make_backend("remote"), config_error);
}

TEST(Remote, HealthSendsProtocolHeader) {
    FakeWorker w;
    RemoteBackend b(w.url(), fast());
    const auto h = b.health();
    EXPECT_TRUE(h.ok);
    EXPECT_EQ(h.model_ids, std::vector<std::string>{"codet5p-220m"});
    EXPECT_TRUE(w.saw_header());
    EXPECT_TRUE(b.tunes());
}

TEST(Remote, GenerateBatchesKeepOrder) {
    FakeWorker w;
    RemoteBackend b(w.url(), fast());
    const auto ps = prompts(10);
    const auto rs = b.generate(ps, {});
    ASSERT_EQ(rs.size(), ps.size());
    for (std::size_t i = 0; i < ps.size(); ++i) {
        EXPECT_EQ(rs[i].instance_id, ps[i].instance_id);
        EXPECT_EQ(rs[i].text, "base|" + ps[i].input_text());
    }
    EXPECT_EQ(w.batches(), 4);
    EXPECT_EQ(b.generate(ps, {}), rs);
}

TEST(Remote, TuneLifecycleAndCheckpointSwap) {
    FakeWorker w;
    RemoteBackend b(w.url(), fast());
    auto j = job();
    j.job_id = b.submit_tune(j);
    EXPECT_EQ(j.job_id, "job-1");
    EXPECT_EQ(w.last_tune().at("mode"), "prompt_tune");
    EXPECT_EQ(w.last_tune().at("train").size(), 3u);
    std::vector<JobStatus> seen;
    while (j.state.status != JobStatus::done) {
        j.advance(b.poll(j.job_id));
        seen.push_back(j.state.status);
    }
    EXPECT_EQ(seen, (std::vector<JobStatus>{JobStatus::queued, JobStatus::running, JobStatus::done}));
    ASSERT_TRUE(j.state.checkpoint_ref);
    b.set_model_ref(*j.state.checkpoint_ref);
    EXPECT_EQ(b.generate(prompts(1), {})[0].text, "ckpt-job-1|code 0");
}

TEST(Remote, ClientErrorsAreNotRetried) {
    FakeWorker w;
    RemoteBackend b(w.url("/bad"), fast());
    try {
        b.generate(prompts(1), {});
        FAIL();
    } catch (const protocol_error& e) {
        EXPECT_EQ(e.status(), 400);
        EXPECT_NE(std::string(e.what()).find("unknown model_ref"), std::string::npos);
    }
}

TEST(Remote, ServerErrorsAreRetried) {
    FakeWorker w;
    w.fail_next(2);
    RemoteBackend b(w.url("/flaky"), fast());
    EXPECT_TRUE(b.health().ok);
    EXPECT_LT(w.flaky_failures_left(), 0);
    w.fail_next(5);
    try {
        b.health();
        FAIL();
    } catch (const transport_error& e) {
        EXPECT_EQ(e.attempts(), 3);
        EXPECT_TRUE(e.retryable());
    }
}

TEST(Remote, ProtocolVersionMismatch) {
    FakeWorker w;
    RemoteBackend b(w.url("/future"), fast());
    EXPECT_THROW(b.health(), protocol_error);
}

TEST(Remote, UnreachableWorker) {
    // bind a port and release it without ever listening
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    ASSERT_EQ(::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr), 0);
    socklen_t len = sizeof addr;
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
    const int port = ntohs(addr.sin_port);
    ::close(fd);
    RemoteBackend b("http://127.0.0.1:" + std::to_string(port), fast());
    try {
        b.health();
        FAIL();
    } catch (const transport_error& e) {
        EXPECT_EQ(e.attempts(), 3);
    }
    EXPECT_THROW(RemoteBackend("", fast()), config_error);
}
