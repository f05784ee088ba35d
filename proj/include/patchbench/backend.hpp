#pragma once

// Model access: generation and tuning jobs behind one interface, with an
// offline stub and an HTTP client for the tuning worker.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "error.hpp"
#include "instance.hpp"
#include "template.hpp"

namespace patchbench {

inline constexpr int protocol_version = 1;
inline constexpr const char* protocol_header = "X-Patchbench-Proto";

struct GenerationParams {
    int beam_count = 5;
    double temperature = 1.0;
    bool sample = false;
    double top_p = 0.9;
    double repetition_penalty = 1.0;
    int max_new_tokens = 512;

    void validate() const {
        if (beam_count < 1) throw validation_error("beam_count must be at least 1");
        if (!(top_p > 0 && top_p <= 1)) throw validation_error("top_p must lie in (0, 1]");
        if (!(temperature > 0)) throw validation_error("temperature must be positive");
        if (!(repetition_penalty > 0)) throw validation_error("repetition_penalty must be positive");
        if (max_new_tokens < 1) throw validation_error("max_new_tokens must be at least 1");
    }
    bool operator==(const GenerationParams&) const = default;
};

enum class TuneMode { fine_tune, prompt_tune };

inline std::string_view to_string(TuneMode m) noexcept { return m == TuneMode::fine_tune ? "fine_tune" : "prompt_tune"; }

inline TuneMode parse_tune_mode(std::string_view s) {
    if (s == "fine_tune") return TuneMode::fine_tune;
    if (s == "prompt_tune") return TuneMode::prompt_tune;
    throw validation_error("unknown tuning mode '" + std::string(s) + "'");
}

struct TuneParams {
    std::string optimizer = "adamw";
    double epsilon = 1e-8;
    double learning_rate = 5e-5;
    std::string scheduler = "linear";
    int epochs = 10;
    TuneMode mode = TuneMode::prompt_tune;

    void validate() const {
        if (!(learning_rate > 0)) throw validation_error("learning_rate must be positive");
        if (epochs < 1) throw validation_error("epochs must be at least 1");
        if (!(epsilon > 0)) throw validation_error("optimizer epsilon must be positive");
    }
    bool operator==(const TuneParams&) const = default;
};

enum class JobStatus { queued, running, done, failed };

inline std::string_view to_string(JobStatus s) noexcept {
    switch (s) {
    case JobStatus::queued: return "queued";
    case JobStatus::running: return "running";
    case JobStatus::done: return "done";
    case JobStatus::failed: return "failed";
    }
    return "?";
}

inline JobStatus parse_job_status(std::string_view s) {
    if (s == "queued") return JobStatus::queued;
    if (s == "running") return JobStatus::running;
    if (s == "done") return JobStatus::done;
    if (s == "failed") return JobStatus::failed;
    throw protocol_error(0, "unknown job status '" + std::string(s) + "'");
}

/// What poll reports about a job.
struct JobState {
    std::string job_id;
    JobStatus status = JobStatus::queued;
    std::size_t steps_done = 0;
    std::vector<double> loss_curve;
    std::optional<std::string> checkpoint_ref;
    std::optional<std::string> reason; // set when failed
};

struct RepairJob {
    std::string job_id; // empty until submitted
    TuneMode mode = TuneMode::prompt_tune;
    std::vector<PromptTemplate> templates;
    std::vector<RepairInstance> train;
    std::vector<RepairInstance> val;
    TuneParams params;
    std::string model_id;
    JobState state;

    /// Moves the job to a new reported state. Status may only go forward
    /// (queued -> running -> done | failed).
    void advance(const JobState& next) {
        auto rank = [](JobStatus s) { return s == JobStatus::queued ? 0 : s == JobStatus::running ? 1 : 2; };
        const bool terminal = state.status == JobStatus::done || state.status == JobStatus::failed;
        if (rank(next.status) < rank(state.status) || (terminal && next.status != state.status)) {
            throw protocol_error(0, "job " + job_id + " went from " + std::string(to_string(state.status)) + " to " +
                                        std::string(to_string(next.status)));
        }
        state = next;
    }
};

/// Resolves a manifest of ids against a pool of instances, keeping manifest
/// order. A missing id is a validation error.
inline std::vector<RepairInstance> resolve_manifest(const std::vector<std::string>& ids, const std::vector<RepairInstance>& pool) {
    std::map<std::string, const RepairInstance*> by_id;
    for (const auto& inst : pool) by_id.emplace(inst.id, &inst);
    std::vector<RepairInstance> out;
    out.reserve(ids.size());
    for (const auto& id : ids) {
        auto it = by_id.find(id);
        if (it == by_id.end()) throw validation_error("manifest references unknown instance '" + id + "'");
        out.push_back(*it->second);
    }
    return out;
}

/// Checks a job before it is queued.
inline void validate_job(const RepairJob& job) {
    job.params.validate();
    if (job.params.mode != job.mode) throw validation_error("job mode and tune_params mode disagree");
    if (job.train.empty()) throw validation_error("training manifest is empty");
    if (job.model_id.empty()) throw validation_error("job has no model id");
    if (job.mode == TuneMode::prompt_tune && job.templates.empty()) {
        throw validation_error("prompt tuning needs at least one template");
    }
    for (const auto& inst : job.train) validate(inst);
    for (const auto& inst : job.val) validate(inst);
}

/// One generation outcome. Exactly one of text / error is set.
struct GenerationResult {
    std::string instance_id;
    std::optional<std::string> text;
    std::optional<std::string> error;

    bool ok() const noexcept { return text.has_value(); }
    bool operator==(const GenerationResult&) const = default;
};

struct HealthInfo {
    bool ok = false;
    std::vector<std::string> model_ids;
};

/// Shared handle for generation and tuning. Implementations are safe for
/// concurrent calls.
class Backend {
  public:
    virtual ~Backend() = default;

    /// One result per prompt, in prompt order. Per-item failures are error
    /// entries; an unreachable backend throws transport_error.
    virtual std::vector<GenerationResult> generate(const std::vector<CompiledPrompt>& prompts, const GenerationParams& params) = 0;
    virtual std::string submit_tune(const RepairJob& job) = 0;
    virtual JobState poll(const std::string& job_id) = 0;
    virtual HealthInfo health() = 0;
    /// Short description for provenance records.
    virtual std::string describe() const = 0;
    /// Whether tuning does anything (the stub skips it).
    virtual bool tunes() const = 0;
    /// Checkpoint used by later generate calls, e.g. after a tuning job.
    virtual void set_model_ref(const std::string& ref) = 0;
};

// ---------------------------------------------------------------------------
// JSON

inline void to_json(json& j, const GenerationParams& p) {
    j = json{{"beam_count", static_cast<double>(p.beam_count)},
             {"temperature", p.temperature},
             {"sample", p.sample},
             {"top_p", p.top_p},
             {"repetition_penalty", p.repetition_penalty},
             {"max_new_tokens", static_cast<double>(p.max_new_tokens)}};
}

namespace detail {

inline int json_int(const json& j, const char* key, int fallback) {
    auto it = j.find(key);
    if (it == j.end()) return fallback;
    const double v = it->get<double>();
    if (v != std::floor(v)) throw validation_error(std::string(key) + " must be a whole number");
    return static_cast<int>(v);
}

} // namespace detail

inline void from_json(const json& j, GenerationParams& p) {
    const GenerationParams d;
    p.beam_count = detail::json_int(j, "beam_count", d.beam_count);
    p.temperature = j.value("temperature", d.temperature);
    p.sample = j.value("sample", d.sample);
    p.top_p = j.value("top_p", d.top_p);
    p.repetition_penalty = j.value("repetition_penalty", d.repetition_penalty);
    p.max_new_tokens = detail::json_int(j, "max_new_tokens", d.max_new_tokens);
}

inline void to_json(json& j, const TuneParams& p) {
    j = json{{"optimizer", p.optimizer},       {"epsilon", p.epsilon},
             {"learning_rate", p.learning_rate}, {"scheduler", p.scheduler},
             {"epochs", static_cast<double>(p.epochs)}, {"mode", std::string(to_string(p.mode))}};
}

inline void from_json(const json& j, TuneParams& p) {
    const TuneParams d;
    p.optimizer = j.value("optimizer", d.optimizer);
    p.epsilon = j.value("epsilon", d.epsilon);
    p.learning_rate = j.value("learning_rate", d.learning_rate);
    p.scheduler = j.value("scheduler", d.scheduler);
    p.epochs = detail::json_int(j, "epochs", d.epochs);
    p.mode = parse_tune_mode(j.value("mode", std::string(to_string(d.mode))));
}

inline void to_json(json& j, const JobState& s) {
    j = json{{"job_id", s.job_id},
             {"status", std::string(to_string(s.status))},
             {"steps_done", static_cast<double>(s.steps_done)},
             {"loss_curve", s.loss_curve}};
    if (s.checkpoint_ref) j["checkpoint_ref"] = *s.checkpoint_ref;
    if (s.reason) j["error"] = *s.reason;
}

inline void from_json(const json& j, JobState& s) {
    s.job_id = j.value("job_id", std::string());
    s.status = parse_job_status(j.at("status").get<std::string>());
    s.steps_done = static_cast<std::size_t>(j.value("steps_done", 0.0));
    s.loss_curve = j.value("loss_curve", std::vector<double>{});
    s.checkpoint_ref.reset();
    s.reason.reset();
    if (auto it = j.find("checkpoint_ref"); it != j.end() && it->is_string()) s.checkpoint_ref = it->get<std::string>();
    if (auto it = j.find("error"); it != j.end() && it->is_string()) s.reason = it->get<std::string>();
}

inline void to_json(json& j, const GenerationResult& r) {
    j = json{{"instance_id", r.instance_id}};
    if (r.text) j["text"] = *r.text;
    else j["error"] = r.error.value_or("unknown error");
}

inline void from_json(const json& j, GenerationResult& r) {
    r.instance_id = j.at("instance_id").get<std::string>();
    r.text.reset();
    r.error.reset();
    if (auto it = j.find("text"); it != j.end() && it->is_string()) r.text = it->get<std::string>();
    else if (auto e = j.find("error"); e != j.end() && e->is_string()) r.error = e->get<std::string>();
    else throw protocol_error(0, "result for '" + r.instance_id + "' has neither text nor error");
}

/// Request bodies of the wire protocol.
inline json generate_request(const std::string& model_ref, const std::vector<CompiledPrompt>& prompts,
                             const GenerationParams& params) {
    return json{{"model_ref", model_ref}, {"params", params}, {"prompts", prompts}};
}

inline json tune_request(const RepairJob& job) {
    json templates = json::array();
    // fine_tune uses the plain input format; templates are not sent.
    if (job.mode == TuneMode::prompt_tune) templates = job.templates;
    return json{{"mode", std::string(to_string(job.mode))},
                {"model_id", job.model_id},
                {"tune_params", job.params},
                {"templates", std::move(templates)},
                {"train", job.train},
                {"val", job.val}};
}

// ---------------------------------------------------------------------------
// Stub

enum class StubMode { copy, oracle_table, fixed_text };

/// Deterministic offline backend. copy returns the prompt's input text
/// (the buggy code), oracle_table looks the instance up, fixed_text returns
/// the same text for everything. Tuning jobs finish at once.
class StubBackend final : public Backend {
  public:
    explicit StubBackend(StubMode mode, std::map<std::string, std::string> table = {}, std::string fixed = {})
        : mode_(mode), table_(std::move(table)), fixed_(std::move(fixed)) {}

    static std::shared_ptr<StubBackend> copy() { return std::make_shared<StubBackend>(StubMode::copy); }
    static std::shared_ptr<StubBackend> oracle_table(std::map<std::string, std::string> table) {
        return std::make_shared<StubBackend>(StubMode::oracle_table, std::move(table));
    }
    static std::shared_ptr<StubBackend> fixed_text(std::string text) {
        return std::make_shared<StubBackend>(StubMode::fixed_text, std::map<std::string, std::string>{}, std::move(text));
    }

    std::vector<GenerationResult> generate(const std::vector<CompiledPrompt>& prompts, const GenerationParams& params) override {
        params.validate();
        std::vector<GenerationResult> out;
        out.reserve(prompts.size());
        for (const auto& p : prompts) {
            GenerationResult r{p.instance_id, std::nullopt, std::nullopt};
            switch (mode_) {
            case StubMode::copy: r.text = p.input_text(); break;
            case StubMode::fixed_text: r.text = fixed_; break;
            case StubMode::oracle_table:
                if (auto it = table_.find(p.instance_id); it != table_.end()) r.text = it->second;
                else r.error = "no table entry for '" + p.instance_id + "'";
                break;
            }
            out.push_back(std::move(r));
        }
        return out;
    }

    std::string submit_tune(const RepairJob& job) override {
        validate_job(job);
        std::lock_guard lock(mu_);
        JobState s;
        s.job_id = "stub-job-" + std::to_string(jobs_.size() + 1);
        s.status = JobStatus::done;
        s.steps_done = static_cast<std::size_t>(job.params.epochs) * job.train.size();
        s.checkpoint_ref = "stub-noop";
        jobs_.emplace(s.job_id, s);
        return s.job_id;
    }

    JobState poll(const std::string& job_id) override {
        std::lock_guard lock(mu_);
        auto it = jobs_.find(job_id);
        if (it == jobs_.end()) throw validation_error("unknown job '" + job_id + "'");
        return it->second;
    }

    HealthInfo health() override { return {true, {"stub"}}; }

    std::string describe() const override {
        switch (mode_) {
        case StubMode::copy: return "stub:copy";
        case StubMode::oracle_table: return "stub:table(" + std::to_string(table_.size()) + ")";
        case StubMode::fixed_text: return "stub:fixed";
        }
        return "stub";
    }

    bool tunes() const override { return false; }
    void set_model_ref(const std::string&) override {}
    StubMode mode() const noexcept { return mode_; }

  private:
    StubMode mode_;
    std::map<std::string, std::string> table_;
    std::string fixed_;
    std::mutex mu_;
    std::map<std::string, JobState> jobs_;
};

/// Reads an oracle table: a JSON object {id: text}, or JSON-Lines of
/// {"id", "text"} objects.
inline std::map<std::string, std::string> load_oracle_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open oracle table '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    const auto text = ss.str();
    std::map<std::string, std::string> table;
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return table;
    try {
        if (text[first] == '{' && json::accept(text)) {
            const auto j = json::parse(text);
            for (auto it = j.begin(); it != j.end(); ++it) table[it.key()] = it.value().get<std::string>();
            return table;
        }
        std::istringstream lines(text);
        std::string line;
        std::size_t no = 0;
        while (std::getline(lines, line)) {
            ++no;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            json j;
            try {
                j = json::parse(line);
            } catch (const json::exception& e) {
                throw load_error(no, e.what());
            }
            if (!j.contains("id") || !j.contains("text")) throw load_error(no, "table entry needs id and text");
            table[j.at("id").get<std::string>()] = j.at("text").get<std::string>();
        }
    } catch (const json::exception& e) {
        throw config_error("bad oracle table '" + path + "': " + e.what());
    }
    return table;
}

// ---------------------------------------------------------------------------
// Remote

struct RemoteOptions {
    std::string model_ref;
    std::size_t batch_size = 8;
    std::size_t max_in_flight = 4;
    int attempts = 3;
    std::chrono::milliseconds backoff{200}; // doubled after every failed attempt
    std::chrono::seconds connect_timeout{5};
    std::chrono::seconds read_timeout{600};
};

/// Client for the tuning worker's JSON-over-HTTP protocol.
class RemoteBackend final : public Backend {
  public:
    explicit RemoteBackend(std::string url, RemoteOptions opts = {}) : opts_(std::move(opts)) {
        if (opts_.batch_size == 0 || opts_.max_in_flight == 0 || opts_.attempts < 1) {
            throw config_error("remote backend options must be positive");
        }
        // "http://host:port/prefix" -> host part and path prefix
        const auto scheme = url.find("://");
        const auto path_at = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
        host_ = path_at == std::string::npos ? url : url.substr(0, path_at);
        prefix_ = path_at == std::string::npos ? "" : url.substr(path_at);
        while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
        if (host_.empty()) throw config_error("empty worker url");
        model_ref_ = opts_.model_ref;
    }

    std::vector<GenerationResult> generate(const std::vector<CompiledPrompt>& prompts, const GenerationParams& params) override {
        if (prompts.empty()) throw validation_error("generate needs at least one prompt");
        params.validate();
        const std::string model_ref = current_model_ref();
        const std::size_t batches = (prompts.size() + opts_.batch_size - 1) / opts_.batch_size;
        std::vector<std::vector<GenerationResult>> parts(batches);
        std::vector<std::exception_ptr> errors(batches);
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (;;) {
                const auto b = next.fetch_add(1);
                if (b >= batches) return;
                const auto from = b * opts_.batch_size;
                const auto to = std::min(prompts.size(), from + opts_.batch_size);
                const std::vector<CompiledPrompt> batch(prompts.begin() + static_cast<std::ptrdiff_t>(from),
                                                        prompts.begin() + static_cast<std::ptrdiff_t>(to));
                try {
                    parts[b] = send_batch(model_ref, batch, params);
                } catch (...) {
                    errors[b] = std::current_exception();
                }
            }
        };
        std::vector<std::thread> pool;
        const auto n = std::min(batches, opts_.max_in_flight);
        for (std::size_t i = 0; i < n; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
        for (auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
        std::vector<GenerationResult> out;
        out.reserve(prompts.size());
        for (auto& p : parts) std::move(p.begin(), p.end(), std::back_inserter(out));
        return out;
    }

    std::string submit_tune(const RepairJob& job) override {
        validate_job(job);
        const auto body = call("POST", "/v1/tune", tune_request(job));
        if (!body.contains("job_id") || !body["job_id"].is_string()) throw protocol_error(200, "tune response lacks job_id");
        return body["job_id"].get<std::string>();
    }

    JobState poll(const std::string& job_id) override {
        auto s = call("GET", "/v1/jobs/" + job_id, nullptr).get<JobState>();
        if (s.job_id.empty()) s.job_id = job_id;
        return s;
    }

    HealthInfo health() override {
        const auto body = call("GET", "/v1/health", nullptr);
        return {body.value("ok", false), body.value("model_ids", std::vector<std::string>{})};
    }

    std::string describe() const override { return "remote:" + host_ + prefix_; }
    bool tunes() const override { return true; }

    void set_model_ref(const std::string& ref) override {
        std::lock_guard lock(mu_);
        model_ref_ = ref;
    }

  private:
    std::string current_model_ref() {
        std::lock_guard lock(mu_);
        return model_ref_;
    }

    std::vector<GenerationResult> send_batch(const std::string& model_ref, const std::vector<CompiledPrompt>& batch,
                                             const GenerationParams& params) {
        const auto body = call("POST", "/v1/generate", generate_request(model_ref, batch, params));
        if (!body.contains("results") || !body["results"].is_array()) throw protocol_error(200, "generate response lacks results");
        auto results = body["results"].get<std::vector<GenerationResult>>();
        if (results.size() != batch.size()) {
            throw protocol_error(200, "worker returned " + std::to_string(results.size()) + " results for " +
                                          std::to_string(batch.size()) + " prompts");
        }
        for (std::size_t i = 0; i < batch.size(); ++i) {
            if (results[i].instance_id != batch[i].instance_id) {
                throw protocol_error(200, "result order does not match prompt order at " + std::to_string(i));
            }
        }
        return results;
    }

    json call(const std::string& method, const std::string& path, const json& body) {
        std::string last;
        auto delay = opts_.backoff;
        for (int attempt = 1; attempt <= opts_.attempts; ++attempt) {
            httplib::Client cli(host_);
            cli.set_connection_timeout(opts_.connect_timeout);
            cli.set_read_timeout(opts_.read_timeout);
            const httplib::Headers headers{{protocol_header, std::to_string(protocol_version)}};
            const auto full = prefix_ + path;
            auto res = method == "GET" ? cli.Get(full, headers) : cli.Post(full, headers, body.dump(), "application/json");
            if (!res) {
                last = method + " " + full + ": " + httplib::to_string(res.error());
            } else if (res->status >= 500) {
                last = method + " " + full + ": HTTP " + std::to_string(res->status);
            } else if (res->status >= 400) {
                std::string msg = res->body;
                if (json::accept(res->body)) {
                    const auto j = json::parse(res->body);
                    if (j.is_object() && j.contains("error") && j["error"].is_string()) msg = j["error"].get<std::string>();
                }
                throw protocol_error(res->status, method + " " + full + ": " + msg);
            } else {
                if (res->has_header(protocol_header) && res->get_header_value(protocol_header) != std::to_string(protocol_version)) {
                    throw protocol_error(res->status, "worker speaks protocol " + res->get_header_value(protocol_header));
                }
                if (!json::accept(res->body)) throw protocol_error(res->status, method + " " + full + ": body is not JSON");
                return json::parse(res->body);
            }
            if (attempt < opts_.attempts) {
                std::this_thread::sleep_for(delay);
                delay *= 2;
            }
        }
        throw transport_error(last, opts_.attempts, true);
    }

    RemoteOptions opts_;
    std::string host_;
    std::string prefix_;
    std::mutex mu_;
    std::string model_ref_;
};

/// Builds a backend from "stub:copy", "stub:table=<file>", "stub:fixed=<text>"
/// or "remote:<url>". A bare "remote" uses PATCHBENCH_WORKER_URL.
inline std::shared_ptr<Backend> make_backend(const std::string& spec, RemoteOptions opts = {}) {
    if (spec == "stub:copy") return StubBackend::copy();
    if (spec.rfind("stub:table=", 0) == 0) return StubBackend::oracle_table(load_oracle_table(spec.substr(11)));
    if (spec.rfind("stub:fixed=", 0) == 0) return StubBackend::fixed_text(spec.substr(11));
    if (spec == "remote" || spec == "remote:") {
        const char* env = std::getenv("PATCHBENCH_WORKER_URL");
        if (!env || !*env) throw config_error("remote backend needs a url or PATCHBENCH_WORKER_URL");
        return std::make_shared<RemoteBackend>(env, std::move(opts));
    }
    if (spec.rfind("remote:", 0) == 0) return std::make_shared<RemoteBackend>(spec.substr(7), std::move(opts));
    throw config_error("unknown backend '" + spec + "'");
}

} // namespace patchbench
