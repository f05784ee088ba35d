#pragma once

// End-to-end experiments: sample, tune, generate, score, average over
// seeds, persist every artifact, and lay results out as report tables.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <iomanip>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <openssl/evp.h>

#include <json.hpp>

#include "backend.hpp"
#include "builtin_templates.hpp"
#include "dataset_io.hpp"
#include "error.hpp"
#include "metrics.hpp"
#include "sampling.hpp"
#include "template.hpp"

namespace patchbench {

namespace fs = std::filesystem;

/// Lower-case hex SHA-256.
inline std::string sha256_hex(std::string_view data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) throw error("SHA-256 failed");
    std::ostringstream os;
    for (unsigned i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
    return os.str();
}

inline std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw error("cannot read '" + p.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const fs::path& p, std::string_view text) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    const auto tmp = p.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw error("cannot write '" + p.string() + "'");
        out << text;
    }
    fs::rename(tmp, p);
}

/// Two-decimal fixed formatting used by every table.
inline std::string fmt2(double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << (std::abs(v) < 0.005 ? 0.0 : v);
    return os.str();
}

// ---------------------------------------------------------------------------
// Spec

struct ExperimentSpec {
    std::string name = "run";
    std::string dataset;
    DatasetSchema schema = DatasetSchema::canonical;
    std::optional<LanguageId> language; // keep only this language when set
    std::vector<std::string> template_ids{"FT"};
    std::string template_file; // extra templates, one DSL line each with an id header
    ModelStyle style = ModelStyle::infilling;
    std::string backend = "stub:copy";
    std::string model_id = "codet5p-220m";
    SamplingPlan sampling;
    GenerationParams generation;
    TuneParams tuning;
    MetricMode metric_mode = MetricMode::rate;
    CodeBleuConfig codebleu;
    std::size_t char_budget = default_char_budget;
    std::string out_dir = "out";
    std::chrono::milliseconds poll_interval{2000};
    std::chrono::seconds tune_timeout{86400};
};

namespace detail {

inline std::string trim_copy(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    return std::string(s.substr(b, s.find_last_not_of(" \t\r") - b + 1));
}

inline std::vector<std::string> split_list(std::string_view s) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        const auto comma = s.find(',', pos);
        auto part = trim_copy(s.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
        if (!part.empty()) out.push_back(std::move(part));
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
    }
    return out;
}

inline double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used == v.size()) return d;
    } catch (const std::exception&) {
    }
    throw config_error(key + ": expected a number, got '" + v + "'");
}

inline std::uint64_t to_uint(const std::string& key, const std::string& v) {
    if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos || v.size() > 19) {
        throw config_error(key + ": expected a non-negative integer, got '" + v + "'");
    }
    return std::stoull(v);
}

inline bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw config_error(key + ": expected true or false, got '" + v + "'");
}

} // namespace detail

/// Parses seeds like "1,2,3".
inline std::vector<std::uint64_t> parse_seed_list(std::string_view text) {
    std::vector<std::uint64_t> seeds;
    for (const auto& s : detail::split_list(text)) seeds.push_back(detail::to_uint("seeds", s));
    if (seeds.empty()) throw config_error("seed list is empty");
    return seeds;
}

/// Applies one "key = value" setting. Unknown keys are errors.
inline void apply_setting(ExperimentSpec& spec, const std::string& key, const std::string& v) {
    using detail::to_bool;
    using detail::to_double;
    using detail::to_uint;
    if (key == "name") spec.name = v;
    else if (key == "dataset") spec.dataset = v;
    else if (key == "schema") {
        auto s = parse_schema(v);
        if (!s) throw config_error("unknown schema '" + v + "'");
        spec.schema = *s;
    } else if (key == "language") {
        if (v.empty() || v == "any") spec.language.reset();
        else if (auto l = parse_language(v)) spec.language = *l;
        else throw config_error("unknown language '" + v + "'");
    } else if (key == "templates") spec.template_ids = detail::split_list(v);
    else if (key == "template_file") spec.template_file = v;
    else if (key == "style") {
        auto s = parse_model_style(v);
        if (!s) throw config_error("unknown model style '" + v + "'");
        spec.style = *s;
    } else if (key == "backend") spec.backend = v;
    else if (key == "model_id") spec.model_id = v;
    else if (key == "sampling") {
        if (v == "fraction") spec.sampling.mode = SamplingMode::fraction;
        else if (v == "shots") spec.sampling.mode = SamplingMode::shots;
        else throw config_error("sampling must be fraction or shots");
    } else if (key == "fraction") {
        try {
            spec.sampling.fraction = Fraction::parse(v);
        } catch (const sampling_error& e) {
            throw config_error(std::string("fraction: ") + e.what());
        }
    } else if (key == "shots") spec.sampling.shot_count = to_uint(key, v);
    else if (key == "test_size") {
        if (v.empty() || v == "split") spec.sampling.fixed_test_size.reset();
        else spec.sampling.fixed_test_size = to_uint(key, v);
    } else if (key == "seeds") spec.sampling.seeds = parse_seed_list(v);
    else if (key == "metric_mode") spec.metric_mode = parse_metric_mode(v);
    else if (key == "beam_count") spec.generation.beam_count = static_cast<int>(to_uint(key, v));
    else if (key == "temperature") spec.generation.temperature = to_double(key, v);
    else if (key == "sample") spec.generation.sample = to_bool(key, v);
    else if (key == "top_p") spec.generation.top_p = to_double(key, v);
    else if (key == "repetition_penalty") spec.generation.repetition_penalty = to_double(key, v);
    else if (key == "max_new_tokens") spec.generation.max_new_tokens = static_cast<int>(to_uint(key, v));
    else if (key == "tune_mode") spec.tuning.mode = parse_tune_mode(v);
    else if (key == "optimizer") spec.tuning.optimizer = v;
    else if (key == "adam_epsilon") spec.tuning.epsilon = to_double(key, v);
    else if (key == "learning_rate") spec.tuning.learning_rate = to_double(key, v);
    else if (key == "scheduler") spec.tuning.scheduler = v;
    else if (key == "epochs") spec.tuning.epochs = static_cast<int>(to_uint(key, v));
    else if (key == "weights") spec.codebleu.weights = parse_weights(v);
    else if (key == "compat_tokenizer") spec.codebleu.tokenizer = to_bool(key, v) ? TokenizerMode::whitespace : TokenizerMode::lexer;
    else if (key == "codebleu_profile") {
        // keeps any weights set earlier
        if (v != "default" && v != "reference_exact") throw config_error("codebleu_profile must be default or reference_exact");
        const auto w = spec.codebleu.weights;
        spec.codebleu = v == "default" ? CodeBleuConfig{} : CodeBleuConfig::reference_exact();
        spec.codebleu.weights = w;
    }
    else if (key == "char_budget") spec.char_budget = to_uint(key, v);
    else if (key == "out") spec.out_dir = v;
    else if (key == "poll_interval_ms") spec.poll_interval = std::chrono::milliseconds(to_uint(key, v));
    else if (key == "tune_timeout_s") spec.tune_timeout = std::chrono::seconds(to_uint(key, v));
    else throw config_error("unknown setting '" + key + "'");
}

/// Key-value text: one "key = value" per line, '#' starts a comment line.
inline ExperimentSpec parse_config(std::string_view text, ExperimentSpec spec = {}) {
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t no = 0;
    while (std::getline(in, line)) {
        ++no;
        const auto t = detail::trim_copy(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw config_error("line " + std::to_string(no) + ": expected key = value");
        try {
            apply_setting(spec, detail::trim_copy(std::string_view(t).substr(0, eq)), detail::trim_copy(std::string_view(t).substr(eq + 1)));
        } catch (const config_error& e) {
            throw config_error("line " + std::to_string(no) + ": " + e.what());
        }
    }
    return spec;
}

inline ExperimentSpec load_config(const std::string& path) { return parse_config(read_file(path)); }

/// Canonical description of everything that affects results (not the
/// output directory or polling cadence).
inline json spec_to_json(const ExperimentSpec& s) {
    json j{{"name", s.name},
           {"dataset", s.dataset},
           {"schema", std::string(to_string(s.schema))},
           {"language", s.language ? std::string(to_string(*s.language)) : std::string("any")},
           {"templates", s.template_ids},
           {"template_file", s.template_file},
           {"style", std::string(to_string(s.style))},
           {"backend", s.backend},
           {"model_id", s.model_id},
           {"sampling", s.sampling.mode == SamplingMode::fraction ? "fraction" : "shots"},
           {"fraction", s.sampling.fraction.str()},
           {"shots", s.sampling.shot_count},
           {"test_size", s.sampling.fixed_test_size ? json(*s.sampling.fixed_test_size) : json("split")},
           {"seeds", s.sampling.seeds},
           {"metric_mode", std::string(to_string(s.metric_mode))},
           {"generation", s.generation},
           {"tuning", s.tuning},
           {"codebleu", s.codebleu.fingerprint()},
           {"char_budget", s.char_budget}};
    return j;
}

/// SHA-256 over the canonical spec and the dataset bytes.
inline std::string spec_fingerprint(const ExperimentSpec& s, std::string_view dataset_bytes) {
    return sha256_hex(spec_to_json(s).dump() + '\n' + sha256_hex(dataset_bytes));
}

// ---------------------------------------------------------------------------
// Results

struct SeedOutcome {
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error; // why the seed failed
    MetricSummary summary;
    std::size_t train_size = 0;
    std::string test_manifest_sha; // over the sorted test ids
    std::size_t generation_errors = 0;
    std::optional<std::string> checkpoint_ref;
    bool loss_not_decreasing = false;
};

/// One template (or the plain fine-tune layout) evaluated on every seed.
struct ArmResult {
    std::string template_id;
    std::vector<SeedOutcome> seeds;
    std::optional<MetricSummary> cross_seed;
};

struct ExperimentResult {
    std::string name;
    std::string model_id;
    std::string dataset;
    TuneMode tune_mode = TuneMode::prompt_tune;
    SamplingMode sampling = SamplingMode::fraction;
    std::size_t shots = 0;
    MetricMode metric_mode = MetricMode::rate;
    std::vector<ArmResult> arms;
    std::string fingerprint;
    std::vector<std::uint64_t> seed_list;
    std::string backend;
    bool complete = true;
};

inline void to_json(json& j, const SeedOutcome& s) {
    j = json{{"seed", s.seed}, {"ok", s.ok}, {"train_size", s.train_size}, {"test_manifest_sha256", s.test_manifest_sha},
             {"generation_errors", s.generation_errors}, {"loss_not_decreasing", s.loss_not_decreasing}};
    if (s.ok) j["summary"] = s.summary;
    else j["error"] = s.error;
    if (s.checkpoint_ref) j["checkpoint_ref"] = *s.checkpoint_ref;
}

inline void from_json(const json& j, SeedOutcome& s) {
    s.seed = j.at("seed").get<std::uint64_t>();
    s.ok = j.at("ok").get<bool>();
    s.train_size = j.value("train_size", std::size_t{0});
    s.test_manifest_sha = j.value("test_manifest_sha256", std::string());
    s.generation_errors = j.value("generation_errors", std::size_t{0});
    s.loss_not_decreasing = j.value("loss_not_decreasing", false);
    if (s.ok) s.summary = j.at("summary").get<MetricSummary>();
    else s.error = j.value("error", std::string());
    if (j.contains("checkpoint_ref")) s.checkpoint_ref = j.at("checkpoint_ref").get<std::string>();
}

inline void to_json(json& j, const ArmResult& a) {
    j = json{{"template_id", a.template_id}, {"seeds", a.seeds}};
    if (a.cross_seed) j["cross_seed"] = *a.cross_seed;
}

inline void from_json(const json& j, ArmResult& a) {
    a.template_id = j.at("template_id").get<std::string>();
    a.seeds = j.at("seeds").get<std::vector<SeedOutcome>>();
    a.cross_seed.reset();
    if (j.contains("cross_seed")) a.cross_seed = j.at("cross_seed").get<MetricSummary>();
}

inline void to_json(json& j, const ExperimentResult& r) {
    j = json{{"name", r.name},
             {"model_id", r.model_id},
             {"dataset", r.dataset},
             {"tune_mode", std::string(to_string(r.tune_mode))},
             {"sampling", r.sampling == SamplingMode::fraction ? "fraction" : "shots"},
             {"shots", r.shots},
             {"metric_mode", std::string(to_string(r.metric_mode))},
             {"arms", r.arms},
             {"complete", r.complete},
             {"provenance", {{"fingerprint", r.fingerprint}, {"seeds", r.seed_list}, {"backend", r.backend},
                             {"protocol_version", protocol_version}}}};
}

inline void from_json(const json& j, ExperimentResult& r) {
    r.name = j.at("name").get<std::string>();
    r.model_id = j.value("model_id", std::string());
    r.dataset = j.value("dataset", std::string());
    r.tune_mode = parse_tune_mode(j.value("tune_mode", std::string("prompt_tune")));
    r.sampling = j.value("sampling", std::string("fraction")) == "shots" ? SamplingMode::shots : SamplingMode::fraction;
    r.shots = j.value("shots", std::size_t{0});
    r.metric_mode = parse_metric_mode(j.value("metric_mode", std::string("rate")));
    r.arms = j.at("arms").get<std::vector<ArmResult>>();
    r.complete = j.value("complete", true);
    const auto& p = j.at("provenance");
    r.fingerprint = p.value("fingerprint", std::string());
    r.seed_list = p.value("seeds", std::vector<std::uint64_t>{});
    r.backend = p.value("backend", std::string());
}

inline ExperimentResult load_result(const std::string& path) { return json::parse(read_file(path)).get<ExperimentResult>(); }

// ---------------------------------------------------------------------------
// Running

namespace detail {

inline std::vector<PromptTemplate> resolve_templates(const ExperimentSpec& spec) {
    std::map<std::string, PromptTemplate> extra;
    if (!spec.template_file.empty()) {
        // blocks separated by blank lines: an id header line, then the body
        std::vector<std::string> blocks(1);
        std::istringstream in(read_file(spec.template_file));
        std::string line;
        while (std::getline(in, line)) {
            if (trim_copy(line).empty()) {
                if (!blocks.back().empty()) blocks.emplace_back();
                continue;
            }
            if (!blocks.back().empty()) blocks.back() += '\n';
            blocks.back() += line;
        }
        for (const auto& block : blocks) {
            if (block.empty()) continue;
            auto t = parse_template(block);
            if (t.id.empty()) throw config_error("template in '" + spec.template_file + "' has no id header");
            t.model_style = spec.style;
            extra.emplace(t.id, std::move(t));
        }
    }
    std::vector<PromptTemplate> out;
    if (spec.tuning.mode == TuneMode::fine_tune) {
        // Fine-tuning always feeds the plain layout; listed templates are unused.
        auto t = plain_template();
        t.model_style = spec.style;
        out.push_back(std::move(t));
        return out;
    }
    if (spec.template_ids.empty()) throw validation_error("no templates listed");
    for (const auto& id : spec.template_ids) {
        if (auto it = extra.find(id); it != extra.end()) out.push_back(it->second);
        else if (auto b = find_builtin(id, spec.style)) out.push_back(*b);
        else throw validation_error("unknown template id '" + id + "'");
    }
    return out;
}

inline std::string manifest_sha(std::vector<std::string> ids) {
    std::sort(ids.begin(), ids.end());
    std::string joined;
    for (const auto& id : ids) joined += id + '\n';
    return sha256_hex(joined);
}

struct Draw {
    std::vector<std::string> train, val, test;
};

inline Draw draw_for_seed(const ExperimentSpec& spec, const std::vector<std::string>& ids, std::uint64_t seed) {
    Draw d;
    const auto& plan = spec.sampling;
    if (plan.mode == SamplingMode::shots && plan.fixed_test_size) {
        auto sd = reserve_then_shots(ids, plan.shot_count, *plan.fixed_test_size, seed);
        d.train = std::move(sd.train);
        d.test = std::move(sd.test);
        return d;
    }
    auto split = split_ids(ids, seed);
    d.val = split.val;
    d.test = split.test;
    d.train = plan.mode == SamplingMode::shots ? sample_shots(split.train, plan.shot_count, seed)
                                               : sample_fraction(split.train, plan.fraction, seed);
    return d;
}

inline json ids_json(const std::vector<std::string>& ids) { return json(ids); }

} // namespace detail

struct RunOptions {
    std::shared_ptr<Backend> backend;     // built from spec.backend when null
    bool resume = true;                   // reuse finished seeds from out_dir
    unsigned eval_threads = 0;            // 0 = hardware concurrency
    std::function<void(const std::string&)> log; // progress lines, optional
};

namespace detail {

struct SeedContext {
    const ExperimentSpec& spec;
    const std::vector<RepairInstance>& data;
    const std::map<std::string, const RepairInstance*>& by_id;
    const std::vector<std::string>& ids;
    const PromptTemplate& tmpl;
    Backend& backend;
    const std::string& fingerprint;
    const RunOptions& opts;
};

inline std::vector<const RepairInstance*> lookup(const SeedContext& c, const std::vector<std::string>& ids) {
    std::vector<const RepairInstance*> out;
    for (const auto& id : ids) out.push_back(c.by_id.at(id));
    return out;
}

inline SeedOutcome run_seed(const SeedContext& c, std::uint64_t seed) {
    SeedOutcome o;
    o.seed = seed;
    const fs::path dir = fs::path(c.spec.out_dir) / c.tmpl.id / ("seed-" + std::to_string(seed));
    const auto state_path = dir / "state.json";
    json state = json::object();
    if (c.opts.resume && fs::exists(state_path)) {
        state = json::parse(read_file(state_path));
        if (state.value("fingerprint", std::string()) != c.fingerprint) state = json::object();
    }
    if (state.value("stage", std::string()) == "done" && fs::exists(dir / "outcome.json")) {
        return json::parse(read_file(dir / "outcome.json")).get<SeedOutcome>();
    }
    auto save_state = [&](const std::string& stage) {
        state["fingerprint"] = c.fingerprint;
        state["stage"] = stage;
        write_file(state_path, state.dump(1) + "\n");
    };

    const auto draw = draw_for_seed(c.spec, c.ids, seed);
    {
        std::vector<std::string> t = draw.test;
        std::sort(t.begin(), t.end());
        for (const auto& id : draw.train) {
            if (std::binary_search(t.begin(), t.end(), id)) throw sampling_error("train and test overlap on '" + id + "'");
        }
    }
    o.train_size = draw.train.size();
    o.test_manifest_sha = manifest_sha(draw.test);
    write_file(dir / "manifests.json",
               json{{"train", draw.train}, {"val", draw.val}, {"test", draw.test}}.dump(1) + "\n");

    // tune
    if (c.backend.tunes()) {
        if (state.contains("checkpoint_ref")) {
            o.checkpoint_ref = state["checkpoint_ref"].get<std::string>();
            const auto loss = state.value("loss_curve", std::vector<double>{});
            o.loss_not_decreasing = loss.size() >= 2 && !(loss.back() < loss.front());
        } else {
            RepairJob job;
            job.mode = c.spec.tuning.mode;
            job.params = c.spec.tuning;
            job.model_id = c.spec.model_id;
            if (job.mode == TuneMode::prompt_tune) job.templates = {c.tmpl};
            for (auto* p : lookup(c, draw.train)) job.train.push_back(*p);
            for (auto* p : lookup(c, draw.val)) job.val.push_back(*p);
            if (state.contains("job_id")) {
                job.job_id = state["job_id"].get<std::string>();
            } else {
                job.job_id = c.backend.submit_tune(job);
                state["job_id"] = job.job_id;
                save_state("tuning");
            }
            const auto deadline = std::chrono::steady_clock::now() + c.spec.tune_timeout;
            for (;;) {
                job.advance(c.backend.poll(job.job_id));
                if (job.state.status == JobStatus::done) break;
                if (job.state.status == JobStatus::failed) {
                    state.erase("job_id");
                    save_state("tune_failed");
                    throw error("tuning job " + job.job_id + " failed: " + job.state.reason.value_or("no reason given"));
                }
                if (std::chrono::steady_clock::now() > deadline) throw error("tuning job " + job.job_id + " timed out");
                std::this_thread::sleep_for(c.spec.poll_interval);
            }
            if (!job.state.checkpoint_ref) throw protocol_error(200, "finished job " + job.job_id + " has no checkpoint_ref");
            o.checkpoint_ref = job.state.checkpoint_ref;
            const auto& loss = job.state.loss_curve;
            o.loss_not_decreasing = loss.size() >= 2 && !(loss.back() < loss.front());
            state["checkpoint_ref"] = *o.checkpoint_ref;
            state["loss_curve"] = loss;
            save_state("tuned");
        }
        c.backend.set_model_ref(*o.checkpoint_ref);
    }

    // compile + generate
    const auto test = lookup(c, draw.test);
    std::vector<CompiledPrompt> prompts;
    std::vector<std::size_t> prompt_of(test.size(), SIZE_MAX);
    std::map<std::size_t, std::string> item_errors;
    for (std::size_t i = 0; i < test.size(); ++i) {
        try {
            prompt_of[i] = prompts.size();
            prompts.push_back(instantiate(c.tmpl, *test[i], c.spec.char_budget));
        } catch (const instantiation_error& e) {
            prompt_of[i] = SIZE_MAX;
            item_errors[i] = e.what();
        }
    }
    std::vector<GenerationResult> gen;
    if (!prompts.empty()) gen = c.backend.generate(prompts, c.spec.generation);
    if (gen.size() != prompts.size()) throw protocol_error(200, "backend returned the wrong number of results");

    json predictions = json::array();
    std::vector<EvalItem> items;
    for (std::size_t i = 0; i < test.size(); ++i) {
        std::string text;
        json row{{"id", test[i]->id}};
        if (prompt_of[i] == SIZE_MAX) {
            row["error"] = item_errors[i];
        } else if (const auto& g = gen[prompt_of[i]]; g.ok()) {
            text = *g.text;
            row["prediction"] = text;
        } else {
            row["error"] = *g.error;
        }
        if (row.contains("error")) ++o.generation_errors;
        predictions.push_back(std::move(row));
        items.push_back({test[i]->id, test[i]->language, text, test[i]->fixed_code});
    }
    std::string lines;
    for (const auto& p : predictions) lines += p.dump() + "\n";
    write_file(dir / "predictions.jsonl", lines);

    // evaluate
    auto reports = evaluate_all(items, c.spec.codebleu, c.opts.eval_threads);
    lines.clear();
    for (auto& r : reports) {
        r.seed = seed;
        lines += json(r).dump() + "\n";
    }
    write_file(dir / "reports.jsonl", lines);
    o.summary = summarize(reports, c.spec.metric_mode);
    o.ok = true;
    write_file(dir / "outcome.json", json(o).dump(1) + "\n");
    save_state("done");
    return o;
}

} // namespace detail

/// Runs every template on every seed. Seeds run concurrently; a failing
/// seed is recorded and the others continue. Writes result.json when all
/// seeds succeed, result.partial.json otherwise, plus provenance.json.
inline ExperimentResult run_experiment(const ExperimentSpec& spec, const RunOptions& opts = {}) {
    spec.sampling.validate();
    spec.generation.validate();
    spec.tuning.validate();
    spec.codebleu.validate();
    if (spec.dataset.empty()) throw validation_error("spec has no dataset");
    const auto started = std::chrono::system_clock::now();

    const auto dataset_bytes = read_file(spec.dataset);
    std::istringstream in(dataset_bytes);
    auto data = parse_dataset(in, spec.schema);
    if (spec.language) {
        std::erase_if(data, [&](const RepairInstance& r) { return r.language != *spec.language; });
    }
    if (data.empty()) throw validation_error("dataset has no instances for this spec");
    const auto ids = ids_of(data);
    if (spec.sampling.mode == SamplingMode::shots && spec.sampling.fixed_test_size &&
        ids.size() < spec.sampling.shot_count + *spec.sampling.fixed_test_size) {
        throw validation_error("dataset has " + std::to_string(ids.size()) + " instances, fewer than shots plus test size");
    }
    std::map<std::string, const RepairInstance*> by_id;
    for (const auto& r : data) by_id.emplace(r.id, &r);

    const auto templates = detail::resolve_templates(spec);
    auto backend = opts.backend ? opts.backend : make_backend(spec.backend, RemoteOptions{spec.model_id});
    if (const auto h = backend->health(); !h.ok) throw validation_error("backend " + backend->describe() + " reports unhealthy");
    const auto fingerprint = spec_fingerprint(spec, dataset_bytes);

    ExperimentResult result;
    result.name = spec.name;
    result.model_id = spec.model_id;
    result.dataset = fs::path(spec.dataset).filename().string();
    result.tune_mode = spec.tuning.mode;
    result.sampling = spec.sampling.mode;
    result.shots = spec.sampling.mode == SamplingMode::shots ? spec.sampling.shot_count : 0;
    result.metric_mode = spec.metric_mode;
    result.fingerprint = fingerprint;
    result.seed_list = spec.sampling.seeds;
    result.backend = backend->describe();

    // A tuning backend holds one checkpoint at a time, so seeds share it in
    // turn; the stub has no such state and runs seeds side by side.
    const bool parallel = !backend->tunes();
    for (const auto& t : templates) {
        ArmResult arm;
        arm.template_id = t.id;
        const detail::SeedContext ctx{spec, data, by_id, ids, t, *backend, fingerprint, opts};
        auto one = [&](std::uint64_t seed) {
            try {
                if (opts.log) opts.log(t.id + " seed " + std::to_string(seed) + ": start");
                return detail::run_seed(ctx, seed);
            } catch (const std::exception& e) {
                SeedOutcome o;
                o.seed = seed;
                o.error = e.what();
                if (opts.log) opts.log(t.id + " seed " + std::to_string(seed) + ": failed: " + e.what());
                return o;
            }
        };
        if (parallel) {
            std::vector<std::future<SeedOutcome>> futs;
            for (auto seed : spec.sampling.seeds) futs.push_back(std::async(std::launch::async, one, seed));
            for (auto& f : futs) arm.seeds.push_back(f.get());
        } else {
            for (auto seed : spec.sampling.seeds) arm.seeds.push_back(one(seed));
        }
        std::vector<MetricSummary> ok;
        for (const auto& s : arm.seeds) {
            if (s.ok) ok.push_back(s.summary);
            else result.complete = false;
        }
        if (!ok.empty()) arm.cross_seed = average_summaries(ok);
        result.arms.push_back(std::move(arm));
    }

    const fs::path out(spec.out_dir);
    const auto body = json(result).dump(1) + "\n";
    if (result.complete) {
        write_file(out / "result.json", body);
        if (fs::exists(out / "result.partial.json")) fs::remove(out / "result.partial.json");
    } else {
        write_file(out / "result.partial.json", body);
    }
    auto stamp = [](std::chrono::system_clock::time_point tp) {
        const auto t = std::chrono::system_clock::to_time_t(tp);
        std::tm tm{};
        gmtime_r(&t, &tm);
        std::ostringstream os;
        os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
        return os.str();
    };
    json prov{{"fingerprint", fingerprint},
              {"spec", spec_to_json(spec)},
              {"dataset_sha256", sha256_hex(dataset_bytes)},
              {"seeds", spec.sampling.seeds},
              {"backend", result.backend},
              {"protocol_version", protocol_version},
              {"started", stamp(started)},
              {"finished", stamp(std::chrono::system_clock::now())}};
    write_file(out / "provenance.json", prov.dump(1) + "\n");
    return result;
}

// ---------------------------------------------------------------------------
// Comparison

struct ComparisonRow {
    std::string id; // "<name>" or "<name>/<template>" when a run has several arms
    MetricSummary metrics;
    std::optional<double> em_improvement; // percent over the baseline
    std::string note;                     // "0 -> X" when the baseline EM is zero
};

struct ComparisonTable {
    std::string baseline_id;
    MetricMode mode = MetricMode::rate;
    std::vector<ComparisonRow> rows;
};

/// Relative EM improvement in percent, (t - b) / b * 100. Undefined for a
/// zero baseline.
inline std::optional<double> relative_improvement(double baseline, double treatment) {
    if (baseline == 0) return std::nullopt;
    return (treatment - baseline) / baseline * 100.0;
}

namespace detail {

struct FlatRow {
    std::string id;
    const ArmResult* arm;
    const ExperimentResult* run;
};

inline std::vector<FlatRow> flatten(const std::vector<ExperimentResult>& results) {
    std::vector<FlatRow> rows;
    for (const auto& r : results) {
        for (const auto& a : r.arms) rows.push_back({r.arms.size() == 1 ? r.name : r.name + "/" + a.template_id, &a, &r});
    }
    return rows;
}

inline std::vector<std::string> test_manifests(const ArmResult& a) {
    std::vector<std::pair<std::uint64_t, std::string>> v;
    for (const auto& s : a.seeds) v.emplace_back(s.seed, s.test_manifest_sha);
    std::sort(v.begin(), v.end());
    std::vector<std::string> out;
    for (auto& [seed, sha] : v) out.push_back(std::to_string(seed) + ":" + sha);
    return out;
}

} // namespace detail

inline ComparisonTable compare_runs(const std::vector<ExperimentResult>& results, const std::string& baseline_id) {
    const auto rows = detail::flatten(results);
    if (rows.empty()) throw comparison_error("nothing to compare");
    auto base = std::find_if(rows.begin(), rows.end(), [&](const auto& r) { return r.id == baseline_id; });
    if (base == rows.end()) throw comparison_error("baseline '" + baseline_id + "' not among the results");
    const auto base_manifests = detail::test_manifests(*base->arm);
    ComparisonTable t;
    t.baseline_id = baseline_id;
    t.mode = base->run->metric_mode;
    for (const auto& r : rows) {
        if (r.run->metric_mode != t.mode) throw comparison_error("'" + r.id + "' uses a different metric mode");
        if (r.run->dataset != base->run->dataset || detail::test_manifests(*r.arm) != base_manifests) {
            throw comparison_error("'" + r.id + "' was evaluated on different test manifests than the baseline");
        }
        if (!r.arm->cross_seed) throw comparison_error("'" + r.id + "' has no successful seeds");
        ComparisonRow row;
        row.id = r.id;
        row.metrics = *r.arm->cross_seed;
        if (r.id != baseline_id) {
            const double b = base->arm->cross_seed->em;
            row.em_improvement = relative_improvement(b, row.metrics.em);
            if (!row.em_improvement) row.note = "0 → " + fmt2(row.metrics.em);
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

inline std::string render_comparison(const ComparisonTable& t) {
    std::ostringstream os;
    os << "| Run | EM | SC | CodeBLEU | EM vs " << t.baseline_id << " |\n|---|---|---|---|---|\n";
    for (const auto& r : t.rows) {
        os << "| " << r.id << " | " << fmt2(r.metrics.em) << " | " << fmt2(r.metrics.sc) << " | " << fmt2(r.metrics.codebleu) << " | ";
        if (r.id == t.baseline_id) os << "baseline";
        else if (r.em_improvement) os << (*r.em_improvement >= 0 ? "+" : "") << fmt2(*r.em_improvement) << "%";
        else os << r.note;
        os << " |\n";
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Reports

enum class ReportLayout { table_vi, table_vii, table_ix, csv, json };

inline ReportLayout parse_layout(std::string_view s) {
    if (s == "tableVI" || s == "table6") return ReportLayout::table_vi;
    if (s == "tableVII" || s == "table7") return ReportLayout::table_vii;
    if (s == "tableIX" || s == "table9") return ReportLayout::table_ix;
    if (s == "csv") return ReportLayout::csv;
    if (s == "json") return ReportLayout::json;
    throw layout_error("unknown layout '" + std::string(s) + "'");
}

namespace detail {

inline std::string method_label(const ExperimentResult& r) {
    return r.tune_mode == TuneMode::fine_tune ? "Fine-tuning" : "Prompt tuning";
}

inline const MetricSummary& arm_metrics(const FlatRow& r) {
    if (!r.arm->cross_seed) throw layout_error("'" + r.id + "' has no successful seeds");
    return *r.arm->cross_seed;
}

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
    return out + "\"";
}

} // namespace detail

/// Renders results in one layout. Markdown for the table layouts.
inline std::string render_report(const std::vector<ExperimentResult>& results, ReportLayout layout) {
    const auto rows = detail::flatten(results);
    if (rows.empty()) throw layout_error("no results to report");
    std::ostringstream os;
    switch (layout) {
    case ReportLayout::table_vi: {
        os << "| Dataset | Model | Method | EM | SC | CodeBLEU |\n|---|---|---|---|---|---|\n";
        for (const auto& r : rows) {
            const auto& m = detail::arm_metrics(r);
            os << "| " << r.run->dataset << " | " << r.run->model_id << " | " << detail::method_label(*r.run)
               << (r.run->arms.size() > 1 ? " (" + r.arm->template_id + ")" : std::string()) << " | " << fmt2(m.em)
               << " | " << fmt2(m.sc) << " | " << fmt2(m.codebleu) << " |\n";
        }
        break;
    }
    case ReportLayout::table_vii: {
        if (rows.size() != 7) throw layout_error("basic-prompt table needs 7 template rows, got " + std::to_string(rows.size()));
        os << "| Template | EM | SC | CodeBLEU |\n|---|---|---|---|\n";
        for (const auto& r : rows) {
            const auto& m = detail::arm_metrics(r);
            os << "| " << r.arm->template_id << " | " << fmt2(m.em) << " | " << fmt2(m.sc) << " | " << fmt2(m.codebleu) << " |\n";
        }
        break;
    }
    case ReportLayout::table_ix: {
        std::map<std::pair<std::string, std::string>, std::map<std::size_t, const MetricSummary*>> grid;
        std::vector<std::size_t> shots;
        for (const auto& r : rows) {
            if (r.run->sampling != SamplingMode::shots) throw layout_error("'" + r.id + "' is not a k-shot run");
            auto& cell = grid[{r.run->model_id, detail::method_label(*r.run)}][r.run->shots];
            if (cell) throw layout_error("two results for " + std::to_string(r.run->shots) + " shots of one method");
            cell = &detail::arm_metrics(r);
            if (std::find(shots.begin(), shots.end(), r.run->shots) == shots.end()) shots.push_back(r.run->shots);
        }
        std::sort(shots.begin(), shots.end());
        os << "| Model | Method |";
        for (auto k : shots) os << " " << k << "-shot EM | " << k << "-shot CodeBLEU |";
        os << "\n|---|---|";
        for (std::size_t i = 0; i < shots.size(); ++i) os << "---|---|";
        os << "\n";
        for (const auto& [key, by_shot] : grid) {
            os << "| " << key.first << " | " << key.second << " |";
            for (auto k : shots) {
                auto it = by_shot.find(k);
                if (it == by_shot.end()) os << " - | - |";
                else os << " " << fmt2(it->second->em) << " | " << fmt2(it->second->codebleu) << " |";
            }
            os << "\n";
        }
        break;
    }
    case ReportLayout::csv: {
        os << "run,dataset,model,method,template,shots,metric_mode,em,sc,codebleu,seeds_ok\n";
        for (const auto& r : rows) {
            const auto& m = detail::arm_metrics(r);
            const auto ok = std::count_if(r.arm->seeds.begin(), r.arm->seeds.end(), [](const auto& s) { return s.ok; });
            os << detail::csv_field(r.run->name) << ',' << detail::csv_field(r.run->dataset) << ','
               << detail::csv_field(r.run->model_id) << ',' << detail::method_label(*r.run) << ','
               << detail::csv_field(r.arm->template_id) << ',' << r.run->shots << ',' << to_string(r.run->metric_mode) << ','
               << fmt2(m.em) << ',' << fmt2(m.sc) << ',' << fmt2(m.codebleu) << ',' << ok << '\n';
        }
        break;
    }
    case ReportLayout::json: {
        json arr = json::array();
        for (const auto& r : rows) {
            const auto& m = detail::arm_metrics(r);
            arr.push_back({{"id", r.id}, {"dataset", r.run->dataset}, {"model", r.run->model_id},
                           {"method", detail::method_label(*r.run)}, {"template", r.arm->template_id},
                           {"shots", r.run->shots}, {"em", fmt2(m.em)}, {"sc", fmt2(m.sc)}, {"codebleu", fmt2(m.codebleu)}});
        }
        os << arr.dump(1) << "\n";
        break;
    }
    }
    return os.str();
}

inline std::string layout_extension(ReportLayout l) {
    switch (l) {
    case ReportLayout::csv: return ".csv";
    case ReportLayout::json: return ".json";
    default: return ".md";
    }
}

inline std::string layout_name(ReportLayout l) {
    switch (l) {
    case ReportLayout::table_vi: return "tableVI";
    case ReportLayout::table_vii: return "tableVII";
    case ReportLayout::table_ix: return "tableIX";
    case ReportLayout::csv: return "report";
    case ReportLayout::json: return "report";
    }
    return "report";
}

/// Writes the rendered report into out_dir and returns its path.
inline fs::path emit_report(const std::vector<ExperimentResult>& results, ReportLayout layout, const fs::path& out_dir) {
    const auto text = render_report(results, layout);
    const auto path = out_dir / (layout_name(layout) + layout_extension(layout));
    write_file(path, text);
    return path;
}

} // namespace patchbench
