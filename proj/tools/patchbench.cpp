// patchbench command line.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include <patchbench/patchbench.hpp>

namespace pb = patchbench;
using pb::json;

namespace {

struct Globals {
    std::string seed_list;
    std::string backend;
    std::string out = "out";
};

std::vector<std::uint64_t> seeds_or_default(const Globals& g) {
    return g.seed_list.empty() ? pb::default_seeds() : pb::parse_seed_list(g.seed_list);
}

pb::DatasetSchema schema_arg(const std::string& s) {
    auto schema = pb::parse_schema(s);
    if (!schema) throw pb::config_error("unknown schema '" + s + "'");
    return *schema;
}

pb::ModelStyle style_arg(const std::string& s) {
    auto style = pb::parse_model_style(s);
    if (!style) throw pb::config_error("unknown model style '" + s + "'");
    return *style;
}

void emit(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") std::cout << text;
    else pb::write_file(path, text);
}

std::string read_input(const std::string& path) {
    if (path == "-") {
        std::stringstream ss;
        ss << std::cin.rdbuf();
        return ss.str();
    }
    return pb::read_file(path);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"patchbench: prompt-tuning experiments for automated program repair"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--seed-list", g.seed_list, "comma separated seeds (default 1,2,3)");
    app.add_option("--backend", g.backend, "stub:copy | stub:table=<file> | stub:fixed=<text> | remote:<url> | remote");
    app.add_option("--out", g.out, "output directory")->capture_default_str();

    // ingest
    auto* ingest = app.add_subcommand("ingest", "normalize a dataset export or a unified diff into canonical JSONL");
    std::string in_path, schema = "canonical", output, diff_path, before_path, lang = "java", id_prefix = "hunk";
    ingest->add_option("--input", in_path, "JSONL export");
    ingest->add_option("--schema", schema, "input schema")->capture_default_str();
    ingest->add_option("--diff", diff_path, "unified diff to split into single-hunk instances");
    ingest->add_option("--before", before_path, "pre-fix file the diff applies to");
    ingest->add_option("--language", lang, "language of the diffed file")->capture_default_str();
    ingest->add_option("--id-prefix", id_prefix)->capture_default_str();
    ingest->add_option("-o,--output", output, "output JSONL (default stdout)");

    // split
    auto* split = app.add_subcommand("split", "8:1:1 train/val/test split per seed");
    std::string split_in;
    split->add_option("--input", split_in, "canonical JSONL")->required();

    // sample
    auto* sample = app.add_subcommand("sample", "draw a training sample per seed");
    std::string sample_in, fraction;
    std::size_t shots = 0, test_size = 0;
    sample->add_option("--input", sample_in, "canonical JSONL")->required();
    auto* frac_opt = sample->add_option("--fraction", fraction, "fraction of the train split, e.g. 1/100");
    auto* shot_opt = sample->add_option("--shots", shots, "k-shot draw");
    sample->add_option("--test-size", test_size, "reserve this many test ids before drawing shots");
    frac_opt->excludes(shot_opt);

    // templates
    auto* templates = app.add_subcommand("templates", "builtin prompt templates");
    templates->require_subcommand(1);
    std::string style = "infilling", set = "all";
    auto* tlist = templates->add_subcommand("list", "list template ids and layouts");
    tlist->add_option("--style", style)->capture_default_str();
    tlist->add_option("--set", set, "bp | kp | all")->capture_default_str();
    auto* trender = templates->add_subcommand("render", "show one template");
    std::string tid, dsl;
    trender->add_option("id", tid, "builtin template id");
    trender->add_option("--dsl", dsl, "parse this DSL text instead");
    trender->add_option("--style", style)->capture_default_str();

    // compile
    auto* compile = app.add_subcommand("compile", "instantiate a template on every instance");
    std::string compile_in, compile_tid, compile_file;
    std::size_t budget = pb::default_char_budget;
    compile->add_option("--input", compile_in, "canonical JSONL")->required();
    compile->add_option("--template", compile_tid, "builtin template id");
    compile->add_option("--template-file", compile_file, "template file (header line then DSL)");
    compile->add_option("--style", style)->capture_default_str();
    compile->add_option("--budget", budget, "character budget")->capture_default_str();
    compile->add_option("-o,--output", output, "output JSONL (default stdout)");

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "score predictions: EM, SC, CodeBLEU");
    std::string eval_in, weights, mode = "rate";
    bool compat = false, exact_reference = false;
    unsigned threads = 0;
    evaluate->add_option("--input", eval_in, "JSONL of {id, language, prediction, reference}")->required();
    evaluate->add_option("--weights", weights, "CodeBLEU weights a,b,c,d");
    evaluate->add_option("--mode", mode, "rate | count")->capture_default_str();
    evaluate->add_flag("--compat-tokenizer", compat, "split on whitespace like the reference scorer");
    evaluate->add_flag("--reference-exact", exact_reference, "every lexical setting as in the reference scorer");
    evaluate->add_option("--threads", threads, "worker threads (0 = all cores)");

    // run
    auto* run = app.add_subcommand("run", "run an experiment from a config file");
    std::string config;
    std::vector<std::string> overrides;
    bool fresh = false;
    run->add_option("config", config, "key = value config file")->required();
    run->add_option("--set", overrides, "override a setting, key=value");
    run->add_flag("--fresh", fresh, "ignore finished seeds in the output directory");

    // compare
    auto* compare = app.add_subcommand("compare", "relative EM improvement over a baseline");
    std::vector<std::string> result_files;
    std::string baseline;
    compare->add_option("results", result_files, "result.json files")->required();
    compare->add_option("--baseline", baseline, "baseline row id")->required();

    // report
    auto* report = app.add_subcommand("report", "lay results out as a table");
    std::string layout;
    std::vector<std::string> report_files;
    report->add_option("results", report_files, "result.json files")->required();
    report->add_option("--layout", layout, "tableVI | tableVII | tableIX | csv | json")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*ingest) {
            std::vector<pb::RepairInstance> items;
            if (!diff_path.empty()) {
                if (before_path.empty()) throw pb::config_error("--diff needs --before");
                auto l = pb::parse_language(lang);
                if (!l) throw pb::unsupported_language(lang);
                items = pb::extract_single_hunk(pb::read_file(diff_path), pb::read_file(before_path), *l, id_prefix);
            } else {
                if (in_path.empty()) throw pb::config_error("ingest needs --input or --diff");
                std::istringstream in(read_input(in_path));
                items = pb::parse_dataset(in, schema_arg(schema));
            }
            std::ostringstream os;
            pb::write_dataset(os, items);
            emit(output, os.str());
            std::cerr << items.size() << " instances\n";
        } else if (*split) {
            const auto ids = pb::ids_of(pb::load_dataset(split_in));
            for (auto seed : seeds_or_default(g)) {
                const auto s = pb::split_ids(ids, seed);
                const auto path = std::filesystem::path(g.out) / ("split-seed-" + std::to_string(seed) + ".json");
                pb::write_file(path, json(s).dump(1) + "\n");
                std::cout << path.string() << ": " << s.train.size() << "/" << s.val.size() << "/" << s.test.size() << "\n";
            }
        } else if (*sample) {
            if (fraction.empty() && shots == 0) throw pb::config_error("sample needs --fraction or --shots");
            const auto ids = pb::ids_of(pb::load_dataset(sample_in));
            for (auto seed : seeds_or_default(g)) {
                json m{{"seed", seed}};
                if (shots > 0 && test_size > 0) {
                    auto d = pb::reserve_then_shots(ids, shots, test_size, seed);
                    m["train"] = d.train;
                    m["val"] = json::array();
                    m["test"] = d.test;
                } else {
                    auto s = pb::split_ids(ids, seed);
                    m["train"] = shots > 0 ? pb::sample_shots(s.train, shots, seed)
                                           : pb::sample_fraction(s.train, pb::Fraction::parse(fraction), seed);
                    m["val"] = s.val;
                    m["test"] = s.test;
                }
                const auto path = std::filesystem::path(g.out) / ("sample-seed-" + std::to_string(seed) + ".json");
                pb::write_file(path, m.dump(1) + "\n");
                std::cout << path.string() << ": train " << m["train"].size() << ", test " << m["test"].size() << "\n";
            }
        } else if (*tlist) {
            const auto st = style_arg(style);
            std::vector<pb::PromptTemplate> ts;
            if (set == "bp") ts = pb::builtin_templates(pb::TemplateSet::bp, st);
            else if (set == "kp") ts = pb::builtin_templates(pb::TemplateSet::kp, st);
            else if (set == "all") ts = pb::all_builtin_templates(st);
            else throw pb::config_error("--set must be bp, kp or all");
            for (const auto& t : ts) std::cout << t.id << "\t" << pb::to_string(t.kind) << "\t" << pb::render_table(t) << "\n";
        } else if (*trender) {
            pb::PromptTemplate t;
            if (!dsl.empty()) t = pb::parse_template(dsl);
            else if (auto b = pb::find_builtin(tid, style_arg(style))) t = *b;
            else throw pb::validation_error("unknown template id '" + tid + "'");
            std::cout << "id:    " << t.id << "\nkind:  " << pb::to_string(t.kind) << "\nstyle: " << pb::to_string(t.model_style)
                      << "\ntable: " << pb::render_table(t) << "\ndsl:   " << pb::to_dsl(t) << "\n";
        } else if (*compile) {
            pb::PromptTemplate t;
            if (!compile_file.empty()) t = pb::parse_template(pb::read_file(compile_file));
            else if (auto b = pb::find_builtin(compile_tid, style_arg(style))) t = *b;
            else throw pb::validation_error("unknown template id '" + compile_tid + "'");
            std::string lines;
            std::size_t failed = 0;
            for (const auto& inst : pb::load_dataset(compile_in)) {
                try {
                    lines += json(pb::instantiate(t, inst, budget)).dump() + "\n";
                } catch (const pb::instantiation_error& e) {
                    ++failed;
                    std::cerr << inst.id << ": " << e.what() << "\n";
                }
            }
            emit(output, lines);
            if (failed) return 1;
        } else if (*evaluate) {
            auto cfg = exact_reference ? pb::CodeBleuConfig::reference_exact() : pb::CodeBleuConfig{};
            if (!weights.empty()) cfg.weights = pb::parse_weights(weights);
            if (compat) cfg.tokenizer = pb::TokenizerMode::whitespace;
            const auto metric_mode = pb::parse_metric_mode(mode);
            std::vector<pb::EvalItem> items;
            std::istringstream in(read_input(eval_in));
            std::string line;
            std::size_t no = 0;
            while (std::getline(in, line)) {
                ++no;
                if (pb::detail::trim_copy(line).empty()) continue;
                try {
                    const auto j = json::parse(line);
                    const auto tag = j.at("language").get<std::string>();
                    auto l = pb::parse_language(tag);
                    if (!l) throw pb::unsupported_language(tag);
                    items.push_back({j.at("id").get<std::string>(), *l, j.at("prediction").get<std::string>(),
                                     j.at("reference").get<std::string>()});
                } catch (const json::exception& e) {
                    throw pb::load_error(no, e.what());
                }
            }
            const auto reports = pb::evaluate_all(items, cfg, threads);
            std::string lines;
            for (const auto& r : reports) lines += json(r).dump() + "\n";
            const std::filesystem::path out(g.out);
            pb::write_file(out / "reports.jsonl", lines);
            json summary = pb::summarize(reports, metric_mode);
            summary["config"] = cfg.fingerprint();
            pb::write_file(out / "summary.json", summary.dump(1) + "\n");
            std::cout << summary.dump(1) << "\n";
        } else if (*run) {
            auto spec = pb::load_config(config);
            for (const auto& kv : overrides) {
                const auto eq = kv.find('=');
                if (eq == std::string::npos) throw pb::config_error("--set expects key=value, got '" + kv + "'");
                pb::apply_setting(spec, pb::detail::trim_copy(kv.substr(0, eq)), pb::detail::trim_copy(kv.substr(eq + 1)));
            }
            if (!g.seed_list.empty()) spec.sampling.seeds = pb::parse_seed_list(g.seed_list);
            if (!g.backend.empty()) spec.backend = g.backend;
            if (app.get_option("--out")->count() > 0) spec.out_dir = g.out;
            pb::RunOptions opts;
            opts.resume = !fresh;
            opts.log = [](const std::string& s) { std::cerr << s << "\n"; };
            const auto result = pb::run_experiment(spec, opts);
            for (const auto& arm : result.arms) {
                std::cout << arm.template_id;
                if (arm.cross_seed) {
                    std::cout << "  EM " << pb::fmt2(arm.cross_seed->em) << "  SC " << pb::fmt2(arm.cross_seed->sc)
                              << "  CodeBLEU " << pb::fmt2(arm.cross_seed->codebleu);
                }
                std::cout << "\n";
                for (const auto& s : arm.seeds) {
                    if (!s.ok) std::cout << "  seed " << s.seed << " failed: " << s.error << "\n";
                }
            }
            return result.complete ? 0 : 2;
        } else if (*compare) {
            std::vector<pb::ExperimentResult> results;
            for (const auto& f : result_files) results.push_back(pb::load_result(f));
            const auto text = pb::render_comparison(pb::compare_runs(results, baseline));
            pb::write_file(std::filesystem::path(g.out) / "comparison.md", text);
            std::cout << text;
        } else if (*report) {
            std::vector<pb::ExperimentResult> results;
            for (const auto& f : report_files) results.push_back(pb::load_result(f));
            const auto l = pb::parse_layout(layout);
            const auto path = pb::emit_report(results, l, g.out);
            std::cout << pb::read_file(path);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
