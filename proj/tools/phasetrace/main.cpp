/// @file main.cpp
/// @brief `phasetrace` command-line front end.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "phasetrace/error.hpp"
#include "phasetrace/evaluation.hpp"
#include "phasetrace/serialization.hpp"
#include "phasetrace/service.hpp"
#include "phasetrace/store.hpp"

namespace fs = std::filesystem;
using namespace phasetrace;

namespace {

struct Common {
    std::string config;
    std::string store = "phasetrace-store";
    std::vector<std::string> users;
};

PipelineConfig load(const Common& c) {
    if (c.config.empty()) {
        PipelineConfig cfg;
        cfg.validate();
        return cfg;
    }
    return load_config(c.config);
}

void add_common(CLI::App* app, Common& c) {
    app->add_option("--config", c.config, "pipeline config (JSON)")->check(CLI::ExistingFile);
    app->add_option("--store", c.store, "artifact store directory");
    app->add_option("--user", c.users, "restrict to these user ids (repeatable)");
}

int report_summary(const RunSummary& s) {
    for (const auto& f : s.failures) {
        std::cerr << fmt::format("FAILED {} [{}{}]: {}\n", f.user_id, f.stage, f.variant.empty() ? "" : "/" + f.variant,
                                 f.error);
    }
    std::cout << fmt::format("{} users ok, {} failures, {} rejected records\n", s.succeeded.size(),
                             s.failures.size(), s.rejections);
    return s.failures.empty() ? 0 : 2;
}

void write_output(const std::string& path, const std::string& content) {
    if (path.empty() || path == "-") {
        std::cout << content;
        return;
    }
    write_file_atomic(path, content);
}

struct JudgeSet {
    std::vector<std::unique_ptr<GenerationBackend>> owned;
    std::vector<NamedJudge> judges;
};

/// One judge per `--judge` generator config, or the pipeline's generator.
JudgeSet make_judges(const PipelineConfig& cfg, const std::vector<std::string>& files) {
    JudgeSet set;
    if (files.empty()) {
        set.owned.push_back(make_generator(cfg.generator));
        const auto id = cfg.generator.model.empty() ? set.owned.back()->name() : cfg.generator.model;
        set.judges.push_back({id, set.owned.back().get()});
        return set;
    }
    for (const auto& file : files) {
        std::ifstream in(file);
        if (!in) throw IoError("cannot open judge config " + file);
        Json j = Json::parse(in, nullptr, false);
        if (j.is_discarded()) throw ParseError("judge config " + file + " is not valid JSON");
        PipelineConfig judge_cfg = config_from_json(Json{{"generator", j}});
        set.owned.push_back(make_generator(judge_cfg.generator));
        set.judges.push_back({j.value("judge_id", fs::path(file).stem().string()), set.owned.back().get()});
    }
    return set;
}

/// Rendered report pairs (A, B) for users that have both variants stored.
std::vector<ReportPair> report_pairs(const ArtifactStore& store, const std::vector<std::string>& users,
                                     AblationVariant a, AblationVariant b) {
    std::vector<ReportPair> pairs;
    for (const auto& u : users.empty() ? store.users() : users) {
        auto ra = store.read_report(u, a);
        auto rb = store.read_report(u, b);
        if (!ra || !rb) {
            spdlog::warn("user {}: missing {} or {} report, skipped", u, to_string(a), to_string(b));
            continue;
        }
        pairs.push_back({u, render_report_text(*ra), render_report_text(*rb)});
    }
    if (pairs.empty()) throw NotFoundError("no user has both reports stored");
    return pairs;
}

std::string verdicts_jsonl(const std::vector<JudgedPair>& judged, std::string_view variant_a,
                           std::string_view variant_b) {
    std::string out;
    for (const auto& j : judged) {
        Json row{{"user_id", j.user_id}, {"variant_a", std::string(variant_a)}, {"variant_b", std::string(variant_b)}};
        const Json verdict = to_json(j.verdict);
        for (const auto& [k, v] : verdict.items()) row[k] = v;
        out += row.dump() + "\n";
    }
    return out;
}

std::vector<JudgeColumn> columns_by_judge(const std::vector<JudgedPair>& judged, const std::vector<NamedJudge>& judges) {
    std::vector<JudgeColumn> cols;
    for (const auto& judge : judges) {
        std::vector<JudgeVerdict> mine;
        for (const auto& j : judged) {
            if (j.verdict.judge_id == judge.judge_id) mine.push_back(j.verdict);
        }
        if (!mine.empty()) cols.push_back({judge.judge_id, aggregate_verdicts(mine)});
    }
    return cols;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"phasetrace: depression-severity trajectories, change points and phase reports"};
    app.require_subcommand(1);
    std::string log_level = "info";
    app.add_option("--log-level", log_level, "trace, debug, info, warn, error, off");

    Common common;
    RunInputs inputs;
    std::string input_format = "jsonl";
    std::string topics_path, notes_path;
    std::vector<std::string> variant_tags;
    std::string variant_tag = "full";

    auto add_inputs = [&](CLI::App* cmd) {
        cmd->add_option("--input", inputs.events, "events file")->required()->check(CLI::ExistingFile);
        cmd->add_option("--format", input_format, "jsonl or csv");
        cmd->add_option("--notes", notes_path, "operator notes JSONL")->check(CLI::ExistingFile);
    };

    auto* ingest_cmd = app.add_subcommand("ingest", "parse, filter and store per-user timelines");
    add_common(ingest_cmd, common);
    add_inputs(ingest_cmd);

    auto* enrich_cmd = app.add_subcommand("enrich", "attach class distributions and severity scores");
    add_common(enrich_cmd, common);
    enrich_cmd->add_option("--topics", topics_path, "per-event topic assignments JSONL")->check(CLI::ExistingFile);

    auto* trajectory_cmd = app.add_subcommand("trajectory", "build smoothed daily series");
    add_common(trajectory_cmd, common);

    auto* segment_cmd = app.add_subcommand("segment", "segment the stored daily series");
    add_common(segment_cmd, common);
    segment_cmd->add_option("--variant", variant_tag, "variant whose segmentation to compute");

    auto* report_cmd = app.add_subcommand("report", "generate phase and global reports");
    add_common(report_cmd, common);
    report_cmd->add_option("--variant", variant_tag, "report variant");

    auto* run_cmd = app.add_subcommand("run", "ingest, enrich, trajectory, segment and report in one go");
    add_common(run_cmd, common);
    add_inputs(run_cmd);
    run_cmd->add_option("--topics", topics_path, "per-event topic assignments JSONL")->check(CLI::ExistingFile);
    run_cmd->add_option("--variant", variant_tags, "variants to produce (repeatable; default from config)");

    auto* eval_cmd = app.add_subcommand("evaluate", "topic coverage and pairwise judging");
    eval_cmd->require_subcommand(1);
    std::string out_csv, out_json, out_verdicts;
    std::vector<std::string> judge_files;
    std::uint64_t seed = 20240601;
    std::string variant_a = "full", variant_b = "base";

    auto* coverage_cmd = eval_cmd->add_subcommand("coverage", "fraction of user topics each report covers");
    add_common(coverage_cmd, common);
    std::string user_topics_path;
    coverage_cmd->add_option("--topics", user_topics_path, "JSONL {user_id, topics}")->required()->check(
        CLI::ExistingFile);
    coverage_cmd->add_option("--variant", variant_tags, "report variants (default: full and base)");
    coverage_cmd->add_option("--judge", judge_files, "judge generator config JSON (default: pipeline generator)");
    coverage_cmd->add_option("--csv", out_csv, "per-user CSV output (default stdout)");
    coverage_cmd->add_option("--json", out_json, "JSON output");

    auto* judge_cmd = eval_cmd->add_subcommand("judge", "pairwise Likert judging of two report variants");
    add_common(judge_cmd, common);
    judge_cmd->add_option("--judge", judge_files, "judge generator config JSON (repeatable)");
    judge_cmd->add_option("--seed", seed, "presentation-order seed");
    judge_cmd->add_option("--a", variant_a, "variant shown as report A (Traj column)");
    judge_cmd->add_option("--b", variant_b, "variant shown as report B (Base column)");
    judge_cmd->add_option("--csv", out_csv, "criterion table CSV (default stdout)");
    judge_cmd->add_option("--json", out_json, "criterion table JSON");
    judge_cmd->add_option("--verdicts", out_verdicts, "raw verdicts JSONL");

    auto* ablate_cmd = app.add_subcommand("ablate", "run variants and judge each against the base report");
    add_common(ablate_cmd, common);
    add_inputs(ablate_cmd);
    ablate_cmd->add_option("--variant", variant_tags, "variant tag (repeatable, or \"all\")")->required();
    ablate_cmd->add_option("--topics", topics_path, "per-event topic assignments JSONL")->check(CLI::ExistingFile);
    ablate_cmd->add_option("--judge", judge_files, "judge generator config JSON (repeatable)");
    ablate_cmd->add_option("--seed", seed, "presentation-order seed");
    ablate_cmd->add_option("--csv", out_csv, "variant table CSV (default stdout)");
    ablate_cmd->add_option("--json", out_json, "variant table JSON");
    ablate_cmd->add_option("--verdicts", out_verdicts, "raw verdicts JSONL");

    auto* serve_cmd = app.add_subcommand("serve", "serve the store over HTTP");
    add_common(serve_cmd, common);
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string token_env = "PHASETRACE_API_TOKEN";
    std::size_t max_queries = 4;
    serve_cmd->add_option("--host", host, "bind address");
    serve_cmd->add_option("--port", port, "bind port");
    serve_cmd->add_option("--token-env", token_env, "environment variable holding the bearer token");
    serve_cmd->add_option("--max-queries", max_queries, "concurrent query cap");

    CLI11_PARSE(app, argc, argv);
    spdlog::set_default_logger(spdlog::stderr_color_mt("phasetrace"));
    spdlog::set_level(spdlog::level::from_str(log_level));

    try {
        const PipelineConfig cfg = load(common);
        const ArtifactStore store(common.store);
        inputs.format = parse_input_format(input_format);
        if (!notes_path.empty()) inputs.notes = notes_path;
        if (!topics_path.empty()) inputs.topics = topics_path;
        auto parse_tags = [&](std::vector<std::string> tags) {
            std::vector<AblationVariant> out;
            for (const auto& t : tags) {
                if (t == "all") {
                    out.assign(std::begin(kAllVariants), std::end(kAllVariants));
                    continue;
                }
                out.push_back(parse_variant(t));
            }
            return out;
        };

        if (*ingest_cmd) return report_summary(stage_ingest(cfg, inputs, store, common.users));
        if (*enrich_cmd) {
            auto classifier = make_classifier(cfg.classifier);
            std::optional<TopicAssignments> topics;
            if (inputs.topics) topics = load_topic_assignments(*inputs.topics);
            return report_summary(stage_enrich(cfg, store, *classifier, common.users, topics ? &*topics : nullptr));
        }
        if (*trajectory_cmd) return report_summary(stage_trajectory(cfg, store, common.users));
        if (*segment_cmd) return report_summary(stage_segment(cfg, store, common.users, parse_variant(variant_tag)));
        if (*report_cmd) {
            auto generator = make_generator(cfg.generator);
            return report_summary(stage_report(cfg, store, *generator, common.users, parse_variant(variant_tag)));
        }
        if (*run_cmd) {
            RunOptions options;
            options.users = common.users;
            options.variants = parse_tags(variant_tags);
            return report_summary(run_pipeline(cfg, inputs, store, options));
        }
        if (*coverage_cmd) {
            const auto topics = load_user_topics(user_topics_path);
            auto judges = make_judges(cfg, judge_files);
            const PromptSet prompts = make_prompts(cfg.generator);
            auto variants = parse_tags(variant_tags.empty() ? std::vector<std::string>{"full", "base"} : variant_tags);
            std::string csv = "user_id,variant,judge_id,covered,total,fraction\n";
            Json rows = Json::array();
            std::map<std::string, std::pair<double, int>> means;
            for (const auto& u : common.users.empty() ? store.users() : common.users) {
                auto t = topics.find(u);
                if (t == topics.end()) continue;
                for (auto v : variants) {
                    auto report = store.read_report(u, v);
                    if (!report) continue;
                    const std::string text = render_report_text(*report);
                    for (const auto& judge : judges.judges) {
                        auto r = assess_topic_coverage(text, t->second, *judge.backend, prompts);
                        csv += fmt::format("{},{},{},{},{},{:.4f}\n", u, to_string(v), judge.judge_id, r.covered,
                                           r.total, r.fraction());
                        rows.push_back(Json{{"user_id", u},
                                            {"variant", std::string(to_string(v))},
                                            {"judge_id", judge.judge_id},
                                            {"covered", r.covered},
                                            {"total", r.total},
                                            {"fraction", r.fraction()}});
                        auto& m = means[std::string(to_string(v))];
                        m.first += r.fraction();
                        ++m.second;
                    }
                }
            }
            Json summary = Json::object();
            for (const auto& [v, m] : means) summary[v] = m.first / m.second;
            write_output(out_csv, csv);
            if (!out_json.empty()) write_output(out_json, Json{{"rows", rows}, {"mean_fraction", summary}}.dump(2) + "\n");
            return 0;
        }
        if (*judge_cmd) {
            const auto a = parse_variant(variant_a);
            const auto b = parse_variant(variant_b);
            auto judges = make_judges(cfg, judge_files);
            const auto pairs = report_pairs(store, common.users, a, b);
            const auto judged =
                judge_all(pairs, judges.judges, seed, cfg.generator.max_parallel, make_prompts(cfg.generator));
            const auto cols = columns_by_judge(judged, judges.judges);
            write_output(out_csv, criterion_table_csv(cols));
            if (!out_json.empty()) write_output(out_json, criterion_table_json(cols).dump(2) + "\n");
            if (!out_verdicts.empty()) write_output(out_verdicts, verdicts_jsonl(judged, to_string(a), to_string(b)));
            return 0;
        }
        if (*ablate_cmd) {
            auto variants = parse_tags(variant_tags);
            std::vector<AblationVariant> to_run = variants;
            if (std::find(to_run.begin(), to_run.end(), AblationVariant::base) == to_run.end()) {
                to_run.push_back(AblationVariant::base);
            }
            RunOptions options;
            options.users = common.users;
            options.variants = to_run;
            const auto summary = run_pipeline(cfg, inputs, store, options);
            report_summary(summary);

            auto judges = make_judges(cfg, judge_files);
            const PromptSet prompts = make_prompts(cfg.generator);
            std::vector<std::pair<AblationVariant, std::vector<JudgeVerdict>>> runs;
            std::string all_verdicts;
            for (auto v : variants) {
                if (v == AblationVariant::base) continue;
                const auto pairs = report_pairs(store, summary.succeeded, v, AblationVariant::base);
                const auto judged = judge_all(pairs, judges.judges, seed, cfg.generator.max_parallel, prompts);
                std::vector<JudgeVerdict> verdicts;
                for (const auto& j : judged) verdicts.push_back(j.verdict);
                runs.emplace_back(v, std::move(verdicts));
                all_verdicts += verdicts_jsonl(judged, to_string(v), "base");
            }
            if (runs.empty()) throw ConfigError("ablate needs at least one variant other than base");
            const auto rows = variant_rows(runs);
            write_output(out_csv, variant_table_csv(rows));
            if (!out_json.empty()) write_output(out_json, variant_table_json(rows).dump(2) + "\n");
            if (!out_verdicts.empty()) write_output(out_verdicts, all_verdicts);
            return summary.failures.empty() ? 0 : 2;
        }
        if (*serve_cmd) {
            ServiceOptions options;
            options.max_inflight_queries = max_queries;
            if (const char* t = std::getenv(token_env.c_str())) options.token = t;
            std::shared_ptr<GenerationBackend> generator = make_generator(cfg.generator);
            Service service(store, generator, make_prompts(cfg.generator), options);
            serve(service, host, port);
            return 0;
        }
    } catch (const ConfigError& e) {
        spdlog::error("configuration: {}", e.what());
        return 64;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 1;
    }
    return 0;
}
