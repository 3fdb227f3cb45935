#include "limellm/cli.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <thread>

#include "limellm/baselines.hpp"
#include "limellm/jsonio.hpp"
#include "limellm/runconfig.hpp"
#include "limellm/surrogate.hpp"
#include "limellm/tokenization.hpp"

namespace limellm {
namespace {

std::vector<InstanceRecord> load_instances(const std::string& path) {
    const auto lines = read_lines(path);
    std::vector<InstanceRecord> records;
    std::set<std::string> ids;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(lines[i]);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(path + " line " + std::to_string(i + 1) + ": " + e.what());
        }
        try {
            records.push_back(instance_record_from_json(j));
        } catch (const Error& e) {
            throw ConfigError(path + " line " + std::to_string(i + 1) + ": " + e.what());
        }
        if (!ids.insert(records.back().id).second) {
            throw ConfigError(path + " line " + std::to_string(i + 1) + ": duplicate id '" +
                              records.back().id + "'");
        }
    }
    if (records.empty()) throw ConfigError(path + ": no instance records");
    return records;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write file: " + path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw ConfigError("short write: " + path);
}

RunConfig apply_overrides(RunConfig config, const CliOverrides& o) {
    if (o.method.has_value()) {
        if (*o.method != "lime-llm" && *o.method != "lime-standard") {
            throw ConfigError("--method must be lime-llm or lime-standard");
        }
        config.method = *o.method;
    }
    if (o.kernel.has_value()) config.kernel_mode = kernel_mode_from_string(*o.kernel);
    if (o.seeds.has_value()) {
        if (o.seeds->empty()) throw ConfigError("--seeds must be non-empty");
        config.seeds = *o.seeds;
    }
    if (o.seed.has_value()) config.seeds = {*o.seed};
    if (o.parallel.has_value()) {
        if (*o.parallel < 1) throw ConfigError("--parallel must be >= 1");
        config.parallel = *o.parallel;
    }
    if (o.pooling.has_value()) config.pooling = pooling_from_string(*o.pooling);
    if (o.ranking.has_value()) config.score_ranking = score_ranking_from_string(*o.ranking);
    return config;
}

std::string error_record(const std::string& id, const std::string& what) {
    nlohmann::json j;
    j["id"] = id;
    j["error"] = what;
    return j.dump();
}

// Work-stealing loop over n jobs; parallel <= 1 runs inline.
void run_jobs(std::size_t n, int parallel, const std::function<void(std::size_t)>& job) {
    if (parallel <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) job(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            job(i);
        }
    };
    std::vector<std::thread> threads;
    const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(parallel), n);
    threads.reserve(count);
    for (std::size_t t = 0; t < count; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
}

struct JobOutcome {
    std::string line;
    bool ok = false;
    bool backend_error = false;
    GenerationStats stats;
    std::optional<Explanation> explanation;
};

Instance make_instance(const InstanceRecord& record, BackendSet& backends) {
    if (backends.mock_classifier != nullptr && backends.ood_sequential) {
        backends.mock_classifier->set_reference_token_count(tokenize(record.text).size());
    }
    const auto probs = backends.classifier->predict({record.text});
    if (probs.size() != 1) {
        throw BackendError("classifier returned " + std::to_string(probs.size()) +
                           " vectors for 1 text");
    }
    if (probs[0].size() != record.label_names.size()) {
        throw ConfigError("instance '" + record.id + "': classifier emits " +
                          std::to_string(probs[0].size()) + " classes but label_names has " +
                          std::to_string(record.label_names.size()));
    }
    std::optional<BinaryRationale> rationale;
    if (record.rationale.has_value()) rationale = BinaryRationale(*record.rationale);
    return Instance::create(record.id, record.text, probs[0], std::move(rationale));
}

JobOutcome explain_one(const InstanceRecord& record, std::int64_t seed, const RunConfig& config,
                       BackendSet& backends) {
    JobOutcome outcome;
    try {
        const Instance instance = make_instance(record, backends);
        std::optional<Explanation> explanation;
        if (config.method == "lime-llm") {
            PipelineConfig pipeline;
            pipeline.sampling = config.sampling;
            pipeline.sampling.seed = seed;
            pipeline.generation = config.generation;
            pipeline.prompt = config.prompt;
            pipeline.kernel_mode = config.kernel_mode;
            pipeline.lambda = config.lambda;
            pipeline.hybrid_bow_weight = config.hybrid_bow_weight;
            explanation = explain(instance, *backends.classifier, *backends.llm,
                                  backends.embedder, pipeline, &outcome.stats);
        } else {
            LimeConfig lime = config.baseline;
            lime.seed = seed;
            explanation = explain_lime(instance, *backends.classifier, lime);
        }
        outcome.line = explanation_to_jsonl(*explanation);
        outcome.explanation = std::move(explanation);
        outcome.ok = true;
    } catch (const BackendError& e) {
        outcome.backend_error = true;
        outcome.line = error_record(record.id, e.what());
    } catch (const std::exception& e) {
        outcome.line = error_record(record.id, e.what());
    }
    return outcome;
}

void check_lime_llm_prereqs(const RunConfig& config, const BackendSet& backends,
                            const std::vector<InstanceRecord>& records) {
    if (backends.llm == nullptr) {
        throw ConfigError("method lime-llm requires a backends.llm entry");
    }
    if (!config.has_prompt) {
        throw ConfigError("method lime-llm requires prompt_spec in the config");
    }
    if (config.kernel_mode != KernelMode::BowOnly && backends.embedder == nullptr) {
        throw ConfigError("kernel mode '" + std::string(kernel_mode_name(config.kernel_mode)) +
                          "' requires a backends.embedder entry");
    }
    for (const InstanceRecord& r : records) {
        if (r.label_names != config.prompt.label_names) {
            throw ConfigError("instance '" + r.id +
                              "': label_names do not match the prompt spec");
        }
    }
}

int exit_code_for(std::size_t ok, std::size_t failed, bool any_backend_error) {
    if (failed == 0) return 0;
    if (ok == 0 && any_backend_error) return 2;
    return 3;
}

} // namespace

int cmd_explain(const std::string& instances_path, const std::string& config_path,
                const std::string& out_path, const CliOverrides& overrides, std::ostream& err) {
    RunConfig config;
    std::vector<InstanceRecord> records;
    BackendSet backends;
    try {
        config = apply_overrides(RunConfig::load(config_path), overrides);
        records = load_instances(instances_path);
        backends = build_backends(config, overrides.cache_dir.value_or(""));
        if (config.method == "lime-llm") {
            check_lime_llm_prereqs(config, backends, records);
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }

    const std::size_t n_jobs = config.seeds.size() * records.size();
    std::vector<JobOutcome> outcomes(n_jobs);
    const int parallel = backends.ood_sequential ? 1 : config.parallel;

    run_jobs(n_jobs, parallel, [&](std::size_t i) {
        const std::int64_t seed = config.seeds[i / records.size()];
        const InstanceRecord& record = records[i % records.size()];
        outcomes[i] = explain_one(record, seed, config, backends);
    });

    std::size_t ok = 0;
    bool any_backend_error = false;
    GenerationStats totals;
    std::string out_content;
    std::string stats_content;
    for (std::size_t i = 0; i < n_jobs; ++i) {
        const JobOutcome& outcome = outcomes[i];
        out_content += outcome.line + "\n";
        if (outcome.ok) {
            ++ok;
            totals.llm_calls += outcome.stats.llm_calls;
            totals.input_tokens += outcome.stats.input_tokens;
            totals.output_tokens += outcome.stats.output_tokens;
            totals.rejected_samples += outcome.stats.rejected_samples;
            totals.wall_time_ms += outcome.stats.wall_time_ms;
            if (config.method == "lime-llm" && overrides.stats_log.has_value()) {
                stats_content +=
                    stats_record_to_json({records[i % records.size()].id, outcome.stats}).dump() +
                    "\n";
            }
        } else if (outcome.backend_error) {
            any_backend_error = true;
        }
    }

    try {
        write_file(out_path, out_content);
        if (overrides.stats_log.has_value()) {
            write_file(*overrides.stats_log, stats_content);
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }

    err << "[stats] instances=" << records.size() << " seeds=" << config.seeds.size()
        << " ok=" << ok << " failed=" << n_jobs - ok << " llm_calls=" << totals.llm_calls
        << " input_tokens=" << totals.input_tokens << " output_tokens=" << totals.output_tokens
        << " rejected_samples=" << totals.rejected_samples
        << " wall_time_ms=" << totals.wall_time_ms;
    if (backends.cache) {
        err << " cache_io_warnings=" << backends.cache->io_warnings();
    }
    err << "\n";

    return exit_code_for(ok, n_jobs - ok, any_backend_error);
}

int cmd_evaluate(const std::string& explanations_path, const std::string& rationales_path,
                 const std::string& out_path, const std::string& curves_path,
                 const CliOverrides& overrides, std::ostream& err) {
    try {
        std::vector<Explanation> explanations;
        for (const std::string& line : read_lines(explanations_path)) {
            if (line.empty()) continue;
            explanations.push_back(explanation_from_json(nlohmann::json::parse(line)));
        }
        if (explanations.empty()) {
            throw ConfigError(explanations_path + ": no explanation records");
        }

        std::map<std::string, BinaryRationale> rationales;
        for (const InstanceRecord& r : load_instances(rationales_path)) {
            if (r.rationale.has_value()) {
                rationales.emplace(r.id, BinaryRationale(*r.rationale));
            }
        }

        const Pooling pooling = pooling_from_string(overrides.pooling.value_or("micro"));
        const ScoreRanking ranking =
            score_ranking_from_string(overrides.ranking.value_or("signed"));

        EvalReport report = evaluate(explanations, rationales, pooling, ranking);

        // Seed-level confidence intervals when the file spans several seeds.
        std::vector<std::int64_t> seed_order;
        std::map<std::int64_t, std::vector<Explanation>> by_seed;
        for (const Explanation& e : explanations) {
            if (by_seed.find(e.seed()) == by_seed.end()) seed_order.push_back(e.seed());
            by_seed[e.seed()].push_back(e);
        }
        if (seed_order.size() >= 2) {
            std::vector<EvalReport> per_seed;
            per_seed.reserve(seed_order.size());
            for (std::int64_t seed : seed_order) {
                per_seed.push_back(evaluate(by_seed[seed], rationales, pooling, ranking));
            }
            report.seed_ci = seed_ci(per_seed);
        }

        write_file(out_path, eval_report_to_json(report).dump(2) + "\n");
        if (!curves_path.empty()) {
            write_file(curves_path, curves_to_csv(report.curve_points));
        }
        return 0;
    } catch (const nlohmann::json::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

int cmd_ablate(const std::string& instances_path, const std::string& config_path,
               const std::string& out_dir, const CliOverrides& overrides, std::ostream& err) {
    RunConfig config;
    std::vector<InstanceRecord> records;
    BackendSet backends;
    try {
        config = apply_overrides(RunConfig::load(config_path), overrides);
        records = load_instances(instances_path);
        backends = build_backends(config, overrides.cache_dir.value_or(""));
        check_lime_llm_prereqs(config, backends, records);
        if (backends.embedder == nullptr) {
            throw ConfigError("ablate requires a backends.embedder entry");
        }
        for (const InstanceRecord& r : records) {
            if (!r.rationale.has_value()) {
                throw ConfigError("ablate: instance '" + r.id + "' has no rationale");
            }
        }
        std::filesystem::create_directories(out_dir);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }

    constexpr std::array<KernelMode, 3> kModes = {KernelMode::BowOnly, KernelMode::EmbeddingOnly,
                                                  KernelMode::Hybrid};
    const std::int64_t seed = config.seeds.front();

    struct AblateOutcome {
        bool ok = false;
        bool backend_error = false;
        std::string error_line;
        std::array<std::optional<Explanation>, 3> by_mode;
        GenerationStats stats;
    };
    std::vector<AblateOutcome> outcomes(records.size());
    const int parallel = backends.ood_sequential ? 1 : config.parallel;

    run_jobs(records.size(), parallel, [&](std::size_t i) {
        AblateOutcome& outcome = outcomes[i];
        const InstanceRecord& record = records[i];
        try {
            const Instance instance = make_instance(record, backends);
            const SaliencyProfile saliency = occlusion_saliency(instance, *backends.classifier);
            SamplingConfig sampling = config.sampling;
            sampling.seed = seed;
            const auto hypotheses = build_hypotheses(instance, sampling, saliency);
            // One generation pass; the kernel mode only affects the refit.
            GenerationResult generated = generate_neighborhood(
                instance, hypotheses, config.prompt, *backends.llm, *backends.classifier,
                config.generation, saliency.top_index(), seed);
            outcome.stats = generated.stats;
            for (std::size_t m = 0; m < kModes.size(); ++m) {
                outcome.by_mode[m] = explain_from_neighborhood(
                    generated.neighborhood, kModes[m], backends.embedder, config.lambda,
                    config.hybrid_bow_weight, "lime-llm", seed);
            }
            outcome.ok = true;
        } catch (const BackendError& e) {
            outcome.backend_error = true;
            outcome.error_line = error_record(record.id, e.what());
        } catch (const std::exception& e) {
            outcome.error_line = error_record(record.id, e.what());
        }
    });

    try {
        std::map<std::string, BinaryRationale> rationales;
        for (const InstanceRecord& r : records) {
            rationales.emplace(r.id, BinaryRationale(*r.rationale));
        }

        std::size_t ok = 0;
        bool any_backend_error = false;
        GenerationStats totals;
        std::array<std::vector<Explanation>, 3> by_mode;
        for (std::size_t m = 0; m < kModes.size(); ++m) {
            std::string content;
            for (std::size_t i = 0; i < records.size(); ++i) {
                if (outcomes[i].ok) {
                    content += explanation_to_jsonl(*outcomes[i].by_mode[m]) + "\n";
                    by_mode[m].push_back(*outcomes[i].by_mode[m]);
                } else {
                    content += outcomes[i].error_line + "\n";
                }
            }
            write_file((std::filesystem::path(out_dir) /
                        ("explanations_" + std::string(kernel_mode_name(kModes[m])) + ".jsonl"))
                           .string(),
                       content);
        }
        for (const AblateOutcome& outcome : outcomes) {
            if (outcome.ok) {
                ++ok;
                totals.llm_calls += outcome.stats.llm_calls;
                totals.input_tokens += outcome.stats.input_tokens;
                totals.output_tokens += outcome.stats.output_tokens;
                totals.rejected_samples += outcome.stats.rejected_samples;
            } else if (outcome.backend_error) {
                any_backend_error = true;
            }
        }
        if (ok == 0) {
            err << "error: every instance failed during ablation\n";
            return any_backend_error ? 2 : 3;
        }

        // Dataset rows mirror the published ablation table layout: one row
        // per dataset, one ROC/PR pair per kernel mode.
        std::vector<std::string> datasets;
        for (std::size_t i = 0; i < records.size(); ++i) {
            if (!outcomes[i].ok) continue;
            if (std::find(datasets.begin(), datasets.end(), records[i].dataset) ==
                datasets.end()) {
                datasets.push_back(records[i].dataset);
            }
        }
        std::sort(datasets.begin(), datasets.end());

        nlohmann::json rows = nlohmann::json::array();
        const auto row_for = [&](const std::string& dataset, bool overall) {
            nlohmann::json row;
            row["dataset"] = dataset;
            for (std::size_t m = 0; m < kModes.size(); ++m) {
                std::vector<Explanation> subset;
                for (std::size_t i = 0, k = 0; i < records.size(); ++i) {
                    if (!outcomes[i].ok) continue;
                    if (overall || records[i].dataset == dataset) {
                        subset.push_back(by_mode[m][k]);
                    }
                    ++k;
                }
                const EvalReport report =
                    evaluate(subset, rationales, config.pooling, config.score_ranking);
                row[kernel_mode_name(kModes[m])] = {{"roc_auc", report.pooled_roc_auc},
                                                    {"pr_auc", report.pooled_pr_auc}};
            }
            return row;
        };
        for (const std::string& dataset : datasets) {
            rows.push_back(row_for(dataset, false));
        }
        if (datasets.size() > 1) {
            rows.push_back(row_for("overall", true));
        }

        nlohmann::json table;
        table["seed"] = seed;
        table["pooling"] = pooling_name(config.pooling);
        table["kernel_modes"] = {"bow", "embedding", "hybrid"};
        table["rows"] = std::move(rows);
        table["llm_calls"] = totals.llm_calls;
        table["instances"] = records.size();
        table["failed"] = records.size() - ok;
        write_file((std::filesystem::path(out_dir) / "ablation.json").string(),
                   table.dump(2) + "\n");

        err << "[stats] instances=" << records.size() << " ok=" << ok
            << " llm_calls=" << totals.llm_calls << "\n";
        return exit_code_for(ok, records.size() - ok, any_backend_error);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

int cmd_stats(const std::string& run_log_path, std::ostream& out, std::ostream& err) {
    try {
        std::size_t instances = 0;
        GenerationStats totals;
        for (const std::string& line : read_lines(run_log_path)) {
            if (line.empty()) continue;
            const StatsRecord record = stats_record_from_json(nlohmann::json::parse(line));
            ++instances;
            totals.llm_calls += record.stats.llm_calls;
            totals.input_tokens += record.stats.input_tokens;
            totals.output_tokens += record.stats.output_tokens;
            totals.rejected_samples += record.stats.rejected_samples;
            totals.wall_time_ms += record.stats.wall_time_ms;
        }
        nlohmann::json summary;
        summary["instances"] = instances;
        summary["api_calls"] = totals.llm_calls;
        summary["total_input_tokens"] = totals.input_tokens;
        summary["total_output_tokens"] = totals.output_tokens;
        summary["mean_input_tokens_per_call"] =
            totals.llm_calls == 0 ? 0.0
                                  : static_cast<double>(totals.input_tokens) /
                                        static_cast<double>(totals.llm_calls);
        summary["mean_output_tokens_per_call"] =
            totals.llm_calls == 0 ? 0.0
                                  : static_cast<double>(totals.output_tokens) /
                                        static_cast<double>(totals.llm_calls);
        summary["rejected_samples"] = totals.rejected_samples;
        summary["total_wall_time_ms"] = totals.wall_time_ms;
        out << summary.dump(2) << "\n";
        return 0;
    } catch (const nlohmann::json::exception& e) {
        err << "error: " << run_log_path << ": " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace limellm
