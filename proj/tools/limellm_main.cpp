#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "limellm/cli.hpp"

namespace {

// CLI11 fills these only when the flag appears; count() gates the optionals.
struct FlagBuffer {
    std::string method;
    std::string kernel;
    std::int64_t seed = 0;
    std::vector<std::int64_t> seeds;
    int parallel = 0;
    std::string cache_dir;
    std::string stats_log;
    std::string pooling;
    std::string ranking;
};

bool flag_set(const CLI::App& cmd, const std::string& name) {
    const CLI::Option* option = cmd.get_option_no_throw(name);
    return option != nullptr && option->count() > 0;
}

limellm::CliOverrides overrides_from(const CLI::App& cmd, const FlagBuffer& buffer) {
    limellm::CliOverrides overrides;
    if (flag_set(cmd, "--method")) overrides.method = buffer.method;
    if (flag_set(cmd, "--kernel")) overrides.kernel = buffer.kernel;
    if (flag_set(cmd, "--seed")) overrides.seed = buffer.seed;
    if (flag_set(cmd, "--seeds")) overrides.seeds = buffer.seeds;
    if (flag_set(cmd, "--parallel")) overrides.parallel = buffer.parallel;
    if (flag_set(cmd, "--cache-dir")) overrides.cache_dir = buffer.cache_dir;
    if (flag_set(cmd, "--stats-log")) overrides.stats_log = buffer.stats_log;
    if (flag_set(cmd, "--pooling")) overrides.pooling = buffer.pooling;
    if (flag_set(cmd, "--ranking")) overrides.ranking = buffer.ranking;
    return overrides;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"limellm: local surrogate explanations via hypothesis-driven LLM infilling"};
    app.require_subcommand(1);

    FlagBuffer buffer;

    // explain
    std::string instances_path;
    std::string config_path;
    std::string out_path;
    auto* explain = app.add_subcommand("explain", "Explain instances; writes explanation JSONL");
    explain->add_option("instances", instances_path, "Instances JSONL file")->required();
    explain->add_option("--config", config_path, "Run config JSON")->required();
    explain->add_option("--out", out_path, "Output explanations JSONL")->required();
    explain->add_option("--method", buffer.method, "lime-llm or lime-standard");
    explain->add_option("--kernel", buffer.kernel, "bow, embedding, or hybrid");
    explain->add_option("--seed", buffer.seed, "Single seed (overrides config seeds)");
    explain->add_option("--seeds", buffer.seeds, "Seed list")->delimiter(',');
    explain->add_option("--parallel", buffer.parallel, "Concurrent instances");
    explain->add_option("--cache-dir", buffer.cache_dir, "Response cache directory");
    explain->add_option("--stats-log", buffer.stats_log, "Per-instance stats JSONL");

    // evaluate
    std::string explanations_path;
    std::string rationales_path;
    std::string report_path;
    std::string curves_path;
    auto* evaluate = app.add_subcommand("evaluate", "Score explanations against rationales");
    evaluate->add_option("explanations", explanations_path, "Explanations JSONL")->required();
    evaluate->add_option("--rationales", rationales_path, "Instances JSONL with rationale bits")
        ->required();
    evaluate->add_option("--out", report_path, "Evaluation report JSON")->required();
    evaluate->add_option("--curves", curves_path, "Pooled curve points CSV");
    evaluate->add_option("--pooling", buffer.pooling, "micro or macro");
    evaluate->add_option("--ranking", buffer.ranking, "signed or absolute score ranking");

    // ablate
    std::string ablate_instances;
    std::string ablate_config;
    std::string out_dir;
    auto* ablate = app.add_subcommand(
        "ablate", "Refit one generation pass under all three kernel modes");
    ablate->add_option("instances", ablate_instances, "Instances JSONL (rationales required)")
        ->required();
    ablate->add_option("--config", ablate_config, "Run config JSON")->required();
    ablate->add_option("--out-dir", out_dir, "Output directory")->required();
    ablate->add_option("--seed", buffer.seed, "Seed (overrides config seeds)");
    ablate->add_option("--parallel", buffer.parallel, "Concurrent instances");
    ablate->add_option("--cache-dir", buffer.cache_dir, "Response cache directory");

    // stats
    std::string run_log_path;
    auto* stats = app.add_subcommand("stats", "Aggregate a per-instance stats log");
    stats->add_option("run_log", run_log_path, "Stats JSONL from explain --stats-log")->required();

    CLI11_PARSE(app, argc, argv);

    if (explain->parsed()) {
        return limellm::cmd_explain(instances_path, config_path, out_path,
                                    overrides_from(*explain, buffer), std::cerr);
    }
    if (evaluate->parsed()) {
        return limellm::cmd_evaluate(explanations_path, rationales_path, report_path, curves_path,
                                     overrides_from(*evaluate, buffer), std::cerr);
    }
    if (ablate->parsed()) {
        return limellm::cmd_ablate(ablate_instances, ablate_config, out_dir,
                                   overrides_from(*ablate, buffer), std::cerr);
    }
    if (stats->parsed()) {
        return limellm::cmd_stats(run_log_path, std::cout, std::cerr);
    }
    return 1;
}
