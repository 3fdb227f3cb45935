#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace limellm {

// Flag-level overrides applied on top of the config document.
struct CliOverrides {
    std::optional<std::string> method;
    std::optional<std::string> kernel;
    std::optional<std::int64_t> seed;                 // wins over seeds
    std::optional<std::vector<std::int64_t>> seeds;
    std::optional<int> parallel;
    std::optional<std::string> cache_dir;
    std::optional<std::string> stats_log;             // JSONL per-instance stats
    std::optional<std::string> pooling;               // evaluate
    std::optional<std::string> ranking;               // evaluate
};

// Exit codes: 0 ok, 1 config/input error, 2 backend failure (nothing
// succeeded), 3 partial failure. Failed instances appear in the output file
// as {"id":..., "error":...} records, keeping line order.
int cmd_explain(const std::string& instances_path, const std::string& config_path,
                const std::string& out_path, const CliOverrides& overrides, std::ostream& err);

int cmd_evaluate(const std::string& explanations_path, const std::string& rationales_path,
                 const std::string& out_path, const std::string& curves_path,
                 const CliOverrides& overrides, std::ostream& err);

// Generates each instance's neighborhood once and refits it under all three
// kernel modes; writes per-mode explanation files and ablation.json.
int cmd_ablate(const std::string& instances_path, const std::string& config_path,
               const std::string& out_dir, const CliOverrides& overrides, std::ostream& err);

int cmd_stats(const std::string& run_log_path, std::ostream& out, std::ostream& err);

} // namespace limellm
