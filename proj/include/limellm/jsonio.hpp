#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "limellm/domain.hpp"
#include "limellm/evaluation.hpp"
#include "limellm/generation.hpp"

namespace limellm {

// One line of the instances file:
//   {"id": str, "text": str, "rationale": [0|1,...]?, "label_names": [str,...],
//    "dataset": str?}
// "dataset" defaults to "all" and only matters for per-dataset ablation rows.
struct InstanceRecord {
    std::string id;
    std::string text;
    std::optional<std::vector<std::uint8_t>> rationale;
    std::vector<std::string> label_names;
    std::string dataset = "all";
};

InstanceRecord instance_record_from_json(const nlohmann::json& j);
nlohmann::json instance_record_to_json(const InstanceRecord& record);

// Explanation line:
//   {"id": str, "method": str, "seed": int, "scores": [number,...],
//    "tokens": [str,...], "diagnostics": {"weighted_sse": number,
//    "sample_count": int, "dropped": int}}
std::string explanation_to_jsonl(const Explanation& explanation);
Explanation explanation_from_json(const nlohmann::json& j);

nlohmann::json eval_report_to_json(const EvalReport& report);

// CSV export of the pooled curve: header
// "threshold,tpr,fpr,precision,recall", one row per distinct threshold.
std::string curves_to_csv(const std::vector<CurvePoint>& points);

// One stats-log line per explained instance.
struct StatsRecord {
    std::string id;
    GenerationStats stats;
};

nlohmann::json stats_record_to_json(const StatsRecord& record);
StatsRecord stats_record_from_json(const nlohmann::json& j);

// Shortest round-trip decimal form (what the CSV emitter uses).
std::string format_double(double value);

// Splits file contents into lines, ignoring a trailing newline. Throws
// ConfigError when the file cannot be read.
std::vector<std::string> read_lines(const std::string& path);

} // namespace limellm
