#include "limellm/jsonio.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace limellm {
namespace {

void reject_unknown_keys(const nlohmann::json& j, const std::vector<std::string>& allowed,
                         const std::string& context) {
    for (const auto& [key, value] : j.items()) {
        bool known = false;
        for (const std::string& k : allowed) {
            if (key == k) {
                known = true;
                break;
            }
        }
        if (!known) {
            throw ConfigError(context + ": unknown key '" + key + "'");
        }
    }
}

std::vector<std::uint8_t> bits_from_json(const nlohmann::json& j, const std::string& context) {
    if (!j.is_array()) throw ConfigError(context + ": expected an array of 0/1");
    std::vector<std::uint8_t> bits;
    bits.reserve(j.size());
    for (const auto& v : j) {
        if (!v.is_number_integer() && !v.is_number_unsigned()) {
            throw ConfigError(context + ": expected integer bits");
        }
        const auto bit = v.get<int>();
        if (bit != 0 && bit != 1) throw ConfigError(context + ": bits must be 0 or 1");
        bits.push_back(static_cast<std::uint8_t>(bit));
    }
    return bits;
}

} // namespace

InstanceRecord instance_record_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("instance record: expected a JSON object");
    reject_unknown_keys(j, {"id", "text", "rationale", "label_names", "dataset"},
                        "instance record");
    InstanceRecord record;
    if (!j.contains("id") || !j["id"].is_string()) {
        throw ConfigError("instance record: 'id' (string) is required");
    }
    record.id = j["id"].get<std::string>();
    if (!j.contains("text") || !j["text"].is_string()) {
        throw ConfigError("instance record '" + record.id + "': 'text' (string) is required");
    }
    record.text = j["text"].get<std::string>();
    if (!j.contains("label_names") || !j["label_names"].is_array()) {
        throw ConfigError("instance record '" + record.id + "': 'label_names' (array) is required");
    }
    record.label_names = j["label_names"].get<std::vector<std::string>>();
    if (j.contains("rationale")) {
        record.rationale = bits_from_json(j["rationale"], "instance record '" + record.id + "'");
    }
    if (j.contains("dataset")) {
        if (!j["dataset"].is_string()) {
            throw ConfigError("instance record '" + record.id + "': 'dataset' must be a string");
        }
        record.dataset = j["dataset"].get<std::string>();
    }
    return record;
}

nlohmann::json instance_record_to_json(const InstanceRecord& record) {
    nlohmann::json j;
    j["id"] = record.id;
    j["text"] = record.text;
    j["label_names"] = record.label_names;
    if (record.rationale.has_value()) {
        j["rationale"] = *record.rationale;
    }
    if (record.dataset != "all") {
        j["dataset"] = record.dataset;
    }
    return j;
}

std::string explanation_to_jsonl(const Explanation& explanation) {
    nlohmann::json j;
    j["id"] = explanation.instance_id();
    j["method"] = explanation.method();
    j["seed"] = explanation.seed();
    j["scores"] = explanation.scores();
    j["tokens"] = explanation.tokens();
    j["diagnostics"] = {{"weighted_sse", explanation.diagnostics().weighted_sse},
                        {"sample_count", explanation.diagnostics().sample_count},
                        {"dropped", explanation.diagnostics().dropped}};
    return j.dump();
}

Explanation explanation_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("explanation record: expected a JSON object");
    if (j.contains("error")) {
        throw ConfigError("explanation record for '" +
                          j.value("id", std::string("?")) +
                          "' is an error record: " + j["error"].get<std::string>());
    }
    reject_unknown_keys(j, {"id", "method", "seed", "scores", "tokens", "diagnostics"},
                        "explanation record");
    for (const char* key : {"id", "method", "seed", "scores", "tokens", "diagnostics"}) {
        if (!j.contains(key)) {
            throw ConfigError("explanation record: missing key '" + std::string(key) + "'");
        }
    }
    const nlohmann::json& diag = j["diagnostics"];
    reject_unknown_keys(diag, {"weighted_sse", "sample_count", "dropped"},
                        "explanation diagnostics");
    FitDiagnostics diagnostics;
    diagnostics.weighted_sse = diag.at("weighted_sse").get<double>();
    diagnostics.sample_count = diag.at("sample_count").get<std::size_t>();
    diagnostics.dropped = diag.at("dropped").get<std::size_t>();
    return Explanation::make(j["id"].get<std::string>(), j["scores"].get<std::vector<double>>(),
                             j["tokens"].get<std::vector<std::string>>(),
                             j["method"].get<std::string>(), j["seed"].get<std::int64_t>(),
                             diagnostics);
}

nlohmann::json eval_report_to_json(const EvalReport& report) {
    nlohmann::json j;
    j["pooled_roc_auc"] = report.pooled_roc_auc;
    j["pooled_pr_auc"] = report.pooled_pr_auc;
    j["pooling"] = pooling_name(report.pooling);
    j["skipped_degenerate"] = report.skipped_degenerate;
    nlohmann::json per = nlohmann::json::array();
    for (const PerInstanceEval& e : report.per_instance) {
        nlohmann::json entry;
        entry["id"] = e.id;
        if (e.degenerate) {
            entry["degenerate"] = true;
        } else {
            entry["roc_auc"] = e.roc;
            entry["pr_auc"] = e.pr;
        }
        per.push_back(std::move(entry));
    }
    j["per_instance"] = std::move(per);
    nlohmann::json curve = nlohmann::json::array();
    for (const CurvePoint& p : report.curve_points) {
        curve.push_back({{"threshold", p.threshold},
                         {"tpr", p.tpr},
                         {"fpr", p.fpr},
                         {"precision", p.precision},
                         {"recall", p.recall}});
    }
    j["curve_points"] = std::move(curve);
    if (report.seed_ci.has_value()) {
        j["seed_ci"] = {{"roc_auc",
                         {{"mean", report.seed_ci->roc.mean},
                          {"half_width", report.seed_ci->roc.half_width}}},
                        {"pr_auc",
                         {{"mean", report.seed_ci->pr.mean},
                          {"half_width", report.seed_ci->pr.half_width}}}};
    }
    return j;
}

std::string curves_to_csv(const std::vector<CurvePoint>& points) {
    std::string out = "threshold,tpr,fpr,precision,recall\n";
    for (const CurvePoint& p : points) {
        out += format_double(p.threshold) + "," + format_double(p.tpr) + "," +
               format_double(p.fpr) + "," + format_double(p.precision) + "," +
               format_double(p.recall) + "\n";
    }
    return out;
}

nlohmann::json stats_record_to_json(const StatsRecord& record) {
    nlohmann::json j;
    j["id"] = record.id;
    j["llm_calls"] = record.stats.llm_calls;
    j["input_tokens"] = record.stats.input_tokens;
    j["output_tokens"] = record.stats.output_tokens;
    j["rejected_samples"] = record.stats.rejected_samples;
    j["wall_time_ms"] = record.stats.wall_time_ms;
    return j;
}

StatsRecord stats_record_from_json(const nlohmann::json& j) {
    reject_unknown_keys(j, {"id", "llm_calls", "input_tokens", "output_tokens",
                            "rejected_samples", "wall_time_ms"},
                        "stats record");
    StatsRecord record;
    record.id = j.at("id").get<std::string>();
    record.stats.llm_calls = j.at("llm_calls").get<std::size_t>();
    record.stats.input_tokens = j.at("input_tokens").get<std::size_t>();
    record.stats.output_tokens = j.at("output_tokens").get<std::size_t>();
    record.stats.rejected_samples = j.at("rejected_samples").get<std::size_t>();
    record.stats.wall_time_ms = j.at("wall_time_ms").get<std::int64_t>();
    return record;
}

std::string format_double(double value) {
    char buffer[64];
    const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
    return std::string(buffer, result.ptr);
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read file: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

} // namespace limellm
