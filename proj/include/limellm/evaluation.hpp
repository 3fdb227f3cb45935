#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "limellm/domain.hpp"

namespace limellm {

enum class Pooling { Micro, Macro };
enum class ScoreRanking { Signed, Absolute };

Pooling pooling_from_string(const std::string& name);
const char* pooling_name(Pooling pooling);
ScoreRanking score_ranking_from_string(const std::string& name);
const char* score_ranking_name(ScoreRanking ranking);

struct CurvePoint {
    double threshold = 0.0;
    double tpr = 0.0;
    double fpr = 0.0;
    double precision = 0.0;
    double recall = 0.0;
};

struct CiEntry {
    double mean = 0.0;
    double half_width = 0.0;
};

struct SeedCi {
    CiEntry roc;
    CiEntry pr;
};

struct PerInstanceEval {
    std::string id;
    double roc = 0.0;
    double pr = 0.0;
    bool degenerate = false;  // all-positive or all-negative rationale
};

struct EvalReport {
    double pooled_roc_auc = 0.0;
    double pooled_pr_auc = 0.0;
    Pooling pooling = Pooling::Micro;
    std::vector<PerInstanceEval> per_instance;
    std::vector<CurvePoint> curve_points;  // always from the micro pool
    std::size_t skipped_degenerate = 0;
    std::optional<SeedCi> seed_ci;
};

// Mann-Whitney ROC-AUC: ties credited 0.5. Throws DegenerateRationaleError
// when the rationale has no positive or no negative bit.
double roc_auc(const std::vector<double>& scores, const BinaryRationale& rationale);

// Average precision over the ranking by descending score, ties broken by
// ascending token index.
double pr_auc(const std::vector<double>& scores, const BinaryRationale& rationale);

// Micro: concatenate all (score, bit) pairs after per-instance min-max score
// normalization and compute one curve; Macro: mean of per-instance AUCs with
// degenerate instances skipped and counted. Curve points always come from the
// micro pool.
EvalReport evaluate(const std::vector<Explanation>& explanations,
                    const std::map<std::string, BinaryRationale>& rationales, Pooling pooling,
                    ScoreRanking ranking = ScoreRanking::Signed);

// 95% normal-approximation interval over per-seed reports:
// mean +- 1.96 * sample_std / sqrt(n). Throws InsufficientSeedsError for n < 2.
SeedCi seed_ci(const std::vector<EvalReport>& reports);

} // namespace limellm
