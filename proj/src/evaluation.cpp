#include "limellm/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace limellm {
namespace {

struct ClassCounts {
    std::size_t positives = 0;
    std::size_t negatives = 0;
};

ClassCounts count_classes(const std::vector<std::uint8_t>& bits) {
    ClassCounts c;
    for (std::uint8_t b : bits) {
        if (b) ++c.positives;
        else ++c.negatives;
    }
    return c;
}

// Mann-Whitney AUC via average ranks; ties credited 0.5.
double mann_whitney_auc(const std::vector<double>& scores, const std::vector<std::uint8_t>& bits) {
    const ClassCounts counts = count_classes(bits);
    if (counts.positives == 0 || counts.negatives == 0) {
        throw DegenerateRationaleError("roc_auc: rationale needs at least one positive and one negative bit");
    }
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    double positive_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        // 1-based average rank of the tie group [i, j)
        const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k) {
            if (bits[order[k]]) positive_rank_sum += avg_rank;
        }
        i = j;
    }
    const double p = static_cast<double>(counts.positives);
    const double u = positive_rank_sum - p * (p + 1.0) / 2.0;
    return u / (p * static_cast<double>(counts.negatives));
}

// Average precision over the ranking by descending score; ties keep the
// original (ascending-position) order.
double average_precision(const std::vector<double>& scores,
                         const std::vector<std::uint8_t>& bits) {
    const ClassCounts counts = count_classes(bits);
    if (counts.positives == 0 || counts.negatives == 0) {
        throw DegenerateRationaleError("pr_auc: rationale needs at least one positive and one negative bit");
    }
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    double ap = 0.0;
    std::size_t positives_seen = 0;
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        if (!bits[order[rank]]) continue;
        ++positives_seen;
        ap += static_cast<double>(positives_seen) / static_cast<double>(rank + 1);
    }
    return ap / static_cast<double>(counts.positives);
}

void check_lengths(const Explanation& e, const BinaryRationale& r) {
    if (e.scores().size() != r.size()) {
        throw LengthMismatchError("evaluate: explanation '" + e.instance_id() + "' has " +
                                  std::to_string(e.scores().size()) + " scores but rationale has " +
                                  std::to_string(r.size()) + " bits");
    }
}

std::vector<double> apply_ranking(const std::vector<double>& scores, ScoreRanking ranking) {
    if (ranking == ScoreRanking::Signed) return scores;
    std::vector<double> out(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) out[i] = std::abs(scores[i]);
    return out;
}

// Min-max normalization; a constant vector maps to all 0.5.
std::vector<double> min_max_normalize(const std::vector<double>& scores) {
    const auto [lo_it, hi_it] = std::minmax_element(scores.begin(), scores.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    std::vector<double> out(scores.size());
    if (hi == lo) {
        std::fill(out.begin(), out.end(), 0.5);
        return out;
    }
    for (std::size_t i = 0; i < scores.size(); ++i) out[i] = (scores[i] - lo) / (hi - lo);
    return out;
}

std::vector<CurvePoint> pooled_curve(const std::vector<double>& scores,
                                     const std::vector<std::uint8_t>& bits) {
    const ClassCounts counts = count_classes(bits);
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    std::vector<CurvePoint> points;
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double threshold = scores[order[i]];
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == threshold) {
            if (bits[order[j]]) ++tp;
            else ++fp;
            ++j;
        }
        CurvePoint pt;
        pt.threshold = threshold;
        pt.tpr = static_cast<double>(tp) / static_cast<double>(counts.positives);
        pt.fpr = static_cast<double>(fp) / static_cast<double>(counts.negatives);
        pt.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        pt.recall = pt.tpr;
        points.push_back(pt);
        i = j;
    }
    return points;
}

} // namespace

Pooling pooling_from_string(const std::string& name) {
    if (name == "micro") return Pooling::Micro;
    if (name == "macro") return Pooling::Macro;
    throw ConfigError("unknown pooling '" + name + "' (expected micro|macro)");
}

const char* pooling_name(Pooling pooling) {
    return pooling == Pooling::Micro ? "micro" : "macro";
}

ScoreRanking score_ranking_from_string(const std::string& name) {
    if (name == "signed") return ScoreRanking::Signed;
    if (name == "absolute") return ScoreRanking::Absolute;
    throw ConfigError("unknown score ranking '" + name + "' (expected signed|absolute)");
}

const char* score_ranking_name(ScoreRanking ranking) {
    return ranking == ScoreRanking::Signed ? "signed" : "absolute";
}

double roc_auc(const std::vector<double>& scores, const BinaryRationale& rationale) {
    if (scores.size() != rationale.size()) {
        throw LengthMismatchError("roc_auc: scores/rationale length mismatch");
    }
    return mann_whitney_auc(scores, rationale.bits());
}

double pr_auc(const std::vector<double>& scores, const BinaryRationale& rationale) {
    if (scores.size() != rationale.size()) {
        throw LengthMismatchError("pr_auc: scores/rationale length mismatch");
    }
    return average_precision(scores, rationale.bits());
}

EvalReport evaluate(const std::vector<Explanation>& explanations,
                    const std::map<std::string, BinaryRationale>& rationales, Pooling pooling,
                    ScoreRanking ranking) {
    if (explanations.empty()) throw InvariantError("evaluate: no explanations given");

    EvalReport report;
    report.pooling = pooling;

    std::vector<double> pooled_scores;
    std::vector<std::uint8_t> pooled_bits;
    double macro_roc_sum = 0.0;
    double macro_pr_sum = 0.0;
    std::size_t macro_count = 0;

    for (const Explanation& e : explanations) {
        const auto it = rationales.find(e.instance_id());
        if (it == rationales.end()) {
            throw MissingRationaleError("evaluate: no rationale for id '" + e.instance_id() + "'");
        }
        const BinaryRationale& rationale = it->second;
        check_lengths(e, rationale);
        const std::vector<double> scores = apply_ranking(e.scores(), ranking);

        PerInstanceEval entry;
        entry.id = e.instance_id();
        const ClassCounts counts = count_classes(rationale.bits());
        if (counts.positives == 0 || counts.negatives == 0) {
            entry.degenerate = true;
            ++report.skipped_degenerate;
        } else {
            entry.roc = mann_whitney_auc(scores, rationale.bits());
            entry.pr = average_precision(scores, rationale.bits());
            macro_roc_sum += entry.roc;
            macro_pr_sum += entry.pr;
            ++macro_count;

            const std::vector<double> normalized = min_max_normalize(scores);
            pooled_scores.insert(pooled_scores.end(), normalized.begin(), normalized.end());
            pooled_bits.insert(pooled_bits.end(), rationale.bits().begin(),
                               rationale.bits().end());
        }
        report.per_instance.push_back(std::move(entry));
    }

    if (pooled_scores.empty()) {
        throw DegenerateRationaleError("evaluate: every instance had a degenerate rationale");
    }
    const ClassCounts pool_counts = count_classes(pooled_bits);
    if (pool_counts.positives == 0 || pool_counts.negatives == 0) {
        throw DegenerateRationaleError("evaluate: pooled rationale bits are single-class");
    }

    const double micro_roc = mann_whitney_auc(pooled_scores, pooled_bits);
    const double micro_pr = average_precision(pooled_scores, pooled_bits);
    report.curve_points = pooled_curve(pooled_scores, pooled_bits);

    if (pooling == Pooling::Micro) {
        report.pooled_roc_auc = micro_roc;
        report.pooled_pr_auc = micro_pr;
    } else {
        report.pooled_roc_auc = macro_roc_sum / static_cast<double>(macro_count);
        report.pooled_pr_auc = macro_pr_sum / static_cast<double>(macro_count);
    }
    return report;
}

SeedCi seed_ci(const std::vector<EvalReport>& reports) {
    if (reports.size() < 2) {
        throw InsufficientSeedsError("seed_ci: need at least 2 seed-level reports, got " +
                                     std::to_string(reports.size()));
    }
    const auto interval = [&](auto metric) {
        const double n = static_cast<double>(reports.size());
        double mean = 0.0;
        for (const EvalReport& r : reports) mean += metric(r);
        mean /= n;
        double var = 0.0;
        for (const EvalReport& r : reports) {
            const double diff = metric(r) - mean;
            var += diff * diff;
        }
        var /= n - 1.0;  // sample variance
        const double half = 1.96 * std::sqrt(var) / std::sqrt(n);
        return CiEntry{mean, half};
    };
    SeedCi ci;
    ci.roc = interval([](const EvalReport& r) { return r.pooled_roc_auc; });
    ci.pr = interval([](const EvalReport& r) { return r.pooled_pr_auc; });
    return ci;
}

} // namespace limellm
