#pragma once

#include "ood/metrics.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ood {

/// 1-d Gaussian KDE over scalar scores.
struct KdeModel {
    std::vector<double> points;
    double bandwidth = 0.0;
};

/// Floor applied to KDE densities before taking logs.
inline constexpr double kDensityFloor = 1e-12;

/// Silverman bandwidth with a degeneracy floor:
/// h = max(0.9 * min(sigma, IQR/1.34) * n^(-1/5), 1e-3 * range, 1e-6).
KdeModel fit_kde(const std::vector<double>& scores);

/// log of the KDE density at x, floored at log(1e-12).
double kde_log_pdf(const KdeModel& model, double x);

/// Monte-Carlo KL(test || id) at the test group's own points:
/// mean_j [log p_test(s_j) - log p_id(s_j)]. Zero exactly for a group
/// evaluated against its own KDE.
double kl_group(const std::vector<double>& test_scores, const KdeModel& id_model);

/// Seeded disjoint partitions: per trial, shuffle then split into
/// floor(n/gs) groups of gs; the remainder is dropped.
std::vector<std::vector<std::vector<double>>> make_groups(const std::vector<double>& scores,
                                                          int gs, std::uint64_t seed,
                                                          int trials);

struct DetectionConfig {
    int group_size = 10;
    std::optional<double> threshold;  // decisions reported only when set
    int trials = 5;
    int testset_draws = 2;
    std::uint64_t seed = 0;
};

struct GroupResult {
    int trial = 0;  // combined draw/trial index
    int group = 0;
    std::string origin;  // "id" or "ood"
    double kl = 0.0;
    int decision = -1;  // 1 = flagged OOD, 0 = ID, -1 = no threshold given
};

struct DetectionReport {
    std::vector<GroupResult> groups;
    double auroc_mean = 0.0, auroc_std = 0.0;
    double aupr_mean = 0.0, aupr_std = 0.0;
    double fpr95_mean = 0.0, fpr95_std = 0.0;
    DetectionConfig config;
    /// Per-combo KL vectors, kept so the summary metrics can be re-derived.
    std::vector<LabeledScores> per_trial_kl;
};

/// Full grouped evaluation: fit the ID KDE on id_scores, then for each
/// (draw, trial) combination partition both test pools into groups, score
/// each group by KL against the ID model, and aggregate AUROC / AUPR /
/// FPR@95TPR (OOD groups positive) as mean and stddev across combinations.
DetectionReport run_detection(const std::vector<double>& id_scores,
                              const std::vector<double>& test_scores_id,
                              const std::vector<double>& test_scores_ood,
                              const DetectionConfig& cfg);

}  // namespace ood
