#pragma once

#include <vector>

namespace ood {

/// Detection scores split by ground truth. Convention throughout: higher
/// score = more OOD; OOD is the positive class.
struct LabeledScores {
    std::vector<double> pos;  // OOD
    std::vector<double> neg;  // ID
};

/// Mann-Whitney AUROC with tie-averaged ranks; ties count 0.5.
double auroc(const LabeledScores& ls);

/// Non-interpolated average precision, descending-score sweep with tie
/// blocks processed atomically.
double aupr(const LabeledScores& ls);

/// FPR at the largest threshold (classify positive when score >= threshold)
/// reaching TPR >= tpr_target.
double fpr_at_tpr(const LabeledScores& ls, double tpr_target = 0.95);

}  // namespace ood
