#include "ood/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ood {

namespace {

void check(const LabeledScores& ls) {
    if (ls.pos.empty() || ls.neg.empty())
        throw std::invalid_argument("metrics require non-empty positive and negative sets");
    for (double v : ls.pos)
        if (!std::isfinite(v)) throw std::invalid_argument("non-finite positive score");
    for (double v : ls.neg)
        if (!std::isfinite(v)) throw std::invalid_argument("non-finite negative score");
}

}  // namespace

double auroc(const LabeledScores& ls) {
    check(ls);
    const std::size_t np = ls.pos.size(), nn = ls.neg.size();
    std::vector<std::pair<double, int>> all;  // (score, is_pos)
    all.reserve(np + nn);
    for (double v : ls.pos) all.emplace_back(v, 1);
    for (double v : ls.neg) all.emplace_back(v, 0);
    std::sort(all.begin(), all.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    // Tie-averaged ranks; sum ranks of positives.
    double rank_sum = 0.0;
    std::size_t i = 0;
    while (i < all.size()) {
        std::size_t j = i;
        while (j < all.size() && all[j].first == all[i].first) ++j;
        double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t t = i; t < j; ++t)
            if (all[t].second) rank_sum += avg_rank;
        i = j;
    }
    double u = rank_sum - static_cast<double>(np) * (np + 1) / 2.0;
    return u / (static_cast<double>(np) * static_cast<double>(nn));
}

double aupr(const LabeledScores& ls) {
    check(ls);
    std::vector<std::pair<double, int>> all;
    for (double v : ls.pos) all.emplace_back(v, 1);
    for (double v : ls.neg) all.emplace_back(v, 0);
    std::sort(all.begin(), all.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });

    const double np = static_cast<double>(ls.pos.size());
    double tp = 0.0, fp = 0.0, prev_recall = 0.0, ap = 0.0;
    std::size_t i = 0;
    while (i < all.size()) {
        std::size_t j = i;
        while (j < all.size() && all[j].first == all[i].first) ++j;
        for (std::size_t t = i; t < j; ++t) (all[t].second ? tp : fp) += 1.0;
        double recall = tp / np;
        double precision = tp / (tp + fp);
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j;
    }
    return ap;
}

double fpr_at_tpr(const LabeledScores& ls, double tpr_target) {
    check(ls);
    if (tpr_target <= 0.0 || tpr_target > 1.0)
        throw std::invalid_argument("tpr_target must be in (0, 1]");
    std::vector<double> pos = ls.pos;
    std::sort(pos.begin(), pos.end(), std::greater<>());
    const double np = static_cast<double>(pos.size());
    // Candidate thresholds descend through the positive scores; stop at the
    // first (largest) one reaching the target TPR.
    double tau = pos.back();
    for (std::size_t i = 0; i < pos.size(); ++i) {
        double tpr_here = 0.0;
        for (double v : ls.pos) tpr_here += (v >= pos[i]) ? 1.0 : 0.0;
        if (tpr_here / np >= tpr_target) {
            tau = pos[i];
            break;
        }
    }
    double fp = 0.0;
    for (double v : ls.neg) fp += (v >= tau) ? 1.0 : 0.0;
    return fp / static_cast<double>(ls.neg.size());
}

}  // namespace ood
