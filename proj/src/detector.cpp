#include "ood/detector.hpp"

#include "ood/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ood {

namespace {

// Type-7 (linear interpolation) quantile of a sorted vector.
double quantile_sorted(const std::vector<double>& s, double q) {
    const double pos = q * static_cast<double>(s.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(lo);
    if (lo + 1 >= s.size()) return s.back();
    return s[lo] * (1.0 - frac) + s[lo + 1] * frac;
}

double sample_std(const std::vector<double>& v, double mean) {
    if (v.size() < 2) return 0.0;
    double acc = 0.0;
    for (double x : v) acc += (x - mean) * (x - mean);
    return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

double mean_of(const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x;
    return acc / static_cast<double>(v.size());
}

}  // namespace

KdeModel fit_kde(const std::vector<double>& scores) {
    if (scores.size() < 2) throw std::invalid_argument("fit_kde needs at least 2 scores");
    const double n = static_cast<double>(scores.size());
    const double mean = mean_of(scores);
    const double sigma = sample_std(scores, mean);

    std::vector<double> sorted = scores;
    std::sort(sorted.begin(), sorted.end());
    const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
    const double range = sorted.back() - sorted.front();

    double spread = std::min(sigma, iqr / 1.34);
    double h = 0.9 * spread * std::pow(n, -0.2);
    h = std::max(h, 1e-3 * range);
    h = std::max(h, 1e-6);

    KdeModel m;
    m.points = scores;
    m.bandwidth = h;
    return m;
}

double kde_log_pdf(const KdeModel& model, double x) {
    const double h = model.bandwidth;
    const double norm = 1.0 / (static_cast<double>(model.points.size()) * h *
                               std::sqrt(2.0 * M_PI));
    double acc = 0.0;
    for (double p : model.points) {
        const double u = (x - p) / h;
        acc += std::exp(-0.5 * u * u);
    }
    return std::log(std::max(norm * acc, kDensityFloor));
}

double kl_group(const std::vector<double>& test_scores, const KdeModel& id_model) {
    KdeModel test_model = fit_kde(test_scores);
    double acc = 0.0;
    for (double s : test_scores)
        acc += kde_log_pdf(test_model, s) - kde_log_pdf(id_model, s);
    return acc / static_cast<double>(test_scores.size());
}

std::vector<std::vector<std::vector<double>>> make_groups(const std::vector<double>& scores,
                                                          int gs, std::uint64_t seed,
                                                          int trials) {
    if (gs < 2) throw std::invalid_argument("group size must be >= 2");
    if (static_cast<int>(scores.size()) < gs)
        throw std::invalid_argument("fewer scores than one group");
    std::vector<std::vector<std::vector<double>>> out;
    Rng root(seed);
    for (int t = 0; t < trials; ++t) {
        std::vector<double> shuffled = scores;
        Rng trial_rng(root.sub_seed(static_cast<std::uint64_t>(t)));
        trial_rng.shuffle(shuffled);
        const std::size_t n_groups = shuffled.size() / static_cast<std::size_t>(gs);
        std::vector<std::vector<double>> groups;
        for (std::size_t g = 0; g < n_groups; ++g)
            groups.emplace_back(shuffled.begin() + g * gs, shuffled.begin() + (g + 1) * gs);
        out.push_back(std::move(groups));
    }
    return out;
}

DetectionReport run_detection(const std::vector<double>& id_scores,
                              const std::vector<double>& test_scores_id,
                              const std::vector<double>& test_scores_ood,
                              const DetectionConfig& cfg) {
    if (id_scores.size() < 2) throw std::invalid_argument("run_detection: id pool too small");
    if (test_scores_id.empty() || test_scores_ood.empty())
        throw std::invalid_argument("run_detection: empty test pool");
    if (cfg.trials < 1 || cfg.testset_draws < 1)
        throw std::invalid_argument("run_detection: trials and draws must be >= 1");

    const KdeModel id_model = fit_kde(id_scores);
    DetectionReport report;
    report.config = cfg;

    std::vector<double> aurocs, auprs, fprs;
    Rng root(cfg.seed);
    int combo = 0;
    for (int d = 0; d < cfg.testset_draws; ++d) {
        for (int t = 0; t < cfg.trials; ++t, ++combo) {
            const std::uint64_t sub = root.sub_seed(static_cast<std::uint64_t>(combo));
            auto id_groups = make_groups(test_scores_id, cfg.group_size, sub ^ 1, 1)[0];
            auto ood_groups = make_groups(test_scores_ood, cfg.group_size, sub ^ 2, 1)[0];

            LabeledScores kl;
            int gi = 0;
            for (const auto& g : id_groups) {
                double k = kl_group(g, id_model);
                kl.neg.push_back(k);
                report.groups.push_back({combo, gi++, "id", k,
                                         cfg.threshold ? (k > *cfg.threshold ? 1 : 0) : -1});
            }
            gi = 0;
            for (const auto& g : ood_groups) {
                double k = kl_group(g, id_model);
                kl.pos.push_back(k);
                report.groups.push_back({combo, gi++, "ood", k,
                                         cfg.threshold ? (k > *cfg.threshold ? 1 : 0) : -1});
            }
            aurocs.push_back(auroc(kl));
            auprs.push_back(aupr(kl));
            fprs.push_back(fpr_at_tpr(kl, 0.95));
            report.per_trial_kl.push_back(std::move(kl));
        }
    }

    report.auroc_mean = mean_of(aurocs);
    report.auroc_std = sample_std(aurocs, report.auroc_mean);
    report.aupr_mean = mean_of(auprs);
    report.aupr_std = sample_std(auprs, report.aupr_mean);
    report.fpr95_mean = mean_of(fprs);
    report.fpr95_std = sample_std(fprs, report.fpr95_mean);
    return report;
}

}  // namespace ood
