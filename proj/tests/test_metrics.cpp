#include "ood/metrics.hpp"

#include "ood/rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

using namespace ood;

namespace {

// O(n^2) Mann-Whitney pair counting.
double auroc_oracle(const LabeledScores& ls) {
    double acc = 0.0;
    for (double p : ls.pos)
        for (double n : ls.neg) {
            if (p > n)
                acc += 1.0;
            else if (p == n)
                acc += 0.5;
        }
    return acc / (static_cast<double>(ls.pos.size()) * static_cast<double>(ls.neg.size()));
}

// Exhaustive threshold-sweep average precision: walk distinct score values in
// descending order, include each tie block whole, accumulate (dR * P).
double aupr_oracle(const LabeledScores& ls) {
    std::set<double, std::greater<double>> thresholds(ls.pos.begin(), ls.pos.end());
    thresholds.insert(ls.neg.begin(), ls.neg.end());
    double ap = 0.0, prev_recall = 0.0;
    std::size_t tp = 0, fp = 0;
    for (double t : thresholds) {
        tp += static_cast<std::size_t>(std::count(ls.pos.begin(), ls.pos.end(), t));
        fp += static_cast<std::size_t>(std::count(ls.neg.begin(), ls.neg.end(), t));
        double recall = static_cast<double>(tp) / static_cast<double>(ls.pos.size());
        double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    return ap;
}

LabeledScores random_scores(Rng& rng, std::size_t np, std::size_t nn, int levels) {
    LabeledScores ls;
    for (std::size_t i = 0; i < np; ++i)
        ls.pos.push_back(static_cast<double>(rng.next_below(static_cast<std::uint64_t>(levels))));
    for (std::size_t i = 0; i < nn; ++i)
        ls.neg.push_back(static_cast<double>(rng.next_below(static_cast<std::uint64_t>(levels))));
    return ls;
}

}  // namespace

TEST_CASE("auroc on perfectly separated scores is 1") {
    CHECK(auroc({{2, 3}, {0, 1}}) == 1.0);
}

TEST_CASE("auroc on identical multisets is exactly 0.5") {
    CHECK(auroc({{1, 2, 3}, {1, 2, 3}}) == 0.5);
}

TEST_CASE("auroc hand example pos={1,3} neg={2}") {
    LabeledScores ls{{1, 3}, {2}};
    CHECK(auroc(ls) == 0.5);
    CHECK(auroc(ls) == auroc_oracle(ls));
}

TEST_CASE("auroc rejects an empty side") {
    CHECK_THROWS_AS(auroc({{}, {1.0}}), std::invalid_argument);
    CHECK_THROWS_AS(auroc({{1.0}, {}}), std::invalid_argument);
}

TEST_CASE("auroc matches pair counting on random tied inputs") {
    Rng rng(31);
    for (int trial = 0; trial < 200; ++trial) {
        std::size_t np = 1 + rng.next_below(50);
        std::size_t nn = 1 + rng.next_below(50);
        int levels = 2 + static_cast<int>(rng.next_below(20));
        LabeledScores ls = random_scores(rng, np, nn, levels);
        CHECK(auroc(ls) == auroc_oracle(ls));
    }
}

TEST_CASE("swapping pos and neg complements auroc for tie-free scores") {
    Rng rng(32);
    LabeledScores ls;
    for (int i = 0; i < 30; ++i) ls.pos.push_back(rng.uniform(-5, 5));
    for (int i = 0; i < 20; ++i) ls.neg.push_back(rng.uniform(-5, 5));
    LabeledScores swapped{ls.neg, ls.pos};
    CHECK(auroc(ls) + auroc(swapped) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("auroc is invariant under strictly increasing transforms") {
    Rng rng(33);
    LabeledScores ls = random_scores(rng, 25, 25, 40);
    auto transform = [](double v) { return std::exp(0.3 * v) + v * v * v; };
    LabeledScores t;
    for (double v : ls.pos) t.pos.push_back(transform(v));
    for (double v : ls.neg) t.neg.push_back(transform(v));
    CHECK(auroc(ls) == auroc(t));
}

TEST_CASE("aupr on perfect separation is 1") {
    CHECK(aupr({{5, 6, 7}, {1, 2, 3}}) == 1.0);
}

TEST_CASE("aupr with all scores equal is the prevalence") {
    CHECK(aupr({{1, 1}, {1, 1, 1}}) == doctest::Approx(0.4).epsilon(1e-12));
}

TEST_CASE("aupr hand example pos={3,1} neg={2} gives 5/6") {
    LabeledScores ls{{3, 1}, {2}};
    CHECK(aupr(ls) == doctest::Approx(5.0 / 6.0).epsilon(1e-12));
    CHECK(aupr(ls) == doctest::Approx(aupr_oracle(ls)).epsilon(1e-12));
}

TEST_CASE("aupr matches the threshold-sweep oracle on random inputs") {
    Rng rng(34);
    for (int trial = 0; trial < 200; ++trial) {
        std::size_t np = 1 + rng.next_below(30);
        std::size_t nn = 1 + rng.next_below(30);
        int levels = 2 + static_cast<int>(rng.next_below(12));
        LabeledScores ls = random_scores(rng, np, nn, levels);
        CHECK(aupr(ls) == doctest::Approx(aupr_oracle(ls)).epsilon(1e-12));
    }
}

TEST_CASE("aupr can dip below prevalence for adversarial rankings") {
    // Non-interpolated AP has no prevalence floor: with both positives ranked
    // below the lone negative, AP = 0.5*0.5 + 0.5*(2/3) = 7/12 < 2/3.
    CHECK(aupr({{1, 2}, {3}}) == doctest::Approx(7.0 / 12.0).epsilon(1e-12));
}

TEST_CASE("aupr rejects an empty side") {
    CHECK_THROWS_AS(aupr({{}, {1.0}}), std::invalid_argument);
    CHECK_THROWS_AS(aupr({{1.0}, {}}), std::invalid_argument);
}

TEST_CASE("fpr_at_tpr on perfect separation is 0") {
    CHECK(fpr_at_tpr({{5, 6, 7, 8}, {1, 2, 3}}) == 0.0);
}

TEST_CASE("fpr_at_tpr on identical multisets is at least the target") {
    std::vector<double> v{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    CHECK(fpr_at_tpr({v, v}, 0.95) >= 0.95);
}

TEST_CASE("fpr_at_tpr hand example: twenty positives, two negatives") {
    LabeledScores ls;
    for (int i = 1; i <= 20; ++i) ls.pos.push_back(i);
    ls.neg = {0.5, 10.5};
    // threshold 2 keeps 19/20 positives (TPR exactly 0.95) and one negative
    CHECK(fpr_at_tpr(ls, 0.95) == 0.5);
}

TEST_CASE("fpr_at_tpr validates its inputs") {
    CHECK_THROWS_AS(fpr_at_tpr({{}, {1.0}}), std::invalid_argument);
    CHECK_THROWS_AS(fpr_at_tpr({{1.0}, {}}), std::invalid_argument);
    CHECK_THROWS_AS(fpr_at_tpr({{1.0}, {1.0}}, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(fpr_at_tpr({{1.0}, {1.0}}, 1.5), std::invalid_argument);
}

TEST_CASE("fpr_at_tpr with target 1 keeps every positive") {
    LabeledScores ls{{1, 2, 3}, {2.5, 0.5}};
    // threshold must be <= 1, so the negative at 2.5 is always caught
    CHECK(fpr_at_tpr(ls, 1.0) == 0.5);
}
