#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "gazealign/error.hpp"
#include "gazealign/random.hpp"
#include "gazealign/stats.hpp"

using namespace gazealign;

namespace {

/// Benjamini-Hochberg straight from its definition: q_i = min over p_j >= p_i of m / rank_j * p_j,
/// with rank_j = #{k : p_k <= p_j}.
std::vector<double> bh_reference(const std::vector<double>& p) {
    const double m = static_cast<double>(p.size());
    std::vector<double> q(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        double best = 1.0;
        for (std::size_t j = 0; j < p.size(); ++j) {
            if (p[j] >= p[i]) {
                const auto rank = std::count_if(p.begin(), p.end(), [&](double v) { return v <= p[j]; });
                best = std::min(best, m / static_cast<double>(rank) * p[j]);
            }
        }
        q[i] = best;
    }
    return q;
}

DesignMatrix random_design(Rng& rng, std::size_t n_questions, Eigen::Index n_words, Eigen::Index n_features,
                           double signal) {
    std::vector<FeatureMatrix> features;
    std::vector<std::vector<double>> targets;
    for (std::size_t q = 0; q < n_questions; ++q) {
        FeatureMatrix f;
        f.question_id = "q" + std::to_string(100 + q);
        for (Eigen::Index j = 0; j < n_features; ++j) {
            f.feature_names.push_back("f" + std::to_string(j));
        }
        f.values.resize(n_words, n_features);
        for (Eigen::Index i = 0; i < f.values.size(); ++i) {
            f.values.data()[i] = standard_normal(rng);
        }
        std::vector<double> y;
        for (Eigen::Index w = 0; w < n_words; ++w) {
            y.push_back(signal * f.values(w, 0) + standard_normal(rng));
        }
        features.push_back(std::move(f));
        targets.push_back(std::move(y));
    }
    return DesignMatrix::build(features, targets);
}

}  // namespace

TEST_CASE("permutation p-value formula") {
    const std::vector<double> nulls(500, 0.1);
    CHECK(permutation_p_value(0.5, nulls) == 1.0 / 501.0);
    CHECK(permutation_p_value(-0.5, nulls) == 1.0);
    CHECK(permutation_p_value(0.1, nulls) == 1.0);  // ties count against significance
    std::vector<double> ramp(500);
    std::iota(ramp.begin(), ramp.end(), 0.0);
    CHECK(permutation_p_value(449.5, ramp) == 51.0 / 501.0);
}

TEST_CASE("within-passage shuffles keep each passage's values") {
    Rng rng(1);
    const auto d = random_design(rng, 4, 15, 2, 0.0);
    const auto a = permute_target(d.target, d.questions, 7, 3, ShuffleScope::WithinPassage);
    CHECK(a == permute_target(d.target, d.questions, 7, 3, ShuffleScope::WithinPassage));
    CHECK(a != permute_target(d.target, d.questions, 7, 4, ShuffleScope::WithinPassage));
    for (const auto& q : d.questions) {
        std::vector<double> before(d.target.data() + q.offset, d.target.data() + q.offset + q.count);
        std::vector<double> after(a.data() + q.offset, a.data() + q.offset + q.count);
        std::sort(before.begin(), before.end());
        std::sort(after.begin(), after.end());
        CHECK(before == after);
    }
    const auto across = permute_target(d.target, d.questions, 7, 3, ShuffleScope::AcrossPassages);
    for (const auto& q : d.questions) {
        const auto y = across.segment(q.offset, q.count);
        CHECK(std::abs(y.mean()) < 1e-12);
        CHECK(std::sqrt(y.squaredNorm() / q.count) == doctest::Approx(1.0));
    }
}

TEST_CASE("permutation test") {
    Rng rng(9);
    SUBCASE("a strong signal reaches the floor") {
        const auto d = random_design(rng, 20, 40, 3, 1.0);
        const auto r = permutation_test(d, 5, 3, 500);
        CHECK(r.null_accuracies.size() == 500);
        CHECK(r.p_value == 1.0 / 501.0);
        CHECK_FALSE(r.non_default);
        CHECK(r.observed_accuracy > 0.5);
    }
    SUBCASE("seed changes the nulls but not the observed value") {
        const auto d = random_design(rng, 15, 30, 2, 0.2);
        const CrossValidator cv(d, 5, 1);
        const auto a = permutation_test(cv, d.target, 1, 60);
        const auto b = permutation_test(cv, d.target, 2, 60);
        CHECK(a.non_default);
        CHECK(a.observed_accuracy == b.observed_accuracy);
        CHECK(a.null_accuracies != b.null_accuracies);
        CHECK(permutation_test(cv, d.target, 1, 60).null_accuracies == a.null_accuracies);
    }
    SUBCASE("rough calibration under the null") {
        int below = 0;
        for (int run = 0; run < 100; ++run) {
            const auto d = random_design(rng, 10, 20, 2, 0.0);
            const CrossValidator cv(d, 5, static_cast<std::uint64_t>(run));
            below += permutation_test(cv, d.target, static_cast<std::uint64_t>(run), 99).p_value <= 0.2 ? 1 : 0;
        }
        CHECK(below >= 8);  // expected 20; binomial sd 4
        CHECK(below <= 32);
    }
}

TEST_CASE("bootstrap comparison") {
    SUBCASE("p-value formula") {
        std::vector<double> resampled(5000, 0.0);
        CHECK(bootstrap_p_value(1.0, 0.0, resampled) == 2.0 / 5001.0);
        CHECK(bootstrap_p_value(-1.0, 0.0, resampled) == 2.0 / 5001.0);
        resampled[0] = 2.0;
        resampled[1] = 1.0;  // ties count
        CHECK(bootstrap_p_value(1.0, 0.0, resampled) == 6.0 / 5001.0);
        CHECK(bootstrap_p_value(0.0, 0.0, resampled) == 1.0);
    }
    SUBCASE("separated groups") {
        Rng rng(4);
        std::vector<double> a(100), b(100);
        for (std::size_t i = 0; i < 100; ++i) {
            a[i] = 3.0 + standard_normal(rng);
            b[i] = standard_normal(rng);
        }
        const auto r = bootstrap_compare(a, b, 5000, 11);
        CHECK(r.resampled_statistics.size() == 5000);
        CHECK(r.p_value == 2.0 / 5001.0);
        CHECK(r.observed_difference == doctest::Approx(r.observed_a - r.observed_b));
        CHECK(r.bca_low < r.observed_b);
        CHECK(r.bca_high > r.observed_b);
        const auto again = bootstrap_compare(a, b, 5000, 11);
        CHECK(again.resampled_statistics == r.resampled_statistics);
    }
    SUBCASE("power: groups 3 sd apart are separated almost always") {
        int hits = 0;
        for (int sim = 0; sim < 500; ++sim) {
            Rng rng(derive_seed(8, static_cast<std::uint64_t>(sim)));
            std::vector<double> a(100), b(100);
            for (std::size_t i = 0; i < 100; ++i) {
                a[i] = 3.0 + standard_normal(rng);
                b[i] = standard_normal(rng);
            }
            hits += bootstrap_compare(a, b, 5000, static_cast<std::uint64_t>(sim)).p_value < 0.01 ? 1 : 0;
        }
        CHECK(hits >= 475);
    }
    SUBCASE("empty group") {
        const std::vector<double> none;
        const std::vector<double> one = {1.0};
        CHECK_THROWS_AS(bootstrap_compare(one, none), AnalysisError);
        CHECK_THROWS_AS(bootstrap_compare(none, one), AnalysisError);
    }
}

TEST_CASE("bca interval") {
    SUBCASE("no bias and no skew gives the percentile interval") {
        std::vector<double> reps;
        for (int i = 0; i < 20000; ++i) {
            reps.push_back(normal_quantile((i + 0.5) / 20000.0));
        }
        const std::vector<double> jack = {-1.0, 1.0, -2.0, 2.0};
        const auto ci = bca_interval(0.0, reps, jack);
        CHECK(ci.low == doctest::Approx(-1.959963984540054).epsilon(1e-3));
        CHECK(ci.high == doctest::Approx(1.959963984540054).epsilon(1e-3));
    }
    SUBCASE("the interval for a mean covers the truth about 95% of the time") {
        Rng rng(21);
        int covered = 0;
        for (int sim = 0; sim < 200; ++sim) {
            std::vector<double> b(40);
            for (auto& x : b) {
                x = std::exp(standard_normal(rng));  // skewed, mean e^0.5
            }
            const std::vector<double> a = {0.0};
            const auto r = bootstrap_compare(a, b, 1000, static_cast<std::uint64_t>(sim));
            covered += (r.bca_low <= std::exp(0.5) && std::exp(0.5) <= r.bca_high) ? 1 : 0;
        }
        CHECK(covered >= 170);
    }
}

TEST_CASE("fdr_correct") {
    for (const double q : fdr_correct(std::vector<double>{0.01, 0.02, 0.03, 0.04})) {
        CHECK(q == doctest::Approx(0.04).epsilon(1e-15));
    }
    CHECK(fdr_correct(std::vector<double>{0.3}) == std::vector<double>{0.3});
    CHECK(fdr_correct(std::vector<double>{1, 1, 1}) == std::vector<double>{1, 1, 1});
    CHECK(fdr_correct(std::vector<double>{0.04, 0.01}) == std::vector<double>{0.04, 0.02});
    CHECK_THROWS_AS(fdr_correct(std::vector<double>{0.0}), AnalysisError);
    CHECK_THROWS_AS(fdr_correct(std::vector<double>{1.5}), AnalysisError);
    CHECK(fdr_correct(std::vector<double>{}).empty());

    Rng rng(13);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> p(1 + uniform_below(rng, 40));
        for (auto& x : p) {
            x = uniform_below(rng, 4) == 0 ? 0.001 * (1 + uniform_below(rng, 5)) : 1.0 - uniform_unit(rng);
        }
        const auto q = fdr_correct(p);
        const auto ref = bh_reference(p);
        for (std::size_t i = 0; i < p.size(); ++i) {
            CHECK(q[i] == ref[i]);
            CHECK(q[i] >= p[i]);
        }
    }
}

TEST_CASE("normal distribution helpers") {
    CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-14));
    CHECK(normal_cdf(0.0) == 0.5);
    CHECK(normal_cdf(normal_quantile(0.123)) == doctest::Approx(0.123).epsilon(1e-14));
}
