#include "gazealign/stats.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <numeric>

#include "gazealign/error.hpp"
#include "gazealign/parallel.hpp"
#include "gazealign/random.hpp"

namespace gazealign {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double normal_quantile(double p) {
    p = std::clamp(p, 1e-300, 1.0 - 1e-16);
    return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

double permutation_p_value(double observed, std::span<const double> nulls) {
    const auto n_ge = std::count_if(nulls.begin(), nulls.end(), [&](double v) { return v >= observed; });
    return static_cast<double>(n_ge + 1) / static_cast<double>(nulls.size() + 1);
}

Eigen::VectorXd permute_target(const Eigen::VectorXd& target, std::span<const QuestionBlock> blocks,
                               std::uint64_t seed, std::size_t iteration, ShuffleScope scope) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(iteration)));
    Eigen::VectorXd out = target;
    if (scope == ShuffleScope::WithinPassage) {
        for (const auto& b : blocks) {
            shuffle(std::span<double>(out.data() + b.offset, static_cast<std::size_t>(b.count)), rng);
        }
        return out;
    }
    shuffle(std::span<double>(out.data(), static_cast<std::size_t>(out.size())), rng);
    return znorm_per_block(blocks, out);
}

PermutationResult permutation_test(const CrossValidator& cv, const Eigen::VectorXd& target, std::uint64_t seed,
                                   int n_perm, ShuffleScope scope) {
    if (n_perm < 1) {
        throw InputError("permutation count must be positive");
    }
    PermutationResult result;
    result.seed = seed;
    result.non_default = n_perm != kDefaultPermutations;
    result.observed_accuracy = cv.evaluate(target).accuracy;
    result.null_accuracies.assign(static_cast<std::size_t>(n_perm), 0.0);
    parallel_for(result.null_accuracies.size(), [&](std::size_t i) {
        result.null_accuracies[i] = cv.evaluate(permute_target(target, cv.questions(), seed, i, scope)).accuracy;
    });
    result.p_value = permutation_p_value(result.observed_accuracy, result.null_accuracies);
    return result;
}

PermutationResult permutation_test(const DesignMatrix& design, int k, std::uint64_t seed, int n_perm, PoolMode mode,
                                   ShuffleScope scope) {
    const CrossValidator cv(design, k, seed, mode);
    auto result = permutation_test(cv, design.target, derive_seed(seed, "permutation"), n_perm, scope);
    result.seed = seed;
    return result;
}

double bootstrap_p_value(double observed_a, double observed_b, std::span<const double> resampled) {
    std::ptrdiff_t beyond = 0;
    if (observed_a >= observed_b) {
        beyond = std::count_if(resampled.begin(), resampled.end(), [&](double v) { return v >= observed_a; });
    } else {
        beyond = std::count_if(resampled.begin(), resampled.end(), [&](double v) { return v <= observed_a; });
    }
    const double p = 2.0 * static_cast<double>(beyond + 1) / static_cast<double>(resampled.size() + 1);
    return std::min(1.0, p);
}

Interval bca_interval(double estimate, std::span<const double> replicates, std::span<const double> jackknife,
                      double confidence) {
    if (replicates.empty()) {
        throw AnalysisError("bca_interval: no bootstrap replicates");
    }
    std::vector<double> sorted(replicates.begin(), replicates.end());
    std::sort(sorted.begin(), sorted.end());
    const auto n = static_cast<double>(sorted.size());

    const auto below = std::count_if(sorted.begin(), sorted.end(), [&](double v) { return v < estimate; });
    const auto ties = std::count_if(sorted.begin(), sorted.end(), [&](double v) { return v == estimate; });
    const double frac = std::clamp((static_cast<double>(below) + 0.5 * static_cast<double>(ties)) / n, 0.5 / n, 1.0 - 0.5 / n);
    const double z0 = normal_quantile(frac);

    double accel = 0.0;
    if (jackknife.size() >= 2) {
        const double mean = std::accumulate(jackknife.begin(), jackknife.end(), 0.0) / static_cast<double>(jackknife.size());
        double num = 0.0;
        double den = 0.0;
        for (const double t : jackknife) {
            const double d = mean - t;
            num += d * d * d;
            den += d * d;
        }
        if (den > 0.0) {
            accel = num / (6.0 * std::pow(den, 1.5));
        }
    }
    const auto adjusted = [&](double alpha) {
        const double z = normal_quantile(alpha);
        return normal_cdf(z0 + (z0 + z) / (1.0 - accel * (z0 + z)));
    };
    const auto quantile = [&](double q) {
        const double pos = std::clamp(q, 0.0, 1.0) * (n - 1.0);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const auto hi = std::min(lo + 1, sorted.size() - 1);
        return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
    };
    const double tail = (1.0 - confidence) / 2.0;
    return {quantile(adjusted(tail)), quantile(adjusted(1.0 - tail))};
}

BootstrapResult bootstrap_compare(double observed_a, std::size_t n_questions_b, const GroupStatistic& statistic_b,
                                  int n, std::uint64_t seed) {
    if (n_questions_b == 0) {
        throw AnalysisError("bootstrap_compare: group B is empty");
    }
    if (n < 1) {
        throw InputError("bootstrap count must be positive");
    }
    BootstrapResult result;
    result.seed = seed;
    result.observed_a = observed_a;
    std::vector<std::size_t> identity(n_questions_b);
    std::iota(identity.begin(), identity.end(), std::size_t{0});
    result.observed_b = statistic_b(identity);
    result.observed_difference = observed_a - result.observed_b;

    result.resampled_statistics.assign(static_cast<std::size_t>(n), 0.0);
    parallel_for(result.resampled_statistics.size(), [&](std::size_t i) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
        std::vector<std::size_t> sample(n_questions_b);
        for (auto& s : sample) {
            s = static_cast<std::size_t>(uniform_below(rng, n_questions_b));
        }
        result.resampled_statistics[i] = statistic_b(sample);
    });
    result.p_value = bootstrap_p_value(observed_a, result.observed_b, result.resampled_statistics);

    std::vector<double> jackknife;
    if (n_questions_b >= 2) {
        jackknife.resize(n_questions_b);
        parallel_for(n_questions_b, [&](std::size_t i) {
            std::vector<std::size_t> leave_one_out;
            leave_one_out.reserve(n_questions_b - 1);
            for (std::size_t j = 0; j < n_questions_b; ++j) {
                if (j != i) {
                    leave_one_out.push_back(j);
                }
            }
            jackknife[i] = statistic_b(leave_one_out);
        });
    }
    const Interval ci = bca_interval(result.observed_b, result.resampled_statistics, jackknife);
    result.bca_low = ci.low;
    result.bca_high = ci.high;
    return result;
}

BootstrapResult bootstrap_compare(std::span<const double> values_a, std::span<const double> values_b, int n,
                                  std::uint64_t seed) {
    if (values_a.empty() || values_b.empty()) {
        throw AnalysisError("bootstrap_compare: empty group");
    }
    const double mean_a = std::accumulate(values_a.begin(), values_a.end(), 0.0) / static_cast<double>(values_a.size());
    const auto mean_b = [&](std::span<const std::size_t> idx) {
        double s = 0.0;
        for (const auto i : idx) {
            s += values_b[i];
        }
        return s / static_cast<double>(idx.size());
    };
    return bootstrap_compare(mean_a, values_b.size(), mean_b, n, seed);
}

std::vector<double> fdr_correct(std::span<const double> p_values) {
    for (const double p : p_values) {
        if (!(p > 0.0 && p <= 1.0)) {
            throw AnalysisError("fdr_correct: p-value outside (0, 1]");
        }
    }
    const std::size_t m = p_values.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });
    std::vector<double> adjusted(m, 1.0);
    double running = 1.0;
    for (std::size_t r = m; r-- > 0;) {
        const std::size_t i = order[r];
        running = std::min(running, static_cast<double>(m) / static_cast<double>(r + 1) * p_values[i]);
        adjusted[i] = std::min(1.0, running);
    }
    return adjusted;
}

}  // namespace gazealign
