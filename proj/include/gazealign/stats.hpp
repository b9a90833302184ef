#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "gazealign/regression.hpp"

namespace gazealign {

inline constexpr int kDefaultPermutations = 500;
inline constexpr int kDefaultBootstraps = 5000;

enum class ShuffleScope {
    WithinPassage,  ///< permute the target among the words of each passage
    AcrossPassages, ///< permute over all words, then re-z-score per passage
};

struct PermutationResult {
    double observed_accuracy = 0.0;
    std::vector<double> null_accuracies;
    double p_value = 1.0;  ///< (#{null >= observed} + 1) / (n_perm + 1)
    std::uint64_t seed = 0;
    bool non_default = false;  ///< n_perm differs from 500
};

/// One-sided p-value; ties count against significance.
double permutation_p_value(double observed, std::span<const double> nulls);

/// Shuffled copy of a per-passage z-scored target. Iteration seeds are derived
/// from (seed, iteration) so any execution order gives the same nulls.
Eigen::VectorXd permute_target(const Eigen::VectorXd& target, std::span<const QuestionBlock> blocks,
                               std::uint64_t seed, std::size_t iteration, ShuffleScope scope);

/// Cross-validated accuracy of the design against n_perm shuffled targets.
/// `seed` drives both the fold split and the shuffles.
PermutationResult permutation_test(const DesignMatrix& design, int k, std::uint64_t seed,
                                   int n_perm = kDefaultPermutations, PoolMode mode = PoolMode::PerFold,
                                   ShuffleScope scope = ShuffleScope::WithinPassage);

/// Same test against an already-built validator; `target` is the observed z-scored target.
PermutationResult permutation_test(const CrossValidator& cv, const Eigen::VectorXd& target, std::uint64_t seed,
                                   int n_perm = kDefaultPermutations, ShuffleScope scope = ShuffleScope::WithinPassage);

/// Statistic of group B computed over a multiset of its question indices.
using GroupStatistic = std::function<double(std::span<const std::size_t>)>;

struct BootstrapResult {
    double observed_a = 0.0;
    double observed_b = 0.0;
    double observed_difference = 0.0;  ///< a - b
    std::vector<double> resampled_statistics;  ///< statistic of B over each resample
    double p_value = 1.0;  ///< 2 (N + 1) / (n + 1), capped at 1
    std::uint64_t seed = 0;
    /// Bias-corrected and accelerated 95% interval for B's statistic.
    double bca_low = 0.0;
    double bca_high = 0.0;
};

/// Two-sided count p-value: N counts resamples at or beyond `observed_a` on the
/// side away from `observed_b`.
double bootstrap_p_value(double observed_a, double observed_b, std::span<const double> resampled);

/// Resamples B's questions with replacement n times and compares A's observed
/// statistic with the resampled distribution of B's.
BootstrapResult bootstrap_compare(double observed_a, std::size_t n_questions_b, const GroupStatistic& statistic_b,
                                  int n = kDefaultBootstraps, std::uint64_t seed = 0);

/// Per-question values, statistic = mean.
BootstrapResult bootstrap_compare(std::span<const double> values_a, std::span<const double> values_b,
                                  int n = kDefaultBootstraps, std::uint64_t seed = 0);

struct Interval {
    double low = 0.0;
    double high = 0.0;
};

/// BCa interval from bootstrap replicates and jackknife (leave-one-out) estimates.
Interval bca_interval(double estimate, std::span<const double> replicates, std::span<const double> jackknife,
                      double confidence = 0.95);

/// Benjamini-Hochberg adjusted p-values in input order.
/// Throws AnalysisError when a value lies outside (0, 1].
std::vector<double> fdr_correct(std::span<const double> p_values);

double normal_cdf(double z);
double normal_quantile(double p);

}  // namespace gazealign
