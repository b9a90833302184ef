#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gazealign/attention_store.hpp"
#include "gazealign/features.hpp"
#include "gazealign/regression.hpp"

namespace gazealign {

struct ScanOptions {
    int k = 5;
    std::uint64_t seed = 0;
    PoolMode pool = PoolMode::PerFold;
};

struct HeadSensitivity {
    std::string model;
    std::int64_t checkpoint_step = 0;
    int layer = 1;  ///< 1-based
    int head = 1;   ///< 1-based
    double textual_accuracy = 0.0;
    double relevance_accuracy = 0.0;
};

struct LayerSensitivity {
    int layer = 1;
    double textual_accuracy = 0.0;    ///< mean over the layer's heads
    double relevance_accuracy = 0.0;
};

/// Per-question inputs shared by every checkpoint, in one fixed question order.
struct ScanInputs {
    std::vector<FeatureMatrix> textual;
    std::vector<RelevanceVector> relevance;
    /// Raw human attention density per question; enables the human-similarity regression.
    std::optional<std::vector<std::vector<double>>> human_density;
};

/// For every (layer, head): z-scored head weights regressed on textual
/// features and, separately, on task relevance, both cross-validated.
/// `attention` must follow the question order of `inputs`. Result is ordered
/// by (layer, head) regardless of input enumeration.
std::vector<HeadSensitivity> head_sensitivity_scan(std::span<const WordAttentionMatrix> attention,
                                                   const ScanInputs& inputs, const ScanOptions& options);

std::vector<LayerSensitivity> layer_means(std::span<const HeadSensitivity> heads);

/// Per-question design whose columns are the n_layers*n_heads word weights, named "L<l>H<h>".
FeatureMatrix attention_features(const WordAttentionMatrix& attention);

/// Cross-validated prediction of human density from all heads' weights.
/// Throws AnalysisError (underdetermined) when folds have too few words.
RegressionReport human_similarity(std::span<const WordAttentionMatrix> attention,
                                  std::span<const std::vector<double>> human_density, const ScanOptions& options);

struct TaskAccuracy {
    double accuracy = 0.0;
    std::size_t n_questions = 0;
    std::size_t ties = 0;  ///< questions whose top score is shared; resolved toward the lowest index
};

/// Index of the highest option score, lowest index on ties.
int predicted_option(const std::array<double, 4>& scores, bool* tied = nullptr);

TaskAccuracy task_accuracy(std::span<const std::array<double, 4>> option_scores, std::span<const int> correct_index);

/// Everything measured at one checkpoint of one model.
struct CheckpointInput {
    std::string model;
    std::int64_t checkpoint_step = 0;
    std::vector<WordAttentionMatrix> attention;        ///< aligned with ScanInputs question order
    std::vector<std::array<double, 4>> option_scores;  ///< same order
    std::vector<int> correct_index;                    ///< same order
};

struct TrajectoryPoint {
    std::string model;
    std::int64_t checkpoint_step = 0;
    std::vector<HeadSensitivity> heads;
    std::vector<LayerSensitivity> layers;
    std::optional<double> human_similarity_accuracy;
    TaskAccuracy task;
};

/// Analyzes each checkpoint and returns points in ascending step order.
/// Throws InputError on duplicate steps or mixed models.
std::vector<TrajectoryPoint> trajectory(std::span<const CheckpointInput> checkpoints, const ScanInputs& inputs,
                                        const ScanOptions& options);

struct TrendSummary {
    /// Set when there are at least two points.
    std::optional<bool> last_layer_relevance_monotone;
    std::optional<double> last_layer_relevance_change;  ///< last point minus first point
    /// Set when step 0 and a later step exist: latest step's last-layer relevance
    /// accuracy exceeds the pre-trained one.
    std::optional<bool> finetuned_exceeds_pretrained;
};

TrendSummary summarize_trend(std::span<const TrajectoryPoint> points);

}  // namespace gazealign
