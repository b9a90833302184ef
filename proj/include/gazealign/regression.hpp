#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gazealign/features.hpp"

namespace gazealign {

/// Rows [offset, offset + count) of a stacked design belong to one question.
struct QuestionBlock {
    std::string question_id;
    Eigen::Index offset = 0;
    Eigen::Index count = 0;
};

/// Words of several questions stacked; every column and the target are
/// z-scored within each passage.
struct DesignMatrix {
    std::vector<std::string> feature_names;
    Eigen::MatrixXd features;
    Eigen::VectorXd target;
    std::vector<QuestionBlock> questions;

    Eigen::Index n_rows() const { return features.rows(); }
    Eigen::Index n_features() const { return features.cols(); }

    /// Stacks per-question features and raw targets, z-scoring both per passage.
    /// Throws AnalysisError on misaligned inputs or non-finite values.
    static DesignMatrix build(std::span<const FeatureMatrix> features, std::span<const std::vector<double>> targets);

    /// Copy with a new target, z-scored per passage.
    DesignMatrix with_target(const Eigen::VectorXd& raw_target) const;

    /// Copy restricted to the given question indices (in the given order).
    DesignMatrix select_questions(std::span<const std::size_t> question_indices) const;
};

/// Population z-score of `values` within each block.
Eigen::VectorXd znorm_per_block(std::span<const QuestionBlock> blocks, const Eigen::VectorXd& values);

struct OlsFit {
    Eigen::VectorXd coefficients;
    double intercept = 0.0;
    Eigen::Index rank = 0;

    Eigen::VectorXd predict(const Eigen::MatrixXd& features) const;
};

/// Least squares with intercept via complete orthogonal decomposition of the
/// centered features; rank-deficient problems get the minimum-norm coefficients.
/// Throws AnalysisError("underdetermined") unless rows > features + 1.
OlsFit ols_fit(const Eigen::MatrixXd& features, const Eigen::VectorXd& target);

/// Pearson correlation; 0 when either side is constant.
double pearson(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b);

/// Question-level partition into k folds: indices are shuffled with `seed`
/// and dealt round-robin, so fold sizes differ by at most one.
std::vector<std::vector<std::size_t>> fold_split(std::size_t n_questions, int k, std::uint64_t seed);

/// Same, returning question ids; ids are sorted first so the split does not depend on input order.
std::vector<std::vector<std::string>> fold_split(std::span<const std::string> question_ids, int k, std::uint64_t seed);

/// How held-out predictions are turned into an accuracy.
enum class PoolMode {
    PerFold,      ///< correlation over each fold's held-out words, averaged over folds
    PerQuestion,  ///< correlation within each held-out question, averaged over questions
    Pooled,       ///< one correlation over all out-of-fold predictions
};

std::string_view to_string(PoolMode mode);
PoolMode parse_pool_mode(std::string_view name);

struct CvResult {
    std::vector<double> fold_accuracies;
    double accuracy = 0.0;
    Eigen::VectorXd predictions;  ///< out-of-fold prediction for every row
};

/// k-fold cross-validation with the training factorizations computed once, so
/// many targets (permutations, attention heads) can be evaluated against the
/// same features cheaply.
class CrossValidator {
public:
    CrossValidator(const DesignMatrix& design, int k, std::uint64_t seed, PoolMode mode = PoolMode::PerFold);

    /// `target` must already be z-scored per passage and aligned with the design rows.
    CvResult evaluate(const Eigen::VectorXd& target) const;

    int k() const { return static_cast<int>(folds_.size()); }
    std::span<const QuestionBlock> questions() const { return questions_; }

private:
    struct Fold {
        std::vector<Eigen::Index> train_rows;
        std::vector<Eigen::Index> test_rows;
        std::vector<std::size_t> test_questions;
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> solver;
        Eigen::RowVectorXd feature_means;
        Eigen::MatrixXd test_features;
    };

    std::vector<Fold> folds_;
    std::vector<QuestionBlock> questions_;
    PoolMode mode_;
};

struct RegressionReport {
    std::string feature_set;
    std::string question_type;
    std::vector<double> fold_accuracies;
    double accuracy = 0.0;
    Eigen::VectorXd coefficients;  ///< full-sample fit
    double intercept = 0.0;
    std::uint64_t seed = 0;
    PoolMode pool_mode = PoolMode::PerFold;
    std::size_t n_questions = 0;
    std::size_t n_words = 0;
    Eigen::VectorXd predictions;  ///< out-of-fold, aligned with design rows
};

RegressionReport cv_accuracy(const DesignMatrix& design, int k, std::uint64_t seed,
                             PoolMode mode = PoolMode::PerFold);

/// target - full-sample OLS prediction from the design's features (not re-z-scored).
Eigen::VectorXd residualize(const DesignMatrix& design);

}  // namespace gazealign
