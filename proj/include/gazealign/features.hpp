#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "gazealign/corpus_layout.hpp"

namespace gazealign {

enum class Normalization { Raw, ZPerPassage };

struct FeatureMatrix {
    std::string question_id;
    std::vector<std::string> feature_names;
    Eigen::MatrixXd values;  ///< n_words x n_features
    Normalization normalization = Normalization::Raw;

    Eigen::Index n_words() const { return values.rows(); }
    Eigen::Index n_features() const { return values.cols(); }
};

/// Column-wise population z-score within the passage (constant columns become zero).
FeatureMatrix znorm_columns(const FeatureMatrix& raw);

/// Places matrices side by side; all must describe the same question and word count.
FeatureMatrix hconcat(std::span<const FeatureMatrix> parts);

/// Word frequencies, occurrences per million, keyed by lowercase word.
class FrequencyTable {
public:
    FrequencyTable() = default;
    explicit FrequencyTable(std::unordered_map<std::string, double> per_million);

    /// Two-column delimited text {word, per_million}; an optional non-numeric header row is skipped.
    static FrequencyTable load(const std::filesystem::path& path);

    /// 0 for out-of-vocabulary words. The word is normalized with lookup_key first.
    double per_million(std::string_view word) const;
    std::size_t size() const { return table_.size(); }

    /// Lowercases ASCII letters and strips leading/trailing characters that are
    /// neither letters nor digits ("Hello," -> "hello", "don't" stays).
    static std::string lookup_key(std::string_view word);

private:
    std::unordered_map<std::string, double> table_;
};

inline const std::vector<std::string> kTextualFeatureNames = {"word_length", "log_frequency", "word_in_sentence",
                                                              "word_in_passage", "sentence_number"};
inline const std::vector<std::string> kLayoutFeatureNames = {"left_x", "word_in_paragraph", "row_in_paragraph",
                                                             "row_in_passage"};

/// Letter count, ln(per_million + 1), position in sentence, position in passage, sentence number.
FeatureMatrix textual_features(const std::string& question_id, std::span<const WordBox> boxes,
                               const FrequencyTable& freq);

/// Leftmost pixel, position in paragraph, row in paragraph, row in passage.
FeatureMatrix layout_features(const std::string& question_id, std::span<const WordBox> boxes);

/// Per-word task relevance: fraction of annotators marking the word.
struct RelevanceVector {
    std::string question_id;
    std::vector<double> values;
};

/// JSON lines, one object per question, either
///   {"question_id": ..., "relevance": [f, ...]}          values in [0, 1], or
///   {"question_id": ..., "marks": [k, ...], "n_annotators": n}   converted to k / n.
std::map<std::string, RelevanceVector> load_relevance(const std::filesystem::path& path);

/// Same as load_relevance, additionally checking each vector's length against
/// the laid-out word count of its question. Throws InputError naming the question.
std::map<std::string, RelevanceVector> load_relevance(const std::filesystem::path& path,
                                                      const std::map<std::string, std::size_t>& word_counts);

FeatureMatrix relevance_features(const RelevanceVector& relevance);

}  // namespace gazealign
