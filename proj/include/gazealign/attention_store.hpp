#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gazealign/corpus_layout.hpp"

namespace gazealign {

inline constexpr int kAttentionFormatVersion = 1;
inline constexpr double kRowSumTolerance = 1e-4;
inline constexpr double kOptionScoreTolerance = 1e-6;

struct AttentionToken {
    std::string text;
    /// Code-point span into the original passage; empty for CLS/SEP/option tokens.
    std::optional<CharSpan> span;
};

/// CLS-row attention of one (question, model, checkpoint), for the correct option's input.
struct AttentionRecord {
    std::string question_id;
    std::string model_name;
    std::int64_t checkpoint_step = 0;  ///< 0 = pre-trained, no fine-tuning
    int n_layers = 12;
    int n_heads = 12;
    std::vector<AttentionToken> tokens;
    std::vector<double> weights;  ///< [layer][head][token], row-major
    std::array<double, 4> option_scores{};
    bool truncated = false;

    std::size_t n_tokens() const { return tokens.size(); }
    std::size_t n_rows() const { return static_cast<std::size_t>(n_layers) * static_cast<std::size_t>(n_heads); }

    std::span<const double> row(int layer, int head) const;  ///< 0-based layer/head
    std::span<double> row(int layer, int head);

    /// Checks sizes, non-negativity, row sums (1 +- 1e-4) and option scores (sum 1 +- 1e-6).
    /// Throws InputError naming (question, layer, head) for row violations; layer/head are 1-based in messages.
    void validate() const;
};

/// One JSON object per line; see docs/attention_format.md.
AttentionRecord parse_attention_record(std::string_view json_line);
std::string to_json_line(const AttentionRecord& record);

/// Reads a JSON-lines file (optionally gzip-compressed) and validates every record.
std::vector<AttentionRecord> load_attention(const std::filesystem::path& path);

/// A file, or a directory whose *.jsonl / *.jsonl.gz files are read in name order.
std::vector<AttentionRecord> load_attention_path(const std::filesystem::path& path);

/// Writes records as JSON lines; compresses when the path ends in ".gz".
void write_attention(const std::filesystem::path& path, std::span<const AttentionRecord> records);

/// Word-level CLS attention: rows are (layer - 1) * n_heads + (head - 1), columns are passage words.
struct WordAttentionMatrix {
    std::string question_id;
    std::string model_name;
    std::int64_t checkpoint_step = 0;
    int n_layers = 12;
    int n_heads = 12;
    Eigen::MatrixXd values;            ///< n_layers*n_heads x n_words
    Eigen::VectorXd non_passage_mass;  ///< per row: weight on CLS/SEP/question/option tokens

    Eigen::Index n_words() const { return values.cols(); }
};

/// Sums token weights into the word whose char span contains the token.
/// Tokens without a span (or with an empty one) count as non-passage mass.
/// Throws InputError when a token overlaps two words or lies in no word.
WordAttentionMatrix tokens_to_words(const AttentionRecord& record, std::span<const WordBox> boxes);

/// Mean over the heads of the last layer.
Eigen::VectorXd mean_last_layer(const WordAttentionMatrix& matrix);

}  // namespace gazealign
