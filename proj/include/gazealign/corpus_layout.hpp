#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gazealign {

enum class QuestionType { Cause, Fact, Inference, Theme, Title, Purpose };

/// Local questions target specific details; global ones the passage as a whole.
enum class Scope { Local, Global };

Scope scope_of(QuestionType type);
std::string_view to_string(QuestionType type);
std::string_view to_string(Scope scope);
std::optional<QuestionType> parse_question_type(std::string_view name);
std::optional<Scope> parse_scope(std::string_view name);

struct QuestionRecord {
    std::string id;
    QuestionType type = QuestionType::Fact;
    std::string passage;
    std::string question;
    std::array<std::string, 4> options;
    int correct_index = 0;

    Scope scope() const { return scope_of(type); }
};

/// Passages in the reference corpus hold 117 to 456 words; outside that range
/// load_corpus warns but keeps the record.
inline constexpr std::size_t kMinPassageWords = 117;
inline constexpr std::size_t kMaxPassageWords = 456;

struct CorpusLoadResult {
    std::vector<QuestionRecord> records;
    std::vector<std::string> warnings;
};

/// Parses one JSON object {id, type, passage, question, options[4], correct}.
/// Throws InputError naming the id and offending field.
QuestionRecord parse_question_record(std::string_view json_line);

/// JSON-lines corpus; blank lines are skipped, order is preserved.
CorpusLoadResult load_corpus(const std::filesystem::path& path);

/// Serializes a record back to a single JSON line (no trailing newline).
std::string to_json_line(const QuestionRecord& record);

/// Half-open span of Unicode code points into the passage text.
struct CharSpan {
    std::size_t start = 0;
    std::size_t end = 0;

    std::size_t length() const { return end - start; }
    bool contains(const CharSpan& other) const { return start <= other.start && other.end <= end; }
    bool overlaps(const CharSpan& other) const { return start < other.end && other.start < end; }
    friend bool operator==(const CharSpan&, const CharSpan&) = default;
};

struct Token {
    std::string text;  ///< UTF-8
    CharSpan span;
    std::size_t sentence_index = 1;   ///< 1-based
    std::size_t paragraph_index = 1;  ///< 1-based; a newline in the preceding whitespace starts a paragraph
};

/// Whitespace tokenization with punctuation kept attached. A sentence ends at a
/// word whose last character (ignoring closing quotes/brackets) is '.', '!' or
/// '?' when the next word starts with an uppercase letter (ignoring opening
/// quotes/brackets), or at end of text.
std::vector<Token> tokenize_passage(std::string_view passage);

struct LayoutConfig {
    int glyph_width_px = 14;
    int glyph_height_px = 27;
    int max_chars_per_line = 120;
    int line_pitch_px = 54;
    int paragraph_indent_chars = 4;
    int origin_x_px = 0;
    int origin_y_px = 0;

    /// Throws InputError when a field is non-positive or pitch < glyph height.
    void validate() const;
    friend bool operator==(const LayoutConfig&, const LayoutConfig&) = default;
};

/// Reads a JSON object; missing keys keep their defaults.
LayoutConfig load_layout_config(const std::filesystem::path& path);
std::string to_json(const LayoutConfig& cfg);

struct BoundingBox {
    int x = 0;
    int y = 0;
    int width = 0;
    int height = 0;

    bool contains(double px, double py) const {
        return px >= x && px < x + width && py >= y && py < y + height;
    }
    friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

struct WordBox {
    std::string word;
    CharSpan char_span;
    BoundingBox bbox;
    std::size_t word_index_in_passage = 0;
    std::size_t word_index_in_sentence = 0;
    std::size_t sentence_index = 0;
    std::size_t paragraph_index = 0;
    std::size_t word_index_in_paragraph = 0;
    std::size_t row_in_paragraph = 0;
    std::size_t row_in_passage = 0;

    long long area_px2() const { return static_cast<long long>(bbox.width) * bbox.height; }
    friend bool operator==(const WordBox&, const WordBox&) = default;
};

/// Greedy monospace word wrap. Throws InputError if a word cannot fit on a line.
std::vector<WordBox> layout_passage(const QuestionRecord& record, const LayoutConfig& cfg);
std::vector<WordBox> layout_passage(std::string_view passage, const LayoutConfig& cfg);

/// Number of Unicode code points in a UTF-8 string.
std::size_t codepoint_count(std::string_view utf8);

/// Letters only: ASCII letters plus non-ASCII letters outside the common
/// punctuation blocks.
std::size_t letter_count(std::string_view utf8);

}  // namespace gazealign
