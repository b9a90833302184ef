#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gazealign/corpus_layout.hpp"

namespace gazealign {

struct FixationRecord {
    std::string participant_id;
    std::string question_id;
    int pass_index = 1;  ///< 1 = first pass; 2 = second pass (rereading)
    double x_px = 0.0;
    double y_px = 0.0;
    double duration_ms = 0.0;
    bool answered_correctly = false;
};

/// Delimited (comma or tab) file with a header naming the columns
/// participant, question, pass, x, y, duration_ms, correct (any order).
/// Rows with non-positive durations or a pass outside {1, 2} are rejected
/// with their 1-based line number.
std::vector<FixationRecord> load_fixations(const std::filesystem::path& path);

/// Writes fixations in the format load_fixations reads.
std::string format_fixations(std::span<const FixationRecord> fixations);

struct ParticipantWordTimes {
    std::string participant_id;
    bool answered_correctly = false;
    std::vector<double> total_ms;  ///< aligned with the WordBox list
};

struct WordTimes {
    std::string question_id;
    std::vector<ParticipantWordTimes> participants;  ///< sorted by participant id
    std::size_t dropped_fixations = 0;               ///< fixations inside no box
    double assigned_ms = 0.0;
};

/// Sums each fixation's duration into the single word whose box contains it
/// (half-open in x and y). Participants are ordered by id so the result does
/// not depend on input order. A participant counts as correct only if every
/// one of their rows says so.
WordTimes fixation_word_times(std::span<const FixationRecord> fixations, std::span<const WordBox> boxes);

struct AttentionDensityVector {
    std::string question_id;
    std::vector<double> values;  ///< ms per px^2, aligned with the WordBox list
    std::size_t n_correct_participants = 0;  ///< participants averaged over
};

/// Mean over included participants of per-word total time, divided by the word's area.
/// With correctness_filter, only participants who answered correctly are included.
/// Throws AnalysisError if no participant is included.
AttentionDensityVector attention_density(const WordTimes& times, std::span<const WordBox> boxes,
                                         bool correctness_filter = true);

/// Population z-score; a constant vector maps to all zeros.
/// Throws AnalysisError when fewer than two values are given.
std::vector<double> znorm(std::span<const double> values);

}  // namespace gazealign
