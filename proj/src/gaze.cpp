#include "gazealign/gaze.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>

#include "gazealign/error.hpp"
#include "gazealign/io.hpp"

namespace gazealign {

namespace {

struct ColumnMap {
    std::size_t participant, question, pass, x, y, duration, correct;
};

std::optional<std::size_t> find_column(const std::vector<std::string_view>& header,
                                       std::initializer_list<std::string_view> names) {
    for (std::size_t i = 0; i < header.size(); ++i) {
        const auto h = io::trim(header[i]);
        for (const auto n : names) {
            if (h == n) {
                return i;
            }
        }
    }
    return std::nullopt;
}

// Rows grouped by y, each row's boxes sorted by x.
struct BoxIndex {
    struct Row {
        int y = 0;
        int height = 0;
        std::vector<std::size_t> boxes;
    };
    std::vector<Row> rows;

    explicit BoxIndex(std::span<const WordBox> boxes) {
        std::map<std::pair<int, int>, std::vector<std::size_t>> by_row;
        for (std::size_t i = 0; i < boxes.size(); ++i) {
            by_row[{boxes[i].bbox.y, boxes[i].bbox.height}].push_back(i);
        }
        for (auto& [key, idx] : by_row) {
            std::sort(idx.begin(), idx.end(),
                      [&](std::size_t a, std::size_t b) { return boxes[a].bbox.x < boxes[b].bbox.x; });
            rows.push_back({key.first, key.second, std::move(idx)});
        }
    }

    std::optional<std::size_t> locate(std::span<const WordBox> boxes, double px, double py) const {
        for (const Row& row : rows) {
            if (py < row.y || py >= row.y + row.height) {
                continue;
            }
            auto it = std::upper_bound(row.boxes.begin(), row.boxes.end(), px,
                                       [&](double v, std::size_t b) { return v < boxes[b].bbox.x; });
            if (it == row.boxes.begin()) {
                continue;
            }
            const std::size_t candidate = *std::prev(it);
            if (boxes[candidate].bbox.contains(px, py)) {
                return candidate;
            }
        }
        return std::nullopt;
    }
};

}  // namespace

std::vector<FixationRecord> load_fixations(const std::filesystem::path& path) {
    const std::string text = io::read_file(path);
    const char delim = io::sniff_delimiter(text);
    const auto lines = io::split_lines(text);

    std::size_t header_line = 0;
    while (header_line < lines.size() && io::trim(lines[header_line]).empty()) {
        ++header_line;
    }
    std::vector<FixationRecord> out;
    if (header_line == lines.size()) {
        return out;
    }
    const auto header = io::split_fields(lines[header_line], delim);
    const auto need = [&](std::initializer_list<std::string_view> names) {
        const auto col = find_column(header, names);
        if (!col) {
            throw InputError(path.string() + ": missing column '" + std::string(*names.begin()) + "' in header");
        }
        return *col;
    };
    const ColumnMap cols{need({"participant", "participant_id"}), need({"question", "question_id"}),
                         need({"pass", "pass_index"}),             need({"x", "x_px"}),
                         need({"y", "y_px"}),                      need({"duration_ms", "duration"}),
                         need({"correct", "answered_correctly"})};
    const std::size_t n_cols = header.size();

    for (std::size_t li = header_line + 1; li < lines.size(); ++li) {
        if (io::trim(lines[li]).empty()) {
            continue;
        }
        const std::string where = path.string() + ":" + std::to_string(li + 1) + ": ";
        const auto f = io::split_fields(lines[li], delim);
        if (f.size() != n_cols) {
            throw InputError(where + "expected " + std::to_string(n_cols) + " fields, got " + std::to_string(f.size()));
        }
        FixationRecord rec;
        rec.participant_id = std::string(io::trim(f[cols.participant]));
        rec.question_id = std::string(io::trim(f[cols.question]));
        if (rec.participant_id.empty() || rec.question_id.empty()) {
            throw InputError(where + "empty participant or question id");
        }
        long long pass = 0;
        if (!io::parse_int(f[cols.pass], pass) || (pass != 1 && pass != 2)) {
            throw InputError(where + "pass must be 1 or 2");
        }
        rec.pass_index = static_cast<int>(pass);
        if (!io::parse_double(f[cols.x], rec.x_px) || !io::parse_double(f[cols.y], rec.y_px)) {
            throw InputError(where + "x/y must be finite numbers");
        }
        if (!io::parse_double(f[cols.duration], rec.duration_ms)) {
            throw InputError(where + "duration_ms is not a number");
        }
        if (!(rec.duration_ms > 0.0)) {
            throw InputError(where + "duration_ms must be > 0");
        }
        if (!io::parse_bool(f[cols.correct], rec.answered_correctly)) {
            throw InputError(where + "correct must be 0/1 or true/false");
        }
        out.push_back(std::move(rec));
    }
    return out;
}

std::string format_fixations(std::span<const FixationRecord> fixations) {
    std::string out = "participant,question,pass,x,y,duration_ms,correct\n";
    for (const auto& f : fixations) {
        out += f.participant_id + ',' + f.question_id + ',' + std::to_string(f.pass_index) + ',' +
               io::format_double(f.x_px) + ',' + io::format_double(f.y_px) + ',' + io::format_double(f.duration_ms) +
               ',' + (f.answered_correctly ? "1" : "0") + '\n';
    }
    return out;
}

WordTimes fixation_word_times(std::span<const FixationRecord> fixations, std::span<const WordBox> boxes) {
    WordTimes result;
    if (!fixations.empty()) {
        result.question_id = fixations.front().question_id;
    }
    const BoxIndex index(boxes);
    std::map<std::string, ParticipantWordTimes> by_participant;
    for (const auto& fix : fixations) {
        auto [it, inserted] = by_participant.try_emplace(fix.participant_id);
        auto& p = it->second;
        if (inserted) {
            p.participant_id = fix.participant_id;
            p.answered_correctly = fix.answered_correctly;
            p.total_ms.assign(boxes.size(), 0.0);
        } else {
            p.answered_correctly = p.answered_correctly && fix.answered_correctly;
        }
        const auto word = index.locate(boxes, fix.x_px, fix.y_px);
        if (!word) {
            ++result.dropped_fixations;
            continue;
        }
        p.total_ms[*word] += fix.duration_ms;
        result.assigned_ms += fix.duration_ms;
    }
    for (auto& [id, p] : by_participant) {
        result.participants.push_back(std::move(p));
    }
    return result;
}

AttentionDensityVector attention_density(const WordTimes& times, std::span<const WordBox> boxes,
                                         bool correctness_filter) {
    AttentionDensityVector out;
    out.question_id = times.question_id;
    out.values.assign(boxes.size(), 0.0);
    for (const auto& p : times.participants) {
        if (correctness_filter && !p.answered_correctly) {
            continue;
        }
        if (p.total_ms.size() != boxes.size()) {
            throw AnalysisError("question '" + times.question_id + "': word-time vector does not match the layout");
        }
        for (std::size_t w = 0; w < boxes.size(); ++w) {
            out.values[w] += p.total_ms[w];
        }
        ++out.n_correct_participants;
    }
    if (out.n_correct_participants == 0) {
        throw AnalysisError("question '" + times.question_id + "': no participant passes the correctness filter");
    }
    const auto n = static_cast<double>(out.n_correct_participants);
    for (std::size_t w = 0; w < boxes.size(); ++w) {
        out.values[w] = out.values[w] / n / static_cast<double>(boxes[w].area_px2());
    }
    return out;
}

std::vector<double> znorm(std::span<const double> values) {
    if (values.size() < 2) {
        throw AnalysisError("znorm needs at least 2 values, got " + std::to_string(values.size()));
    }
    const auto n = static_cast<double>(values.size());
    double mean = 0.0;
    for (const double v : values) {
        mean += v;
    }
    mean /= n;
    double ss = 0.0;
    for (const double v : values) {
        ss += (v - mean) * (v - mean);
    }
    const double sd = std::sqrt(ss / n);
    std::vector<double> out(values.size(), 0.0);
    // Relative threshold: rounding noise in a constant vector must not be amplified to unit variance.
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
        return out;
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
        out[i] = (values[i] - mean) / sd;
    }
    return out;
}

}  // namespace gazealign
