#include "gazealign/corpus_layout.hpp"

#include <algorithm>
#include <cctype>
#include <json.hpp>

#include "gazealign/error.hpp"
#include "gazealign/io.hpp"

namespace gazealign {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 6> kTypeNames = {"Cause", "Fact", "Inference", "Theme", "Title", "Purpose"};

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

struct Codepoint {
    char32_t value;
    std::size_t byte_offset;
    std::size_t byte_length;
};

// Lenient UTF-8 decoder: invalid bytes decode as U+FFFD of length 1.
std::vector<Codepoint> decode_utf8(std::string_view s) {
    std::vector<Codepoint> out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        const auto b0 = static_cast<unsigned char>(s[i]);
        std::size_t len = 1;
        char32_t cp = 0xFFFD;
        if (b0 < 0x80) {
            cp = b0;
        } else if ((b0 & 0xE0) == 0xC0) {
            len = 2;
            cp = b0 & 0x1F;
        } else if ((b0 & 0xF0) == 0xE0) {
            len = 3;
            cp = b0 & 0x0F;
        } else if ((b0 & 0xF8) == 0xF0) {
            len = 4;
            cp = b0 & 0x07;
        } else {
            len = 0;
        }
        bool ok = len > 0 && i + len <= s.size();
        for (std::size_t k = 1; ok && k < len; ++k) {
            const auto b = static_cast<unsigned char>(s[i + k]);
            if ((b & 0xC0) != 0x80) {
                ok = false;
            } else {
                cp = (cp << 6) | (b & 0x3F);
            }
        }
        if (!ok) {
            out.push_back({0xFFFD, i, 1});
            ++i;
            continue;
        }
        out.push_back({cp, i, len});
        i += len;
    }
    return out;
}

bool is_space(char32_t c) { return c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' || c == U'\f' || c == U'\v'; }

bool is_letter(char32_t c) {
    if (c < 0x80) {
        return std::isalpha(static_cast<int>(c)) != 0;
    }
    if (c < 0xC0 || c == 0xD7 || c == 0xF7) {
        return false;
    }
    if ((c >= 0x2000 && c <= 0x2BFF) || (c >= 0x3000 && c <= 0x303F) || (c >= 0xFE30 && c <= 0xFE4F) ||
        (c >= 0xFF00 && c <= 0xFF0F) || c == 0xFFFD) {
        return false;
    }
    return true;
}

bool is_upper(char32_t c) {
    if (c < 0x80) {
        return c >= U'A' && c <= U'Z';
    }
    return (c >= 0xC0 && c <= 0xDE && c != 0xD7) || (c >= 0x391 && c <= 0x3A9) || (c >= 0x410 && c <= 0x42F);
}

bool is_closing(char32_t c) {
    return c == U'"' || c == U'\'' || c == U')' || c == U']' || c == U'}' || c == 0x201D || c == 0x2019 || c == 0xBB;
}

bool is_opening(char32_t c) {
    return c == U'"' || c == U'\'' || c == U'(' || c == U'[' || c == U'{' || c == 0x201C || c == 0x2018 || c == 0xAB;
}

bool ends_sentence(const std::vector<char32_t>& word) {
    auto it = word.rbegin();
    while (it != word.rend() && is_closing(*it)) {
        ++it;
    }
    return it != word.rend() && (*it == U'.' || *it == U'!' || *it == U'?');
}

bool starts_upper(const std::vector<char32_t>& word) {
    auto it = word.begin();
    while (it != word.end() && is_opening(*it)) {
        ++it;
    }
    return it != word.end() && is_upper(*it);
}

std::string field_string(const json& obj, const char* key, const std::string& id) {
    const auto it = obj.find(key);
    if (it == obj.end() || !it->is_string()) {
        throw InputError("record '" + id + "': field '" + key + "' missing or not a string");
    }
    return it->get<std::string>();
}

}  // namespace

Scope scope_of(QuestionType type) {
    switch (type) {
        case QuestionType::Cause:
        case QuestionType::Fact:
        case QuestionType::Inference:
            return Scope::Local;
        case QuestionType::Theme:
        case QuestionType::Title:
        case QuestionType::Purpose:
            return Scope::Global;
    }
    return Scope::Local;
}

std::string_view to_string(QuestionType type) { return kTypeNames[static_cast<std::size_t>(type)]; }

std::string_view to_string(Scope scope) { return scope == Scope::Local ? "local" : "global"; }

std::optional<QuestionType> parse_question_type(std::string_view name) {
    const std::string key = lower(io::trim(name));
    for (std::size_t i = 0; i < kTypeNames.size(); ++i) {
        if (lower(kTypeNames[i]) == key) {
            return static_cast<QuestionType>(i);
        }
    }
    return std::nullopt;
}

std::optional<Scope> parse_scope(std::string_view name) {
    const std::string key = lower(io::trim(name));
    if (key == "local") {
        return Scope::Local;
    }
    if (key == "global") {
        return Scope::Global;
    }
    return std::nullopt;
}

QuestionRecord parse_question_record(std::string_view json_line) {
    json obj;
    try {
        obj = json::parse(json_line);
    } catch (const json::parse_error& e) {
        throw InputError(std::string("malformed JSON: ") + e.what());
    }
    if (!obj.is_object()) {
        throw InputError("record is not a JSON object");
    }
    QuestionRecord rec;
    const auto id_it = obj.find("id");
    if (id_it == obj.end()) {
        throw InputError("record without 'id'");
    }
    rec.id = id_it->is_string() ? id_it->get<std::string>() : id_it->dump();
    if (rec.id.empty()) {
        throw InputError("record with empty 'id'");
    }

    const std::string type_name = field_string(obj, "type", rec.id);
    const auto type = parse_question_type(type_name);
    if (!type) {
        throw InputError("record '" + rec.id + "': field 'type' has unknown value '" + type_name + "'");
    }
    rec.type = *type;
    rec.passage = field_string(obj, "passage", rec.id);
    if (io::trim(rec.passage).empty()) {
        throw InputError("record '" + rec.id + "': field 'passage' is empty");
    }
    rec.question = field_string(obj, "question", rec.id);

    const auto opts = obj.find("options");
    if (opts == obj.end() || !opts->is_array()) {
        throw InputError("record '" + rec.id + "': field 'options' missing or not an array");
    }
    if (opts->size() != 4) {
        throw InputError("record '" + rec.id + "': field 'options' has " + std::to_string(opts->size()) +
                         " entries, expected 4");
    }
    for (std::size_t i = 0; i < 4; ++i) {
        if (!(*opts)[i].is_string()) {
            throw InputError("record '" + rec.id + "': field 'options' entry " + std::to_string(i) + " is not a string");
        }
        rec.options[i] = (*opts)[i].get<std::string>();
    }

    const auto correct = obj.find("correct");
    if (correct == obj.end()) {
        throw InputError("record '" + rec.id + "': field 'correct' missing");
    }
    long long index = -1;
    if (correct->is_number_integer()) {
        index = correct->get<long long>();
    } else if (correct->is_string()) {
        const std::string letter = correct->get<std::string>();
        if (letter.size() == 1 && letter[0] >= 'A' && letter[0] <= 'D') {
            index = letter[0] - 'A';
        }
    }
    if (index < 0 || index > 3) {
        throw InputError("record '" + rec.id + "': field 'correct' must be 0-3 or A-D");
    }
    rec.correct_index = static_cast<int>(index);
    return rec;
}

CorpusLoadResult load_corpus(const std::filesystem::path& path) {
    const std::string text = io::read_file(path);
    CorpusLoadResult result;
    const auto lines = io::split_lines(text);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (io::trim(lines[i]).empty()) {
            continue;
        }
        QuestionRecord rec;
        try {
            rec = parse_question_record(lines[i]);
        } catch (const InputError& e) {
            throw InputError(path.string() + ":" + std::to_string(i + 1) + ": " + e.what());
        }
        const std::size_t n_words = tokenize_passage(rec.passage).size();
        if (n_words < kMinPassageWords || n_words > kMaxPassageWords) {
            result.warnings.push_back("record '" + rec.id + "': passage has " + std::to_string(n_words) +
                                      " words, outside [117, 456]");
        }
        result.records.push_back(std::move(rec));
    }
    return result;
}

std::string to_json_line(const QuestionRecord& record) {
    json obj = {{"id", record.id},
                {"type", std::string(to_string(record.type))},
                {"passage", record.passage},
                {"question", record.question},
                {"options", record.options},
                {"correct", record.correct_index}};
    return obj.dump();
}

std::size_t codepoint_count(std::string_view utf8) { return decode_utf8(utf8).size(); }

std::size_t letter_count(std::string_view utf8) {
    const auto cps = decode_utf8(utf8);
    return static_cast<std::size_t>(std::count_if(cps.begin(), cps.end(), [](const Codepoint& c) { return is_letter(c.value); }));
}

std::vector<Token> tokenize_passage(std::string_view passage) {
    const auto cps = decode_utf8(passage);
    std::vector<Token> tokens;
    std::vector<std::vector<char32_t>> words;
    std::size_t paragraph = 1;
    bool pending_newline = false;
    std::size_t i = 0;
    while (i < cps.size()) {
        if (is_space(cps[i].value)) {
            if (cps[i].value == U'\n') {
                pending_newline = true;
            }
            ++i;
            continue;
        }
        const std::size_t start = i;
        while (i < cps.size() && !is_space(cps[i].value)) {
            ++i;
        }
        if (pending_newline && !tokens.empty()) {
            ++paragraph;
        }
        pending_newline = false;
        const std::size_t byte_begin = cps[start].byte_offset;
        const std::size_t byte_end = cps[i - 1].byte_offset + cps[i - 1].byte_length;
        Token tok;
        tok.text = std::string(passage.substr(byte_begin, byte_end - byte_begin));
        tok.span = {start, i};
        tok.paragraph_index = paragraph;
        tokens.push_back(std::move(tok));
        std::vector<char32_t> word;
        for (std::size_t k = start; k < i; ++k) {
            word.push_back(cps[k].value);
        }
        words.push_back(std::move(word));
    }
    std::size_t sentence = 1;
    for (std::size_t k = 0; k < tokens.size(); ++k) {
        tokens[k].sentence_index = sentence;
        if (k + 1 < tokens.size() && ends_sentence(words[k]) && starts_upper(words[k + 1])) {
            ++sentence;
        }
    }
    return tokens;
}

void LayoutConfig::validate() const {
    if (glyph_width_px <= 0 || glyph_height_px <= 0 || max_chars_per_line <= 0 || line_pitch_px <= 0) {
        throw InputError("layout config: glyph size, line width and pitch must be positive");
    }
    if (paragraph_indent_chars < 0 || paragraph_indent_chars >= max_chars_per_line) {
        throw InputError("layout config: paragraph_indent_chars must be in [0, max_chars_per_line)");
    }
    if (line_pitch_px < glyph_height_px) {
        throw InputError("layout config: line_pitch_px must be >= glyph_height_px");
    }
}

LayoutConfig load_layout_config(const std::filesystem::path& path) {
    json obj;
    try {
        obj = json::parse(io::read_file(path));
    } catch (const json::parse_error& e) {
        throw InputError("layout config " + path.string() + ": " + e.what());
    }
    if (!obj.is_object()) {
        throw InputError("layout config " + path.string() + ": expected a JSON object");
    }
    LayoutConfig cfg;
    const auto read = [&](const char* key, int& field) {
        const auto it = obj.find(key);
        if (it == obj.end()) {
            return;
        }
        if (!it->is_number_integer()) {
            throw InputError(std::string("layout config: '") + key + "' must be an integer");
        }
        field = it->get<int>();
    };
    read("glyph_width_px", cfg.glyph_width_px);
    read("glyph_height_px", cfg.glyph_height_px);
    read("max_chars_per_line", cfg.max_chars_per_line);
    read("line_pitch_px", cfg.line_pitch_px);
    read("paragraph_indent_chars", cfg.paragraph_indent_chars);
    read("origin_x_px", cfg.origin_x_px);
    read("origin_y_px", cfg.origin_y_px);
    cfg.validate();
    return cfg;
}

std::string to_json(const LayoutConfig& cfg) {
    const json obj = {{"glyph_width_px", cfg.glyph_width_px},
                      {"glyph_height_px", cfg.glyph_height_px},
                      {"max_chars_per_line", cfg.max_chars_per_line},
                      {"line_pitch_px", cfg.line_pitch_px},
                      {"paragraph_indent_chars", cfg.paragraph_indent_chars},
                      {"origin_x_px", cfg.origin_x_px},
                      {"origin_y_px", cfg.origin_y_px}};
    return obj.dump();
}

std::vector<WordBox> layout_passage(const QuestionRecord& record, const LayoutConfig& cfg) {
    try {
        return layout_passage(record.passage, cfg);
    } catch (const InputError& e) {
        throw InputError("question '" + record.id + "': " + e.what());
    }
}

std::vector<WordBox> layout_passage(std::string_view passage, const LayoutConfig& cfg) {
    cfg.validate();
    const auto tokens = tokenize_passage(passage);
    const auto max_cols = static_cast<std::size_t>(cfg.max_chars_per_line);
    const auto indent = static_cast<std::size_t>(cfg.paragraph_indent_chars);

    std::vector<WordBox> boxes;
    boxes.reserve(tokens.size());
    std::size_t row_in_passage = 0;
    std::size_t row_in_paragraph = 0;
    std::size_t word_in_paragraph = 0;
    std::size_t word_in_sentence = 0;
    std::size_t current_paragraph = 0;
    std::size_t current_sentence = 0;
    std::size_t next_col = 0;  // first free column after the last placed word
    bool row_empty = true;

    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const Token& tok = tokens[i];
        const std::size_t len = tok.span.length();
        if (len + indent > max_cols) {
            throw InputError("word '" + tok.text + "' (" + std::to_string(len) + " chars) does not fit on a " +
                             std::to_string(max_cols) + "-column line with indent " + std::to_string(indent));
        }
        if (tok.paragraph_index != current_paragraph) {
            current_paragraph = tok.paragraph_index;
            ++row_in_passage;
            row_in_paragraph = 1;
            word_in_paragraph = 0;
            next_col = indent;
            row_empty = true;
        }
        if (tok.sentence_index != current_sentence) {
            current_sentence = tok.sentence_index;
            word_in_sentence = 0;
        }
        std::size_t col = next_col;
        if (!row_empty) {
            if (next_col + 1 + len <= max_cols) {
                col = next_col + 1;
            } else {
                ++row_in_passage;
                ++row_in_paragraph;
                col = 0;
            }
        }
        WordBox box;
        box.word = tok.text;
        box.char_span = tok.span;
        box.bbox.x = cfg.origin_x_px + static_cast<int>(col) * cfg.glyph_width_px;
        box.bbox.y = cfg.origin_y_px + static_cast<int>(row_in_passage - 1) * cfg.line_pitch_px;
        box.bbox.width = static_cast<int>(len) * cfg.glyph_width_px;
        box.bbox.height = cfg.glyph_height_px;
        box.word_index_in_passage = i + 1;
        box.word_index_in_sentence = ++word_in_sentence;
        box.sentence_index = tok.sentence_index;
        box.paragraph_index = tok.paragraph_index;
        box.word_index_in_paragraph = ++word_in_paragraph;
        box.row_in_paragraph = row_in_paragraph;
        box.row_in_passage = row_in_passage;
        boxes.push_back(std::move(box));
        next_col = col + len;
        row_empty = false;
    }
    return boxes;
}

}  // namespace gazealign
