#include "gazealign/attention_store.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>

#include "gazealign/error.hpp"
#include "gazealign/io.hpp"

namespace gazealign {

using nlohmann::json;

namespace {

std::size_t row_offset(const AttentionRecord& r, int layer, int head) {
    return (static_cast<std::size_t>(layer) * static_cast<std::size_t>(r.n_heads) + static_cast<std::size_t>(head)) *
           r.n_tokens();
}

std::string where(const AttentionRecord& r) {
    return "attention record (question '" + r.question_id + "', model '" + r.model_name + "', step " +
           std::to_string(r.checkpoint_step) + ")";
}

}  // namespace

std::span<const double> AttentionRecord::row(int layer, int head) const {
    return std::span<const double>(weights).subspan(row_offset(*this, layer, head), n_tokens());
}

std::span<double> AttentionRecord::row(int layer, int head) {
    return std::span<double>(weights).subspan(row_offset(*this, layer, head), n_tokens());
}

void AttentionRecord::validate() const {
    if (n_layers <= 0 || n_heads <= 0) {
        throw InputError(where(*this) + ": n_layers and n_heads must be positive");
    }
    if (tokens.empty()) {
        throw InputError(where(*this) + ": no tokens");
    }
    if (weights.size() != n_rows() * n_tokens()) {
        throw InputError(where(*this) + ": expected " + std::to_string(n_rows() * n_tokens()) + " weights, got " +
                         std::to_string(weights.size()));
    }
    for (int l = 0; l < n_layers; ++l) {
        for (int h = 0; h < n_heads; ++h) {
            double sum = 0.0;
            for (const double w : row(l, h)) {
                if (!std::isfinite(w) || w < 0.0) {
                    throw InputError(where(*this) + ": negative or non-finite weight at layer " + std::to_string(l + 1) +
                                     ", head " + std::to_string(h + 1));
                }
                sum += w;
            }
            if (std::abs(sum - 1.0) > kRowSumTolerance) {
                throw InputError(where(*this) + ": layer " + std::to_string(l + 1) + ", head " + std::to_string(h + 1) +
                                 " sums to " + io::format_double(sum));
            }
        }
    }
    double score_sum = 0.0;
    for (const double s : option_scores) {
        if (!std::isfinite(s) || s < 0.0) {
            throw InputError(where(*this) + ": option scores must be non-negative");
        }
        score_sum += s;
    }
    if (std::abs(score_sum - 1.0) > kOptionScoreTolerance) {
        throw InputError(where(*this) + ": option scores sum to " + io::format_double(score_sum));
    }
}

AttentionRecord parse_attention_record(std::string_view json_line) {
    json obj;
    try {
        obj = json::parse(json_line);
    } catch (const json::parse_error& e) {
        throw InputError(std::string("attention record: malformed JSON: ") + e.what());
    }
    AttentionRecord r;
    try {
        const int version = obj.at("format_version").get<int>();
        if (version != kAttentionFormatVersion) {
            throw InputError("attention record: unsupported format_version " + std::to_string(version));
        }
        r.question_id = obj.at("question_id").get<std::string>();
        r.model_name = obj.at("model_name").get<std::string>();
        r.checkpoint_step = obj.at("checkpoint_step").get<std::int64_t>();
        r.n_layers = obj.at("n_layers").get<int>();
        r.n_heads = obj.at("n_heads").get<int>();
        r.truncated = obj.value("truncated", false);
        for (const auto& t : obj.at("tokens")) {
            AttentionToken tok;
            tok.text = t.at("text").get<std::string>();
            const auto& span = t.at("span");
            if (!span.is_null()) {
                const auto s = span.get<std::array<std::size_t, 2>>();
                if (s[1] < s[0]) {
                    throw InputError("attention record '" + r.question_id + "': token span end before start");
                }
                tok.span = CharSpan{s[0], s[1]};
            }
            r.tokens.push_back(std::move(tok));
        }
        const auto& w = obj.at("weights");
        if (!w.is_array() || w.size() != static_cast<std::size_t>(r.n_layers)) {
            throw InputError("attention record '" + r.question_id + "': weights must have n_layers entries");
        }
        r.weights.reserve(r.n_rows() * r.n_tokens());
        for (const auto& layer : w) {
            if (!layer.is_array() || layer.size() != static_cast<std::size_t>(r.n_heads)) {
                throw InputError("attention record '" + r.question_id + "': each layer must have n_heads rows");
            }
            for (const auto& head : layer) {
                if (!head.is_array() || head.size() != r.n_tokens()) {
                    throw InputError("attention record '" + r.question_id + "': each row must have one weight per token");
                }
                for (const auto& v : head) {
                    r.weights.push_back(v.get<double>());
                }
            }
        }
        r.option_scores = obj.at("option_scores").get<std::array<double, 4>>();
    } catch (const json::exception& e) {
        throw InputError("attention record '" + r.question_id + "': " + e.what());
    }
    r.validate();
    return r;
}

std::string to_json_line(const AttentionRecord& record) {
    json tokens = json::array();
    for (const auto& t : record.tokens) {
        json span = nullptr;
        if (t.span) {
            span = json::array({t.span->start, t.span->end});
        }
        tokens.push_back({{"text", t.text}, {"span", span}});
    }
    json weights = json::array();
    for (int l = 0; l < record.n_layers; ++l) {
        json layer = json::array();
        for (int h = 0; h < record.n_heads; ++h) {
            const auto row = record.row(l, h);
            layer.push_back(std::vector<double>(row.begin(), row.end()));
        }
        weights.push_back(std::move(layer));
    }
    const json obj = {{"format_version", kAttentionFormatVersion},
                      {"question_id", record.question_id},
                      {"model_name", record.model_name},
                      {"checkpoint_step", record.checkpoint_step},
                      {"n_layers", record.n_layers},
                      {"n_heads", record.n_heads},
                      {"truncated", record.truncated},
                      {"tokens", std::move(tokens)},
                      {"weights", std::move(weights)},
                      {"option_scores", record.option_scores},
                      {"other_options", nullptr}};
    return obj.dump();
}

std::vector<AttentionRecord> load_attention(const std::filesystem::path& path) {
    const std::string text = io::read_file(path);
    std::vector<AttentionRecord> out;
    const auto lines = io::split_lines(text);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (io::trim(lines[i]).empty()) {
            continue;
        }
        try {
            out.push_back(parse_attention_record(lines[i]));
        } catch (const InputError& e) {
            throw InputError(path.string() + ":" + std::to_string(i + 1) + ": " + e.what());
        }
    }
    return out;
}

std::vector<AttentionRecord> load_attention_path(const std::filesystem::path& path) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(path)) {
        return load_attention(path);
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(path)) {
        const std::string name = entry.path().filename().string();
        const auto ends_with = [&](std::string_view suffix) {
            return name.size() >= suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0;
        };
        if (entry.is_regular_file() && (ends_with(".jsonl") || ends_with(".jsonl.gz"))) {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    std::vector<AttentionRecord> out;
    for (const auto& f : files) {
        auto part = load_attention(f);
        std::move(part.begin(), part.end(), std::back_inserter(out));
    }
    return out;
}

void write_attention(const std::filesystem::path& path, std::span<const AttentionRecord> records) {
    std::string text;
    for (const auto& r : records) {
        text += to_json_line(r);
        text += '\n';
    }
    if (path.extension() == ".gz") {
        io::write_gzip_file(path, text);
    } else {
        io::write_file(path, text);
    }
}

WordAttentionMatrix tokens_to_words(const AttentionRecord& record, std::span<const WordBox> boxes) {
    WordAttentionMatrix m;
    m.question_id = record.question_id;
    m.model_name = record.model_name;
    m.checkpoint_step = record.checkpoint_step;
    m.n_layers = record.n_layers;
    m.n_heads = record.n_heads;
    const auto n_rows = static_cast<Eigen::Index>(record.n_rows());
    m.values = Eigen::MatrixXd::Zero(n_rows, static_cast<Eigen::Index>(boxes.size()));
    m.non_passage_mass = Eigen::VectorXd::Zero(n_rows);

    // Word spans are disjoint and ordered, so a token's candidates are found by binary search.
    std::vector<long long> token_word(record.n_tokens(), -1);
    for (std::size_t t = 0; t < record.n_tokens(); ++t) {
        const auto& span = record.tokens[t].span;
        if (!span || span->length() == 0) {
            continue;
        }
        auto it = std::upper_bound(boxes.begin(), boxes.end(), span->start,
                                   [](std::size_t pos, const WordBox& b) { return pos < b.char_span.end; });
        std::vector<std::size_t> hits;
        for (; it != boxes.end() && it->char_span.start < span->end; ++it) {
            if (it->char_span.overlaps(*span)) {
                hits.push_back(static_cast<std::size_t>(it - boxes.begin()));
            }
        }
        const std::string desc = "question '" + record.question_id + "': token " + std::to_string(t) + " '" +
                                 record.tokens[t].text + "' [" + std::to_string(span->start) + ", " +
                                 std::to_string(span->end) + ")";
        if (hits.empty()) {
            throw InputError(desc + " lies in no passage word");
        }
        if (hits.size() > 1) {
            throw InputError(desc + " straddles " + std::to_string(hits.size()) + " words");
        }
        token_word[t] = static_cast<long long>(hits.front());
    }

    for (int l = 0; l < record.n_layers; ++l) {
        for (int h = 0; h < record.n_heads; ++h) {
            const Eigen::Index r = static_cast<Eigen::Index>(l) * record.n_heads + h;
            const auto row = record.row(l, h);
            for (std::size_t t = 0; t < row.size(); ++t) {
                if (token_word[t] < 0) {
                    m.non_passage_mass(r) += row[t];
                } else {
                    m.values(r, token_word[t]) += row[t];
                }
            }
        }
    }
    return m;
}

Eigen::VectorXd mean_last_layer(const WordAttentionMatrix& matrix) {
    const Eigen::Index first = static_cast<Eigen::Index>(matrix.n_layers - 1) * matrix.n_heads;
    return matrix.values.middleRows(first, matrix.n_heads).colwise().mean().transpose();
}

}  // namespace gazealign
