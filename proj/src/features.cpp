#include "gazealign/features.hpp"

#include <cctype>
#include <cmath>
#include <json.hpp>

#include "gazealign/error.hpp"
#include "gazealign/gaze.hpp"
#include "gazealign/io.hpp"

namespace gazealign {

using nlohmann::json;

FeatureMatrix znorm_columns(const FeatureMatrix& raw) {
    FeatureMatrix out = raw;
    out.normalization = Normalization::ZPerPassage;
    for (Eigen::Index j = 0; j < raw.values.cols(); ++j) {
        const Eigen::VectorXd col = raw.values.col(j);
        const auto z = znorm(std::span<const double>(col.data(), static_cast<std::size_t>(col.size())));
        out.values.col(j) = Eigen::Map<const Eigen::VectorXd>(z.data(), static_cast<Eigen::Index>(z.size()));
    }
    return out;
}

FeatureMatrix hconcat(std::span<const FeatureMatrix> parts) {
    FeatureMatrix out;
    if (parts.empty()) {
        return out;
    }
    out.question_id = parts.front().question_id;
    out.normalization = parts.front().normalization;
    const Eigen::Index rows = parts.front().values.rows();
    Eigen::Index cols = 0;
    for (const auto& p : parts) {
        if (p.values.rows() != rows || p.question_id != out.question_id) {
            throw AnalysisError("question '" + out.question_id + "': feature blocks disagree on question or word count");
        }
        cols += p.values.cols();
    }
    out.values.resize(rows, cols);
    Eigen::Index offset = 0;
    for (const auto& p : parts) {
        out.values.middleCols(offset, p.values.cols()) = p.values;
        offset += p.values.cols();
        out.feature_names.insert(out.feature_names.end(), p.feature_names.begin(), p.feature_names.end());
    }
    return out;
}

FrequencyTable::FrequencyTable(std::unordered_map<std::string, double> per_million) {
    for (auto& [word, value] : per_million) {
        if (!(value >= 0.0)) {
            throw InputError("frequency table: negative or invalid value for '" + word + "'");
        }
        table_[lookup_key(word)] = value;
    }
}

FrequencyTable FrequencyTable::load(const std::filesystem::path& path) {
    const std::string text = io::read_file(path);
    const char delim = io::sniff_delimiter(text);
    std::unordered_map<std::string, double> table;
    bool first = true;
    const auto lines = io::split_lines(text);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (io::trim(lines[i]).empty()) {
            continue;
        }
        const auto f = io::split_fields(lines[i], delim);
        const std::string where = path.string() + ":" + std::to_string(i + 1) + ": ";
        if (f.size() != 2) {
            throw InputError(where + "expected 2 fields {word, per_million}");
        }
        double value = 0.0;
        if (!io::parse_double(f[1], value)) {
            if (first) {
                first = false;
                continue;  // header
            }
            throw InputError(where + "frequency is not a number");
        }
        first = false;
        if (value < 0.0) {
            throw InputError(where + "frequency must be >= 0");
        }
        table[std::string(io::trim(f[0]))] = value;
    }
    return FrequencyTable(std::move(table));
}

double FrequencyTable::per_million(std::string_view word) const {
    const auto it = table_.find(lookup_key(word));
    return it == table_.end() ? 0.0 : it->second;
}

std::string FrequencyTable::lookup_key(std::string_view word) {
    // Non-ASCII bytes are kept: they are part of letters in UTF-8 words.
    const auto keep = [](unsigned char c) { return c >= 0x80 || std::isalnum(c) != 0; };
    std::size_t b = 0;
    std::size_t e = word.size();
    while (b < e && !keep(static_cast<unsigned char>(word[b]))) {
        ++b;
    }
    while (e > b && !keep(static_cast<unsigned char>(word[e - 1]))) {
        --e;
    }
    std::string key(word.substr(b, e - b));
    for (char& c : key) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return key;
}

FeatureMatrix textual_features(const std::string& question_id, std::span<const WordBox> boxes,
                               const FrequencyTable& freq) {
    FeatureMatrix m;
    m.question_id = question_id;
    m.feature_names = kTextualFeatureNames;
    m.values.resize(static_cast<Eigen::Index>(boxes.size()), 5);
    for (std::size_t w = 0; w < boxes.size(); ++w) {
        const auto r = static_cast<Eigen::Index>(w);
        const WordBox& b = boxes[w];
        m.values(r, 0) = static_cast<double>(letter_count(b.word));
        m.values(r, 1) = std::log(freq.per_million(b.word) + 1.0);
        m.values(r, 2) = static_cast<double>(b.word_index_in_sentence);
        m.values(r, 3) = static_cast<double>(b.word_index_in_passage);
        m.values(r, 4) = static_cast<double>(b.sentence_index);
    }
    return m;
}

FeatureMatrix layout_features(const std::string& question_id, std::span<const WordBox> boxes) {
    FeatureMatrix m;
    m.question_id = question_id;
    m.feature_names = kLayoutFeatureNames;
    m.values.resize(static_cast<Eigen::Index>(boxes.size()), 4);
    for (std::size_t w = 0; w < boxes.size(); ++w) {
        const auto r = static_cast<Eigen::Index>(w);
        const WordBox& b = boxes[w];
        m.values(r, 0) = static_cast<double>(b.bbox.x);
        m.values(r, 1) = static_cast<double>(b.word_index_in_paragraph);
        m.values(r, 2) = static_cast<double>(b.row_in_paragraph);
        m.values(r, 3) = static_cast<double>(b.row_in_passage);
    }
    return m;
}

std::map<std::string, RelevanceVector> load_relevance(const std::filesystem::path& path) {
    const std::string text = io::read_file(path);
    std::map<std::string, RelevanceVector> out;
    const auto lines = io::split_lines(text);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (io::trim(lines[i]).empty()) {
            continue;
        }
        const std::string where = path.string() + ":" + std::to_string(i + 1) + ": ";
        json obj;
        try {
            obj = json::parse(lines[i]);
        } catch (const json::parse_error& e) {
            throw InputError(where + e.what());
        }
        if (!obj.is_object() || !obj.contains("question_id")) {
            throw InputError(where + "expected an object with 'question_id'");
        }
        RelevanceVector rv;
        rv.question_id = obj["question_id"].is_string() ? obj["question_id"].get<std::string>() : obj["question_id"].dump();
        const std::string q = "question '" + rv.question_id + "': ";
        try {
            if (obj.contains("relevance")) {
                rv.values = obj["relevance"].get<std::vector<double>>();
            } else if (obj.contains("marks") && obj.contains("n_annotators")) {
                const auto n = obj["n_annotators"].get<long long>();
                if (n <= 0) {
                    throw InputError(where + q + "n_annotators must be positive");
                }
                for (const auto k : obj["marks"].get<std::vector<long long>>()) {
                    if (k < 0 || k > n) {
                        throw InputError(where + q + "mark count outside [0, n_annotators]");
                    }
                    rv.values.push_back(static_cast<double>(k) / static_cast<double>(n));
                }
            } else {
                throw InputError(where + q + "needs 'relevance' or 'marks' + 'n_annotators'");
            }
        } catch (const json::exception& e) {
            throw InputError(where + q + e.what());
        }
        for (const double v : rv.values) {
            if (!(v >= 0.0 && v <= 1.0)) {
                throw InputError(where + q + "relevance values must lie in [0, 1]");
            }
        }
        if (out.count(rv.question_id) != 0) {
            throw InputError(where + q + "duplicate relevance record");
        }
        const std::string id = rv.question_id;
        out.emplace(id, std::move(rv));
    }
    return out;
}

std::map<std::string, RelevanceVector> load_relevance(const std::filesystem::path& path,
                                                      const std::map<std::string, std::size_t>& word_counts) {
    auto out = load_relevance(path);
    for (const auto& [id, rv] : out) {
        const auto it = word_counts.find(id);
        if (it != word_counts.end() && it->second != rv.values.size()) {
            throw InputError("question '" + id + "': relevance has " + std::to_string(rv.values.size()) +
                             " words, layout has " + std::to_string(it->second));
        }
    }
    return out;
}

FeatureMatrix relevance_features(const RelevanceVector& relevance) {
    FeatureMatrix m;
    m.question_id = relevance.question_id;
    m.feature_names = {"relevance"};
    m.values = Eigen::Map<const Eigen::VectorXd>(relevance.values.data(), static_cast<Eigen::Index>(relevance.values.size()));
    return m;
}

}  // namespace gazealign
