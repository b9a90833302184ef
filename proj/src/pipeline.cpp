#include "gazealign/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <ctime>
#include <json.hpp>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "gazealign/attention_store.hpp"
#include "gazealign/error.hpp"
#include "gazealign/features.hpp"
#include "gazealign/gaze.hpp"
#include "gazealign/io.hpp"
#include "gazealign/layer_analysis.hpp"
#include "gazealign/plot.hpp"
#include "gazealign/random.hpp"

namespace gazealign {

using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------- manifest

RunManifest::RunManifest(std::string command, std::string config_json)
    : command_(std::move(command)), config_json_(std::move(config_json)) {}

void RunManifest::add_input(const std::string& role, const fs::path& path) {
    if (fs::is_directory(path)) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::recursive_directory_iterator(path)) {
            if (entry.is_regular_file()) {
                files.push_back(entry.path());
            }
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            inputs_[role + ":" + fs::relative(f, path).generic_string()] = io::sha256_file(f);
        }
        return;
    }
    inputs_[role] = io::sha256_file(path);
}

std::string RunManifest::id() const {
    const json core = {{"tool_version", std::string(kToolVersion)},
                       {"command", command_},
                       {"config", json::parse(config_json_)},
                       {"inputs", inputs_}};
    return io::sha256_hex(core.dump()).substr(0, 16);
}

std::string RunManifest::to_json() const {
    std::time_t now = std::time(nullptr);
    if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) {
        long long v = 0;
        if (io::parse_int(epoch, v)) {
            now = static_cast<std::time_t>(v);
        }
    }
    std::tm tm{};
    gmtime_r(&now, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", &tm);
    const json doc = {{"manifest_id", id()},
                      {"tool_version", std::string(kToolVersion)},
                      {"command", command_},
                      {"config", json::parse(config_json_)},
                      {"inputs", inputs_},
                      {"artifacts", artifacts_},
                      {"timestamp", stamp}};
    return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------- shared helpers

namespace {

std::string fmt(double v) {
    if (!std::isfinite(v)) {
        return "nan";
    }
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.8g", v);
    return buf;
}

std::string manifest_line(const RunManifest& m) { return "# manifest_id=" + m.id() + "\n"; }

struct Corpus {
    LayoutConfig layout;
    std::vector<QuestionRecord> records;
    std::vector<std::vector<WordBox>> boxes;
    std::map<std::string, std::size_t> index;
    std::vector<std::string> warnings;
};

Corpus load_and_layout(const fs::path& corpus_path, const std::optional<fs::path>& layout_config) {
    Corpus c;
    c.layout = layout_config ? load_layout_config(*layout_config) : LayoutConfig{};
    auto loaded = load_corpus(corpus_path);
    c.records = std::move(loaded.records);
    c.warnings = std::move(loaded.warnings);
    std::vector<std::string> problems;
    for (std::size_t i = 0; i < c.records.size(); ++i) {
        if (!c.index.emplace(c.records[i].id, i).second) {
            problems.push_back("duplicate question id '" + c.records[i].id + "'");
        }
        try {
            c.boxes.push_back(layout_passage(c.records[i], c.layout));
        } catch (const InputError& e) {
            problems.emplace_back(e.what());
            c.boxes.emplace_back();
        }
    }
    if (!problems.empty()) {
        std::string msg = "corpus problems:";
        for (const auto& p : problems) {
            msg += "\n  " + p;
        }
        throw InputError(msg);
    }
    return c;
}

/// Accepts a question type, a scope, or empty (everything).
std::function<bool(const QuestionRecord&)> question_filter(const std::string& spec) {
    if (spec.empty()) {
        return [](const QuestionRecord&) { return true; };
    }
    if (const auto type = parse_question_type(spec)) {
        return [t = *type](const QuestionRecord& r) { return r.type == t; };
    }
    if (const auto scope = parse_scope(spec)) {
        return [s = *scope](const QuestionRecord& r) { return r.scope() == s; };
    }
    throw InputError("--question-type: '" + spec + "' is neither a question type nor local/global");
}

void throw_if_problems(const std::vector<std::string>& problems, const std::string& title) {
    if (problems.empty()) {
        return;
    }
    std::string msg = title + " (" + std::to_string(problems.size()) + "):";
    for (const auto& p : problems) {
        msg += "\n  " + p;
    }
    throw InputError(msg);
}

struct DensityDiagnostics {
    std::size_t dropped_fixations = 0;
    std::size_t other_pass_fixations = 0;
};

/// Human attention density for each selected question (corpus order).
std::map<std::string, std::vector<double>> compute_densities(const Corpus& corpus, const std::vector<std::size_t>& selected,
                                                             const fs::path& fixation_path, int pass, bool include_incorrect,
                                                             std::vector<std::string>& problems,
                                                             DensityDiagnostics& diag) {
    const auto fixations = load_fixations(fixation_path);
    std::map<std::string, std::vector<FixationRecord>> by_question;
    std::set<std::string> unknown;
    for (const auto& f : fixations) {
        if (corpus.index.count(f.question_id) == 0) {
            unknown.insert(f.question_id);
            continue;
        }
        if (f.pass_index != pass) {
            ++diag.other_pass_fixations;
            continue;
        }
        by_question[f.question_id].push_back(f);
    }
    for (const auto& id : unknown) {
        problems.push_back("fixations reference question '" + id + "' which is not in the corpus");
    }
    std::map<std::string, std::vector<double>> out;
    for (const auto q : selected) {
        const auto& rec = corpus.records[q];
        const auto it = by_question.find(rec.id);
        if (it == by_question.end()) {
            problems.push_back("question '" + rec.id + "' has no pass-" + std::to_string(pass) + " fixations");
            continue;
        }
        const WordTimes times = fixation_word_times(it->second, corpus.boxes[q]);
        diag.dropped_fixations += times.dropped_fixations;
        try {
            out[rec.id] = attention_density(times, corpus.boxes[q], !include_incorrect).values;
        } catch (const AnalysisError& e) {
            problems.emplace_back(e.what());
        }
    }
    return out;
}

std::map<std::string, std::size_t> word_counts(const Corpus& corpus) {
    std::map<std::string, std::size_t> out;
    for (std::size_t i = 0; i < corpus.records.size(); ++i) {
        out[corpus.records[i].id] = corpus.boxes[i].size();
    }
    return out;
}

json layout_json(const LayoutConfig& cfg) { return json::parse(to_json(cfg)); }

}  // namespace

std::string format_word_boxes(const std::vector<std::pair<std::string, std::vector<WordBox>>>& laid_out) {
    std::string out =
        "question_id\tword_index\tword\tchar_start\tchar_end\tx\ty\twidth\theight\tsentence\tword_in_sentence\t"
        "paragraph\tword_in_paragraph\trow_in_paragraph\trow_in_passage\n";
    for (const auto& [id, boxes] : laid_out) {
        for (const auto& b : boxes) {
            out += id + '\t' + std::to_string(b.word_index_in_passage) + '\t' + b.word + '\t' +
                   std::to_string(b.char_span.start) + '\t' + std::to_string(b.char_span.end) + '\t' +
                   std::to_string(b.bbox.x) + '\t' + std::to_string(b.bbox.y) + '\t' + std::to_string(b.bbox.width) +
                   '\t' + std::to_string(b.bbox.height) + '\t' + std::to_string(b.sentence_index) + '\t' +
                   std::to_string(b.word_index_in_sentence) + '\t' + std::to_string(b.paragraph_index) + '\t' +
                   std::to_string(b.word_index_in_paragraph) + '\t' + std::to_string(b.row_in_paragraph) + '\t' +
                   std::to_string(b.row_in_passage) + '\n';
        }
    }
    return out;
}

// ---------------------------------------------------------------- layout

void run_layout(const LayoutCommandOptions& options, std::ostream& log) {
    const Corpus corpus = load_and_layout(options.corpus, options.layout_config);
    for (const auto& w : corpus.warnings) {
        log << "warning: " << w << '\n';
    }
    const json config = {{"layout", layout_json(corpus.layout)}};
    RunManifest manifest("layout", config.dump());
    manifest.add_input("corpus", options.corpus);
    if (options.layout_config) {
        manifest.add_input("layout_config", *options.layout_config);
    }
    manifest.add_artifact("word_boxes.tsv");

    std::vector<std::pair<std::string, std::vector<WordBox>>> laid_out;
    for (std::size_t i = 0; i < corpus.records.size(); ++i) {
        laid_out.emplace_back(corpus.records[i].id, corpus.boxes[i]);
    }
    fs::create_directories(options.out_dir);
    io::write_file(options.out_dir / "word_boxes.tsv", manifest_line(manifest) + format_word_boxes(laid_out));
    io::write_file(options.out_dir / "manifest.json", manifest.to_json());
    log << "laid out " << corpus.records.size() << " questions -> " << (options.out_dir / "word_boxes.tsv").string()
        << '\n';
}

// ---------------------------------------------------------------- analyze

namespace {

struct QuestionData {
    std::size_t corpus_index = 0;
    std::string id;
    QuestionType type = QuestionType::Fact;
    std::vector<double> density;
    std::map<std::string, FeatureMatrix> blocks;  ///< "textual", "layout", "relevance", "dnn:<model>"
};

struct FeatureSet {
    std::string name;
    std::vector<std::string> blocks;
};

/// Per-question sums for recomputing a pooled correlation over any question multiset.
struct CorrelationSums {
    double n = 0, sp = 0, sy = 0, spp = 0, syy = 0, spy = 0;

    CorrelationSums& operator+=(const CorrelationSums& o) {
        n += o.n;
        sp += o.sp;
        sy += o.sy;
        spp += o.spp;
        syy += o.syy;
        spy += o.spy;
        return *this;
    }
    double correlation() const {
        const double vp = spp - sp * sp / n;
        const double vy = syy - sy * sy / n;
        if (!(vp > 0.0) || !(vy > 0.0)) {
            return 0.0;
        }
        return std::clamp((spy - sp * sy / n) / std::sqrt(vp * vy), -1.0, 1.0);
    }
};

struct CellResult {
    RegressionReport report;
    PermutationResult permutation;
};

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        out += (i ? sep : "") + parts[i];
    }
    return out;
}

}  // namespace

AnalysisResult run_analyze(const AnalyzeCommandOptions& options, std::ostream& log) {
    if (options.permutations < 1 || options.bootstraps < 1) {
        throw InputError("--perms and --boots must be positive");
    }
    if (options.pass != 1 && options.pass != 2) {
        throw InputError("--pass must be 1 or 2");
    }
    const Corpus corpus = load_and_layout(options.corpus, options.layout_config);
    const auto keep = question_filter(options.question_type);
    std::vector<std::size_t> selected;
    for (std::size_t i = 0; i < corpus.records.size(); ++i) {
        if (keep(corpus.records[i])) {
            selected.push_back(i);
        }
    }
    AnalysisResult result;
    result.warnings = corpus.warnings;

    const FrequencyTable freq = FrequencyTable::load(options.freq_table);
    const auto relevance = load_relevance(options.relevance, word_counts(corpus));
    std::vector<std::string> problems;
    DensityDiagnostics diag;
    const auto densities = compute_densities(corpus, selected, options.fixations, options.pass, options.include_incorrect,
                                             problems, diag);

    // Attention: one checkpoint per model.
    std::map<std::string, std::map<std::string, WordAttentionMatrix>> dnn;  // model -> question -> matrix
    std::map<std::string, std::int64_t> dnn_step;
    std::size_t truncated = 0;
    if (options.attention) {
        auto records = load_attention_path(*options.attention);
        for (const auto& r : records) {
            if (r.truncated) {
                continue;
            }
            auto& step = dnn_step.try_emplace(r.model_name, r.checkpoint_step).first->second;
            if (options.checkpoint_step) {
                step = *options.checkpoint_step;
            } else {
                step = std::max(step, r.checkpoint_step);
            }
        }
        std::set<std::pair<std::string, std::string>> seen;
        for (const auto& r : records) {
            if (r.truncated) {
                ++truncated;
                continue;
            }
            if (r.checkpoint_step != dnn_step[r.model_name]) {
                continue;
            }
            const auto it = corpus.index.find(r.question_id);
            if (it == corpus.index.end()) {
                problems.push_back("attention references question '" + r.question_id + "' which is not in the corpus");
                continue;
            }
            if (!seen.insert({r.model_name, r.question_id}).second) {
                problems.push_back("attention has duplicate records for question '" + r.question_id + "', model '" +
                                   r.model_name + "'");
                continue;
            }
            if (!keep(corpus.records[it->second])) {
                continue;
            }
            try {
                dnn[r.model_name].emplace(r.question_id, tokens_to_words(r, corpus.boxes[it->second]));
            } catch (const InputError& e) {
                problems.emplace_back(e.what());
            }
        }
        if (truncated > 0) {
            result.warnings.push_back(std::to_string(truncated) + " truncated attention records excluded");
        }
    }

    std::vector<QuestionData> questions;
    for (const auto q : selected) {
        const auto& rec = corpus.records[q];
        const auto d = densities.find(rec.id);
        const auto rel = relevance.find(rec.id);
        if (rel == relevance.end()) {
            problems.push_back("question '" + rec.id + "' has no relevance annotation");
        }
        for (const auto& [model, mats] : dnn) {
            if (mats.count(rec.id) == 0) {
                problems.push_back("question '" + rec.id + "' has no attention record for model '" + model + "'");
            }
        }
        if (d == densities.end() || rel == relevance.end()) {
            continue;
        }
        QuestionData qd;
        qd.corpus_index = q;
        qd.id = rec.id;
        qd.type = rec.type;
        qd.density = d->second;
        qd.blocks["textual"] = textual_features(rec.id, corpus.boxes[q], freq);
        qd.blocks["layout"] = layout_features(rec.id, corpus.boxes[q]);
        qd.blocks["relevance"] = relevance_features(rel->second);
        for (const auto& [model, mats] : dnn) {
            const auto m = mats.find(rec.id);
            if (m != mats.end()) {
                qd.blocks["dnn:" + model] = attention_features(m->second);
            }
        }
        questions.push_back(std::move(qd));
    }
    throw_if_problems(problems, "input alignment problems");
    if (questions.empty()) {
        throw InputError("no questions selected for analysis");
    }

    // Feature sets and residualization modes.
    std::vector<FeatureSet> sets = {{"textual", {"textual"}},
                                    {"layout", {"layout"}},
                                    {"relevance", {"relevance"}},
                                    {"textual+layout+relevance", {"textual", "layout", "relevance"}}};
    std::vector<std::string> dnn_blocks;
    for (const auto& [model, mats] : dnn) {
        sets.push_back({"dnn:" + model, {"dnn:" + model}});
        dnn_blocks.push_back("dnn:" + model);
    }
    struct ResidualMode {
        std::string label;  // empty = raw density
        std::vector<std::string> blocks;
    };
    std::vector<ResidualMode> modes = {{"", {}}};
    for (const auto& names : options.residualize) {
        ResidualMode mode;
        for (const auto& n : names) {
            if (n == "dnn") {
                mode.blocks.insert(mode.blocks.end(), dnn_blocks.begin(), dnn_blocks.end());
            } else if (n == "textual" || n == "layout" || n == "relevance" ||
                       std::find(dnn_blocks.begin(), dnn_blocks.end(), n) != dnn_blocks.end()) {
                mode.blocks.push_back(n);
            } else {
                throw InputError("--residualize: unknown feature set '" + n + "'");
            }
        }
        if (mode.blocks.empty()) {
            throw InputError("--residualize: empty feature list");
        }
        mode.label = join(names, "+");
        modes.push_back(std::move(mode));
    }

    // Group questions by type.
    std::map<QuestionType, std::vector<std::size_t>> by_type;
    for (std::size_t i = 0; i < questions.size(); ++i) {
        by_type[questions[i].type].push_back(i);
    }
    for (auto it = by_type.begin(); it != by_type.end();) {
        if (it->second.size() < static_cast<std::size_t>(kFolds)) {
            result.warnings.push_back("question type " + std::string(to_string(it->first)) + " has " +
                                      std::to_string(it->second.size()) + " questions (< " + std::to_string(kFolds) +
                                      " folds); skipped");
            it = by_type.erase(it);
        } else {
            ++it;
        }
    }
    if (by_type.empty()) {
        throw AnalysisError("no question type has enough questions for " + std::to_string(kFolds) + "-fold CV");
    }

    const auto features_for = [&](const std::vector<std::size_t>& idx, const std::vector<std::string>& blocks) {
        std::vector<FeatureMatrix> out;
        out.reserve(idx.size());
        for (const auto i : idx) {
            std::vector<FeatureMatrix> parts;
            for (const auto& b : blocks) {
                parts.push_back(questions[i].blocks.at(b));
            }
            out.push_back(hconcat(parts));
        }
        return out;
    };
    const auto targets_for = [&](const std::vector<std::size_t>& idx) {
        std::vector<std::vector<double>> out;
        for (const auto i : idx) {
            out.push_back(questions[i].density);
        }
        return out;
    };

    // cells[mode][set][type]
    std::map<std::string, std::map<std::string, std::map<QuestionType, CellResult>>> cells;
    std::map<std::string, std::map<std::string, std::map<std::string, CorrelationSums>>> sums;  // mode/set/question
    for (const auto& [type, idx] : by_type) {
        const std::string type_name(to_string(type));
        const std::uint64_t fold_seed = derive_seed(options.seed, "folds/" + type_name);
        const auto targets = targets_for(idx);
        for (const auto& mode : modes) {
            Eigen::VectorXd residual_target;
            if (!mode.blocks.empty()) {
                const DesignMatrix base = DesignMatrix::build(features_for(idx, mode.blocks), targets);
                residual_target = znorm_per_block(base.questions, residualize(base));
            }
            for (const auto& set : sets) {
                const bool overlaps = std::any_of(set.blocks.begin(), set.blocks.end(), [&](const std::string& b) {
                    return std::find(mode.blocks.begin(), mode.blocks.end(), b) != mode.blocks.end();
                });
                if (overlaps) {
                    continue;
                }
                DesignMatrix design = DesignMatrix::build(features_for(idx, set.blocks), targets);
                if (!mode.blocks.empty()) {
                    design.target = residual_target;
                }
                const std::string label = mode.label.empty() ? set.name : set.name + "~" + mode.label;
                log << "  " << type_name << " / " << label << '\n';
                CellResult cell;
                const CrossValidator cv(design, kFolds, fold_seed, options.pool);
                const CvResult cvr = cv.evaluate(design.target);
                const OlsFit fit = ols_fit(design.features, design.target);
                cell.report.feature_set = label;
                cell.report.question_type = type_name;
                cell.report.fold_accuracies = cvr.fold_accuracies;
                cell.report.accuracy = cvr.accuracy;
                cell.report.coefficients = fit.coefficients;
                cell.report.intercept = fit.intercept;
                cell.report.seed = fold_seed;
                cell.report.pool_mode = options.pool;
                cell.report.n_questions = idx.size();
                cell.report.n_words = static_cast<std::size_t>(design.n_rows());
                cell.permutation = permutation_test(cv, design.target,
                                                    derive_seed(options.seed, "permutation/" + type_name + "/" + label),
                                                    options.permutations, options.shuffle);
                for (const auto& b : design.questions) {
                    CorrelationSums s;
                    for (Eigen::Index r = b.offset; r < b.offset + b.count; ++r) {
                        const double p = cvr.predictions(r);
                        const double y = design.target(r);
                        s += CorrelationSums{1, p, y, p * p, y * y, p * y};
                    }
                    sums[mode.label][set.name][b.question_id] = s;
                }
                cells[mode.label][set.name].emplace(type, std::move(cell));
            }
        }
    }

    // Table rows: per type, then per scope (mean over the scope's types).
    std::vector<double> null_means;
    for (const auto& mode : modes) {
        for (const auto& set : sets) {
            const auto mode_it = cells.find(mode.label);
            if (mode_it == cells.end() || mode_it->second.count(set.name) == 0) {
                continue;
            }
            const auto& per_type = mode_it->second.at(set.name);
            const std::string label = mode.label.empty() ? set.name : set.name + "~" + mode.label;
            for (const auto& [type, cell] : per_type) {
                AnalysisRow row;
                row.feature_set = label;
                row.question_type = std::string(to_string(type));
                row.n_questions = cell.report.n_questions;
                row.n_words = cell.report.n_words;
                row.accuracy = cell.report.accuracy;
                row.fold_accuracies = cell.report.fold_accuracies;
                row.p_perm = cell.permutation.p_value;
                result.rows.push_back(std::move(row));
            }
            for (const Scope scope : {Scope::Local, Scope::Global}) {
                std::vector<const CellResult*> members;
                for (const auto& [type, cell] : per_type) {
                    if (scope_of(type) == scope) {
                        members.push_back(&cell);
                    }
                }
                if (members.empty()) {
                    continue;
                }
                const auto m = static_cast<double>(members.size());
                AnalysisRow row;
                row.feature_set = label;
                row.question_type = std::string(to_string(scope));
                row.fold_accuracies.assign(static_cast<std::size_t>(kFolds), 0.0);
                std::vector<double> nulls(members.front()->permutation.null_accuracies.size(), 0.0);
                for (const CellResult* c : members) {
                    row.n_questions += c->report.n_questions;
                    row.n_words += c->report.n_words;
                    row.accuracy += c->report.accuracy / m;
                    for (std::size_t f = 0; f < row.fold_accuracies.size(); ++f) {
                        row.fold_accuracies[f] += c->report.fold_accuracies[f] / m;
                    }
                    for (std::size_t i = 0; i < nulls.size(); ++i) {
                        nulls[i] += c->permutation.null_accuracies[i] / m;
                    }
                }
                row.p_perm = permutation_p_value(row.accuracy, nulls);
                result.rows.push_back(std::move(row));
            }
        }
    }
    {
        std::vector<double> ps;
        for (const auto& r : result.rows) {
            ps.push_back(r.p_perm);
        }
        const auto adjusted = fdr_correct(ps);
        for (std::size_t i = 0; i < result.rows.size(); ++i) {
            result.rows[i].p_fdr = adjusted[i];
        }
    }

    // Local vs global: pooled out-of-fold correlation, global questions resampled.
    for (const auto& mode : modes) {
        for (const auto& set : sets) {
            const auto mode_it = sums.find(mode.label);
            if (mode_it == sums.end() || mode_it->second.count(set.name) == 0) {
                continue;
            }
            const auto& per_question = mode_it->second.at(set.name);
            CorrelationSums local;
            std::vector<CorrelationSums> global;
            for (const auto& q : questions) {
                const auto it = per_question.find(q.id);
                if (it == per_question.end()) {
                    continue;
                }
                if (scope_of(q.type) == Scope::Local) {
                    local += it->second;
                } else {
                    global.push_back(it->second);
                }
            }
            if (local.n == 0 || global.empty()) {
                continue;
            }
            const std::string label = mode.label.empty() ? set.name : set.name + "~" + mode.label;
            const auto statistic = [&global](std::span<const std::size_t> idx) {
                CorrelationSums s;
                for (const auto i : idx) {
                    s += global[i];
                }
                return s.correlation();
            };
            ScopeComparison cmp;
            cmp.feature_set = label;
            cmp.result = bootstrap_compare(local.correlation(), global.size(), statistic, options.bootstraps,
                                           derive_seed(options.seed, "bootstrap/" + label));
            result.comparisons.push_back(std::move(cmp));
        }
    }
    if (!result.comparisons.empty()) {
        std::vector<double> ps;
        for (const auto& c : result.comparisons) {
            ps.push_back(c.result.p_value);
        }
        const auto adjusted = fdr_correct(ps);
        for (std::size_t i = 0; i < result.comparisons.size(); ++i) {
            result.comparisons[i].p_fdr = adjusted[i];
        }
    }

    // Outputs.
    std::vector<json> residual_modes;
    for (const auto& names : options.residualize) {
        residual_modes.push_back(names);
    }
    const json config = {{"layout", layout_json(corpus.layout)},
                         {"seed", options.seed},
                         {"folds", kFolds},
                         {"permutations", options.permutations},
                         {"permutations_non_default", options.permutations != kDefaultPermutations},
                         {"bootstraps", options.bootstraps},
                         {"pool", std::string(to_string(options.pool))},
                         {"shuffle", options.shuffle == ShuffleScope::WithinPassage ? "within-passage" : "across-passages"},
                         {"residualize", residual_modes},
                         {"pass", options.pass},
                         {"include_incorrect", options.include_incorrect},
                         {"question_type", options.question_type},
                         {"checkpoint_step", options.checkpoint_step ? json(*options.checkpoint_step) : json(nullptr)},
                         {"frequency_smoothing", "ln(per_million + 1)"},
                         {"zscore", "population sd, per passage; constant -> 0"},
                         {"attention_zscored", true},
                         {"plots", options.plots}};
    RunManifest manifest("analyze", config.dump());
    manifest.add_input("corpus", options.corpus);
    manifest.add_input("fixations", options.fixations);
    manifest.add_input("relevance", options.relevance);
    manifest.add_input("freq_table", options.freq_table);
    if (options.attention) {
        manifest.add_input("attention", *options.attention);
    }
    if (options.layout_config) {
        manifest.add_input("layout_config", *options.layout_config);
    }
    for (const auto* name : {"regression_report.csv", "bootstrap.csv", "summary.json"}) {
        manifest.add_artifact(name);
    }
    if (options.plots) {
        manifest.add_artifact("regression_report.svg");
    }
    result.manifest_id = manifest.id();

    std::string table = manifest_line(manifest) + "feature_set,question_type,n_questions,n_words,accuracy";
    for (int f = 1; f <= kFolds; ++f) {
        table += ",fold" + std::to_string(f);
    }
    table += ",p_perm,p_fdr\n";
    for (const auto& r : result.rows) {
        table += r.feature_set + ',' + r.question_type + ',' + std::to_string(r.n_questions) + ',' +
                 std::to_string(r.n_words) + ',' + fmt(r.accuracy);
        for (const double f : r.fold_accuracies) {
            table += ',' + fmt(f);
        }
        table += ',' + fmt(r.p_perm) + ',' + fmt(r.p_fdr) + '\n';
    }
    std::string boot = manifest_line(manifest) +
                       "feature_set,local_accuracy,global_accuracy,difference,p_boot,p_fdr,global_bca_low,"
                       "global_bca_high,n_boot,seed\n";
    for (const auto& c : result.comparisons) {
        boot += c.feature_set + ',' + fmt(c.result.observed_a) + ',' + fmt(c.result.observed_b) + ',' +
                fmt(c.result.observed_difference) + ',' + fmt(c.result.p_value) + ',' + fmt(c.p_fdr) + ',' +
                fmt(c.result.bca_low) + ',' + fmt(c.result.bca_high) + ',' +
                std::to_string(c.result.resampled_statistics.size()) + ',' + std::to_string(c.result.seed) + '\n';
    }

    json summary = {{"manifest_id", manifest.id()}, {"config", config}};
    json rows = json::array();
    for (const auto& r : result.rows) {
        rows.push_back({{"feature_set", r.feature_set},
                        {"question_type", r.question_type},
                        {"n_questions", r.n_questions},
                        {"n_words", r.n_words},
                        {"accuracy", r.accuracy},
                        {"fold_accuracies", r.fold_accuracies},
                        {"p_perm", r.p_perm},
                        {"p_fdr", r.p_fdr}});
    }
    json comparisons = json::array();
    for (const auto& c : result.comparisons) {
        comparisons.push_back({{"feature_set", c.feature_set},
                               {"local_accuracy", c.result.observed_a},
                               {"global_accuracy", c.result.observed_b},
                               {"p_boot", c.result.p_value},
                               {"p_fdr", c.p_fdr},
                               {"global_bca_95", {c.result.bca_low, c.result.bca_high}}});
    }
    json coefficients = json::object();
    for (const auto& [mode_label, per_set] : cells) {
        for (const auto& [set_name, per_type] : per_set) {
            for (const auto& [type, cell] : per_type) {
                coefficients[cell.report.feature_set][cell.report.question_type] = {
                    {"beta", std::vector<double>(cell.report.coefficients.data(),
                                                 cell.report.coefficients.data() + cell.report.coefficients.size())},
                    {"intercept", cell.report.intercept}};
            }
        }
    }
    summary["rows"] = std::move(rows);
    summary["bootstrap"] = std::move(comparisons);
    summary["coefficients"] = std::move(coefficients);
    summary["diagnostics"] = {{"questions", questions.size()},
                              {"dropped_fixations", diag.dropped_fixations},
                              {"other_pass_fixations", diag.other_pass_fixations},
                              {"truncated_attention_records", truncated},
                              {"dnn_checkpoint_steps", dnn_step},
                              {"warnings", result.warnings}};

    fs::create_directories(options.out_dir);
    io::write_file(options.out_dir / "regression_report.csv", table);
    io::write_file(options.out_dir / "bootstrap.csv", boot);
    io::write_file(options.out_dir / "summary.json", summary.dump(2) + "\n");
    io::write_file(options.out_dir / "manifest.json", manifest.to_json());
    if (options.plots) {
        std::vector<plot::BarGroup> groups;
        for (const auto& r : result.rows) {
            if (r.question_type != "local" && r.question_type != "global") {
                continue;
            }
            auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) { return g.label == r.feature_set; });
            if (it == groups.end()) {
                groups.push_back({r.feature_set, {}});
                it = std::prev(groups.end());
            }
            it->bars.emplace_back(r.question_type, r.accuracy);
        }
        io::write_file(options.out_dir / "regression_report.svg",
                       plot::render_bars_svg("Prediction of human attention", "prediction accuracy (r)", groups));
    }
    for (const auto& w : result.warnings) {
        log << "warning: " << w << '\n';
    }
    return result;
}

// ---------------------------------------------------------------- scan

ScanResult run_scan(const ScanCommandOptions& options, std::ostream& log) {
    const Corpus corpus = load_and_layout(options.corpus, options.layout_config);
    const auto keep = question_filter(options.question_type);
    const FrequencyTable freq = FrequencyTable::load(options.freq_table);
    const auto relevance = load_relevance(options.relevance, word_counts(corpus));
    const auto records = load_attention_path(options.attention);

    std::vector<std::string> problems;
    // model -> step -> question -> record
    std::map<std::string, std::map<std::int64_t, std::map<std::string, const AttentionRecord*>>> grouped;
    std::size_t truncated = 0;
    for (const auto& r : records) {
        if (r.truncated) {
            ++truncated;
            continue;
        }
        const auto it = corpus.index.find(r.question_id);
        if (it == corpus.index.end()) {
            problems.push_back("attention references question '" + r.question_id + "' which is not in the corpus");
            continue;
        }
        if (!keep(corpus.records[it->second])) {
            continue;
        }
        if (!grouped[r.model_name][r.checkpoint_step].emplace(r.question_id, &r).second) {
            problems.push_back("duplicate attention record: model '" + r.model_name + "', step " +
                               std::to_string(r.checkpoint_step) + ", question '" + r.question_id + "'");
        }
    }
    if (grouped.empty() && problems.empty()) {
        throw InputError("no usable attention records in " + options.attention.string());
    }

    // Question set per model = questions of its first checkpoint; all checkpoints must match.
    std::map<std::string, std::vector<std::string>> model_questions;
    for (const auto& [model, steps] : grouped) {
        std::vector<std::string> ids;
        for (const auto& [id, rec] : steps.begin()->second) {
            ids.push_back(id);
        }
        for (const auto& [step, by_q] : steps) {
            std::vector<std::string> here;
            for (const auto& [id, rec] : by_q) {
                here.push_back(id);
            }
            if (here != ids) {
                problems.push_back("model '" + model + "': step " + std::to_string(step) +
                                   " covers a different question set than step " + std::to_string(steps.begin()->first));
            }
        }
        for (const auto& id : ids) {
            if (relevance.count(id) == 0) {
                problems.push_back("question '" + id + "' has no relevance annotation");
            }
        }
        model_questions[model] = ids;
    }

    std::map<std::string, std::vector<double>> densities;
    DensityDiagnostics diag;
    if (options.fixations) {
        std::set<std::size_t> needed;
        for (const auto& [model, ids] : model_questions) {
            for (const auto& id : ids) {
                needed.insert(corpus.index.at(id));
            }
        }
        densities = compute_densities(corpus, std::vector<std::size_t>(needed.begin(), needed.end()), *options.fixations,
                                      options.pass, options.include_incorrect, problems, diag);
    }
    throw_if_problems(problems, "input alignment problems");

    const ScanOptions scan{kFolds, derive_seed(options.seed, "scan/folds"), options.pool};
    ScanResult result;
    std::string heads_csv = "model,checkpoint_step,layer,head,textual_accuracy,relevance_accuracy\n";
    std::string layers_csv = "model,checkpoint_step,layer,textual_accuracy,relevance_accuracy\n";
    std::string traj_csv =
        "model,checkpoint_step,task_accuracy,task_ties,human_similarity_accuracy,last_layer_textual_accuracy,"
        "last_layer_relevance_accuracy\n";
    json summary_models = json::array();
    std::vector<plot::Series> traj_series;
    std::vector<plot::Series> scatter_series;

    for (const auto& [model, steps] : grouped) {
        const auto& ids = model_questions.at(model);
        ScanInputs inputs;
        std::vector<std::vector<double>> human;
        for (const auto& id : ids) {
            const auto q = corpus.index.at(id);
            inputs.textual.push_back(textual_features(id, corpus.boxes[q], freq));
            inputs.relevance.push_back(relevance.at(id));
            if (options.fixations) {
                human.push_back(densities.at(id));
            }
        }
        if (options.fixations) {
            inputs.human_density = std::move(human);
        }
        std::vector<CheckpointInput> checkpoints;
        for (const auto& [step, by_q] : steps) {
            CheckpointInput c;
            c.model = model;
            c.checkpoint_step = step;
            for (const auto& id : ids) {
                const AttentionRecord& rec = *by_q.at(id);
                const auto q = corpus.index.at(id);
                c.attention.push_back(tokens_to_words(rec, corpus.boxes[q]));
                c.option_scores.push_back(rec.option_scores);
                c.correct_index.push_back(corpus.records[q].correct_index);
            }
            checkpoints.push_back(std::move(c));
        }
        log << "  scanning " << model << " (" << checkpoints.size() << " checkpoints, " << ids.size()
            << " questions)\n";
        const auto points = trajectory(checkpoints, inputs, scan);
        const TrendSummary trend = summarize_trend(points);

        ScanModelResult mr;
        mr.model = model;
        mr.last_layer_relevance_monotone = trend.last_layer_relevance_monotone;
        mr.finetuned_exceeds_pretrained = trend.finetuned_exceeds_pretrained;
        plot::Series rel_series{model + " relevance (last layer)", {}, {}};
        json model_points = json::array();
        for (const auto& p : points) {
            mr.steps.push_back(p.checkpoint_step);
            plot::Series scatter{model + " step " + std::to_string(p.checkpoint_step), {}, {}};
            for (const auto& h : p.heads) {
                heads_csv += model + ',' + std::to_string(p.checkpoint_step) + ',' + std::to_string(h.layer) + ',' +
                             std::to_string(h.head) + ',' + fmt(h.textual_accuracy) + ',' + fmt(h.relevance_accuracy) +
                             '\n';
                scatter.x.push_back(h.textual_accuracy);
                scatter.y.push_back(h.relevance_accuracy);
            }
            scatter_series.push_back(std::move(scatter));
            for (const auto& l : p.layers) {
                layers_csv += model + ',' + std::to_string(p.checkpoint_step) + ',' + std::to_string(l.layer) + ',' +
                              fmt(l.textual_accuracy) + ',' + fmt(l.relevance_accuracy) + '\n';
            }
            const auto& last = p.layers.back();
            if (points.size() >= 2) {
                traj_csv += model + ',' + std::to_string(p.checkpoint_step) + ',' + fmt(p.task.accuracy) + ',' +
                            std::to_string(p.task.ties) + ',' +
                            (p.human_similarity_accuracy ? fmt(*p.human_similarity_accuracy) : std::string()) + ',' +
                            fmt(last.textual_accuracy) + ',' + fmt(last.relevance_accuracy) + '\n';
                rel_series.x.push_back(static_cast<double>(p.checkpoint_step));
                rel_series.y.push_back(last.relevance_accuracy);
            }
            model_points.push_back({{"checkpoint_step", p.checkpoint_step},
                                    {"task_accuracy", p.task.accuracy},
                                    {"task_ties", p.task.ties},
                                    {"human_similarity_accuracy",
                                     p.human_similarity_accuracy ? json(*p.human_similarity_accuracy) : json(nullptr)},
                                    {"last_layer_textual_accuracy", last.textual_accuracy},
                                    {"last_layer_relevance_accuracy", last.relevance_accuracy}});
        }
        if (points.size() >= 2) {
            result.wrote_trajectory = true;
            traj_series.push_back(std::move(rel_series));
        }
        const auto opt_json = [](const std::optional<bool>& v) { return v ? json(*v) : json(nullptr); };
        summary_models.push_back({{"model", model},
                                  {"n_questions", ids.size()},
                                  {"points", std::move(model_points)},
                                  {"last_layer_relevance_monotone", opt_json(trend.last_layer_relevance_monotone)},
                                  {"finetuned_exceeds_pretrained", opt_json(trend.finetuned_exceeds_pretrained)}});
        result.models.push_back(std::move(mr));
    }

    const json config = {{"layout", layout_json(corpus.layout)},
                         {"seed", options.seed},
                         {"folds", kFolds},
                         {"pool", std::string(to_string(options.pool))},
                         {"pass", options.pass},
                         {"include_incorrect", options.include_incorrect},
                         {"question_type", options.question_type},
                         {"attention_zscored", true},
                         {"plots", options.plots}};
    RunManifest manifest("scan", config.dump());
    manifest.add_input("attention", options.attention);
    manifest.add_input("corpus", options.corpus);
    manifest.add_input("relevance", options.relevance);
    manifest.add_input("freq_table", options.freq_table);
    if (options.fixations) {
        manifest.add_input("fixations", *options.fixations);
    }
    if (options.layout_config) {
        manifest.add_input("layout_config", *options.layout_config);
    }
    manifest.add_artifact("head_sensitivity.csv");
    manifest.add_artifact("layer_sensitivity.csv");
    if (result.wrote_trajectory) {
        manifest.add_artifact("trajectory.csv");
    }
    manifest.add_artifact("summary.json");
    if (options.plots) {
        manifest.add_artifact("head_sensitivity.svg");
        if (result.wrote_trajectory) {
            manifest.add_artifact("trajectory.svg");
        }
    }
    result.manifest_id = manifest.id();

    fs::create_directories(options.out_dir);
    io::write_file(options.out_dir / "head_sensitivity.csv", manifest_line(manifest) + heads_csv);
    io::write_file(options.out_dir / "layer_sensitivity.csv", manifest_line(manifest) + layers_csv);
    if (result.wrote_trajectory) {
        io::write_file(options.out_dir / "trajectory.csv", manifest_line(manifest) + traj_csv);
    }
    const json summary = {{"manifest_id", manifest.id()},
                          {"config", config},
                          {"models", std::move(summary_models)},
                          {"diagnostics",
                           {{"truncated_attention_records", truncated},
                            {"dropped_fixations", diag.dropped_fixations},
                            {"warnings", corpus.warnings}}}};
    io::write_file(options.out_dir / "summary.json", summary.dump(2) + "\n");
    io::write_file(options.out_dir / "manifest.json", manifest.to_json());
    if (options.plots) {
        plot::XYPlot scatter{"Head sensitivity", "textual accuracy", "relevance accuracy", false, false,
                             std::move(scatter_series)};
        io::write_file(options.out_dir / "head_sensitivity.svg", plot::render_svg(scatter));
        if (result.wrote_trajectory) {
            // Step 0 has no place on a log axis; it is drawn at the left edge.
            plot::XYPlot traj{"Fine-tuning trajectory", "fine-tuning step", "last-layer relevance accuracy", true, true,
                              std::move(traj_series)};
            io::write_file(options.out_dir / "trajectory.svg", plot::render_svg(traj));
        }
    }
    return result;
}

}  // namespace gazealign
