#include "gazealign/layer_analysis.hpp"

#include <algorithm>
#include <map>

#include "gazealign/error.hpp"
#include "gazealign/parallel.hpp"

namespace gazealign {

namespace {

void check_alignment(std::span<const WordAttentionMatrix> attention, const ScanInputs& inputs) {
    if (attention.size() != inputs.textual.size() || attention.size() != inputs.relevance.size()) {
        throw InputError("scan: attention, textual features and relevance cover different question counts");
    }
    for (std::size_t q = 0; q < attention.size(); ++q) {
        const auto& id = attention[q].question_id;
        if (inputs.textual[q].question_id != id || inputs.relevance[q].question_id != id) {
            throw InputError("scan: question order mismatch at position " + std::to_string(q) + " ('" + id + "')");
        }
        if (static_cast<std::size_t>(attention[q].n_words()) != inputs.relevance[q].values.size() ||
            attention[q].n_words() != inputs.textual[q].n_words()) {
            throw InputError("scan: question '" + id + "' has mismatched word counts");
        }
    }
}

DesignMatrix design_without_target(std::span<const FeatureMatrix> features) {
    std::vector<std::vector<double>> zeros;
    zeros.reserve(features.size());
    for (const auto& f : features) {
        zeros.emplace_back(static_cast<std::size_t>(f.n_words()), 0.0);
    }
    return DesignMatrix::build(features, zeros);
}

Eigen::VectorXd stacked_row(std::span<const WordAttentionMatrix> attention, Eigen::Index row, Eigen::Index total) {
    Eigen::VectorXd out(total);
    Eigen::Index offset = 0;
    for (const auto& a : attention) {
        out.segment(offset, a.n_words()) = a.values.row(row).transpose();
        offset += a.n_words();
    }
    return out;
}

}  // namespace

std::vector<HeadSensitivity> head_sensitivity_scan(std::span<const WordAttentionMatrix> attention,
                                                   const ScanInputs& inputs, const ScanOptions& options) {
    check_alignment(attention, inputs);
    if (attention.empty()) {
        throw AnalysisError("scan: no questions");
    }
    const int n_layers = attention.front().n_layers;
    const int n_heads = attention.front().n_heads;
    for (const auto& a : attention) {
        if (a.n_layers != n_layers || a.n_heads != n_heads) {
            throw InputError("scan: question '" + a.question_id + "' has a different layer/head count");
        }
    }
    std::vector<FeatureMatrix> relevance;
    relevance.reserve(inputs.relevance.size());
    for (const auto& r : inputs.relevance) {
        relevance.push_back(relevance_features(r));
    }
    const DesignMatrix textual_design = design_without_target(inputs.textual);
    const DesignMatrix relevance_design = design_without_target(relevance);
    const CrossValidator textual_cv(textual_design, options.k, options.seed, options.pool);
    const CrossValidator relevance_cv(relevance_design, options.k, options.seed, options.pool);

    const auto n_rows = static_cast<std::size_t>(n_layers) * static_cast<std::size_t>(n_heads);
    std::vector<HeadSensitivity> out(n_rows);
    parallel_for(n_rows, [&](std::size_t r) {
        const int layer = static_cast<int>(r) / n_heads;
        const int head = static_cast<int>(r) % n_heads;
        try {
            const Eigen::VectorXd raw = stacked_row(attention, static_cast<Eigen::Index>(r), textual_design.n_rows());
            const Eigen::VectorXd target = znorm_per_block(textual_design.questions, raw);
            HeadSensitivity& h = out[r];
            h.model = attention.front().model_name;
            h.checkpoint_step = attention.front().checkpoint_step;
            h.layer = layer + 1;
            h.head = head + 1;
            h.textual_accuracy = textual_cv.evaluate(target).accuracy;
            h.relevance_accuracy = relevance_cv.evaluate(target).accuracy;
        } catch (const std::exception& e) {
            throw AnalysisError("layer " + std::to_string(layer + 1) + ", head " + std::to_string(head + 1) + ": " +
                                e.what());
        }
    });
    return out;
}

std::vector<LayerSensitivity> layer_means(std::span<const HeadSensitivity> heads) {
    std::map<int, std::pair<LayerSensitivity, int>> acc;
    for (const auto& h : heads) {
        auto& [layer, count] = acc[h.layer];
        layer.layer = h.layer;
        layer.textual_accuracy += h.textual_accuracy;
        layer.relevance_accuracy += h.relevance_accuracy;
        ++count;
    }
    std::vector<LayerSensitivity> out;
    for (auto& [index, entry] : acc) {
        auto [layer, count] = entry;
        layer.textual_accuracy /= count;
        layer.relevance_accuracy /= count;
        out.push_back(layer);
    }
    return out;
}

FeatureMatrix attention_features(const WordAttentionMatrix& attention) {
    FeatureMatrix m;
    m.question_id = attention.question_id;
    m.values = attention.values.transpose();
    for (int l = 1; l <= attention.n_layers; ++l) {
        for (int h = 1; h <= attention.n_heads; ++h) {
            m.feature_names.push_back("L" + std::to_string(l) + "H" + std::to_string(h));
        }
    }
    return m;
}

RegressionReport human_similarity(std::span<const WordAttentionMatrix> attention,
                                  std::span<const std::vector<double>> human_density, const ScanOptions& options) {
    if (attention.size() != human_density.size()) {
        throw InputError("human similarity: attention and human density cover different question counts");
    }
    std::vector<FeatureMatrix> features;
    features.reserve(attention.size());
    for (const auto& a : attention) {
        features.push_back(attention_features(a));
    }
    const DesignMatrix design = DesignMatrix::build(features, human_density);
    try {
        return cv_accuracy(design, options.k, options.seed, options.pool);
    } catch (const AnalysisError& e) {
        throw AnalysisError(std::string("human similarity: ") + e.what());
    }
}

int predicted_option(const std::array<double, 4>& scores, bool* tied) {
    int best = 0;
    bool tie = false;
    for (int i = 1; i < 4; ++i) {
        if (scores[static_cast<std::size_t>(i)] > scores[static_cast<std::size_t>(best)]) {
            best = i;
            tie = false;
        } else if (scores[static_cast<std::size_t>(i)] == scores[static_cast<std::size_t>(best)]) {
            tie = true;
        }
    }
    if (tied != nullptr) {
        *tied = tie;
    }
    return best;
}

TaskAccuracy task_accuracy(std::span<const std::array<double, 4>> option_scores, std::span<const int> correct_index) {
    if (option_scores.size() != correct_index.size()) {
        throw InputError("task accuracy: scores and answer keys differ in length");
    }
    TaskAccuracy out;
    out.n_questions = option_scores.size();
    if (out.n_questions == 0) {
        return out;
    }
    std::size_t correct = 0;
    for (std::size_t q = 0; q < option_scores.size(); ++q) {
        bool tied = false;
        if (predicted_option(option_scores[q], &tied) == correct_index[q]) {
            ++correct;
        }
        out.ties += tied ? 1 : 0;
    }
    out.accuracy = static_cast<double>(correct) / static_cast<double>(out.n_questions);
    return out;
}

std::vector<TrajectoryPoint> trajectory(std::span<const CheckpointInput> checkpoints, const ScanInputs& inputs,
                                        const ScanOptions& options) {
    std::vector<const CheckpointInput*> ordered;
    for (const auto& c : checkpoints) {
        ordered.push_back(&c);
    }
    std::sort(ordered.begin(), ordered.end(),
              [](const CheckpointInput* a, const CheckpointInput* b) { return a->checkpoint_step < b->checkpoint_step; });
    for (std::size_t i = 1; i < ordered.size(); ++i) {
        if (ordered[i]->checkpoint_step == ordered[i - 1]->checkpoint_step) {
            throw InputError("trajectory: duplicate checkpoint step " + std::to_string(ordered[i]->checkpoint_step));
        }
        if (ordered[i]->model != ordered[0]->model) {
            throw InputError("trajectory: checkpoints from different models ('" + ordered[0]->model + "', '" +
                             ordered[i]->model + "')");
        }
    }
    std::vector<TrajectoryPoint> points;
    for (const CheckpointInput* c : ordered) {
        TrajectoryPoint p;
        p.model = c->model;
        p.checkpoint_step = c->checkpoint_step;
        p.heads = head_sensitivity_scan(c->attention, inputs, options);
        p.layers = layer_means(p.heads);
        if (inputs.human_density) {
            p.human_similarity_accuracy = human_similarity(c->attention, *inputs.human_density, options).accuracy;
        }
        p.task = task_accuracy(c->option_scores, c->correct_index);
        points.push_back(std::move(p));
    }
    return points;
}

TrendSummary summarize_trend(std::span<const TrajectoryPoint> points) {
    TrendSummary out;
    if (points.size() < 2) {
        return out;
    }
    const auto last_layer = [](const TrajectoryPoint& p) { return p.layers.back().relevance_accuracy; };
    bool monotone = true;
    for (std::size_t i = 1; i < points.size(); ++i) {
        monotone = monotone && last_layer(points[i]) >= last_layer(points[i - 1]);
    }
    out.last_layer_relevance_monotone = monotone;
    out.last_layer_relevance_change = last_layer(points.back()) - last_layer(points.front());
    if (points.front().checkpoint_step == 0) {
        out.finetuned_exceeds_pretrained = last_layer(points.back()) > last_layer(points.front());
    }
    return out;
}

}  // namespace gazealign
