#include "gazealign/regression.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gazealign/error.hpp"
#include "gazealign/gaze.hpp"
#include "gazealign/random.hpp"

namespace gazealign {

namespace {

Eigen::VectorXd to_eigen(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> to_std(const Eigen::Ref<const Eigen::VectorXd>& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

}  // namespace

DesignMatrix DesignMatrix::build(std::span<const FeatureMatrix> features, std::span<const std::vector<double>> targets) {
    if (features.size() != targets.size()) {
        throw AnalysisError("design: " + std::to_string(features.size()) + " feature blocks but " +
                            std::to_string(targets.size()) + " targets");
    }
    DesignMatrix d;
    if (features.empty()) {
        return d;
    }
    d.feature_names = features.front().feature_names;
    Eigen::Index rows = 0;
    for (std::size_t q = 0; q < features.size(); ++q) {
        const auto& f = features[q];
        if (f.feature_names != d.feature_names) {
            throw AnalysisError("design: question '" + f.question_id + "' has a different feature set");
        }
        if (static_cast<std::size_t>(f.values.rows()) != targets[q].size()) {
            throw AnalysisError("design: question '" + f.question_id + "' has " + std::to_string(f.values.rows()) +
                                " feature rows but " + std::to_string(targets[q].size()) + " target values");
        }
        if (!f.values.allFinite() || !to_eigen(targets[q]).allFinite()) {
            throw AnalysisError("design: question '" + f.question_id + "' has non-finite values");
        }
        d.questions.push_back({f.question_id, rows, f.values.rows()});
        rows += f.values.rows();
    }
    d.features.resize(rows, static_cast<Eigen::Index>(d.feature_names.size()));
    d.target.resize(rows);
    for (std::size_t q = 0; q < features.size(); ++q) {
        const auto& block = d.questions[q];
        d.features.middleRows(block.offset, block.count) = znorm_columns(features[q]).values;
        d.target.segment(block.offset, block.count) = to_eigen(znorm(targets[q]));
    }
    return d;
}

DesignMatrix DesignMatrix::with_target(const Eigen::VectorXd& raw_target) const {
    if (raw_target.size() != n_rows()) {
        throw AnalysisError("design: target length does not match design rows");
    }
    DesignMatrix d = *this;
    d.target = znorm_per_block(questions, raw_target);
    return d;
}

DesignMatrix DesignMatrix::select_questions(std::span<const std::size_t> question_indices) const {
    DesignMatrix d;
    d.feature_names = feature_names;
    Eigen::Index rows = 0;
    for (const std::size_t q : question_indices) {
        rows += questions.at(q).count;
    }
    d.features.resize(rows, n_features());
    d.target.resize(rows);
    Eigen::Index offset = 0;
    for (const std::size_t q : question_indices) {
        const auto& b = questions[q];
        d.features.middleRows(offset, b.count) = features.middleRows(b.offset, b.count);
        d.target.segment(offset, b.count) = target.segment(b.offset, b.count);
        d.questions.push_back({b.question_id, offset, b.count});
        offset += b.count;
    }
    return d;
}

Eigen::VectorXd znorm_per_block(std::span<const QuestionBlock> blocks, const Eigen::VectorXd& values) {
    Eigen::VectorXd out(values.size());
    for (const auto& b : blocks) {
        const auto z = znorm(to_std(values.segment(b.offset, b.count)));
        out.segment(b.offset, b.count) = to_eigen(z);
    }
    return out;
}

Eigen::VectorXd OlsFit::predict(const Eigen::MatrixXd& features) const {
    return (features * coefficients).array() + intercept;
}

OlsFit ols_fit(const Eigen::MatrixXd& features, const Eigen::VectorXd& target) {
    const Eigen::Index n = features.rows();
    const Eigen::Index j = features.cols();
    if (target.size() != n) {
        throw AnalysisError("ols_fit: target length does not match feature rows");
    }
    if (n <= j + 1) {
        throw AnalysisError("underdetermined: " + std::to_string(n) + " rows for " + std::to_string(j) +
                            " features plus intercept");
    }
    if (!features.allFinite() || !target.allFinite()) {
        throw AnalysisError("ols_fit: non-finite input");
    }
    const Eigen::RowVectorXd means = features.colwise().mean();
    const double target_mean = target.mean();
    const Eigen::MatrixXd centered = features.rowwise() - means;
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(centered);
    OlsFit fit;
    fit.coefficients = cod.solve((target.array() - target_mean).matrix());
    fit.intercept = target_mean - means.dot(fit.coefficients);
    fit.rank = cod.rank();
    return fit;
}

double pearson(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b) {
    if (a.size() != b.size() || a.size() < 2) {
        throw AnalysisError("pearson: need two equal-length vectors of at least 2 values");
    }
    const Eigen::ArrayXd da = a.array() - a.mean();
    const Eigen::ArrayXd db = b.array() - b.mean();
    const double saa = da.square().sum();
    const double sbb = db.square().sum();
    if (!(saa > 0.0) || !(sbb > 0.0)) {
        return 0.0;
    }
    const double r = (da * db).sum() / std::sqrt(saa * sbb);
    return std::clamp(r, -1.0, 1.0);
}

std::vector<std::vector<std::size_t>> fold_split(std::size_t n_questions, int k, std::uint64_t seed) {
    if (k < 2) {
        throw AnalysisError("fold_split: k must be at least 2");
    }
    if (n_questions < static_cast<std::size_t>(k)) {
        throw AnalysisError("fold_split: " + std::to_string(n_questions) + " questions cannot fill " +
                            std::to_string(k) + " folds");
    }
    std::vector<std::size_t> order(n_questions);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    shuffle(std::span<std::size_t>(order), rng);
    std::vector<std::vector<std::size_t>> folds(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < order.size(); ++i) {
        folds[i % folds.size()].push_back(order[i]);
    }
    for (auto& f : folds) {
        std::sort(f.begin(), f.end());
    }
    return folds;
}

std::vector<std::vector<std::string>> fold_split(std::span<const std::string> question_ids, int k, std::uint64_t seed) {
    std::vector<std::string> sorted(question_ids.begin(), question_ids.end());
    std::sort(sorted.begin(), sorted.end());
    const auto idx = fold_split(sorted.size(), k, seed);
    std::vector<std::vector<std::string>> out;
    for (const auto& fold : idx) {
        auto& ids = out.emplace_back();
        for (const auto i : fold) {
            ids.push_back(sorted[i]);
        }
    }
    return out;
}

std::string_view to_string(PoolMode mode) {
    switch (mode) {
        case PoolMode::PerFold:
            return "per-fold";
        case PoolMode::PerQuestion:
            return "per-question";
        case PoolMode::Pooled:
            return "pooled";
    }
    return "per-fold";
}

PoolMode parse_pool_mode(std::string_view name) {
    if (name == "per-fold") {
        return PoolMode::PerFold;
    }
    if (name == "per-question") {
        return PoolMode::PerQuestion;
    }
    if (name == "pooled") {
        return PoolMode::Pooled;
    }
    throw InputError("unknown pool mode '" + std::string(name) + "' (per-fold, per-question, pooled)");
}

CrossValidator::CrossValidator(const DesignMatrix& design, int k, std::uint64_t seed, PoolMode mode)
    : questions_(design.questions), mode_(mode) {
    // Folds are drawn over question ids in sorted order, so the split is independent of stacking order.
    std::vector<std::size_t> by_id(questions_.size());
    std::iota(by_id.begin(), by_id.end(), std::size_t{0});
    std::sort(by_id.begin(), by_id.end(),
              [&](std::size_t a, std::size_t b) { return questions_[a].question_id < questions_[b].question_id; });
    const auto split = fold_split(questions_.size(), k, seed);

    const Eigen::Index n_features = design.n_features();
    std::vector<int> fold_of(questions_.size(), 0);
    for (std::size_t f = 0; f < split.size(); ++f) {
        for (const auto rank : split[f]) {
            fold_of[by_id[rank]] = static_cast<int>(f);
        }
    }
    folds_.resize(split.size());
    for (std::size_t q = 0; q < questions_.size(); ++q) {
        Fold& fold = folds_[static_cast<std::size_t>(fold_of[q])];
        fold.test_questions.push_back(q);
        for (std::size_t f = 0; f < folds_.size(); ++f) {
            auto& rows = f == static_cast<std::size_t>(fold_of[q]) ? folds_[f].test_rows : folds_[f].train_rows;
            for (Eigen::Index r = 0; r < questions_[q].count; ++r) {
                rows.push_back(questions_[q].offset + r);
            }
        }
    }
    for (std::size_t f = 0; f < folds_.size(); ++f) {
        Fold& fold = folds_[f];
        if (fold.test_rows.size() < 3) {
            throw AnalysisError("cross-validation: fold " + std::to_string(f + 1) + " holds " +
                                std::to_string(fold.test_rows.size()) + " words (need at least 3)");
        }
        const auto n_train = static_cast<Eigen::Index>(fold.train_rows.size());
        if (n_train <= n_features + 1) {
            throw AnalysisError("underdetermined: fold " + std::to_string(f + 1) + " trains on " +
                                std::to_string(n_train) + " words for " + std::to_string(n_features) +
                                " features; add more questions");
        }
        const Eigen::MatrixXd train = design.features(fold.train_rows, Eigen::all);
        fold.feature_means = train.colwise().mean();
        fold.solver.compute(train.rowwise() - fold.feature_means);
        fold.test_features = design.features(fold.test_rows, Eigen::all).rowwise() - fold.feature_means;
    }
}

CvResult CrossValidator::evaluate(const Eigen::VectorXd& target) const {
    CvResult result;
    result.predictions = Eigen::VectorXd::Zero(target.size());
    result.fold_accuracies.reserve(folds_.size());
    double question_sum = 0.0;
    for (const Fold& fold : folds_) {
        const Eigen::VectorXd train_target = target(fold.train_rows);
        const double mean = train_target.mean();
        const Eigen::VectorXd beta = fold.solver.solve((train_target.array() - mean).matrix());
        const Eigen::VectorXd pred = (fold.test_features * beta).array() + mean;
        result.predictions(fold.test_rows) = pred;
        if (mode_ == PoolMode::PerQuestion) {
            double fold_sum = 0.0;
            for (const auto q : fold.test_questions) {
                const auto& b = questions_[q];
                const double r = pearson(result.predictions.segment(b.offset, b.count), target.segment(b.offset, b.count));
                fold_sum += r;
                question_sum += r;
            }
            result.fold_accuracies.push_back(fold_sum / static_cast<double>(fold.test_questions.size()));
        } else {
            result.fold_accuracies.push_back(pearson(pred, target(fold.test_rows)));
        }
    }
    switch (mode_) {
        case PoolMode::PerFold:
            result.accuracy = std::accumulate(result.fold_accuracies.begin(), result.fold_accuracies.end(), 0.0) /
                              static_cast<double>(result.fold_accuracies.size());
            break;
        case PoolMode::PerQuestion:
            result.accuracy = question_sum / static_cast<double>(questions_.size());
            break;
        case PoolMode::Pooled:
            result.accuracy = pearson(result.predictions, target);
            break;
    }
    return result;
}

RegressionReport cv_accuracy(const DesignMatrix& design, int k, std::uint64_t seed, PoolMode mode) {
    const CrossValidator cv(design, k, seed, mode);
    CvResult res = cv.evaluate(design.target);
    const OlsFit fit = ols_fit(design.features, design.target);
    RegressionReport report;
    report.fold_accuracies = std::move(res.fold_accuracies);
    report.accuracy = res.accuracy;
    report.predictions = std::move(res.predictions);
    report.coefficients = fit.coefficients;
    report.intercept = fit.intercept;
    report.seed = seed;
    report.pool_mode = mode;
    report.n_questions = design.questions.size();
    report.n_words = static_cast<std::size_t>(design.n_rows());
    return report;
}

Eigen::VectorXd residualize(const DesignMatrix& design) {
    const OlsFit fit = ols_fit(design.features, design.target);
    return design.target - fit.predict(design.features);
}

}  // namespace gazealign
