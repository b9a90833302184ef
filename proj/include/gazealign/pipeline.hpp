#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gazealign/corpus_layout.hpp"
#include "gazealign/regression.hpp"
#include "gazealign/stats.hpp"

namespace gazealign {

inline constexpr std::string_view kToolVersion = "0.3.0";
inline constexpr int kFolds = 5;

/// Provenance of one command run. Every artifact carries manifest_id, a digest
/// of everything except the timestamp.
class RunManifest {
public:
    RunManifest(std::string command, std::string config_json);

    /// Records the SHA-256 of an input file, or of every regular file under a directory.
    void add_input(const std::string& role, const std::filesystem::path& path);
    void add_artifact(const std::string& name) { artifacts_.push_back(name); }

    std::string id() const;
    /// Timestamp comes from SOURCE_DATE_EPOCH when set, otherwise the clock.
    std::string to_json() const;

private:
    std::string command_;
    std::string config_json_;
    std::map<std::string, std::string> inputs_;
    std::vector<std::string> artifacts_;
};

std::string format_word_boxes(const std::vector<std::pair<std::string, std::vector<WordBox>>>& laid_out);

struct LayoutCommandOptions {
    std::filesystem::path corpus;
    std::optional<std::filesystem::path> layout_config;
    std::filesystem::path out_dir;
};

/// Writes word_boxes.tsv and manifest.json into out_dir.
void run_layout(const LayoutCommandOptions& options, std::ostream& log);

struct AnalyzeCommandOptions {
    std::filesystem::path corpus;
    std::filesystem::path fixations;
    std::filesystem::path relevance;
    std::filesystem::path freq_table;
    std::optional<std::filesystem::path> attention;
    std::optional<std::filesystem::path> layout_config;
    std::filesystem::path out_dir;
    std::uint64_t seed = 1;
    int permutations = kDefaultPermutations;
    int bootstraps = kDefaultBootstraps;
    PoolMode pool = PoolMode::PerFold;
    ShuffleScope shuffle = ShuffleScope::WithinPassage;
    /// Each entry is a list of feature-set names regressed out of the target first.
    std::vector<std::vector<std::string>> residualize;
    int pass = 1;
    bool include_incorrect = false;
    /// A question type ("Fact") or a scope ("global"); empty = all.
    std::string question_type;
    /// Checkpoint used for the DNN feature set; default is each model's highest step.
    std::optional<std::int64_t> checkpoint_step;
    bool plots = false;
};

/// One cell of the accuracy table.
struct AnalysisRow {
    std::string feature_set;    ///< "textual", or "relevance~textual+layout" for a residualized target
    std::string question_type;  ///< a type name, or "local" / "global" for the scope aggregate
    std::size_t n_questions = 0;
    std::size_t n_words = 0;
    double accuracy = 0.0;
    std::vector<double> fold_accuracies;
    double p_perm = 1.0;
    double p_fdr = 1.0;
};

struct ScopeComparison {
    std::string feature_set;
    BootstrapResult result;
    double p_fdr = 1.0;
};

struct AnalysisResult {
    std::vector<AnalysisRow> rows;
    std::vector<ScopeComparison> comparisons;
    std::vector<std::string> warnings;
    std::string manifest_id;
};

/// Full accuracy table with permutation and bootstrap statistics; writes
/// regression_report.csv, bootstrap.csv, summary.json, manifest.json.
AnalysisResult run_analyze(const AnalyzeCommandOptions& options, std::ostream& log);

struct ScanCommandOptions {
    std::filesystem::path attention;  ///< file or directory
    std::filesystem::path corpus;
    std::filesystem::path relevance;
    std::filesystem::path freq_table;
    std::optional<std::filesystem::path> fixations;  ///< enables human similarity
    std::optional<std::filesystem::path> layout_config;
    std::filesystem::path out_dir;
    std::uint64_t seed = 1;
    PoolMode pool = PoolMode::PerFold;
    int pass = 1;
    bool include_incorrect = false;
    std::string question_type;
    bool plots = false;
};

struct ScanModelResult {
    std::string model;
    std::vector<std::int64_t> steps;
    std::optional<bool> last_layer_relevance_monotone;
    std::optional<bool> finetuned_exceeds_pretrained;
};

struct ScanResult {
    std::vector<ScanModelResult> models;
    bool wrote_trajectory = false;
    std::string manifest_id;
};

/// Writes head_sensitivity.csv, layer_sensitivity.csv, trajectory.csv (models
/// with two or more checkpoints), summary.json, manifest.json.
ScanResult run_scan(const ScanCommandOptions& options, std::ostream& log);

/// Command-line entry point. Returns 0 on success, 1 on analysis failure, 2 on input/usage errors.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace gazealign
