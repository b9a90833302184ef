#include <CLI11.hpp>
#include <ostream>

#include "gazealign/error.hpp"
#include "gazealign/io.hpp"
#include "gazealign/pipeline.hpp"

namespace gazealign {

namespace {

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    for (const auto part : io::split_fields(s, ',')) {
        const auto t = io::trim(part);
        if (!t.empty()) {
            out.emplace_back(t);
        }
    }
    return out;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Gaze and transformer-attention alignment analysis", "gazealign"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kToolVersion));

    LayoutCommandOptions layout;
    std::string layout_cfg;
    auto* layout_cmd = app.add_subcommand("layout", "Lay out passages and write one box record per word");
    layout_cmd->add_option("--corpus", layout.corpus, "Question corpus (JSON lines)")->required();
    layout_cmd->add_option("--layout-config", layout_cfg, "Layout configuration (JSON)");
    layout_cmd->add_option("--out", layout.out_dir, "Output directory")->required();

    AnalyzeCommandOptions analyze;
    std::string analyze_layout_cfg;
    std::string analyze_attention;
    std::string analyze_pool = "per-fold";
    std::vector<std::string> residualize;
    bool cross_passage = false;
    std::int64_t checkpoint_step = -1;
    auto* analyze_cmd = app.add_subcommand("analyze", "Predict human attention from feature sets (accuracy table)");
    analyze_cmd->add_option("--corpus", analyze.corpus, "Question corpus (JSON lines)")->required();
    analyze_cmd->add_option("--fixations", analyze.fixations, "Fixation table")->required();
    analyze_cmd->add_option("--relevance", analyze.relevance, "Task-relevance annotations (JSON lines)")->required();
    analyze_cmd->add_option("--freq-table", analyze.freq_table, "Word frequency table {word, per_million}")->required();
    analyze_cmd->add_option("--attention", analyze_attention, "Attention records (file or directory)");
    analyze_cmd->add_option("--layout-config", analyze_layout_cfg, "Layout configuration (JSON)");
    analyze_cmd->add_option("--seed", analyze.seed, "Master random seed")->capture_default_str();
    analyze_cmd->add_option("--perms", analyze.permutations, "Permutations per test")->capture_default_str();
    analyze_cmd->add_option("--boots", analyze.bootstraps, "Bootstrap resamples")->capture_default_str();
    analyze_cmd->add_option("--pool", analyze_pool, "Accuracy pooling: per-fold, per-question, pooled")
        ->capture_default_str();
    analyze_cmd->add_option("--residualize", residualize,
                            "Comma-separated feature sets to regress out first (repeatable)");
    analyze_cmd->add_option("--pass", analyze.pass, "Reading pass to analyze (1 or 2)")->capture_default_str();
    analyze_cmd->add_flag("--include-incorrect", analyze.include_incorrect,
                          "Average over all participants, not only correct ones");
    analyze_cmd->add_option("--question-type", analyze.question_type, "Restrict to a question type or local/global");
    analyze_cmd->add_flag("--cross-passage-shuffle", cross_passage, "Permute the target across passages");
    analyze_cmd->add_option("--checkpoint-step", checkpoint_step, "Attention checkpoint for the DNN feature set");
    analyze_cmd->add_flag("--plots", analyze.plots, "Also write SVG plots");
    analyze_cmd->add_option("--out", analyze.out_dir, "Output directory")->required();

    ScanCommandOptions scan;
    std::string scan_layout_cfg;
    std::string scan_fixations;
    std::string scan_pool = "per-fold";
    auto* scan_cmd = app.add_subcommand("scan", "Per-head sensitivity scan and fine-tuning trajectory");
    scan_cmd->add_option("--attention", scan.attention, "Attention records (file or directory)")->required();
    scan_cmd->add_option("--corpus", scan.corpus, "Question corpus (JSON lines)")->required();
    scan_cmd->add_option("--relevance", scan.relevance, "Task-relevance annotations (JSON lines)")->required();
    scan_cmd->add_option("--freq-table", scan.freq_table, "Word frequency table")->required();
    scan_cmd->add_option("--fixations", scan_fixations, "Fixation table; enables human similarity");
    scan_cmd->add_option("--layout-config", scan_layout_cfg, "Layout configuration (JSON)");
    scan_cmd->add_option("--seed", scan.seed, "Master random seed")->capture_default_str();
    scan_cmd->add_option("--pool", scan_pool, "Accuracy pooling: per-fold, per-question, pooled")->capture_default_str();
    scan_cmd->add_option("--pass", scan.pass, "Reading pass (1 or 2)")->capture_default_str();
    scan_cmd->add_flag("--include-incorrect", scan.include_incorrect, "Average over all participants");
    scan_cmd->add_option("--question-type", scan.question_type, "Restrict to a question type or local/global");
    scan_cmd->add_flag("--plots", scan.plots, "Also write SVG plots");
    scan_cmd->add_option("--out", scan.out_dir, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? 0 : 2;
    }

    try {
        if (layout_cmd->parsed()) {
            if (!layout_cfg.empty()) {
                layout.layout_config = layout_cfg;
            }
            run_layout(layout, out);
        } else if (analyze_cmd->parsed()) {
            if (!analyze_layout_cfg.empty()) {
                analyze.layout_config = analyze_layout_cfg;
            }
            if (!analyze_attention.empty()) {
                analyze.attention = analyze_attention;
            }
            analyze.pool = parse_pool_mode(analyze_pool);
            analyze.shuffle = cross_passage ? ShuffleScope::AcrossPassages : ShuffleScope::WithinPassage;
            for (const auto& r : residualize) {
                analyze.residualize.push_back(split_list(r));
            }
            if (checkpoint_step >= 0) {
                analyze.checkpoint_step = checkpoint_step;
            }
            const auto result = run_analyze(analyze, out);
            out << "wrote " << result.rows.size() << " accuracy rows and " << result.comparisons.size()
                << " local/global comparisons to " << analyze.out_dir.string() << '\n';
        } else if (scan_cmd->parsed()) {
            if (!scan_layout_cfg.empty()) {
                scan.layout_config = scan_layout_cfg;
            }
            if (!scan_fixations.empty()) {
                scan.fixations = scan_fixations;
            }
            scan.pool = parse_pool_mode(scan_pool);
            const auto result = run_scan(scan, out);
            out << "scanned " << result.models.size() << " model(s) -> " << scan.out_dir.string() << '\n';
        }
    } catch (const InputError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const AnalysisError& e) {
        err << "analysis failed: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "analysis failed: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

}  // namespace gazealign
