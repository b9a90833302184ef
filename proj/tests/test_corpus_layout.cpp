#include <doctest.h>

#include <algorithm>
#include <string>

#include "gazealign/corpus_layout.hpp"
#include "gazealign/error.hpp"
#include "gazealign/io.hpp"
#include "support/synthetic.hpp"

using namespace gazealign;

namespace {

std::string record_line(const std::string& id, const std::string& options = R"(["a","b","c","d"])") {
    return R"({"id":")" + id + R"(","type":"Fact","passage":"It is a test.","question":"Q?","options":)" + options +
           R"(,"correct":2})";
}

std::vector<std::string> words_of(const std::vector<Token>& tokens) {
    std::vector<std::string> out;
    for (const auto& t : tokens) {
        out.push_back(t.text);
    }
    return out;
}

}  // namespace

TEST_CASE("question types map onto local and global scopes") {
    CHECK(scope_of(QuestionType::Cause) == Scope::Local);
    CHECK(scope_of(QuestionType::Fact) == Scope::Local);
    CHECK(scope_of(QuestionType::Inference) == Scope::Local);
    CHECK(scope_of(QuestionType::Theme) == Scope::Global);
    CHECK(scope_of(QuestionType::Title) == Scope::Global);
    CHECK(scope_of(QuestionType::Purpose) == Scope::Global);
    CHECK(parse_question_type("inference") == QuestionType::Inference);
    CHECK_FALSE(parse_question_type("Summary").has_value());
}

TEST_CASE("load_corpus") {
    testing::TempDir dir;
    const auto path = dir.path() / "corpus.jsonl";

    SUBCASE("empty file gives an empty list") {
        io::write_file(path, "");
        CHECK(load_corpus(path).records.empty());
    }

    SUBCASE("800 well-formed records load in order") {
        std::string text;
        for (int i = 0; i < 800; ++i) {
            text += record_line("q" + std::to_string(i)) + "\n";
        }
        io::write_file(path, text);
        const auto result = load_corpus(path);
        REQUIRE(result.records.size() == 800);
        CHECK(result.records.front().id == "q0");
        CHECK(result.records.back().id == "q799");
        CHECK(result.records[5].correct_index == 2);
        // 4-word passages are outside the reference range: warned, kept.
        CHECK(result.warnings.size() == 800);
    }

    SUBCASE("a record with three options is rejected, citing its id") {
        io::write_file(path, record_line("ok") + "\n" + record_line("bad7", R"(["a","b","c"])") + "\n");
        try {
            load_corpus(path);
            FAIL("expected InputError");
        } catch (const InputError& e) {
            const std::string msg = e.what();
            CHECK(msg.find("bad7") != std::string::npos);
            CHECK(msg.find("options") != std::string::npos);
        }
    }

    SUBCASE("malformed fields name the field") {
        io::write_file(path, R"({"id":"x1","type":"Fact","passage":"a b","question":"q","options":["a","b","c","d"],"correct":4})");
        CHECK_THROWS_WITH_AS(load_corpus(path), doctest::Contains("correct"), InputError);
        io::write_file(path, R"({"id":"x2","type":"Essay","passage":"a b","question":"q","options":["a","b","c","d"],"correct":0})");
        CHECK_THROWS_WITH_AS(load_corpus(path), doctest::Contains("x2"), InputError);
    }

    SUBCASE("letter answer keys are accepted") {
        io::write_file(path, R"({"id":"x","type":"Title","passage":"a b","question":"q","options":["a","b","c","d"],"correct":"D"})");
        const auto r = load_corpus(path).records.at(0);
        CHECK(r.correct_index == 3);
        CHECK(r.scope() == Scope::Global);
    }
}

TEST_CASE("tokenize_passage") {
    SUBCASE("single sentence") {
        const auto t = tokenize_passage("It is a test.");
        REQUIRE(t.size() == 4);
        CHECK(std::all_of(t.begin(), t.end(), [](const Token& x) { return x.sentence_index == 1; }));
        CHECK(t[3].text == "test.");
        CHECK(t[3].span == CharSpan{8, 13});
    }

    SUBCASE("boundary before an uppercase word") {
        const auto t = tokenize_passage("End. New start.");
        REQUIRE(t.size() == 3);
        CHECK(t[0].sentence_index == 1);
        CHECK(t[1].sentence_index == 2);
        CHECK(t[2].sentence_index == 2);
    }

    SUBCASE("no boundary before lowercase or digits") {
        const auto t = tokenize_passage("approx. 200 000 tons");
        REQUIRE(t.size() == 4);
        CHECK(std::all_of(t.begin(), t.end(), [](const Token& x) { return x.sentence_index == 1; }));
    }

    SUBCASE("hand-checked boundaries") {
        // Each case: passage, expected sentence index per word.
        const std::vector<std::pair<std::string, std::vector<std::size_t>>> cases = {
            {"Stop! Go.", {1, 2}},
            {"Why? Because.", {1, 2}},
            {"He said \"no.\" Then left.", {1, 1, 1, 2, 2}},
            {"(See above.) Next one.", {1, 1, 2, 2}},
            {"e.g. this case", {1, 1, 1}},
            {"Mr. Smith came.", {1, 2, 2}},  // abbreviations are not special-cased
            {"It cost 3.5 dollars. Fine.", {1, 1, 1, 1, 2}},
            {"Wait... what?", {1, 1}},
            {"One.\nTwo.", {1, 2}},
            {"a.b c", {1, 1}},
            {"Done. \"Quoted start.\"", {1, 2, 2}},
            {"end.  Lower", {1, 2}},
            {"x? y", {1, 1}},
            {"x! 9", {1, 1}},
            {"No stop here", {1, 1, 1}},
            {"A. B. C.", {1, 2, 3}},
            {"ok.", {1}},
            {"Yes.\tNo.", {1, 2}},
            {"Is it? 'Maybe.'", {1, 1, 2}},
            {"first, second. Third", {1, 1, 2}},
        };
        for (const auto& [text, expected] : cases) {
            CAPTURE(text);
            const auto t = tokenize_passage(text);
            REQUIRE(t.size() == expected.size());
            for (std::size_t i = 0; i < t.size(); ++i) {
                CHECK(t[i].sentence_index == expected[i]);
            }
        }
    }

    SUBCASE("newlines start paragraphs; spans are code points") {
        const auto t = tokenize_passage("Caf\xC3\xA9 one.\n  Two \xE2\x80\x9Cthree\xE2\x80\x9D");
        REQUIRE(t.size() == 4);
        CHECK(t[0].span == CharSpan{0, 4});
        CHECK(t[1].paragraph_index == 1);
        CHECK(t[2].paragraph_index == 2);
        CHECK(t[3].span.length() == 7);
        CHECK(letter_count(t[3].text) == 5);
    }
}

TEST_CASE("layout_passage") {
    LayoutConfig cfg;
    cfg.origin_x_px = 100;
    cfg.origin_y_px = 50;

    SUBCASE("first word sits at the paragraph indent") {
        const auto boxes = layout_passage("The", cfg);
        REQUIRE(boxes.size() == 1);
        // x0 + 4 * 14 = x0 + 56; width 3 * 14 = 42; height 27
        CHECK(boxes[0].bbox == BoundingBox{156, 50, 42, 27});
        CHECK(boxes[0].area_px2() == 1134);
        CHECK(boxes[0].row_in_passage == 1);
        CHECK(boxes[0].word_index_in_paragraph == 1);
    }

    SUBCASE("a word plus its space that overflows wraps") {
        cfg.paragraph_indent_chars = 0;
        const std::string a(60, 'a');
        const std::string b(60, 'b');
        auto boxes = layout_passage(a + " " + b, cfg);  // 121 columns
        REQUIRE(boxes.size() == 2);
        CHECK(boxes[1].row_in_passage == 2);
        CHECK(boxes[1].bbox.x == cfg.origin_x_px);
        CHECK(boxes[1].bbox.y == cfg.origin_y_px + 54);
        CHECK(boxes[1].row_in_paragraph == 2);

        boxes = layout_passage(a + " " + std::string(59, 'b'), cfg);  // exactly 120
        CHECK(boxes[1].row_in_passage == 1);
        CHECK(boxes[1].bbox.x == cfg.origin_x_px + 61 * 14);
    }

    SUBCASE("new paragraphs start a new indented row") {
        const auto boxes = layout_passage("One two.\nThree four.", cfg);
        REQUIRE(boxes.size() == 4);
        CHECK(boxes[2].row_in_passage == 2);
        CHECK(boxes[2].row_in_paragraph == 1);
        CHECK(boxes[2].word_index_in_paragraph == 1);
        CHECK(boxes[2].bbox.x == cfg.origin_x_px + 4 * 14);
        CHECK(boxes[3].word_index_in_passage == 4);
        CHECK(boxes[3].word_index_in_sentence == 2);
        CHECK(boxes[3].sentence_index == 2);
    }

    SUBCASE("a word longer than a line is an error") {
        CHECK_THROWS_AS(layout_passage(std::string(117, 'x'), cfg), InputError);
        cfg.paragraph_indent_chars = 0;
        CHECK_NOTHROW(layout_passage(std::string(120, 'x'), cfg));
    }

    SUBCASE("invalid configs are rejected") {
        cfg.line_pitch_px = 20;
        CHECK_THROWS_AS(cfg.validate(), InputError);
        cfg = LayoutConfig{};
        cfg.glyph_width_px = 0;
        CHECK_THROWS_AS(cfg.validate(), InputError);
    }
}

TEST_CASE("layout invariants over a synthetic corpus") {
    Rng rng(11);
    const auto vocab = testing::make_vocabulary(rng);
    const auto corpus = testing::make_corpus(rng, vocab, 5, 117, 456);
    const LayoutConfig cfg;
    for (const auto& q : corpus) {
        CAPTURE(q.id);
        const auto boxes = layout_passage(q, cfg);
        CHECK(boxes == layout_passage(q, cfg));

        // Words reconstruct the passage's whitespace-delimited sequence.
        const auto tokens = tokenize_passage(q.passage);
        REQUIRE(tokens.size() == boxes.size());
        for (std::size_t i = 0; i < boxes.size(); ++i) {
            CHECK(boxes[i].word == tokens[i].text);
            CHECK(boxes[i].word_index_in_passage == i + 1);
            CHECK(boxes[i].bbox.width == static_cast<int>(codepoint_count(boxes[i].word)) * 14);
            CHECK(boxes[i].bbox.height == 27);
            CHECK(boxes[i].bbox.x + boxes[i].bbox.width - cfg.origin_x_px <= 120 * 14);
            if (i > 0) {
                CHECK(boxes[i].row_in_passage >= boxes[i - 1].row_in_passage);
                if (boxes[i].row_in_passage == boxes[i - 1].row_in_passage) {
                    CHECK(boxes[i].bbox.x >= boxes[i - 1].bbox.x + boxes[i - 1].bbox.width + 14);
                }
            }
        }
    }
}
