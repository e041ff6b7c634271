// Copyright 2026 The dcekit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <string>

#include "dce/response_parser.hpp"
#include "support/oracles.hpp"

namespace dce {
namespace {

Combination combo(std::initializer_list<std::string> drugs, EffectLabel label) {
  Combination c;
  c.label = label;
  for (const auto& d : drugs) c.drugs.insert(d);
  return c;
}

bool has_note_containing(const std::vector<std::string>& notes, std::string_view text) {
  for (const auto& n : notes)
    if (n.find(text) != std::string::npos) return true;
  return false;
}

TEST(ParseResponse, WellFormedResponse) {
  const std::string raw =
      "<think>[1] scenario\n- a\n[2] candidates\n- b\n[3] reasoning\n- c\n"
      "[4] summary\n- d</think><answer>[{\"drugs\":[\"cisplatin\",\"etoposide\"],"
      "\"label\":\"POS\"}]</answer>";
  const ParsedResponse r = parse_response(raw);
  EXPECT_TRUE(r.has_think);
  EXPECT_TRUE(r.has_answer);
  EXPECT_TRUE(r.answer_json_valid);
  ASSERT_TRUE(r.think_report.has_value());
  EXPECT_EQ(r.think_report->present_count(), 4);
  EXPECT_TRUE(r.think_report->sections_in_order);
  EXPECT_EQ(r.think_report->bullets_per_section, (std::array<int, 4>{1, 1, 1, 1}));
  ASSERT_TRUE(r.combinations.has_value());
  EXPECT_EQ(*r.combinations,
            CombinationSet{combo({"cisplatin", "etoposide"}, EffectLabel::POS)});
  EXPECT_FALSE(r.ner_entities.has_value());
}

TEST(ParseResponse, EmptyAnswerArrayIsNoComb) {
  const ParsedResponse r = parse_response("<answer>[]</answer>");
  EXPECT_FALSE(r.has_think);
  EXPECT_TRUE(r.has_answer);
  EXPECT_TRUE(r.answer_json_valid);
  ASSERT_TRUE(r.combinations.has_value());
  EXPECT_TRUE(r.combinations->empty());
}

TEST(ParseResponse, NoTagsAtAll) {
  const ParsedResponse r = parse_response("no tags at all");
  EXPECT_FALSE(r.has_think);
  EXPECT_FALSE(r.has_answer);
  EXPECT_FALSE(r.answer_json_valid);
  EXPECT_FALSE(r.combinations.has_value());
  EXPECT_FALSE(r.parse_notes.empty());
}

TEST(ParseResponse, UnclosedAnswerTag) {
  const ParsedResponse r = parse_response("<answer>[]");
  EXPECT_FALSE(r.has_answer);
  EXPECT_TRUE(has_note_containing(r.parse_notes, "unclosed"));
}

TEST(ParseResponse, MultipleAnswerBlocksUseFirstPair) {
  const ParsedResponse r = parse_response(
      "<answer>[{\"drugs\":[\"a\",\"b\"],\"label\":\"POS\"}]</answer>"
      "<answer>[{\"drugs\":[\"c\",\"d\"],\"label\":\"POS\"}]</answer>");
  ASSERT_TRUE(r.combinations.has_value());
  EXPECT_EQ(*r.combinations, CombinationSet{combo({"a", "b"}, EffectLabel::POS)});
  EXPECT_TRUE(has_note_containing(r.parse_notes, "multiple <answer>"));
}

TEST(ParseResponse, NestedAnswerOpenIsDiagnosed) {
  const ParsedResponse r = parse_response("<answer>junk<answer>[]</answer>");
  EXPECT_TRUE(r.has_answer);
  EXPECT_FALSE(r.answer_json_valid);  // first pair content is "junk<answer>[]"
  EXPECT_TRUE(has_note_containing(r.parse_notes, "nested <answer>"));
}

TEST(ParseResponse, InvalidJsonAnswer) {
  const ParsedResponse r = parse_response("<answer>[{broken</answer>");
  EXPECT_TRUE(r.has_answer);
  EXPECT_FALSE(r.answer_json_valid);
  EXPECT_FALSE(r.combinations.has_value());
}

TEST(AnalyzeThink, CountsSectionsAndBullets) {
  const ThinkStructureReport rep = analyze_think(
      "[1] scenario\n- one\n- two\n[2] candidates\n- three\n[3] effect\n- four\n"
      "[4] summary\n- five\n");
  EXPECT_EQ(rep.present_count(), 4);
  EXPECT_TRUE(rep.sections_in_order);
  EXPECT_EQ(rep.bullets_per_section, (std::array<int, 4>{2, 1, 1, 1}));
  EXPECT_EQ(rep.word_count, 18u);
}

TEST(AnalyzeThink, EmptyString) {
  const ThinkStructureReport rep = analyze_think("");
  EXPECT_EQ(rep.present_count(), 0);
  EXPECT_TRUE(rep.sections_in_order);
  EXPECT_EQ(rep.bullets_per_section, (std::array<int, 4>{0, 0, 0, 0}));
  EXPECT_EQ(rep.word_count, 0u);
}

TEST(AnalyzeThink, PartialSectionsStayInOrder) {
  const ThinkStructureReport rep = analyze_think("[1] a\n- x\n[3] b\n- y\n");
  EXPECT_EQ(rep.sections_present, (std::array<bool, 4>{true, false, true, false}));
  EXPECT_TRUE(rep.sections_in_order);
}

TEST(AnalyzeThink, OutOfOrderSections) {
  const ThinkStructureReport rep = analyze_think("[2] b\n- x\n[1] a\n- y\n");
  EXPECT_FALSE(rep.sections_in_order);
}

TEST(AnalyzeThink, ToleratesHeaderPunctuationAndIndent) {
  const ThinkStructureReport rep =
      analyze_think("  [1]: scenario\n  - x\n[2]. candidates\n- y\n");
  EXPECT_EQ(rep.sections_present, (std::array<bool, 4>{true, true, false, false}));
  EXPECT_EQ(rep.bullets_per_section[0], 1);
  EXPECT_EQ(rep.bullets_per_section[1], 1);
}

TEST(AnalyzeThink, BulletsBeforeAnyHeaderAreUnattributed) {
  const ThinkStructureReport rep = analyze_think("- stray\n[1] a\n- x\n");
  EXPECT_EQ(rep.bullets_per_section[0], 1);
}

TEST(AnalyzeThink, FiveIsNotASection) {
  const ThinkStructureReport rep = analyze_think("[5] not one\n[12] nor this\n");
  EXPECT_EQ(rep.present_count(), 0);
}

TEST(ParseAnswerPayload, TolerantKeysAndLabelCase) {
  const AnswerPayload p =
      parse_answer_payload("[{\"drugs\":[\"A\",\"B\"],\"label\":\"pos\"}]");
  EXPECT_TRUE(p.json_valid);
  ASSERT_TRUE(p.combinations.has_value());
  EXPECT_EQ(*p.combinations, CombinationSet{combo({"a", "b"}, EffectLabel::POS)});

  const AnswerPayload q = parse_answer_payload(
      "[{\"combination\":[\"A\",\"B\"],\"relation\":\"OTHER\"},"
      " {\"entities\":[\"C\",\"D\"],\"class\":\"neg\"},"
      " {\"drugs\":[\"E\",\"F\"],\"effect\":\"comb\"}]");
  EXPECT_TRUE(q.json_valid);
  const CombinationSet expected{combo({"a", "b"}, EffectLabel::OTHER),
                                combo({"c", "d"}, EffectLabel::NEG),
                                combo({"e", "f"}, EffectLabel::COMB)};
  EXPECT_EQ(*q.combinations, expected);
}

TEST(ParseAnswerPayload, ArityBelowTwoDropsWithDiagnostic) {
  const AnswerPayload p =
      parse_answer_payload("[{\"drugs\":[\"A\"],\"label\":\"POS\"}]");
  EXPECT_TRUE(p.json_valid);
  ASSERT_TRUE(p.combinations.has_value());
  EXPECT_TRUE(p.combinations->empty());
  EXPECT_TRUE(has_note_containing(p.notes, "arity<2"));
}

TEST(ParseAnswerPayload, DuplicateNamesCollapseBeforeArityCheck) {
  const AnswerPayload p = parse_answer_payload(
      "[{\"drugs\":[\"Aspirin\",\"aspirin \"],\"label\":\"POS\"}]");
  EXPECT_TRUE(p.combinations->empty());
  EXPECT_TRUE(has_note_containing(p.notes, "arity<2"));
}

TEST(ParseAnswerPayload, DuplicateCombinationsDeduplicate) {
  const AnswerPayload p = parse_answer_payload(
      "[{\"drugs\":[\"a\",\"b\"],\"label\":\"POS\"},"
      " {\"drugs\":[\"B\",\"A\"],\"label\":\"pos\"}]");
  EXPECT_EQ(p.combinations->size(), 1u);
}

TEST(ParseAnswerPayload, NoCombObjectMapsToEmptySet) {
  const AnswerPayload bare = parse_answer_payload("{\"label\":\"NO_COMB\"}");
  EXPECT_TRUE(bare.json_valid);
  EXPECT_TRUE(bare.combinations->empty());

  const AnswerPayload in_array =
      parse_answer_payload("[{\"label\":\"no_comb\",\"drugs\":[]}]");
  EXPECT_TRUE(in_array.json_valid);
  EXPECT_TRUE(in_array.combinations->empty());
}

TEST(ParseAnswerPayload, UnknownLabelAndJunkElementsAreDropped) {
  const AnswerPayload p = parse_answer_payload(
      "[{\"drugs\":[\"a\",\"b\"],\"label\":\"MAYBE\"}, \"junk\","
      " {\"drugs\":[\"c\",\"d\"],\"label\":\"POS\"}]");
  EXPECT_TRUE(p.json_valid);
  EXPECT_EQ(*p.combinations, CombinationSet{combo({"c", "d"}, EffectLabel::POS)});
  EXPECT_TRUE(has_note_containing(p.notes, "unknown label"));
  EXPECT_TRUE(has_note_containing(p.notes, "non-object"));
}

TEST(ParseAnswerPayload, NonArrayTopLevelIsInvalid) {
  EXPECT_FALSE(parse_answer_payload("\"just a string\"").json_valid);
  EXPECT_FALSE(parse_answer_payload("{\"drugs\":[\"a\",\"b\"],\"label\":\"POS\"}")
                   .json_valid);
}

TEST(ParseAnswerPayload, ExtendedFormat) {
  const AnswerPayload p = parse_answer_payload(
      "@ner# [\"A\",\"B\",\"C\"] #ner@ @re# [{\"drugs\":[\"A\",\"B\"],"
      "\"label\":\"POS\"}] #re@",
      {}, AnswerFormat::EXTENDED);
  EXPECT_TRUE(p.json_valid);
  ASSERT_TRUE(p.ner_entities.has_value());
  EXPECT_EQ(*p.ner_entities, (DrugSet{"a", "b", "c"}));
  EXPECT_EQ(*p.combinations, CombinationSet{combo({"a", "b"}, EffectLabel::POS)});
}

TEST(ParseAnswerPayload, ExtendedMissingMarkersDiagnosed) {
  const AnswerPayload p = parse_answer_payload(
      "@re# [{\"drugs\":[\"A\",\"B\"],\"label\":\"POS\"}] #re@", {},
      AnswerFormat::EXTENDED);
  EXPECT_FALSE(p.json_valid);
  EXPECT_FALSE(p.ner_entities.has_value());
  ASSERT_TRUE(p.combinations.has_value());  // region itself parsed
  EXPECT_TRUE(has_note_containing(p.notes, "missing @ner#"));
}

TEST(ParseResponse, ExtendedInvalidHidesCombinations) {
  const ParsedResponse r = parse_response(
      "<answer>@re# [{\"drugs\":[\"A\",\"B\"],\"label\":\"POS\"}] #re@</answer>", {},
      AnswerFormat::EXTENDED);
  EXPECT_TRUE(r.has_answer);
  EXPECT_FALSE(r.answer_json_valid);
  EXPECT_FALSE(r.combinations.has_value());
}

// serialize -> parse is the identity on well-formed combination sets.
TEST(RoundTrip, CanonicalAnswerJson) {
  testing::RandomCase rc(101);
  for (int i = 0; i < 300; ++i) {
    const CombinationSet combos = rc.combination_set(6, 8, 5);
    const AnswerPayload p = parse_answer_payload(to_answer_json(combos));
    ASSERT_TRUE(p.json_valid);
    EXPECT_EQ(*p.combinations, combos);
  }
}

TEST(RoundTrip, ExtendedAnswer) {
  testing::RandomCase rc(202);
  for (int i = 0; i < 100; ++i) {
    const CombinationSet combos = rc.combination_set(4, 6, 4);
    DrugSet entities;
    for (const auto& c : combos) entities.insert(c.drugs.begin(), c.drugs.end());
    const AnswerPayload p = parse_answer_payload(
        to_extended_answer(entities, combos), {}, AnswerFormat::EXTENDED);
    ASSERT_TRUE(p.json_valid);
    EXPECT_EQ(*p.combinations, combos);
    EXPECT_EQ(*p.ner_entities, entities);
  }
}

TEST(ParseResponse, WhitespaceRobustness) {
  testing::RandomCase rc(303);
  const CombinationSet combos{combo({"a", "b"}, EffectLabel::POS),
                              combo({"c", "d", "e"}, EffectLabel::OTHER)};
  const std::string think = "[1] s\n- x\n[2] c\n- y\n[3] r\n- z\n[4] f\n- w\n";
  for (int i = 0; i < 50; ++i) {
    const auto ws = [&rc]() {
      static const char* kWs[] = {"", " ", "  ", "\n", "\t", " \n "};
      return std::string(kWs[rc.uniform(0, 5)]);
    };
    const std::string raw = ws() + "<think>" + think + "</think>" + ws() +
                            "<answer>" + ws() + to_answer_json(combos) + ws() +
                            "</answer>" + ws();
    const ParsedResponse r = parse_response(raw);
    ASSERT_TRUE(r.answer_json_valid);
    EXPECT_EQ(*r.combinations, combos);
  }
}

TEST(ParseResponse, TotalOnRandomBytes) {
  testing::RandomCase rc(404);
  for (int i = 0; i < 2000; ++i) {
    const std::string junk = rc.random_bytes(400);
    const ParsedResponse r = parse_response(junk);
    if (!r.has_answer) EXPECT_FALSE(r.combinations.has_value());
  }
}

}  // namespace
}  // namespace dce
