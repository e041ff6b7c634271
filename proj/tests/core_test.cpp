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

#include <random>

#include "dce/core.hpp"

namespace dce {
namespace {

TEST(NormalizeDrugName, CaseFoldAndTrim) {
  EXPECT_EQ(normalize_drug_name("  Cisplatin "), "cisplatin");
  EXPECT_EQ(normalize_drug_name("cisplatin"), "cisplatin");
}

TEST(NormalizeDrugName, StripsSurroundingPunctuation) {
  EXPECT_EQ(normalize_drug_name("5-FU,"), "5-fu");
  EXPECT_EQ(normalize_drug_name("(aspirin)"), "aspirin");
  EXPECT_EQ(normalize_drug_name("\"[etoposide];\""), "etoposide");
  // interior punctuation is untouched
  EXPECT_EQ(normalize_drug_name("beta-blocker (oral)"), "beta-blocker (oral");
}

TEST(NormalizeDrugName, CollapsesInternalWhitespace) {
  EXPECT_EQ(normalize_drug_name("folinic   acid"), "folinic acid");
  EXPECT_EQ(normalize_drug_name("folinic \t\n acid"), "folinic acid");
}

TEST(NormalizeDrugName, PunctuationExposingWhitespaceStillTrims) {
  EXPECT_EQ(normalize_drug_name("( aspirin )"), "aspirin");
}

TEST(NormalizeDrugName, EmptyInputsThrow) {
  EXPECT_THROW(normalize_drug_name(""), EmptyNameError);
  EXPECT_THROW(normalize_drug_name("   "), EmptyNameError);
  EXPECT_THROW(normalize_drug_name("()..,"), EmptyNameError);
}

TEST(NormalizeDrugName, PolicyStepsCanBeDisabled) {
  NormalizationPolicy keep_case;
  keep_case.case_fold = false;
  EXPECT_EQ(normalize_drug_name("Cisplatin", keep_case), "Cisplatin");

  NormalizationPolicy keep_punct;
  keep_punct.strip_surrounding_punctuation = false;
  EXPECT_EQ(normalize_drug_name("5-fu,", keep_punct), "5-fu,");
}

TEST(NormalizeDrugName, UnicodeBytesPassThrough) {
  EXPECT_EQ(normalize_drug_name("  α-tocopherol "), "α-tocopherol");
}

// Idempotence and determinism over random printable and binary strings.
TEST(NormalizeDrugName, IdempotentOnRandomStrings) {
  std::mt19937_64 rng(20260810);
  std::uniform_int_distribution<int> len(0, 40);
  std::uniform_int_distribution<int> byte(1, 255);
  int checked = 0;
  for (int i = 0; i < 2000; ++i) {
    std::string raw;
    const int n = len(rng);
    for (int k = 0; k < n; ++k) raw.push_back(static_cast<char>(byte(rng)));
    const auto once = try_normalize_drug_name(raw);
    if (!once) continue;
    ++checked;
    const auto twice = try_normalize_drug_name(*once);
    ASSERT_TRUE(twice.has_value()) << "normalized form vanished: " << raw;
    EXPECT_EQ(*once, *twice);
    EXPECT_EQ(try_normalize_drug_name(raw), once);  // deterministic
  }
  EXPECT_GT(checked, 500);
}

TEST(CollapseLabel, MapsNegAndCombToOther) {
  EXPECT_EQ(collapse_label(EffectLabel::POS), EffectLabel::POS);
  EXPECT_EQ(collapse_label(EffectLabel::NEG), EffectLabel::OTHER);
  EXPECT_EQ(collapse_label(EffectLabel::COMB), EffectLabel::OTHER);
  EXPECT_EQ(collapse_label(EffectLabel::OTHER), EffectLabel::OTHER);
  EXPECT_EQ(collapse_label(EffectLabel::NO_COMB), EffectLabel::NO_COMB);
}

TEST(CollapseLabel, Idempotent) {
  for (EffectLabel l : {EffectLabel::POS, EffectLabel::NEG, EffectLabel::COMB,
                        EffectLabel::OTHER, EffectLabel::NO_COMB})
    EXPECT_EQ(collapse_label(collapse_label(l)), collapse_label(l));
}

TEST(CollapseLabel, RejectsDdiLabels) {
  EXPECT_THROW(collapse_label(EffectLabel::MECHANISM), InvalidLabelError);
  EXPECT_THROW(collapse_label(EffectLabel::INT), InvalidLabelError);
}

TEST(LabelFromString, CaseInsensitive) {
  EXPECT_EQ(label_from_string("pos"), EffectLabel::POS);
  EXPECT_EQ(label_from_string("Mechanism"), EffectLabel::MECHANISM);
  EXPECT_EQ(label_from_string("NO_COMB"), EffectLabel::NO_COMB);
  EXPECT_EQ(label_from_string("bogus"), std::nullopt);
}

TEST(Combination, EqualityIsOrderIndependent) {
  const Combination ab = make_combination({"a1", "b1"}, EffectLabel::POS);
  const Combination ba = make_combination({"b1", "a1"}, EffectLabel::POS);
  EXPECT_EQ(ab, ba);
  const Combination other_label = make_combination({"a1", "b1"}, EffectLabel::OTHER);
  EXPECT_NE(ab, other_label);
}

TEST(Combination, ArityAndLabelGuards) {
  EXPECT_THROW(make_combination({"a1"}, EffectLabel::POS), ArityViolationError);
  // duplicates collapse after normalization
  EXPECT_THROW(make_combination({"Aspirin", "aspirin"}, EffectLabel::POS),
               ArityViolationError);
  EXPECT_THROW(make_combination({"a1", "b1"}, EffectLabel::NO_COMB),
               InvalidLabelError);
}

}  // namespace
}  // namespace dce
