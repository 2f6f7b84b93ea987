/*
 * Copyright 2026 The CAPT Intelligibility Authors. All Rights Reserved.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "capt/phoneset.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <string>

#include "capt/error.hpp"

using namespace capt;

TEST(PhonesetTest, InventoryHasFortySymbolsWithSilence) {
  const auto& inv = load_inventory();
  EXPECT_EQ(inv.size(), 40u);
  EXPECT_EQ(inv.symbol(inv.silence()), "SIL");
  std::size_t sil_count = 0;
  for (const auto& s : inv.symbols()) sil_count += s == "SIL";
  EXPECT_EQ(sil_count, 1u);
}

TEST(PhonesetTest, OrdinalIsABijection) {
  const auto& inv = load_inventory();
  std::set<std::uint16_t> seen;
  for (std::size_t i = 0; i < inv.size(); ++i) {
    PhonemeId p{static_cast<std::uint16_t>(i)};
    EXPECT_EQ(inv.id(inv.symbol(p)), p);
    seen.insert(inv.id(inv.symbol(p)).value);
  }
  EXPECT_EQ(seen.size(), 40u);
  EXPECT_EQ(*seen.rbegin(), 39);
}

TEST(PhonesetTest, LoadIsDeterministic) {
  auto a = PhonemeInventory::parse(bundled_inventory_table());
  auto b = PhonemeInventory::parse(bundled_inventory_table());
  EXPECT_EQ(a, b);
  EXPECT_EQ(PhonemeInventory::parse(a.serialize()), a);
}

TEST(PhonesetTest, CorruptTablesAreRejected) {
  const std::string table(bundled_inventory_table());
  // Duplicate row.
  auto dup = table + "AA\t1\t0\t0\t1\n";
  EXPECT_THROW(PhonemeInventory::parse(dup), LoadError);
  // Missing row.
  auto missing = table.substr(0, table.rfind("ZH"));
  EXPECT_THROW(PhonemeInventory::parse(missing), LoadError);
  EXPECT_THROW(PhonemeInventory::parse("phoneme\tplace\n"), LoadError);
  auto bad_value = table;
  bad_value.replace(bad_value.find("AA\t1"), 4, "AA\t7");
  EXPECT_THROW(PhonemeInventory::parse(bad_value), LoadError);
}

TEST(PhonesetTest, AttributesAreInRangeAndSilenceIsZero) {
  const auto& inv = load_inventory();
  for (std::size_t i = 0; i < inv.size(); ++i) {
    const auto& a = inv.attributes(PhonemeId{static_cast<std::uint16_t>(i)});
    for (double v : {a.place, a.closedness, a.roundedness, a.voicing}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    EXPECT_TRUE(a.voicing == 0.0 || a.voicing == 1.0);
    EXPECT_TRUE(a.roundedness == 0.0 || a.roundedness == 0.5 || a.roundedness == 1.0);
  }
  EXPECT_EQ(inv.attributes("SIL"), ArticulatoryAttributes{});
  EXPECT_THROW(inv.attributes("XX"), LookupError);
}

// Voiced/voiceless cognates must differ only in voicing.
TEST(PhonesetTest, VoicingPairsAreConsistent) {
  const auto& inv = load_inventory();
  const std::pair<const char*, const char*> pairs[] = {
      {"P", "B"}, {"T", "D"}, {"K", "G"}, {"F", "V"}, {"TH", "DH"}, {"S", "Z"}, {"SH", "ZH"}, {"CH", "JH"}};
  for (auto [voiceless, voiced] : pairs) {
    const auto& a = inv.attributes(voiceless);
    const auto& b = inv.attributes(voiced);
    EXPECT_EQ(a.voicing, 0.0) << voiceless;
    EXPECT_EQ(b.voicing, 1.0) << voiced;
    EXPECT_EQ(a.place, b.place) << voiceless;
    EXPECT_EQ(a.closedness, b.closedness) << voiceless;
    EXPECT_EQ(a.roundedness, b.roundedness) << voiceless;
  }
}

TEST(PhonesetTest, NeighborsAreSymmetricIrreflexiveAndNonEmpty) {
  const auto& inv = load_inventory();
  for (std::size_t i = 0; i < inv.size(); ++i) {
    PhonemeId p{static_cast<std::uint16_t>(i)};
    if (inv.is_silence(p)) continue;
    const auto& n = inv.neighbors(p);
    EXPECT_FALSE(n.empty()) << inv.symbol(p);
    EXPECT_EQ(std::count(n.begin(), n.end(), p), 0);
    EXPECT_EQ(std::count(n.begin(), n.end(), inv.silence()), 0);
    for (auto q : n) {
      const auto& back = inv.neighbors(q);
      EXPECT_NE(std::find(back.begin(), back.end(), p), back.end())
          << inv.symbol(p) << " -> " << inv.symbol(q);
    }
  }
  EXPECT_THROW(inv.neighbors(inv.silence()), DomainError);
}

TEST(PhonesetTest, NeighborsFollowFromTheAttributeTable) {
  const auto& inv = load_inventory();
  std::vector<ArticulatoryAttributes> rows;
  for (std::size_t i = 0; i < inv.size(); ++i) rows.push_back(inv.attributes(PhonemeId{static_cast<std::uint16_t>(i)}));
  const auto recomputed = compute_neighbors(rows, inv.silence());
  for (std::size_t i = 0; i < inv.size(); ++i) {
    PhonemeId p{static_cast<std::uint16_t>(i)};
    if (inv.is_silence(p)) continue;
    EXPECT_EQ(recomputed[i], inv.neighbors(p));
  }
  // P and B differ only in voicing.
  const auto& np = inv.neighbors(inv.id("P"));
  EXPECT_NE(std::find(np.begin(), np.end(), inv.id("B")), np.end());
}

TEST(PhonesetTest, LexiconParsesEntries) {
  const auto& inv = load_inventory();
  auto lex = Lexicon::parse("# test\nCAT K AE T\nA AH\n", inv);
  EXPECT_EQ(lex.primary("cat"), inv.parse_sequence("K AE T"));
  EXPECT_EQ(lex.primary("CAT"), inv.parse_sequence("K AE T"));
  EXPECT_EQ(lex.primary("a").size(), 1u);
  EXPECT_THROW(lex.primary("dog"), LookupError);
}

TEST(PhonesetTest, LexiconRejectsUnknownPhonemeWithLineNumber) {
  const auto& inv = load_inventory();
  try {
    Lexicon::parse("CAT K AE T\nDOG D O G\n", inv);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_NE(std::string(e.what()).find("'O'"), std::string::npos);
  }
  EXPECT_THROW(Lexicon::parse("CAT\n", inv), ParseError);
  EXPECT_THROW(Lexicon::parse("CAT K SIL T\n", inv), ParseError);
}

TEST(PhonesetTest, LexiconRoundTripsAndKeepsAlternatives) {
  const auto& inv = load_inventory();
  auto lex = Lexicon::parse(bundled_lexicon_text(), inv);
  lex.add("either", inv.parse_sequence("IY DH ER"));
  lex.add("either", inv.parse_sequence("AY DH ER"));
  EXPECT_EQ(lex.pronunciations("either").size(), 2u);
  EXPECT_EQ(Lexicon::parse(lex.serialize(), inv), lex);
  EXPECT_GE(lex.size(), 30u);
}
