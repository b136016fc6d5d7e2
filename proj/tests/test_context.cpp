#include <gtest/gtest.h>

#include "support.hpp"

using namespace argctx;

namespace {

const Discussion& t1() {
  static const Corpus c = testing_support::fixture_corpus();
  return c.discussion(0);
}

std::vector<std::optional<std::size_t>> slots(const LocalWindow& w) {
  std::vector<std::optional<std::size_t>> out;
  for (const auto& s : w.slots) out.push_back(s.index);
  return out;
}

}  // namespace

// Row numbers in the fixture are 1-based; indices are 0-based.
TEST(LocalContext, FixtureRowFiveSizeThreeBoth) {
  const auto w = local_context(t1(), 4, 3, LocalPosition::Both);
  EXPECT_EQ(w.present(), (std::vector<std::size_t>{1, 2, 3}));
  // Two prior slots as usual; the next slot has nothing after row 5, so it
  // holds the third prior ADU instead.
  ASSERT_EQ(w.slots.size(), 3u);
  EXPECT_EQ(w.slots[0].offset, -2);
  EXPECT_EQ(w.slots[1].offset, -1);
  EXPECT_EQ(w.slots[2].offset, -3);
  EXPECT_EQ(w.missing(), 0u);
}

TEST(LocalContext, BothBorrowsFromNextAtTheStart) {
  const auto w = local_context(t1(), 0, 3, LocalPosition::Both);
  EXPECT_EQ(w.present(), (std::vector<std::size_t>{1, 2, 3}));
  EXPECT_EQ(slots(w), (std::vector<std::optional<std::size_t>>{3, 2, 1}));
}

TEST(LocalContext, BothAgainstCountingOracle) {
  // Expected window: ceil(s/2) before and floor(s/2) after, topped up from
  // whichever side still has ADUs.
  for (std::size_t n = 1; n <= 9; ++n) {
    Discussion d;
    d.id = "d";
    for (std::size_t i = 0; i < n; ++i) d.adus.push_back({"d", i, "s", "x", std::nullopt});
    for (std::size_t t = 0; t < n; ++t) {
      for (std::size_t s = 0; s <= 6; ++s) {
        std::size_t before = std::min((s + 1) / 2, t), after = std::min(s / 2, n - 1 - t);
        while (before + after < s && (before < t || after < n - 1 - t)) {
          if (before < t) ++before;
          else ++after;
        }
        std::vector<std::size_t> want;
        for (std::size_t i = t - before; i < t; ++i) want.push_back(i);
        for (std::size_t i = t + 1; i <= t + after; ++i) want.push_back(i);
        const auto w = local_context(d, t, s, LocalPosition::Both);
        ASSERT_EQ(w.present(), want) << "n=" << n << " t=" << t << " s=" << s;
        ASSERT_EQ(w.slots.size(), s);
        ASSERT_EQ(w.missing(), s - want.size());
      }
    }
  }
}

TEST(LocalContext, FixtureRowFivePriorThree) {
  EXPECT_EQ(local_context(t1(), 4, 3, LocalPosition::Prior).present(), (std::vector<std::size_t>{1, 2, 3}));
}

TEST(LocalContext, FirstAduHasNoPrior) {
  const auto w = local_context(t1(), 0, 2, LocalPosition::Prior);
  EXPECT_EQ(slots(w), (std::vector<std::optional<std::size_t>>{std::nullopt, std::nullopt}));
  EXPECT_EQ(local_context(t1(), 0, 2, LocalPosition::Next).present(), (std::vector<std::size_t>{1, 2}));
}

TEST(LocalContext, SizeZeroIsEmpty) {
  for (auto p : {LocalPosition::Prior, LocalPosition::Next, LocalPosition::Both})
    EXPECT_TRUE(local_context(t1(), 2, 0, p).slots.empty());
}

TEST(LocalContext, OrderingPriorOldestFirstThenNextNearestFirst) {
  const auto w = local_context(t1(), 2, 4, LocalPosition::Both);
  EXPECT_EQ(slots(w), (std::vector<std::optional<std::size_t>>{0, 1, 3, 4}));
  const auto n = local_context(t1(), 1, 4, LocalPosition::Next);
  EXPECT_EQ(slots(n), (std::vector<std::optional<std::size_t>>{2, 3, 4, std::nullopt}));
}

TEST(LocalContext, OddBothSizesFavourPrior) {
  EXPECT_EQ(prior_slots(5, LocalPosition::Both), 3u);
  EXPECT_EQ(next_slots(5, LocalPosition::Both), 2u);
  EXPECT_EQ(prior_slots(1, LocalPosition::Both), 1u);
}

TEST(LocalContext, TargetOutOfRange) { EXPECT_THROW(local_context(t1(), 5, 1, LocalPosition::Both), DataError); }

TEST(SpeakerContext, FixtureRowFiveSkipsOtherSpeaker) {
  EXPECT_EQ(speaker_context(t1(), 4, 3), (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(speaker_context(t1(), 4, 2), (std::vector<std::size_t>{1, 2}));
}

TEST(SpeakerContext, BoundaryCases) {
  EXPECT_TRUE(speaker_context(t1(), 0, 5).empty());   // first ADU
  EXPECT_TRUE(speaker_context(t1(), 3, 5).empty());   // speaker 10 speaks first at row 4
  EXPECT_TRUE(speaker_context(t1(), 4, 0).empty());   // size 0
  EXPECT_EQ(speaker_context(t1(), 4, 40), (std::vector<std::size_t>{0, 1, 2}));
}

TEST(SpeakerContext, MatchesBruteForceOnRandomDiscussions) {
  SynthConfig cfg;
  cfg.n_discussions = 4;
  cfg.adus_per_discussion = 60;
  cfg.speakers_per_discussion = 5;
  const Corpus c = generate(cfg);
  for (const auto& d : c.discussions()) {
    for (std::size_t t = 0; t < d.adus.size(); ++t) {
      for (std::size_t k : {0u, 1u, 3u, 7u, 40u}) {
        // Oracle: every earlier same-speaker index, keep the last k.
        std::vector<std::size_t> all;
        for (std::size_t i = 0; i < t; ++i)
          if (d.adus[i].speaker_id == d.adus[t].speaker_id) all.push_back(i);
        std::vector<std::size_t> want(all.end() - static_cast<long>(std::min(k, all.size())), all.end());
        ASSERT_EQ(speaker_context(d, t, k), want) << d.id << " t=" << t << " k=" << k;
      }
    }
  }
}

TEST(ContextSpec, Validation) {
  EXPECT_NO_THROW((ContextSpec{6, LocalPosition::Both, 40, true, true}.validate()));
  EXPECT_THROW((ContextSpec{7, LocalPosition::Both, 0}.validate()), ConfigError);
  EXPECT_THROW((ContextSpec{0, LocalPosition::Both, 41}.validate()), ConfigError);
  EXPECT_THROW((ContextSpec{4, LocalPosition::Both, 0, true}.validate()), ConfigError);
  EXPECT_THROW((ContextSpec{6, LocalPosition::Prior, 0, true}.validate()), ConfigError);
  EXPECT_THROW((ContextSpec{0, LocalPosition::Both, 10, false, true}.validate()), ConfigError);
  EXPECT_THROW(parse_position("before"), ConfigError);
  EXPECT_EQ(parse_position(" Both "), LocalPosition::Both);
}

namespace {

/// Encoder stub: ADU i maps to a constant vector of value i + 1.
AduEncoder constant_encoder(std::size_t dim) {
  return [dim](const Adu& a) { return Eigen::VectorXd::Constant(static_cast<Eigen::Index>(dim), a.global_index + 1.0); };
}

}  // namespace

TEST(Assemble, FlatLayoutForLocalSizeFour) {
  const ContextSpec spec{4, LocalPosition::Both, 0};
  const auto in = assemble_example(t1(), 1, spec, constant_encoder(2514), constant_encoder(200), 2514, 200);
  EXPECT_EQ(in.flat().size(), 12570);
  EXPECT_EQ(in.local_mask, (std::vector<bool>{true, true, true, true}));
  const auto flat = in.flat();
  // [slot -2 borrows row 5, slot -1 = row 1, target row 2, +1 = row 3, +2 = row 4]
  const std::vector<double> want = {5, 1, 2, 3, 4};
  for (std::size_t s = 0; s < 5; ++s)
    EXPECT_TRUE(flat.segment(static_cast<Eigen::Index>(s) * 2514, 2514).isConstant(want[s], 0.0)) << s;
  EXPECT_TRUE(in.speaker_empty());
}

TEST(Assemble, MissingSlotsAreZeroAndMasked) {
  const ContextSpec spec{2, LocalPosition::Prior, 0};
  const auto in = assemble_example(t1(), 0, spec, constant_encoder(3), constant_encoder(2), 3, 2);
  EXPECT_EQ(in.local_mask, (std::vector<bool>{false, false}));
  const auto flat = in.flat();
  EXPECT_TRUE(flat.head(6).isZero(0.0));
  EXPECT_TRUE(flat.tail(3).isConstant(1.0, 0.0));
}

TEST(Assemble, BaselineIsTargetOnly) {
  const auto in = assemble_example(t1(), 3, ContextSpec{}, constant_encoder(2514), constant_encoder(200), 2514, 200);
  EXPECT_EQ(in.flat().size(), 2514);
  EXPECT_TRUE(in.local.empty());
  EXPECT_TRUE(in.speaker.empty());
}

TEST(Assemble, SpeakerItemsInChronologicalOrder) {
  const ContextSpec spec{0, LocalPosition::Both, 3};
  const auto in = assemble_example(t1(), 4, spec, constant_encoder(4), constant_encoder(2), 4, 2);
  ASSERT_EQ(in.speaker.size(), 3u);
  EXPECT_EQ(in.speaker[0], Eigen::Vector2d(1, 1));
  EXPECT_EQ(in.speaker[2], Eigen::Vector2d(3, 3));
}

TEST(Assemble, EncoderDimensionMismatch) {
  EXPECT_THROW(assemble_example(t1(), 0, ContextSpec{}, constant_encoder(3), constant_encoder(2), 4, 2), DataError);
}
