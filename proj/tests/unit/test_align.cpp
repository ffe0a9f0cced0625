#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "ptalign/align.hpp"
#include "ptalign/error.hpp"
#include "ptalign/fixtures.hpp"

namespace ptalign {
namespace {

double step_sum(const StepDistribution& s) {
  return std::accumulate(s.values.begin(), s.values.end(), 0.0);
}

void expect_probability_matrix(const DistributionMatrix& m, const DistributionMatrix& tgt) {
  ASSERT_EQ(m.size(), tgt.size());
  EXPECT_EQ(m.vocab, tgt.vocab);
  EXPECT_EQ(m.gold_ids, tgt.gold_ids);
  for (const auto& s : m.steps) {
    EXPECT_EQ(s.kind, ValueKind::probabilities);
    EXPECT_NEAR(step_sum(s), 1.0, 1e-9);
  }
}

class AlignFixtureTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() { fx_ = new FixtureSet(generate_fixtures({})); }
  static void TearDownTestSuite() {
    delete fx_;
    fx_ = nullptr;
  }
  static FixtureSet* fx_;
};
FixtureSet* AlignFixtureTest::fx_ = nullptr;

/// Straight-line reference: pair, then per one-to-one pair softmax (plain
/// exp), build the cost, solve, extract.
DistributionMatrix reference_align(const DistributionMatrix& src, const DistributionMatrix& tgt,
                                   const Vocabulary& sv, const Vocabulary& tv,
                                   const OtConfig& ot) {
  std::vector<std::string> s_txt;
  std::vector<std::string> t_txt;
  for (TokenId id : src.gold_ids) s_txt.push_back(sv.tokens()[static_cast<std::size_t>(id)]);
  for (TokenId id : tgt.gold_ids) t_txt.push_back(tv.tokens()[static_cast<std::size_t>(id)]);
  const auto pairing = pair_tokens(s_txt, t_txt);
  DistributionMatrix out{tgt.vocab, tgt.gold_ids, std::vector<StepDistribution>(tgt.size())};
  for (const auto& g : pairing.groups) {
    if (!g.one_to_one) {
      for (auto k : g.tgt) out.steps[k] = {{tgt.gold_ids[k]}, {1.0}, ValueKind::probabilities};
      continue;
    }
    const auto& a_step = src.steps[g.src[0]];
    const auto& b_step = tgt.steps[g.tgt[0]];
    const auto pa = testing::naive_softmax(a_step.values);
    const auto pb = testing::naive_softmax(b_step.values);
    StepDistribution a{a_step.indices, pa, ValueKind::probabilities};
    StepDistribution b{b_step.indices, pb, ValueKind::probabilities};
    const Matrix c = build_cost(a, b, sv, tv);
    const auto plan = sinkhorn(c, Eigen::Map<const Vector>(pa.data(), static_cast<Eigen::Index>(pa.size())),
                               Eigen::Map<const Vector>(pb.data(), static_cast<Eigen::Index>(pb.size())), ot);
    out.steps[g.tgt[0]] = extract_fused(plan, b);
  }
  return out;
}

void expect_close(const DistributionMatrix& a, const DistributionMatrix& b, double tol) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    ASSERT_EQ(a.steps[k].indices, b.steps[k].indices) << "step " << k;
    for (std::size_t i = 0; i < a.steps[k].size(); ++i) {
      ASSERT_NEAR(a.steps[k].values[i], b.steps[k].values[i], tol) << "step " << k;
    }
  }
}

TEST_F(AlignFixtureTest, MatchesReferenceComposition) {
  const AlignConfig cfg;
  for (std::size_t s = 0; s < fx_->target.size(); ++s) {
    AlignStats stats;
    const auto fused = align_matrices(fx_->source[s], fx_->target[s], fx_->bigram_vocab,
                                      fx_->char_vocab, cfg, &stats);
    expect_probability_matrix(fused, fx_->target[s]);
    const auto ref = reference_align(fx_->source[s], fx_->target[s], fx_->bigram_vocab,
                                     fx_->char_vocab, cfg.ot);
    expect_close(fused, ref, 1e-12);
    EXPECT_EQ(stats.transport_steps, stats.one_to_one_groups);
    EXPECT_EQ(stats.one_to_one_groups + stats.fallback_steps, fused.size());
  }
}

TEST_F(AlignFixtureTest, StrategiesAgreeOnFallbackSteps) {
  for (std::size_t s = 0; s < fx_->target.size(); ++s) {
    const auto& src = fx_->source[s];
    const auto& tgt = fx_->target[s];
    AlignConfig cfg;
    const auto ot = align_matrices(src, tgt, fx_->bigram_vocab, fx_->char_vocab, cfg);
    cfg.strategy = Strategy::mined;
    const auto mined = align_matrices(src, tgt, fx_->bigram_vocab, fx_->char_vocab, cfg);
    cfg.strategy = Strategy::em;
    const auto em = align_matrices(src, tgt, fx_->bigram_vocab, fx_->char_vocab, cfg);
    expect_probability_matrix(mined, tgt);
    expect_probability_matrix(em, tgt);

    const auto pairing = pair_tokens(decode_sequence(fx_->bigram_vocab, src.gold_ids),
                                     decode_sequence(fx_->char_vocab, tgt.gold_ids));
    for (const auto& g : pairing.groups) {
      if (g.one_to_one) continue;
      for (auto k : g.tgt) {
        EXPECT_EQ(ot.steps[k], one_hot(tgt.gold_ids[k]));
        EXPECT_EQ(mined.steps[k], ot.steps[k]);
        EXPECT_EQ(em.steps[k], ot.steps[k]);
      }
    }
  }
}

TEST_F(AlignFixtureTest, OtIgnoresSourceWindowOrder) {
  std::mt19937_64 rng(4);
  const AlignConfig cfg;
  for (std::size_t s = 0; s < fx_->target.size(); ++s) {
    auto shuffled = fx_->source[s];
    for (auto& step : shuffled.steps) {
      std::vector<std::size_t> perm(step.size());
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      StepDistribution p{{}, {}, step.kind};
      for (auto i : perm) {
        p.indices.push_back(step.indices[i]);
        p.values.push_back(step.values[i]);
      }
      step = p;
    }
    const auto a = align_matrices(fx_->source[s], fx_->target[s], fx_->bigram_vocab,
                                  fx_->char_vocab, cfg);
    const auto b = align_matrices(shuffled, fx_->target[s], fx_->bigram_vocab, fx_->char_vocab, cfg);
    expect_close(a, b, 1e-9);
  }
}

TEST_F(AlignFixtureTest, TwoSourcePipelineMatchesManualStages) {
  const AlignConfig cfg;
  for (auto fn : {FusionFunction::mince, FusionFunction::avgce}) {
    FusionConfig fusion;
    fusion.function = fn;
    for (std::size_t s = 0; s < fx_->target.size(); ++s) {
      const auto& t = fx_->target[s];
      const auto out = fuse_pipeline({fx_->source[s], fx_->source2[s]},
                                     {fx_->bigram_vocab, fx_->bigram_vocab}, t, fx_->char_vocab,
                                     cfg, fusion);
      const auto a1 = align_matrices(fx_->source[s], t, fx_->bigram_vocab, fx_->char_vocab, cfg);
      const auto r1 = fuse_combine({t, a1}, fusion);
      const auto a2 = align_matrices(fx_->source2[s], r1, fx_->bigram_vocab, fx_->char_vocab, cfg);
      const auto r2 = fuse_combine({r1, a2}, fusion);
      EXPECT_EQ(out, r2);
      if (fn == FusionFunction::mince) {
        EXPECT_LE(sequence_ce(r2), sequence_ce(r1));
        EXPECT_LE(sequence_ce(r1), sequence_ce(t));
      }
    }
  }
}

TEST_F(AlignFixtureTest, SingleSourcePipelineIsOneStage) {
  const AlignConfig cfg;
  const FusionConfig fusion;
  const auto& t = fx_->target[0];
  const auto out = fuse_pipeline({fx_->source[0]}, {fx_->bigram_vocab}, t, fx_->char_vocab, cfg, fusion);
  EXPECT_EQ(out, fuse_combine({t, align_matrices(fx_->source[0], t, fx_->bigram_vocab,
                                                 fx_->char_vocab, cfg)},
                              fusion));
  EXPECT_THROW(fuse_pipeline({}, {}, t, fx_->char_vocab, cfg, fusion), Error);
}

TEST(FusePipelineTest, IdenticalSourcesKeepStageOneResult) {
  // The target already predicts its gold tokens perfectly, so MinCE keeps
  // it at stage 1 and the identical stage-2 candidate ties and loses.
  const Vocabulary v("v", {"a", "b", "c"});
  const DistributionMatrix tgt{"v", {0, 1}, {one_hot(0), one_hot(1)}};
  const DistributionMatrix src{"v",
                               {0, 1},
                               {{{0, 1}, {0.0, 0.0}, ValueKind::logits},
                                {{1, 2}, {0.0, 0.0}, ValueKind::logits}}};
  const AlignConfig cfg;
  const FusionConfig fusion;
  const auto stage1 = fuse_pipeline({src}, {v}, tgt, v, cfg, fusion);
  const auto stage2 = fuse_pipeline({src, src}, {v, v}, tgt, v, cfg, fusion);
  EXPECT_EQ(stage1, tgt);
  EXPECT_EQ(stage2, stage1);
}

TEST(AlignTest, IdenticalInputsKeepTargetArgmax) {
  const Vocabulary v("v", {"the", "cat", "sat", "on", "mat", "a", "an"});
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n(0.0, 2.0);
  DistributionMatrix m{"v", {0, 1, 2, 3, 5, 4}, {}};
  for (std::size_t k = 0; k < m.gold_ids.size(); ++k) {
    StepDistribution s{{0, 1, 2, 3, 4, 5, 6}, {}, ValueKind::logits};
    for (int i = 0; i < 7; ++i) s.values.push_back(n(rng));
    m.steps.push_back(s);
  }
  for (auto strategy : {Strategy::ot, Strategy::mined, Strategy::em}) {
    AlignConfig cfg;
    cfg.strategy = strategy;
    AlignStats stats;
    const auto fused = align_matrices(m, m, v, v, cfg, &stats);
    EXPECT_EQ(stats.one_to_one_groups, m.size());
    EXPECT_EQ(stats.fallback_steps, 0u);
    for (std::size_t k = 0; k < m.size(); ++k) {
      EXPECT_EQ(fused.steps[k].indices[fused.steps[k].argmax()],
                m.steps[k].indices[m.steps[k].argmax()])
          << to_string(strategy) << " step " << k;
    }
    if (strategy == Strategy::em) {
      for (std::size_t k = 0; k < m.size(); ++k) {
        const auto expected = softmax_step(m.steps[k]);
        for (std::size_t i = 0; i < expected.size(); ++i) {
          EXPECT_NEAR(fused.steps[k].values[i], expected.values[i], 1e-12);
        }
      }
    }
  }
}

TEST(AlignTest, OneSourceTokenAgainstThreeTargetsFallsBack) {
  const Vocabulary sv("s", {"abc", "x"});
  const Vocabulary tv("t", {"a", "b", "c"});
  const DistributionMatrix src{"s", {0}, {{{0, 1}, {1.0, 0.0}, ValueKind::logits}}};
  DistributionMatrix tgt{"t", {0, 1, 2}, {}};
  for (int k = 0; k < 3; ++k) tgt.steps.push_back({{0, 1, 2}, {0.2, 0.3, 0.5}, ValueKind::probabilities});
  for (auto strategy : {Strategy::ot, Strategy::mined, Strategy::em}) {
    AlignConfig cfg;
    cfg.strategy = strategy;
    const auto fused = align_matrices(src, tgt, sv, tv, cfg);
    for (int k = 0; k < 3; ++k) EXPECT_EQ(fused.steps[k], one_hot(k));
  }
}

TEST(AlignTest, EmWithoutOverlapFallsBackToGold) {
  const Vocabulary sv("s", {"x", "y"});
  const Vocabulary tv("t", {"a", "b"});
  const DistributionMatrix src{"s", {0}, {{{0, 1}, {0.5, 0.5}, ValueKind::probabilities}}};
  const DistributionMatrix tgt{"t", {1}, {{{0, 1}, {0.5, 0.5}, ValueKind::probabilities}}};
  AlignConfig cfg;
  cfg.strategy = Strategy::em;
  AlignStats stats;
  const auto fused = align_baseline(src, tgt, sv, tv, cfg, &stats);
  EXPECT_EQ(fused.steps[0], one_hot(1));
  EXPECT_EQ(stats.fallback_steps, 1u);
}

TEST(AlignTest, MinedMapsToNearestString) {
  const Vocabulary sv("s", {"the", "a"});
  const Vocabulary tv("t", {"the", "an"});
  const StepDistribution src{{0, 1}, {0.7, 0.3}, ValueKind::probabilities};
  const StepDistribution tgt{{0, 1}, {0.5, 0.5}, ValueKind::probabilities};
  AlignConfig cfg;
  cfg.strategy = Strategy::mined;
  const auto fused = align_step_baseline(src, tgt, sv, tv, cfg);
  // "the" -> "the" (cost 0); "a" -> "an" (1/2 beats 1).
  EXPECT_EQ(fused.indices, (std::vector<TokenId>{0, 1}));
  EXPECT_NEAR(fused.values[0], 0.7, 1e-15);
  EXPECT_NEAR(fused.values[1], 0.3, 1e-15);
}

TEST(AlignTest, WindowTruncatesBeforeSoftmax) {
  const Vocabulary v("v", {"a", "b", "c", "d"});
  const StepDistribution wide{{0, 1, 2, 3}, {3.0, 2.0, 1.0, 0.0}, ValueKind::logits};
  AlignConfig cfg;
  cfg.window = 2;
  const auto r = align_step_ot(wide, wide, v, v, cfg);
  EXPECT_EQ(r.fused.indices, (std::vector<TokenId>{0, 1}));
  EXPECT_EQ(r.plan.entries.rows(), 2);
}

TEST(AlignTest, Errors) {
  const Vocabulary v("v", {"a"});
  const Vocabulary w("w", {"a"});
  const DistributionMatrix m{"v", {0}, {one_hot(0)}};
  const AlignConfig cfg;
  EXPECT_THROW(align_matrices(m, m, w, v, cfg), Error);
  EXPECT_THROW(align_matrices(m, m, v, w, cfg), Error);
  AlignConfig bad;
  bad.window = 0;
  EXPECT_THROW(align_matrices(m, m, v, v, bad), Error);
  EXPECT_THROW(align_baseline(m, m, v, v, cfg), Error);
  EXPECT_THROW(parse_strategy("greedy"), Error);

  // Solver errors name the step.
  const DistributionMatrix nan_src{"v", {0}, {{{0}, {std::nan("")}, ValueKind::probabilities}}};
  try {
    align_matrices(nan_src, m, v, v, cfg);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("target step 0"), std::string::npos) << e.what();
  }
}

}  // namespace
}  // namespace ptalign
