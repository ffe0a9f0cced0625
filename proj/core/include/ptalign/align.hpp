#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "ptalign/dist.hpp"
#include "ptalign/fusion.hpp"
#include "ptalign/pairing.hpp"
#include "ptalign/transport.hpp"
#include "ptalign/vocab.hpp"

namespace ptalign {

enum class Strategy { ot, mined, em };

std::string_view to_string(Strategy s);
Strategy parse_strategy(std::string_view name);

struct AlignConfig {
  Strategy strategy = Strategy::ot;
  OtConfig ot;
  /// Top-k entries kept from every step before alignment.
  std::size_t window = 10;

  void validate() const;
};

/// Counters accumulated over one or more aligned sequences.
struct AlignStats {
  std::size_t one_to_one_groups = 0;
  std::size_t fallback_steps = 0;
  std::size_t transport_steps = 0;
  std::size_t unconverged_steps = 0;
  double plan_cost_sum = 0.0;
  double iteration_sum = 0.0;

  double mean_plan_cost() const;
  double mean_iterations() const;
  AlignStats& operator+=(const AlignStats& other);
};

/// Fuses `src` into the target's token space. Pairing runs on the decoded
/// gold sequences; every one-to-one group is aligned step-wise according
/// to `cfg.strategy`, every other target position becomes a one-hot at its
/// gold id. The result has one probability step per target position.
DistributionMatrix align_matrices(const DistributionMatrix& src, const DistributionMatrix& tgt,
                                  const Vocabulary& src_vocab, const Vocabulary& tgt_vocab,
                                  const AlignConfig& cfg, AlignStats* stats = nullptr);

/// Hard-mapping baselines: exact string match (em) or minimum edit
/// distance (mined). `cfg.strategy` must be one of them.
DistributionMatrix align_baseline(const DistributionMatrix& src, const DistributionMatrix& tgt,
                                  const Vocabulary& src_vocab, const Vocabulary& tgt_vocab,
                                  const AlignConfig& cfg, AlignStats* stats = nullptr);

/// One step aligned by transport: softmax/renormalise both windows, solve,
/// extract. Exposed for reference compositions and diagnostics.
struct StepAlignment {
  StepDistribution fused;
  TransportPlan plan;
  double plan_cost = 0.0;
};
StepAlignment align_step_ot(const StepDistribution& src_step, const StepDistribution& tgt_step,
                            const Vocabulary& src_vocab, const Vocabulary& tgt_vocab,
                            const AlignConfig& cfg);

/// Baseline step transfer; returns an empty step when nothing transfers.
StepDistribution align_step_baseline(const StepDistribution& src_step,
                                     const StepDistribution& tgt_step,
                                     const Vocabulary& src_vocab, const Vocabulary& tgt_vocab,
                                     const AlignConfig& cfg);

/// Recursive multi-source fusion: stage i aligns source i against the
/// running matrix (initially `tgt`) and keeps fuse_combine({running, aligned}).
DistributionMatrix fuse_pipeline(const std::vector<DistributionMatrix>& sources,
                                 const std::vector<Vocabulary>& source_vocabs,
                                 const DistributionMatrix& tgt, const Vocabulary& tgt_vocab,
                                 const AlignConfig& cfg, const FusionConfig& fusion,
                                 AlignStats* stats = nullptr);

}  // namespace ptalign
