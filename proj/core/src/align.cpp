#include "ptalign/align.hpp"

#include <string>

#include "ptalign/error.hpp"

namespace ptalign {

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::ot:
      return "ot";
    case Strategy::mined:
      return "mined";
    case Strategy::em:
      return "em";
  }
  return "?";
}

Strategy parse_strategy(std::string_view name) {
  if (name == "ot") return Strategy::ot;
  if (name == "mined") return Strategy::mined;
  if (name == "em") return Strategy::em;
  throw Error("unknown strategy '" + std::string(name) + "'");
}

void AlignConfig::validate() const {
  if (window < 1) throw Error("window must be at least 1");
  ot.validate();
}

double AlignStats::mean_plan_cost() const {
  return transport_steps ? plan_cost_sum / static_cast<double>(transport_steps) : 0.0;
}

double AlignStats::mean_iterations() const {
  return transport_steps ? iteration_sum / static_cast<double>(transport_steps) : 0.0;
}

AlignStats& AlignStats::operator+=(const AlignStats& o) {
  one_to_one_groups += o.one_to_one_groups;
  fallback_steps += o.fallback_steps;
  transport_steps += o.transport_steps;
  unconverged_steps += o.unconverged_steps;
  plan_cost_sum += o.plan_cost_sum;
  iteration_sum += o.iteration_sum;
  return *this;
}

namespace {

StepDistribution prepare_window(const StepDistribution& step, std::size_t window) {
  return to_probabilities(truncate_window(step, window));
}

Vector as_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

void check_inputs(const DistributionMatrix& m, const Vocabulary& vocab, const char* role) {
  if (m.vocab != vocab.name()) {
    throw Error(std::string(role) + " matrix names vocabulary '" + m.vocab + "' but '" +
                vocab.name() + "' was supplied");
  }
  if (m.gold_ids.empty()) throw Error(std::string(role) + " matrix is empty");
  if (m.steps.size() != m.gold_ids.size()) {
    throw Error(std::string(role) + " matrix has mismatched steps and gold ids");
  }
}

template <typename StepFn>
DistributionMatrix align_with(const DistributionMatrix& src, const DistributionMatrix& tgt,
                              const Vocabulary& src_vocab, const Vocabulary& tgt_vocab,
                              const AlignConfig& cfg, AlignStats* stats, StepFn&& step_fn) {
  cfg.validate();
  check_inputs(src, src_vocab, "source");
  check_inputs(tgt, tgt_vocab, "target");
  const auto src_seq = decode_sequence(src_vocab, src.gold_ids);
  const auto tgt_seq = decode_sequence(tgt_vocab, tgt.gold_ids);
  const auto pairing = pair_tokens(src_seq, tgt_seq);

  AlignStats local;
  DistributionMatrix out{tgt.vocab, tgt.gold_ids, std::vector<StepDistribution>(tgt.size())};
  for (const auto& group : pairing.groups) {
    if (group.one_to_one) {
      ++local.one_to_one_groups;
      const std::size_t j = group.src.front();
      const std::size_t k = group.tgt.front();
      try {
        out.steps[k] = step_fn(src.steps[j], tgt.steps[k], local);
      } catch (const Error& e) {
        throw Error("target step " + std::to_string(k) + " (source step " + std::to_string(j) +
                    "): " + e.what());
      }
      if (out.steps[k].empty()) {
        out.steps[k] = one_hot(tgt.gold_ids[k]);
        ++local.fallback_steps;
      }
    } else {
      for (std::size_t k : group.tgt) {
        out.steps[k] = one_hot(tgt.gold_ids[k]);
        ++local.fallback_steps;
      }
    }
  }
  if (stats) *stats += local;
  return out;
}

}  // namespace

StepAlignment align_step_ot(const StepDistribution& src_step, const StepDistribution& tgt_step,
                            const Vocabulary& src_vocab, const Vocabulary& tgt_vocab,
                            const AlignConfig& cfg) {
  const auto a = prepare_window(src_step, cfg.window);
  const auto b = prepare_window(tgt_step, cfg.window);
  const Matrix cost = build_cost(a, b, src_vocab, tgt_vocab);
  StepAlignment out;
  out.plan = sinkhorn(cost, as_vector(a.values), as_vector(b.values), cfg.ot);
  out.plan_cost = out.plan.cost(cost);
  out.fused = extract_fused(out.plan, b);
  return out;
}

StepDistribution align_step_baseline(const StepDistribution& src_step,
                                     const StepDistribution& tgt_step,
                                     const Vocabulary& src_vocab, const Vocabulary& tgt_vocab,
                                     const AlignConfig& cfg) {
  if (cfg.strategy == Strategy::ot) throw Error("align_step_baseline: strategy must be em or mined");
  const auto a = prepare_window(src_step, cfg.window);
  const auto b = prepare_window(tgt_step, cfg.window);
  StepDistribution fused{b.indices, std::vector<double>(b.size(), 0.0), ValueKind::probabilities};
  double moved = 0.0;
  for (std::size_t x = 0; x < a.size(); ++x) {
    const auto& text = decode(src_vocab, a.indices[x]);
    std::size_t dest = b.size();
    if (cfg.strategy == Strategy::em) {
      for (std::size_t y = 0; y < b.size(); ++y) {
        if (decode(tgt_vocab, b.indices[y]) == text) {
          dest = y;
          break;
        }
      }
    } else {
      double best = 0.0;
      for (std::size_t y = 0; y < b.size(); ++y) {
        const double c = token_cost(text, decode(tgt_vocab, b.indices[y]));
        if (dest == b.size() || c < best) {
          best = c;
          dest = y;
        }
      }
    }
    if (dest == b.size()) continue;
    fused.values[dest] += a.values[x];
    moved += a.values[x];
  }
  if (!(moved > 0.0)) return {};
  for (double& v : fused.values) v /= moved;
  return fused;
}

DistributionMatrix align_matrices(const DistributionMatrix& src, const DistributionMatrix& tgt,
                                  const Vocabulary& src_vocab, const Vocabulary& tgt_vocab,
                                  const AlignConfig& cfg, AlignStats* stats) {
  if (cfg.strategy != Strategy::ot) {
    return align_baseline(src, tgt, src_vocab, tgt_vocab, cfg, stats);
  }
  return align_with(src, tgt, src_vocab, tgt_vocab, cfg, stats,
                    [&](const StepDistribution& s, const StepDistribution& t, AlignStats& st) {
                      auto r = align_step_ot(s, t, src_vocab, tgt_vocab, cfg);
                      ++st.transport_steps;
                      if (!r.plan.converged) ++st.unconverged_steps;
                      st.plan_cost_sum += r.plan_cost;
                      st.iteration_sum += static_cast<double>(r.plan.iterations);
                      return std::move(r.fused);
                    });
}

DistributionMatrix align_baseline(const DistributionMatrix& src, const DistributionMatrix& tgt,
                                  const Vocabulary& src_vocab, const Vocabulary& tgt_vocab,
                                  const AlignConfig& cfg, AlignStats* stats) {
  if (cfg.strategy == Strategy::ot) throw Error("align_baseline: strategy must be em or mined");
  return align_with(src, tgt, src_vocab, tgt_vocab, cfg, stats,
                    [&](const StepDistribution& s, const StepDistribution& t, AlignStats&) {
                      return align_step_baseline(s, t, src_vocab, tgt_vocab, cfg);
                    });
}

DistributionMatrix fuse_pipeline(const std::vector<DistributionMatrix>& sources,
                                 const std::vector<Vocabulary>& source_vocabs,
                                 const DistributionMatrix& tgt, const Vocabulary& tgt_vocab,
                                 const AlignConfig& cfg, const FusionConfig& fusion,
                                 AlignStats* stats) {
  if (sources.empty()) throw Error("fuse_pipeline: at least one source is required");
  if (sources.size() != source_vocabs.size()) {
    throw Error("fuse_pipeline: " + std::to_string(sources.size()) + " sources but " +
                std::to_string(source_vocabs.size()) + " vocabularies");
  }
  fusion.validate();
  DistributionMatrix running = tgt;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    try {
      auto aligned = align_matrices(sources[i], running, source_vocabs[i], tgt_vocab, cfg, stats);
      running = fuse_combine({running, std::move(aligned)}, fusion);
    } catch (const Error& e) {
      throw Error("fusion stage " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return running;
}

}  // namespace ptalign
