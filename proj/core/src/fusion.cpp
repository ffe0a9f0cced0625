#include "ptalign/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <unordered_map>

#include "ptalign/error.hpp"

namespace ptalign {

namespace {

StepDistribution as_probabilities(const StepDistribution& s) {
  return s.kind == ValueKind::logits ? softmax_step(s) : s;
}

double neg_log(double p) { return -std::log(std::max(p, kLogClamp)); }

void check_same_length(const DistributionMatrix& a, const DistributionMatrix& b,
                       const char* what) {
  if (a.size() != b.size()) {
    throw Error(std::string(what) + ": matrices have " + std::to_string(a.size()) + " and " +
                std::to_string(b.size()) + " steps");
  }
}

}  // namespace

void FusionConfig::validate() const {
  if (!(combination_weight >= 0.0 && combination_weight <= 1.0)) {
    throw Error("combination weight must lie in [0, 1]");
  }
}

double clm_loss(const DistributionMatrix& q, const std::vector<TokenId>& gold_ids) {
  if (q.steps.empty()) throw Error("clm_loss: empty matrix");
  if (q.size() != gold_ids.size()) {
    throw Error("clm_loss: " + std::to_string(q.size()) + " steps but " +
                std::to_string(gold_ids.size()) + " gold ids");
  }
  double total = 0.0;
  for (std::size_t k = 0; k < q.size(); ++k) {
    total += neg_log(as_probabilities(q.steps[k]).value_of(gold_ids[k]));
  }
  return total / static_cast<double>(q.size());
}

double sequence_ce(const DistributionMatrix& m) { return clm_loss(m, m.gold_ids); }

double fusion_loss(const DistributionMatrix& q, const DistributionMatrix& p_f,
                   const FusionConfig& cfg) {
  if (q.steps.empty()) throw Error("fusion_loss: empty matrix");
  check_same_length(q, p_f, "fusion_loss");
  double total = 0.0;
  for (std::size_t k = 0; k < q.size(); ++k) {
    const auto qs = as_probabilities(q.steps[k]);
    const auto ps = as_probabilities(p_f.steps[k]);
    double d = 0.0;
    for (std::size_t i = 0; i < ps.size(); ++i) {
      const double p = ps.values[i];
      if (p <= 0.0) continue;
      const double lq = neg_log(qs.value_of(ps.indices[i]));
      d += cfg.discrepancy == Discrepancy::kl ? p * (std::log(p) + lq) : p * lq;
    }
    total += d;
  }
  return total / static_cast<double>(q.size());
}

double combined_loss(const DistributionMatrix& q, const std::vector<TokenId>& gold_ids,
                     const DistributionMatrix& p_f, const FusionConfig& cfg) {
  cfg.validate();
  const double w = cfg.combination_weight;
  return w * clm_loss(q, gold_ids) + (1.0 - w) * fusion_loss(q, p_f, cfg);
}

std::vector<double> avgce_weights(const std::vector<DistributionMatrix>& candidates) {
  std::vector<double> ce;
  ce.reserve(candidates.size());
  for (const auto& c : candidates) ce.push_back(sequence_ce(c));
  const double lo = *std::min_element(ce.begin(), ce.end());
  std::vector<double> w;
  double total = 0.0;
  for (double x : ce) {
    w.push_back(std::exp(-(x - lo)));
    total += w.back();
  }
  for (double& x : w) x /= total;
  return w;
}

DistributionMatrix fuse_combine(const std::vector<DistributionMatrix>& candidates,
                                const FusionConfig& cfg) {
  if (candidates.empty()) throw Error("fuse_combine: no candidates");
  for (const auto& c : candidates) {
    if (c.vocab != candidates.front().vocab) {
      throw Error("fuse_combine: candidates use different vocabularies");
    }
    check_same_length(candidates.front(), c, "fuse_combine");
  }

  if (cfg.function == FusionFunction::mince) {
    std::size_t best = 0;
    double best_ce = sequence_ce(candidates[0]);
    for (std::size_t i = 1; i < candidates.size(); ++i) {
      const double ce = sequence_ce(candidates[i]);
      if (ce < best_ce) {
        best_ce = ce;
        best = i;
      }
    }
    return candidates[best];
  }

  const auto weights = avgce_weights(candidates);
  DistributionMatrix out{candidates.front().vocab, candidates.front().gold_ids, {}};
  for (std::size_t k = 0; k < out.gold_ids.size(); ++k) {
    StepDistribution step{{}, {}, ValueKind::probabilities};
    std::unordered_map<TokenId, std::size_t> slot;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      const auto s = as_probabilities(candidates[c].steps[k]);
      for (std::size_t i = 0; i < s.size(); ++i) {
        auto [it, fresh] = slot.emplace(s.indices[i], step.indices.size());
        if (fresh) {
          step.indices.push_back(s.indices[i]);
          step.values.push_back(0.0);
        }
        step.values[it->second] += weights[c] * s.values[i];
      }
    }
    double total = 0.0;
    for (double v : step.values) total += v;
    for (double& v : step.values) v /= total;
    out.steps.push_back(std::move(step));
  }
  return out;
}

ToyModel::ToyModel(std::size_t vocab_size)
    : table_(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(vocab_size + 1),
                                   static_cast<Eigen::Index>(vocab_size))) {
  if (vocab_size == 0) throw Error("toy model needs a non-empty vocabulary");
}

ToyModel ToyModel::random(std::size_t vocab_size, std::uint64_t seed, double scale) {
  ToyModel m(vocab_size);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  for (Eigen::Index r = 0; r < m.table_.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.table_.cols(); ++c) m.table_(r, c) = normal(rng);
  }
  return m;
}

namespace {

Eigen::VectorXd softmax_row(const Eigen::MatrixXd& table, Eigen::Index row) {
  Eigen::VectorXd z = table.row(row).transpose();
  z.array() -= z.maxCoeff();
  z = z.array().exp().matrix();
  return z / z.sum();
}

Eigen::Index context_row(const ToyModel& model, const std::vector<TokenId>& ids, std::size_t k) {
  if (k == 0) return static_cast<Eigen::Index>(model.start_row());
  return static_cast<Eigen::Index>(ids[k - 1]);
}

void check_ids(const ToyModel& model, const std::vector<TokenId>& ids) {
  for (TokenId id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= model.vocab_size()) {
      throw Error("token id " + std::to_string(id) + " outside the toy model vocabulary");
    }
  }
}

}  // namespace

DistributionMatrix ToyModel::predict(const std::vector<TokenId>& ids,
                                     const std::string& vocab) const {
  check_ids(*this, ids);
  DistributionMatrix m{vocab, ids, {}};
  std::vector<TokenId> all(vocab_size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<TokenId>(i);
  for (std::size_t k = 0; k < ids.size(); ++k) {
    const auto p = softmax_row(table_, context_row(*this, ids, k));
    m.steps.push_back({all, std::vector<double>(p.data(), p.data() + p.size()),
                       ValueKind::probabilities});
  }
  return m;
}

LossAndGradient toy_loss_and_gradient(const ToyModel& model,
                                      const std::vector<std::vector<TokenId>>& corpus,
                                      const std::vector<DistributionMatrix>& p_f,
                                      const FusionConfig& cfg) {
  cfg.validate();
  if (corpus.empty()) throw Error("toy trainer: empty corpus");
  if (corpus.size() != p_f.size()) {
    throw Error("toy trainer: " + std::to_string(corpus.size()) + " sequences but " +
                std::to_string(p_f.size()) + " fused matrices");
  }
  const double w = cfg.combination_weight;
  LossAndGradient out;
  out.gradient = Eigen::MatrixXd::Zero(model.table().rows(), model.table().cols());
  const double seq_scale = 1.0 / static_cast<double>(corpus.size());

  for (std::size_t s = 0; s < corpus.size(); ++s) {
    const auto& ids = corpus[s];
    check_ids(model, ids);
    if (ids.empty()) throw Error("toy trainer: empty sequence " + std::to_string(s));
    if (p_f[s].size() != ids.size()) {
      throw Error("toy trainer: fused matrix " + std::to_string(s) + " has " +
                  std::to_string(p_f[s].size()) + " steps for a sequence of " +
                  std::to_string(ids.size()));
    }
    const double step_scale = seq_scale / static_cast<double>(ids.size());
    double clm = 0.0;
    double fus = 0.0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const Eigen::Index row = context_row(model, ids, k);
      const Eigen::VectorXd q = softmax_row(model.table(), row);
      const auto target = as_probabilities(p_f[s].steps[k]);

      clm += neg_log(q[ids[k]]);
      double mass = 0.0;
      double d = 0.0;
      Eigen::VectorXd dense = Eigen::VectorXd::Zero(q.size());
      for (std::size_t i = 0; i < target.size(); ++i) {
        const TokenId id = target.indices[i];
        const double p = target.values[i];
        if (id < 0 || id >= q.size()) throw Error("fused index outside the toy vocabulary");
        dense[id] += p;
        mass += p;
        if (p <= 0.0) continue;
        const double lq = neg_log(q[id]);
        d += cfg.discrepancy == Discrepancy::kl ? p * (std::log(p) + lq) : p * lq;
      }
      fus += d;

      Eigen::VectorXd g = w * q;
      g[ids[k]] -= w;
      g += (1.0 - w) * (mass * q - dense);
      out.gradient.row(row) += step_scale * g.transpose();
    }
    out.loss.clm += clm / static_cast<double>(ids.size());
    out.loss.fusion += fus / static_cast<double>(ids.size());
  }
  out.loss.clm *= seq_scale;
  out.loss.fusion *= seq_scale;
  out.loss.combined = w * out.loss.clm + (1.0 - w) * out.loss.fusion;
  return out;
}

double toy_clm(const ToyModel& model, const std::vector<std::vector<TokenId>>& corpus) {
  if (corpus.empty()) throw Error("toy_clm: empty corpus");
  double total = 0.0;
  for (const auto& ids : corpus) total += clm_loss(model.predict(ids), ids);
  return total / static_cast<double>(corpus.size());
}

TrainResult train_toy(ToyModel model, const std::vector<std::vector<TokenId>>& corpus,
                      const std::vector<DistributionMatrix>& p_f, const FusionConfig& cfg,
                      const TrainOptions& opts) {
  if (!(opts.learning_rate > 0.0)) throw Error("learning rate must be positive");
  TrainResult result;
  for (std::size_t epoch = 0;; ++epoch) {
    auto lg = toy_loss_and_gradient(model, corpus, p_f, cfg);
    lg.loss.epoch = epoch;
    if (!std::isfinite(lg.loss.combined)) {
      throw Error("toy trainer: non-finite loss at epoch " + std::to_string(epoch));
    }
    if (!result.trace.empty() && lg.loss.combined > result.trace.back().combined) {
      result.diverged = true;
    }
    result.trace.push_back(lg.loss);
    if (epoch == opts.epochs) break;
    model.table() -= opts.learning_rate * lg.gradient;
  }
  result.model = std::move(model);
  return result;
}

}  // namespace ptalign
