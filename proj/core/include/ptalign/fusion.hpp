#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "ptalign/dist.hpp"

namespace ptalign {

enum class FusionFunction { mince, avgce };
enum class Discrepancy { cross_entropy, kl };

struct FusionConfig {
  FusionFunction function = FusionFunction::mince;
  Discrepancy discrepancy = Discrepancy::cross_entropy;
  /// Weight of the language-modelling loss; the fusion loss gets the rest.
  double combination_weight = 0.8;

  void validate() const;
};

/// Floor applied to every probability before taking a log.
inline constexpr double kLogClamp = 1e-12;

/// Mean over steps of -log p[gold]; gold ids outside a window score
/// -log(kLogClamp). Logit steps are softmaxed first.
double sequence_ce(const DistributionMatrix& m);

/// MinCE returns the candidate with the lowest sequence_ce (earliest on
/// ties). AvgCE averages candidates per step with weights proportional to
/// exp(-sequence_ce).
DistributionMatrix fuse_combine(const std::vector<DistributionMatrix>& candidates,
                                const FusionConfig& cfg);

/// AvgCE weights for the given candidates, in order.
std::vector<double> avgce_weights(const std::vector<DistributionMatrix>& candidates);

/// Mean over steps of D(q, p_f).
double fusion_loss(const DistributionMatrix& q, const DistributionMatrix& p_f,
                   const FusionConfig& cfg);

/// Mean over steps of -log q[gold].
double clm_loss(const DistributionMatrix& q, const std::vector<TokenId>& gold_ids);

double combined_loss(const DistributionMatrix& q, const std::vector<TokenId>& gold_ids,
                     const DistributionMatrix& p_f, const FusionConfig& cfg);

/// Tabular next-token model. Row r holds the logits that follow token r;
/// the extra last row is the start-of-sequence context.
class ToyModel {
 public:
  ToyModel() = default;
  explicit ToyModel(std::size_t vocab_size);
  /// Parameters drawn from N(0, scale^2) with a seeded generator.
  static ToyModel random(std::size_t vocab_size, std::uint64_t seed, double scale = 0.1);

  std::size_t vocab_size() const noexcept { return static_cast<std::size_t>(table_.cols()); }
  std::size_t start_row() const noexcept { return vocab_size(); }
  Eigen::MatrixXd& table() noexcept { return table_; }
  const Eigen::MatrixXd& table() const noexcept { return table_; }

  /// Dense next-token probabilities at every position of `ids`.
  DistributionMatrix predict(const std::vector<TokenId>& ids, const std::string& vocab = "") const;

 private:
  Eigen::MatrixXd table_;
};

struct LossRecord {
  std::size_t epoch = 0;
  double clm = 0.0;
  double fusion = 0.0;
  double combined = 0.0;
};

/// Corpus losses (mean over sequences) and the gradient of `combined` with
/// respect to the model table.
struct LossAndGradient {
  LossRecord loss;
  Eigen::MatrixXd gradient;
};

LossAndGradient toy_loss_and_gradient(const ToyModel& model,
                                      const std::vector<std::vector<TokenId>>& corpus,
                                      const std::vector<DistributionMatrix>& p_f,
                                      const FusionConfig& cfg);

/// Mean clm_loss of the model over a corpus.
double toy_clm(const ToyModel& model, const std::vector<std::vector<TokenId>>& corpus);

struct TrainOptions {
  double learning_rate = 1.0;
  std::size_t epochs = 100;
};

struct TrainResult {
  ToyModel model;
  /// One record per evaluated model state: entry e is the loss after e updates.
  std::vector<LossRecord> trace;
  /// Set when the combined loss ever increased between epochs.
  bool diverged = false;
};

/// Full-batch gradient descent on the combined objective.
TrainResult train_toy(ToyModel model, const std::vector<std::vector<TokenId>>& corpus,
                      const std::vector<DistributionMatrix>& p_f, const FusionConfig& cfg,
                      const TrainOptions& opts);

}  // namespace ptalign
