#pragma once

#include <cstddef>

#include <Eigen/Dense>

#include "ptalign/dist.hpp"
#include "ptalign/vocab.hpp"

namespace ptalign {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Solver settings. `temperature` scales the cost in the initial kernel
/// exp(-temperature * C).
struct OtConfig {
  double temperature = 10.0;
  double threshold = 1e-5;
  std::size_t max_iterations = 1000;

  /// Throws Error when any field is out of range.
  void validate() const;
};

struct TransportPlan {
  Matrix entries;
  Vector row_marginal;
  Vector col_marginal;
  std::size_t iterations = 0;
  bool converged = false;

  /// L1 deviation of row sums plus L1 deviation of column sums.
  double marginal_error() const;
  /// <C, plan>.
  double cost(const Matrix& cost) const;
};

/// entry (x, y) = token_cost of the decoded source and target window entries.
Matrix build_cost(const StepDistribution& src_step, const StepDistribution& tgt_step,
                  const Vocabulary& src_vocab, const Vocabulary& tgt_vocab);

/// Entropic OT by alternating row and column scaling of exp(-temperature * C).
/// Zero-mass marginal entries pin their row or column to zero.
TransportPlan sinkhorn(const Matrix& cost, const Vector& a, const Vector& b, const OtConfig& cfg);

/// Reference solver for the unregularised 2x2 problem by scanning the
/// one-parameter family of feasible plans on a uniform grid.
TransportPlan exact_ot_2x2(const Matrix& cost, const Vector& a, const Vector& b,
                           std::size_t grid_points = 100000);

/// Fused step from a plan: each source row sends its largest entry to the
/// corresponding target index; coinciding contributions add up. The output
/// keeps the target window's index list and is renormalised.
StepDistribution extract_fused(const TransportPlan& plan, const StepDistribution& tgt_step);

}  // namespace ptalign
