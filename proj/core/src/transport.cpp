#include "ptalign/transport.hpp"

#include <cmath>
#include <string>

#include "ptalign/error.hpp"
#include "ptalign/pairing.hpp"

namespace ptalign {

namespace {

constexpr double kUnderflow = 1e-300;

void check_marginal(const Vector& v, const char* name) {
  if (v.size() == 0) throw Error(std::string("sinkhorn: empty marginal ") + name);
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i]) || v[i] < 0.0) {
      throw Error(std::string("sinkhorn: marginal ") + name + " has an invalid entry at " +
                  std::to_string(i));
    }
  }
  if (std::abs(v.sum() - 1.0) > kProbabilitySumTolerance) {
    throw Error(std::string("sinkhorn: marginal ") + name + " sums to " + format_double(v.sum()) +
                ", not 1");
  }
}

}  // namespace

void OtConfig::validate() const {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw Error("temperature must be positive");
  }
  if (!(threshold > 0.0)) throw Error("threshold must be positive");
  if (max_iterations < 1) throw Error("max_iterations must be at least 1");
}

double TransportPlan::marginal_error() const {
  return (entries.rowwise().sum() - row_marginal).cwiseAbs().sum() +
         (entries.colwise().sum().transpose() - col_marginal).cwiseAbs().sum();
}

double TransportPlan::cost(const Matrix& c) const { return c.cwiseProduct(entries).sum(); }

Matrix build_cost(const StepDistribution& src_step, const StepDistribution& tgt_step,
                  const Vocabulary& src_vocab, const Vocabulary& tgt_vocab) {
  if (src_step.empty() || tgt_step.empty()) throw Error("build_cost: empty step");
  Matrix c(static_cast<Eigen::Index>(src_step.size()), static_cast<Eigen::Index>(tgt_step.size()));
  for (std::size_t x = 0; x < src_step.size(); ++x) {
    const auto& a = decode(src_vocab, src_step.indices[x]);
    for (std::size_t y = 0; y < tgt_step.size(); ++y) {
      c(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y)) =
          token_cost(a, decode(tgt_vocab, tgt_step.indices[y]));
    }
  }
  return c;
}

TransportPlan sinkhorn(const Matrix& cost, const Vector& a, const Vector& b, const OtConfig& cfg) {
  cfg.validate();
  check_marginal(a, "a");
  check_marginal(b, "b");
  if (cost.rows() != a.size() || cost.cols() != b.size()) {
    throw Error("sinkhorn: cost is " + std::to_string(cost.rows()) + "x" +
                std::to_string(cost.cols()) + " but marginals have lengths " +
                std::to_string(a.size()) + " and " + std::to_string(b.size()));
  }
  if (!cost.allFinite()) throw Error("sinkhorn: non-finite cost entry");

  TransportPlan plan;
  plan.row_marginal = a;
  plan.col_marginal = b;
  plan.entries = (-cfg.temperature * cost).array().exp().matrix();
  for (Eigen::Index x = 0; x < a.size(); ++x) {
    if (a[x] == 0.0) plan.entries.row(x).setZero();
  }
  for (Eigen::Index y = 0; y < b.size(); ++y) {
    if (b[y] == 0.0) plan.entries.col(y).setZero();
  }

  for (std::size_t it = 1; it <= cfg.max_iterations; ++it) {
    for (Eigen::Index x = 0; x < a.size(); ++x) {
      if (a[x] == 0.0) continue;
      plan.entries.row(x) *= a[x] / std::max(plan.entries.row(x).sum(), kUnderflow);
    }
    for (Eigen::Index y = 0; y < b.size(); ++y) {
      if (b[y] == 0.0) continue;
      plan.entries.col(y) *= b[y] / std::max(plan.entries.col(y).sum(), kUnderflow);
    }
    if (!plan.entries.allFinite()) {
      throw Error("sinkhorn: non-finite plan entry at iteration " + std::to_string(it));
    }
    plan.iterations = it;
    if (plan.marginal_error() <= cfg.threshold) {
      plan.converged = true;
      break;
    }
  }
  return plan;
}

TransportPlan exact_ot_2x2(const Matrix& cost, const Vector& a, const Vector& b,
                           std::size_t grid_points) {
  if (cost.rows() != 2 || cost.cols() != 2 || a.size() != 2 || b.size() != 2) {
    throw Error("exact_ot_2x2 requires a 2x2 problem");
  }
  if (grid_points < 2) throw Error("exact_ot_2x2 needs at least two grid points");
  const double lo = std::max(0.0, a[0] + b[0] - 1.0);
  const double hi = std::min(a[0], b[0]);
  auto plan_at = [&](double t) {
    Matrix p(2, 2);
    p << t, a[0] - t, b[0] - t, 1.0 - a[0] - b[0] + t;
    return p;
  };

  double best_t = lo;
  double best_cost = cost.cwiseProduct(plan_at(lo)).sum();
  for (std::size_t i = 1; i < grid_points; ++i) {
    const double t = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(grid_points - 1);
    const double c = cost.cwiseProduct(plan_at(t)).sum();
    if (c < best_cost) {
      best_cost = c;
      best_t = t;
    }
  }
  TransportPlan plan;
  plan.entries = plan_at(best_t).cwiseMax(0.0);
  plan.row_marginal = a;
  plan.col_marginal = b;
  plan.iterations = grid_points;
  plan.converged = true;
  return plan;
}

StepDistribution extract_fused(const TransportPlan& plan, const StepDistribution& tgt_step) {
  if (plan.entries.size() == 0) throw Error("extract_fused: empty plan");
  if (static_cast<std::size_t>(plan.entries.cols()) != tgt_step.size()) {
    throw Error("extract_fused: plan has " + std::to_string(plan.entries.cols()) +
                " columns but the target window has " + std::to_string(tgt_step.size()) +
                " entries");
  }
  StepDistribution out{tgt_step.indices, std::vector<double>(tgt_step.size(), 0.0),
                       ValueKind::probabilities};
  for (Eigen::Index x = 0; x < plan.entries.rows(); ++x) {
    Eigen::Index col = 0;
    for (Eigen::Index y = 1; y < plan.entries.cols(); ++y) {
      if (plan.entries(x, y) > plan.entries(x, col)) col = y;
    }
    out.values[static_cast<std::size_t>(col)] += plan.entries(x, col);
  }
  double total = 0.0;
  for (double v : out.values) total += v;
  if (!(total > 0.0)) throw Error("extract_fused: plan carries no mass");
  for (double& v : out.values) v /= total;
  return out;
}

}  // namespace ptalign
