#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ptalign/dist.hpp"

namespace ptalign {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  bool operator==(const Point2&) const = default;
};

double distance(const Point2& a, const Point2& b);

/// A token drawn as a weighted point cloud, one point per window entry.
struct EmbeddedToken {
  std::vector<Point2> points;
  std::vector<double> weights;
};

Point2 weighted_center(const EmbeddedToken& t);

/// Weighted mean distance of the points from the weighted center.
double compactness(const EmbeddedToken& t);

double center_distance(const EmbeddedToken& a, const EmbeddedToken& b);

/// Token id -> 2D coordinate.
using Embedding = std::unordered_map<TokenId, Point2>;

/// Seeded pseudo-random coordinates in [-1, 1]^2 for ids 0..vocab_size-1.
Embedding toy_embedding(std::size_t vocab_size, std::uint64_t seed);

/// JSON object {"<id>": [x, y], ...}.
Embedding load_embedding(const std::filesystem::path& path);
Embedding parse_embedding(std::string_view json_text);
std::string dump_embedding(const Embedding& e);

/// Embeds a step with its probabilities as weights (logits are softmaxed).
EmbeddedToken embed_step(const StepDistribution& step, const Embedding& embedding);

struct StepDiagnostics {
  double compactness_fused = 0.0;
  double compactness_target = 0.0;
  double center_distance = 0.0;
};

/// Per-step diagnostics of a fused matrix against its target matrix.
std::vector<StepDiagnostics> diagnose(const DistributionMatrix& fused,
                                      const DistributionMatrix& target,
                                      const Embedding& embedding);

}  // namespace ptalign
