#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "ptalign/vocab.hpp"

namespace ptalign {

enum class ValueKind { logits, probabilities };

std::string_view to_string(ValueKind kind);

/// One step of a top-k distribution: a window of token ids and their values.
struct StepDistribution {
  std::vector<TokenId> indices;
  std::vector<double> values;
  ValueKind kind = ValueKind::probabilities;

  std::size_t size() const noexcept { return indices.size(); }
  bool empty() const noexcept { return indices.empty(); }

  /// Value stored for `id`, or `fallback` when the id is outside the window.
  double value_of(TokenId id, double fallback = 0.0) const;
  /// Position of the largest value; ties resolve to the lowest position.
  std::size_t argmax() const;

  bool operator==(const StepDistribution&) const = default;
};

/// Per-step distributions over one vocabulary, paired with the gold
/// token sequence they predict.
struct DistributionMatrix {
  std::string vocab;
  std::vector<TokenId> gold_ids;
  std::vector<StepDistribution> steps;

  std::size_t size() const noexcept { return steps.size(); }

  bool operator==(const DistributionMatrix&) const = default;
};

inline constexpr double kProbabilitySumTolerance = 1e-9;

/// Max-shifted softmax over the retained window.
StepDistribution softmax_step(const StepDistribution& step);

/// Converts a step to probabilities: softmax for logits, renormalisation
/// for probabilities.
StepDistribution to_probabilities(const StepDistribution& step);

/// Keeps the `window` largest entries (stable on ties), preserving order.
StepDistribution truncate_window(const StepDistribution& step, std::size_t window);

/// Probability step with a single entry of mass 1.
StepDistribution one_hot(TokenId id);

struct Violation {
  std::size_t step;
  std::string message;
};

/// Every invariant violation of `m` against `vocab`; empty means ok.
std::vector<Violation> validate_matrix(const DistributionMatrix& m, const Vocabulary& vocab);

// JSON-lines I/O. One matrix per line, canonical field order and
// shortest round-trip float formatting.
std::string format_matrix(const DistributionMatrix& m);
DistributionMatrix parse_matrix(std::string_view line, std::size_t line_number = 1);

std::vector<DistributionMatrix> read_matrices(std::istream& in);
std::vector<DistributionMatrix> read_matrices(const std::filesystem::path& path);
void write_matrices(std::ostream& out, const std::vector<DistributionMatrix>& matrices);
void write_matrices(const std::filesystem::path& path,
                    const std::vector<DistributionMatrix>& matrices);

DistributionMatrix read_matrix(const std::filesystem::path& path);
void write_matrix(const DistributionMatrix& m, const std::filesystem::path& path);

/// Shortest decimal string that parses back to exactly `value`.
std::string format_double(double value);

}  // namespace ptalign
