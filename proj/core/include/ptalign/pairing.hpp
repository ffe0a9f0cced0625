#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ptalign/vocab.hpp"

namespace ptalign {

/// Levenshtein distance with unit costs.
std::size_t edit_distance(std::string_view a, std::string_view b);

/// Edit distance normalised by max(|a|, |b|, 1); lies in [0, 1].
double token_cost(std::string_view a, std::string_view b);

/// A contiguous block of source positions paired with a contiguous block of
/// target positions. Positions are 0-based.
struct PairGroup {
  std::vector<std::size_t> src;
  std::vector<std::size_t> tgt;
  bool one_to_one = false;

  bool operator==(const PairGroup&) const = default;
};

struct PairingResult {
  std::vector<PairGroup> groups;
  double total_cost = 0.0;
  /// f(k, j) in row-major order: N target rows by L source columns.
  std::optional<std::vector<double>> table;

  /// (target, source) cells of the chosen lattice path, start to end.
  std::vector<std::pair<std::size_t, std::size_t>> path;
};

/// Monotone pairing minimising the summed cell cost along a lattice path
/// from (0, 0) to (N-1, L-1) with steps (1,0), (0,1), (1,1). Every step
/// pays the cost of the cell it enters. Backtrace prefers the diagonal,
/// then the previous target position, then the previous source position.
PairingResult pair_tokens(const std::vector<std::string>& src,
                          const std::vector<std::string>& tgt, bool keep_table = false);
PairingResult pair_tokens(const TokenSequence& src, const TokenSequence& tgt,
                          bool keep_table = false);

/// Exhaustive enumeration of every monotone path, for L, N <= 6.
PairingResult brute_force_pairing(const std::vector<std::string>& src,
                                  const std::vector<std::string>& tgt);
PairingResult brute_force_pairing(const TokenSequence& src, const TokenSequence& tgt);

inline constexpr std::size_t kBruteForceMaxLength = 6;

/// Splits a path into groups: a diagonal step starts a new group, any other
/// step extends the current one.
std::vector<PairGroup> groups_from_path(
    const std::vector<std::pair<std::size_t, std::size_t>>& path);

}  // namespace ptalign
