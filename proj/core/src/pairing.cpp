#include "ptalign/pairing.hpp"

#include <algorithm>
#include <numeric>

#include "ptalign/error.hpp"

namespace ptalign {

std::size_t edit_distance(std::string_view a, std::string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> row(b.size() + 1);
  std::iota(row.begin(), row.end(), std::size_t{0});
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      const std::size_t sub = diag + (a[i - 1] == b[j - 1] ? 0 : 1);
      row[j] = std::min({up + 1, row[j - 1] + 1, sub});
      diag = up;
    }
  }
  return row[b.size()];
}

double token_cost(std::string_view a, std::string_view b) {
  const std::size_t denom = std::max<std::size_t>({a.size(), b.size(), 1});
  return static_cast<double>(edit_distance(a, b)) / static_cast<double>(denom);
}

std::vector<PairGroup> groups_from_path(
    const std::vector<std::pair<std::size_t, std::size_t>>& path) {
  std::vector<PairGroup> groups;
  auto add_unique = [](std::vector<std::size_t>& v, std::size_t x) {
    if (v.empty() || v.back() != x) v.push_back(x);
  };
  for (std::size_t i = 0; i < path.size(); ++i) {
    const auto [k, j] = path[i];
    const bool diagonal =
        i == 0 || (k == path[i - 1].first + 1 && j == path[i - 1].second + 1);
    if (diagonal) groups.emplace_back();
    add_unique(groups.back().tgt, k);
    add_unique(groups.back().src, j);
  }
  for (auto& g : groups) g.one_to_one = g.src.size() == 1 && g.tgt.size() == 1;
  return groups;
}

namespace {

void require_nonempty(const std::vector<std::string>& src, const std::vector<std::string>& tgt) {
  if (src.empty() || tgt.empty()) throw Error("pairing requires two non-empty sequences");
}

std::vector<double> cost_cells(const std::vector<std::string>& src,
                               const std::vector<std::string>& tgt) {
  const std::size_t L = src.size();
  std::vector<double> c(tgt.size() * L);
  for (std::size_t k = 0; k < tgt.size(); ++k) {
    for (std::size_t j = 0; j < L; ++j) c[k * L + j] = token_cost(tgt[k], src[j]);
  }
  return c;
}

}  // namespace

PairingResult pair_tokens(const std::vector<std::string>& src,
                          const std::vector<std::string>& tgt, bool keep_table) {
  require_nonempty(src, tgt);
  const std::size_t L = src.size();
  const std::size_t N = tgt.size();
  const auto c = cost_cells(src, tgt);
  std::vector<double> f(N * L);
  auto at = [L](std::size_t k, std::size_t j) { return k * L + j; };

  f[0] = c[0];
  for (std::size_t k = 1; k < N; ++k) f[at(k, 0)] = f[at(k - 1, 0)] + c[at(k, 0)];
  for (std::size_t j = 1; j < L; ++j) f[at(0, j)] = f[at(0, j - 1)] + c[at(0, j)];
  for (std::size_t k = 1; k < N; ++k) {
    for (std::size_t j = 1; j < L; ++j) {
      const double best = std::min({f[at(k - 1, j - 1)], f[at(k - 1, j)], f[at(k, j - 1)]});
      f[at(k, j)] = best + c[at(k, j)];
    }
  }

  PairingResult result;
  result.total_cost = f[at(N - 1, L - 1)];
  std::size_t k = N - 1;
  std::size_t j = L - 1;
  result.path.emplace_back(k, j);
  while (k > 0 || j > 0) {
    if (k == 0) {
      --j;
    } else if (j == 0) {
      --k;
    } else {
      const double d = f[at(k - 1, j - 1)];
      const double up = f[at(k - 1, j)];
      const double left = f[at(k, j - 1)];
      if (d <= up && d <= left) {
        --k;
        --j;
      } else if (up <= left) {
        --k;
      } else {
        --j;
      }
    }
    result.path.emplace_back(k, j);
  }
  std::reverse(result.path.begin(), result.path.end());
  result.groups = groups_from_path(result.path);
  if (keep_table) result.table = std::move(f);
  return result;
}

PairingResult pair_tokens(const TokenSequence& src, const TokenSequence& tgt, bool keep_table) {
  return pair_tokens(src.texts, tgt.texts, keep_table);
}

PairingResult brute_force_pairing(const std::vector<std::string>& src,
                                  const std::vector<std::string>& tgt) {
  require_nonempty(src, tgt);
  if (src.size() > kBruteForceMaxLength || tgt.size() > kBruteForceMaxLength) {
    throw Error("brute_force_pairing supports sequences of at most " +
                std::to_string(kBruteForceMaxLength) + " tokens");
  }
  const std::size_t L = src.size();
  const auto c = cost_cells(src, tgt);

  // Paths are grown backwards from the end cell, trying moves in the same
  // preference order as the DP backtrace; the first minimum found wins.
  std::vector<std::pair<std::size_t, std::size_t>> current{{tgt.size() - 1, L - 1}};
  std::vector<std::pair<std::size_t, std::size_t>> best_path;
  double best = 0.0;
  bool have_best = false;

  auto score = [&](const std::vector<std::pair<std::size_t, std::size_t>>& rev) {
    double s = 0.0;
    for (auto it = rev.rbegin(); it != rev.rend(); ++it) s += c[it->first * L + it->second];
    return s;
  };

  auto recurse = [&](auto&& self) -> void {
    const auto [k, j] = current.back();
    if (k == 0 && j == 0) {
      const double s = score(current);
      if (!have_best || s < best) {
        best = s;
        best_path = current;
        have_best = true;
      }
      return;
    }
    if (k > 0 && j > 0) {
      current.emplace_back(k - 1, j - 1);
      self(self);
      current.pop_back();
    }
    if (k > 0) {
      current.emplace_back(k - 1, j);
      self(self);
      current.pop_back();
    }
    if (j > 0) {
      current.emplace_back(k, j - 1);
      self(self);
      current.pop_back();
    }
  };
  recurse(recurse);

  PairingResult result;
  result.total_cost = best;
  result.path.assign(best_path.rbegin(), best_path.rend());
  result.groups = groups_from_path(result.path);
  return result;
}

PairingResult brute_force_pairing(const TokenSequence& src, const TokenSequence& tgt) {
  return brute_force_pairing(src.texts, tgt.texts);
}

}  // namespace ptalign
