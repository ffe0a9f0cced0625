#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ptalign/diag.hpp"
#include "ptalign/dist.hpp"
#include "ptalign/vocab.hpp"

namespace ptalign {

/// Knobs of the synthetic two-tokenizer corpus. A first-order Markov chain
/// over 26 lowercase letters is the ground truth; the "char" vocabulary
/// holds the letters and the "bigram" vocabulary adds the most frequent
/// letter pairs.
struct FixtureOptions {
  std::uint64_t seed = 7;
  std::size_t window = 10;
  std::size_t merged_bigrams = 20;
  std::size_t train_sequences = 8;
  std::size_t heldout_sequences = 32;
  std::size_t min_length = 12;
  std::size_t max_length = 24;
  /// Spread of the chain's transition logits; larger means peakier rows.
  double chain_sharpness = 3.0;
  /// Source (teacher) matrices: mixture weight of the uniform distribution
  /// and logit noise scale.
  double source_smoothing = 0.05;
  double source_noise = 0.2;
  /// Target model matrices: a weaker predictor of the same chain.
  double target_smoothing = 0.3;
  double target_noise = 1.0;
};

struct FixtureSet {
  FixtureOptions options;
  Vocabulary char_vocab;
  Vocabulary bigram_vocab;
  std::vector<std::string> train_texts;
  std::vector<std::string> heldout_texts;
  /// Two teachers over the bigram vocabulary with independent noise.
  std::vector<DistributionMatrix> source;
  std::vector<DistributionMatrix> source2;
  /// Target model over the char vocabulary, train and held-out texts.
  std::vector<DistributionMatrix> target;
  std::vector<DistributionMatrix> heldout;
  Embedding embedding;
};

FixtureSet generate_fixtures(const FixtureOptions& opts);

/// File names used by write_fixtures, relative to the output directory.
namespace fixture_files {
inline constexpr const char* char_vocab = "vocab_char.json";
inline constexpr const char* bigram_vocab = "vocab_bigram.json";
inline constexpr const char* train_corpus = "corpus_train.txt";
inline constexpr const char* heldout_corpus = "corpus_heldout.txt";
inline constexpr const char* source = "source.jsonl";
inline constexpr const char* source2 = "source2.jsonl";
inline constexpr const char* target = "target.jsonl";
inline constexpr const char* heldout = "heldout.jsonl";
inline constexpr const char* embedding = "embedding.json";
}  // namespace fixture_files

/// Writes every file of the set into `dir` (created if missing).
void write_fixtures(const FixtureSet& set, const std::filesystem::path& dir);

}  // namespace ptalign
