#include "ptalign/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "ptalign/error.hpp"

namespace ptalign {

namespace {

constexpr std::size_t kLetters = 26;

using Dist = std::vector<double>;

Dist softmax(const Dist& z) {
  const double hi = *std::max_element(z.begin(), z.end());
  Dist p(z.size());
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) total += p[i] = std::exp(z[i] - hi);
  for (double& v : p) v /= total;
  return p;
}

std::size_t sample(const Dist& p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double r = u(rng);
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (r < p[i]) return i;
    r -= p[i];
  }
  return p.size() - 1;
}

struct Chain {
  Dist initial;
  std::vector<Dist> transition;

  const Dist& next_after(const std::string& text, std::size_t pos) const {
    return pos == 0 ? initial : transition[static_cast<std::size_t>(text[pos - 1] - 'a')];
  }
};

Chain make_chain(double sharpness, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, sharpness);
  auto row = [&] {
    Dist z(kLetters);
    for (double& v : z) v = normal(rng);
    return softmax(z);
  };
  Chain c;
  c.initial = row();
  for (std::size_t i = 0; i < kLetters; ++i) c.transition.push_back(row());
  return c;
}

std::vector<std::string> top_bigrams(const Chain& chain, std::size_t count) {
  Dist pi(kLetters, 1.0 / kLetters);
  for (int it = 0; it < 500; ++it) {
    Dist next(kLetters, 0.0);
    for (std::size_t a = 0; a < kLetters; ++a) {
      for (std::size_t b = 0; b < kLetters; ++b) next[b] += pi[a] * chain.transition[a][b];
    }
    pi = next;
  }
  std::vector<std::pair<double, std::size_t>> freq;
  for (std::size_t a = 0; a < kLetters; ++a) {
    for (std::size_t b = 0; b < kLetters; ++b) {
      freq.emplace_back(pi[a] * chain.transition[a][b], a * kLetters + b);
    }
  }
  std::stable_sort(freq.begin(), freq.end(),
                   [](const auto& x, const auto& y) { return x.first > y.first; });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < std::min(count, freq.size()); ++i) {
    const std::size_t code = freq[i].second;
    out.push_back(std::string{static_cast<char>('a' + code / kLetters),
                              static_cast<char>('a' + code % kLetters)});
  }
  return out;
}

std::string sample_text(const Chain& chain, std::size_t length, std::mt19937_64& rng) {
  std::string text;
  for (std::size_t i = 0; i < length; ++i) {
    text += static_cast<char>('a' + sample(chain.next_after(text, i), rng));
  }
  return text;
}

/// Distribution of the next token of `vocab` given the letter distribution
/// `next`: a letter that starts merged pairs keeps only the mass not taken
/// by those pairs.
Dist token_distribution(const Chain& chain, const Dist& next, const Vocabulary& vocab) {
  Dist p(vocab.size(), 0.0);
  for (std::size_t id = 0; id < vocab.size(); ++id) {
    const auto& tok = vocab.tokens()[id];
    const std::size_t first = static_cast<std::size_t>(tok[0] - 'a');
    if (tok.size() == 1) {
      p[id] = next[first];
    } else {
      const double pair = next[first] * chain.transition[first][static_cast<std::size_t>(tok[1] - 'a')];
      p[id] = pair;
      p[*vocab.find(tok.substr(0, 1))] -= pair;
    }
  }
  for (double& v : p) v = std::max(v, 0.0);
  return p;
}

StepDistribution noisy_window(const Dist& truth, double smoothing, double noise,
                              std::size_t window, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, noise);
  StepDistribution full{{}, {}, ValueKind::logits};
  const double uniform = 1.0 / static_cast<double>(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double p = (1.0 - smoothing) * truth[i] + smoothing * uniform;
    full.indices.push_back(static_cast<TokenId>(i));
    full.values.push_back(std::log(p) + normal(rng));
  }
  return truncate_window(full, window);
}

DistributionMatrix make_matrix(const Chain& chain, const std::string& text,
                               const Vocabulary& vocab, double smoothing, double noise,
                               std::size_t window, std::mt19937_64& rng) {
  const auto seq = tokenize(vocab, text);
  DistributionMatrix m{vocab.name(), seq.ids, {}};
  std::size_t pos = 0;
  for (const auto& piece : seq.texts) {
    const auto truth = token_distribution(chain, chain.next_after(text, pos), vocab);
    m.steps.push_back(noisy_window(truth, smoothing, noise, window, rng));
    pos += piece.size();
  }
  return m;
}

}  // namespace

FixtureSet generate_fixtures(const FixtureOptions& opts) {
  if (opts.window < 1) throw Error("fixtures: window must be at least 1");
  if (opts.min_length < 1 || opts.max_length < opts.min_length) {
    throw Error("fixtures: invalid sequence length range");
  }
  std::mt19937_64 rng(opts.seed);
  const Chain chain = make_chain(opts.chain_sharpness, rng);

  std::vector<std::string> letters;
  for (std::size_t i = 0; i < kLetters; ++i) letters.emplace_back(1, static_cast<char>('a' + i));
  auto merged = letters;
  for (auto& bg : top_bigrams(chain, opts.merged_bigrams)) merged.push_back(std::move(bg));

  FixtureSet set{opts,
                 Vocabulary("char", letters),
                 Vocabulary("bigram", merged),
                 {}, {}, {}, {}, {}, {}, {}};

  std::uniform_int_distribution<std::size_t> length(opts.min_length, opts.max_length);
  for (std::size_t i = 0; i < opts.train_sequences; ++i) {
    set.train_texts.push_back(sample_text(chain, length(rng), rng));
  }
  for (std::size_t i = 0; i < opts.heldout_sequences; ++i) {
    set.heldout_texts.push_back(sample_text(chain, length(rng), rng));
  }
  for (const auto& t : set.train_texts) {
    set.source.push_back(make_matrix(chain, t, set.bigram_vocab, opts.source_smoothing,
                                     opts.source_noise, opts.window, rng));
  }
  for (const auto& t : set.train_texts) {
    set.source2.push_back(make_matrix(chain, t, set.bigram_vocab, opts.source_smoothing,
                                      opts.source_noise, opts.window, rng));
  }
  for (const auto& t : set.train_texts) {
    set.target.push_back(make_matrix(chain, t, set.char_vocab, opts.target_smoothing,
                                     opts.target_noise, opts.window, rng));
  }
  for (const auto& t : set.heldout_texts) {
    set.heldout.push_back(make_matrix(chain, t, set.char_vocab, opts.target_smoothing,
                                      opts.target_noise, opts.window, rng));
  }
  set.embedding = toy_embedding(set.char_vocab.size(), opts.seed);
  return set;
}

void write_fixtures(const FixtureSet& set, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create " + dir.string() + ": " + ec.message());

  auto write_text = [&](const char* name, const std::string& body) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw Error("cannot write " + (dir / name).string());
    out << body;
  };
  auto lines = [](const std::vector<std::string>& xs) {
    std::string s;
    for (const auto& x : xs) s += x + "\n";
    return s;
  };

  write_text(fixture_files::char_vocab, dump_vocab(set.char_vocab));
  write_text(fixture_files::bigram_vocab, dump_vocab(set.bigram_vocab));
  write_text(fixture_files::train_corpus, lines(set.train_texts));
  write_text(fixture_files::heldout_corpus, lines(set.heldout_texts));
  write_matrices(dir / fixture_files::source, set.source);
  write_matrices(dir / fixture_files::source2, set.source2);
  write_matrices(dir / fixture_files::target, set.target);
  write_matrices(dir / fixture_files::heldout, set.heldout);
  write_text(fixture_files::embedding, dump_embedding(set.embedding));
}

}  // namespace ptalign
