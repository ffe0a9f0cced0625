#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ptalign {

using TokenId = std::int64_t;

/// Immutable bidirectional mapping between dense token ids and token
/// strings. Ids are positions in the token list.
class Vocabulary {
 public:
  Vocabulary() = default;
  /// Throws Error on duplicate or empty token strings.
  Vocabulary(std::string name, std::vector<std::string> tokens);

  const std::string& name() const noexcept { return name_; }
  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  bool contains(TokenId id) const noexcept {
    return id >= 0 && static_cast<std::size_t>(id) < tokens_.size();
  }
  std::optional<TokenId> find(std::string_view token) const;

  /// Length in bytes of the longest token; bounds the tokenizer's lookahead.
  std::size_t max_token_length() const noexcept { return max_len_; }

 private:
  std::string name_;
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
  std::size_t max_len_ = 0;
};

struct TokenSequence {
  std::string vocab;
  std::vector<TokenId> ids;
  std::vector<std::string> texts;
};

/// Reads `{"name": ..., "tokens": [...]}`.
Vocabulary load_vocab(const std::filesystem::path& path);
Vocabulary parse_vocab(std::string_view json_text);
void save_vocab(const Vocabulary& vocab, const std::filesystem::path& path);
std::string dump_vocab(const Vocabulary& vocab);

const std::string& decode(const Vocabulary& vocab, TokenId id);

/// Decodes every id; throws Error on the first out-of-range id.
TokenSequence decode_sequence(const Vocabulary& vocab, const std::vector<TokenId>& ids);

/// Greedy longest-match segmentation, left to right.
TokenSequence tokenize(const Vocabulary& vocab, std::string_view text);

}  // namespace ptalign
