#include "ptalign/vocab.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ptalign/error.hpp"

namespace ptalign {

using nlohmann::json;

Vocabulary::Vocabulary(std::string name, std::vector<std::string> tokens)
    : name_(std::move(name)), tokens_(std::move(tokens)) {
  index_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    const auto& tok = tokens_[i];
    if (tok.empty()) {
      throw Error("vocabulary '" + name_ + "': empty token string at id " + std::to_string(i));
    }
    auto [it, inserted] = index_.emplace(tok, static_cast<TokenId>(i));
    if (!inserted) {
      throw Error("vocabulary '" + name_ + "': duplicate token \"" + tok + "\" at id " +
                  std::to_string(i) + " (first seen at id " + std::to_string(it->second) + ")");
    }
    max_len_ = std::max(max_len_, tok.size());
  }
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Vocabulary parse_vocab(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(std::string("vocabulary: malformed JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("name") || !doc.contains("tokens") ||
      !doc["name"].is_string() || !doc["tokens"].is_array()) {
    throw Error("vocabulary: expected an object with string \"name\" and array \"tokens\"");
  }
  std::vector<std::string> tokens;
  tokens.reserve(doc["tokens"].size());
  for (std::size_t i = 0; i < doc["tokens"].size(); ++i) {
    const auto& t = doc["tokens"][i];
    if (!t.is_string()) {
      throw Error("vocabulary: token entry " + std::to_string(i) + " is not a string");
    }
    tokens.push_back(t.get<std::string>());
  }
  return Vocabulary(doc["name"].get<std::string>(), std::move(tokens));
}

Vocabulary load_vocab(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("vocabulary file not found: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_vocab(ss.str());
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

std::string dump_vocab(const Vocabulary& vocab) {
  nlohmann::ordered_json doc;
  doc["name"] = vocab.name();
  doc["tokens"] = vocab.tokens();
  return doc.dump() + "\n";
}

void save_vocab(const Vocabulary& vocab, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << dump_vocab(vocab);
}

const std::string& decode(const Vocabulary& vocab, TokenId id) {
  if (!vocab.contains(id)) {
    throw Error("token id " + std::to_string(id) + " out of range for vocabulary '" +
                vocab.name() + "' of size " + std::to_string(vocab.size()));
  }
  return vocab.tokens()[static_cast<std::size_t>(id)];
}

TokenSequence decode_sequence(const Vocabulary& vocab, const std::vector<TokenId>& ids) {
  TokenSequence seq{vocab.name(), ids, {}};
  seq.texts.reserve(ids.size());
  for (TokenId id : ids) seq.texts.push_back(decode(vocab, id));
  return seq;
}

TokenSequence tokenize(const Vocabulary& vocab, std::string_view text) {
  TokenSequence seq{vocab.name(), {}, {}};
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t longest = std::min(vocab.max_token_length(), text.size() - pos);
    bool matched = false;
    for (std::size_t len = longest; len > 0; --len) {
      if (auto id = vocab.find(text.substr(pos, len))) {
        seq.ids.push_back(*id);
        seq.texts.emplace_back(text.substr(pos, len));
        pos += len;
        matched = true;
        break;
      }
    }
    if (!matched) {
      throw Error("tokenize: no token in vocabulary '" + vocab.name() +
                  "' covers position " + std::to_string(pos));
    }
  }
  return seq;
}

}  // namespace ptalign
