#include "ptalign/diag.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include <json.hpp>

#include "ptalign/error.hpp"

namespace ptalign {

namespace {

double total_weight(const EmbeddedToken& t) {
  if (t.points.size() != t.weights.size()) {
    throw Error("embedded token has " + std::to_string(t.points.size()) + " points but " +
                std::to_string(t.weights.size()) + " weights");
  }
  double w = 0.0;
  for (double x : t.weights) {
    if (x < 0.0 || !std::isfinite(x)) throw Error("embedded token has an invalid weight");
    w += x;
  }
  if (!(w > 0.0)) throw Error("embedded token has zero total weight");
  return w;
}

}  // namespace

double distance(const Point2& a, const Point2& b) { return std::hypot(a.x - b.x, a.y - b.y); }

Point2 weighted_center(const EmbeddedToken& t) {
  const double w = total_weight(t);
  Point2 c;
  for (std::size_t i = 0; i < t.points.size(); ++i) {
    c.x += t.weights[i] * t.points[i].x;
    c.y += t.weights[i] * t.points[i].y;
  }
  c.x /= w;
  c.y /= w;
  return c;
}

double compactness(const EmbeddedToken& t) {
  const Point2 c = weighted_center(t);
  double acc = 0.0;
  for (std::size_t i = 0; i < t.points.size(); ++i) acc += t.weights[i] * distance(t.points[i], c);
  return acc / total_weight(t);
}

double center_distance(const EmbeddedToken& a, const EmbeddedToken& b) {
  return distance(weighted_center(a), weighted_center(b));
}

Embedding toy_embedding(std::size_t vocab_size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coord(-1.0, 1.0);
  Embedding e;
  for (std::size_t id = 0; id < vocab_size; ++id) {
    const double x = coord(rng);
    const double y = coord(rng);
    e.emplace(static_cast<TokenId>(id), Point2{x, y});
  }
  return e;
}

Embedding parse_embedding(std::string_view json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(std::string("embedding: malformed JSON: ") + e.what());
  }
  if (!doc.is_object()) throw Error("embedding: expected an object of id -> [x, y]");
  Embedding e;
  for (const auto& [key, val] : doc.items()) {
    TokenId id = 0;
    try {
      std::size_t used = 0;
      id = std::stoll(key, &used);
      if (used != key.size()) throw std::invalid_argument(key);
    } catch (const std::exception&) {
      throw Error("embedding: key \"" + key + "\" is not a token id");
    }
    if (!val.is_array() || val.size() != 2 || !val[0].is_number() || !val[1].is_number()) {
      throw Error("embedding: entry " + key + " is not a pair of numbers");
    }
    e[id] = Point2{val[0].get<double>(), val[1].get<double>()};
  }
  return e;
}

Embedding load_embedding(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("embedding file not found: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_embedding(ss.str());
}

std::string dump_embedding(const Embedding& e) {
  std::map<TokenId, Point2> sorted(e.begin(), e.end());
  std::string out = "{";
  bool first = true;
  for (const auto& [id, p] : sorted) {
    if (!first) out += ',';
    first = false;
    out += "\"" + std::to_string(id) + "\":[" + format_double(p.x) + "," + format_double(p.y) + "]";
  }
  out += "}\n";
  return out;
}

EmbeddedToken embed_step(const StepDistribution& step, const Embedding& embedding) {
  const auto probs = step.kind == ValueKind::logits ? softmax_step(step) : step;
  EmbeddedToken t;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    auto it = embedding.find(probs.indices[i]);
    if (it == embedding.end()) {
      throw Error("embedding has no point for token id " + std::to_string(probs.indices[i]));
    }
    t.points.push_back(it->second);
    t.weights.push_back(probs.values[i]);
  }
  return t;
}

std::vector<StepDiagnostics> diagnose(const DistributionMatrix& fused,
                                      const DistributionMatrix& target,
                                      const Embedding& embedding) {
  if (fused.size() != target.size()) {
    throw Error("diagnose: fused matrix has " + std::to_string(fused.size()) +
                " steps, target has " + std::to_string(target.size()));
  }
  std::vector<StepDiagnostics> out;
  out.reserve(fused.size());
  for (std::size_t k = 0; k < fused.size(); ++k) {
    const auto f = embed_step(fused.steps[k], embedding);
    const auto t = embed_step(target.steps[k], embedding);
    out.push_back({compactness(f), compactness(t), center_distance(f, t)});
  }
  return out;
}

}  // namespace ptalign
