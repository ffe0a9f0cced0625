#include "ptalign/dist.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "ptalign/error.hpp"

namespace ptalign {

using nlohmann::json;

std::string_view to_string(ValueKind kind) {
  return kind == ValueKind::logits ? "logits" : "probabilities";
}

double StepDistribution::value_of(TokenId id, double fallback) const {
  auto it = std::find(indices.begin(), indices.end(), id);
  if (it == indices.end()) return fallback;
  return values[static_cast<std::size_t>(it - indices.begin())];
}

std::size_t StepDistribution::argmax() const {
  if (values.empty()) throw Error("argmax of an empty step");
  return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

StepDistribution softmax_step(const StepDistribution& step) {
  if (step.empty()) throw Error("softmax of an empty step");
  const double hi = *std::max_element(step.values.begin(), step.values.end());
  StepDistribution out{step.indices, std::vector<double>(step.size()), ValueKind::probabilities};
  double total = 0.0;
  for (std::size_t i = 0; i < step.size(); ++i) {
    out.values[i] = std::exp(step.values[i] - hi);
    total += out.values[i];
  }
  for (double& v : out.values) v /= total;
  return out;
}

StepDistribution to_probabilities(const StepDistribution& step) {
  if (step.kind == ValueKind::logits) return softmax_step(step);
  if (step.empty()) throw Error("empty probability step");
  const double total = std::accumulate(step.values.begin(), step.values.end(), 0.0);
  if (!(total > 0.0)) throw Error("probability step has no mass");
  StepDistribution out = step;
  for (double& v : out.values) v /= total;
  return out;
}

StepDistribution truncate_window(const StepDistribution& step, std::size_t window) {
  if (step.size() <= window) return step;
  std::vector<std::size_t> order(step.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return step.values[a] > step.values[b]; });
  order.resize(window);
  std::sort(order.begin(), order.end());
  StepDistribution out{{}, {}, step.kind};
  for (std::size_t i : order) {
    out.indices.push_back(step.indices[i]);
    out.values.push_back(step.values[i]);
  }
  return out;
}

StepDistribution one_hot(TokenId id) { return {{id}, {1.0}, ValueKind::probabilities}; }

std::vector<Violation> validate_matrix(const DistributionMatrix& m, const Vocabulary& vocab) {
  std::vector<Violation> out;
  if (m.vocab != vocab.name()) {
    out.push_back({0, "matrix vocabulary '" + m.vocab + "' does not match '" + vocab.name() + "'"});
  }
  if (m.steps.size() != m.gold_ids.size()) {
    out.push_back({0, "steps length " + std::to_string(m.steps.size()) +
                          " differs from gold_ids length " + std::to_string(m.gold_ids.size())});
  }
  for (std::size_t k = 0; k < m.gold_ids.size(); ++k) {
    if (!vocab.contains(m.gold_ids[k])) {
      out.push_back({k, "gold id " + std::to_string(m.gold_ids[k]) + " out of range"});
    }
  }
  for (std::size_t k = 0; k < m.steps.size(); ++k) {
    const auto& s = m.steps[k];
    if (s.indices.size() != s.values.size()) {
      out.push_back({k, "indices/values length mismatch"});
      continue;
    }
    if (s.empty()) out.push_back({k, "empty step"});
    std::unordered_set<TokenId> seen;
    for (TokenId id : s.indices) {
      if (!vocab.contains(id)) {
        out.push_back({k, "index " + std::to_string(id) + " out of range for vocabulary '" +
                              vocab.name() + "'"});
      }
      if (!seen.insert(id).second) {
        out.push_back({k, "duplicate index " + std::to_string(id)});
      }
    }
    for (double v : s.values) {
      if (!std::isfinite(v)) out.push_back({k, "non-finite value"});
    }
    if (s.kind == ValueKind::probabilities) {
      double total = 0.0;
      for (double v : s.values) {
        if (v < 0.0) out.push_back({k, "negative probability " + format_double(v)});
        total += v;
      }
      if (std::abs(total - 1.0) > kProbabilitySumTolerance) {
        out.push_back({k, "probabilities sum to " + format_double(total)});
      }
    }
  }
  return out;
}

std::string format_double(double value) {
  if (!std::isfinite(value)) throw Error("cannot serialise non-finite value");
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  std::string s(buf, end);
  // Keep a float marker so readers never mistake the value for an integer.
  if (s.find_first_of(".eE") == std::string::npos) s += ".0";
  return s;
}

namespace {

template <typename T, typename F>
void append_list(std::string& out, const std::vector<T>& xs, F&& fmt) {
  out += '[';
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ',';
    out += fmt(xs[i]);
  }
  out += ']';
}

std::string quote(std::string_view s) { return json(s).dump(); }

}  // namespace

std::string format_matrix(const DistributionMatrix& m) {
  std::string out = "{\"vocab\":" + quote(m.vocab) + ",\"gold_ids\":";
  append_list(out, m.gold_ids, [](TokenId id) { return std::to_string(id); });
  out += ",\"steps\":[";
  for (std::size_t k = 0; k < m.steps.size(); ++k) {
    const auto& s = m.steps[k];
    if (k) out += ',';
    out += "{\"idx\":";
    append_list(out, s.indices, [](TokenId id) { return std::to_string(id); });
    out += ",\"val\":";
    append_list(out, s.values, [](double v) { return format_double(v); });
    out += ",\"kind\":\"";
    out += to_string(s.kind);
    out += "\"}";
  }
  out += "]}";
  return out;
}

DistributionMatrix parse_matrix(std::string_view line, std::size_t line_number) {
  const std::string where = "line " + std::to_string(line_number) + ": ";
  json doc;
  try {
    doc = json::parse(line);
  } catch (const json::parse_error& e) {
    throw Error(where + "malformed record: " + e.what());
  }
  try {
    DistributionMatrix m;
    if (!doc.is_object()) throw Error("record is not an object");
    m.vocab = doc.at("vocab").get<std::string>();
    m.gold_ids = doc.at("gold_ids").get<std::vector<TokenId>>();
    for (const auto& s : doc.at("steps")) {
      StepDistribution step;
      step.indices = s.at("idx").get<std::vector<TokenId>>();
      step.values = s.at("val").get<std::vector<double>>();
      const auto kind = s.at("kind").get<std::string>();
      if (kind == "logits") {
        step.kind = ValueKind::logits;
      } else if (kind == "probabilities") {
        step.kind = ValueKind::probabilities;
      } else {
        throw Error("unknown kind \"" + kind + "\"");
      }
      if (step.indices.size() != step.values.size()) {
        throw Error("idx and val lengths differ");
      }
      m.steps.push_back(std::move(step));
    }
    if (m.steps.size() != m.gold_ids.size()) {
      throw Error("steps length differs from gold_ids length");
    }
    return m;
  } catch (const json::exception& e) {
    throw Error(where + "malformed record: " + e.what());
  } catch (const Error& e) {
    throw Error(where + "malformed record: " + e.what());
  }
}

std::vector<DistributionMatrix> read_matrices(std::istream& in) {
  std::vector<DistributionMatrix> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(parse_matrix(line, n));
  }
  return out;
}

std::vector<DistributionMatrix> read_matrices(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("matrix file not found: " + path.string());
  try {
    return read_matrices(in);
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

void write_matrices(std::ostream& out, const std::vector<DistributionMatrix>& matrices) {
  for (const auto& m : matrices) out << format_matrix(m) << '\n';
}

void write_matrices(const std::filesystem::path& path,
                    const std::vector<DistributionMatrix>& matrices) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  write_matrices(out, matrices);
}

DistributionMatrix read_matrix(const std::filesystem::path& path) {
  auto all = read_matrices(path);
  if (all.size() != 1) {
    throw Error(path.string() + ": expected exactly one matrix, found " + std::to_string(all.size()));
  }
  return std::move(all.front());
}

void write_matrix(const DistributionMatrix& m, const std::filesystem::path& path) {
  write_matrices(path, std::vector<DistributionMatrix>{m});
}

}  // namespace ptalign
