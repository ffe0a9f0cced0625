#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ptalign/align.hpp"
#include "ptalign/diag.hpp"
#include "ptalign/dist.hpp"
#include "ptalign/error.hpp"
#include "ptalign/fixtures.hpp"
#include "ptalign/fusion.hpp"
#include "ptalign/pairing.hpp"
#include "ptalign/transport.hpp"
#include "ptalign/vocab.hpp"

namespace ptalign::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

/// Every flag any subcommand accepts, with its default.
struct Options {
  // shared tunables
  std::string strategy = "ot";
  std::size_t top_k = 10;
  double temperature = 10.0;
  double threshold = 1e-5;
  std::size_t max_iters = 1000;
  std::string fusion = "mince";
  std::string discrepancy = "cross_entropy";
  double lambda = 0.8;
  double lr = 50.0;
  std::size_t epochs = 200;
  std::uint64_t seed = 7;
  std::string out;

  // inputs
  std::string vocab;
  std::string text;
  std::string input;
  std::string src_text;
  std::string tgt_text;
  std::vector<std::string> src;
  std::vector<std::string> src_vocab;
  std::string tgt;
  std::string tgt_vocab;
  std::string stats;
  std::string pred;
  std::string fused;
  std::string corpus;
  std::string heldout;
  std::string target;
  std::string embedding;
};

std::string read_text(const std::string& path) {
  if (path == "-") {
    std::ostringstream ss;
    ss << std::cin.rdbuf();
    return ss.str();
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes `body` to `path`, or to `out` when path is empty or "-".
void emit(const std::string& path, const std::string& body, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << body;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path);
  f << body;
}

FusionFunction parse_fusion(const std::string& s) {
  if (s == "mince") return FusionFunction::mince;
  if (s == "avgce") return FusionFunction::avgce;
  throw Error("unknown fusion function '" + s + "'");
}

Discrepancy parse_discrepancy(const std::string& s) {
  if (s == "cross_entropy" || s == "ce") return Discrepancy::cross_entropy;
  if (s == "kl") return Discrepancy::kl;
  throw Error("unknown discrepancy '" + s + "'");
}

AlignConfig align_config(const Options& o) {
  AlignConfig cfg;
  cfg.strategy = parse_strategy(o.strategy);
  cfg.window = o.top_k;
  cfg.ot.temperature = o.temperature;
  cfg.ot.threshold = o.threshold;
  cfg.ot.max_iterations = o.max_iters;
  cfg.validate();
  return cfg;
}

FusionConfig fusion_config(const Options& o) {
  FusionConfig cfg;
  cfg.function = parse_fusion(o.fusion);
  cfg.discrepancy = parse_discrepancy(o.discrepancy);
  cfg.combination_weight = o.lambda;
  cfg.validate();
  return cfg;
}

ojson ot_json(const Options& o) {
  return {{"temperature", o.temperature}, {"threshold", o.threshold}, {"max_iters", o.max_iters}};
}

ojson align_json(const Options& o) {
  return {{"strategy", o.strategy}, {"top_k", o.top_k}, {"ot", ot_json(o)}};
}

ojson fusion_json(const Options& o) {
  return {{"fusion", o.fusion}, {"discrepancy", o.discrepancy}, {"lambda", o.lambda}};
}

ojson sequence_json(const TokenSequence& seq) {
  return {{"vocab", seq.vocab}, {"ids", seq.ids}, {"texts", seq.texts}};
}

std::string csv_line(std::initializer_list<std::string> cells) {
  std::string s;
  for (const auto& c : cells) {
    if (!s.empty()) s += ',';
    s += c;
  }
  return s + "\n";
}

// Subcommands. Each returns the manifest fragment describing its resolved
// configuration and I/O.

ojson cmd_tokenize(const Options& o, std::ostream& out) {
  const auto vocab = load_vocab(o.vocab);
  const std::string text = o.input.empty() ? o.text : read_text(o.input);
  ojson lines = ojson::array();
  std::string body;
  std::istringstream in(text);
  std::string line;
  // Multi-line input yields one JSON object per line.
  bool any = false;
  while (std::getline(in, line)) {
    body += sequence_json(tokenize(vocab, line)).dump() + "\n";
    any = true;
  }
  if (!any) body = sequence_json(tokenize(vocab, "")).dump() + "\n";
  emit(o.out, body, out);
  return {{"inputs", {{"vocab", o.vocab}, {"input", o.input}}}, {"outputs", {{"out", o.out}}}};
}

ojson cmd_pair(const Options& o, std::ostream& out) {
  const auto sv = load_vocab(o.src_vocab.at(0));
  const auto tv = load_vocab(o.tgt_vocab);
  const std::string st = o.src_text.empty() ? o.text : o.src_text;
  const std::string tt = o.tgt_text.empty() ? o.text : o.tgt_text;
  const auto src = tokenize(sv, st);
  const auto tgt = tokenize(tv, tt);
  const auto r = pair_tokens(src, tgt);
  ojson groups = ojson::array();
  for (const auto& g : r.groups) {
    groups.push_back({{"src", g.src}, {"tgt", g.tgt}, {"one_to_one", g.one_to_one}});
  }
  ojson doc;
  doc["total_cost"] = r.total_cost;
  doc["groups"] = groups;
  doc["src"] = sequence_json(src);
  doc["tgt"] = sequence_json(tgt);
  emit(o.out, doc.dump() + "\n", out);
  return {{"inputs", {{"src_vocab", o.src_vocab.at(0)}, {"tgt_vocab", o.tgt_vocab}}},
          {"outputs", {{"out", o.out}}}};
}

ojson cmd_align(const Options& o, std::ostream& out) {
  if (o.src.size() != o.src_vocab.size()) {
    throw Error("--src and --src-vocab must be given the same number of times");
  }
  const auto cfg = align_config(o);
  const auto fusion = fusion_config(o);
  const auto tv = load_vocab(o.tgt_vocab);
  const auto targets = read_matrices(o.tgt);
  std::vector<Vocabulary> svs;
  std::vector<std::vector<DistributionMatrix>> sources;
  for (std::size_t i = 0; i < o.src.size(); ++i) {
    svs.push_back(load_vocab(o.src_vocab[i]));
    sources.push_back(read_matrices(o.src[i]));
    if (sources.back().size() != targets.size()) {
      throw Error(o.src[i] + " holds " + std::to_string(sources.back().size()) +
                  " sequences but " + o.tgt + " holds " + std::to_string(targets.size()));
    }
  }

  AlignStats stats;
  std::vector<DistributionMatrix> fused;
  fused.reserve(targets.size());
  for (std::size_t s = 0; s < targets.size(); ++s) {
    try {
      if (sources.size() == 1) {
        fused.push_back(align_matrices(sources[0][s], targets[s], svs[0], tv, cfg, &stats));
      } else {
        std::vector<DistributionMatrix> per;
        for (const auto& src : sources) per.push_back(src[s]);
        fused.push_back(fuse_pipeline(per, svs, targets[s], tv, cfg, fusion, &stats));
      }
    } catch (const Error& e) {
      throw Error("sequence " + std::to_string(s) + ": " + e.what());
    }
  }
  write_matrices(fs::path(o.out), fused);

  ojson st;
  st["sequences"] = targets.size();
  st["one_to_one_groups"] = stats.one_to_one_groups;
  st["fallback_steps"] = stats.fallback_steps;
  st["transport_steps"] = stats.transport_steps;
  st["unconverged_steps"] = stats.unconverged_steps;
  st["mean_plan_cost"] = stats.mean_plan_cost();
  st["mean_iterations"] = stats.mean_iterations();
  emit(o.stats, st.dump() + "\n", out);

  ojson m{{"config", align_json(o)},
          {"inputs", {{"src", o.src}, {"src_vocab", o.src_vocab}, {"tgt", o.tgt}, {"tgt_vocab", o.tgt_vocab}}},
          {"outputs", {{"out", o.out}, {"stats", o.stats}}}};
  if (o.src.size() > 1) m["config"]["fusion"] = fusion_json(o);
  return m;
}

ojson cmd_sinkhorn(const Options& o, std::ostream& out) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_text(o.input));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(std::string("sinkhorn: malformed instance: ") + e.what());
  }
  Matrix cost;
  Vector a;
  Vector b;
  try {
    const auto rows = doc.at("cost").get<std::vector<std::vector<double>>>();
    const auto av = doc.at("a").get<std::vector<double>>();
    const auto bv = doc.at("b").get<std::vector<double>>();
    cost.resize(static_cast<Eigen::Index>(rows.size()),
                rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != static_cast<std::size_t>(cost.cols())) {
        throw Error("sinkhorn: ragged cost matrix");
      }
      for (std::size_t j = 0; j < rows[i].size(); ++j) {
        cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
      }
    }
    a = Eigen::Map<const Vector>(av.data(), static_cast<Eigen::Index>(av.size()));
    b = Eigen::Map<const Vector>(bv.data(), static_cast<Eigen::Index>(bv.size()));
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("sinkhorn: malformed instance: ") + e.what());
  }
  OtConfig cfg{o.temperature, o.threshold, o.max_iters};
  const auto plan = sinkhorn(cost, a, b, cfg);

  ojson res;
  ojson rows = ojson::array();
  for (Eigen::Index i = 0; i < plan.entries.rows(); ++i) {
    ojson r = ojson::array();
    for (Eigen::Index j = 0; j < plan.entries.cols(); ++j) r.push_back(plan.entries(i, j));
    rows.push_back(r);
  }
  res["plan"] = rows;
  res["iterations"] = plan.iterations;
  res["converged"] = plan.converged;
  res["cost"] = plan.cost(cost);
  res["marginal_error"] = plan.marginal_error();
  emit(o.out, res.dump() + "\n", out);
  return {{"config", {{"ot", ot_json(o)}}}, {"inputs", {{"input", o.input}}}, {"outputs", {{"out", o.out}}}};
}

ojson cmd_loss(const Options& o, std::ostream& out) {
  const auto cfg = fusion_config(o);
  const auto q = read_matrices(o.pred);
  const auto pf = read_matrices(o.fused);
  if (q.empty() || q.size() != pf.size()) {
    throw Error("loss: --pred and --fused must hold the same non-zero number of sequences");
  }
  double clm = 0.0;
  double fus = 0.0;
  double comb = 0.0;
  for (std::size_t s = 0; s < q.size(); ++s) {
    clm += clm_loss(q[s], q[s].gold_ids);
    fus += fusion_loss(q[s], pf[s], cfg);
    comb += combined_loss(q[s], q[s].gold_ids, pf[s], cfg);
  }
  const double n = static_cast<double>(q.size());
  ojson res{{"sequences", q.size()}, {"clm", clm / n}, {"fusion", fus / n}, {"combined", comb / n}};
  emit(o.out, res.dump() + "\n", out);
  return {{"config", fusion_json(o)}, {"inputs", {{"pred", o.pred}, {"fused", o.fused}}},
          {"outputs", {{"out", o.out}}}};
}

ojson cmd_train_toy(const Options& o, std::ostream& out) {
  const auto cfg = fusion_config(o);
  const auto vocab = load_vocab(o.vocab);
  const auto corpus_m = read_matrices(o.corpus);
  std::vector<std::vector<TokenId>> corpus;
  for (const auto& m : corpus_m) corpus.push_back(m.gold_ids);

  std::vector<DistributionMatrix> pf;
  if (o.fused.empty()) {
    if (cfg.combination_weight != 1.0) throw Error("train-toy: --fused is required unless --lambda 1");
    for (const auto& ids : corpus) {
      DistributionMatrix m{vocab.name(), ids, {}};
      for (TokenId id : ids) m.steps.push_back(one_hot(id));
      pf.push_back(std::move(m));
    }
  } else {
    pf = read_matrices(o.fused);
  }

  auto model = ToyModel::random(vocab.size(), o.seed);
  const auto result = train_toy(std::move(model), corpus, pf, cfg, {o.lr, o.epochs});

  std::string csv = csv_line({"epoch", "clm", "fusion", "combined"});
  for (const auto& r : result.trace) {
    csv += csv_line({std::to_string(r.epoch), format_double(r.clm), format_double(r.fusion),
                     format_double(r.combined)});
  }
  if (o.out.empty()) throw Error("train-toy: --out is required");
  emit(o.out, csv, out);

  ojson summary{{"epochs", o.epochs},
                {"final_clm", result.trace.back().clm},
                {"final_combined", result.trace.back().combined},
                {"diverged", result.diverged}};
  if (!o.heldout.empty()) {
    std::vector<std::vector<TokenId>> held;
    for (const auto& m : read_matrices(o.heldout)) held.push_back(m.gold_ids);
    summary["heldout_clm"] = toy_clm(result.model, held);
  }
  out << summary.dump() << "\n";
  return {{"config", {{"fusion", fusion_json(o)}, {"lr", o.lr}, {"epochs", o.epochs}}},
          {"inputs", {{"vocab", o.vocab}, {"corpus", o.corpus}, {"fused", o.fused}, {"heldout", o.heldout}}},
          {"outputs", {{"out", o.out}}}};
}

ojson cmd_diag(const Options& o, std::ostream& out) {
  const auto fused = read_matrices(o.fused);
  const auto target = read_matrices(o.target);
  if (fused.size() != target.size()) {
    throw Error("diag: fused and target files hold different numbers of sequences");
  }
  Embedding emb;
  if (!o.embedding.empty()) {
    emb = load_embedding(o.embedding);
  } else if (!o.vocab.empty()) {
    emb = toy_embedding(load_vocab(o.vocab).size(), o.seed);
  } else {
    throw Error("diag: pass --embedding, or --vocab with --seed for the toy embedding");
  }
  std::string csv = csv_line({"step", "compactness_fused", "compactness_target", "center_distance"});
  std::size_t step = 0;
  for (std::size_t s = 0; s < fused.size(); ++s) {
    for (const auto& d : diagnose(fused[s], target[s], emb)) {
      csv += csv_line({std::to_string(step++), format_double(d.compactness_fused),
                       format_double(d.compactness_target), format_double(d.center_distance)});
    }
  }
  emit(o.out, csv, out);
  return {{"inputs", {{"fused", o.fused}, {"target", o.target}, {"embedding", o.embedding}, {"vocab", o.vocab}}},
          {"outputs", {{"out", o.out}}}};
}

ojson cmd_fixtures(const Options& o, std::ostream&) {
  FixtureOptions fo;
  fo.seed = o.seed;
  fo.window = o.top_k;
  write_fixtures(generate_fixtures(fo), fs::path(o.out));
  return {{"config", {{"top_k", o.top_k}}}, {"outputs", {{"out", o.out}}}};
}

void add_ot_flags(CLI::App* c, Options& o) {
  c->add_option("--temperature", o.temperature, "Sinkhorn temperature")->capture_default_str();
  c->add_option("--threshold", o.threshold, "Convergence threshold (L1)")->capture_default_str();
  c->add_option("--max-iters", o.max_iters, "Maximum Sinkhorn iterations")->capture_default_str();
}

void add_fusion_flags(CLI::App* c, Options& o) {
  c->add_option("--fusion", o.fusion, "Fusion function")
      ->check(CLI::IsMember({"mince", "avgce"}))
      ->capture_default_str();
  c->add_option("--discrepancy", o.discrepancy, "Fusion discrepancy")
      ->check(CLI::IsMember({"cross_entropy", "ce", "kl"}))
      ->capture_default_str();
  c->add_option("--lambda", o.lambda, "Combination weight of the CLM loss")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Cross-tokenizer distribution alignment", "ptalign"};
  app.require_subcommand(1, 1);
  app.fallthrough(false);

  auto* tok = app.add_subcommand("tokenize", "Tokenize text with a vocabulary");
  tok->add_option("--vocab", o.vocab, "Vocabulary file")->required();
  tok->add_option("--text", o.text, "Text to tokenize");
  tok->add_option("--input", o.input, "Read text lines from a file ('-' for stdin)");
  tok->add_option("--out", o.out, "Output file (default stdout)");

  auto* pair = app.add_subcommand("pair", "Pair two tokenizations of a text");
  pair->add_option("--src-vocab", o.src_vocab, "Source vocabulary")->required()->expected(1);
  pair->add_option("--tgt-vocab", o.tgt_vocab, "Target vocabulary")->required();
  pair->add_option("--text", o.text, "Text tokenized by both vocabularies");
  pair->add_option("--src-text", o.src_text, "Source text (overrides --text)");
  pair->add_option("--tgt-text", o.tgt_text, "Target text (overrides --text)");
  pair->add_option("--out", o.out, "Output file (default stdout)");

  auto* align = app.add_subcommand("align", "Fuse source matrices into the target token space");
  align->add_option("--src", o.src, "Source matrix file (repeat for multi-source fusion)")->required();
  align->add_option("--src-vocab", o.src_vocab, "Source vocabulary (one per --src)")->required();
  align->add_option("--tgt", o.tgt, "Target matrix file")->required();
  align->add_option("--tgt-vocab", o.tgt_vocab, "Target vocabulary")->required();
  align->add_option("--strategy", o.strategy, "Alignment strategy")
      ->check(CLI::IsMember({"ot", "mined", "em"}))
      ->capture_default_str();
  align->add_option("--top-k", o.top_k, "Window size")->check(CLI::PositiveNumber)->capture_default_str();
  add_ot_flags(align, o);
  add_fusion_flags(align, o);
  align->add_option("--out", o.out, "Fused matrix output file")->required();
  align->add_option("--stats", o.stats, "Stats JSON output (default stdout)");

  auto* sk = app.add_subcommand("sinkhorn", "Solve one transport instance {cost, a, b}");
  sk->add_option("--input", o.input, "Instance JSON ('-' for stdin)")->required();
  add_ot_flags(sk, o);
  sk->add_option("--out", o.out, "Output file (default stdout)");

  auto* loss = app.add_subcommand("loss", "Evaluate CLM, fusion and combined losses");
  loss->add_option("--pred", o.pred, "Model prediction matrices")->required();
  loss->add_option("--fused", o.fused, "Fused matrices")->required();
  add_fusion_flags(loss, o);
  loss->add_option("--out", o.out, "Output file (default stdout)");

  auto* train = app.add_subcommand("train-toy", "Train the tabular toy model");
  train->add_option("--vocab", o.vocab, "Target vocabulary")->required();
  train->add_option("--corpus", o.corpus, "Matrix file whose gold ids form the corpus")->required();
  train->add_option("--fused", o.fused, "Fused matrices aligned to the corpus");
  train->add_option("--heldout", o.heldout, "Matrix file with held-out gold ids");
  add_fusion_flags(train, o);
  train->add_option("--lr", o.lr, "Learning rate")->check(CLI::PositiveNumber)->capture_default_str();
  train->add_option("--epochs", o.epochs, "Gradient steps")->capture_default_str();
  train->add_option("--seed", o.seed, "Initialisation seed")->capture_default_str();
  train->add_option("--out", o.out, "Loss-trace CSV")->required();

  auto* diag = app.add_subcommand("diag", "Compactness and center-distance diagnostics");
  diag->add_option("--fused", o.fused, "Fused matrices")->required();
  diag->add_option("--target", o.target, "Target matrices")->required();
  diag->add_option("--embedding", o.embedding, "Embedding JSON (id -> [x, y])");
  diag->add_option("--vocab", o.vocab, "Vocabulary for the seeded toy embedding");
  diag->add_option("--seed", o.seed, "Toy embedding seed")->capture_default_str();
  diag->add_option("--out", o.out, "CSV output (default stdout)");

  auto* fx = app.add_subcommand("fixtures", "Generate the synthetic two-tokenizer corpus");
  fx->add_option("--seed", o.seed, "Generator seed")->capture_default_str();
  fx->add_option("--top-k", o.top_k, "Window size")->check(CLI::PositiveNumber)->capture_default_str();
  fx->add_option("--out", o.out, "Output directory")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  try {
    ojson manifest;
    if (name == "tokenize") {
      manifest = cmd_tokenize(o, out);
    } else if (name == "pair") {
      manifest = cmd_pair(o, out);
    } else if (name == "align") {
      manifest = cmd_align(o, out);
    } else if (name == "sinkhorn") {
      manifest = cmd_sinkhorn(o, out);
    } else if (name == "loss") {
      manifest = cmd_loss(o, out);
    } else if (name == "train-toy") {
      manifest = cmd_train_toy(o, out);
    } else if (name == "diag") {
      manifest = cmd_diag(o, out);
    } else {
      manifest = cmd_fixtures(o, out);
    }
    ojson full{{"subcommand", name}};
    full.update(manifest);
    full["seed"] = o.seed;
    err << full.dump() << "\n";
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  return run(std::vector<std::string>(argv, argv + argc), out, err);
}

}  // namespace ptalign::cli
