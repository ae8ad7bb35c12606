#include "retrologic/pipeline/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numeric>
#include <optional>
#include <ostream>

#include "retrologic/chem/smiles.hpp"
#include "retrologic/error.hpp"
#include "retrologic/inference/inference.hpp"
#include "retrologic/pipeline/cache.hpp"
#include "retrologic/pipeline/config.hpp"
#include "retrologic/pipeline/dataset.hpp"
#include "retrologic/pipeline/stats.hpp"
#include "retrologic/training/training.hpp"

namespace retrologic {

namespace {

using nlohmann::json;

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::size_t> beam;
  bool class_conditional = false;
};

RunConfig resolve(const Globals& g) {
  RunConfig cfg = g.config.empty() ? RunConfig{} : load_config_file(g.config);
  if (g.seed) cfg.model.seed = cfg.train.seed = *g.seed;
  if (g.threads) cfg.train.threads = *g.threads;
  if (g.beam) cfg.train.beam = *g.beam;
  if (g.class_conditional) cfg.model.class_conditional = true;
  return cfg;
}

std::string need(const std::string& value, const std::string& fallback, const char* what) {
  const auto& v = value.empty() ? fallback : value;
  if (v.empty()) throw std::invalid_argument(std::string("missing ") + what);
  return v;
}

Dataset read_data(const std::string& path, std::ostream& err) {
  IngestReport rep;
  auto data = load_reactions_file(path, &rep);
  err << "ingest " << path << " " << to_json(rep) << '\n';
  return data;
}

TemplateTable read_templates(const std::string& path, std::ostream& err) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read templates " + path);
  auto rep = load_templates(in);
  err << "templates " << path << " "
      << json{{"parsed", rep.parsed}, {"rejected", rep.rejected}, {"duplicates", rep.duplicates}}.dump()
      << '\n';
  for (const auto& e : rep.errors) err << "  " << e << '\n';
  return std::move(rep.table);
}

void write_file(const std::string& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  body(out);
  if (!out) throw DataError("write failed for " + path);
}

CacheStore caches_for(const Dataset& data, TemplateTable table, const RunConfig& cfg,
                      std::ostream& err, const std::string& label) {
  CacheReport rep;
  auto store = build_caches(data, std::move(table),
                            {cfg.train.threads, cfg.support_cap, cfg.radius}, &rep);
  err << "cache " << label << " " << to_json(rep) << '\n';
  return store;
}

std::string join_molecules(const ReactantSet& set) {
  std::string s;
  for (const auto& m : set.molecules) {
    if (!s.empty()) s += '.';
    s += write_molecule(m);
  }
  return s;
}

json report_json(const EvalReport& r) {
  json top;
  for (std::size_t k = 0; k < r.ks.size(); ++k) top[std::to_string(r.ks[k])] = r.accuracy[k];
  json j = {{"count", r.count}, {"coverage", r.coverage}, {"top_k", top}};
  if (!r.class_count.empty()) {
    json by_class;
    for (const auto& [c, acc] : r.class_accuracy) {
      json row;
      for (std::size_t k = 0; k < r.ks.size(); ++k) row[std::to_string(r.ks[k])] = acc[k];
      by_class[std::to_string(c)] = {{"count", r.class_count.at(c)}, {"top_k", row}};
    }
    j["by_class"] = by_class;
  }
  return j;
}

ProductSupport support_for(const MolGraph& product, const TemplateTable& table, const RunConfig& cfg,
                           std::optional<int> cls, bool class_given) {
  auto s = build_support(product.without_map_labels(), table, std::nullopt, cfg.support_cap);
  if (class_given && cls) s = restrict_by_class(s, *cls);
  return s;
}

int run_extract(const RunConfig& cfg, const std::string& data_path, const std::string& out_path,
                std::ostream& out, std::ostream& err) {
  const auto data = read_data(need(data_path, cfg.train_path, "--data"), err);
  const auto rep = extract_templates(data, cfg.radius);
  const auto path = need(out_path, cfg.templates_path, "--out");
  write_file(path, [&](std::ostream& o) { write_templates(o, rep.table); });
  for (const auto& e : rep.errors) err << "  " << e << '\n';
  out << json{{"records", data.records.size()}, {"templates", rep.table.size()}, {"failed", rep.failed}}.dump()
      << '\n';
  return kExitOk;
}

int run_cache(const RunConfig& cfg, const std::string& data_path, const std::string& templates,
              const std::string& out_path, bool verify, std::ostream& out, std::ostream& err) {
  const auto data = read_data(need(data_path, cfg.train_path, "--data"), err);
  auto table = read_templates(need(templates, cfg.templates_path, "--templates"), err);
  const auto store = caches_for(data, table, cfg, err, data_path);
  const auto path = need(out_path, "", "--out");
  write_file(path, [&](std::ostream& o) { save_cache(o, store); });
  json j = {{"products", store.entries.size()}, {"table_hash", template_table_hash(store.table)}};
  if (verify) {
    std::ifstream in(path);
    const auto failures = verify_cache(load_cache(in, table));
    j["verify_failures"] = failures;
    out << j.dump() << '\n';
    return failures == 0 ? kExitOk : kExitData;
  }
  out << j.dump() << '\n';
  return kExitOk;
}

int run_train(RunConfig cfg, std::ostream& out, std::ostream& err) {
  const auto train_data = read_data(need(cfg.train_path, "", "training data (--train or config 'train')"), err);
  TemplateTable table;
  if (!cfg.templates_path.empty() && std::filesystem::exists(cfg.templates_path)) {
    table = read_templates(cfg.templates_path, err);
  } else {
    auto rep = extract_templates(train_data, cfg.radius);
    err << "extract " << json{{"templates", rep.table.size()}, {"failed", rep.failed}}.dump() << '\n';
    table = std::move(rep.table);
    if (!cfg.templates_path.empty()) {
      write_file(cfg.templates_path, [&](std::ostream& o) { write_templates(o, table); });
    }
  }
  const auto model_path = need(cfg.model_path, "", "model output path (--model or config 'model')");
  const auto train_store = caches_for(train_data, table, cfg, err, "train");
  const auto train_set = make_examples(train_data, train_store, cfg.radius);
  std::vector<Example> val_set;
  if (!cfg.val_path.empty()) {
    const auto val_data = read_data(cfg.val_path, err);
    val_set = make_examples(val_data, caches_for(val_data, table, cfg, err, "val"), cfg.radius);
  }

  std::ofstream metrics_file;
  if (!cfg.metrics_path.empty()) {
    metrics_file.open(cfg.metrics_path);
    if (!metrics_file) throw DataError("cannot write " + cfg.metrics_path);
  }
  std::ostream& metrics = cfg.metrics_path.empty() ? out : metrics_file;
  const auto model = GlnModel::initialize(cfg.model);
  const auto result = train(model, train_set, val_set.empty() ? nullptr : &val_set, cfg.train,
                            [&](const MetricsRecord& r) { metrics << to_json_line(r) << '\n' << std::flush; });
  result.best_model.save(model_path);
  err << "train " << json{{"examples", train_set.size()}, {"skipped", result.skipped_examples},
                          {"updates", result.metrics.back().update}, {"model", model_path}}.dump()
      << '\n';
  return kExitOk;
}

int run_eval(const RunConfig& cfg, const std::string& model_path, const std::string& templates,
             const std::string& data_path, std::ostream& out, std::ostream& err) {
  const auto model = GlnModel::load(need(model_path, cfg.model_path, "--model"));
  const auto table = read_templates(need(templates, cfg.templates_path, "--templates"), err);
  const auto data = read_data(need(data_path, cfg.test_path, "--data"), err);
  const auto examples = make_examples(data, caches_for(data, table, cfg, err, "eval"), cfg.radius);
  const bool class_given = cfg.model.class_conditional || model.config.class_conditional;
  const auto report = evaluate(examples, model, kDefaultTopK, cfg.train.beam, class_given);
  auto j = report_json(report);
  j["records"] = data.records.size();
  j["class_given"] = class_given;
  j["uniform_baseline_top1"] = uniform_baseline_top1(examples);
  out << j.dump() << '\n';
  return kExitOk;
}

int run_predict(const RunConfig& cfg, const std::string& model_path, const std::string& templates,
                const std::string& product, const std::string& data_path, std::optional<int> cls,
                std::ostream& out, std::ostream& err) {
  const auto model = GlnModel::load(need(model_path, cfg.model_path, "--model"));
  const auto table = read_templates(need(templates, cfg.templates_path, "--templates"), err);
  const bool class_given = cfg.model.class_conditional || model.config.class_conditional;
  std::vector<std::tuple<std::string, MolGraph, std::optional<int>>> queries;
  if (!product.empty()) {
    queries.emplace_back("query", parse_molecule(product), cls);
  } else {
    const auto data = read_data(need(data_path, "", "--product or --data"), err);
    for (const auto& r : data.records) queries.emplace_back(r.record_id, r.product, r.reaction_class);
  }
  for (const auto& [id, mol, c] : queries) {
    std::vector<Prediction> preds;
    try {
      preds = beam_search(model, support_for(mol, table, cfg, c, class_given), {cfg.train.beam, true});
    } catch (const EmptySupportError&) {
      preds.clear();
    }
    if (preds.empty()) err << id << ": no template applies\n";
    for (const auto& p : preds) {
      out << id << '\t' << p.rank << '\t' << p.score << '\t' << join_molecules(p.reactants) << '\t'
          << p.template_key << '\n';
    }
  }
  return kExitOk;
}

int run_inspect(const RunConfig& cfg, const std::string& model_path, const std::string& templates,
                const std::string& product, std::ostream& out, std::ostream& err) {
  const auto model = GlnModel::load(need(model_path, cfg.model_path, "--model"));
  const auto table = read_templates(need(templates, cfg.templates_path, "--templates"), err);
  const auto mol = parse_molecule(need(product, "", "--product")).without_map_labels();
  const auto support = build_support(mol, table, std::nullopt, cfg.support_cap);
  const Scorer scorer(model, support.product_features);
  std::vector<std::pair<double, std::size_t>> ranked;
  for (std::size_t c = 0; c < support.centers.size(); ++c) {
    ranked.emplace_back(scorer.v1(support.centers[c].center_features), c);
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  if (ranked.size() > cfg.train.beam) ranked.resize(cfg.train.beam);
  json centers = json::array();
  for (const auto& [v1, c] : ranked) {
    const auto scores = scorer.atom_scores(support.centers[c].center_features);
    json atoms = json::array();
    for (std::size_t i = 0; i < mol.atom_count(); ++i) {
      atoms.push_back({{"index", i},
                       {"atom", atom_text(mol.atom(static_cast<int>(i)), false)},
                       {"score", scores[static_cast<Eigen::Index>(i)]}});
    }
    centers.push_back({{"center", write_pattern(support.centers[c].center)},
                       {"v1", v1},
                       {"templates", support.centers[c].templates.size()},
                       {"atoms", atoms}});
  }
  out << json{{"product", write_molecule(mol)}, {"centers", centers}}.dump(2) << '\n';
  return kExitOk;
}

int run_stats(const RunConfig& cfg, const std::string& data_path, const std::string& templates,
              const std::string& cache_path, std::ostream& out, std::ostream& err) {
  const auto data = read_data(need(data_path, cfg.train_path, "--data"), err);
  auto table = read_templates(need(templates, cfg.templates_path, "--templates"), err);
  CacheStore store;
  if (!cache_path.empty()) {
    std::ifstream in(cache_path);
    if (!in) throw DataError("cannot read cache " + cache_path);
    store = load_cache(in, table);
  } else {
    store = caches_for(data, std::move(table), cfg, err, "stats");
  }
  out << to_json(corpus_stats(data, store)) << '\n';
  return kExitOk;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Template-based single-step retrosynthesis", "retrologic"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "flat key=value configuration file");
  app.add_option("--seed", g.seed, "random seed for initialization and sampling");
  app.add_option("--threads", g.threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--beam", g.beam, "beam width and number of predictions")->check(CLI::PositiveNumber);
  app.add_flag("--class-conditional", g.class_conditional, "restrict supports to the reaction class");

  std::string data, templates, out_path, model, product, cache, train_path, val_path, metrics;
  std::optional<int> radius, cls;
  bool verify = false;

  auto* extract = app.add_subcommand("extract", "extract templates from mapped reactions");
  extract->add_option("--data", data, "reaction TSV");
  extract->add_option("--out", out_path, "template file to write");
  extract->add_option("--radius", radius, "neighborhood radius around the center")->check(CLI::NonNegativeNumber);

  auto* cache_cmd = app.add_subcommand("cache", "build and persist template and reactant supports");
  cache_cmd->add_option("--data", data, "reaction TSV");
  cache_cmd->add_option("--templates", templates, "template file");
  cache_cmd->add_option("--out", out_path, "cache file to write");
  cache_cmd->add_flag("--verify", verify, "reload the cache and replay both match predicates");

  auto* train_cmd = app.add_subcommand("train", "train a model");
  train_cmd->add_option("--train", train_path, "training reactions");
  train_cmd->add_option("--val", val_path, "validation reactions");
  train_cmd->add_option("--templates", templates, "template file (extracted and written if absent)");
  train_cmd->add_option("--model", model, "model file to write");
  train_cmd->add_option("--metrics", metrics, "JSON-lines metrics file (default: standard output)");

  auto* predict = app.add_subcommand("predict", "rank reactant sets for products");
  predict->add_option("--model", model, "model file");
  predict->add_option("--templates", templates, "template file");
  predict->add_option("--product", product, "product in line notation");
  predict->add_option("--data", data, "reaction TSV whose products are queried");
  predict->add_option("--class", cls, "reaction class of --product");

  auto* eval = app.add_subcommand("eval", "top-k exact match on a labeled split");
  eval->add_option("--model", model, "model file");
  eval->add_option("--templates", templates, "template file");
  eval->add_option("--data", data, "reaction TSV");

  auto* inspect = app.add_subcommand("inspect", "per-atom center scores for a product");
  inspect->add_option("--model", model, "model file");
  inspect->add_option("--templates", templates, "template file");
  inspect->add_option("--product", product, "product in line notation");

  auto* stats = app.add_subcommand("stats", "corpus statistics and template coverage");
  stats->add_option("--data", data, "reaction TSV");
  stats->add_option("--templates", templates, "template file");
  stats->add_option("--cache", cache, "cache file (built on the fly when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    auto cfg = resolve(g);
    if (radius) cfg.radius = *radius;
    if (*extract) return run_extract(cfg, data, out_path, out, err);
    if (*cache_cmd) return run_cache(cfg, data, templates, out_path, verify, out, err);
    if (*train_cmd) {
      if (!train_path.empty()) cfg.train_path = train_path;
      if (!val_path.empty()) cfg.val_path = val_path;
      if (!templates.empty()) cfg.templates_path = templates;
      if (!model.empty()) cfg.model_path = model;
      if (!metrics.empty()) cfg.metrics_path = metrics;
      return run_train(cfg, out, err);
    }
    if (*predict) return run_predict(cfg, model, templates, product, data, cls, out, err);
    if (*eval) return run_eval(cfg, model, templates, data, out, err);
    if (*inspect) return run_inspect(cfg, model, templates, product, out, err);
    if (*stats) return run_stats(cfg, data, templates, cache, out, err);
  } catch (const NumericAbort& e) {
    err << "numeric abort: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << '\n';
    return kExitData;
  } catch (const SizeLimitError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace retrologic
