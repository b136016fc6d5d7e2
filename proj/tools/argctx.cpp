// Command-line front end: validate, featurize, synth, train, cv, sweep, report.
//
// Exit codes: 0 success, 1 usage error, 2 data/config error, 3 numerical failure.
// Errors go to stderr prefixed with ERROR[<code>]:.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "argctx/argctx.hpp"

namespace fs = std::filesystem;
using argctx::json;

namespace {

constexpr int kUsage = 1;
constexpr int kData = 2;
constexpr int kNumerical = 3;

json metrics_json(const argctx::FoldMetrics& m) {
  json j;
  j["kappa"] = m.kappa;
  j["precision"] = m.precision;
  j["recall"] = m.recall;
  j["f_score"] = m.f_score;
  json rows = json::array();
  for (const auto& row : m.confusion) rows.push_back(row);
  j["confusion"] = rows;
  return j;
}

argctx::ExperimentConfig load_config(const std::string& path, std::optional<std::uint64_t> seed) {
  auto cfg = argctx::load_experiment_config(path);
  if (seed) cfg.training.seed = *seed;
  return cfg;
}

int cmd_validate(const std::string& corpus_path, const std::string& format) {
  const auto fmt = format.empty() ? argctx::format_from_path(corpus_path)
                                  : (format == "jsonl" ? argctx::CorpusFormat::Jsonl : argctx::CorpusFormat::Csv);
  argctx::ParseOptions opts;
  opts.require_labels = false;
  const auto corpus = argctx::parse_corpus(corpus_path, fmt, opts);
  std::cout << argctx::validate_corpus(corpus).to_json().dump(2) << "\n";
  return 0;
}

int cmd_featurize(const std::string& corpus_path, const std::string& lexicons, const std::string& vectors_path,
                  const std::string& out_path) {
  argctx::ParseOptions opts;
  opts.require_labels = false;
  const auto corpus = argctx::parse_corpus(corpus_path, argctx::format_from_path(corpus_path), opts);
  const auto lex = argctx::load_lexicons(lexicons);
  const auto vectors = argctx::load_word_vectors(vectors_path);
  const auto idf = argctx::compute_idf(corpus);
  std::ofstream out(out_path);
  if (!out) throw argctx::DataError("cannot write '" + out_path + "'");
  std::vector<std::string> header = {"discussion_id", "global_index"};
  for (std::size_t i = 0; i < argctx::kWordVectorDim; ++i) header.push_back("wv" + std::to_string(i));
  for (auto name : argctx::kScalarNames) header.emplace_back(name);
  argctx::csv::write_row(out, header);
  for (const auto& d : corpus.discussions()) {
    for (const auto& a : d.adus) {
      const auto f = argctx::handcrafted(a, lex, idf, vectors);
      std::vector<std::string> row = {a.discussion_id, std::to_string(a.global_index)};
      for (Eigen::Index i = 0; i < f.values.size(); ++i) row.push_back(argctx::format_real(f.values[i]));
      argctx::csv::write_row(out, row);
    }
  }
  return 0;
}

int cmd_synth(const std::string& config_path, const std::string& out_dir, std::optional<std::uint64_t> seed) {
  std::ifstream in(config_path);
  if (!in) throw argctx::ConfigError("cannot open synth config '" + config_path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw argctx::ConfigError(std::string("malformed synth config: ") + e.what());
  }
  if (seed) j["seed"] = *seed;
  const auto cfg = argctx::synth_from_json(j);
  fs::create_directories(out_dir);
  {
    std::ofstream out(fs::path(out_dir) / "corpus.csv");
    argctx::write_corpus_csv(out, argctx::generate(cfg));
  }
  {
    std::ofstream out(fs::path(out_dir) / "vectors.txt");
    argctx::write_word_vectors(out, argctx::synth_word_vectors(cfg));
  }
  {
    std::ofstream out(fs::path(out_dir) / "synth_config.json");
    out << j.dump(2) << "\n";
  }
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& out_path, std::optional<std::uint64_t> seed) {
  const auto cfg = load_config(config_path, seed);
  const auto res = argctx::load_resources(cfg);
  const auto trained = argctx::train_full(cfg, res);
  argctx::save_trained(out_path, trained);
  json log = json::array();
  for (const auto& e : trained.log) {
    log.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"dev_kappa", e.dev_kappa}, {"dev_f_score", e.dev_f_score}});
  }
  json summary;
  summary["checkpoint"] = out_path;
  summary["seed"] = cfg.training.seed;
  summary["best_epoch"] = trained.best_epoch;
  summary["log"] = log;
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int cmd_cv(const std::string& config_path, const std::string& out_path, std::size_t jobs,
           std::optional<std::uint64_t> seed) {
  const auto cfg = load_config(config_path, seed);
  const auto res = argctx::load_resources(cfg);
  const auto cv = argctx::cross_validate(cfg, res, {jobs, {}});
  json j;
  j["config"] = argctx::to_json(cfg);
  j["seed"] = cfg.training.seed;
  j["pooled"] = metrics_json(cv.metrics.pooled);
  json folds = json::array();
  for (std::size_t f = 0; f < cv.metrics.per_fold.size(); ++f) {
    json fj = metrics_json(cv.metrics.per_fold[f]);
    fj["fold"] = f;
    fj["best_epoch"] = cv.folds[f].best_epoch;
    fj["n_test"] = cv.folds[f].test.size();
    folds.push_back(fj);
  }
  j["per_fold"] = folds;
  const std::string text = j.dump(2) + "\n";
  if (out_path.empty()) {
    std::cout << text;
  } else {
    std::ofstream out(out_path);
    if (!out) throw argctx::DataError("cannot write '" + out_path + "'");
    out << text;
  }
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& grid_path, const std::string& out_dir, std::size_t jobs,
              std::optional<std::uint64_t> seed) {
  const auto cfg = load_config(config_path, seed);
  std::ifstream in(grid_path);
  if (!in) throw argctx::ConfigError("cannot open grid '" + grid_path + "'");
  nlohmann::json gj;
  try {
    gj = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw argctx::ConfigError(std::string("malformed grid: ") + e.what());
  }
  const auto grid = argctx::grid_from_json(gj);
  fs::create_directories(out_dir);
  {
    json echo;
    echo["config"] = argctx::to_json(cfg);
    echo["grid"] = gj;
    echo["seed"] = cfg.training.seed;
    std::ofstream out(fs::path(out_dir) / "sweep_config.json");
    out << echo.dump(2) << "\n";
  }
  argctx::sweep(cfg, grid, out_dir, {jobs, &std::cerr});
  return 0;
}

int cmd_report(const std::string& results) {
  std::cout << argctx::render_report(argctx::summarize(argctx::read_results(results)));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Argument component classification with local and speaker context"};
  app.require_subcommand(1);

  std::string corpus, format, lexicons, vectors, out, config, grid, out_dir, results;
  std::string checkpoint = "model.ckpt";
  std::size_t jobs = 1;
  std::optional<std::uint64_t> seed;

  auto* validate = app.add_subcommand("validate", "Print a corpus validation report as JSON");
  validate->add_option("--corpus", corpus, "Corpus file (.csv or .jsonl)")->required();
  validate->add_option("--format", format, "Override format detection")->check(CLI::IsMember({"csv", "jsonl"}));

  auto* featurize = app.add_subcommand("featurize", "Write the 114 handcrafted features per ADU as CSV");
  featurize->add_option("--corpus", corpus)->required();
  featurize->add_option("--lexicons", lexicons, "Lexicon directory")->required();
  featurize->add_option("--vectors", vectors, "100-dim word vector file")->required();
  featurize->add_option("--out", out)->required();

  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus and word vectors");
  synth->add_option("--config", config, "Synth config JSON")->required();
  synth->add_option("--out", out_dir, "Output directory")->required();
  synth->add_option("--seed", seed, "Override the config seed");

  auto* train = app.add_subcommand("train", "Train on the full corpus and write a checkpoint");
  train->add_option("--config", config, "Experiment config JSON")->required();
  train->add_option("--out", checkpoint, "Checkpoint path")->capture_default_str();
  train->add_option("--seed", seed, "Override the config seed");

  auto* cv = app.add_subcommand("cv", "Cross-validate and write metrics JSON");
  cv->add_option("--config", config, "Experiment config JSON")->required();
  cv->add_option("--out", out, "Metrics JSON path (stdout when omitted)");
  cv->add_option("--jobs", jobs, "Folds trained in parallel")->check(CLI::PositiveNumber);
  cv->add_option("--seed", seed, "Override the config seed");

  auto* sweep = app.add_subcommand("sweep", "Cross-validate every cell of a context grid");
  sweep->add_option("--config", config, "Base experiment config JSON")->required();
  sweep->add_option("--grid", grid, "Grid JSON")->required();
  sweep->add_option("--out-dir", out_dir, "Directory for results.csv and curve files")->required();
  sweep->add_option("--jobs", jobs, "Folds trained in parallel")->check(CLI::PositiveNumber);
  sweep->add_option("--seed", seed, "Override the config seed");

  auto* report = app.add_subcommand("report", "Summarize a sweep results file as a table");
  report->add_option("--results", results, "results.csv from sweep")->required();

  if (argc < 2) {
    std::cerr << app.help();
    return kUsage;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "ERROR[" << kUsage << "]: " << e.what() << "\n" << app.help();
    return kUsage;
  }

  try {
    if (*validate) return cmd_validate(corpus, format);
    if (*featurize) return cmd_featurize(corpus, lexicons, vectors, out);
    if (*synth) return cmd_synth(config, out_dir, seed);
    if (*train) return cmd_train(config, checkpoint, seed);
    if (*cv) return cmd_cv(config, out, jobs, seed);
    if (*sweep) return cmd_sweep(config, grid, out_dir, jobs, seed);
    if (*report) return cmd_report(results);
  } catch (const argctx::NumericalError& e) {
    std::cerr << "ERROR[" << kNumerical << "]: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "ERROR[" << kData << "]: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}
