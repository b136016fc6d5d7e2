#pragma once

// Experiment configuration, per-fold feature extraction, the training loop
// with dev-set early stopping, and k-fold cross-validation.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "argctx/context.hpp"
#include "argctx/corpus.hpp"
#include "argctx/embeddings.hpp"
#include "argctx/features.hpp"
#include "argctx/metrics.hpp"
#include "argctx/model.hpp"
#include "argctx/neural/adam.hpp"
#include "argctx/neural/checkpoint.hpp"
#include "argctx/parallel.hpp"

namespace argctx {

using json = nlohmann::ordered_json;

struct TrainingConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  std::size_t early_stop_patience = 10;
  std::uint64_t seed = 1;
  bool class_weights = false;

  bool operator==(const TrainingConfig&) const = default;
};

enum class FoldUnit { Discussion, Adu };

struct ExperimentPaths {
  std::string corpus;
  std::string lexicons;
  std::string vectors;
  std::string embeddings;

  bool operator==(const ExperimentPaths&) const = default;
};

struct ExperimentConfig {
  ModelConfig model;
  TrainingConfig training;
  std::size_t folds = 10;
  FoldUnit fold_unit = FoldUnit::Discussion;
  ExperimentPaths paths;

  void validate() const {
    model.validate();
    if (training.batch_size == 0) throw ConfigError("training.batch_size must be positive");
    if (!(training.learning_rate > 0.0)) throw ConfigError("training.learning_rate must be positive");
    if (training.early_stop_patience == 0) throw ConfigError("training.early_stop_patience must be positive");
    if (folds < 2) throw ConfigError("folds must be at least 2");
  }

  bool operator==(const ExperimentConfig&) const = default;
};

inline json context_to_json(const ContextSpec& c) {
  json j;
  j["local_size"] = c.local_size;
  j["local_position"] = std::string(to_string(c.local_position));
  j["speaker_size"] = c.speaker_size;
  j["local_attention"] = c.local_attention;
  j["speaker_attention"] = c.speaker_attention;
  return j;
}

inline ContextSpec context_from_json(const json& j) {
  ContextSpec c;
  c.local_size = j.value("local_size", std::size_t{0});
  c.local_position = parse_position(j.value("local_position", std::string("both")));
  c.speaker_size = j.value("speaker_size", std::size_t{0});
  c.local_attention = j.value("local_attention", false);
  c.speaker_attention = j.value("speaker_attention", false);
  c.validate();
  return c;
}

inline json to_json(const ExperimentConfig& c) {
  json j;
  j["pipeline"] = std::string(to_string(c.model.pipeline));
  j["context"] = context_to_json(c.model.context);
  json t;
  t["epochs"] = c.training.epochs;
  t["batch_size"] = c.training.batch_size;
  t["learning_rate"] = c.training.learning_rate;
  t["early_stop_patience"] = c.training.early_stop_patience;
  t["seed"] = c.training.seed;
  t["class_weights"] = c.training.class_weights;
  j["training"] = t;
  j["folds"] = c.folds;
  j["fold_unit"] = c.fold_unit == FoldUnit::Discussion ? "discussion" : "adu";
  json e;
  e["filter_widths"] = c.model.target_conv.widths;
  e["filters_per_width"] = c.model.target_conv.filters_per_width;
  e["speaker_filter_widths"] = c.model.speaker_conv.widths;
  e["speaker_filters_per_width"] = c.model.speaker_conv.filters_per_width;
  e["embedding_dim"] = c.model.embedding_dim;
  e["lstm_hidden"] = c.model.lstm_hidden;
  j["encoder"] = e;
  json p;
  p["corpus"] = c.paths.corpus;
  p["lexicons"] = c.paths.lexicons;
  p["vectors"] = c.paths.vectors;
  p["embeddings"] = c.paths.embeddings;
  j["paths"] = p;
  return j;
}

/// Relative paths resolve against `base_dir` (normally the config file's directory).
inline ExperimentConfig experiment_from_json(const json& j, const std::filesystem::path& base_dir = {}) {
  static const std::set<std::string> known = {"pipeline", "context", "training", "folds", "fold_unit", "encoder", "paths"};
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw ConfigError("unknown config key '" + k + "'");
  }
  ExperimentConfig c;
  try {
    c.model.pipeline = parse_pipeline(j.value("pipeline", std::string("hybrid")));
    if (j.contains("context")) c.model.context = context_from_json(j["context"]);
    if (j.contains("training")) {
      const auto& t = j["training"];
      c.training.epochs = t.value("epochs", c.training.epochs);
      c.training.batch_size = t.value("batch_size", c.training.batch_size);
      c.training.learning_rate = t.value("learning_rate", c.training.learning_rate);
      c.training.early_stop_patience = t.value("early_stop_patience", c.training.early_stop_patience);
      c.training.seed = t.value("seed", c.training.seed);
      c.training.class_weights = t.value("class_weights", c.training.class_weights);
    }
    c.folds = j.value("folds", c.folds);
    const std::string unit = j.value("fold_unit", std::string("discussion"));
    if (unit == "discussion") {
      c.fold_unit = FoldUnit::Discussion;
    } else if (unit == "adu") {
      c.fold_unit = FoldUnit::Adu;
    } else {
      throw ConfigError("fold_unit must be 'discussion' or 'adu'");
    }
    if (j.contains("encoder")) {
      const auto& e = j["encoder"];
      c.model.target_conv.widths = e.value("filter_widths", c.model.target_conv.widths);
      c.model.target_conv.filters_per_width = e.value("filters_per_width", c.model.target_conv.filters_per_width);
      c.model.speaker_conv.widths = e.value("speaker_filter_widths", c.model.speaker_conv.widths);
      c.model.speaker_conv.filters_per_width =
          e.value("speaker_filters_per_width", c.model.speaker_conv.filters_per_width);
      c.model.embedding_dim = e.value("embedding_dim", c.model.embedding_dim);
      c.model.lstm_hidden = e.value("lstm_hidden", c.model.lstm_hidden);
    }
    if (j.contains("paths")) {
      const auto& p = j["paths"];
      auto resolve = [&](const char* key) -> std::string {
        const std::string v = p.value(key, std::string());
        if (v.empty()) return v;
        const std::filesystem::path path(v);
        return path.is_absolute() || base_dir.empty() ? v : (base_dir / path).lexically_normal().string();
      };
      c.paths = {resolve("corpus"), resolve("lexicons"), resolve("vectors"), resolve("embeddings")};
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid experiment config: ") + e.what());
  }
  c.validate();
  return c;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("malformed config '" + path + "': " + e.what());
  }
  return experiment_from_json(j, std::filesystem::path(path).parent_path());
}

/// Everything the pipelines read from disk.
struct Resources {
  Corpus corpus;
  LexiconBundle lexicons;
  WordVectorTable vectors;
  std::optional<PrecomputedAduEmbeddings> embeddings;
};

inline Resources load_resources(const ExperimentConfig& c) {
  Resources r;
  if (c.paths.corpus.empty()) throw ConfigError("paths.corpus is required");
  r.corpus = parse_corpus(c.paths.corpus);
  if (c.model.pipeline == Pipeline::Hybrid) {
    if (c.paths.lexicons.empty() || c.paths.vectors.empty()) {
      throw ConfigError("the hybrid pipeline needs paths.lexicons and paths.vectors");
    }
    r.lexicons = load_lexicons(c.paths.lexicons);
    r.vectors = load_word_vectors(c.paths.vectors);
  } else {
    if (c.paths.embeddings.empty()) throw ConfigError("the pooled_embedding pipeline needs paths.embeddings");
    r.embeddings = load_precomputed(c.paths.embeddings, r.corpus, c.model.embedding_dim);
  }
  return r;
}

/// Invoked each time an ADU's text or embedding is read.
using AccessObserver = std::function<void(AduRef)>;

/// Lazily extracted encoder inputs for one fold. Not thread-safe; each fold
/// owns its own store.
class FeatureStore {
 public:
  FeatureStore(const Resources& res, Pipeline pipeline, const IdfTable* idf, AccessObserver observer = {})
      : res_(res), pipeline_(pipeline), idf_(idf), observer_(std::move(observer)) {}

  const AduFeatures& get(AduRef ref) {
    if (observer_) observer_(ref);
    auto it = cache_.find(ref);
    if (it != cache_.end()) return it->second;
    AduFeatures f;
    if (pipeline_ == Pipeline::Hybrid) {
      const Adu& adu = res_.corpus.adu(ref);
      f.handcrafted = handcrafted(adu, res_.lexicons, *idf_, res_.vectors).values;
      const auto tokens = tokenize(adu.text);
      f.tokens.resize(static_cast<Eigen::Index>(tokens.size()), static_cast<Eigen::Index>(res_.vectors.dim()));
      for (std::size_t i = 0; i < tokens.size(); ++i) {
        const auto& v = res_.vectors.contains(tokens[i].lower) ? res_.vectors.lookup(tokens[i].lower)
                                                                : res_.vectors.lookup(tokens[i].surface);
        f.tokens.row(static_cast<Eigen::Index>(i)) = v.transpose();
      }
    } else {
      f.pooled = res_.embeddings->pooled(ref);
    }
    return cache_.emplace(ref, std::move(f)).first->second;
  }

 private:
  const Resources& res_;
  Pipeline pipeline_;
  const IdfTable* idf_;
  AccessObserver observer_;
  std::map<AduRef, AduFeatures> cache_;
};

/// Builds a model batch for `targets`, pulling every context ADU from `store`.
inline Batch make_batch(const Corpus& corpus, const ContextSpec& spec, std::span<const AduRef> targets,
                        FeatureStore& store, bool with_labels) {
  Batch b;
  std::map<AduRef, std::size_t> slot;
  auto intern = [&](AduRef r) {
    auto [it, inserted] = slot.try_emplace(r, b.adus.size());
    if (inserted) b.adus.push_back(&store.get(r));
    return it->second;
  };
  for (const AduRef t : targets) {
    const ExamplePlan plan = plan_example(corpus, t, spec);
    ExampleSlots ex;
    ex.target = intern(t);
    ex.n_prior = prior_slots(spec.local_size, spec.local_position);
    for (const auto& s : plan.local.slots) {
      ex.local.push_back(s.index ? std::optional<std::size_t>(intern({t.discussion, *s.index})) : std::nullopt);
    }
    for (std::size_t i : plan.speaker) ex.speaker.push_back(intern({t.discussion, i}));
    b.examples.push_back(std::move(ex));
    if (with_labels) {
      const auto& label = corpus.adu(t).label;
      if (!label) throw DataError("ADU without gold label in training/evaluation data");
      b.labels.push_back(index_of(*label));
    }
  }
  return b;
}

inline std::size_t argmax(const nn::Vector& p) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < p.size(); ++i)
    if (p[i] > p[best]) best = i;
  return static_cast<std::size_t>(best);
}

inline std::vector<std::size_t> predict_labels(const ArgumentModel& model, const Corpus& corpus, FeatureStore& store,
                                               std::span<const AduRef> refs, std::size_t batch_size = 64) {
  std::vector<std::size_t> out;
  out.reserve(refs.size());
  for (std::size_t at = 0; at < refs.size(); at += batch_size) {
    const auto chunk = refs.subspan(at, std::min(batch_size, refs.size() - at));
    const Batch b = make_batch(corpus, model.config().context, chunk, store, false);
    for (const auto& p : model.predict(b)) out.push_back(argmax(p));
  }
  return out;
}

inline std::vector<std::size_t> gold_labels(const Corpus& corpus, std::span<const AduRef> refs) {
  std::vector<std::size_t> out;
  for (const AduRef r : refs) {
    const auto& l = corpus.adu(r).label;
    if (!l) throw DataError("ADU without gold label in evaluation data");
    out.push_back(index_of(*l));
  }
  return out;
}

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double dev_kappa = 0.0;
  double dev_f_score = 0.0;
};

struct TrainedModel {
  ExperimentConfig config;
  ArgumentModel model;
  IdfTable idf;
  std::size_t best_epoch = 0;
  std::vector<EpochLog> log;
};

/// Mean and standard deviation of the raw handcrafted block over `refs`;
/// constant features get scale 1.
inline std::pair<nn::Vector, nn::Vector> feature_scaling(FeatureStore& store, std::span<const AduRef> refs) {
  const auto h = static_cast<Eigen::Index>(kHandcraftedDim);
  nn::Vector mean = nn::Vector::Zero(h), sq = nn::Vector::Zero(h);
  for (const AduRef r : refs) mean += store.get(r).handcrafted;
  mean /= static_cast<double>(refs.size());
  for (const AduRef r : refs) sq += (store.get(r).handcrafted - mean).array().square().matrix();
  nn::Vector scale = (sq / static_cast<double>(refs.size())).array().sqrt();
  for (Eigen::Index i = 0; i < h; ++i)
    if (!(scale[i] > 1e-12)) scale[i] = 1.0;
  return {mean, scale};
}

/// Trains on `train_refs`, early-stopping on dev macro-F. IDF and feature
/// scaling come from train_refs and dev_refs only. Returns the best-dev
/// parameters (the final ones when dev is empty).
inline TrainedModel train(const ExperimentConfig& config, const Resources& res, std::span<const AduRef> train_refs,
                          std::span<const AduRef> dev_refs, const AccessObserver& observer = {}) {
  config.validate();
  if (train_refs.empty()) throw DataError("train: empty training split");
  const Corpus& corpus = res.corpus;
  TrainedModel out;
  out.config = config;

  std::vector<AduRef> fold_refs(train_refs.begin(), train_refs.end());
  fold_refs.insert(fold_refs.end(), dev_refs.begin(), dev_refs.end());
  if (config.model.pipeline == Pipeline::Hybrid) {
    if (observer)
      for (const AduRef r : fold_refs) observer(r);
    out.idf = compute_idf(corpus, fold_refs);
  }
  FeatureStore store(res, config.model.pipeline, &out.idf, observer);

  const std::uint64_t seed = config.training.seed;
  ArgumentModel model(config.model, seed);
  if (config.model.pipeline == Pipeline::Hybrid) {
    auto [mean, scale] = feature_scaling(store, fold_refs);
    model.set_feature_scaling(mean, scale);
  }

  std::array<double, kNumLabels> class_weight{1.0, 1.0, 1.0};
  if (config.training.class_weights) {
    std::array<std::size_t, kNumLabels> counts{};
    for (const AduRef r : train_refs) ++counts[index_of(*corpus.adu(r).label)];
    for (std::size_t c = 0; c < kNumLabels; ++c) {
      class_weight[c] = counts[c] ? static_cast<double>(train_refs.size()) / (kNumLabels * static_cast<double>(counts[c])) : 0.0;
    }
  }

  nn::AdamConfig adam;
  adam.learning_rate = config.training.learning_rate;
  nn::AdamState state = nn::AdamState::for_params(model.params());
  nn::ParameterSet grads = model.params().zeros_like();
  nn::ParameterSet best = model.params();
  double best_f = -1.0;
  std::size_t since_best = 0;
  const std::vector<std::size_t> dev_gold = gold_labels(corpus, dev_refs);

  std::vector<AduRef> order(train_refs.begin(), train_refs.end());
  for (std::size_t epoch = 1; epoch <= config.training.epochs; ++epoch) {
    Rng rng(derive_seed(seed, 0xE90C0000ULL + epoch));
    rng.shuffle(std::span<AduRef>(order));
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t at = 0; at < order.size(); at += config.training.batch_size) {
      const auto chunk = std::span<const AduRef>(order).subspan(at, std::min(config.training.batch_size, order.size() - at));
      Batch b = make_batch(corpus, config.model.context, chunk, store, true);
      if (config.training.class_weights)
        for (std::size_t y : b.labels) b.weights.push_back(class_weight[y]);
      grads.set_zero();
      loss_sum += model.loss_and_gradients(b, grads);
      ++batches;
      nn::optimizer_step(model.params(), grads, state, adam);
      if (auto bad = model.params().first_non_finite()) {
        throw NumericalError("non-finite value in parameter block '" + *bad + "' after epoch " + std::to_string(epoch));
      }
    }
    EpochLog entry{epoch, loss_sum / static_cast<double>(batches), 0.0, 0.0};
    if (!dev_refs.empty()) {
      const auto pred = predict_labels(model, corpus, store, dev_refs);
      const auto m = FoldMetrics::from(confusion(dev_gold, pred));
      entry.dev_kappa = m.kappa;
      entry.dev_f_score = m.f_score;
      if (m.f_score > best_f) {
        best_f = m.f_score;
        best = model.params();
        out.best_epoch = epoch;
        since_best = 0;
      } else if (++since_best >= config.training.early_stop_patience) {
        out.log.push_back(entry);
        break;
      }
    } else {
      best = model.params();
      out.best_epoch = epoch;
    }
    out.log.push_back(entry);
  }
  out.model = ArgumentModel(config.model, best);
  return out;
}

/// Roughly the last 10% of `discussions` (at least one), keeping at least
/// one for training; empty when fewer than two are available.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> carve_dev(std::vector<std::size_t> discussions) {
  if (discussions.size() < 2) return {discussions, {}};
  const auto n_dev = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(discussions.size()))), 1, discussions.size() - 1);
  std::vector<std::size_t> dev(discussions.end() - static_cast<long>(n_dev), discussions.end());
  discussions.resize(discussions.size() - n_dev);
  return {discussions, dev};
}

inline std::vector<AduRef> refs_of(const Corpus& corpus, std::span<const std::size_t> discussions) {
  std::vector<AduRef> out;
  for (std::size_t d : discussions)
    for (std::size_t i = 0; i < corpus.discussion(d).adus.size(); ++i) out.push_back({d, i});
  return out;
}

/// Trains on the whole corpus with the usual dev carve-out.
inline TrainedModel train_full(const ExperimentConfig& config, const Resources& res) {
  std::vector<std::size_t> all(res.corpus.discussions().size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const auto [tr, dev] = carve_dev(all);
  const auto train_refs = refs_of(res.corpus, tr);
  const auto dev_refs = refs_of(res.corpus, dev);
  return train(config, res, train_refs, dev_refs);
}

inline std::string checkpoint_header(const TrainedModel& t) {
  json h;
  h["format"] = "argctx-checkpoint";
  h["config"] = to_json(t.config);
  h["seed"] = t.config.training.seed;
  h["best_epoch"] = t.best_epoch;
  json log = json::array();
  for (const auto& e : t.log) {
    log.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"dev_kappa", e.dev_kappa}, {"dev_f_score", e.dev_f_score}});
  }
  h["log"] = log;
  if (t.config.model.pipeline == Pipeline::Hybrid) {
    std::map<std::string, std::size_t> df(t.idf.df().begin(), t.idf.df().end());
    h["idf"] = {{"doc_count", t.idf.doc_count()}, {"df", df}};
  }
  return h.dump();
}

inline void save_trained(const std::string& path, const TrainedModel& t) {
  nn::save_checkpoint(path, checkpoint_header(t), t.model.params());
}

inline TrainedModel load_trained(const std::string& path) {
  auto ck = nn::load_checkpoint(path);
  json h;
  try {
    h = json::parse(ck.header);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("checkpoint header is not valid JSON: " + std::string(e.what()));
  }
  TrainedModel t;
  t.config = experiment_from_json(h.at("config"));
  t.best_epoch = h.value("best_epoch", std::size_t{0});
  for (const auto& e : h.value("log", json::array())) {
    t.log.push_back({e.at("epoch").get<std::size_t>(), e.at("train_loss").get<double>(), e.at("dev_kappa").get<double>(),
                     e.at("dev_f_score").get<double>()});
  }
  if (h.contains("idf")) {
    std::unordered_map<std::string, std::size_t> df;
    for (const auto& [k, v] : h["idf"]["df"].items()) df[k] = v.get<std::size_t>();
    t.idf = IdfTable(h["idf"]["doc_count"].get<std::size_t>(), std::move(df));
  }
  t.model = ArgumentModel(t.config.model, ck.params);
  return t;
}

struct CvOptions {
  std::size_t jobs = 1;
  /// Called with (fold, ref) whenever training for `fold` touches an ADU.
  std::function<void(std::size_t, AduRef)> on_train_access;
};

struct FoldResult {
  std::vector<AduRef> test;
  std::vector<std::size_t> predicted;
  std::size_t best_epoch = 0;
};

struct CvResult {
  MetricsReport metrics;
  std::vector<FoldResult> folds;
};

/// k-fold cross-validation. Every fold rebuilds IDF, feature scaling and the
/// model from its own training data; fold f trains with seed
/// derive_seed(seed, f), so results do not depend on `jobs`.
inline CvResult cross_validate(const ExperimentConfig& config, const Resources& res, const CvOptions& opts = {}) {
  config.validate();
  const Corpus& corpus = res.corpus;
  const std::size_t k = config.folds;
  const std::uint64_t seed = config.training.seed;

  std::vector<std::vector<AduRef>> train_sets(k), dev_sets(k), test_sets(k);
  if (config.fold_unit == FoldUnit::Discussion) {
    const FoldPlan plan = make_folds(corpus, k, seed);
    for (std::size_t f = 0; f < k; ++f) {
      std::vector<std::size_t> train_d, test_d;
      for (std::size_t d = 0; d < corpus.discussions().size(); ++d) {
        (plan.fold_of(corpus.discussion(d).id) == f ? test_d : train_d).push_back(d);
      }
      const auto [tr, dev] = carve_dev(train_d);
      train_sets[f] = refs_of(corpus, tr);
      dev_sets[f] = refs_of(corpus, dev);
      test_sets[f] = refs_of(corpus, test_d);
    }
  } else {
    const auto refs = corpus.all_refs();
    const auto fold = make_adu_folds(corpus, k, seed);
    for (std::size_t f = 0; f < k; ++f) {
      std::vector<AduRef> train_all;
      for (std::size_t i = 0; i < refs.size(); ++i) (fold[i] == f ? test_sets[f] : train_all).push_back(refs[i]);
      const std::size_t n_dev = std::max<std::size_t>(1, train_all.size() / 10);
      dev_sets[f].assign(train_all.end() - static_cast<long>(n_dev), train_all.end());
      train_all.resize(train_all.size() - n_dev);
      train_sets[f] = std::move(train_all);
    }
  }

  CvResult result;
  result.folds.resize(k);
  parallel_for(k, opts.jobs, [&](std::size_t f) {
    ExperimentConfig fc = config;
    fc.training.seed = derive_seed(seed, f);
    AccessObserver observer;
    if (opts.on_train_access) observer = [&, f](AduRef r) { opts.on_train_access(f, r); };
    const TrainedModel tm = train(fc, res, train_sets[f], dev_sets[f], observer);
    FeatureStore store(res, config.model.pipeline, &tm.idf);
    FoldResult& fr = result.folds[f];
    fr.test = test_sets[f];
    fr.predicted = predict_labels(tm.model, corpus, store, fr.test);
    fr.best_epoch = tm.best_epoch;
  });

  ConfusionMatrix pooled{};
  for (const auto& fr : result.folds) {
    const auto m = confusion(gold_labels(corpus, fr.test), fr.predicted);
    pooled += m;
    result.metrics.per_fold.push_back(FoldMetrics::from(m));
  }
  result.metrics.pooled = FoldMetrics::from(pooled);
  return result;
}

}  // namespace argctx
