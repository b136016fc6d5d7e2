#include <gtest/gtest.h>

#include <cmath>
#include <mutex>
#include <set>

#include "support.hpp"

using namespace argctx;
using testing_support::TempDir;

namespace {

ExperimentConfig quick_config(ContextSpec ctx = {}) {
  ExperimentConfig c;
  c.model = testing_support::small_model(ctx);
  c.training.epochs = 3;
  c.training.batch_size = 16;
  c.training.learning_rate = 3e-3;
  c.training.early_stop_patience = 3;
  c.training.seed = 5;
  c.folds = 3;
  return c;
}

Resources quick_resources(std::size_t discussions = 6, std::size_t adus = 20, double fidelity = 0.5) {
  SynthConfig sc;
  sc.n_discussions = discussions;
  sc.adus_per_discussion = adus;
  sc.speakers_per_discussion = 3;
  sc.vocab_size = 40;
  sc.marker_fidelity = fidelity;
  sc.local_signal_strength = 0.8;
  sc.seed = 21;
  return testing_support::synth_resources(sc);
}

}  // namespace

TEST(Config, JsonRoundTrip) {
  ExperimentConfig c = quick_config({3, LocalPosition::Next, 7});
  c.paths.corpus = "/abs/corpus.csv";
  c.training.class_weights = true;
  c.fold_unit = FoldUnit::Adu;
  EXPECT_EQ(experiment_from_json(to_json(c)), c);
}

TEST(Config, RelativePathsResolveAgainstConfigDir) {
  const json j = {{"paths", {{"corpus", "data/c.csv"}, {"vectors", "/abs/v.txt"}}}};
  const auto c = experiment_from_json(j, "/cfg/dir");
  EXPECT_EQ(c.paths.corpus, "/cfg/dir/data/c.csv");
  EXPECT_EQ(c.paths.vectors, "/abs/v.txt");
}

TEST(Config, SpeakerWidthsDoNotFollowTargetWidths) {
  const auto c = experiment_from_json(json::parse(R"({"encoder": {"filter_widths": [3, 4]}})"));
  EXPECT_EQ(c.model.target_conv.widths, (std::vector<std::size_t>{3, 4}));
  EXPECT_EQ(c.model.speaker_conv.widths, (std::vector<std::size_t>{2, 3, 4, 5}));
  EXPECT_EQ(c.model.speaker_conv.output_dim(), 200u);
}

TEST(Config, Rejections) {
  EXPECT_THROW(experiment_from_json(json{{"pipline", "hybrid"}}), ConfigError);
  EXPECT_THROW(experiment_from_json(json{{"pipeline", "gpt"}}), ConfigError);
  EXPECT_THROW(experiment_from_json(json{{"folds", 1}}), ConfigError);
  EXPECT_THROW(experiment_from_json(json{{"context", {{"local_size", 9}}}}), ConfigError);
  EXPECT_THROW(experiment_from_json(json{{"training", {{"epochs", "many"}}}}), ConfigError);
  EXPECT_THROW(experiment_from_json(json{{"fold_unit", "speaker"}}), ConfigError);
}

TEST(Training, ZeroEpochsReturnsInitialModel) {
  const auto res = quick_resources();
  auto cfg = quick_config();
  cfg.training.epochs = 0;
  const auto refs = res.corpus.all_refs();
  const auto t = train(cfg, res, refs, {});
  EXPECT_TRUE(t.log.empty());
  EXPECT_EQ(t.best_epoch, 0u);
  const ArgumentModel fresh(cfg.model, cfg.training.seed);
  for (std::size_t b = 0; b < fresh.params().size(); ++b) {
    if (fresh.params().block(b).trainable) EXPECT_EQ(t.model.params()[b], fresh.params()[b]) << fresh.params().block(b).name;
  }
}

TEST(Training, UntrainedModelIsNearChance) {
  const auto res = quick_resources(6, 40);
  auto cfg = quick_config();
  cfg.training.epochs = 0;
  const auto refs = res.corpus.all_refs();
  const auto t = train(cfg, res, refs, {});
  FeatureStore store(res, Pipeline::Hybrid, &t.idf);
  const auto m = FoldMetrics::from(confusion(gold_labels(res.corpus, refs), predict_labels(t.model, res.corpus, store, refs)));
  EXPECT_LT(std::abs(m.kappa), 0.15);
}

TEST(Training, SameSeedSameParameters) {
  const auto res = quick_resources();
  const auto cfg = quick_config({2, LocalPosition::Both, 2});
  const auto [tr, dev] = carve_dev({0, 1, 2, 3, 4, 5});
  const auto a = train(cfg, res, refs_of(res.corpus, tr), refs_of(res.corpus, dev));
  const auto b = train(cfg, res, refs_of(res.corpus, tr), refs_of(res.corpus, dev));
  EXPECT_EQ(a.model.params(), b.model.params());
  EXPECT_EQ(a.best_epoch, b.best_epoch);
}

TEST(Training, SeparableCorpusIsLearned) {
  // Every ADU carries its own label cue.
  const auto res = quick_resources(10, 40, 1.0);
  auto cfg = quick_config();
  cfg.training.epochs = 30;
  cfg.training.early_stop_patience = 30;
  const auto [tr, dev] = carve_dev({0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
  const auto t = train(cfg, res, refs_of(res.corpus, tr), refs_of(res.corpus, dev));
  ASSERT_FALSE(t.log.empty());
  EXPECT_LT(t.log.back().train_loss, 0.5 * t.log.front().train_loss);
  double best = 0.0;
  for (const auto& e : t.log) best = std::max(best, e.dev_f_score);
  EXPECT_GT(best, 0.95);
}

TEST(Training, DevCarveOut) {
  EXPECT_EQ(carve_dev({0, 1, 2, 3, 4, 5, 6, 7, 8, 9}).second, (std::vector<std::size_t>{9}));
  EXPECT_EQ(carve_dev({0, 1}).second, (std::vector<std::size_t>{1}));
  EXPECT_TRUE(carve_dev({4}).second.empty());
  const auto [tr, dev] = carve_dev(std::vector<std::size_t>(25, 0));
  EXPECT_EQ(dev.size(), 3u);
  EXPECT_EQ(tr.size(), 22u);
}

TEST(Training, CheckpointRoundTripPredictsIdentically) {
  const auto res = quick_resources();
  const auto cfg = quick_config({1, LocalPosition::Prior, 2});
  const auto t = train_full(cfg, res);
  TempDir dir("ckpt");
  save_trained(dir / "m.ckpt", t);
  const auto back = load_trained(dir / "m.ckpt");
  EXPECT_EQ(back.config, t.config);
  EXPECT_EQ(back.model.params(), t.model.params());
  EXPECT_EQ(back.best_epoch, t.best_epoch);
  EXPECT_EQ(back.idf.df(), t.idf.df());
  const auto refs = res.corpus.all_refs();
  FeatureStore s1(res, Pipeline::Hybrid, &t.idf), s2(res, Pipeline::Hybrid, &back.idf);
  EXPECT_EQ(predict_labels(t.model, res.corpus, s1, refs), predict_labels(back.model, res.corpus, s2, refs));
  // Saving again reproduces the file byte for byte.
  save_trained(dir / "again.ckpt", back);
  EXPECT_EQ(testing_support::slurp(dir / "m.ckpt"), testing_support::slurp(dir / "again.ckpt"));
}

TEST(CrossValidation, LeaveOneDiscussionOut) {
  const auto res = quick_resources(3, 15);
  auto cfg = quick_config();
  cfg.training.epochs = 1;
  const auto cv = cross_validate(cfg, res);
  ASSERT_EQ(cv.folds.size(), 3u);
  std::set<std::size_t> tested;
  std::uint64_t pooled = 0;
  for (const auto& f : cv.folds) {
    ASSERT_EQ(f.test.size(), 15u);
    tested.insert(f.test.front().discussion);
    for (const auto r : f.test) EXPECT_EQ(r.discussion, f.test.front().discussion);
  }
  EXPECT_EQ(tested.size(), 3u);
  for (const auto& row : cv.metrics.pooled.confusion)
    for (auto v : row) pooled += v;
  EXPECT_EQ(pooled, res.corpus.size());
}

TEST(CrossValidation, TrainingNeverTouchesTestAdus) {
  const auto res = quick_resources(6, 15);
  const auto cfg = quick_config({2, LocalPosition::Both, 3});
  std::mutex mu;
  std::vector<std::set<AduRef>> touched(cfg.folds);
  CvOptions opts;
  opts.jobs = 2;
  opts.on_train_access = [&](std::size_t f, AduRef r) {
    std::lock_guard<std::mutex> lock(mu);
    touched[f].insert(r);
  };
  const auto cv = cross_validate(cfg, res, opts);
  for (std::size_t f = 0; f < cfg.folds; ++f) {
    EXPECT_FALSE(touched[f].empty());
    for (const auto r : cv.folds[f].test) EXPECT_FALSE(touched[f].count(r)) << "fold " << f;
  }
}

TEST(CrossValidation, IndependentOfJobCount) {
  const auto res = quick_resources(6, 15);
  const auto cfg = quick_config({1, LocalPosition::Next, 2});
  const auto a = cross_validate(cfg, res, {1, {}});
  const auto b = cross_validate(cfg, res, {3, {}});
  for (std::size_t f = 0; f < cfg.folds; ++f) {
    EXPECT_EQ(a.folds[f].predicted, b.folds[f].predicted);
    EXPECT_EQ(a.metrics.per_fold[f].kappa, b.metrics.per_fold[f].kappa);
  }
}

TEST(CrossValidation, AduLevelFoldsCoverEveryAduOnce) {
  const auto res = quick_resources(4, 10);
  auto cfg = quick_config();
  cfg.fold_unit = FoldUnit::Adu;
  cfg.folds = 4;
  cfg.training.epochs = 1;
  const auto cv = cross_validate(cfg, res);
  std::set<AduRef> seen;
  for (const auto& f : cv.folds)
    for (const auto r : f.test) EXPECT_TRUE(seen.insert(r).second);
  EXPECT_EQ(seen.size(), res.corpus.size());
}

TEST(CrossValidation, TooManyFolds) {
  const auto res = quick_resources(3, 5);
  auto cfg = quick_config();
  cfg.folds = 4;
  EXPECT_THROW(cross_validate(cfg, res), ConfigError);
}
