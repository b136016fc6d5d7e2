#pragma once

// Shared fixtures for the unit and acceptance tests.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "argctx/argctx.hpp"

#ifndef ARGCTX_DATA_DIR
#define ARGCTX_DATA_DIR "data"
#endif

namespace testing_support {

inline std::filesystem::path data_dir() { return ARGCTX_DATA_DIR; }
inline std::string fixture_path() { return (data_dir() / "fixtures" / "lacks01.csv").string(); }
inline std::string lexicon_dir() { return (data_dir() / "lexicons").string(); }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("argctx_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline argctx::Corpus corpus_from_csv(const std::string& text) {
  std::istringstream in(text);
  return argctx::parse_corpus_csv(in, "<test>");
}

inline argctx::Corpus fixture_corpus() { return argctx::parse_corpus(fixture_path()); }

/// In-memory resources over a synthetic corpus.
inline argctx::Resources synth_resources(const argctx::SynthConfig& cfg) {
  argctx::Resources r;
  r.corpus = argctx::generate(cfg);
  r.lexicons = argctx::load_lexicons(lexicon_dir());
  r.vectors = argctx::synth_vector_table(cfg);
  return r;
}

/// Small model configuration that keeps finite-difference checks fast.
inline argctx::ModelConfig small_model(argctx::ContextSpec ctx) {
  argctx::ModelConfig m;
  m.context = ctx;
  m.target_conv = {{2, 3, 4, 5}, 3};
  m.speaker_conv = {{2, 3}, 2};
  m.lstm_hidden = 4;
  return m;
}

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_block;
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;
  std::vector<std::string> blocks_checked;
};

/// |a - n| / max(|a|, |n|, floor). The floor keeps coordinates whose true
/// gradient is essentially zero from dividing rounding noise by ~0.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Central differences against loss_and_gradients for up to
/// `per_block` coordinates of every trainable block. Coordinates whose
/// perturbation changes any conv max-pool winner or ReLU state are skipped,
/// since the loss is not differentiable there.
inline GradCheckResult gradient_check(argctx::ArgumentModel& model, const argctx::Batch& batch, std::uint64_t seed,
                                      std::size_t per_block = 40, double eps = 1e-4) {
  using argctx::nn::ParameterSet;
  GradCheckResult res;
  ParameterSet grads = model.params().zeros_like();
  model.loss_and_gradients(batch, grads);
  const bool hybrid = model.config().pipeline == argctx::Pipeline::Hybrid;
  const bool speaker = model.config().context.speaker_size > 0;

  auto patterns = [&] {
    std::vector<std::vector<std::vector<Eigen::Index>>> out;
    if (!hybrid) return out;
    for (const auto* f : batch.adus) {
      out.push_back(model.target_conv().activation_pattern(f->tokens, model.params()));
      if (speaker) out.push_back(model.speaker_conv().activation_pattern(f->tokens, model.params()));
    }
    return out;
  };
  const auto base_pattern = patterns();
  auto loss = [&] {
    ParameterSet scratch = model.params().zeros_like();
    return model.loss_and_gradients(batch, scratch);
  };

  argctx::Rng rng(seed);
  for (std::size_t b = 0; b < model.params().size(); ++b) {
    if (!model.params().block(b).trainable) continue;
    auto& value = model.params()[b];
    const auto n = static_cast<std::size_t>(value.size());
    std::vector<std::size_t> coords;
    if (n <= per_block) {
      for (std::size_t i = 0; i < n; ++i) coords.push_back(i);
    } else {
      for (std::size_t i = 0; i < per_block; ++i) coords.push_back(rng.below(n));
    }
    std::size_t used = 0;
    for (std::size_t c : coords) {
      double& x = value.data()[c];
      const double orig = x;
      x = orig + eps;
      const double up = loss();
      const bool kink_up = patterns() != base_pattern;
      x = orig - eps;
      const double down = loss();
      const bool kink_down = patterns() != base_pattern;
      x = orig;
      if (kink_up || kink_down) {
        ++res.skipped_kinks;
        continue;
      }
      const double numeric = (up - down) / (2.0 * eps);
      const double err = relative_error(grads[b].data()[c], numeric);
      if (err > res.max_rel_error) {
        res.max_rel_error = err;
        res.worst_block = model.params().block(b).name;
      }
      ++res.checked;
      ++used;
    }
    if (used) res.blocks_checked.push_back(model.params().block(b).name);
  }
  return res;
}

/// Model and batch over a synthetic corpus, with feature scaling fit on the
/// batch ADUs so that activations stay in a moderate range.
struct GradFixture {
  argctx::Resources res;
  argctx::IdfTable idf;
  std::unique_ptr<argctx::FeatureStore> store;
  argctx::ArgumentModel model;
  argctx::Batch batch;
};

inline std::unique_ptr<GradFixture> grad_fixture(const argctx::ModelConfig& mc, std::uint64_t seed,
                                                 std::size_t n_targets = 4) {
  auto fx = std::make_unique<GradFixture>();
  argctx::SynthConfig sc;
  sc.n_discussions = 2;
  sc.adus_per_discussion = 24;
  sc.speakers_per_discussion = 3;
  sc.vocab_size = 30;
  sc.min_tokens = 3;
  sc.max_tokens = 8;
  sc.seed = seed;
  fx->res = synth_resources(sc);
  fx->idf = argctx::compute_idf(fx->res.corpus);
  fx->store = std::make_unique<argctx::FeatureStore>(fx->res, mc.pipeline, &fx->idf);
  fx->model = argctx::ArgumentModel(mc, seed);
  const auto refs = fx->res.corpus.all_refs();
  auto [mean, scale] = argctx::feature_scaling(*fx->store, refs);
  fx->model.set_feature_scaling(mean, scale);
  // Targets spread over the discussion so that boundary and interior
  // windows both occur.
  argctx::Rng rng(argctx::derive_seed(seed, 99));
  std::vector<argctx::AduRef> targets = {{0, 0}, {1, 23}};
  while (targets.size() < n_targets) targets.push_back(refs[rng.below(refs.size())]);
  fx->batch = argctx::make_batch(fx->res.corpus, mc.context, targets, *fx->store, true);
  // Unequal weights exercise the weighted loss path.
  for (std::size_t i = 0; i < targets.size(); ++i) fx->batch.weights.push_back(0.5 + 0.25 * static_cast<double>(i));
  return fx;
}

}  // namespace testing_support
