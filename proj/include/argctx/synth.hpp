#pragma once

// Synthetic multi-party discussions with tunable dependence of labels on the
// previous ADU (local signal) and on the speaker (speaker signal). An ADU
// carries a cue token for its label only with probability `marker_fidelity`.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "argctx/corpus.hpp"
#include "argctx/embeddings.hpp"
#include "argctx/error.hpp"
#include "argctx/rng.hpp"

namespace argctx {

struct SynthConfig {
  std::size_t n_discussions = 20;
  std::size_t speakers_per_discussion = 6;
  std::size_t adus_per_discussion = 150;
  std::size_t vocab_size = 200;
  std::array<double, kNumLabels> base_label_distribution = {0.653, 0.243, 0.104};
  double local_signal_strength = 0.0;
  double speaker_signal_strength = 0.0;
  std::uint64_t seed = 1;
  /// Probability that an ADU carries a cue token for its label. ADUs without
  /// one are pure filler, which caps what a context-free model can recover.
  double marker_fidelity = 0.5;
  std::size_t min_tokens = 6;
  std::size_t max_tokens = 12;
  std::size_t vector_dim = 100;

  void validate() const {
    if (n_discussions == 0 || speakers_per_discussion == 0 || adus_per_discussion == 0 || vocab_size == 0) {
      throw ConfigError("synth sizes must be positive");
    }
    double sum = 0.0;
    for (double p : base_label_distribution) {
      if (!(p >= 0.0)) throw ConfigError("label probabilities must be non-negative");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("base_label_distribution must sum to 1");
    for (double s : {local_signal_strength, speaker_signal_strength, marker_fidelity}) {
      if (!(s >= 0.0 && s <= 1.0)) throw ConfigError("signal strengths and marker_fidelity must lie in [0, 1]");
    }
    if (min_tokens == 0 || max_tokens < min_tokens) throw ConfigError("need 0 < min_tokens <= max_tokens");
    if (vector_dim == 0) throw ConfigError("vector_dim must be positive");
  }
};

inline SynthConfig synth_from_json(const nlohmann::json& j) {
  SynthConfig c;
  try {
    c.n_discussions = j.value("n_discussions", c.n_discussions);
    c.speakers_per_discussion = j.value("speakers_per_discussion", c.speakers_per_discussion);
    c.adus_per_discussion = j.value("adus_per_discussion", c.adus_per_discussion);
    c.vocab_size = j.value("vocab_size", c.vocab_size);
    if (j.contains("base_label_distribution")) {
      const auto v = j["base_label_distribution"].get<std::vector<double>>();
      if (v.size() != kNumLabels) throw ConfigError("base_label_distribution needs 3 entries");
      for (std::size_t i = 0; i < kNumLabels; ++i) c.base_label_distribution[i] = v[i];
    }
    c.local_signal_strength = j.value("local_signal_strength", c.local_signal_strength);
    c.speaker_signal_strength = j.value("speaker_signal_strength", c.speaker_signal_strength);
    c.seed = j.value("seed", c.seed);
    c.marker_fidelity = j.value("marker_fidelity", c.marker_fidelity);
    c.min_tokens = j.value("min_tokens", c.min_tokens);
    c.max_tokens = j.value("max_tokens", c.max_tokens);
    c.vector_dim = j.value("vector_dim", c.vector_dim);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid synth config: ") + e.what());
  }
  c.validate();
  return c;
}

/// claim -> evidence -> warrant -> claim.
inline Label next_in_chain(Label l) { return static_cast<Label>((index_of(l) + 1) % kNumLabels); }

inline constexpr std::size_t kCuesPerLabel = 3;

inline std::string cue_token(Label l, std::size_t variant) {
  return "cue" + std::string(to_string(l)) + std::to_string(variant);
}

inline std::string filler_token(std::size_t i) { return "w" + std::to_string(i); }

inline Corpus generate(const SynthConfig& cfg) {
  cfg.validate();
  std::vector<Discussion> discussions;
  const std::span<const double> base(cfg.base_label_distribution);
  for (std::size_t d = 0; d < cfg.n_discussions; ++d) {
    Rng rng(derive_seed(cfg.seed, d));
    Discussion disc;
    disc.id = "synth" + std::to_string(d);
    // Skewed participation: a few speakers dominate.
    std::vector<double> activity(cfg.speakers_per_discussion);
    std::vector<Label> bias(cfg.speakers_per_discussion);
    for (std::size_t s = 0; s < cfg.speakers_per_discussion; ++s) {
      const double u = rng.uniform();
      activity[s] = 0.05 + u * u;
      bias[s] = static_cast<Label>(rng.categorical(base));
    }
    std::optional<Label> prev;
    for (std::size_t t = 0; t < cfg.adus_per_discussion; ++t) {
      const std::size_t speaker = rng.categorical(activity);
      Label label;
      if (prev && rng.uniform() < cfg.local_signal_strength) {
        label = next_in_chain(*prev);
      } else if (rng.uniform() < cfg.speaker_signal_strength) {
        label = bias[speaker];
      } else {
        label = static_cast<Label>(rng.categorical(base));
      }
      const bool marked = rng.uniform() < cfg.marker_fidelity;
      const std::size_t n = cfg.min_tokens + rng.below(cfg.max_tokens - cfg.min_tokens + 1);
      const std::size_t cue_at = marked ? rng.below(n) : n;
      std::string text;
      for (std::size_t i = 0; i < n; ++i) {
        if (i) text += ' ';
        text += i == cue_at ? cue_token(label, rng.below(kCuesPerLabel)) : filler_token(rng.below(cfg.vocab_size));
      }
      text += " .";
      disc.adus.push_back({disc.id, t, "s" + std::to_string(speaker + 1), std::move(text), label});
      prev = label;
    }
    discussions.push_back(std::move(disc));
  }
  return Corpus(std::move(discussions));
}

/// Random unit-variance-per-vector embeddings for every synthetic token.
inline std::vector<std::pair<std::string, Eigen::VectorXd>> synth_word_vectors(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(derive_seed(cfg.seed, 0x5EC7));
  std::vector<std::string> tokens;
  for (std::size_t i = 0; i < cfg.vocab_size; ++i) tokens.push_back(filler_token(i));
  for (Label l : kAllLabels)
    for (std::size_t v = 0; v < kCuesPerLabel; ++v) tokens.push_back(cue_token(l, v));
  tokens.push_back(".");
  std::vector<std::pair<std::string, Eigen::VectorXd>> rows;
  const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.vector_dim));
  for (auto& t : tokens) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(cfg.vector_dim));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.normal() * scale;
    rows.emplace_back(std::move(t), std::move(v));
  }
  return rows;
}

inline WordVectorTable synth_vector_table(const SynthConfig& cfg) {
  WordVectorTable table(cfg.vector_dim);
  for (auto& [t, v] : synth_word_vectors(cfg)) table.insert(t, v);
  return table;
}

}  // namespace argctx
