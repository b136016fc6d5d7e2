#pragma once

// The argument component classifier: per-ADU encoder (hybrid or pooled
// embedding), optional local and speaker context aggregators, softmax output.
//
// Classifier input layout:
//   flat local context:  [prior slots, target, next slots, slot flags, speaker block]
//   local attention:     [target, attended local context, speaker block]
// The speaker block is the LSTM summary (100) or the attended speaker vector.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "argctx/context.hpp"
#include "argctx/features.hpp"
#include "argctx/neural/attention.hpp"
#include "argctx/neural/classifier.hpp"
#include "argctx/neural/conv.hpp"
#include "argctx/neural/lstm.hpp"
#include "argctx/neural/params.hpp"

namespace argctx {

enum class Pipeline { Hybrid, PooledEmbedding };

inline std::string_view to_string(Pipeline p) { return p == Pipeline::Hybrid ? "hybrid" : "pooled_embedding"; }

inline Pipeline parse_pipeline(std::string_view s) {
  if (s == "hybrid") return Pipeline::Hybrid;
  if (s == "pooled_embedding" || s == "pooled" || s == "bert") return Pipeline::PooledEmbedding;
  throw ConfigError("unknown pipeline '" + std::string(s) + "' (expected hybrid|pooled_embedding)");
}

inline constexpr std::size_t kPooledEmbeddingDim = 768;

struct ModelConfig {
  Pipeline pipeline = Pipeline::Hybrid;
  ContextSpec context;
  nn::ConvConfig target_conv{{2, 3, 4, 5}, 600};
  nn::ConvConfig speaker_conv{{2, 3, 4, 5}, 50};
  std::size_t word_dim = kWordVectorDim;
  std::size_t embedding_dim = kPooledEmbeddingDim;
  std::size_t lstm_hidden = nn::kLstmHidden;

  /// Per-ADU vector for targets and local context.
  std::size_t adu_dim() const {
    return pipeline == Pipeline::Hybrid ? kHandcraftedDim + target_conv.output_dim() : embedding_dim;
  }

  /// Per-ADU vector for speaker context items.
  std::size_t speaker_item_dim() const {
    return pipeline == Pipeline::Hybrid ? speaker_conv.output_dim() : embedding_dim;
  }

  std::size_t local_block_dim() const {
    if (context.local_size == 0) return 0;
    if (context.local_attention) return adu_dim();
    return context.local_size * adu_dim() + context.local_size;
  }

  std::size_t speaker_block_dim() const {
    if (context.speaker_size == 0) return 0;
    return context.speaker_attention ? speaker_item_dim() : lstm_hidden;
  }

  std::size_t classifier_input_dim() const { return adu_dim() + local_block_dim() + speaker_block_dim(); }

  void validate() const {
    context.validate();
    if (pipeline == Pipeline::Hybrid) {
      target_conv.validate();
      if (context.speaker_size > 0) speaker_conv.validate();
      if (word_dim != kWordVectorDim) throw ConfigError("hybrid pipeline needs 100-dim word vectors");
    } else if (embedding_dim == 0) {
      throw ConfigError("embedding_dim must be positive");
    }
    if (lstm_hidden == 0) throw ConfigError("lstm_hidden must be positive");
  }

  bool operator==(const ModelConfig&) const = default;
};

/// Encoder inputs for one ADU; which members are filled depends on the pipeline.
struct AduFeatures {
  nn::Vector handcrafted;  // raw, unstandardized
  nn::RowMatrix tokens;    // one row per token
  nn::Vector pooled;
};

/// Context slots of one example, as indices into Batch::adus.
struct ExampleSlots {
  std::size_t target = 0;
  std::vector<std::optional<std::size_t>> local;
  std::size_t n_prior = 0;
  std::vector<std::size_t> speaker;
};

struct Batch {
  std::vector<const AduFeatures*> adus;
  std::vector<ExampleSlots> examples;
  std::vector<std::size_t> labels;
  /// Per-example loss weights; empty means 1.
  std::vector<double> weights;
};

class ArgumentModel {
 public:
  ArgumentModel() = default;

  ArgumentModel(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
    config_.validate();
    register_blocks();
    initialize(seed);
  }

  /// Wraps an existing parameter set (e.g. from a checkpoint); the layout
  /// must match what `config` registers.
  ArgumentModel(ModelConfig config, const nn::ParameterSet& params) : config_(std::move(config)) {
    config_.validate();
    register_blocks();
    if (!params_.same_layout(params)) throw DataError("checkpoint parameter layout does not match the model config");
    params_ = params;
  }

  const ModelConfig& config() const noexcept { return config_; }
  nn::ParameterSet& params() noexcept { return params_; }
  const nn::ParameterSet& params() const noexcept { return params_; }

  /// Sets the non-trainable standardization of the handcrafted block.
  void set_feature_scaling(const nn::Vector& mean, const nn::Vector& scale) {
    if (config_.pipeline != Pipeline::Hybrid) return;
    params_[feat_mean_].col(0) = mean;
    params_[feat_scale_].col(0) = scale;
  }

  const nn::ConvEncoder& target_conv() const { return target_conv_; }
  const nn::ConvEncoder& speaker_conv() const { return speaker_conv_; }
  const nn::Lstm& speaker_lstm() const { return lstm_; }

  nn::Vector encode(const AduFeatures& f, nn::ConvEncoder::Cache* cache = nullptr) const {
    if (config_.pipeline == Pipeline::PooledEmbedding) {
      if (static_cast<std::size_t>(f.pooled.size()) != config_.embedding_dim) {
        throw DataError("pooled embedding has " + std::to_string(f.pooled.size()) + " dims, expected " +
                        std::to_string(config_.embedding_dim));
      }
      return f.pooled;
    }
    if (static_cast<std::size_t>(f.handcrafted.size()) != kHandcraftedDim) {
      throw DataError("handcrafted block must have 114 entries");
    }
    nn::Vector out(static_cast<Eigen::Index>(config_.adu_dim()));
    const auto h = static_cast<Eigen::Index>(kHandcraftedDim);
    out.head(h) = ((f.handcrafted - params_[feat_mean_].col(0)).array() / params_[feat_scale_].col(0).array()).matrix();
    out.tail(out.size() - h) = target_conv_.forward(f.tokens, params_, cache);
    return out;
  }

  nn::Vector encode_speaker(const AduFeatures& f, nn::ConvEncoder::Cache* cache = nullptr) const {
    if (config_.pipeline == Pipeline::PooledEmbedding) return encode(f);
    return speaker_conv_.forward(f.tokens, params_, cache);
  }

  struct HeadCache {
    nn::Vector x;
    bool local_attended = false;
    nn::AttentionCache local_attention;
    nn::Lstm::Cache lstm;
    bool speaker_attended = false;
    nn::AttentionCache speaker_attention;
  };

  /// Classifier input for an assembled example.
  nn::Vector head_input(const AssembledInput& in, HeadCache* cache = nullptr) const {
    const auto D = static_cast<Eigen::Index>(config_.adu_dim());
    const ContextSpec& spec = config_.context;
    nn::Vector x = nn::Vector::Zero(static_cast<Eigen::Index>(config_.classifier_input_dim()));
    Eigen::Index at = 0;
    if (spec.local_size > 0 && !spec.local_attention) {
      const nn::Vector flat = in.flat();
      x.head(flat.size()) = flat;
      at = flat.size();
      for (std::size_t i = 0; i < in.local_mask.size(); ++i) x[at + static_cast<Eigen::Index>(i)] = in.local_mask[i] ? 1.0 : 0.0;
      at += static_cast<Eigen::Index>(in.local_mask.size());
    } else {
      x.head(D) = in.target;
      at = D;
      if (spec.local_size > 0) {
        const bool any = std::find(in.local_mask.begin(), in.local_mask.end(), true) != in.local_mask.end();
        if (any) {
          nn::AttentionCache c;
          x.segment(at, D) = nn::attention_aggregate(in.target, in.local, in.local_mask, params_[local_att_], &c);
          if (cache) {
            cache->local_attended = true;
            cache->local_attention = std::move(c);
          }
        }
        at += D;
      }
    }
    if (spec.speaker_size > 0) {
      const auto S = static_cast<Eigen::Index>(config_.speaker_block_dim());
      if (spec.speaker_attention) {
        if (in.speaker.empty()) {
          x.segment(at, S) = params_[speaker_att_empty_].col(0);
        } else {
          nn::AttentionCache c;
          const std::vector<bool> mask(in.speaker.size(), true);
          x.segment(at, S) = nn::attention_aggregate(in.target, in.speaker, mask, params_[speaker_att_], &c);
          if (cache) {
            cache->speaker_attended = true;
            cache->speaker_attention = std::move(c);
          }
        }
      } else {
        x.segment(at, S) = lstm_.forward(in.speaker, params_, cache ? &cache->lstm : nullptr);
      }
    }
    if (cache) cache->x = x;
    return x;
  }

  nn::Vector predict(const AssembledInput& in) const {
    return nn::classify(head_input(in), params_[cls_w_], params_[cls_b_]);
  }

  /// Loss of one example and gradients with respect to the parameters
  /// (accumulated into `grads`) and the assembled input (written to `dinput`).
  double head_loss_and_gradients(const AssembledInput& in, std::size_t gold, double weight, nn::ParameterSet& grads,
                                 AssembledInput& dinput) const {
    HeadCache cache;
    head_input(in, &cache);
    nn::Vector dx;
    const double loss = nn::softmax_xent_backward(cache.x, params_[cls_w_], params_[cls_b_], gold, weight,
                                                  grads[cls_w_], grads[cls_b_], dx);
    const auto D = static_cast<Eigen::Index>(config_.adu_dim());
    const ContextSpec& spec = config_.context;
    dinput.n_prior = in.n_prior;
    dinput.local_mask = in.local_mask;
    dinput.local.assign(in.local.size(), nn::Vector::Zero(D));
    dinput.speaker.assign(in.speaker.size(), nn::Vector());
    Eigen::Index at = 0;
    if (spec.local_size > 0 && !spec.local_attention) {
      for (std::size_t i = 0; i < in.n_prior; ++i, at += D) dinput.local[i] = dx.segment(at, D);
      dinput.target = dx.segment(at, D);
      at += D;
      for (std::size_t i = in.n_prior; i < in.local.size(); ++i, at += D) dinput.local[i] = dx.segment(at, D);
      at += static_cast<Eigen::Index>(in.local.size());
    } else {
      dinput.target = dx.head(D);
      at = D;
      if (spec.local_size > 0) {
        if (cache.local_attended) {
          nn::attention_backward(in.target, in.local, in.local_mask, params_[local_att_], cache.local_attention,
                                 dx.segment(at, D), grads[local_att_], dinput.target, dinput.local);
        }
        at += D;
      }
    }
    if (spec.speaker_size > 0) {
      const auto S = static_cast<Eigen::Index>(config_.speaker_block_dim());
      const nn::Vector ds = dx.segment(at, S);
      if (spec.speaker_attention) {
        if (cache.speaker_attended) {
          const std::vector<bool> mask(in.speaker.size(), true);
          nn::attention_backward(in.target, in.speaker, mask, params_[speaker_att_], cache.speaker_attention, ds,
                                 grads[speaker_att_], dinput.target, dinput.speaker);
        } else {
          grads[speaker_att_empty_].col(0) += ds;
        }
      } else {
        lstm_.backward(cache.lstm, ds, params_, grads, &dinput.speaker);
      }
    }
    return loss;
  }

  /// Mean (weighted) cross-entropy over the batch. Gradients of the mean are
  /// accumulated into `grads`, which must share the parameter layout.
  double loss_and_gradients(const Batch& batch, nn::ParameterSet& grads) const {
    if (batch.examples.empty()) throw DataError("loss_and_gradients: empty batch");
    const std::size_t n = batch.examples.size();
    Encoded enc = encode_batch(batch, true);
    std::map<std::size_t, nn::Vector> d_target, d_speaker;
    double total = 0.0;
    AssembledInput din;
    for (std::size_t e = 0; e < n; ++e) {
      const ExampleSlots& ex = batch.examples[e];
      const AssembledInput in = assemble(enc, ex);
      const double w = (batch.weights.empty() ? 1.0 : batch.weights[e]) / static_cast<double>(n);
      total += head_loss_and_gradients(in, batch.labels[e], w, grads, din);
      accumulate(d_target, ex.target, din.target);
      for (std::size_t i = 0; i < ex.local.size(); ++i)
        if (ex.local[i]) accumulate(d_target, *ex.local[i], din.local[i]);
      for (std::size_t i = 0; i < ex.speaker.size(); ++i) accumulate(d_speaker, ex.speaker[i], din.speaker[i]);
    }
    if (config_.pipeline == Pipeline::Hybrid) {
      const auto h = static_cast<Eigen::Index>(kHandcraftedDim);
      for (const auto& [a, g] : d_target) target_conv_.backward(enc.target_cache.at(a), g.tail(g.size() - h), grads);
      for (const auto& [a, g] : d_speaker) speaker_conv_.backward(enc.speaker_cache.at(a), g, grads);
    }
    if (!std::isfinite(total)) throw NumericalError("non-finite loss");
    if (auto bad = grads.first_non_finite()) throw NumericalError("non-finite gradient in parameter block '" + *bad + "'");
    return total;
  }

  /// Class probabilities per example.
  std::vector<nn::Vector> predict(const Batch& batch) const {
    Encoded enc = encode_batch(batch, false);
    std::vector<nn::Vector> out;
    out.reserve(batch.examples.size());
    for (const auto& ex : batch.examples) out.push_back(predict(assemble(enc, ex)));
    return out;
  }

 private:
  struct Encoded {
    std::map<std::size_t, nn::Vector> target, speaker;
    std::map<std::size_t, nn::ConvEncoder::Cache> target_cache, speaker_cache;
  };

  static void accumulate(std::map<std::size_t, nn::Vector>& acc, std::size_t key, const nn::Vector& g) {
    if (g.size() == 0) return;
    auto [it, inserted] = acc.try_emplace(key, g);
    if (!inserted) it->second += g;
  }

  Encoded encode_batch(const Batch& batch, bool keep_caches) const {
    Encoded enc;
    auto encode_target = [&](std::size_t a) {
      if (enc.target.count(a)) return;
      nn::ConvEncoder::Cache* c = keep_caches ? &enc.target_cache[a] : nullptr;
      enc.target.emplace(a, encode(*batch.adus.at(a), c));
    };
    for (const auto& ex : batch.examples) {
      encode_target(ex.target);
      for (const auto& slot : ex.local)
        if (slot) encode_target(*slot);
      for (std::size_t a : ex.speaker) {
        if (enc.speaker.count(a)) continue;
        nn::ConvEncoder::Cache* c = keep_caches ? &enc.speaker_cache[a] : nullptr;
        enc.speaker.emplace(a, encode_speaker(*batch.adus.at(a), c));
      }
    }
    return enc;
  }

  AssembledInput assemble(const Encoded& enc, const ExampleSlots& ex) const {
    AssembledInput in;
    in.target = enc.target.at(ex.target);
    in.n_prior = ex.n_prior;
    const auto D = static_cast<Eigen::Index>(config_.adu_dim());
    for (const auto& slot : ex.local) {
      in.local.push_back(slot ? enc.target.at(*slot) : nn::Vector::Zero(D));
      in.local_mask.push_back(slot.has_value());
    }
    for (std::size_t a : ex.speaker) in.speaker.push_back(enc.speaker.at(a));
    return in;
  }

  void register_blocks() {
    const ContextSpec& spec = config_.context;
    const auto D = static_cast<Eigen::Index>(config_.adu_dim());
    if (config_.pipeline == Pipeline::Hybrid) {
      const auto h = static_cast<Eigen::Index>(kHandcraftedDim);
      feat_mean_ = params_.add("features.mean", h, 1, false);
      feat_scale_ = params_.add("features.scale", h, 1, false);
      target_conv_ = nn::ConvEncoder(params_, "target_conv", config_.target_conv, config_.word_dim);
      if (spec.speaker_size > 0) {
        speaker_conv_ = nn::ConvEncoder(params_, "speaker_conv", config_.speaker_conv, config_.word_dim);
      }
    }
    if (spec.local_size > 0 && spec.local_attention) local_att_ = params_.add("local_attention.W", D, D);
    if (spec.speaker_size > 0) {
      const auto S = static_cast<Eigen::Index>(config_.speaker_item_dim());
      if (spec.speaker_attention) {
        speaker_att_ = params_.add("speaker_attention.W", D, S);
        speaker_att_empty_ = params_.add("speaker_attention.empty", S, 1);
      } else {
        lstm_ = nn::Lstm(params_, "speaker_lstm", config_.speaker_item_dim(), config_.lstm_hidden);
      }
    }
    cls_w_ = params_.add("classifier.W", static_cast<Eigen::Index>(config_.classifier_input_dim()),
                         static_cast<Eigen::Index>(nn::kNumClasses));
    cls_b_ = params_.add("classifier.b", static_cast<Eigen::Index>(nn::kNumClasses), 1);
  }

  /// Glorot-uniform weights, zero biases, identity feature scaling.
  void initialize(std::uint64_t seed) {
    Rng rng(derive_seed(seed, 0x1417));
    const ContextSpec& spec = config_.context;
    if (config_.pipeline == Pipeline::Hybrid) {
      params_[feat_scale_].setOnes();
      target_conv_.initialize(params_, rng);
      if (spec.speaker_size > 0) speaker_conv_.initialize(params_, rng);
    }
    if (spec.local_size > 0 && spec.local_attention) nn::glorot_uniform(params_[local_att_], rng);
    if (spec.speaker_size > 0) {
      if (spec.speaker_attention) {
        nn::glorot_uniform(params_[speaker_att_], rng);
      } else {
        lstm_.initialize(params_, rng);
      }
    }
    nn::glorot_uniform(params_[cls_w_], rng);
  }

  ModelConfig config_;
  nn::ParameterSet params_;
  nn::ConvEncoder target_conv_, speaker_conv_;
  nn::Lstm lstm_;
  std::size_t feat_mean_ = 0, feat_scale_ = 0, local_att_ = 0, speaker_att_ = 0, speaker_att_empty_ = 0, cls_w_ = 0,
              cls_b_ = 0;
};

}  // namespace argctx
