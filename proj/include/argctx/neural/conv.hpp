#pragma once

// Convolutional ADU encoder: per filter width, a bank of filters slides over
// the token sequence, ReLU, then 1-max pooling over positions.

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "argctx/neural/params.hpp"

namespace argctx::nn {

struct ConvConfig {
  std::vector<std::size_t> widths = {2, 3, 4, 5};
  std::size_t filters_per_width = 600;

  std::size_t output_dim() const { return widths.size() * filters_per_width; }
  std::size_t max_width() const { return widths.empty() ? 0 : *std::max_element(widths.begin(), widths.end()); }

  void validate() const {
    if (widths.empty() || filters_per_width == 0) throw ConfigError("conv encoder needs widths and filters");
    for (auto w : widths)
      if (w == 0) throw ConfigError("conv filter widths must be positive");
  }

  bool operator==(const ConvConfig&) const = default;
};

/// Tokens shorter than the widest filter are zero-padded at the end.
inline RowMatrix pad_tokens(const RowMatrix& tokens, std::size_t min_rows) {
  if (static_cast<std::size_t>(tokens.rows()) >= min_rows) return tokens;
  RowMatrix out = RowMatrix::Zero(static_cast<Eigen::Index>(min_rows), tokens.cols());
  out.topRows(tokens.rows()) = tokens;
  return out;
}

class ConvEncoder {
 public:
  struct Cache {
    RowMatrix tokens;
    /// Per width, per filter: winning position, or -1 when the pooled value is 0.
    std::vector<std::vector<Eigen::Index>> argmax;
  };

  ConvEncoder() = default;

  /// Registers `<prefix>.w<width>` (filters x width*input_dim) and `<prefix>.b<width>`.
  ConvEncoder(ParameterSet& params, const std::string& prefix, ConvConfig config, std::size_t input_dim)
      : config_(std::move(config)), input_dim_(input_dim) {
    config_.validate();
    const auto f = static_cast<Eigen::Index>(config_.filters_per_width);
    for (auto w : config_.widths) {
      weights_.push_back(params.add(prefix + ".w" + std::to_string(w), f, static_cast<Eigen::Index>(w * input_dim)));
      biases_.push_back(params.add(prefix + ".b" + std::to_string(w), f, 1));
    }
  }

  const ConvConfig& config() const noexcept { return config_; }
  std::size_t input_dim() const noexcept { return input_dim_; }
  std::size_t output_dim() const noexcept { return config_.output_dim(); }

  void initialize(ParameterSet& params, Rng& rng) const {
    for (auto i : weights_) glorot_uniform(params[i], rng);
    for (auto i : biases_) params[i].setZero();
  }

  Vector forward(const RowMatrix& raw_tokens, const ParameterSet& params, Cache* cache = nullptr) const {
    if (raw_tokens.rows() == 0) throw DataError("conv_encode: empty token sequence");
    if (static_cast<std::size_t>(raw_tokens.cols()) != input_dim_) {
      throw DataError("conv_encode: token dimension " + std::to_string(raw_tokens.cols()) + ", expected " +
                      std::to_string(input_dim_));
    }
    RowMatrix local;
    const RowMatrix* tokens = &raw_tokens;
    if (static_cast<std::size_t>(raw_tokens.rows()) < config_.max_width()) {
      local = pad_tokens(raw_tokens, config_.max_width());
      tokens = &local;
    }
    const auto f = static_cast<Eigen::Index>(config_.filters_per_width);
    const auto in = static_cast<Eigen::Index>(input_dim_);
    Vector out(static_cast<Eigen::Index>(output_dim()));
    if (cache) {
      cache->tokens = *tokens;
      cache->argmax.assign(config_.widths.size(), {});
    }
    for (std::size_t wi = 0; wi < config_.widths.size(); ++wi) {
      const auto w = static_cast<Eigen::Index>(config_.widths[wi]);
      const Eigen::Index positions = tokens->rows() - w + 1;
      // Column p of `patches` is the row-major window starting at token p.
      Eigen::Map<const Matrix, 0, Eigen::OuterStride<>> patches(tokens->data(), w * in, positions,
                                                                  Eigen::OuterStride<>(in));
      const Matrix z = (params[weights_[wi]] * patches).colwise() + params[biases_[wi]].col(0);
      std::vector<Eigen::Index> winners(static_cast<std::size_t>(f), -1);
      for (Eigen::Index k = 0; k < f; ++k) {
        Eigen::Index best = 0;
        for (Eigen::Index p = 1; p < positions; ++p)
          if (z(k, p) > z(k, best)) best = p;
        const double v = z(k, best);
        out[static_cast<Eigen::Index>(wi) * f + k] = v > 0.0 ? v : 0.0;
        winners[static_cast<std::size_t>(k)] = v > 0.0 ? best : -1;
      }
      if (cache) cache->argmax[wi] = std::move(winners);
    }
    return out;
  }

  /// Accumulates parameter gradients for upstream gradient `dout`.
  void backward(const Cache& cache, const Vector& dout, ParameterSet& grads) const {
    const auto f = static_cast<Eigen::Index>(config_.filters_per_width);
    const auto in = static_cast<Eigen::Index>(input_dim_);
    for (std::size_t wi = 0; wi < config_.widths.size(); ++wi) {
      const auto w = static_cast<Eigen::Index>(config_.widths[wi]);
      Matrix& dw = grads[weights_[wi]];
      Matrix& db = grads[biases_[wi]];
      for (Eigen::Index k = 0; k < f; ++k) {
        const Eigen::Index p = cache.argmax[wi][static_cast<std::size_t>(k)];
        const double g = dout[static_cast<Eigen::Index>(wi) * f + k];
        if (p < 0 || g == 0.0) continue;
        Eigen::Map<const Eigen::RowVectorXd> patch(cache.tokens.data() + p * in, w * in);
        dw.row(k) += g * patch;
        db(k, 0) += g;
      }
    }
  }

  /// Winning positions only; used to detect kinks in finite-difference checks.
  std::vector<std::vector<Eigen::Index>> activation_pattern(const RowMatrix& tokens, const ParameterSet& params) const {
    Cache c;
    forward(tokens, params, &c);
    return c.argmax;
  }

 private:
  ConvConfig config_;
  std::size_t input_dim_ = 0;
  std::vector<std::size_t> weights_, biases_;
};

/// Stateless form: encodes `tokens` with the blocks registered under `prefix`.
inline Vector conv_encode(const RowMatrix& tokens, const ParameterSet& params, const ConvEncoder& encoder) {
  return encoder.forward(tokens, params);
}

}  // namespace argctx::nn
