#pragma once

// Bilinear ("general") attention pooling: score_i = q^T W k_i, masked keys
// get -inf, output is the softmax-weighted sum of the keys.

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "argctx/neural/params.hpp"

namespace argctx::nn {

struct AttentionCache {
  Vector u;        // W^T q
  Vector weights;  // softmax over keys, exactly 0 on masked slots
};

inline void check_attention_shapes(const Vector& q, const std::vector<Vector>& keys, const std::vector<bool>& mask,
                                   const Matrix& W) {
  if (keys.size() != mask.size()) throw DataError("attention: mask length differs from key count");
  if (W.rows() != q.size()) throw DataError("attention: query dimension does not match W");
  for (const auto& k : keys)
    if (k.size() != W.cols()) throw DataError("attention: key dimension does not match W");
}

inline Vector attention_aggregate(const Vector& query, const std::vector<Vector>& keys, const std::vector<bool>& mask,
                                  const Matrix& W, AttentionCache* cache = nullptr) {
  check_attention_shapes(query, keys, mask, W);
  const Vector u = W.transpose() * query;
  const std::size_t n = keys.size();
  Vector scores(static_cast<Eigen::Index>(n));
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    scores[static_cast<Eigen::Index>(i)] = mask[i] ? u.dot(keys[i]) : -std::numeric_limits<double>::infinity();
    if (mask[i]) best = std::max(best, scores[static_cast<Eigen::Index>(i)]);
  }
  if (!std::isfinite(best)) throw DataError("attention: every key is masked");
  Vector w = Vector::Zero(static_cast<Eigen::Index>(n));
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    w[static_cast<Eigen::Index>(i)] = std::exp(scores[static_cast<Eigen::Index>(i)] - best);
    total += w[static_cast<Eigen::Index>(i)];
  }
  w /= total;
  Vector out = Vector::Zero(W.cols());
  for (std::size_t i = 0; i < n; ++i)
    if (mask[i]) out += w[static_cast<Eigen::Index>(i)] * keys[i];
  if (cache) {
    cache->u = u;
    cache->weights = std::move(w);
  }
  return out;
}

/// Accumulates into dW, dquery and dkeys (dkeys sized like keys, entries may
/// start empty).
inline void attention_backward(const Vector& query, const std::vector<Vector>& keys, const std::vector<bool>& mask,
                               const Matrix& W, const AttentionCache& cache, const Vector& dout, Matrix& dW,
                               Vector& dquery, std::vector<Vector>& dkeys) {
  const std::size_t n = keys.size();
  dkeys.resize(n);
  Vector da(static_cast<Eigen::Index>(n));
  double weighted = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    da[static_cast<Eigen::Index>(i)] = mask[i] ? dout.dot(keys[i]) : 0.0;
    weighted += cache.weights[static_cast<Eigen::Index>(i)] * da[static_cast<Eigen::Index>(i)];
  }
  Vector ksum = Vector::Zero(W.cols());
  for (std::size_t i = 0; i < n; ++i) {
    if (dkeys[i].size() == 0) dkeys[i] = Vector::Zero(keys[i].size());
    if (!mask[i]) continue;
    const double a = cache.weights[static_cast<Eigen::Index>(i)];
    const double ds = a * (da[static_cast<Eigen::Index>(i)] - weighted);
    dkeys[i] += a * dout + ds * cache.u;
    ksum += ds * keys[i];
  }
  dW.noalias() += query * ksum.transpose();
  if (dquery.size() == 0) dquery = Vector::Zero(query.size());
  dquery.noalias() += W * ksum;
}

}  // namespace argctx::nn
