#pragma once

#include <cmath>
#include <cstddef>
#include <string>

#include "argctx/neural/params.hpp"

namespace argctx::nn {

inline constexpr std::size_t kNumClasses = 3;

/// Shift-stabilized softmax.
inline Vector softmax(const Vector& logits) {
  const double m = logits.maxCoeff();
  Vector e = (logits.array() - m).exp();
  return e / e.sum();
}

/// softmax(W^T x + b) with W of shape (input_dim x 3).
inline Vector classify(const Vector& x, const Matrix& W, const Matrix& b) {
  if (x.size() != W.rows()) {
    throw DataError("classify: input dimension " + std::to_string(x.size()) + ", expected " + std::to_string(W.rows()));
  }
  return softmax(W.transpose() * x + b.col(0));
}

/// Weighted cross-entropy for one example. Returns the loss; adds
/// weight * d(-log p_y)/d params into dW, db and writes dx.
inline double softmax_xent_backward(const Vector& x, const Matrix& W, const Matrix& b, std::size_t gold, double weight,
                                    Matrix& dW, Matrix& db, Vector& dx) {
  const Vector p = classify(x, W, b);
  Vector dlogits = p;
  dlogits[static_cast<Eigen::Index>(gold)] -= 1.0;
  dlogits *= weight;
  dW.noalias() += x * dlogits.transpose();
  db.col(0) += dlogits;
  dx.noalias() = W * dlogits;
  return -weight * std::log(p[static_cast<Eigen::Index>(gold)]);
}

}  // namespace argctx::nn
