#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "argctx/error.hpp"
#include "argctx/rng.hpp"

namespace argctx::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ParamBlock {
  std::string name;
  Matrix value;
  bool trainable = true;
};

/// Ordered collection of named tensors. Gradients and optimizer moments use
/// the same type with identical layout.
class ParameterSet {
 public:
  std::size_t add(std::string name, Eigen::Index rows, Eigen::Index cols, bool trainable = true) {
    if (find(name)) throw ConfigError("duplicate parameter block '" + name + "'");
    blocks_.push_back({std::move(name), Matrix::Zero(rows, cols), trainable});
    return blocks_.size() - 1;
  }

  std::size_t size() const noexcept { return blocks_.size(); }
  Matrix& operator[](std::size_t i) { return blocks_[i].value; }
  const Matrix& operator[](std::size_t i) const { return blocks_[i].value; }
  const ParamBlock& block(std::size_t i) const { return blocks_.at(i); }
  ParamBlock& block(std::size_t i) { return blocks_.at(i); }
  const std::vector<ParamBlock>& blocks() const noexcept { return blocks_; }

  std::optional<std::size_t> find(const std::string& name) const {
    for (std::size_t i = 0; i < blocks_.size(); ++i)
      if (blocks_[i].name == name) return i;
    return std::nullopt;
  }

  std::size_t index(const std::string& name) const {
    if (auto i = find(name)) return *i;
    throw ConfigError("no parameter block named '" + name + "'");
  }

  ParameterSet zeros_like() const {
    ParameterSet out;
    for (const auto& b : blocks_) out.blocks_.push_back({b.name, Matrix::Zero(b.value.rows(), b.value.cols()), b.trainable});
    return out;
  }

  void set_zero() {
    for (auto& b : blocks_) b.value.setZero();
  }

  bool same_layout(const ParameterSet& o) const {
    if (o.blocks_.size() != blocks_.size()) return false;
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      if (o.blocks_[i].name != blocks_[i].name || o.blocks_[i].value.rows() != blocks_[i].value.rows() ||
          o.blocks_[i].value.cols() != blocks_[i].value.cols())
        return false;
    }
    return true;
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& b : blocks_) n += static_cast<std::size_t>(b.value.size());
    return n;
  }

  /// Name of the first block holding NaN or Inf, if any.
  std::optional<std::string> first_non_finite() const {
    for (const auto& b : blocks_)
      if (!b.value.allFinite()) return b.name;
    return std::nullopt;
  }

  bool operator==(const ParameterSet& o) const {
    if (!same_layout(o)) return false;
    for (std::size_t i = 0; i < blocks_.size(); ++i)
      if (blocks_[i].value != o.blocks_[i].value || blocks_[i].trainable != o.blocks_[i].trainable) return false;
    return true;
  }

 private:
  std::vector<ParamBlock> blocks_;
};

/// Uniform in +-sqrt(6 / (rows + cols)).
inline void glorot_uniform(Matrix& m, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = rng.uniform(-limit, limit);
}

}  // namespace argctx::nn
