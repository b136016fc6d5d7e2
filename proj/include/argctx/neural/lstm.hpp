#pragma once

// Single-layer LSTM that summarizes a variable-length sequence by its final
// hidden state. Gate rows are stacked [input; forget; output; candidate].

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "argctx/neural/params.hpp"

namespace argctx::nn {

inline constexpr std::size_t kLstmHidden = 100;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

class Lstm {
 public:
  struct Cache {
    std::vector<Vector> x;
    std::vector<Vector> i, f, o, g, c, h;
  };

  Lstm() = default;

  /// Registers `<prefix>.wx` (4H x in), `.wh` (4H x H), `.b` (4H) and the
  /// learned output for empty sequences, `.empty` (H).
  Lstm(ParameterSet& params, const std::string& prefix, std::size_t input_dim, std::size_t hidden = kLstmHidden)
      : input_dim_(input_dim), hidden_(hidden) {
    const auto h = static_cast<Eigen::Index>(hidden);
    wx_ = params.add(prefix + ".wx", 4 * h, static_cast<Eigen::Index>(input_dim));
    wh_ = params.add(prefix + ".wh", 4 * h, h);
    b_ = params.add(prefix + ".b", 4 * h, 1);
    empty_ = params.add(prefix + ".empty", h, 1);
  }

  std::size_t input_dim() const noexcept { return input_dim_; }
  std::size_t hidden_dim() const noexcept { return hidden_; }

  void initialize(ParameterSet& params, Rng& rng) const {
    glorot_uniform(params[wx_], rng);
    glorot_uniform(params[wh_], rng);
    params[b_].setZero();
    params[empty_].setZero();
  }

  Vector forward(const std::vector<Vector>& seq, const ParameterSet& params, Cache* cache = nullptr) const {
    const auto H = static_cast<Eigen::Index>(hidden_);
    if (cache) *cache = Cache{};
    if (seq.empty()) return params[empty_].col(0);
    Vector h = Vector::Zero(H), c = Vector::Zero(H);
    for (const auto& x : seq) {
      if (static_cast<std::size_t>(x.size()) != input_dim_) {
        throw DataError("lstm_aggregate: input dimension " + std::to_string(x.size()) + ", expected " +
                        std::to_string(input_dim_));
      }
      const Vector z = params[wx_] * x + params[wh_] * h + params[b_].col(0);
      Vector i = z.segment(0, H).unaryExpr(&sigmoid);
      Vector f = z.segment(H, H).unaryExpr(&sigmoid);
      Vector o = z.segment(2 * H, H).unaryExpr(&sigmoid);
      Vector g = z.segment(3 * H, H).array().tanh();
      c = f.cwiseProduct(c) + i.cwiseProduct(g);
      h = o.cwiseProduct(c.array().tanh().matrix());
      if (cache) {
        cache->x.push_back(x);
        cache->i.push_back(std::move(i));
        cache->f.push_back(std::move(f));
        cache->o.push_back(std::move(o));
        cache->g.push_back(std::move(g));
        cache->c.push_back(c);
        cache->h.push_back(h);
      }
    }
    return h;
  }

  /// Backpropagation through time from the final hidden state. Input
  /// gradients are written to `dx` (resized to the sequence length).
  void backward(const Cache& cache, const Vector& dh_final, const ParameterSet& params, ParameterSet& grads,
                std::vector<Vector>* dx) const {
    const auto H = static_cast<Eigen::Index>(hidden_);
    const std::size_t T = cache.x.size();
    if (dx) dx->assign(T, Vector());
    if (T == 0) {
      grads[empty_].col(0) += dh_final;
      return;
    }
    const Vector zero = Vector::Zero(H);
    Vector dh = dh_final;
    Vector dc = Vector::Zero(H);
    Vector dz(4 * H);
    for (std::size_t t = T; t-- > 0;) {
      const Vector& c_prev = t ? cache.c[t - 1] : zero;
      const Vector& h_prev = t ? cache.h[t - 1] : zero;
      const auto& i = cache.i[t].array();
      const auto& f = cache.f[t].array();
      const auto& o = cache.o[t].array();
      const auto& g = cache.g[t].array();
      const Eigen::ArrayXd tanh_c = cache.c[t].array().tanh();
      dc.array() += dh.array() * o * (1.0 - tanh_c.square());
      dz.segment(0, H) = (dc.array() * g * i * (1.0 - i)).matrix();
      dz.segment(H, H) = (dc.array() * c_prev.array() * f * (1.0 - f)).matrix();
      dz.segment(2 * H, H) = (dh.array() * tanh_c * o * (1.0 - o)).matrix();
      dz.segment(3 * H, H) = (dc.array() * i * (1.0 - g.square())).matrix();
      grads[wx_].noalias() += dz * cache.x[t].transpose();
      grads[wh_].noalias() += dz * h_prev.transpose();
      grads[b_].col(0) += dz;
      if (dx) (*dx)[t].noalias() = params[wx_].transpose() * dz;
      dh.noalias() = params[wh_].transpose() * dz;
      dc.array() *= f;
    }
  }

 private:
  std::size_t input_dim_ = 0;
  std::size_t hidden_ = kLstmHidden;
  std::size_t wx_ = 0, wh_ = 0, b_ = 0, empty_ = 0;
};

inline Vector lstm_aggregate(const std::vector<Vector>& seq, const ParameterSet& params, const Lstm& lstm) {
  return lstm.forward(seq, params);
}

}  // namespace argctx::nn
