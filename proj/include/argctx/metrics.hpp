#pragma once

// Confusion matrix (rows gold, columns predicted), Cohen's kappa and
// macro-averaged precision / recall / F1.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "argctx/corpus.hpp"
#include "argctx/error.hpp"

namespace argctx {

using ConfusionMatrix = std::array<std::array<std::uint64_t, kNumLabels>, kNumLabels>;

inline ConfusionMatrix confusion(std::span<const std::size_t> gold, std::span<const std::size_t> predicted) {
  if (gold.size() != predicted.size()) throw DataError("confusion: gold and predicted lengths differ");
  ConfusionMatrix m{};
  for (std::size_t i = 0; i < gold.size(); ++i) ++m.at(gold[i]).at(predicted[i]);
  return m;
}

inline std::uint64_t total(const ConfusionMatrix& m) {
  std::uint64_t n = 0;
  for (const auto& row : m)
    for (auto v : row) n += v;
  return n;
}

inline ConfusionMatrix& operator+=(ConfusionMatrix& a, const ConfusionMatrix& b) {
  for (std::size_t i = 0; i < kNumLabels; ++i)
    for (std::size_t j = 0; j < kNumLabels; ++j) a[i][j] += b[i][j];
  return a;
}

/// (p_o - p_e) / (1 - p_e); 1 for the degenerate p_o = p_e = 1 case.
inline double cohen_kappa(const ConfusionMatrix& m) {
  const auto n = static_cast<double>(total(m));
  if (n == 0) throw DataError("cohen_kappa: empty confusion matrix");
  double trace = 0.0, pe = 0.0;
  for (std::size_t i = 0; i < kNumLabels; ++i) {
    trace += static_cast<double>(m[i][i]);
    double row = 0.0, col = 0.0;
    for (std::size_t j = 0; j < kNumLabels; ++j) {
      row += static_cast<double>(m[i][j]);
      col += static_cast<double>(m[j][i]);
    }
    pe += row * col;
  }
  const double po = trace / n;
  pe /= n * n;
  if (pe == 1.0) return po == 1.0 ? 1.0 : 0.0;
  return (po - pe) / (1.0 - pe);
}

struct PrfScores {
  double precision = 0.0;
  double recall = 0.0;
  double f_score = 0.0;
};

inline std::array<PrfScores, kNumLabels> per_class_prf(const ConfusionMatrix& m) {
  std::array<PrfScores, kNumLabels> out{};
  for (std::size_t c = 0; c < kNumLabels; ++c) {
    double tp = static_cast<double>(m[c][c]), predicted = 0.0, gold = 0.0;
    for (std::size_t j = 0; j < kNumLabels; ++j) {
      predicted += static_cast<double>(m[j][c]);
      gold += static_cast<double>(m[c][j]);
    }
    auto& s = out[c];
    s.precision = predicted > 0 ? tp / predicted : 0.0;
    s.recall = gold > 0 ? tp / gold : 0.0;
    s.f_score = s.precision + s.recall > 0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  }
  return out;
}

/// Macro averages over the three classes. Zero denominators count as 0.
inline PrfScores prf(const ConfusionMatrix& m) {
  if (total(m) == 0) throw DataError("prf: empty confusion matrix");
  PrfScores avg;
  for (const auto& s : per_class_prf(m)) {
    avg.precision += s.precision / kNumLabels;
    avg.recall += s.recall / kNumLabels;
    avg.f_score += s.f_score / kNumLabels;
  }
  return avg;
}

struct FoldMetrics {
  ConfusionMatrix confusion{};
  double kappa = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f_score = 0.0;

  static FoldMetrics from(const ConfusionMatrix& m) {
    FoldMetrics f;
    f.confusion = m;
    f.kappa = cohen_kappa(m);
    const auto s = prf(m);
    f.precision = s.precision;
    f.recall = s.recall;
    f.f_score = s.f_score;
    return f;
  }
};

/// Headline numbers come from the pooled confusion matrix; per-fold values
/// are kept for paired significance tests.
struct MetricsReport {
  FoldMetrics pooled;
  std::vector<FoldMetrics> per_fold;

  std::vector<double> fold_values(double FoldMetrics::*field) const {
    std::vector<double> v;
    for (const auto& f : per_fold) v.push_back(f.*field);
    return v;
  }
};

}  // namespace argctx
