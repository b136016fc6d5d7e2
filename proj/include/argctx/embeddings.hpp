#pragma once

// Token vector tables (GloVe text format) and precomputed contextual token
// vectors for the pooled-embedding pipeline.

#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "argctx/corpus.hpp"
#include "argctx/error.hpp"

namespace argctx {

class WordVectorTable {
 public:
  WordVectorTable() = default;
  explicit WordVectorTable(std::size_t dim) : dim_(dim), zero_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim))) {}

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return vectors_.size(); }

  /// Returns false (keeping the existing entry) when `token` is already present.
  bool insert(std::string token, Eigen::VectorXd v) {
    if (static_cast<std::size_t>(v.size()) != dim_) throw DataError("word vector dimension mismatch for '" + token + "'");
    return vectors_.try_emplace(std::move(token), std::move(v)).second;
  }

  bool contains(std::string_view token) const { return vectors_.find(std::string(token)) != vectors_.end(); }

  /// Unknown tokens map to the shared zero vector.
  const Eigen::VectorXd& lookup(std::string_view token) const {
    auto it = vectors_.find(std::string(token));
    return it == vectors_.end() ? zero_ : it->second;
  }

  /// Same as lookup() but counts misses.
  const Eigen::VectorXd& lookup(std::string_view token, std::size_t& oov) const {
    auto it = vectors_.find(std::string(token));
    if (it == vectors_.end()) {
      ++oov;
      return zero_;
    }
    return it->second;
  }

  const std::unordered_map<std::string, Eigen::VectorXd>& entries() const noexcept { return vectors_; }

 private:
  std::size_t dim_ = 0;
  Eigen::VectorXd zero_;
  std::unordered_map<std::string, Eigen::VectorXd> vectors_;
};

namespace detail {

inline bool parse_double(std::string_view s, double& out) {
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

}  // namespace detail

/// Reads `token v1 ... vd` lines. Duplicate tokens keep the first occurrence
/// and are reported on `warn`.
inline WordVectorTable load_word_vectors(std::istream& in, const std::string& source = "<vectors>",
                                         std::ostream* warn = &std::cerr) {
  WordVectorTable table;
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string_view> fields;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    fields.clear();
    std::string_view rest(line);
    while (!rest.empty()) {
      const auto b = rest.find_first_not_of(" \t");
      if (b == std::string_view::npos) break;
      rest.remove_prefix(b);
      const auto e = rest.find_first_of(" \t");
      fields.push_back(rest.substr(0, e));
      rest.remove_prefix(e == std::string_view::npos ? rest.size() : e);
    }
    if (fields.empty()) continue;
    if (fields.size() < 2) throw DataError(source, lineno, "expected a token followed by vector components");
    const std::size_t dim = fields.size() - 1;
    if (table.dim() == 0) {
      table = WordVectorTable(dim);
    } else if (dim != table.dim()) {
      throw DataError(source, lineno,
                      "inconsistent dimension " + std::to_string(dim) + ", expected " + std::to_string(table.dim()));
    }
    Eigen::VectorXd v(static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < dim; ++i) {
      if (!detail::parse_double(fields[i + 1], v[static_cast<Eigen::Index>(i)])) {
        throw DataError(source, lineno, "non-numeric field '" + std::string(fields[i + 1]) + "'");
      }
    }
    if (!table.insert(std::string(fields[0]), std::move(v)) && warn) {
      *warn << "warning: " << source << ":" << lineno << ": duplicate token '" << fields[0]
            << "' ignored\n";
    }
  }
  if (table.size() == 0) throw DataError(source + ": empty word vector file");
  return table;
}

inline WordVectorTable load_word_vectors(const std::string& path, std::ostream* warn = &std::cerr) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open word vector file '" + path + "'");
  return load_word_vectors(in, path, warn);
}

inline void write_word_vectors(std::ostream& out, const std::vector<std::pair<std::string, Eigen::VectorXd>>& rows) {
  out.precision(17);
  for (const auto& [tok, v] : rows) {
    out << tok;
    for (Eigen::Index i = 0; i < v.size(); ++i) out << ' ' << v[i];
    out << '\n';
  }
}

/// Elementwise mean of equally sized vectors.
inline Eigen::VectorXd average_pool(const std::vector<Eigen::VectorXd>& vectors) {
  if (vectors.empty()) throw DataError("average_pool: empty vector list");
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(vectors.front().size());
  for (const auto& v : vectors) {
    if (v.size() != sum.size()) throw DataError("average_pool: mixed vector lengths");
    sum += v;
  }
  return sum / static_cast<double>(vectors.size());
}

/// Token vectors per ADU produced outside this library (e.g. by a transformer).
class PrecomputedAduEmbeddings {
 public:
  PrecomputedAduEmbeddings() = default;
  PrecomputedAduEmbeddings(std::size_t dim, std::map<AduRef, std::vector<Eigen::VectorXd>> vectors)
      : dim_(dim), vectors_(std::move(vectors)) {}

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return vectors_.size(); }

  const std::vector<Eigen::VectorXd>& tokens(AduRef ref) const {
    auto it = vectors_.find(ref);
    if (it == vectors_.end()) throw DataError("no precomputed embedding for ADU");
    return it->second;
  }

  Eigen::VectorXd pooled(AduRef ref) const { return average_pool(tokens(ref)); }

 private:
  std::size_t dim_ = 0;
  std::map<AduRef, std::vector<Eigen::VectorXd>> vectors_;
};

/// JSONL records `{discussion_id, global_index, vectors: [[...], ...]}`, one per
/// corpus ADU. `expected_dim` of 0 accepts whatever the first record uses.
inline PrecomputedAduEmbeddings load_precomputed(std::istream& in, const Corpus& corpus,
                                                 const std::string& source = "<embeddings>",
                                                 std::size_t expected_dim = 0) {
  using nlohmann::json;
  std::map<AduRef, std::vector<Eigen::VectorXd>> out;
  std::size_t dim = expected_dim;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(source, lineno, std::string("malformed JSON: ") + e.what());
    }
    if (!rec.is_object() || !rec.contains("discussion_id") || !rec.contains("global_index") ||
        !rec.contains("vectors")) {
      throw DataError(source, lineno, "record needs discussion_id, global_index and vectors");
    }
    const auto& did_v = rec["discussion_id"];
    const std::string did = did_v.is_string() ? did_v.get<std::string>() : did_v.dump();
    if (!rec["global_index"].is_number_integer()) throw DataError(source, lineno, "non-integer global_index");
    const long long gi = rec["global_index"].get<long long>();
    const auto d = corpus.find_discussion(did);
    if (!d || gi < 0 || static_cast<std::size_t>(gi) >= corpus.discussion(*d).adus.size()) {
      throw DataError(source, lineno,
                      "dangling key (" + did + ", " + std::to_string(gi) + ") matches no corpus ADU");
    }
    const AduRef ref{*d, static_cast<std::size_t>(gi)};
    if (out.count(ref)) throw DataError(source, lineno, "duplicate record for (" + did + ", " + std::to_string(gi) + ")");
    const auto& vecs = rec["vectors"];
    if (!vecs.is_array() || vecs.empty()) throw DataError(source, lineno, "vectors must be a non-empty array");
    std::vector<Eigen::VectorXd> tokens;
    tokens.reserve(vecs.size());
    for (const auto& v : vecs) {
      if (!v.is_array()) throw DataError(source, lineno, "each vector must be an array");
      if (dim == 0) dim = v.size();
      if (v.size() != dim) {
        throw DataError(source, lineno,
                        "dimension mismatch: vector of length " + std::to_string(v.size()) + ", expected " +
                            std::to_string(dim));
      }
      Eigen::VectorXd t(static_cast<Eigen::Index>(dim));
      for (std::size_t i = 0; i < dim; ++i) {
        if (!v[i].is_number()) throw DataError(source, lineno, "non-numeric vector component");
        t[static_cast<Eigen::Index>(i)] = v[i].get<double>();
      }
      tokens.push_back(std::move(t));
    }
    out.emplace(ref, std::move(tokens));
  }
  std::vector<std::string> missing;
  for (const auto ref : corpus.all_refs()) {
    if (!out.count(ref)) {
      missing.push_back("(" + corpus.discussion(ref.discussion).id + ", " + std::to_string(ref.index) + ")");
    }
  }
  if (!missing.empty()) {
    std::string msg = source + ": coverage error, missing " + std::to_string(missing.size()) + " ADU(s):";
    for (std::size_t i = 0; i < missing.size() && i < 20; ++i) msg += " " + missing[i];
    if (missing.size() > 20) msg += " ...";
    throw DataError(msg);
  }
  return PrecomputedAduEmbeddings(dim, std::move(out));
}

inline PrecomputedAduEmbeddings load_precomputed(const std::string& path, const Corpus& corpus,
                                                 std::size_t expected_dim = 0) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embedding file '" + path + "'");
  return load_precomputed(in, corpus, path, expected_dim);
}

}  // namespace argctx
