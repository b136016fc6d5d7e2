#pragma once

// Handcrafted specificity features: a 100-dim averaged word vector followed by
// 14 scalar counts and ratios.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>

#include "argctx/corpus.hpp"
#include "argctx/embeddings.hpp"
#include "argctx/error.hpp"
#include "argctx/text.hpp"

namespace argctx {

struct LexiconBundle {
  std::unordered_set<std::string> connectives;
  std::unordered_set<std::string> stopwords;
  std::unordered_set<std::string> subjective;
  std::unordered_set<std::string> polar;
  std::unordered_map<std::string, double> familiarity;
};

/// One lowercase token per line; blank lines and `#` comments skipped.
inline std::unordered_set<std::string> load_word_list(std::istream& in, const std::string& source) {
  std::unordered_set<std::string> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string_view tok = trim(line);
    if (tok.empty()) continue;
    if (tok.find_first_of(" \t") != std::string_view::npos) {
      throw DataError(source, lineno, "expected one token per line");
    }
    out.insert(ascii_lower(tok));
  }
  return out;
}

/// `token<TAB>score` lines with non-negative scores.
inline std::unordered_map<std::string, double> load_familiarity(std::istream& in, const std::string& source) {
  std::unordered_map<std::string, double> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw DataError(source, lineno, "expected token<TAB>score");
    const std::string tok = ascii_lower(trim(std::string_view(line).substr(0, tab)));
    double score = 0.0;
    if (!detail::parse_double(trim(std::string_view(line).substr(tab + 1)), score) || score < 0.0) {
      throw DataError(source, lineno, "familiarity score must be a non-negative number");
    }
    out.try_emplace(tok, score);
  }
  return out;
}

/// Loads connectives.txt, stopwords.txt, subjective.txt, polar.txt and
/// familiarity.tsv from `dir`.
inline LexiconBundle load_lexicons(const std::filesystem::path& dir) {
  auto open = [&](const char* name) {
    std::ifstream in(dir / name);
    if (!in) throw DataError("cannot open lexicon file '" + (dir / name).string() + "'");
    return in;
  };
  LexiconBundle b;
  {
    auto in = open("connectives.txt");
    b.connectives = load_word_list(in, (dir / "connectives.txt").string());
  }
  {
    auto in = open("stopwords.txt");
    b.stopwords = load_word_list(in, (dir / "stopwords.txt").string());
  }
  {
    auto in = open("subjective.txt");
    b.subjective = load_word_list(in, (dir / "subjective.txt").string());
  }
  {
    auto in = open("polar.txt");
    b.polar = load_word_list(in, (dir / "polar.txt").string());
  }
  {
    auto in = open("familiarity.tsv");
    b.familiarity = load_familiarity(in, (dir / "familiarity.tsv").string());
  }
  return b;
}

/// Document frequencies with the ADU as the document unit.
class IdfTable {
 public:
  IdfTable() = default;
  IdfTable(std::size_t doc_count, std::unordered_map<std::string, std::size_t> df)
      : doc_count_(doc_count), df_(std::move(df)) {
    if (doc_count_ == 0) throw DataError("IDF table needs at least one document");
    for (const auto& [t, n] : df_) {
      if (n == 0 || n > doc_count_) throw DataError("document frequency out of range for '" + t + "'");
    }
  }

  std::size_t doc_count() const noexcept { return doc_count_; }
  const std::unordered_map<std::string, std::size_t>& df() const noexcept { return df_; }

  bool contains(const std::string& token) const { return df_.count(token) > 0; }

  /// ln(N / df); unseen tokens get the df = 1 ceiling ln(N).
  double idf(const std::string& token) const {
    auto it = df_.find(token);
    const double df = it == df_.end() ? 1.0 : static_cast<double>(it->second);
    return std::log(static_cast<double>(doc_count_) / df);
  }

 private:
  std::size_t doc_count_ = 0;
  std::unordered_map<std::string, std::size_t> df_;
};

/// Builds the table from an explicit ADU subset (a training fold).
inline IdfTable compute_idf(const Corpus& corpus, std::span<const AduRef> docs) {
  if (docs.empty()) throw DataError("compute_idf: no documents");
  std::unordered_map<std::string, std::size_t> df;
  std::unordered_set<std::string> seen;
  for (const AduRef r : docs) {
    seen.clear();
    for (auto& t : tokenize(corpus.adu(r).text)) seen.insert(std::move(t.lower));
    for (const auto& t : seen) ++df[t];
  }
  return IdfTable(docs.size(), std::move(df));
}

inline IdfTable compute_idf(const Corpus& corpus) {
  const auto refs = corpus.all_refs();
  return compute_idf(corpus, refs);
}

inline constexpr std::size_t kWordVectorDim = 100;
inline constexpr std::size_t kNumScalarFeatures = 14;
inline constexpr std::size_t kHandcraftedDim = kWordVectorDim + kNumScalarFeatures;

/// Named scalar slots, offsets relative to the start of the scalar block.
enum class Scalar : std::size_t {
  NConnectives,
  NWords,
  NNumbers,
  NSymbols,
  NCapitals,
  StopwordRatio,
  NSubjective,
  NPolar,
  AvgFamiliarity,
  AvgCharsPerWord,
  IdfMin,
  IdfMax,
  OovRatio,
  FamiliarityCoverage,
};

inline constexpr std::array<std::string_view, kNumScalarFeatures> kScalarNames = {
    "n_connectives", "n_words",         "n_numbers", "n_symbols", "n_capitals",
    "stopword_ratio", "n_subjective",   "n_polar",   "avg_familiarity",
    "avg_chars_per_word", "idf_min",    "idf_max",   "oov_ratio", "familiarity_coverage"};

struct HandcraftedVector {
  Eigen::VectorXd values = Eigen::VectorXd::Zero(kHandcraftedDim);

  double scalar(Scalar s) const { return values[static_cast<Eigen::Index>(kWordVectorDim + static_cast<std::size_t>(s))]; }
  auto word_vector() const { return values.head(static_cast<Eigen::Index>(kWordVectorDim)); }
};

/// Decimal number: optional sign, digits, then optional groups of [.,] digits.
inline bool is_number_token(std::string_view t) {
  std::size_t i = 0;
  if (i < t.size() && (t[i] == '+' || t[i] == '-')) ++i;
  auto digits = [&] {
    const std::size_t start = i;
    while (i < t.size() && t[i] >= '0' && t[i] <= '9') ++i;
    return i > start;
  };
  if (!digits()) return false;
  while (i < t.size()) {
    if (t[i] != '.' && t[i] != ',') return false;
    ++i;
    if (!digits()) return false;
  }
  return true;
}

inline bool has_alnum(std::string_view t) {
  std::size_t pos = 0;
  while (pos < t.size()) {
    const auto cp = utf8::decode(t, pos);
    if (!cp) {
      ++pos;
      continue;
    }
    if (utf8::is_alnum(*cp)) return true;
  }
  return false;
}

/// Features for one ADU text. The word vector table must be 100-dimensional.
inline HandcraftedVector handcrafted(std::string_view text, const LexiconBundle& lex, const IdfTable& idf,
                                     const WordVectorTable& vectors) {
  if (vectors.dim() != kWordVectorDim) {
    throw DataError("handcrafted features need " + std::to_string(kWordVectorDim) + "-dim word vectors, got " +
                    std::to_string(vectors.dim()));
  }
  const auto tokens = tokenize(text);
  if (tokens.empty()) throw DataError("handcrafted features: ADU has no tokens");

  Eigen::VectorXd sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(kWordVectorDim));
  std::size_t in_vocab = 0, connectives = 0, words = 0, numbers = 0, symbols = 0, stop = 0, subjective = 0,
              polar = 0, fam_hits = 0, word_chars = 0;
  double fam_sum = 0.0;
  double idf_min = std::numeric_limits<double>::infinity();
  double idf_max = -std::numeric_limits<double>::infinity();

  for (const auto& t : tokens) {
    const std::string& lw = t.lower;
    if (vectors.contains(lw)) {
      sum += vectors.lookup(lw);
      ++in_vocab;
    } else if (vectors.contains(t.surface)) {
      sum += vectors.lookup(t.surface);
      ++in_vocab;
    }
    connectives += lex.connectives.count(lw);
    stop += lex.stopwords.count(lw);
    subjective += lex.subjective.count(lw);
    polar += lex.polar.count(lw);
    if (auto it = lex.familiarity.find(lw); it != lex.familiarity.end()) {
      fam_sum += it->second;
      ++fam_hits;
    }
    if (is_number_token(t.surface)) ++numbers;
    if (has_alnum(t.surface)) {
      ++words;
      word_chars += utf8::length(t.surface);
      const double v = idf.idf(lw);
      idf_min = std::min(idf_min, v);
      idf_max = std::max(idf_max, v);
    } else {
      ++symbols;
    }
  }

  std::size_t capitals = 0;
  for (char c : text) capitals += (c >= 'A' && c <= 'Z');

  const double n = static_cast<double>(tokens.size());
  HandcraftedVector out;
  if (in_vocab) out.values.head(static_cast<Eigen::Index>(kWordVectorDim)) = sum / static_cast<double>(in_vocab);
  auto set = [&](Scalar s, double v) { out.values[static_cast<Eigen::Index>(kWordVectorDim + static_cast<std::size_t>(s))] = v; };
  set(Scalar::NConnectives, static_cast<double>(connectives));
  set(Scalar::NWords, static_cast<double>(words));
  set(Scalar::NNumbers, static_cast<double>(numbers));
  set(Scalar::NSymbols, static_cast<double>(symbols));
  set(Scalar::NCapitals, static_cast<double>(capitals));
  set(Scalar::StopwordRatio, static_cast<double>(stop) / n);
  set(Scalar::NSubjective, static_cast<double>(subjective));
  set(Scalar::NPolar, static_cast<double>(polar));
  set(Scalar::AvgFamiliarity, fam_hits ? fam_sum / static_cast<double>(fam_hits) : 0.0);
  set(Scalar::AvgCharsPerWord, words ? static_cast<double>(word_chars) / static_cast<double>(words) : 0.0);
  set(Scalar::IdfMin, words ? idf_min : 0.0);
  set(Scalar::IdfMax, words ? idf_max : 0.0);
  set(Scalar::OovRatio, static_cast<double>(tokens.size() - in_vocab) / n);
  set(Scalar::FamiliarityCoverage, static_cast<double>(fam_hits) / n);
  return out;
}

inline HandcraftedVector handcrafted(const Adu& adu, const LexiconBundle& lex, const IdfTable& idf,
                                     const WordVectorTable& vectors) {
  return handcrafted(adu.text, lex, idf, vectors);
}

}  // namespace argctx
