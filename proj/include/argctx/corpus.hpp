#pragma once

// Discussion transcripts: data model, CSV/JSONL parsing, validation report and
// discussion-level fold assignment.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "argctx/csv.hpp"
#include "argctx/error.hpp"
#include "argctx/rng.hpp"
#include "argctx/text.hpp"

namespace argctx {

enum class Label : std::uint8_t { Claim = 0, Evidence = 1, Warrant = 2 };

inline constexpr std::size_t kNumLabels = 3;
inline constexpr std::array<Label, kNumLabels> kAllLabels = {Label::Claim, Label::Evidence,
                                                             Label::Warrant};

inline constexpr std::size_t index_of(Label l) { return static_cast<std::size_t>(l); }

inline std::string_view to_string(Label l) {
  switch (l) {
    case Label::Claim: return "claim";
    case Label::Evidence: return "evidence";
    case Label::Warrant: return "warrant";
  }
  return "?";
}

/// Case-insensitive, surrounding whitespace ignored.
inline std::optional<Label> parse_label(std::string_view s) {
  const std::string v = ascii_lower(trim(s));
  if (v == "claim") return Label::Claim;
  if (v == "evidence") return Label::Evidence;
  if (v == "warrant") return Label::Warrant;
  return std::nullopt;
}

struct Adu {
  std::string discussion_id;
  std::size_t global_index = 0;
  std::string speaker_id;
  std::string text;
  std::optional<Label> label;

  bool operator==(const Adu&) const = default;
};

struct Discussion {
  std::string id;
  std::vector<Adu> adus;

  bool operator==(const Discussion&) const = default;
};

/// Position of one ADU inside a corpus.
struct AduRef {
  std::size_t discussion = 0;
  std::size_t index = 0;

  auto operator<=>(const AduRef&) const = default;
};

class Corpus {
 public:
  Corpus() = default;

  /// Validates ordering and id uniqueness; recounts the label histogram.
  explicit Corpus(std::vector<Discussion> discussions) : discussions_(std::move(discussions)) {
    std::set<std::string> ids;
    for (const auto& d : discussions_) {
      if (!ids.insert(d.id).second) throw DataError("duplicate discussion id '" + d.id + "'");
      for (std::size_t i = 0; i < d.adus.size(); ++i) {
        const Adu& a = d.adus[i];
        if (a.global_index != i || a.discussion_id != d.id) {
          throw DataError("discussion '" + d.id + "': ADU indices must be consecutive from 0");
        }
        if (trim(a.text).empty()) {
          throw DataError("discussion '" + d.id + "': empty text at index " + std::to_string(i));
        }
        if (a.label) ++histogram_[index_of(*a.label)];
      }
    }
  }

  const std::vector<Discussion>& discussions() const noexcept { return discussions_; }
  const Discussion& discussion(std::size_t i) const { return discussions_.at(i); }
  const Adu& adu(AduRef r) const { return discussions_.at(r.discussion).adus.at(r.index); }
  const std::array<std::size_t, kNumLabels>& label_histogram() const noexcept { return histogram_; }

  std::size_t size() const noexcept {
    std::size_t n = 0;
    for (const auto& d : discussions_) n += d.adus.size();
    return n;
  }

  std::optional<std::size_t> find_discussion(std::string_view id) const {
    for (std::size_t i = 0; i < discussions_.size(); ++i) {
      if (discussions_[i].id == id) return i;
    }
    return std::nullopt;
  }

  std::vector<AduRef> all_refs() const {
    std::vector<AduRef> refs;
    for (std::size_t d = 0; d < discussions_.size(); ++d) {
      for (std::size_t i = 0; i < discussions_[d].adus.size(); ++i) refs.push_back({d, i});
    }
    return refs;
  }

  bool operator==(const Corpus& o) const { return discussions_ == o.discussions_; }

 private:
  std::vector<Discussion> discussions_;
  std::array<std::size_t, kNumLabels> histogram_{};
};

enum class CorpusFormat { Csv, Jsonl };

struct ParseOptions {
  /// When false, a missing `label` column/key yields ADUs without gold labels.
  bool require_labels = true;
};

namespace detail {

/// Accumulates rows in file order, assigning global indices per discussion.
class CorpusBuilder {
 public:
  explicit CorpusBuilder(std::string source) : source_(std::move(source)) {}

  void add(std::size_t line, std::string discussion_id, std::string speaker_id, std::string text,
           std::optional<std::string_view> label, std::optional<long long> explicit_index) {
    for (const std::string* field : {&discussion_id, &speaker_id, &text}) {
      if (auto bad = utf8::find_invalid(*field)) {
        throw DataError(source_, line, "invalid UTF-8 at byte " + std::to_string(*bad) + " of field");
      }
    }
    if (trim(discussion_id).empty()) throw DataError(source_, line, "empty discussion_id");
    if (trim(text).empty()) throw DataError(source_, line, "empty text field");
    std::optional<Label> parsed;
    if (label) {
      parsed = parse_label(*label);
      if (!parsed) throw DataError(source_, line, "unknown label '" + std::string(*label) + "'");
    }
    auto [it, inserted] = index_.try_emplace(discussion_id, discussions_.size());
    if (inserted) discussions_.push_back({discussion_id, {}});
    Discussion& d = discussions_[it->second];
    const std::size_t next = d.adus.size();
    if (explicit_index) {
      if (*explicit_index >= 0 && static_cast<std::size_t>(*explicit_index) < next) {
        throw DataError(source_, line,
                        "duplicate (discussion_id, global_index) = (" + discussion_id + ", " +
                            std::to_string(*explicit_index) + ")");
      }
      if (*explicit_index != static_cast<long long>(next)) {
        throw DataError(source_, line,
                        "global_index " + std::to_string(*explicit_index) + " out of order, expected " +
                            std::to_string(next));
      }
    }
    d.adus.push_back({discussion_id, next, std::move(speaker_id), std::move(text), parsed});
  }

  Corpus build() && { return Corpus(std::move(discussions_)); }

 private:
  std::string source_;
  std::vector<Discussion> discussions_;
  std::unordered_map<std::string, std::size_t> index_;
};

inline long long parse_index(const std::string& source, std::size_t line, std::string_view s) {
  const std::string v(trim(s));
  std::size_t used = 0;
  long long out = -1;
  try {
    out = std::stoll(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (v.empty() || used != v.size()) throw DataError(source, line, "non-integer global_index '" + v + "'");
  return out;
}

}  // namespace detail

inline Corpus parse_corpus_csv(std::istream& in, const std::string& source = "<csv>",
                               const ParseOptions& opts = {}) {
  const auto records = csv::read_all(in, source);
  if (records.empty()) throw DataError(source, 1, "missing header row");
  const auto& header = records.front();
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.fields.size(); ++i) col[std::string(trim(header.fields[i]))] = i;
  for (const char* required : {"discussion_id", "speaker_id", "text"}) {
    if (!col.count(required)) throw DataError(source, header.line, std::string("missing column '") + required + "'");
  }
  const bool has_label = col.count("label") > 0;
  if (!has_label && opts.require_labels) throw DataError(source, header.line, "missing column 'label'");
  const bool has_index = col.count("global_index") > 0;

  detail::CorpusBuilder builder(source);
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.fields.size() != header.fields.size()) {
      throw DataError(source, rec.line,
                      "expected " + std::to_string(header.fields.size()) + " fields, found " +
                          std::to_string(rec.fields.size()));
    }
    auto field = [&](const char* name) -> const std::string& { return rec.fields[col.at(name)]; };
    std::optional<std::string_view> label;
    if (has_label) label = field("label");
    std::optional<long long> idx;
    if (has_index) idx = detail::parse_index(source, rec.line, field("global_index"));
    builder.add(rec.line, std::string(trim(field("discussion_id"))), std::string(trim(field("speaker_id"))),
                field("text"), label, idx);
  }
  return std::move(builder).build();
}

inline Corpus parse_corpus_jsonl(std::istream& in, const std::string& source = "<jsonl>",
                                 const ParseOptions& opts = {}) {
  using nlohmann::json;
  detail::CorpusBuilder builder(source);
  std::string line;
  std::size_t lineno = 0;
  auto scalar_string = [&](const json& v, const char* key) -> std::string {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    throw DataError(source, lineno, std::string("key '") + key + "' must be a string");
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    if (auto bad = utf8::find_invalid(line)) {
      throw DataError(source, lineno, "invalid UTF-8 at byte " + std::to_string(*bad));
    }
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(source, lineno, std::string("malformed JSON: ") + e.what());
    }
    if (!obj.is_object()) throw DataError(source, lineno, "expected a JSON object");
    for (const char* key : {"discussion_id", "speaker_id", "text"}) {
      if (!obj.contains(key)) throw DataError(source, lineno, std::string("missing key '") + key + "'");
    }
    std::optional<std::string> label;
    if (obj.contains("label")) {
      label = scalar_string(obj["label"], "label");
    } else if (opts.require_labels) {
      throw DataError(source, lineno, "missing key 'label'");
    }
    std::optional<long long> idx;
    if (obj.contains("global_index")) {
      if (!obj["global_index"].is_number_integer()) throw DataError(source, lineno, "non-integer global_index");
      idx = obj["global_index"].get<long long>();
    }
    if (!obj["text"].is_string()) throw DataError(source, lineno, "key 'text' must be a string");
    builder.add(lineno, scalar_string(obj["discussion_id"], "discussion_id"),
                scalar_string(obj["speaker_id"], "speaker_id"), obj["text"].get<std::string>(),
                label ? std::optional<std::string_view>(*label) : std::nullopt, idx);
  }
  return std::move(builder).build();
}

inline CorpusFormat format_from_path(const std::string& path) {
  return path.ends_with(".jsonl") || path.ends_with(".json") ? CorpusFormat::Jsonl : CorpusFormat::Csv;
}

inline Corpus parse_corpus(const std::string& path, CorpusFormat format, const ParseOptions& opts = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open corpus file '" + path + "'");
  return format == CorpusFormat::Csv ? parse_corpus_csv(in, path, opts) : parse_corpus_jsonl(in, path, opts);
}

inline Corpus parse_corpus(const std::string& path) { return parse_corpus(path, format_from_path(path)); }

inline void write_corpus_csv(std::ostream& out, const Corpus& corpus) {
  const bool labelled = [&] {
    for (const auto& d : corpus.discussions())
      for (const auto& a : d.adus)
        if (!a.label) return false;
    return true;
  }();
  std::vector<std::string> header = {"discussion_id", "speaker_id", "text"};
  if (labelled) header.push_back("label");
  csv::write_row(out, header);
  for (const auto& d : corpus.discussions()) {
    for (const auto& a : d.adus) {
      std::vector<std::string> row = {a.discussion_id, a.speaker_id, a.text};
      if (labelled) row.emplace_back(to_string(*a.label));
      csv::write_row(out, row);
    }
  }
}

// --- validation report ------------------------------------------------------

struct ValidationReport {
  std::size_t n_discussions = 0;
  std::size_t n_adus = 0;
  std::size_t n_unlabelled = 0;
  std::array<std::size_t, kNumLabels> label_counts{};
  /// Percentages rounded to one decimal place.
  std::array<double, kNumLabels> label_percent{};
  std::map<std::string, std::size_t> speakers_per_discussion;
  std::map<std::string, std::map<std::string, std::size_t>> adus_per_speaker;
  std::vector<std::string> single_speaker_discussions;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["n_discussions"] = n_discussions;
    j["n_adus"] = n_adus;
    j["n_unlabelled"] = n_unlabelled;
    for (Label l : kAllLabels) j["label_counts"][std::string(to_string(l))] = label_counts[index_of(l)];
    for (Label l : kAllLabels) j["label_percent"][std::string(to_string(l))] = label_percent[index_of(l)];
    j["speakers_per_discussion"] = speakers_per_discussion;
    j["adus_per_speaker"] = adus_per_speaker;
    j["single_speaker_discussions"] = single_speaker_discussions;
    return j;
  }
};

inline double round1(double x) { return std::round(x * 10.0) / 10.0; }

inline ValidationReport validate_corpus(const Corpus& corpus) {
  ValidationReport r;
  r.n_discussions = corpus.discussions().size();
  std::size_t labelled = 0;
  for (const auto& d : corpus.discussions()) {
    auto& speakers = r.adus_per_speaker[d.id];
    for (const auto& a : d.adus) {
      ++r.n_adus;
      ++speakers[a.speaker_id];
      if (a.label) {
        ++r.label_counts[index_of(*a.label)];
        ++labelled;
      } else {
        ++r.n_unlabelled;
      }
    }
    r.speakers_per_discussion[d.id] = speakers.size();
    if (speakers.size() == 1) r.single_speaker_discussions.push_back(d.id);
  }
  for (std::size_t i = 0; i < kNumLabels; ++i) {
    r.label_percent[i] = labelled ? round1(100.0 * r.label_counts[i] / labelled) : 0.0;
  }
  return r;
}

// --- folds ------------------------------------------------------------------

struct FoldPlan {
  std::size_t k = 0;
  std::map<std::string, std::size_t> assignments;

  std::size_t fold_of(const std::string& discussion_id) const { return assignments.at(discussion_id); }

  std::vector<std::size_t> fold_sizes() const {
    std::vector<std::size_t> sizes(k, 0);
    for (const auto& [id, f] : assignments) ++sizes[f];
    return sizes;
  }

  bool operator==(const FoldPlan&) const = default;
};

/// Seeded shuffle of discussions, then round-robin assignment so fold sizes
/// differ by at most one discussion.
inline FoldPlan make_folds(const Corpus& corpus, std::size_t k, std::uint64_t seed) {
  const std::size_t n = corpus.discussions().size();
  if (k == 0) throw ConfigError("fold count must be positive");
  if (k > n) {
    throw ConfigError("fold count " + std::to_string(k) + " exceeds discussion count " + std::to_string(n));
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(derive_seed(seed, 0xF01D));
  rng.shuffle(std::span<std::size_t>(order));
  FoldPlan plan;
  plan.k = k;
  for (std::size_t i = 0; i < n; ++i) plan.assignments[corpus.discussion(order[i]).id] = i % k;
  return plan;
}

/// ADU-level assignment, kept for comparison with the discussion-level plan.
/// Context windows then straddle folds.
inline std::vector<std::size_t> make_adu_folds(const Corpus& corpus, std::size_t k, std::uint64_t seed) {
  const auto refs = corpus.all_refs();
  if (k == 0 || k > refs.size()) throw ConfigError("invalid ADU-level fold count");
  std::vector<std::size_t> order(refs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(derive_seed(seed, 0xAD0F));
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<std::size_t> fold(refs.size());
  for (std::size_t i = 0; i < order.size(); ++i) fold[order[i]] = i % k;
  return fold;
}

}  // namespace argctx
