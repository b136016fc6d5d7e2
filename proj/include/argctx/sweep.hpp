#pragma once

// Context size / position sweeps over cross-validation runs, the result CSV,
// per-panel curve series and the model-by-context summary table.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "argctx/csv.hpp"
#include "argctx/experiment.hpp"
#include "argctx/significance.hpp"

namespace argctx {

struct SweepGrid {
  std::vector<Pipeline> pipelines;
  std::vector<LocalPosition> local_positions;
  std::vector<std::size_t> local_sizes;
  std::vector<std::size_t> speaker_sizes;
  /// Local setting held fixed while the combined series varies speaker size.
  std::optional<std::pair<LocalPosition, std::size_t>> combined_local;
  std::vector<std::size_t> combined_speaker_sizes;
  bool local_attention = false;
  bool speaker_attention = false;
};

inline SweepGrid grid_from_json(const nlohmann::json& j) {
  SweepGrid g;
  try {
    for (const auto& p : j.value("pipelines", std::vector<std::string>{})) g.pipelines.push_back(parse_pipeline(p));
    if (j.contains("local")) {
      for (const auto& p : j["local"].value("positions", std::vector<std::string>{}))
        g.local_positions.push_back(parse_position(p));
      g.local_sizes = j["local"].value("sizes", std::vector<std::size_t>{});
    }
    if (j.contains("speaker")) g.speaker_sizes = j["speaker"].value("sizes", std::vector<std::size_t>{});
    if (j.contains("combined")) {
      const auto& c = j["combined"];
      g.combined_local = {parse_position(c.value("local_position", std::string("both"))),
                          c.value("local_size", std::size_t{4})};
      g.combined_speaker_sizes = c.value("speaker_sizes", std::vector<std::size_t>{});
    }
    if (j.contains("attention")) {
      g.local_attention = j["attention"].value("local", false);
      g.speaker_attention = j["attention"].value("speaker", false);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid sweep grid: ") + e.what());
  }
  for (auto s : g.local_sizes)
    if (s == 0 || s > kMaxLocalSize) throw ConfigError("local sweep sizes must lie in [1, 6]");
  for (const auto* v : {&g.speaker_sizes, &g.combined_speaker_sizes})
    for (auto s : *v)
      if (s == 0 || s > kMaxSpeakerSize) throw ConfigError("speaker sweep sizes must lie in [1, 40]");
  if (g.combined_local && (g.combined_local->second == 0 || g.combined_local->second > kMaxLocalSize)) {
    throw ConfigError("combined local_size must lie in [1, 6]");
  }
  return g;
}

struct SweepCell {
  Pipeline pipeline = Pipeline::Hybrid;
  ContextSpec context;

  auto key() const {
    return std::make_tuple(std::string(to_string(pipeline)), context.local_size > 0 ? std::string(to_string(context.local_position)) : std::string("none"),
                           context.local_size, context.speaker_size, context.local_attention, context.speaker_attention);
  }
};

/// Baseline first, then local, speaker, combined and attention cells, per pipeline.
inline std::vector<SweepCell> expand_grid(const SweepGrid& g, Pipeline fallback) {
  std::vector<SweepCell> cells;
  std::set<decltype(SweepCell{}.key())> seen;
  auto add = [&](Pipeline p, ContextSpec c) {
    c.validate();
    SweepCell cell{p, c};
    if (seen.insert(cell.key()).second) cells.push_back(cell);
  };
  const std::vector<Pipeline> pipelines = g.pipelines.empty() ? std::vector<Pipeline>{fallback} : g.pipelines;
  for (Pipeline p : pipelines) {
    add(p, {});
    for (auto pos : g.local_positions)
      for (auto s : g.local_sizes) add(p, {s, pos, 0, false, false});
    for (auto s : g.speaker_sizes) add(p, {0, LocalPosition::Both, s, false, false});
    if (g.combined_local)
      for (auto s : g.combined_speaker_sizes) add(p, {g.combined_local->second, g.combined_local->first, s, false, false});
    if (g.local_attention) add(p, {kMaxLocalSize, LocalPosition::Both, 0, true, false});
    if (g.speaker_attention) add(p, {0, LocalPosition::Both, kMaxSpeakerSize, false, true});
  }
  return cells;
}

struct ResultRow {
  std::string pipeline;
  std::string local_position;
  std::size_t local_size = 0;
  std::size_t speaker_size = 0;
  bool local_attention = false;
  bool speaker_attention = false;
  long fold = -1;
  double kappa = 0.0, precision = 0.0, recall = 0.0, f_score = 0.0;
  std::uint64_t seed = 0;

  auto cell_key() const {
    return std::make_tuple(pipeline, local_position, local_size, speaker_size, local_attention, speaker_attention);
  }
};

inline const std::vector<std::string>& result_columns() {
  static const std::vector<std::string> cols = {"pipeline",          "local_position", "local_size", "speaker_size",
                                                "local_attention",   "speaker_attention", "fold",   "kappa",
                                                "precision",         "recall",         "f_score",   "seed"};
  return cols;
}

inline std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::vector<std::string> to_fields(const ResultRow& r) {
  return {r.pipeline,
          r.local_position,
          std::to_string(r.local_size),
          std::to_string(r.speaker_size),
          r.local_attention ? "true" : "false",
          r.speaker_attention ? "true" : "false",
          std::to_string(r.fold),
          format_real(r.kappa),
          format_real(r.precision),
          format_real(r.recall),
          format_real(r.f_score),
          std::to_string(r.seed)};
}

inline std::vector<ResultRow> read_results(std::istream& in, const std::string& source) {
  const auto records = csv::read_all(in, source);
  if (records.empty()) return {};
  if (records.front().fields != result_columns()) throw DataError(source, 1, "unexpected results header");
  std::vector<ResultRow> rows;
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& f = records[i].fields;
    if (f.size() != result_columns().size()) throw DataError(source, records[i].line, "wrong field count");
    try {
      ResultRow r;
      r.pipeline = f[0];
      r.local_position = f[1];
      r.local_size = std::stoul(f[2]);
      r.speaker_size = std::stoul(f[3]);
      r.local_attention = f[4] == "true";
      r.speaker_attention = f[5] == "true";
      r.fold = std::stol(f[6]);
      r.kappa = std::stod(f[7]);
      r.precision = std::stod(f[8]);
      r.recall = std::stod(f[9]);
      r.f_score = std::stod(f[10]);
      r.seed = std::stoull(f[11]);
      rows.push_back(r);
    } catch (const std::exception&) {
      throw DataError(source, records[i].line, "malformed results row");
    }
  }
  return rows;
}

inline std::vector<ResultRow> read_results(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open results file '" + path + "'");
  return read_results(in, path);
}

inline std::vector<ResultRow> rows_for(const SweepCell& cell, const MetricsReport& m, std::uint64_t seed) {
  std::vector<ResultRow> rows;
  auto make = [&](long fold, const FoldMetrics& f) {
    const auto [pipeline, position, ls, ss, la, sa] = cell.key();
    return ResultRow{pipeline, position, ls, ss, la, sa, fold, f.kappa, f.precision, f.recall, f.f_score, seed};
  };
  for (std::size_t f = 0; f < m.per_fold.size(); ++f) rows.push_back(make(static_cast<long>(f), m.per_fold[f]));
  rows.push_back(make(-1, m.pooled));
  return rows;
}

namespace detail {

inline std::vector<std::string> curve_fields(std::size_t size, const std::string& series, const ResultRow& r) {
  return {std::to_string(size), series, format_real(r.kappa), format_real(r.precision), format_real(r.recall),
          format_real(r.f_score)};
}

}  // namespace detail

/// One file per pipeline and panel: `curves_local_<pipeline>.csv` (baseline,
/// prior, next, both, attention) and `curves_speaker_<pipeline>.csv`
/// (baseline, speaker, local+speaker, attention), x axis = context size.
inline void write_curves(const std::vector<ResultRow>& rows, const std::filesystem::path& out_dir) {
  std::vector<std::string> pipelines;
  for (const auto& r : rows)
    if (std::find(pipelines.begin(), pipelines.end(), r.pipeline) == pipelines.end()) pipelines.push_back(r.pipeline);
  const std::vector<std::string> header = {"context_size", "series", "kappa", "precision", "recall", "f_score"};
  for (const auto& p : pipelines) {
    std::vector<const ResultRow*> agg;
    const ResultRow* baseline = nullptr;
    for (const auto& r : rows) {
      if (r.pipeline != p || r.fold != -1) continue;
      agg.push_back(&r);
      if (r.local_size == 0 && r.speaker_size == 0) baseline = &r;
    }
    std::vector<std::vector<std::string>> local, speaker;
    std::set<std::size_t> local_x, speaker_x;
    for (const ResultRow* r : agg) {
      if (r->local_size > 0 && r->speaker_size == 0) {
        local.push_back(detail::curve_fields(r->local_size, r->local_attention ? "attention" : r->local_position, *r));
        local_x.insert(r->local_size);
      } else if (r->speaker_size > 0) {
        const std::string series = r->speaker_attention ? "attention" : r->local_size > 0 ? "local+speaker" : "speaker";
        speaker.push_back(detail::curve_fields(r->speaker_size, series, *r));
        speaker_x.insert(r->speaker_size);
      }
    }
    auto emit = [&](const std::string& name, const std::set<std::size_t>& xs, const std::vector<std::vector<std::string>>& series) {
      std::ofstream out(out_dir / name);
      csv::write_row(out, header);
      if (baseline)
        for (auto x : xs) csv::write_row(out, detail::curve_fields(x, "baseline", *baseline));
      for (const auto& s : series) csv::write_row(out, s);
    };
    emit("curves_local_" + p + ".csv", local_x, local);
    emit("curves_speaker_" + p + ".csv", speaker_x, speaker);
  }
}

struct SweepOptions {
  std::size_t jobs = 1;
  /// Per-cell progress messages; may be null.
  std::ostream* log = nullptr;
};

/// Runs every cell not already completed in `<out_dir>/results.csv`, appending
/// each finished cell immediately, then rewrites the curve series files.
/// Returns all rows of the results file.
inline std::vector<ResultRow> sweep(const ExperimentConfig& base, const SweepGrid& grid, const std::filesystem::path& out_dir,
                                    const SweepOptions& opts = {}) {
  std::filesystem::create_directories(out_dir);
  const auto results_path = out_dir / "results.csv";
  const auto cells = expand_grid(grid, base.model.pipeline);

  // Keep only rows of cells that reached their aggregate row.
  std::vector<ResultRow> kept;
  if (std::filesystem::exists(results_path)) {
    const auto existing = read_results(results_path.string());
    std::set<decltype(ResultRow{}.cell_key())> complete;
    for (const auto& r : existing)
      if (r.fold == -1 && r.seed == base.training.seed) complete.insert(r.cell_key());
    for (const auto& r : existing)
      if (complete.count(r.cell_key()) && r.seed == base.training.seed) kept.push_back(r);
  }
  {
    std::ofstream out(results_path, std::ios::trunc);
    csv::write_row(out, result_columns());
    for (const auto& r : kept) csv::write_row(out, to_fields(r));
  }
  std::set<decltype(ResultRow{}.cell_key())> done;
  for (const auto& r : kept) done.insert(r.cell_key());

  std::map<Pipeline, Resources> resources;
  for (const auto& cell : cells) {
    if (done.count(cell.key())) continue;
    ExperimentConfig cfg = base;
    cfg.model.pipeline = cell.pipeline;
    cfg.model.context = cell.context;
    if (!resources.count(cell.pipeline)) resources.emplace(cell.pipeline, load_resources(cfg));
    if (opts.log) {
      const auto [p, pos, ls, ss, la, sa] = cell.key();
      *opts.log << "cell " << p << " local=" << pos << ":" << ls << (la ? "+att" : "") << " speaker=" << ss
                << (sa ? "+att" : "") << "\n";
    }
    const CvResult cv = cross_validate(cfg, resources.at(cell.pipeline), {opts.jobs, {}});
    const auto rows = rows_for(cell, cv.metrics, base.training.seed);
    std::ofstream out(results_path, std::ios::app);
    for (const auto& r : rows) csv::write_row(out, to_fields(r));
    out.flush();
    kept.insert(kept.end(), rows.begin(), rows.end());
  }
  write_curves(kept, out_dir);
  return kept;
}

// --- summary table ----------------------------------------------------------

struct ReportRow {
  std::string pipeline;
  std::string context;
  std::string setting;
  ResultRow aggregate;
  std::optional<double> p_kappa;
};

/// Best cell (by pooled kappa, first wins ties) per pipeline and context
/// category: none, local, speaker, local + speaker.
inline std::vector<ReportRow> summarize(const std::vector<ResultRow>& rows) {
  std::vector<std::string> pipelines;
  for (const auto& r : rows)
    if (std::find(pipelines.begin(), pipelines.end(), r.pipeline) == pipelines.end()) pipelines.push_back(r.pipeline);
  auto folds_of = [&](const ResultRow& agg) {
    std::vector<double> v;
    for (const auto& r : rows)
      if (r.fold >= 0 && r.cell_key() == agg.cell_key()) v.push_back(r.kappa);
    return v;
  };
  std::vector<ReportRow> out;
  for (const auto& p : pipelines) {
    static const char* kNames[4] = {"-", "Local Context", "Speaker Context", "Local Context + Speaker Context"};
    std::optional<ResultRow> best[4];
    for (const auto& r : rows) {
      if (r.pipeline != p || r.fold != -1) continue;
      const int cat = (r.local_size > 0 ? 1 : 0) + (r.speaker_size > 0 ? 2 : 0);
      if (!best[cat] || r.kappa > best[cat]->kappa) best[cat] = r;
    }
    const auto base_folds = best[0] ? folds_of(*best[0]) : std::vector<double>{};
    for (int cat = 0; cat < 4; ++cat) {
      if (!best[cat]) continue;
      const ResultRow& r = *best[cat];
      std::ostringstream setting;
      if (cat == 0) setting << "-";
      if (r.local_size > 0) setting << "local " << r.local_position << " " << r.local_size << (r.local_attention ? " attn" : "");
      if (r.local_size > 0 && r.speaker_size > 0) setting << "; ";
      if (r.speaker_size > 0) setting << "speaker " << r.speaker_size << (r.speaker_attention ? " attn" : "");
      ReportRow rr{p, kNames[cat], setting.str(), r, std::nullopt};
      const auto f = folds_of(r);
      if (cat > 0 && f.size() == base_folds.size() && f.size() >= 2) rr.p_kappa = significance(f, base_folds);
      out.push_back(rr);
    }
  }
  return out;
}

/// Fixed-width text table; the best value per column within each pipeline is
/// wrapped in asterisks.
inline std::string render_report(const std::vector<ReportRow>& rows) {
  auto fmt3 = [](double v) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return std::string(buf);
  };
  std::map<std::string, std::array<double, 4>> best;
  for (const auto& r : rows) {
    auto [it, inserted] = best.try_emplace(r.pipeline, std::array<double, 4>{-2, -2, -2, -2});
    const std::array<double, 4> v = {r.aggregate.kappa, r.aggregate.precision, r.aggregate.recall, r.aggregate.f_score};
    for (int i = 0; i < 4; ++i) it->second[i] = std::max(it->second[i], std::stod(fmt3(v[i])));
  }
  std::ostringstream out;
  out << std::left << std::setw(4) << "Row" << std::setw(18) << "Model" << std::setw(34) << "Context" << std::setw(30)
      << "Setting" << std::right << std::setw(9) << "Kappa" << std::setw(11) << "Precision" << std::setw(9) << "Recall"
      << std::setw(9) << "F-score" << std::setw(10) << "p(kappa)" << "\n";
  std::string last;
  int n = 0;
  for (const auto& r : rows) {
    if (!last.empty() && r.pipeline != last) out << std::string(134, '=') << "\n";
    last = r.pipeline;
    const std::array<double, 4> v = {r.aggregate.kappa, r.aggregate.precision, r.aggregate.recall, r.aggregate.f_score};
    out << std::left << std::setw(4) << ++n << std::setw(18) << (r.pipeline == "hybrid" ? "Hybrid" : "Pooled embedding")
        << std::setw(34) << r.context << std::setw(30) << r.setting << std::right;
    const int widths[4] = {9, 11, 9, 9};
    for (int i = 0; i < 4; ++i) {
      std::string cell = fmt3(v[i]);
      if (std::stod(cell) == best.at(r.pipeline)[i]) cell = "*" + cell + "*";
      out << std::setw(widths[i]) << cell;
    }
    char p[16] = "-";
    if (r.p_kappa) std::snprintf(p, sizeof p, "%.4f", *r.p_kappa);
    out << std::setw(10) << p << "\n";
  }
  return out.str();
}

}  // namespace argctx
