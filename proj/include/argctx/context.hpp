#pragma once

// Local and speaker context windows around a target ADU, and assembly of the
// encoded model input.

#include <algorithm>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "argctx/corpus.hpp"
#include "argctx/error.hpp"

namespace argctx {

enum class LocalPosition { Prior, Next, Both };

inline std::string_view to_string(LocalPosition p) {
  switch (p) {
    case LocalPosition::Prior: return "prior";
    case LocalPosition::Next: return "next";
    case LocalPosition::Both: return "both";
  }
  return "?";
}

inline LocalPosition parse_position(std::string_view s) {
  const std::string v = ascii_lower(trim(s));
  if (v == "prior") return LocalPosition::Prior;
  if (v == "next") return LocalPosition::Next;
  if (v == "both") return LocalPosition::Both;
  throw ConfigError("unknown local context position '" + std::string(s) + "' (expected prior|next|both)");
}

inline constexpr std::size_t kMaxLocalSize = 6;
inline constexpr std::size_t kMaxSpeakerSize = 40;

struct ContextSpec {
  std::size_t local_size = 0;
  LocalPosition local_position = LocalPosition::Both;
  std::size_t speaker_size = 0;
  bool local_attention = false;
  bool speaker_attention = false;

  void validate() const {
    if (local_size > kMaxLocalSize) throw ConfigError("local_size must be at most 6");
    if (speaker_size > kMaxSpeakerSize) throw ConfigError("speaker_size must be at most 40");
    if (local_attention && (local_position != LocalPosition::Both || local_size != kMaxLocalSize)) {
      throw ConfigError("local attention requires position 'both' and local_size 6");
    }
    if (speaker_attention && speaker_size != kMaxSpeakerSize) {
      throw ConfigError("speaker attention requires speaker_size 40");
    }
  }

  bool operator==(const ContextSpec&) const = default;
};

/// Prior slots take ceil(size/2) for Both, so odd sizes favour earlier ADUs.
inline std::size_t prior_slots(std::size_t size, LocalPosition p) {
  switch (p) {
    case LocalPosition::Prior: return size;
    case LocalPosition::Next: return 0;
    case LocalPosition::Both: return (size + 1) / 2;
  }
  return 0;
}

inline std::size_t next_slots(std::size_t size, LocalPosition p) { return size - prior_slots(size, p); }

struct LocalSlot {
  /// Signed distance from the target: -3, -2, -1 before it, +1, +2 after.
  long offset = 0;
  /// Index within the discussion, absent past a discussion boundary.
  std::optional<std::size_t> index;
};

/// Slots in assembly order: prior oldest to newest, then next nearest to
/// farthest. For Both, ADUs borrowed from the other side sit in the slots a
/// boundary left empty.
struct LocalWindow {
  std::vector<LocalSlot> slots;

  /// Indices of the context ADUs in discussion order.
  std::vector<std::size_t> present() const {
    std::vector<std::size_t> out;
    for (const auto& s : slots)
      if (s.index) out.push_back(*s.index);
    std::sort(out.begin(), out.end());
    return out;
  }

  std::size_t missing() const { return slots.size() - present().size(); }
};

inline void check_target(const Discussion& d, std::size_t target) {
  if (target >= d.adus.size()) {
    throw DataError("target index " + std::to_string(target) + " out of range for discussion '" + d.id + "' with " +
                    std::to_string(d.adus.size()) + " ADUs");
  }
}

inline LocalWindow local_context(const Discussion& d, std::size_t target, std::size_t size, LocalPosition p) {
  check_target(d, target);
  LocalWindow w;
  const std::size_t before = prior_slots(size, p);
  const std::size_t after = next_slots(size, p);
  const std::size_t have_before = target;
  const std::size_t have_after = d.adus.size() - 1 - target;
  for (std::size_t k = before; k >= 1; --k) {
    LocalSlot s{-static_cast<long>(k), std::nullopt};
    if (have_before >= k) s.index = target - k;
    w.slots.push_back(s);
  }
  for (std::size_t k = 1; k <= after; ++k) {
    LocalSlot s{static_cast<long>(k), std::nullopt};
    if (have_after >= k) s.index = target + k;
    w.slots.push_back(s);
  }
  if (p != LocalPosition::Both) return w;

  // A side cut short by the discussion boundary lends its slots to the other
  // side, so the window still covers `size` ADUs where the discussion allows.
  // Missing prior slots are the oldest (front), missing next slots the
  // farthest (back).
  const std::size_t short_before = before - std::min(before, have_before);
  const std::size_t short_after = after - std::min(after, have_after);
  std::size_t extra_before = std::min(short_after, have_before - std::min(before, have_before));
  std::size_t extra_after = std::min(short_before, have_after - std::min(after, have_after));
  for (std::size_t i = w.slots.size(); i-- > before && extra_before > 0; --extra_before) {
    const std::size_t k = before + extra_before;
    w.slots[i] = {-static_cast<long>(k), target - k};
  }
  for (std::size_t i = 0; i < before && extra_after > 0; ++i, --extra_after) {
    const std::size_t k = after + extra_after;
    w.slots[i] = {static_cast<long>(k), target + k};
  }
  return w;
}

/// Up to `k` earlier ADUs by the target's speaker, the closest ones, in
/// ascending index order.
inline std::vector<std::size_t> speaker_context(const Discussion& d, std::size_t target, std::size_t k) {
  check_target(d, target);
  std::vector<std::size_t> out;
  const std::string& speaker = d.adus[target].speaker_id;
  for (std::size_t i = target; i-- > 0 && out.size() < k;) {
    if (d.adus[i].speaker_id == speaker) out.push_back(i);
  }
  std::reverse(out.begin(), out.end());
  return out;
}

/// All context indices needed to build one example.
struct ExamplePlan {
  AduRef target;
  LocalWindow local;
  std::vector<std::size_t> speaker;
};

inline ExamplePlan plan_example(const Corpus& corpus, AduRef target, const ContextSpec& spec) {
  const Discussion& d = corpus.discussion(target.discussion);
  return {target, local_context(d, target.index, spec.local_size, spec.local_position),
          speaker_context(d, target.index, spec.speaker_size)};
}

/// Encoded model input before the context aggregators run.
struct AssembledInput {
  Eigen::VectorXd target;
  /// One vector per local slot in assembly order; zero where masked.
  std::vector<Eigen::VectorXd> local;
  std::vector<bool> local_mask;
  /// Number of slots placed before the target in the flat layout.
  std::size_t n_prior = 0;
  /// Variable length, no padding.
  std::vector<Eigen::VectorXd> speaker;

  bool speaker_empty() const { return speaker.empty(); }

  /// [prior slots, target, next slots] concatenated.
  Eigen::VectorXd flat() const {
    const Eigen::Index d = target.size();
    Eigen::VectorXd out(d * static_cast<Eigen::Index>(local.size() + 1));
    Eigen::Index at = 0;
    for (std::size_t i = 0; i < n_prior; ++i, at += d) out.segment(at, d) = local[i];
    out.segment(at, d) = target;
    at += d;
    for (std::size_t i = n_prior; i < local.size(); ++i, at += d) out.segment(at, d) = local[i];
    return out;
  }
};

using AduEncoder = std::function<Eigen::VectorXd(const Adu&)>;

/// `encoder` maps target and local ADUs; `speaker_encoder` maps speaker
/// context ADUs (it may be the same function).
inline AssembledInput assemble_example(const Discussion& d, std::size_t target, const ContextSpec& spec,
                                       const AduEncoder& encoder, const AduEncoder& speaker_encoder,
                                       std::size_t expected_dim, std::size_t expected_speaker_dim) {
  AssembledInput in;
  in.target = encoder(d.adus.at(target));
  auto check = [](const Eigen::VectorXd& v, std::size_t want, const char* what) {
    if (static_cast<std::size_t>(v.size()) != want) {
      throw DataError(std::string(what) + " encoder produced " + std::to_string(v.size()) + " dims, expected " +
                      std::to_string(want));
    }
  };
  check(in.target, expected_dim, "target");
  const auto window = local_context(d, target, spec.local_size, spec.local_position);
  in.n_prior = prior_slots(spec.local_size, spec.local_position);
  for (const auto& slot : window.slots) {
    if (slot.index) {
      in.local.push_back(encoder(d.adus[*slot.index]));
      check(in.local.back(), expected_dim, "local context");
      in.local_mask.push_back(true);
    } else {
      in.local.push_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(expected_dim)));
      in.local_mask.push_back(false);
    }
  }
  for (std::size_t i : speaker_context(d, target, spec.speaker_size)) {
    in.speaker.push_back(speaker_encoder(d.adus[i]));
    check(in.speaker.back(), expected_speaker_dim, "speaker context");
  }
  return in;
}

}  // namespace argctx
