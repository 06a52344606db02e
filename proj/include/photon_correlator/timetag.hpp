#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "photon_correlator/error.hpp"

namespace phc {

using channel_t = std::uint8_t;
using timestamp_t = std::int64_t;  // picoseconds from run origin

inline constexpr channel_t kSourceChannel = 0;
inline constexpr channel_t kClockChannel = 200;

struct TimeTag {
  channel_t channel = 0;
  timestamp_t t = 0;

  friend bool operator==(const TimeTag&, const TimeTag&) = default;
};

// Stream order: ascending time, ties broken by ascending channel.
inline bool tag_before(const TimeTag& a, const TimeTag& b) noexcept {
  return a.t != b.t ? a.t < b.t : a.channel < b.channel;
}

struct TagStream {
  std::vector<TimeTag> tags;
  timestamp_t duration_ps = 0;
  std::map<std::string, std::string> meta;

  std::size_t size() const noexcept { return tags.size(); }
  bool empty() const noexcept { return tags.empty(); }

  friend bool operator==(const TagStream&, const TagStream&) = default;
};

// Index of the first tag that breaks the ordering rule, or size() if sorted.
inline std::size_t first_unsorted(std::span<const TimeTag> tags) noexcept {
  for (std::size_t i = 1; i < tags.size(); ++i) {
    if (tag_before(tags[i], tags[i - 1])) return i;
  }
  return tags.size();
}

inline bool is_sorted(std::span<const TimeTag> tags) noexcept {
  return first_unsorted(tags) == tags.size();
}

inline void require_sorted(const TagStream& s, const std::string& what) {
  const auto bad = first_unsorted(s.tags);
  if (bad != s.tags.size()) {
    throw InvalidArgument(what + " is not sorted at tag index " + std::to_string(bad));
  }
}

inline void sort_tags(std::vector<TimeTag>& tags) {
  std::sort(tags.begin(), tags.end(), tag_before);
}

// Multiset union of sorted streams sharing one duration. Meta maps are merged
// with later inputs taking precedence.
inline TagStream merge_streams(std::span<const TagStream> streams) {
  TagStream out;
  if (streams.empty()) return out;

  out.duration_ps = streams.front().duration_ps;
  std::size_t total = 0;
  for (std::size_t i = 0; i < streams.size(); ++i) {
    const auto& s = streams[i];
    if (s.duration_ps != out.duration_ps) {
      throw InvalidArgument("merge_streams: stream " + std::to_string(i) + " has duration " +
                            std::to_string(s.duration_ps) + " ps, expected " +
                            std::to_string(out.duration_ps));
    }
    const auto bad = first_unsorted(s.tags);
    if (bad != s.tags.size()) {
      throw InvalidArgument("merge_streams: stream " + std::to_string(i) +
                            " is not sorted at tag index " + std::to_string(bad));
    }
    total += s.tags.size();
    for (const auto& [k, v] : s.meta) out.meta[k] = v;
  }

  out.tags.reserve(total);
  std::vector<TimeTag> scratch;
  scratch.reserve(total);
  for (const auto& s : streams) {
    scratch.clear();
    std::merge(out.tags.begin(), out.tags.end(), s.tags.begin(), s.tags.end(),
               std::back_inserter(scratch), tag_before);
    out.tags.swap(scratch);
  }
  return out;
}

inline TagStream merge_streams(std::initializer_list<TagStream> streams) {
  return merge_streams(std::span<const TagStream>(streams.begin(), streams.size()));
}

inline TagStream filter_channel(const TagStream& stream, channel_t channel) {
  TagStream out;
  out.duration_ps = stream.duration_ps;
  out.meta = stream.meta;
  std::copy_if(stream.tags.begin(), stream.tags.end(), std::back_inserter(out.tags),
               [channel](const TimeTag& t) { return t.channel == channel; });
  return out;
}

// Returns a copy of the stream with every tag relabelled to `channel`.
inline TagStream relabel(TagStream stream, channel_t channel) {
  for (auto& t : stream.tags) t.channel = channel;
  return stream;
}

}  // namespace phc
