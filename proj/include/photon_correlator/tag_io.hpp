#pragma once

// On-disk timetag formats.
//
// TTAG1 (binary, little-endian):
//   bytes 0-3   magic "TTAG"
//   bytes 4-5   u16 version (1)
//   bytes 6-13  i64 duration_ps
//   byte  14    u8 number of distinct channels in the stream
//   then 9-byte records: u8 channel, i64 t
// Records are sorted by (t, channel). Stream meta is not carried by TTAG1.
//
// CSV: optional leading "# key=value" comment lines (duration_ps plus meta
// entries), then the header "channel,timestamp_ps" and one tag per row.

#include <array>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <string_view>

#include "photon_correlator/error.hpp"
#include "photon_correlator/text.hpp"
#include "photon_correlator/timetag.hpp"

namespace phc {

namespace ttag1 {
inline constexpr std::array<char, 4> kMagic{'T', 'T', 'A', 'G'};
inline constexpr std::uint16_t kVersion = 1;
inline constexpr std::size_t kHeaderSize = 15;
inline constexpr std::size_t kRecordSize = 9;
}  // namespace ttag1

namespace detail {

inline void put_le(std::string& out, std::uint64_t v, int nbytes) {
  for (int i = 0; i < nbytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline std::uint64_t get_le(std::string_view in, std::size_t pos, int nbytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < nbytes; ++i) {
    v |= std::uint64_t(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  }
  return v;
}

inline std::size_t distinct_channels(const std::vector<TimeTag>& tags) {
  std::array<bool, 256> seen{};
  std::size_t n = 0;
  for (const auto& t : tags) {
    if (!seen[t.channel]) {
      seen[t.channel] = true;
      ++n;
    }
  }
  return n;
}

inline void validate_content(const TagStream& s) {
  const auto bad = first_unsorted(s.tags);
  if (bad != s.tags.size()) {
    throw FormatError(FormatError::Kind::Unsorted,
                      "timetag records not sorted at record " + std::to_string(bad));
  }
  for (std::size_t i = 0; i < s.tags.size(); ++i) {
    if (s.tags[i].t < 0 || s.tags[i].t >= s.duration_ps) {
      throw FormatError(FormatError::Kind::OutOfRange,
                        "timetag record " + std::to_string(i) + " outside [0, duration_ps)");
    }
  }
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(FormatError::Kind::Io, "cannot open " + path);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

inline void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(FormatError::Kind::Io, "cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError(FormatError::Kind::Io, "write failed for " + path);
}

inline bool has_suffix(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

}  // namespace detail

inline std::string encode_ttag1(const TagStream& s) {
  detail::validate_content(s);
  std::string out;
  out.reserve(ttag1::kHeaderSize + ttag1::kRecordSize * s.tags.size());
  out.append(ttag1::kMagic.data(), ttag1::kMagic.size());
  detail::put_le(out, ttag1::kVersion, 2);
  detail::put_le(out, static_cast<std::uint64_t>(s.duration_ps), 8);
  const auto nch = detail::distinct_channels(s.tags);
  // 256 distinct channels cannot be represented; store 0 and skip the check on read.
  detail::put_le(out, nch == 256 ? 0 : nch, 1);
  for (const auto& t : s.tags) {
    detail::put_le(out, t.channel, 1);
    detail::put_le(out, static_cast<std::uint64_t>(t.t), 8);
  }
  return out;
}

inline TagStream decode_ttag1(std::string_view bytes) {
  using Kind = FormatError::Kind;
  if (bytes.size() >= 4 && !std::equal(ttag1::kMagic.begin(), ttag1::kMagic.end(), bytes.begin())) {
    throw FormatError(Kind::BadMagic, "bad magic: not a TTAG file");
  }
  if (bytes.size() < ttag1::kHeaderSize) {
    throw FormatError(Kind::Truncated, "truncated TTAG header");
  }
  const auto version = static_cast<std::uint16_t>(detail::get_le(bytes, 4, 2));
  if (version != ttag1::kVersion) {
    throw FormatError(Kind::VersionMismatch,
                      "unsupported TTAG version " + std::to_string(version));
  }
  TagStream s;
  s.duration_ps = static_cast<timestamp_t>(detail::get_le(bytes, 6, 8));
  const auto nch = static_cast<std::size_t>(detail::get_le(bytes, 14, 1));
  const auto body = bytes.size() - ttag1::kHeaderSize;
  if (body % ttag1::kRecordSize != 0) {
    throw FormatError(Kind::Truncated, "truncated TTAG record at byte " +
                                           std::to_string(bytes.size() - body % ttag1::kRecordSize));
  }
  s.tags.resize(body / ttag1::kRecordSize);
  for (std::size_t i = 0; i < s.tags.size(); ++i) {
    const auto pos = ttag1::kHeaderSize + i * ttag1::kRecordSize;
    s.tags[i].channel = static_cast<channel_t>(detail::get_le(bytes, pos, 1));
    s.tags[i].t = static_cast<timestamp_t>(detail::get_le(bytes, pos + 1, 8));
  }
  detail::validate_content(s);
  const auto actual = detail::distinct_channels(s.tags);
  if (!(nch == 0 && actual == 256) && actual != nch) {
    throw FormatError(Kind::ChannelCount, "header declares " + std::to_string(nch) +
                                              " channels, records contain " + std::to_string(actual));
  }
  return s;
}

inline std::string encode_tags_csv(const TagStream& s) {
  detail::validate_content(s);
  std::ostringstream out;
  out << "# duration_ps=" << s.duration_ps << '\n';
  for (const auto& [k, v] : s.meta) out << "# " << k << '=' << v << '\n';
  out << "channel,timestamp_ps\n";
  for (const auto& t : s.tags) out << unsigned(t.channel) << ',' << t.t << '\n';
  return out.str();
}

inline TagStream decode_tags_csv(std::string_view content) {
  using Kind = FormatError::Kind;
  TagStream s;
  bool have_duration = false;
  bool have_header = false;
  std::size_t line_no = 0;
  for (auto line : text::split(content, '\n')) {
    ++line_no;
    line = text::trim(line);
    if (line.empty()) continue;
    if (!have_header && line.front() == '#') {
      const auto kv = text::trim(line.substr(1));
      const auto eq = kv.find('=');
      if (eq == std::string_view::npos) continue;
      const auto key = std::string(text::trim(kv.substr(0, eq)));
      const auto value = std::string(text::trim(kv.substr(eq + 1)));
      if (key == "duration_ps") {
        const auto d = text::parse_int<timestamp_t>(value);
        if (!d) throw FormatError(Kind::BadHeader, "bad duration_ps comment: " + value);
        s.duration_ps = *d;
        have_duration = true;
      } else {
        s.meta[key] = value;
      }
      continue;
    }
    if (!have_header) {
      if (line != "channel,timestamp_ps") {
        throw FormatError(Kind::BadHeader, "expected header 'channel,timestamp_ps'");
      }
      have_header = true;
      continue;
    }
    const auto fields = text::split(line, ',');
    const auto ch = fields.size() == 2 ? text::parse_int<unsigned>(fields[0]) : std::nullopt;
    const auto t = fields.size() == 2 ? text::parse_int<timestamp_t>(fields[1]) : std::nullopt;
    if (!ch || !t || *ch > 255) {
      throw FormatError(Kind::BadRow, "bad timetag row at line " + std::to_string(line_no));
    }
    s.tags.push_back({static_cast<channel_t>(*ch), *t});
  }
  if (!have_header) throw FormatError(Kind::BadHeader, "missing CSV header");
  if (!have_duration) s.duration_ps = s.tags.empty() ? 0 : s.tags.back().t + 1;
  detail::validate_content(s);
  return s;
}

// Format chosen by extension: ".csv" is text, anything else TTAG1.
inline void write_tags(const TagStream& s, const std::string& path) {
  detail::write_file(path, detail::has_suffix(path, ".csv") ? encode_tags_csv(s) : encode_ttag1(s));
}

inline TagStream read_tags(const std::string& path) {
  const auto bytes = detail::read_file(path);
  return detail::has_suffix(path, ".csv") ? decode_tags_csv(bytes) : decode_ttag1(bytes);
}

}  // namespace phc
