#pragma once

// Deterministic serialization: shortest round-trip doubles, RFC-4180-style
// CSV, FNV-1a file digests, atomic writes, and the versioned little-endian
// event log.

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "liftlab/rng.hpp"
#include "liftlab/srw.hpp"

namespace liftlab {

// Shortest representation that parses back to the same double; immune to
// locale and printf quirks.
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string csv_quote(std::string_view field) {
  bool needs = field.find_first_of(",\"\n\r") != std::string_view::npos;
  if (!needs) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    out += c;
    if (c == '"') out += '"';
  }
  out += '"';
  return out;
}

class CsvWriter {
 public:
  explicit CsvWriter(const std::vector<std::string>& header) {
    append_row(header);
  }

  void append_row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i > 0) body_ += ',';
      body_ += csv_quote(fields[i]);
    }
    body_ += '\n';
  }

  const std::string& text() const { return body_; }

 private:
  std::string body_;
};

// Write via a temp file plus rename so readers never see partial output.
inline void atomic_write_file(const std::filesystem::path& path,
                              std::string_view content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string content((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  return content;
}

inline std::uint64_t digest_bytes(std::string_view bytes) {
  return fnv1a64(bytes.data(), bytes.size());
}

inline std::uint64_t digest_file(const std::filesystem::path& path) {
  return digest_bytes(read_file(path));
}

inline std::string digest_hex(std::uint64_t digest) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(digest));
  return std::string(buf);
}

// Binary event log, version 1. Layout, little-endian:
//   8 bytes magic "SRWPDMP1", u32 version, u32 n, u64 record count,
//   then per record: f64 time, u8 kind, u32 new_position.
inline constexpr char event_log_magic[9] = "SRWPDMP1";

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out += static_cast<char>((v >> (8 * i)) & 0xff);
}

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out += static_cast<char>((v >> (8 * i)) & 0xff);
}

inline void put_f64(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

inline std::uint32_t get_u32(const std::string& in, std::size_t& pos) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos++])) << (8 * i);
  return v;
}

inline std::uint64_t get_u64(const std::string& in, std::size_t& pos) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos++])) << (8 * i);
  return v;
}

inline double get_f64(const std::string& in, std::size_t& pos) {
  std::uint64_t bits = get_u64(in, pos);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace detail

inline std::string encode_event_log(int n, const std::vector<EventRecord>& events) {
  std::string out;
  out.reserve(24 + events.size() * 13);
  out.append(event_log_magic, 8);
  detail::put_u32(out, 1u);
  detail::put_u32(out, static_cast<std::uint32_t>(n));
  detail::put_u64(out, static_cast<std::uint64_t>(events.size()));
  for (const EventRecord& e : events) {
    detail::put_f64(out, e.time);
    out += static_cast<char>(static_cast<std::uint8_t>(e.kind));
    detail::put_u32(out, static_cast<std::uint32_t>(e.new_position));
  }
  return out;
}

struct EventLog {
  int n = 0;
  std::vector<EventRecord> events;
};

inline EventLog decode_event_log(const std::string& bytes) {
  if (bytes.size() < 24 || bytes.compare(0, 8, event_log_magic, 8) != 0)
    throw std::runtime_error("event log: bad magic");
  std::size_t pos = 8;
  std::uint32_t version = detail::get_u32(bytes, pos);
  if (version != 1) throw std::runtime_error("event log: unsupported version");
  EventLog log;
  log.n = static_cast<int>(detail::get_u32(bytes, pos));
  std::uint64_t count = detail::get_u64(bytes, pos);
  if (bytes.size() != 24 + count * 13)
    throw std::runtime_error("event log: truncated");
  log.events.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    EventRecord e;
    e.time = detail::get_f64(bytes, pos);
    e.kind = static_cast<EventKind>(static_cast<std::uint8_t>(bytes[pos++]));
    e.new_position = static_cast<int>(detail::get_u32(bytes, pos));
    log.events.push_back(e);
  }
  return log;
}

}  // namespace liftlab
