#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dibc/linalg.hpp"

namespace dibc::wire {

/// Message kinds. Replies carry the kind of their request, except that
/// GroupStatsBroadcast is answered by LoglikReply; any request may be
/// answered by WorkerError.
enum class MessageKind : std::uint8_t {
  kShardAssign = 1,
  kRunLocalChain = 2,
  kItemStatsUpload = 3,
  kGroupStatsBroadcast = 4,
  kLoglikReply = 5,
  kLabelAssign = 6,
  kCandidateAnnounce = 7,
  kCountsUpload = 8,
  kGlobalEstimateBroadcast = 9,
  kSuffStatsUpload = 10,
  kShutdown = 11,
  kPartitionUpload = 12,
  kWorkerError = 13,
};

const char* kind_name(MessageKind kind);
inline constexpr int kNumKinds = 14;

/// Handshake bytes exchanged once per connection.
inline constexpr char kMagic[4] = {'D', 'I', 'B', 'C'};
inline constexpr std::uint16_t kProtocolVersion = 1;

struct Frame {
  MessageKind kind = MessageKind::kShutdown;
  std::uint64_t correlation = 0;
  std::vector<std::uint8_t> payload;
};

/// [u32 length][u8 kind][u64 correlation][payload], little-endian; length
/// counts everything after itself.
std::vector<std::uint8_t> encode_frame(const Frame& frame);
/// Decodes one complete frame, length prefix included.
Frame decode_frame(std::span<const std::uint8_t> bytes);
inline constexpr std::size_t kFrameHeader = 4 + 1 + 8;

class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v);
  void str(const std::string& s);
  void vec(const Vector& v);
  void mat(const Matrix& m);
  void ints(std::span<const int> v);
  void i64s(std::span<const std::int64_t> v);
  void f64s(std::span<const double> v);

  [[nodiscard]] std::vector<std::uint8_t> take() { return std::move(buf_); }

 private:
  std::vector<std::uint8_t> buf_;
};

/// Reads what ByteWriter wrote; throws TransportError on truncation.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64();
  std::string str();
  Vector vec();
  Matrix mat();
  std::vector<int> ints();
  std::vector<std::int64_t> i64s();
  std::vector<double> f64s();
  [[nodiscard]] bool done() const { return pos_ == bytes_.size(); }
  /// Throws unless every byte was consumed.
  void finish() const;

 private:
  void need(std::size_t n) const;
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace dibc::wire
