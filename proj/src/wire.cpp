#include "dibc/wire.hpp"

#include <bit>
#include <cstring>

#include "dibc/error.hpp"

namespace dibc::wire {

const char* kind_name(MessageKind kind) {
  switch (kind) {
    case MessageKind::kShardAssign: return "ShardAssign";
    case MessageKind::kRunLocalChain: return "RunLocalChain";
    case MessageKind::kItemStatsUpload: return "ItemStatsUpload";
    case MessageKind::kGroupStatsBroadcast: return "GroupStatsBroadcast";
    case MessageKind::kLoglikReply: return "LoglikReply";
    case MessageKind::kLabelAssign: return "LabelAssign";
    case MessageKind::kCandidateAnnounce: return "CandidateAnnounce";
    case MessageKind::kCountsUpload: return "CountsUpload";
    case MessageKind::kGlobalEstimateBroadcast: return "GlobalEstimateBroadcast";
    case MessageKind::kSuffStatsUpload: return "SuffStatsUpload";
    case MessageKind::kShutdown: return "Shutdown";
    case MessageKind::kPartitionUpload: return "PartitionUpload";
    case MessageKind::kWorkerError: return "WorkerError";
  }
  return "Unknown";
}

void ByteWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::str(const std::string& s) {
  u32(static_cast<std::uint32_t>(s.size()));
  buf_.insert(buf_.end(), s.begin(), s.end());
}

void ByteWriter::vec(const Vector& v) {
  u32(static_cast<std::uint32_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) f64(v[i]);
}

void ByteWriter::mat(const Matrix& m) {
  u32(static_cast<std::uint32_t>(m.rows()));
  u32(static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) f64(m(i, j));
}

void ByteWriter::ints(std::span<const int> v) {
  u32(static_cast<std::uint32_t>(v.size()));
  for (int x : v) i32(x);
}

void ByteWriter::i64s(std::span<const std::int64_t> v) {
  u32(static_cast<std::uint32_t>(v.size()));
  for (auto x : v) i64(x);
}

void ByteWriter::f64s(std::span<const double> v) {
  u32(static_cast<std::uint32_t>(v.size()));
  for (double x : v) f64(x);
}

void ByteReader::need(std::size_t n) const {
  if (bytes_.size() - pos_ < n) throw TransportError("message payload truncated");
}

std::uint8_t ByteReader::u8() {
  need(1);
  return bytes_[pos_++];
}

std::uint32_t ByteReader::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
  return v;
}

std::uint64_t ByteReader::u64() {
  need(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
  return v;
}

double ByteReader::f64() { return std::bit_cast<double>(u64()); }

std::string ByteReader::str() {
  const auto n = u32();
  need(n);
  std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
  pos_ += n;
  return s;
}

Vector ByteReader::vec() {
  const auto n = u32();
  need(static_cast<std::size_t>(n) * 8);
  Vector v(n);
  for (std::uint32_t i = 0; i < n; ++i) v[i] = f64();
  return v;
}

Matrix ByteReader::mat() {
  const auto r = u32();
  const auto c = u32();
  need(static_cast<std::size_t>(r) * c * 8);
  Matrix m(r, c);
  for (std::uint32_t j = 0; j < c; ++j)
    for (std::uint32_t i = 0; i < r; ++i) m(i, j) = f64();
  return m;
}

std::vector<int> ByteReader::ints() {
  const auto n = u32();
  need(static_cast<std::size_t>(n) * 4);
  std::vector<int> v(n);
  for (auto& x : v) x = i32();
  return v;
}

std::vector<std::int64_t> ByteReader::i64s() {
  const auto n = u32();
  need(static_cast<std::size_t>(n) * 8);
  std::vector<std::int64_t> v(n);
  for (auto& x : v) x = i64();
  return v;
}

std::vector<double> ByteReader::f64s() {
  const auto n = u32();
  need(static_cast<std::size_t>(n) * 8);
  std::vector<double> v(n);
  for (auto& x : v) x = f64();
  return v;
}

void ByteReader::finish() const {
  if (!done()) throw TransportError("message payload has trailing bytes");
}

std::vector<std::uint8_t> encode_frame(const Frame& frame) {
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(1 + 8 + frame.payload.size()));
  w.u8(static_cast<std::uint8_t>(frame.kind));
  w.u64(frame.correlation);
  auto out = w.take();
  out.insert(out.end(), frame.payload.begin(), frame.payload.end());
  return out;
}

Frame decode_frame(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes.first(std::min<std::size_t>(bytes.size(), kFrameHeader)));
  const auto length = r.u32();
  if (length < 9 || bytes.size() != 4 + static_cast<std::size_t>(length)) {
    throw TransportError("frame length does not match its prefix");
  }
  Frame f;
  const auto kind = r.u8();
  if (kind < 1 || kind >= kNumKinds) throw TransportError("unknown message kind " + std::to_string(kind));
  f.kind = static_cast<MessageKind>(kind);
  f.correlation = r.u64();
  f.payload.assign(bytes.begin() + kFrameHeader, bytes.end());
  return f;
}

}  // namespace dibc::wire
