#include "dibc/transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "dibc/error.hpp"
#include "dibc/protocol.hpp"

namespace dibc {

using wire::Frame;
using wire::MessageKind;

namespace {

std::size_t slot(MessageKind kind) { return static_cast<std::size_t>(kind); }

}  // namespace

std::uint64_t TrafficMeter::to_master(std::initializer_list<MessageKind> kinds) const {
  std::uint64_t n = 0;
  for (auto k : kinds) n += bytes_to_master[slot(k)];
  return n;
}

std::uint64_t TrafficMeter::to_workers(std::initializer_list<MessageKind> kinds) const {
  std::uint64_t n = 0;
  for (auto k : kinds) n += bytes_to_workers[slot(k)];
  return n;
}

std::uint64_t TrafficMeter::total_to_master() const {
  std::uint64_t n = 0;
  for (auto b : bytes_to_master) n += b;
  return n;
}

std::uint64_t TrafficMeter::total_to_workers() const {
  std::uint64_t n = 0;
  for (auto b : bytes_to_workers) n += b;
  return n;
}

void Transport::send(int r, const Frame& frame) {
  if (r < 0 || r >= num_workers()) throw TransportError("no worker " + std::to_string(r));
  if (assigned_.empty()) assigned_.assign(num_workers(), 0);
  if (frame.kind == MessageKind::kShardAssign) {
    if (assigned_[r]) throw TransportError("raw rows sent to worker " + std::to_string(r) + " after its initial ShardAssign");
    assigned_[r] = 1;
  }
  auto bytes = wire::encode_frame(frame);
  meter_.bytes_to_workers[slot(frame.kind)] += bytes.size();
  ++meter_.messages_to_workers[slot(frame.kind)];
  send_bytes(r, std::move(bytes));
}

Frame Transport::receive(int r) {
  if (r < 0 || r >= num_workers()) throw TransportError("no worker " + std::to_string(r));
  const auto bytes = receive_bytes(r);
  auto frame = wire::decode_frame(bytes);
  if (frame.kind == MessageKind::kShardAssign && !frame.payload.empty()) {
    throw TransportError("worker " + std::to_string(r) + " sent rows to the master");
  }
  meter_.bytes_to_master[slot(frame.kind)] += bytes.size();
  ++meter_.messages_to_master[slot(frame.kind)];
  return frame;
}

void Transport::check(const Frame& reply, int r) {
  if (reply.kind == MessageKind::kWorkerError) wire::raise_worker_error(reply, r);
}

Frame Transport::request(int r, const Frame& frame) {
  send(r, frame);
  auto reply = receive(r);
  check(reply, r);
  return reply;
}

InProcessTransport::InProcessTransport(int R) : workers_(R), replies_(R) {
  if (R < 1) throw ConfigError("at least one worker is required");
}

void InProcessTransport::fail_on(int r, MessageKind kind, int nth) { faults_.push_back({r, kind, nth}); }

void InProcessTransport::send_bytes(int r, std::vector<std::uint8_t> bytes) {
  const auto frame = wire::decode_frame(bytes);
  for (auto& f : faults_) {
    if (f.r == r && f.kind == frame.kind && f.remaining > 0 && --f.remaining == 0) {
      throw TransportError(std::string("injected failure on ") + wire::kind_name(frame.kind) + " to worker " +
                           std::to_string(r));
    }
  }
  replies_[r].push_back(wire::encode_frame(workers_[r].handle(frame)));
}

std::vector<std::uint8_t> InProcessTransport::receive_bytes(int r) {
  if (replies_[r].empty()) throw TransportError("no reply pending from worker " + std::to_string(r));
  auto bytes = std::move(replies_[r].front());
  replies_[r].pop_front();
  return bytes;
}

namespace {

void write_all(int fd, const std::uint8_t* data, std::size_t n) {
  while (n > 0) {
    const auto sent = ::send(fd, data, n, MSG_NOSIGNAL);
    if (sent < 0) {
      if (errno == EINTR) continue;
      throw TransportError(std::string("send failed: ") + std::strerror(errno));
    }
    data += sent;
    n -= static_cast<std::size_t>(sent);
  }
}

/// False on a clean close before any byte.
bool read_all(int fd, std::uint8_t* data, std::size_t n) {
  std::size_t got = 0;
  while (got < n) {
    const auto r = ::recv(fd, data + got, n - got, 0);
    if (r < 0) {
      if (errno == EINTR) continue;
      throw TransportError(std::string("receive failed: ") + std::strerror(errno));
    }
    if (r == 0) {
      if (got == 0) return false;
      throw TransportError("connection closed mid-frame");
    }
    got += static_cast<std::size_t>(r);
  }
  return true;
}

std::vector<std::uint8_t> read_frame(int fd, bool& closed) {
  std::vector<std::uint8_t> bytes(4);
  closed = !read_all(fd, bytes.data(), 4);
  if (closed) return {};
  const std::uint32_t length = static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
                               (static_cast<std::uint32_t>(bytes[2]) << 16) |
                               (static_cast<std::uint32_t>(bytes[3]) << 24);
  if (length < 9 || length > (1u << 31)) throw TransportError("bad frame length " + std::to_string(length));
  bytes.resize(4 + static_cast<std::size_t>(length));
  if (!read_all(fd, bytes.data() + 4, length)) throw TransportError("connection closed mid-frame");
  return bytes;
}

std::vector<std::uint8_t> handshake_bytes() {
  wire::ByteWriter w;
  for (char c : wire::kMagic) w.u8(static_cast<std::uint8_t>(c));
  w.u8(static_cast<std::uint8_t>(wire::kProtocolVersion & 0xff));
  w.u8(static_cast<std::uint8_t>(wire::kProtocolVersion >> 8));
  return w.take();
}

void exchange_handshake(int fd, bool send_first) {
  const auto mine = handshake_bytes();
  std::vector<std::uint8_t> theirs(mine.size());
  if (send_first) write_all(fd, mine.data(), mine.size());
  if (!read_all(fd, theirs.data(), theirs.size())) throw TransportError("peer closed during handshake");
  if (theirs != mine) throw TransportError("protocol handshake mismatch");
  if (!send_first) write_all(fd, mine.data(), mine.size());
}

int connect_tcp(const std::string& endpoint) {
  const auto colon = endpoint.rfind(':');
  if (colon == std::string::npos) throw ConfigError("endpoint must be host:port, got '" + endpoint + "'");
  const std::string host = endpoint.substr(0, colon), port = endpoint.substr(colon + 1);
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (const int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &res); rc != 0) {
    throw TransportError("cannot resolve " + endpoint + ": " + ::gai_strerror(rc));
  }
  int fd = -1;
  for (auto* p = res; p; p = p->ai_next) {
    fd = ::socket(p->ai_family, p->ai_socktype, p->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, p->ai_addr, p->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw TransportError("cannot connect to " + endpoint);
  const int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  return fd;
}

}  // namespace

TcpTransport::TcpTransport(const std::vector<std::string>& endpoints) {
  if (endpoints.empty()) throw ConfigError("at least one worker endpoint is required");
  try {
    for (const auto& e : endpoints) {
      sockets_.push_back(connect_tcp(e));
      exchange_handshake(sockets_.back(), true);
    }
  } catch (...) {
    for (int fd : sockets_) ::close(fd);
    throw;
  }
}

TcpTransport::~TcpTransport() {
  for (int fd : sockets_) ::close(fd);
}

void TcpTransport::send_bytes(int r, std::vector<std::uint8_t> bytes) {
  write_all(sockets_[r], bytes.data(), bytes.size());
}

std::vector<std::uint8_t> TcpTransport::receive_bytes(int r) {
  bool closed = false;
  auto bytes = read_frame(sockets_[r], closed);
  if (closed) throw TransportError("worker " + std::to_string(r) + " closed the connection");
  return bytes;
}

int listen_tcp(const std::string& host, int port, int& bound) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw TransportError(std::string("socket: ") + std::strerror(errno));
  const int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(fd);
    throw ConfigError("listen address must be an IPv4 literal, got '" + host + "'");
  }
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 || ::listen(fd, 1) != 0) {
    const std::string msg = std::strerror(errno);
    ::close(fd);
    throw TransportError("cannot listen on " + host + ":" + std::to_string(port) + ": " + msg);
  }
  socklen_t len = sizeof(addr);
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  bound = ntohs(addr.sin_port);
  return fd;
}

void serve_worker(int listen_fd) {
  const int fd = ::accept(listen_fd, nullptr, nullptr);
  ::close(listen_fd);
  if (fd < 0) throw TransportError(std::string("accept failed: ") + std::strerror(errno));
  const int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  Worker worker;
  try {
    exchange_handshake(fd, false);
    while (!worker.stopped()) {
      bool closed = false;
      const auto bytes = read_frame(fd, closed);
      if (closed) break;
      const auto reply = wire::encode_frame(worker.handle(wire::decode_frame(bytes)));
      write_all(fd, reply.data(), reply.size());
    }
  } catch (...) {
    ::close(fd);
    throw;
  }
  ::close(fd);
}

LoopbackWorkers::LoopbackWorkers(int R) {
  for (int r = 0; r < R; ++r) {
    int port = 0;
    const int fd = listen_tcp("127.0.0.1", 0, port);
    endpoints_.push_back("127.0.0.1:" + std::to_string(port));
    threads_.emplace_back([fd] {
      try {
        serve_worker(fd);
      } catch (const std::exception&) {
        // The master sees the broken connection.
      }
    });
  }
}

LoopbackWorkers::~LoopbackWorkers() {
  // Wake any worker still waiting in accept; a refused connect is harmless.
  for (const auto& e : endpoints_) {
    try {
      ::close(connect_tcp(e));
    } catch (const Error&) {
    }
  }
  for (auto& t : threads_) {
    if (t.joinable()) t.join();
  }
}

}  // namespace dibc
