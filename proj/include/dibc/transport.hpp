#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <initializer_list>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "dibc/wire.hpp"
#include "dibc/worker.hpp"

namespace dibc {

/// Encoded bytes and message counts per kind and direction.
struct TrafficMeter {
  std::array<std::uint64_t, wire::kNumKinds> bytes_to_workers{};
  std::array<std::uint64_t, wire::kNumKinds> bytes_to_master{};
  std::array<std::uint64_t, wire::kNumKinds> messages_to_workers{};
  std::array<std::uint64_t, wire::kNumKinds> messages_to_master{};

  [[nodiscard]] std::uint64_t to_master(std::initializer_list<wire::MessageKind> kinds) const;
  [[nodiscard]] std::uint64_t to_workers(std::initializer_list<wire::MessageKind> kinds) const;
  [[nodiscard]] std::uint64_t total_to_master() const;
  [[nodiscard]] std::uint64_t total_to_workers() const;
};

/// Master-side endpoint to R workers. Every frame passes through the
/// meter and the raw-row guard: each worker receives ShardAssign at most
/// once and no worker ever sends rows back.
class Transport {
 public:
  virtual ~Transport() = default;
  [[nodiscard]] virtual int num_workers() const = 0;

  void send(int r, const wire::Frame& frame);
  wire::Frame receive(int r);
  /// send then receive; a WorkerError reply is rethrown with its category.
  wire::Frame request(int r, const wire::Frame& frame);
  /// Rethrows if `reply` is a WorkerError.
  static void check(const wire::Frame& reply, int r);

  [[nodiscard]] const TrafficMeter& meter() const { return meter_; }

 protected:
  virtual void send_bytes(int r, std::vector<std::uint8_t> bytes) = 0;
  virtual std::vector<std::uint8_t> receive_bytes(int r) = 0;

 private:
  TrafficMeter meter_;
  std::vector<char> assigned_;
};

/// Workers living in this process; a request is handled when it is sent and
/// the encoded reply is queued for receive.
class InProcessTransport : public Transport {
 public:
  explicit InProcessTransport(int R);
  [[nodiscard]] int num_workers() const override { return static_cast<int>(workers_.size()); }
  /// Makes the n-th (1-based) frame of `kind` sent to worker r fail.
  void fail_on(int r, wire::MessageKind kind, int nth);
  [[nodiscard]] const Worker& worker(int r) const { return workers_.at(static_cast<std::size_t>(r)); }

 protected:
  void send_bytes(int r, std::vector<std::uint8_t> bytes) override;
  std::vector<std::uint8_t> receive_bytes(int r) override;

 private:
  struct Fault {
    int r;
    wire::MessageKind kind;
    int remaining;
  };
  std::vector<Worker> workers_;
  std::vector<std::deque<std::vector<std::uint8_t>>> replies_;
  std::vector<Fault> faults_;
};

/// Frames over TCP connections, one per worker ("host:port").
class TcpTransport : public Transport {
 public:
  explicit TcpTransport(const std::vector<std::string>& endpoints);
  ~TcpTransport() override;
  TcpTransport(const TcpTransport&) = delete;
  TcpTransport& operator=(const TcpTransport&) = delete;
  [[nodiscard]] int num_workers() const override { return static_cast<int>(sockets_.size()); }

 protected:
  void send_bytes(int r, std::vector<std::uint8_t> bytes) override;
  std::vector<std::uint8_t> receive_bytes(int r) override;

 private:
  std::vector<int> sockets_;
};

/// Opens a listening socket; port 0 picks a free one, reported in `bound`.
int listen_tcp(const std::string& host, int port, int& bound);
/// Accepts one master connection on `listen_fd` and serves it until
/// Shutdown or disconnect. Closes `listen_fd`.
void serve_worker(int listen_fd);

/// R workers on loopback ports, each served by its own thread.
class LoopbackWorkers {
 public:
  explicit LoopbackWorkers(int R);
  ~LoopbackWorkers();
  LoopbackWorkers(const LoopbackWorkers&) = delete;
  LoopbackWorkers& operator=(const LoopbackWorkers&) = delete;
  [[nodiscard]] const std::vector<std::string>& endpoints() const { return endpoints_; }

 private:
  std::vector<std::string> endpoints_;
  std::vector<std::thread> threads_;
};

}  // namespace dibc
