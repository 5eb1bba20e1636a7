#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace dibc {

/// Counter-based Philox4x32-10 generator.
///
/// The state is a 64-bit key plus a 128-bit counter whose upper half names a
/// stream. `split(id)` derives an independent child generator, so worker r
/// draws from `Rng(master_seed).split(r)` no matter how work is scheduled.
/// Output is identical on every platform; all variate transforms in this
/// library are written against this engine instead of <random> distributions.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0, std::uint64_t stream = 0) noexcept;

  [[nodiscard]] Rng split(std::uint64_t id) const noexcept;

  result_type operator()() noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  /// Uniform on the open interval (0, 1).
  double uniform() noexcept;
  /// Standard normal (Box-Muller, second variate cached).
  double normal() noexcept;
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) noexcept;

  [[nodiscard]] std::uint64_t seed() const noexcept { return key_; }
  [[nodiscard]] std::uint64_t stream() const noexcept { return stream_; }

 private:
  void refill() noexcept;

  std::uint64_t key_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::array<std::uint64_t, 2> buffer_{};
  int buffered_ = 0;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace dibc
