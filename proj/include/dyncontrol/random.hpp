#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>

namespace dyncontrol {

/// Named substreams. Each simulation unit (subject or replicate) owns one
/// engine per name, so a strategy that never draws cannot shift the noise
/// seen by the trajectory.
enum class Stream : std::uint8_t {
  kCovariates = 0,
  kInitial,
  kDiffusion,
  kMeasurement,
  kStrategy,
  kAssignment,
  kCount
};

/// splitmix64 finalizer; used only to derive well-separated engine seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of substream `id` of unit `unit` under master seed `master`.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t unit, Stream id) {
  return mix64(mix64(mix64(master) ^ (unit + 0x632be59bd9b4e019ULL)) ^
               static_cast<std::uint64_t>(id));
}

/// Hierarchical random streams: master seed -> unit -> named stream.
/// Engines are created on first use.
class StreamSet {
 public:
  StreamSet(std::uint64_t master, std::uint64_t unit) : master_(master), unit_(unit) {}

  std::mt19937_64& engine(Stream id) {
    auto& slot = engines_[static_cast<std::size_t>(id)];
    if (!slot) slot.emplace(derive_seed(master_, unit_, id));
    return *slot;
  }

  double normal(Stream id) {
    return normals_[static_cast<std::size_t>(id)](engine(id));
  }

  double uniform(Stream id) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(engine(id));
  }

  std::uint64_t master() const { return master_; }
  std::uint64_t unit() const { return unit_; }

 private:
  static constexpr std::size_t kN = static_cast<std::size_t>(Stream::kCount);
  std::uint64_t master_;
  std::uint64_t unit_;
  std::array<std::optional<std::mt19937_64>, kN> engines_;
  std::array<std::normal_distribution<double>, kN> normals_;
};

}  // namespace dyncontrol
