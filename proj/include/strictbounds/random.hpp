#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace strictbounds {

using Engine = std::mt19937_64;

/// Number of Monte Carlo replicates that share one generator stream.
/// Replicate i always lives in block i / kReplicateBlock, so results do not
/// depend on how blocks are spread over threads.
inline constexpr std::size_t kReplicateBlock = 4096;

/// A seed plus a deterministic family of independent substreams.
///
/// Substream `k` of seed `s` is a pure function of (s, k): the 128 bits are
/// fed through std::seed_seq, which decorrelates neighbouring indices.
class StreamFamily {
 public:
  explicit StreamFamily(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  Engine stream(std::uint64_t index) const {
    std::seed_seq seq{lo(seed_), hi(seed_), lo(index), hi(index), 0x9e3779b9u};
    return Engine(seq);
  }

  /// A child family, used to give separate experiment stages their own seeds.
  StreamFamily child(std::uint64_t tag) const {
    Engine e = stream(0xffff'0000'0000'0000ULL ^ tag);
    return StreamFamily(e());
  }

 private:
  static std::uint32_t lo(std::uint64_t v) { return static_cast<std::uint32_t>(v); }
  static std::uint32_t hi(std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); }

  std::uint64_t seed_;
};

/// Fills `out` with i.i.d. standard normals.
inline void fill_standard_normal(Engine& engine, Eigen::Ref<Eigen::VectorXd> out) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = normal(engine);
}

}  // namespace strictbounds
