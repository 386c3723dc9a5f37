#pragma once

#include <array>
#include <cstdint>

namespace tailfactor {

/// Philox4x32-10 block function (Salmon et al. 2011 parameters).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// Splitmix64 finaliser applied to (seed, index): independent seeds for
/// replications and restarts.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

/// Counter-based stream keyed by (seed, stream id). Two streams with the
/// same key always produce the same sequence regardless of platform or of
/// what other streams have drawn.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64();
  /// Uniform on the open interval (0, 1).
  double uniform();
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }
  double student_t(double dof);
  double beta(double a, double b);
  /// +1 or -1 with equal probability.
  double rademacher();
  /// V^(-1/lambda) with V uniform: the Pareto law with tail quantile x^(1/lambda).
  double pareto(double lambda);

 private:
  std::array<std::uint32_t, 2> key_;
  std::uint32_t stream_lo_;
  std::uint32_t stream_hi_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int used_ = 4;
};

}  // namespace tailfactor
