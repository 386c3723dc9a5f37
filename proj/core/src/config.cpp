#include "tailfactor/config.hpp"

#include <cmath>
#include <sstream>

#include "tailfactor/error.hpp"

namespace tailfactor {

void TailConfig::validate(std::size_t n_cells) const {
  std::ostringstream msg;
  msg.precision(17);
  if (!(std::isfinite(lower) && std::isfinite(upper))) {
    throw ArgumentError("bounds m and M must be finite");
  }
  if (upper < lower) {
    msg << "infeasible bounds: upper bound M=" << upper << " is below lower bound m=" << lower;
    throw ArgumentError(msg.str());
  }
  if (!(lower > 0.0)) {
    msg << "lower bound m must be positive, got m=" << lower;
    throw ArgumentError(msg.str());
  }
  if (lower > 1.0 || upper < 1.0) {
    msg << "bounds must satisfy m <= 1 <= M, got m=" << lower << " and M=" << upper;
    throw ArgumentError(msg.str());
  }
  if (k < 1 || k >= n_cells) {
    msg << "k must satisfy 1 <= k < N*T=" << n_cells << ", got k=" << k;
    throw ArgumentError(msg.str());
  }
  if (extreme_level) {
    const double p = *extreme_level;
    const double ceiling = static_cast<double>(k) / static_cast<double>(n_cells);
    if (!(p > 0.0 && p < ceiling)) {
      msg << "extreme level p must satisfy 0 < p < k/(NT)=" << ceiling << ", got p=" << p;
      throw ArgumentError(msg.str());
    }
  }
  if (!(central_level > 0.0 && central_level < 1.0)) {
    msg << "central level tau* must lie in (0, 1), got " << central_level;
    throw ArgumentError(msg.str());
  }
  if (!(ic_constant > 0.0)) {
    msg << "IC constant c must be positive, got " << ic_constant;
    throw ArgumentError(msg.str());
  }
  if (max_factors < 1) {
    msg << "r_max must be at least 1, got " << max_factors;
    throw ArgumentError(msg.str());
  }
}

void FitOptions::validate() const {
  if (max_outer_iters < 1) throw ArgumentError("max_outer_iters must be >= 1");
  if (!(loss_rel_tol > 0.0)) throw ArgumentError("loss_rel_tol must be > 0");
  if (inner_grid < 0) throw ArgumentError("inner_grid must be >= 0");
  if (n_restarts < 1) throw ArgumentError("n_restarts must be >= 1");
  if (threads < 1) throw ArgumentError("threads must be >= 1");
}

std::size_t k_from_fraction(double fraction, std::size_t n_cells) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw ArgumentError("k fraction must lie in (0, 1), got " + std::to_string(fraction));
  }
  const auto k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n_cells)));
  return k < 1 ? 1 : k;
}

}  // namespace tailfactor
