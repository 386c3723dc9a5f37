#include "tailfactor/evt.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "tailfactor/error.hpp"

namespace tailfactor {
namespace {

void require_k(std::size_t k, std::size_t n, const char* what) {
  if (k < 1 || k > n) {
    throw ArgumentError(std::string(what) + ": k must satisfy 1 <= k <= n=" + std::to_string(n) +
                        ", got k=" + std::to_string(k));
  }
}

// Moves the k largest values, sorted descending, to the front.
void top_k_descending(std::vector<double>& values, std::size_t k) {
  std::partial_sort(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k), values.end(),
                    std::greater<>());
}

double hill_sorted(const std::vector<double>& desc, std::size_t k) {
  const double yk = desc[k - 1];
  if (!(yk > 0.0)) {
    // y_(k) is the smallest of the top k, so it is the offender.
    throw DomainError("hill: order statistic y_(" + std::to_string(k) + ") = " + std::to_string(yk) +
                      " is not positive");
  }
  const double log_yk = std::log(yk);
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) sum += std::log(desc[i]) - log_yk;
  return sum / static_cast<double>(k);
}

}  // namespace

double order_statistic_quantile(std::vector<double> values, std::size_t k) {
  require_k(k, values.size(), "order_statistic_quantile");
  auto nth = values.begin() + static_cast<std::ptrdiff_t>(k - 1);
  std::nth_element(values.begin(), nth, values.end(), std::greater<>());
  return *nth;
}

double hill(std::vector<double> values, std::size_t k) {
  if (k < 2 || k >= values.size()) {
    throw ArgumentError("hill: k must satisfy 2 <= k < n=" + std::to_string(values.size()) +
                        ", got k=" + std::to_string(k));
  }
  top_k_descending(values, k);
  return hill_sorted(values, k);
}

double weissman_extrapolate(double u_intermediate, double gamma_hat, std::size_t k, std::size_t n,
                            double p) {
  if (n == 0 || k == 0 || k > n) throw ArgumentError("weissman_extrapolate: need 1 <= k <= n");
  const double ceiling = static_cast<double>(k) / static_cast<double>(n);
  if (!(p > 0.0 && p < ceiling)) {
    throw ArgumentError("weissman_extrapolate: p must satisfy 0 < p < k/n=" + std::to_string(ceiling) +
                        ", got p=" + std::to_string(p));
  }
  return u_intermediate * std::pow(ceiling / p, gamma_hat);
}

TailEstimates estimate_tail(std::vector<double> values, std::size_t k, bool require_gamma) {
  const std::size_t n = values.size();
  require_k(k, n, "estimate_tail");
  TailEstimates est;
  est.k = k;
  est.n = n;
  top_k_descending(values, k);
  est.u_intermediate = values[k - 1];
  if (k >= 2 && k < n && values[k - 1] > 0.0) {
    est.gamma_hat = hill_sorted(values, k);
  } else if (require_gamma) {
    if (k < 2 || k >= n) {
      throw ArgumentError("estimate_tail: Hill needs 2 <= k < n=" + std::to_string(n));
    }
    hill_sorted(values, k);  // throws DomainError with the offending statistic
  }
  return est;
}

std::vector<HillPoint> hill_plot(std::vector<double> values, std::size_t k_min, std::size_t k_max) {
  const std::size_t n = values.size();
  if (k_min < 2 || k_max < k_min || k_max >= n) {
    throw ArgumentError("hill_plot: need 2 <= k_min <= k_max < n");
  }
  std::sort(values.begin(), values.end(), std::greater<>());
  std::vector<HillPoint> out;
  double log_sum = 0.0;
  for (std::size_t i = 0; i + 1 < k_min; ++i) {
    if (!(values[i] > 0.0)) return out;
    log_sum += std::log(values[i]);
  }
  for (std::size_t k = k_min; k <= k_max; ++k) {
    const double yk = values[k - 1];
    if (!(yk > 0.0)) break;
    log_sum += std::log(yk);
    out.push_back({k, log_sum / static_cast<double>(k) - std::log(yk), yk});
  }
  return out;
}

}  // namespace tailfactor
