#include "saql/stats.hpp"

#include <algorithm>
#include <stdexcept>

namespace saql {

double kolmogorov_tail(double lambda) {
  // Below 0.2 the tail equals 1 to double precision, and the alternating
  // series converges too slowly to be useful there.
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(sum, 0.0, 1.0);
}

KsResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample: empty sample");
  std::vector<double> xa(a.begin(), a.end());
  std::vector<double> xb(b.begin(), b.end());
  std::sort(xa.begin(), xa.end());
  std::sort(xb.begin(), xb.end());

  const double na = static_cast<double>(xa.size());
  const double nb = static_cast<double>(xb.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < xa.size() && j < xb.size()) {
    const double x = std::min(xa[i], xb[j]);
    while (i < xa.size() && xa[i] <= x) ++i;
    while (j < xb.size() && xb[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }

  const double ne = na * nb / (na + nb);
  const double sq = std::sqrt(ne);
  // Stephens' small-sample correction.
  const double lambda = (sq + 0.12 + 0.11 / sq) * d;
  return {d, kolmogorov_tail(lambda)};
}

double mean(std::span<const double> x) {
  if (x.empty()) throw std::invalid_argument("mean: empty sample");
  CompensatedSum s;
  for (double v : x) s.add(v);
  return s.value() / static_cast<double>(x.size());
}

double sample_variance(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = mean(x);
  CompensatedSum s;
  for (double v : x) s.add((v - m) * (v - m));
  return s.value() / static_cast<double>(x.size() - 1);
}

}  // namespace saql
