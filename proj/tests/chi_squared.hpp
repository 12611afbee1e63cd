#pragma once

#include <cstddef>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

namespace chadkit::fixtures {

struct ChiSquared {
  double statistic = 0.0;
  double critical = 0.0;  // upper alpha quantile
  bool pass() const { return statistic <= critical; }
};

// Pearson goodness of fit of observed counts against expected probabilities.
inline ChiSquared chi_squared_test(const std::vector<std::size_t>& observed,
                                   const std::vector<double>& probs, double alpha) {
  std::size_t n = 0;
  for (auto o : observed) n += o;
  ChiSquared out;
  std::size_t cells = 0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    const double e = probs[i] * static_cast<double>(n);
    out.statistic += (observed[i] - e) * (observed[i] - e) / e;
    ++cells;
  }
  const boost::math::chi_squared dist(static_cast<double>(cells - 1));
  out.critical = boost::math::quantile(boost::math::complement(dist, alpha));
  return out;
}

}  // namespace chadkit::fixtures
