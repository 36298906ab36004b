#include "twinbeam/statistics.hpp"

#include <cmath>

#include "twinbeam/errors.hpp"

namespace twinbeam {

namespace {

double divisor(std::size_t n, VarianceConvention conv) {
  require(n >= 2, ErrorCode::invalid_argument, "need at least 2 samples for a variance");
  return conv == VarianceConvention::unbiased ? static_cast<double>(n - 1)
                                              : static_cast<double>(n);
}

}  // namespace

double mean(std::span<const double> x) {
  require(!x.empty(), ErrorCode::invalid_argument, "mean of an empty series");
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

double variance(std::span<const double> x, VarianceConvention conv) {
  return covariance(x, x, conv);
}

double covariance(std::span<const double> x, std::span<const double> y, VarianceConvention conv) {
  require(x.size() == y.size(), ErrorCode::invalid_argument, "series lengths differ");
  const double d = divisor(x.size(), conv);
  const double mx = mean(x);
  const double my = mean(y);
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) s += (x[k] - mx) * (y[k] - my);
  return s / d;
}

double difference_variance(std::span<const double> x, std::span<const double> y, double scale,
                           VarianceConvention conv) {
  require(x.size() == y.size(), ErrorCode::invalid_argument, "series lengths differ");
  const double d = divisor(x.size(), conv);
  double m = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) m += x[k] - scale * y[k];
  m /= static_cast<double>(x.size());
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double e = x[k] - scale * y[k] - m;
    s += e * e;
  }
  return s / d;
}

}  // namespace twinbeam
