#pragma once

#include <cstdint>
#include <span>

namespace twinbeam {

/// Sample-variance normalisation: unbiased divides by n-1, biased by n.
enum class VarianceConvention : std::uint8_t { unbiased, biased };

double mean(std::span<const double> x);
double variance(std::span<const double> x, VarianceConvention conv = VarianceConvention::unbiased);
double covariance(std::span<const double> x, std::span<const double> y,
                  VarianceConvention conv = VarianceConvention::unbiased);
/// Sample variance of x - scale * y.
double difference_variance(std::span<const double> x, std::span<const double> y, double scale,
                           VarianceConvention conv = VarianceConvention::unbiased);

}  // namespace twinbeam
