#pragma once

#include <span>
#include <string>
#include <vector>

namespace irtvuong {

// Distribution of sum_i weights[i] * Z_i^2 with Z_i iid N(0, 1).
struct WeightedChiSq {
  std::vector<double> weights;
};

// P(sum lambda_i Z_i^2 > x) by Imhof's inversion of the characteristic
// function. Zero weights are ignored; with no nonzero weight the result is
// the degenerate indicator 1{x < 0}. Tails whose Chernoff bound is below
// 1e-16 are returned as exactly 0 (or 1 for the complementary side).
double upper_tail(std::span<const double> weights, double x);
double upper_tail(const WeightedChiSq& dist, double x);

// Fixed-precision rendering of a p-value; values below 1e-12 print as
// "< 1e-12".
std::string format_p_value(double p);

}  // namespace irtvuong
