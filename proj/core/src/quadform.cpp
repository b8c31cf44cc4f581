#include "irtvuong/quadform.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/minima.hpp>

#include "irtvuong/errors.hpp"

namespace irtvuong {

namespace {

using boost::math::quadrature::gauss_kronrod;

constexpr double kPanelTol = 1e-12;  // relative; 1e-14 sits below roundoff
constexpr double kEnvelopeTol = 1e-13;
constexpr int kMaxPanels = 20000;
constexpr double kLogNegligible = -36.8;  // log(1e-16)

struct Imhof {
  std::vector<double> lambda;
  double x;

  double operator()(double u) const {
    if (u == 0.0) {
      double s = 0.0;
      for (double l : lambda) s += l;
      return 0.5 * (s - x);
    }
    double theta = -0.5 * x * u;
    double log_rho = 0.0;
    for (double l : lambda) {
      theta += 0.5 * std::atan(l * u);
      log_rho += 0.25 * std::log1p(l * l * u * u);
    }
    return std::sin(theta) / (u * std::exp(log_rho));
  }

  // Bound on the integral of |integrand| beyond u. Any subset S of the
  // weights gives rho(u) >= prod_S sqrt(|l| u); the k largest are tried.
  double envelope(double u) const {
    std::vector<double> mag;
    for (double l : lambda) mag.push_back(std::abs(l));
    std::sort(mag.begin(), mag.end(), std::greater<>());
    double best = INFINITY;
    double log_prod = 0.0;
    for (std::size_t k = 1; k <= mag.size(); ++k) {
      log_prod += 0.5 * std::log(mag[k - 1]);
      const double half_k = 0.5 * static_cast<double>(k);
      best = std::min(best, std::exp(-std::log(half_k) - half_k * std::log(u) - log_prod));
    }
    return best;
  }
};

double panel(const Imhof& f, double a, double b) {
  double err = 0.0;
  return gauss_kronrod<double, 31>::integrate(f, a, b, 8, kPanelTol, &err);
}

// Wynn's epsilon algorithm over the most recent partial sums.
class WynnEpsilon {
 public:
  double push(double s) {
    sums_.push_back(s);
    if (sums_.size() > kWindow) sums_.erase(sums_.begin());
    const std::size_t n = sums_.size();
    std::vector<double> prev(n + 1, 0.0);  // column k-1
    std::vector<double> cur(sums_.begin(), sums_.end());  // column k
    double best = cur.back();
    for (std::size_t k = 0; cur.size() > 1; ++k) {
      std::vector<double> next(cur.size() - 1);
      for (std::size_t i = 0; i + 1 < cur.size(); ++i) {
        const double diff = cur[i + 1] - cur[i];
        if (std::abs(diff) < 1e-300) return best;
        next[i] = prev[i + 1] + 1.0 / diff;
      }
      prev = std::move(cur);
      cur = std::move(next);
      if (k % 2 == 1) best = cur.back();  // even columns hold estimates
    }
    return best;
  }

 private:
  static constexpr std::size_t kWindow = 16;
  std::vector<double> sums_;
};

// log of the Chernoff bound inf_t exp(-t x) E exp(t Q) on P(Q > x), over
// 0 < t < 1 / (2 max lambda). Needs a positive weight.
double log_chernoff_upper(const std::vector<double>& lambda, double x) {
  double lmax = 0.0;
  for (double l : lambda) lmax = std::max(lmax, l);
  const auto objective = [&](double t) {
    double v = -t * x;
    for (double l : lambda) v -= 0.5 * std::log1p(-2.0 * t * l);
    return v;
  };
  const double hi = (1.0 - 1e-12) / (2.0 * lmax);
  const auto best = boost::math::tools::brent_find_minima(objective, 0.0, hi, 40);
  return std::min(0.0, best.second);
}

}  // namespace

double upper_tail(std::span<const double> weights, double x) {
  if (!std::isfinite(x)) throw InputError("upper_tail needs a finite argument");
  double scale = 0.0;
  for (double w : weights) {
    if (!std::isfinite(w)) throw InputError("weights must be finite");
    scale = std::max(scale, std::abs(w));
  }
  if (scale == 0.0) return x < 0.0 ? 1.0 : 0.0;

  Imhof f;
  f.x = x / scale;
  bool any_pos = false, any_neg = false;
  for (double w : weights) {
    if (w == 0.0) continue;
    f.lambda.push_back(w / scale);
    (w > 0 ? any_pos : any_neg) = true;
  }
  if (!any_neg && f.x <= 0.0) return 1.0;
  if (!any_pos && f.x >= 0.0) return 0.0;

  // Far tails: below 1e-16 the probability is reported as 0 (or 1)
  // instead of integrating a rapidly oscillating integrand.
  if (any_pos && log_chernoff_upper(f.lambda, f.x) < kLogNegligible) return 0.0;
  if (any_neg) {
    std::vector<double> flipped;
    for (double l : f.lambda) flipped.push_back(-l);
    if (log_chernoff_upper(flipped, -f.x) < kLogNegligible) return 1.0;
  }

  const double omega = 0.5 * std::abs(f.x);
  // Region where the envelope alone certifies the remaining tail.
  double u_env = 1.0;
  while (f.envelope(u_env) > kEnvelopeTol && u_env < 1e300) u_env *= 2.0;

  // Start: geometric blocks [0,1], [1,2], [2,4], ...
  const double half_period = omega > 0.0 ? std::numbers::pi / omega : INFINITY;
  double head_end = u_env;
  if (std::isfinite(half_period) && half_period < u_env) {
    head_end = half_period * std::ceil(8.0 / half_period);
    head_end = std::min(head_end, u_env);
  }
  // Panel widths never exceed a half-period so each panel is smooth.
  double integral = 0.0;
  for (double a = 0.0; a < head_end;) {
    const double b = std::min({head_end, a + std::max(a, 1.0), a + half_period});
    integral += panel(f, a, b);
    a = b;
  }

  if (head_end < u_env) {
    WynnEpsilon wynn;
    double partial = integral;
    double estimate = wynn.push(partial);
    double previous = estimate;
    int stable = 0;
    double a = head_end;
    for (int i = 0; i < kMaxPanels && a < u_env; ++i) {
      const double b = a + half_period;
      partial += panel(f, a, b);
      a = b;
      estimate = wynn.push(partial);
      if (i > 4 && std::abs(estimate - previous) < 1e-13) {
        if (++stable >= 3) break;
      } else {
        stable = 0;
      }
      previous = estimate;
    }
    integral = a >= u_env ? partial : estimate;
  }

  const double p = 0.5 + integral / std::numbers::pi;
  return std::clamp(p, 0.0, 1.0);
}

double upper_tail(const WeightedChiSq& dist, double x) { return upper_tail(dist.weights, x); }

std::string format_p_value(double p) {
  if (p < 1e-12) return "< 1e-12";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", p);
  return buf;
}

}  // namespace irtvuong
