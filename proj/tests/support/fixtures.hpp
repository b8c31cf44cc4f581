#pragma once

#include <algorithm>
#include <functional>
#include <random>
#include <vector>

#include <irtvuong/models.hpp>

namespace fixture {

// Valid parameter vector for any spec: slopes near 1, intercepts strictly
// decreasing within each item.
inline irtvuong::ParameterVector random_params(const irtvuong::ModelSpec& spec, std::mt19937_64& rng) {
  irtvuong::ParameterLayout layout(spec);
  std::normal_distribution<double> z(0.0, 1.0);
  irtvuong::UnpackedParams up;
  for (int j = 0; j < spec.n_items(); ++j) {
    irtvuong::ItemParams it;
    it.slopes.resize(spec.n_dims);
    for (int m = 0; m < spec.n_dims; ++m) it.slopes[m] = std::exp(0.3 * z(rng));
    std::vector<double> b(static_cast<std::size_t>(spec.categories[static_cast<std::size_t>(j)] - 1));
    for (auto& v : b) v = 1.5 * z(rng);
    std::sort(b.begin(), b.end(), std::greater<>());
    for (std::size_t k = 1; k < b.size(); ++k) b[k] = std::min(b[k], b[k - 1] - 0.2);
    it.intercepts = Eigen::Map<Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
    up.items.push_back(it);
  }
  up.variance = std::exp(0.3 * z(rng));
  return layout.pack(up);
}

// Central finite-difference gradient.
inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double h) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Eigen::VectorXd up = x, dn = x;
    up[i] += h;
    dn[i] -= h;
    g[i] = (f(up) - f(dn)) / (2.0 * h);
  }
  return g;
}

}  // namespace fixture
