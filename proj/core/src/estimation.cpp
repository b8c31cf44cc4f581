#include "irtvuong/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>

#include <Eigen/Eigenvalues>

#include "irtvuong/errors.hpp"

namespace irtvuong {

namespace {

constexpr double kUnderflow = 1e-280;

struct ItemMap {
  std::vector<int> free;        // global indices, ascending
  std::vector<int> slot_local;  // natural slot -> local column, -1 when constant
  std::vector<char> scaled;     // natural slot is variance-scaled
  std::vector<double> base;
};

struct Evaluation {
  double value = 0.0;
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
};

double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace

struct MarginalEngine::Impl {
  ModelSpec spec;
  ParameterLayout layout;
  QuadratureGrid grid;
  int n_persons = 0;
  int J = 0;
  int M = 0;
  int Q = 0;
  int n_cats = 0;
  std::vector<int> offset;          // first category row of item j
  std::vector<int> patterns;        // U x J
  std::vector<double> counts;       // U
  std::vector<int> person_pattern;  // N
  std::vector<ItemMap> maps;

  ParameterVector x_cached;
  bool have_cache = false;
  std::vector<double> post;        // U x Q
  std::vector<double> pattern_ll;  // U
  std::vector<double> expected;    // n_cats x Q

  Impl(const ModelSpec& s, const ResponseMatrix& data, int q)
      : spec(s), layout(s) {
    if (spec.categories != data.categories())
      throw InputError("model spec does not match the data shape (items or categories differ)");
    n_persons = data.n_persons();
    J = data.n_items();
    M = spec.n_dims;
    if (q <= 0) q = default_quad_points(M);
    grid = build_grid(q, M, spec.prior_covariance());
    Q = grid.size();
    offset.resize(static_cast<std::size_t>(J));
    for (int j = 0; j < J; ++j) {
      offset[static_cast<std::size_t>(j)] = n_cats;
      n_cats += data.categories(j);
    }

    std::map<std::vector<int>, int> index;
    person_pattern.resize(static_cast<std::size_t>(n_persons));
    for (int i = 0; i < n_persons; ++i) {
      auto row = data.row(i);
      std::vector<int> key(row.begin(), row.end());
      auto [it, inserted] = index.emplace(std::move(key), static_cast<int>(counts.size()));
      if (inserted) {
        patterns.insert(patterns.end(), row.begin(), row.end());
        counts.push_back(0.0);
      }
      counts[static_cast<std::size_t>(it->second)] += 1.0;
      person_pattern[static_cast<std::size_t>(i)] = it->second;
    }

    maps.resize(static_cast<std::size_t>(J));
    for (int j = 0; j < J; ++j) {
      auto& m = maps[static_cast<std::size_t>(j)];
      m.free = item_free_parameters(layout, j);
      for (const auto& slot : layout.slots(j)) {
        int global = slot.scaled ? layout.variance_index() : slot.index;
        int local = -1;
        if (global >= 0)
          local = static_cast<int>(std::lower_bound(m.free.begin(), m.free.end(), global) - m.free.begin());
        m.slot_local.push_back(local);
        m.scaled.push_back(slot.scaled ? 1 : 0);
        m.base.push_back(slot.base);
      }
    }
  }

  int U() const { return static_cast<int>(counts.size()); }
  int cell(int u, int j) const { return patterns[static_cast<std::size_t>(u) * J + j]; }

  void prob_table(const ParameterVector& x, std::vector<double>& table) const {
    table.assign(static_cast<std::size_t>(n_cats) * Q, 0.0);
    double buf[64];
    for (int j = 0; j < J; ++j) {
      const ItemParams ip = layout.item(j, x);
      const int K = ip.categories();
      for (int q = 0; q < Q; ++q) {
        const double s = grid.nodes.row(q).dot(ip.slopes);
        detail::category_probs_at(ip.link, K, ip.intercepts.data(), s, ip.guessing, buf);
        for (int k = 0; k < K; ++k)
          table[static_cast<std::size_t>(offset[static_cast<std::size_t>(j)] + k) * Q + q] = buf[k];
      }
    }
  }

  double e_step(const ParameterVector& x) {
    if (!layout.valid(x)) throw ParameterError("parameter vector outside the valid region");
    std::vector<double> table;
    prob_table(x, table);
    const int nu = U();
    post.assign(static_cast<std::size_t>(nu) * Q, 0.0);
    pattern_ll.assign(static_cast<std::size_t>(nu), 0.0);
    expected.assign(static_cast<std::size_t>(n_cats) * Q, 0.0);
    double total = 0.0;
    for (int u = 0; u < nu; ++u) {
      double* L = post.data() + static_cast<std::size_t>(u) * Q;
      for (int q = 0; q < Q; ++q) L[q] = grid.weights[q];
      for (int j = 0; j < J; ++j) {
        const double* p = table.data() + static_cast<std::size_t>(offset[static_cast<std::size_t>(j)] + cell(u, j)) * Q;
        for (int q = 0; q < Q; ++q) L[q] *= p[q];
      }
      double f = 0.0;
      for (int q = 0; q < Q; ++q) f += L[q];
      double ll;
      if (f > kUnderflow && std::isfinite(f)) {
        ll = std::log(f);
        const double inv = 1.0 / f;
        for (int q = 0; q < Q; ++q) L[q] *= inv;
      } else {
        double mx = -std::numeric_limits<double>::infinity();
        for (int q = 0; q < Q; ++q) {
          double lq = std::log(grid.weights[q]);
          for (int j = 0; j < J; ++j)
            lq += std::log(table[static_cast<std::size_t>(offset[static_cast<std::size_t>(j)] + cell(u, j)) * Q + q]);
          L[q] = lq;
          mx = std::max(mx, lq);
        }
        if (!std::isfinite(mx))
          throw NumericalError("marginal likelihood is zero for response pattern " + std::to_string(u + 1));
        double acc = 0.0;
        for (int q = 0; q < Q; ++q) acc += std::exp(L[q] - mx);
        ll = mx + std::log(acc);
        for (int q = 0; q < Q; ++q) L[q] = std::exp(L[q] - ll);
      }
      if (!std::isfinite(ll)) throw NumericalError("non-finite marginal log-likelihood");
      pattern_ll[static_cast<std::size_t>(u)] = ll;
      const double c = counts[static_cast<std::size_t>(u)];
      total += c * ll;
      for (int j = 0; j < J; ++j) {
        double* r = expected.data() + static_cast<std::size_t>(offset[static_cast<std::size_t>(j)] + cell(u, j)) * Q;
        for (int q = 0; q < Q; ++q) r[q] += c * L[q];
      }
    }
    x_cached = x;
    have_cache = true;
    return total;
  }

  // Q(x | cached expected counts) with derivatives up to `order`.
  Evaluation evaluate(const ParameterVector& x, int order) const {
    if (!have_cache) throw NumericalError("expected counts requested before any E-step");
    const int P = layout.size();
    Evaluation ev;
    if (order >= 1) ev.grad = Eigen::VectorXd::Zero(P);
    if (order >= 2) ev.hess = Eigen::MatrixXd::Zero(P, P);
    double prob[64], d1[64 * 64];
    std::vector<double> d2;
    for (int j = 0; j < J; ++j) {
      const ItemParams ip = layout.item(j, x);
      const int K = ip.categories();
      const int R = K;
      const int n_nat = M + K - 1;
      if (order >= 2) d2.assign(static_cast<std::size_t>(K * R * R), 0.0);
      Eigen::VectorXd g_nat = Eigen::VectorXd::Zero(n_nat);
      Eigen::MatrixXd H_nat = Eigen::MatrixXd::Zero(n_nat, n_nat);
      Eigen::VectorXd g_rho(R);
      Eigen::MatrixXd H_rho(R, R);
      const double* rj = expected.data() + static_cast<std::size_t>(offset[static_cast<std::size_t>(j)]) * Q;
      for (int q = 0; q < Q; ++q) {
        const auto theta = grid.nodes.row(q);
        const double s = theta.dot(ip.slopes);
        if (order == 0) {
          detail::category_probs_at(ip.link, K, ip.intercepts.data(), s, ip.guessing, prob);
        } else {
          detail::log_prob_derivatives(ip.link, K, ip.intercepts.data(), s, ip.guessing, prob, d1,
                                       order >= 2 ? d2.data() : nullptr);
        }
        g_rho.setZero();
        if (order >= 2) H_rho.setZero();
        for (int k = 0; k < K; ++k) {
          const double r = rj[static_cast<std::size_t>(k) * Q + q];
          if (r == 0.0) continue;
          ev.value += r * std::log(prob[k]);
          if (order >= 1)
            for (int t = 0; t < R; ++t) g_rho[t] += r * d1[k * R + t];
          if (order >= 2)
            for (int t = 0; t < R; ++t)
              for (int v = 0; v < R; ++v) H_rho(t, v) += r * d2[static_cast<std::size_t>(k * R * R + t * R + v)];
        }
        if (order >= 1) {
          for (int m = 0; m < M; ++m) g_nat[m] += theta[m] * g_rho[0];
          for (int l = 1; l < R; ++l) g_nat[M + l - 1] += g_rho[l];
        }
        if (order >= 2) {
          for (int m = 0; m < M; ++m) {
            for (int n = 0; n < M; ++n) H_nat(m, n) += theta[m] * theta[n] * H_rho(0, 0);
            for (int l = 1; l < R; ++l) {
              const double v = theta[m] * H_rho(0, l);
              H_nat(m, M + l - 1) += v;
              H_nat(M + l - 1, m) += v;
            }
          }
          for (int l = 1; l < R; ++l)
            for (int l2 = 1; l2 < R; ++l2) H_nat(M + l - 1, M + l2 - 1) += H_rho(l, l2);
        }
      }
      if (order == 0) continue;

      const ItemMap& map = maps[static_cast<std::size_t>(j)];
      const int n_loc = static_cast<int>(map.free.size());
      Eigen::MatrixXd Jac = Eigen::MatrixXd::Zero(n_nat, n_loc);
      const double sd = layout.variance_index() >= 0 ? std::sqrt(x[layout.variance_index()]) : 1.0;
      for (int t = 0; t < n_nat; ++t) {
        const int loc = map.slot_local[static_cast<std::size_t>(t)];
        if (loc < 0) continue;
        Jac(t, loc) += map.scaled[static_cast<std::size_t>(t)] ? map.base[static_cast<std::size_t>(t)] / (2.0 * sd) : 1.0;
      }
      const Eigen::VectorXd g_loc = Jac.transpose() * g_nat;
      for (int a = 0; a < n_loc; ++a) ev.grad[map.free[static_cast<std::size_t>(a)]] += g_loc[a];
      if (order >= 2) {
        Eigen::MatrixXd H_loc = Jac.transpose() * H_nat * Jac;
        for (int t = 0; t < n_nat; ++t) {
          if (!map.scaled[static_cast<std::size_t>(t)]) continue;
          const int loc = map.slot_local[static_cast<std::size_t>(t)];
          H_loc(loc, loc) += g_nat[t] * (-map.base[static_cast<std::size_t>(t)] / (4.0 * sd * sd * sd));
        }
        for (int a = 0; a < n_loc; ++a)
          for (int b = 0; b < n_loc; ++b)
            ev.hess(map.free[static_cast<std::size_t>(a)], map.free[static_cast<std::size_t>(b)]) += H_loc(a, b);
      }
    }
    return ev;
  }

  ParameterVector m_step(const ParameterVector& start, int max_newton) const {
    ParameterVector x = start;
    Evaluation ev = evaluate(x, 2);
    const int P = layout.size();
    for (int it = 0; it < max_newton; ++it) {
      Eigen::MatrixXd neg = -ev.hess;
      Eigen::LLT<Eigen::MatrixXd> llt(neg);
      double lambda = 1e-8 * (1.0 + neg.diagonal().cwiseAbs().maxCoeff());
      int tries = 0;
      while (llt.info() != Eigen::Success && tries < 30) {
        llt.compute(neg + lambda * Eigen::MatrixXd::Identity(P, P));
        lambda *= 10.0;
        ++tries;
      }
      if (llt.info() != Eigen::Success) break;
      Eigen::VectorXd d = llt.solve(ev.grad);
      if (!d.allFinite()) break;
      const double dmax = d.cwiseAbs().maxCoeff();
      if (dmax > 5.0) d *= 5.0 / dmax;
      double t = 1.0;
      bool accepted = false;
      ParameterVector xn;
      const double slack = 1e-14 * std::max(1.0, std::abs(ev.value));
      for (int h = 0; h < 40; ++h, t *= 0.5) {
        xn = x + t * d;
        if (!layout.valid(xn)) continue;
        const double fn = evaluate(xn, 0).value;
        if (std::isfinite(fn) && fn >= ev.value - slack) {
          accepted = true;
          break;
        }
      }
      if (!accepted) break;
      const double step = (t * d).cwiseAbs().maxCoeff();
      x = xn;
      if (step < 1e-9) break;
      ev = evaluate(x, 2);
    }
    return x;
  }

  Eigen::MatrixXd scores() const {
    if (!have_cache) throw NumericalError("scores requested before any E-step");
    const int P = layout.size();
    const int nu = U();
    Eigen::MatrixXd pattern_scores = Eigen::MatrixXd::Zero(nu, P);
    double prob[64], d1[64 * 64];
    std::vector<double> D;
    for (int j = 0; j < J; ++j) {
      const ItemParams ip = layout.item(j, x_cached);
      const int K = ip.categories();
      const int n_nat = M + K - 1;
      const ItemMap& map = maps[static_cast<std::size_t>(j)];
      const int n_loc = static_cast<int>(map.free.size());
      if (n_loc == 0) continue;
      const double sd =
          layout.variance_index() >= 0 ? std::sqrt(x_cached[layout.variance_index()]) : 1.0;
      // D[k][q][loc]
      D.assign(static_cast<std::size_t>(K) * Q * n_loc, 0.0);
      std::vector<double> nat(static_cast<std::size_t>(n_nat));
      for (int q = 0; q < Q; ++q) {
        const auto theta = grid.nodes.row(q);
        const double s = theta.dot(ip.slopes);
        detail::log_prob_derivatives(ip.link, K, ip.intercepts.data(), s, ip.guessing, prob, d1, nullptr);
        for (int k = 0; k < K; ++k) {
          for (int m = 0; m < M; ++m) nat[static_cast<std::size_t>(m)] = theta[m] * d1[k * K];
          for (int l = 1; l < K; ++l) nat[static_cast<std::size_t>(M + l - 1)] = d1[k * K + l];
          double* out = D.data() + (static_cast<std::size_t>(k) * Q + q) * n_loc;
          for (int t = 0; t < n_nat; ++t) {
            const int loc = map.slot_local[static_cast<std::size_t>(t)];
            if (loc < 0) continue;
            const double jac = map.scaled[static_cast<std::size_t>(t)] ? map.base[static_cast<std::size_t>(t)] / (2.0 * sd) : 1.0;
            out[loc] += jac * nat[static_cast<std::size_t>(t)];
          }
        }
      }
      std::vector<double> acc(static_cast<std::size_t>(n_loc));
      for (int u = 0; u < nu; ++u) {
        std::fill(acc.begin(), acc.end(), 0.0);
        const double* pu = post.data() + static_cast<std::size_t>(u) * Q;
        const double* Dk = D.data() + static_cast<std::size_t>(cell(u, j)) * Q * n_loc;
        for (int q = 0; q < Q; ++q) {
          const double w = pu[q];
          const double* row = Dk + static_cast<std::size_t>(q) * n_loc;
          for (int a = 0; a < n_loc; ++a) acc[static_cast<std::size_t>(a)] += w * row[a];
        }
        for (int a = 0; a < n_loc; ++a) pattern_scores(u, map.free[static_cast<std::size_t>(a)]) += acc[static_cast<std::size_t>(a)];
      }
    }
    Eigen::MatrixXd out(n_persons, P);
    for (int i = 0; i < n_persons; ++i) out.row(i) = pattern_scores.row(person_pattern[static_cast<std::size_t>(i)]);
    return out;
  }

  Eigen::VectorXd casewise() const {
    Eigen::VectorXd out(n_persons);
    for (int i = 0; i < n_persons; ++i)
      out[i] = pattern_ll[static_cast<std::size_t>(person_pattern[static_cast<std::size_t>(i)])];
    return out;
  }

  // Oakes identity: -d2l = -(d2Q/dx2 + d2Q/dx dx'), the mixed term by
  // central differences of the Fisher gradient in the conditioning argument.
  Eigen::MatrixXd oakes(const ParameterVector& xhat) {
    const int P = layout.size();
    e_step(xhat);
    const Eigen::MatrixXd H = evaluate(xhat, 2).hess;
    Eigen::MatrixXd mixed(P, P);
    for (int p = 0; p < P; ++p) {
      const double h = 1e-4 * std::max(1.0, std::abs(xhat[p]));
      ParameterVector xp = xhat, xm = xhat;
      xp[p] += h;
      xm[p] -= h;
      const bool vp = layout.valid(xp), vm = layout.valid(xm);
      Eigen::VectorXd gp, gm;
      double width = 0.0;
      if (vp) {
        e_step(xp);
        gp = evaluate(xhat, 1).grad;
        width += h;
      }
      if (vm) {
        e_step(xm);
        gm = evaluate(xhat, 1).grad;
        width += h;
      }
      if (!vp || !vm) {
        e_step(xhat);
        const Eigen::VectorXd g0 = evaluate(xhat, 1).grad;
        if (!vp) gp = g0;
        if (!vm) gm = g0;
      }
      if (width == 0.0) throw NumericalError("cannot perturb parameter " + layout.labels()[static_cast<std::size_t>(p)]);
      mixed.col(p) = (gp - gm) / width;
    }
    e_step(xhat);
    Eigen::MatrixXd info = -(H + mixed);
    return 0.5 * (info + info.transpose());
  }
};

MarginalEngine::MarginalEngine(const ModelSpec& spec, const ResponseMatrix& data, int quad_points)
    : impl_(std::make_unique<Impl>(spec, data, quad_points)) {}
MarginalEngine::~MarginalEngine() = default;
MarginalEngine::MarginalEngine(MarginalEngine&&) noexcept = default;
MarginalEngine& MarginalEngine::operator=(MarginalEngine&&) noexcept = default;

const ParameterLayout& MarginalEngine::layout() const { return impl_->layout; }
const QuadratureGrid& MarginalEngine::grid() const { return impl_->grid; }
int MarginalEngine::n_patterns() const { return impl_->U(); }
double MarginalEngine::e_step(const ParameterVector& x) { return impl_->e_step(x); }
Eigen::VectorXd MarginalEngine::casewise_loglik() const { return impl_->casewise(); }
double MarginalEngine::q_value(const ParameterVector& x) const { return impl_->evaluate(x, 0).value; }
Eigen::VectorXd MarginalEngine::q_gradient(const ParameterVector& x) const { return impl_->evaluate(x, 1).grad; }
Eigen::MatrixXd MarginalEngine::q_hessian(const ParameterVector& x) const { return impl_->evaluate(x, 2).hess; }
ParameterVector MarginalEngine::m_step(const ParameterVector& start, int max_newton) const {
  return impl_->m_step(start, max_newton);
}
Eigen::MatrixXd MarginalEngine::scores() const { return impl_->scores(); }
Eigen::MatrixXd MarginalEngine::observed_information(const ParameterVector& x) { return impl_->oakes(x); }

// ---------------------------------------------------------------------------

double condition_number(const Eigen::MatrixXd& symmetric) {
  if (symmetric.size() == 0) return 1.0;
  if (!symmetric.allFinite()) return std::numeric_limits<double>::infinity();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(symmetric, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

LoglikResult marginal_loglik(const ModelSpec& spec, const ParameterVector& params,
                             const ResponseMatrix& data, int quad_points) {
  spec.validate();
  MarginalEngine engine(spec, data, quad_points);
  engine.e_step(params);
  LoglikResult out;
  out.casewise = engine.casewise_loglik();
  out.total = out.casewise.sum();
  return out;
}

ParameterVector start_values(const ModelSpec& spec, const ResponseMatrix& data) {
  const ParameterLayout layout(spec);
  if (spec.categories != data.categories())
    throw InputError("model spec does not match the data shape (items or categories differ)");
  const FrequencyTable freq = summarize(data);
  const double N = data.n_persons();
  UnpackedParams start;
  start.variance = 1.0;
  for (int j = 0; j < spec.n_items(); ++j) {
    ItemParams ip;
    const int K = spec.categories[static_cast<std::size_t>(j)];
    ip.link = layout.link(j);
    ip.slopes.resize(spec.n_dims);
    for (int m = 0; m < spec.n_dims; ++m) {
      const auto& c = spec.slopes[static_cast<std::size_t>(j)][static_cast<std::size_t>(m)];
      ip.slopes[m] = c.kind == SlopeConstraint::Kind::Fixed ? c.value : (m == 0 ? 1.0 : 0.5);
    }
    ip.intercepts.resize(K - 1);
    const auto& n = freq[static_cast<std::size_t>(j)];
    if (ip.link == Link::PartialCredit) {
      for (int k = 0; k + 1 < K; ++k)
        ip.intercepts[k] = std::log((n[static_cast<std::size_t>(k + 1)] + 0.5) / (n[static_cast<std::size_t>(k)] + 0.5));
    } else {
      double upper = 0.0;
      for (int k = K - 1; k >= 1; --k) {
        upper += static_cast<double>(n[static_cast<std::size_t>(k)]);
        ip.intercepts[k - 1] = logit((upper + 0.5) / (N + 1.0));
      }
      for (int k = 1; k + 1 < K; ++k)
        ip.intercepts[k] = std::min(ip.intercepts[k], ip.intercepts[k - 1] - 0.05);
    }
    start.items.push_back(std::move(ip));
  }
  ParameterVector x = layout.pack(start);
  // Equality classes take the value of their first member, which pack()
  // already wrote; slopes default to 1 there as well.
  return x;
}

namespace {

std::vector<std::string> boundary_flags(const ParameterLayout& layout, const ParameterVector& x,
                                        const ResponseMatrix& data) {
  std::vector<std::string> flags;
  const FrequencyTable freq = summarize(data);
  for (int j = 0; j < layout.n_items(); ++j) {
    const ItemParams ip = layout.item(j, x);
    for (Eigen::Index m = 0; m < ip.slopes.size(); ++m)
      if (std::abs(ip.slopes[m]) > 25.0)
        flags.push_back("item" + std::to_string(j + 1) + ".a" + std::to_string(m + 1) + " |slope| > 25");
    for (Eigen::Index k = 0; k < ip.intercepts.size(); ++k)
      if (std::abs(ip.intercepts[k]) > 30.0)
        flags.push_back("item" + std::to_string(j + 1) + ".d" + std::to_string(k + 1) + " |intercept| > 30");
    const auto& n = freq[static_cast<std::size_t>(j)];
    for (std::size_t k = 0; k < n.size(); ++k)
      if (n[k] == 0)
        flags.push_back("item" + std::to_string(j + 1) + " category " + std::to_string(k) + " unobserved");
  }
  if (layout.variance_index() >= 0 && x[layout.variance_index()] < 1e-4)
    flags.push_back("latent variance near zero");
  return flags;
}

bool diverging(const ParameterLayout& layout, const ParameterVector& x, double bound) {
  for (int j = 0; j < layout.n_items(); ++j) {
    const ItemParams ip = layout.item(j, x);
    if (ip.slopes.cwiseAbs().maxCoeff() > bound) return true;
    if (ip.intercepts.size() && ip.intercepts.cwiseAbs().maxCoeff() > bound) return true;
  }
  return false;
}

struct PolishOutcome {
  bool converged = false;
  int steps = 0;
  double last_step = 0.0;
  double max_abs_gradient = 0.0;
};

// Newton iterations on the marginal loglik from x (updated in place). The
// gradient comes from the Fisher identity, the curvature from the Oakes
// information, ridge-regularized until positive definite.
PolishOutcome newton_polish(MarginalEngine& engine, ParameterVector& x, double& ll, double grad_tol,
                            double param_tol, int max_steps, std::vector<double>& trace) {
  PolishOutcome out;
  const ParameterLayout& layout = engine.layout();
  const int P = layout.size();
  double last_step = std::numeric_limits<double>::infinity();
  for (int it = 0; it <= max_steps; ++it) {
    ll = engine.e_step(x);
    const Eigen::VectorXd g = engine.q_gradient(x);
    out.max_abs_gradient = P ? g.cwiseAbs().maxCoeff() : 0.0;
    if (out.max_abs_gradient < grad_tol && last_step < param_tol) {
      out.converged = true;
      break;
    }
    if (it == max_steps) break;
    const Eigen::MatrixXd info = engine.observed_information(x);
    Eigen::LLT<Eigen::MatrixXd> llt(info);
    double ridge = 1e-8 * (1.0 + info.diagonal().cwiseAbs().maxCoeff());
    for (int tries = 0; llt.info() != Eigen::Success && tries < 30; ++tries, ridge *= 10.0)
      llt.compute(info + ridge * Eigen::MatrixXd::Identity(P, P));
    if (llt.info() != Eigen::Success) break;
    Eigen::VectorXd d = llt.solve(g);
    if (!d.allFinite()) break;
    const double dmax = d.cwiseAbs().maxCoeff();
    if (dmax > 5.0) d *= 5.0 / dmax;
    const double slack = 1e-12 * std::max(1.0, std::abs(ll));
    bool accepted = false;
    double t = 1.0;
    for (int h = 0; h < 30; ++h, t *= 0.5) {
      const ParameterVector xn = x + t * d;
      if (!layout.valid(xn)) continue;
      double lln = -std::numeric_limits<double>::infinity();
      try {
        lln = engine.e_step(xn);
      } catch (const Error&) {
      }
      if (std::isfinite(lln) && lln >= ll - slack) {
        x = xn;
        ll = lln;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    last_step = t * d.cwiseAbs().maxCoeff();
    out.last_step = last_step;
    ++out.steps;
    trace.push_back(ll);
  }
  return out;
}

}  // namespace

FittedModel fit_em(const ModelSpec& spec, const ResponseMatrix& data, const EmConfig& config) {
  spec.validate_fittable();
  if (config.max_cycles < 1) throw InputError("max_cycles must be positive");
  if (!(config.param_tol > 0.0)) throw InputError("param_tol must be positive");
  if (!(config.divergence_bound > 0.0)) throw InputError("divergence_bound must be positive");
  MarginalEngine engine(spec, data, config.quad_points);
  const ParameterLayout& layout = engine.layout();

  FittedModel fit;
  fit.spec = spec;
  fit.labels = layout.labels();
  fit.n_params = layout.size();
  fit.n_persons = data.n_persons();
  fit.quad_points = engine.grid().points_per_dim;
  fit.data_fingerprint = data.fingerprint();
  Convergence& conv = fit.convergence;

  const double grad_tol = config.grad_tol_factor * std::sqrt(static_cast<double>(data.n_persons()));
  ParameterVector x0 = start_values(spec, data);
  double ll0 = engine.e_step(x0);
  conv.loglik_trace.push_back(ll0);

  int cycles = 0;
  int next_polish = config.polish_after > 0 ? config.polish_after : std::numeric_limits<int>::max();
  while (cycles < config.max_cycles) {
    if (diverging(layout, x0, config.divergence_bound)) {
      conv.diverged = true;
      break;
    }
    if (cycles >= next_polish) {
      ParameterVector xp = x0;
      double llp = ll0;
      const PolishOutcome polish =
          newton_polish(engine, xp, llp, grad_tol, config.param_tol, 20, conv.loglik_trace);
      cycles += polish.steps;
      conv.newton_steps += polish.steps;
      if (polish.steps > 0 || polish.converged) {
        x0 = xp;
        ll0 = llp;
        conv.max_param_change = polish.last_step;
        conv.max_abs_gradient = polish.max_abs_gradient;
      }
      if (polish.converged) {
        conv.converged = true;
        break;
      }
      engine.e_step(x0);
      next_polish = cycles + config.polish_after;
      if (cycles >= config.max_cycles) break;
    }
    const Eigen::VectorXd grad0 = engine.q_gradient(x0);
    const ParameterVector x1 = engine.m_step(x0, config.max_newton);
    ++cycles;
    conv.max_param_change = x1.size() ? (x1 - x0).cwiseAbs().maxCoeff() : 0.0;
    conv.max_abs_gradient = grad0.size() ? grad0.cwiseAbs().maxCoeff() : 0.0;
    if (conv.max_param_change < config.param_tol && conv.max_abs_gradient < grad_tol) {
      x0 = x1;
      conv.converged = true;
      break;
    }
    const double ll1 = engine.e_step(x1);
    conv.loglik_trace.push_back(ll1);
    if (!config.accelerate || cycles >= config.max_cycles) {
      x0 = x1;
      ll0 = ll1;
      continue;
    }
    const ParameterVector x2 = engine.m_step(x1, config.max_newton);
    ++cycles;
    const double ll2 = engine.e_step(x2);
    conv.loglik_trace.push_back(ll2);

    const Eigen::VectorXd r = x1 - x0;
    const Eigen::VectorXd v = x2 - x1 - r;
    const double rn = r.norm(), vn = v.norm();
    bool accepted = false;
    if (vn > 0.0 && rn > 0.0) {
      double alpha = std::min(-rn / vn, -1.0);
      for (int tries = 0; tries < 8 && alpha < -1.0 + 1e-12; ++tries) {
        const ParameterVector xp = x0 - 2.0 * alpha * r + alpha * alpha * v;
        if (layout.valid(xp)) {
          double llp = -std::numeric_limits<double>::infinity();
          try {
            llp = engine.e_step(xp);
          } catch (const Error&) {
          }
          if (std::isfinite(llp) && llp >= ll2) {
            x0 = xp;
            ll0 = llp;
            accepted = true;
            break;
          }
        }
        alpha = (alpha - 1.0) / 2.0;
      }
    }
    if (!accepted) {
      x0 = x2;
      ll0 = engine.e_step(x2);
    }
    if (accepted) conv.loglik_trace.push_back(ll0);
  }
  conv.cycles = cycles;

  const double final_ll = engine.e_step(x0);
  fit.estimates = x0;
  fit.casewise_loglik = engine.casewise_loglik();
  fit.total_loglik = 0.0;
  for (Eigen::Index i = 0; i < fit.casewise_loglik.size(); ++i) fit.total_loglik += fit.casewise_loglik[i];
  if (conv.loglik_trace.back() != final_ll) conv.loglik_trace.push_back(final_ll);
  fit.casewise_scores = engine.scores();
  conv.max_abs_gradient = fit.n_params ? fit.casewise_scores.colwise().sum().cwiseAbs().maxCoeff() : 0.0;
  conv.boundary_flags = boundary_flags(layout, x0, data);
  if (conv.diverged) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "estimates diverging beyond %g", config.divergence_bound);
    conv.boundary_flags.push_back(buf);
  }

  if (config.compute_information && fit.n_params > 0) {
    fit.observed_info = engine.observed_information(x0);
    conv.info_condition_number = condition_number(fit.observed_info);
    conv.info_singular = !std::isfinite(conv.info_condition_number);
  } else {
    fit.observed_info = Eigen::MatrixXd::Zero(fit.n_params, fit.n_params);
    conv.info_condition_number = std::numeric_limits<double>::infinity();
    conv.info_singular = fit.n_params > 0;
  }
  return fit;
}

Eigen::MatrixXd casewise_scores(const FittedModel& fitted, const ResponseMatrix& data) {
  if (!fitted.convergence.converged) throw NumericalError("scores requested for a non-converged fit");
  MarginalEngine engine(fitted.spec, data, fitted.quad_points);
  engine.e_step(fitted.estimates);
  return engine.scores();
}

Eigen::MatrixXd observed_information(const FittedModel& fitted, const ResponseMatrix& data) {
  if (!fitted.convergence.converged)
    throw NumericalError("information requested for a non-converged fit");
  MarginalEngine engine(fitted.spec, data, fitted.quad_points);
  return engine.observed_information(fitted.estimates);
}

}  // namespace irtvuong
