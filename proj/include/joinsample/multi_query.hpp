#pragma once

// Joint sampling rates for several join queries sharing tables. Each table
// (vertex) gets an effective rate eps_v and universe rate p_v; each query
// (edge) is answered with p_e = min(p_v1, p_v2). The objective is the
// weighted sum of per-edge variances under a global tuple budget.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "joinsample/error.hpp"
#include "joinsample/estimator.hpp"
#include "joinsample/planner.hpp"
#include "joinsample/stats.hpp"

namespace joinsample {

// f_e = (A + B p1/eps1 + C p2/eps2 + D p1 p2 / (eps1 eps2)) / p_e, which is the
// edge variance up to an additive constant.
struct EdgeCoefficients {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double d = 0.0;

  [[nodiscard]] double operator()(double pe, double p1, double p2, double eps1, double eps2) const noexcept {
    return (a + b * p1 / eps1 + c * p2 / eps2 + d * p1 * p2 / (eps1 * eps2)) / pe;
  }
};

inline EdgeCoefficients edge_coefficients(const VarianceWeights& w) {
  return {w.x22 - w.x21 - w.x12 + w.x11, w.x12 - w.x11, w.x21 - w.x11, w.x11};
}

// AVG is folded in with p1 = p2 = p_e, where f = R^2 ((A-2B+C)/p + D p).
inline EdgeCoefficients edge_coefficients(Aggregate agg, const JoinSums& s) {
  if (agg != Aggregate::Avg) return edge_coefficients(weights_of(agg, s));
  const auto k = avg_coefficients(s, 1.0, 1.0);
  const double r2 = k.ratio * k.ratio;
  return {r2 * k.inverse_term(), 0.0, 0.0, r2 * k.d};
}

struct QueryVertex {
  std::string name;
  double size = 0.0;
  std::optional<double> eps;  // pinned effective rate
};

struct QueryEdge {
  std::size_t v1 = 0;
  std::size_t v2 = 0;
  Aggregate agg = Aggregate::Count;
  double weight = 1.0;
  EdgeCoefficients coef;
};

struct QueryGraph {
  std::vector<QueryVertex> vertices;
  std::vector<QueryEdge> edges;
  double budget = 0.0;

  void validate() const {
    if (vertices.empty() || edges.empty()) throw DomainError("query graph needs at least one vertex and one edge");
    if (!(budget > 0.0)) throw DomainError("budget must be positive");
    for (const auto& v : vertices) {
      if (!(v.size > 0.0)) throw DomainError("vertex '" + v.name + "' has non-positive size");
      if (v.eps && !(*v.eps > 0.0 && *v.eps <= 1.0)) throw DomainError("pinned eps of '" + v.name + "' outside (0, 1]");
    }
    for (const auto& e : edges) {
      if (e.v1 >= vertices.size() || e.v2 >= vertices.size()) throw DomainError("edge refers to an unknown vertex");
      if (!(e.weight >= 0.0) || !std::isfinite(e.weight)) throw DomainError("edge weight must be finite and >= 0");
      for (double x : {e.coef.a, e.coef.b, e.coef.c, e.coef.d}) {
        if (!std::isfinite(x)) throw DomainError("edge coefficients must be finite");
      }
    }
  }
};

struct MultiQueryAssignment {
  std::vector<double> eps;     // per vertex
  std::vector<double> p;       // per vertex
  std::vector<double> p_edge;  // per edge, min of its endpoints
  double objective = 0.0;
  double budget_used = 0.0;
};

struct MultiQueryOptions {
  int restarts = 16;
  int iterations = 2000;
  double tolerance = 1e-8;
  std::uint64_t seed = 1;
};

inline double multi_query_objective(const QueryGraph& g, const std::vector<double>& eps, const std::vector<double>& p) {
  double total = 0.0;
  for (const auto& e : g.edges) {
    if (e.weight == 0.0) continue;
    const double pe = std::min(p[e.v1], p[e.v2]);
    total += e.weight * e.coef(pe, p[e.v1], p[e.v2], eps[e.v1], eps[e.v2]);
  }
  return total;
}

namespace detail {

// Unconstrained coordinates: theta (one per free vertex) spreads the free
// budget by softmax; phi (one per vertex) places p_v in [eps_v, 1].
class MultiQueryParametrization {
 public:
  explicit MultiQueryParametrization(const QueryGraph& g) : g_(g) {
    double pinned = 0.0;
    for (std::size_t i = 0; i < g.vertices.size(); ++i) {
      if (g.vertices[i].eps) {
        pinned += *g.vertices[i].eps * g.vertices[i].size;
      } else {
        free_.push_back(i);
      }
    }
    free_budget_ = g.budget - pinned;
    if (free_budget_ < -1e-9 * g.budget) throw DomainError("pinned rates alone exceed the budget");
    if (!free_.empty() && !(free_budget_ > 0.0)) {
      throw DomainError("budget too small to give every free vertex a positive rate");
    }
  }

  [[nodiscard]] std::size_t dims() const noexcept { return free_.size() + g_.vertices.size(); }

  void decode(const std::vector<double>& x, std::vector<double>& eps, std::vector<double>& p) const {
    const std::size_t nv = g_.vertices.size();
    eps.assign(nv, 0.0);
    p.assign(nv, 1.0);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < free_.size(); ++j) mx = std::max(mx, x[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < free_.size(); ++j) z += std::exp(x[j] - mx);
    for (std::size_t j = 0; j < free_.size(); ++j) {
      const auto v = free_[j];
      const double share = std::exp(x[j] - mx) / z;
      eps[v] = std::min(1.0, free_budget_ * share / g_.vertices[v].size);
    }
    for (std::size_t v = 0; v < nv; ++v) {
      if (g_.vertices[v].eps) eps[v] = *g_.vertices[v].eps;
      const double s = 1.0 / (1.0 + std::exp(-x[free_.size() + v]));
      p[v] = std::min(1.0, eps[v] + (1.0 - eps[v]) * s);
    }
  }

  // Same eps on every free vertex, p halfway.
  [[nodiscard]] std::vector<double> neutral_start() const {
    std::vector<double> x(dims(), 0.0);
    for (std::size_t j = 0; j < free_.size(); ++j) x[j] = std::log(g_.vertices[free_[j]].size);
    return x;
  }

  [[nodiscard]] const std::vector<std::size_t>& free_vertices() const noexcept { return free_; }

 private:
  const QueryGraph& g_;
  std::vector<std::size_t> free_;
  double free_budget_ = 0.0;
};

// Golden-section minimum of f on [lo, hi].
template <typename F>
double golden_min(F&& f, double lo, double hi, int iters = 80) {
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - r * (b - a), d = a + r * (b - a);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < iters; ++i) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = f(d);
    }
  }
  double best = fc <= fd ? c : d;
  for (double x : {lo, hi}) {
    if (f(x) < f(best)) best = x;
  }
  return best;
}

// Optimal p for fixed eps by coordinate moves. Vertices sharing a p value
// (the min() ridge) also move together.
inline void polish_p(const QueryGraph& g, const std::vector<double>& eps, std::vector<double>& p, double tol) {
  const std::size_t nv = p.size();
  for (int sweep = 0; sweep < 50; ++sweep) {
    const double before = multi_query_objective(g, eps, p);
    for (std::size_t v = 0; v < nv; ++v) {
      for (bool joint : {false, true}) {
        std::vector<std::size_t> group{v};
        double lo = eps[v];
        if (joint) {
          group.clear();
          for (std::size_t u = 0; u < nv; ++u) {
            if (std::abs(p[u] - p[v]) <= 1e-9 * p[v]) {
              group.push_back(u);
              lo = std::max(lo, eps[u]);
            }
          }
          if (group.size() < 2) continue;
        }
        auto trial = p;
        const auto f = [&](double x) {
          for (auto u : group) trial[u] = x;
          return multi_query_objective(g, eps, trial);
        };
        const double cur = f(p[v]);
        const double x = golden_min(f, lo, 1.0);
        if (f(x) < cur) {
          for (auto u : group) p[u] = x;
        }
      }
    }
    const double after = multi_query_objective(g, eps, p);
    if (before - after <= tol * std::abs(before)) break;
  }
}

// Alternates the p polish with pairwise budget transfers between free vertices.
inline void polish(const QueryGraph& g, std::vector<double>& eps, std::vector<double>& p,
                   const std::vector<std::size_t>& free, double tol) {
  polish_p(g, eps, p, tol);
  for (int sweep = 0; sweep < 30; ++sweep) {
    const double before = multi_query_objective(g, eps, p);
    for (std::size_t a = 0; a < free.size(); ++a) {
      for (std::size_t b = a + 1; b < free.size(); ++b) {
        const auto i = free[a], j = free[b];
        const double ni = g.vertices[i].size, nj = g.vertices[j].size;
        const double pool = eps[i] * ni + eps[j] * nj;
        const double lo = std::max(0.0, pool - nj) / pool, hi = std::min(pool, ni) / pool;
        if (!(hi > lo)) continue;
        const auto apply = [&](double t, std::vector<double>& e, std::vector<double>& q) {
          e = eps;
          q = p;
          e[i] = std::max(1e-300, t * pool / ni);
          e[j] = std::max(1e-300, (1.0 - t) * pool / nj);
          q[i] = std::max(q[i], e[i]);
          q[j] = std::max(q[j], e[j]);
          polish_p(g, e, q, tol);
        };
        std::vector<double> te, tp;
        const auto f = [&](double t) {
          apply(t, te, tp);
          return multi_query_objective(g, te, tp);
        };
        const double cur = multi_query_objective(g, eps, p);
        const double t = golden_min(f, std::max(lo, 1e-12), std::min(hi, 1.0 - 1e-12), 40);
        if (f(t) < cur) {
          eps = te;
          p = tp;
        }
      }
    }
    const double after = multi_query_objective(g, eps, p);
    if (before - after <= tol * std::abs(before)) break;
  }
}

}  // namespace detail

// Multi-start gradient descent in the unconstrained coordinates (central
// differences, Armijo backtracking), then a coordinate polish of each p_v
// directly on [eps_v, 1].
inline MultiQueryAssignment solve_multi_query(const QueryGraph& g, const MultiQueryOptions& opt = {}) {
  g.validate();
  const detail::MultiQueryParametrization par(g);
  const std::size_t dim = par.dims();
  std::vector<double> eps, p;
  auto objective = [&](const std::vector<double>& x) {
    par.decode(x, eps, p);
    return multi_query_objective(g, eps, p);
  };

  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> normal(0.0, 1.5);
  std::vector<double> best_x;
  double best_f = std::numeric_limits<double>::infinity();
  for (int r = 0; r < std::max(1, opt.restarts); ++r) {
    std::vector<double> x = par.neutral_start();
    if (r > 0) {
      for (auto& xi : x) xi += normal(rng);
    }
    double fx = objective(x);
    double step = 1.0;
    std::vector<double> grad(dim), trial(dim);
    for (int it = 0; it < opt.iterations; ++it) {
      double gnorm2 = 0.0;
      for (std::size_t i = 0; i < dim; ++i) {
        const double h = 1e-6 * std::max(1.0, std::abs(x[i]));
        trial = x;
        trial[i] = x[i] + h;
        const double fp = objective(trial);
        trial[i] = x[i] - h;
        const double fm = objective(trial);
        grad[i] = (fp - fm) / (2.0 * h);
        gnorm2 += grad[i] * grad[i];
      }
      if (!(gnorm2 > 0.0) || !std::isfinite(gnorm2)) break;
      // Steps are scaled so that the first trial moves x by `step` in norm.
      const double scale = step / std::sqrt(gnorm2);
      double ft = fx;
      bool accepted = false;
      for (int bt = 0; bt < 60; ++bt) {
        for (std::size_t i = 0; i < dim; ++i) trial[i] = x[i] - scale * std::ldexp(1.0, -bt) * grad[i];
        ft = objective(trial);
        if (ft <= fx - 1e-4 * scale * std::ldexp(1.0, -bt) * gnorm2) {
          step = std::min(8.0, 2.0 * step * std::ldexp(1.0, -bt));
          accepted = true;
          break;
        }
      }
      if (!accepted) break;
      const double change = (fx - ft) / std::max(std::abs(fx), 1e-300);
      x = trial;
      fx = ft;
      if (change < opt.tolerance) break;
    }
    if (fx < best_f) {
      best_f = fx;
      best_x = x;
    }
  }

  MultiQueryAssignment out;
  par.decode(best_x, out.eps, out.p);
  detail::polish(g, out.eps, out.p, par.free_vertices(), opt.tolerance);
  out.objective = multi_query_objective(g, out.eps, out.p);
  for (const auto& e : g.edges) out.p_edge.push_back(std::min(out.p[e.v1], out.p[e.v2]));
  for (std::size_t v = 0; v < g.vertices.size(); ++v) out.budget_used += out.eps[v] * g.vertices[v].size;
  return out;
}

}  // namespace joinsample
