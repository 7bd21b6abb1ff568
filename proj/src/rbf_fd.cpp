#include "stencilml/rbf_fd.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "stencilml/error.hpp"

namespace stencilml {

namespace {

std::string format_condition(double c) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3e", c);
  return buf;
}

double ipow(double base, int exponent) {
  double result = 1.0;
  for (int k = 0; k < exponent; ++k) result *= base;
  return result;
}

// c * x^a * y^b with the convention that negative exponents only occur with c == 0.
double term(double c, double x, int a, double y, int b) {
  if (c == 0.0) return 0.0;
  return c * ipow(x, a) * ipow(y, b);
}

MonomialOp as_monomial_op(DiffOp op) {
  switch (op) {
    case DiffOp::Dx: return MonomialOp::Dx;
    case DiffOp::Dy: return MonomialOp::Dy;
    case DiffOp::Laplacian: return MonomialOp::Laplacian;
  }
  return MonomialOp::Identity;
}

}  // namespace

ConditioningError::ConditioningError(double condition_estimate)
    : Error(ErrorKind::Numerical,
            "RBF-FD system is singular or ill-conditioned (pivot ratio " + format_condition(condition_estimate) + ")"),
      condition_estimate_(condition_estimate) {}

const char* to_string(DiffOp op) {
  switch (op) {
    case DiffOp::Dx: return "dx";
    case DiffOp::Dy: return "dy";
    case DiffOp::Laplacian: return "laplacian";
  }
  return "?";
}

double phs3_applied(DiffOp op, Point2 eval_point, Point2 center) {
  const double r = distance(eval_point, center);
  switch (op) {
    case DiffOp::Dx: return 3.0 * r * (eval_point.x - center.x);
    case DiffOp::Dy: return 3.0 * r * (eval_point.y - center.y);
    case DiffOp::Laplacian: return 9.0 * r;
  }
  return 0.0;
}

double monomial_applied(MonomialOp op, Exponents e, Point2 p) {
  const int a = e.nx;
  const int b = e.ny;
  switch (op) {
    case MonomialOp::Identity: return term(1.0, p.x, a, p.y, b);
    case MonomialOp::Dx: return term(a, p.x, a - 1, p.y, b);
    case MonomialOp::Dy: return term(b, p.x, a, p.y, b - 1);
    case MonomialOp::Laplacian:
      return term(a * (a - 1), p.x, a - 2, p.y, b) + term(b * (b - 1), p.x, a, p.y, b - 2);
  }
  return 0.0;
}

double monomial_applied(DiffOp op, Exponents e, Point2 p) { return monomial_applied(as_monomial_op(op), e, p); }

namespace {

// Operator applied to every basis function, evaluated at the central node nodes[0].
std::vector<double> operator_rhs(std::span<const Point2> nodes, DiffOp op) {
  const int s = static_cast<int>(nodes.size());
  const Point2 eval = nodes.empty() ? Point2{} : nodes[0];
  std::vector<double> rhs(s + kAugmentation);
  for (int j = 0; j < s; ++j) rhs[j] = phs3_applied(op, eval, nodes[j]);
  for (int k = 0; k < kAugmentation; ++k) rhs[s + k] = monomial_applied(op, kMonomials[k], eval);
  return rhs;
}

}  // namespace

AugmentedSystem build_matrix(std::span<const Point2> nodes) {
  const int s = static_cast<int>(nodes.size());
  AugmentedSystem sys;
  sys.dim = s + kAugmentation;
  sys.matrix.assign(static_cast<std::size_t>(sys.dim) * sys.dim, 0.0);
  auto at = [&](int i, int j) -> double& { return sys.matrix[static_cast<std::size_t>(i) * sys.dim + j]; };

  for (int i = 0; i < s; ++i) {
    at(i, i) = 0.0;
    for (int j = i + 1; j < s; ++j) {
      const double v = phs3(distance(nodes[i], nodes[j]));
      at(i, j) = v;
      at(j, i) = v;
    }
    for (int k = 0; k < kAugmentation; ++k) {
      const double v = monomial_applied(MonomialOp::Identity, kMonomials[k], nodes[i]);
      at(i, s + k) = v;
      at(s + k, i) = v;
    }
  }
  return sys;
}

AugmentedSystem build_system(std::span<const Point2> nodes, DiffOp op) {
  AugmentedSystem sys = build_matrix(nodes);
  sys.rhs = operator_rhs(nodes, op);
  return sys;
}

AugmentedSystem build_system(const Stencil& stencil, DiffOp op) { return build_system(stencil.coords, op); }

LuFactorization::LuFactorization(std::vector<double> matrix, int dim)
    : dim_(dim), lu_(std::move(matrix)), pivots_(dim) {
  const int n = dim_;
  auto a = [&](int i, int j) -> double& { return lu_[static_cast<std::size_t>(i) * n + j]; };
  double max_pivot = 0.0;
  double min_pivot = std::numeric_limits<double>::infinity();
  for (int k = 0; k < n; ++k) {
    int p = k;
    for (int i = k + 1; i < n; ++i) {
      if (std::abs(a(i, k)) > std::abs(a(p, k))) p = i;
    }
    pivots_[k] = p;
    if (p != k) {
      for (int j = 0; j < n; ++j) std::swap(a(k, j), a(p, j));
    }
    const double pivot = a(k, k);
    max_pivot = std::max(max_pivot, std::abs(pivot));
    min_pivot = std::min(min_pivot, std::abs(pivot));
    if (pivot == 0.0) {
      singular_ = true;
      continue;
    }
    for (int i = k + 1; i < n; ++i) {
      const double l = a(i, k) / pivot;
      a(i, k) = l;
      if (l == 0.0) continue;
      for (int j = k + 1; j < n; ++j) a(i, j) -= l * a(k, j);
    }
  }
  condition_estimate_ = singular_ || min_pivot == 0.0 ? std::numeric_limits<double>::infinity() : max_pivot / min_pivot;
}

std::vector<double> LuFactorization::solve(std::span<const double> rhs) const {
  const int n = dim_;
  if (static_cast<int>(rhs.size()) != n) throw ContractError("right-hand side length does not match the system");
  auto a = [&](int i, int j) { return lu_[static_cast<std::size_t>(i) * n + j]; };
  std::vector<double> x(rhs.begin(), rhs.end());
  for (int k = 0; k < n; ++k) {
    if (pivots_[k] != k) std::swap(x[k], x[pivots_[k]]);
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < i; ++j) x[i] -= a(i, j) * x[j];
  }
  for (int i = n - 1; i >= 0; --i) {
    for (int j = i + 1; j < n; ++j) x[i] -= a(i, j) * x[j];
    x[i] /= a(i, i);
  }
  return x;
}

namespace {

LuFactorization factor_checked(std::span<const Point2> nodes) {
  if (nodes.size() < static_cast<std::size_t>(kAugmentation)) {
    throw ContractError("RBF-FD with quadratic augmentation needs at least 6 nodes, got " +
                        std::to_string(nodes.size()));
  }
  AugmentedSystem sys = build_matrix(nodes);
  LuFactorization lu(std::move(sys.matrix), sys.dim);
  if (lu.singular() || !(lu.condition_estimate() <= kMaxConditionEstimate)) {
    throw ConditioningError(lu.condition_estimate());
  }
  return lu;
}

WeightSet weights_from(const LuFactorization& lu, std::span<const Point2> nodes, DiffOp op) {
  std::vector<double> solution = lu.solve(operator_rhs(nodes, op));
  solution.resize(nodes.size());
  for (double w : solution) {
    if (!std::isfinite(w)) throw ConditioningError(lu.condition_estimate());
  }
  return WeightSet{op, std::move(solution)};
}

}  // namespace

WeightSet solve_weights(std::span<const Point2> nodes, DiffOp op) {
  return weights_from(factor_checked(nodes), nodes, op);
}

WeightSet solve_weights(const Stencil& stencil, DiffOp op) { return solve_weights(stencil.coords, op); }

const WeightSet& OperatorWeights::operator[](DiffOp op) const {
  switch (op) {
    case DiffOp::Dx: return dx;
    case DiffOp::Dy: return dy;
    case DiffOp::Laplacian: break;
  }
  return laplacian;
}

OperatorWeights solve_all_weights(std::span<const Point2> nodes) {
  const LuFactorization lu = factor_checked(nodes);
  return OperatorWeights{weights_from(lu, nodes, DiffOp::Dx), weights_from(lu, nodes, DiffOp::Dy),
                         weights_from(lu, nodes, DiffOp::Laplacian)};
}

double apply_weights(const WeightSet& weights, std::span<const double> field_values) {
  if (weights.weights.size() != field_values.size()) {
    throw ContractError("weight count " + std::to_string(weights.weights.size()) + " does not match " +
                        std::to_string(field_values.size()) + " field values");
  }
  double sum = 0.0;
  for (std::size_t j = 0; j < field_values.size(); ++j) sum += weights.weights[j] * field_values[j];
  return sum;
}

}  // namespace stencilml
