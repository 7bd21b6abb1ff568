#pragma once

#include <array>
#include <cmath>
#include <random>
#include <vector>

#include "stencilml/node_gen.hpp"

namespace stencilml::testing {

/// Random normalized stencil of size s from a small candidate cloud, using the
/// production sampler.
inline Stencil random_stencil(int s, std::uint64_t seed) {
  static const NodeCloud cloud = fill_nodes({{0.0, 0.0}, {1.0, 1.0}}, 0.02, 99);
  GenConfig gen;
  gen.stencil_size = s;
  Rng rng(seed);
  return normalize(sample_stencil(cloud, gen, rng));
}

/// Uniformly scattered nodes in the unit disc with the center first, for tests that
/// should not depend on the production sampler.
inline std::vector<Point2> scattered_nodes(int s, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Point2> nodes{{0.0, 0.0}};
  while (static_cast<int>(nodes.size()) < s) {
    const Point2 p{u(rng), u(rng)};
    if (p.x * p.x + p.y * p.y <= 1.0 && p.x * p.x + p.y * p.y > 1e-4) nodes.push_back(p);
  }
  return nodes;
}

inline std::vector<Point2> hexagon_with_center(double radius = 1.0) {
  std::vector<Point2> nodes{{0.0, 0.0}};
  for (int k = 0; k < 6; ++k) {
    const double a = k * M_PI / 3.0;
    nodes.push_back({radius * std::cos(a), radius * std::sin(a)});
  }
  return nodes;
}

/// Central differences of a scalar function of two variables.
template <class F>
double fd_dx(F f, double x, double y, double h) {
  return (f(x + h, y) - f(x - h, y)) / (2 * h);
}
template <class F>
double fd_dy(F f, double x, double y, double h) {
  return (f(x, y + h) - f(x, y - h)) / (2 * h);
}
template <class F>
double fd_laplacian(F f, double x, double y, double h) {
  return (f(x + h, y) + f(x - h, y) + f(x, y + h) + f(x, y - h) - 4 * f(x, y)) / (h * h);
}

namespace oracle {

using Real = long double;

/// Gaussian elimination with partial pivoting in extended precision; `a` is n x n
/// row-major and is destroyed.
inline std::vector<Real> gauss_solve(std::vector<Real> a, std::vector<Real> b) {
  const int n = static_cast<int>(b.size());
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r) {
      if (std::fabs(a[r * n + col]) > std::fabs(a[piv * n + col])) piv = r;
    }
    for (int c = 0; c < n; ++c) std::swap(a[col * n + c], a[piv * n + c]);
    std::swap(b[col], b[piv]);
    for (int r = col + 1; r < n; ++r) {
      const Real f = a[r * n + col] / a[col * n + col];
      for (int c = col; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
      b[r] -= f * b[col];
    }
  }
  std::vector<Real> x(n);
  for (int r = n - 1; r >= 0; --r) {
    Real acc = b[r];
    for (int c = r + 1; c < n; ++c) acc -= a[r * n + c] * x[c];
    x[r] = acc / a[r * n + r];
  }
  return x;
}

/// Weights of operator `op` (0 = d/dx, 1 = d/dy, 2 = Laplacian) at nodes[0], from the
/// r^3 kernel with {1, x, y, x^2, xy, y^2} written out term by term.
inline std::vector<Real> weights(const std::vector<Point2>& nodes, int op) {
  const int s = static_cast<int>(nodes.size());
  const int n = s + 6;
  std::vector<Real> a(n * n, 0.0L), b(n, 0.0L);
  const Real x0 = nodes[0].x, y0 = nodes[0].y;
  for (int i = 0; i < s; ++i) {
    const Real xi = nodes[i].x, yi = nodes[i].y;
    for (int j = 0; j < s; ++j) {
      const Real dx = xi - nodes[j].x, dy = yi - nodes[j].y;
      const Real r = std::sqrt(dx * dx + dy * dy);
      a[i * n + j] = r * r * r;
    }
    const Real poly[6] = {1.0L, xi, yi, xi * xi, xi * yi, yi * yi};
    for (int k = 0; k < 6; ++k) {
      a[i * n + s + k] = poly[k];
      a[(s + k) * n + i] = poly[k];
    }
    const Real dx = x0 - xi, dy = y0 - yi;
    const Real r = std::sqrt(dx * dx + dy * dy);
    b[i] = op == 0 ? 3 * r * dx : op == 1 ? 3 * r * dy : 9 * r;
  }
  const Real ddx[6] = {0, 1, 0, 2 * x0, y0, 0};
  const Real ddy[6] = {0, 0, 1, 0, x0, 2 * y0};
  const Real lap[6] = {0, 0, 0, 2, 0, 2};
  for (int k = 0; k < 6; ++k) b[s + k] = op == 0 ? ddx[k] : op == 1 ? ddy[k] : lap[k];
  std::vector<Real> x = gauss_solve(std::move(a), std::move(b));
  x.resize(s);
  return x;
}

/// Sum over x^2 y^3, sin(2x) sin(y) and exp(-(x^2+y^2)/2) of the absolute errors of the
/// approximated d/dx, d/dy and Laplacian at nodes[0].
inline double epsilon(const std::vector<Point2>& nodes) {
  const int s = static_cast<int>(nodes.size());
  std::array<std::vector<Real>, 3> w{weights(nodes, 0), weights(nodes, 1), weights(nodes, 2)};
  const Real x0 = nodes[0].x, y0 = nodes[0].y;

  auto f1 = [](Real x, Real y) { return x * x * y * y * y; };
  const Real e1[3] = {2 * x0 * y0 * y0 * y0, 3 * x0 * x0 * y0 * y0, 2 * y0 * y0 * y0 + 6 * x0 * x0 * y0};
  auto f2 = [](Real x, Real y) { return std::sin(2 * x) * std::sin(y); };
  const Real e2[3] = {2 * std::cos(2 * x0) * std::sin(y0), std::sin(2 * x0) * std::cos(y0),
                      -5 * std::sin(2 * x0) * std::sin(y0)};
  auto f3 = [](Real x, Real y) { return std::exp(-(x * x + y * y) / 2); };
  const Real g0 = f3(x0, y0);
  const Real e3[3] = {-x0 * g0, -y0 * g0, (x0 * x0 + y0 * y0 - 2) * g0};

  Real total = 0;
  for (int op = 0; op < 3; ++op) {
    Real a1 = 0, a2 = 0, a3 = 0;
    for (int j = 0; j < s; ++j) {
      a1 += w[op][j] * f1(nodes[j].x, nodes[j].y);
      a2 += w[op][j] * f2(nodes[j].x, nodes[j].y);
      a3 += w[op][j] * f3(nodes[j].x, nodes[j].y);
    }
    total += std::fabs(a1 - e1[op]) + std::fabs(a2 - e2[op]) + std::fabs(a3 - e3[op]);
  }
  return static_cast<double>(total);
}

}  // namespace oracle

}  // namespace stencilml::testing
