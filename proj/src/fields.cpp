#include "stencilml/fields.hpp"

#include <cmath>
#include <sstream>

#include "stencilml/error.hpp"

namespace stencilml {

namespace {

double ipow(double base, int exponent) {
  double result = 1.0;
  for (int k = 0; k < exponent; ++k) result *= base;
  return result;
}

// c * x^a * y^b, zero whenever the coefficient vanishes (covers negative exponents).
double term(double c, double x, int a, double y, int b) {
  if (c == 0.0) return 0.0;
  return c * ipow(x, a) * ipow(y, b);
}

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void check(const Monomial& f) {
  if (f.n < 0 || f.m < 0) throw ContractError("monomial exponents must be non-negative");
}
void check(const Exponential& f) {
  if (!(f.sigma > 0.0)) throw ContractError("exponential field needs sigma > 0");
}

}  // namespace

double field_value(const TestField& field, Point2 p) {
  return std::visit(overloaded{
                        [&](const Monomial& f) {
                          check(f);
                          return term(1.0, p.x, f.n, p.y, f.m);
                        },
                        [&](const Sinusoidal& f) { return std::sin(f.kx * p.x) * std::sin(f.ky * p.y); },
                        [&](const Exponential& f) {
                          check(f);
                          return std::exp(-(p.x * p.x + p.y * p.y) / (2.0 * f.sigma));
                        },
                    },
                    field);
}

Gradient field_gradient(const TestField& field, Point2 p) {
  return std::visit(overloaded{
                        [&](const Monomial& f) {
                          check(f);
                          return Gradient{term(f.n, p.x, f.n - 1, p.y, f.m), term(f.m, p.x, f.n, p.y, f.m - 1)};
                        },
                        [&](const Sinusoidal& f) {
                          return Gradient{f.kx * std::cos(f.kx * p.x) * std::sin(f.ky * p.y),
                                          f.ky * std::sin(f.kx * p.x) * std::cos(f.ky * p.y)};
                        },
                        [&](const Exponential& f) {
                          const double v = field_value(f, p);
                          return Gradient{-p.x / f.sigma * v, -p.y / f.sigma * v};
                        },
                    },
                    field);
}

double field_laplacian(const TestField& field, Point2 p) {
  return std::visit(overloaded{
                        [&](const Monomial& f) {
                          check(f);
                          return term(f.n * (f.n - 1), p.x, f.n - 2, p.y, f.m) +
                                 term(f.m * (f.m - 1), p.x, f.n, p.y, f.m - 2);
                        },
                        [&](const Sinusoidal& f) { return -(f.kx * f.kx + f.ky * f.ky) * field_value(f, p); },
                        [&](const Exponential& f) {
                          const double r2 = p.x * p.x + p.y * p.y;
                          return (r2 / (f.sigma * f.sigma) - 2.0 / f.sigma) * field_value(f, p);
                        },
                    },
                    field);
}

std::string describe(const TestField& field) {
  std::ostringstream out;
  std::visit(overloaded{
                 [&](const Monomial& f) { out << "monomial(n=" << f.n << ",m=" << f.m << ")"; },
                 [&](const Sinusoidal& f) { out << "sinusoidal(kx=" << f.kx << ",ky=" << f.ky << ")"; },
                 [&](const Exponential& f) { out << "exponential(sigma=" << f.sigma << ")"; },
             },
             field);
  return out.str();
}

}  // namespace stencilml
