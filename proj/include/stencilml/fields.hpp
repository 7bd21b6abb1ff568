#pragma once

#include <array>
#include <string>
#include <variant>

#include "stencilml/node_gen.hpp"

namespace stencilml {

/// f = x^n y^m
struct Monomial {
  int n = 2;
  int m = 3;
};

/// f = sin(kx x) sin(ky y)
struct Sinusoidal {
  double kx = 2.0;
  double ky = 1.0;
};

/// f = exp(-(x^2 + y^2) / (2 sigma))
struct Exponential {
  double sigma = 1.0;
};

using TestField = std::variant<Monomial, Sinusoidal, Exponential>;

struct Gradient {
  double dx = 0.0;
  double dy = 0.0;
};

double field_value(const TestField& field, Point2 p);
Gradient field_gradient(const TestField& field, Point2 p);
double field_laplacian(const TestField& field, Point2 p);

std::string describe(const TestField& field);

/// The benchmark set used for labeling, with default parameters.
inline std::array<TestField, 3> default_fields() { return {Monomial{}, Sinusoidal{}, Exponential{}}; }

}  // namespace stencilml
