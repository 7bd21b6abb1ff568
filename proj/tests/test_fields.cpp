#include <doctest.h>

#include <cmath>
#include <random>

#include "stencilml/fields.hpp"
#include "support.hpp"

using namespace stencilml;

TEST_CASE("field values") {
  CHECK(field_value(Monomial{2, 3}, {1, 1}) == 1.0);
  CHECK(field_value(Sinusoidal{2, 1}, {0, 0.7}) == 0.0);
  CHECK(field_value(Exponential{1}, {0, 0}) == 1.0);
  CHECK(field_value(Monomial{2, 3}, {2, -1}) == -4.0);
}

TEST_CASE("field gradients") {
  const Gradient g = field_gradient(Monomial{2, 3}, {1, 1});
  CHECK(g.dx == doctest::Approx(2.0));
  CHECK(g.dy == doctest::Approx(3.0));
  auto f = [](double x, double y) { return x * x * y * y * y; };
  CHECK(std::abs(testing::fd_dx(f, 1, 1, 1e-6) - 2.0) < 1e-6);
  CHECK(std::abs(testing::fd_dy(f, 1, 1, 1e-6) - 3.0) < 1e-6);

  const Gradient e = field_gradient(Exponential{1}, {0, 0});
  CHECK(e.dx == 0.0);
  CHECK(e.dy == 0.0);
  const Gradient s = field_gradient(Sinusoidal{2, 1}, {0, 0});
  CHECK(s.dx == 0.0);
  CHECK(s.dy == 0.0);
}

TEST_CASE("field laplacians") {
  CHECK(field_laplacian(Monomial{2, 3}, {1, 1}) == doctest::Approx(8.0));
  CHECK(field_laplacian(Exponential{1}, {0, 0}) == doctest::Approx(-2.0));
  auto e = [](double x, double y) { return std::exp(-(x * x + y * y) / 2); };
  CHECK(std::abs(testing::fd_laplacian(e, 0, 0, 1e-4) + 2.0) < 1e-6);

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int k = 0; k < 100; ++k) {
    const Point2 p{u(rng), u(rng)};
    CHECK(field_laplacian(Sinusoidal{2, 1}, p) == doctest::Approx(-5.0 * field_value(Sinusoidal{2, 1}, p)));
  }
}

TEST_CASE("analytic derivatives match finite differences at random points") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const TestField fields[] = {Monomial{}, Sinusoidal{}, Exponential{}, Monomial{3, 1}, Sinusoidal{1.5, 0.5},
                              Exponential{0.7}};
  for (const TestField& field : fields) {
    auto f = [&](double x, double y) { return field_value(field, {x, y}); };
    for (int k = 0; k < 1000; ++k) {
      const Point2 p{u(rng), u(rng)};
      const Gradient g = field_gradient(field, p);
      CHECK(std::abs(g.dx - testing::fd_dx(f, p.x, p.y, 1e-5)) < 1e-6);
      CHECK(std::abs(g.dy - testing::fd_dy(f, p.x, p.y, 1e-5)) < 1e-6);
      const double h = 1e-5;
      const double div = (field_gradient(field, {p.x + h, p.y}).dx - field_gradient(field, {p.x - h, p.y}).dx +
                          field_gradient(field, {p.x, p.y + h}).dy - field_gradient(field, {p.x, p.y - h}).dy) /
                         (2 * h);
      CHECK(std::abs(field_laplacian(field, p) - div) < 1e-6);
      CHECK(std::abs(field_laplacian(field, p) - testing::fd_laplacian(f, p.x, p.y, 1e-3)) < 1e-5);
    }
  }
}

TEST_CASE("sinusoidal eigenfunction identity") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  const Sinusoidal field{1.25, 0.75};
  for (int k = 0; k < 500; ++k) {
    const Point2 p{u(rng), u(rng)};
    CHECK(field_laplacian(field, p) == doctest::Approx(-(1.25 * 1.25 + 0.75 * 0.75) * field_value(field, p)));
  }
}

TEST_CASE("describe and defaults") {
  const auto fields = default_fields();
  CHECK(std::get<Monomial>(fields[0]).n == 2);
  CHECK(std::get<Monomial>(fields[0]).m == 3);
  CHECK(std::get<Sinusoidal>(fields[1]).kx == 2.0);
  CHECK(std::get<Sinusoidal>(fields[1]).ky == 1.0);
  CHECK(std::get<Exponential>(fields[2]).sigma == 1.0);
  CHECK_FALSE(describe(fields[0]).empty());
}
