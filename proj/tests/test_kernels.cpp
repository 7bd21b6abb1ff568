#include <doctest.h>

#include <cstring>
#include <random>

#include "stencilml/kernels.hpp"

using namespace stencilml::kernels;

namespace {

template <class Real>
Matrix<Real> random_matrix(int r, int c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, 1.0);
  Matrix<Real> m(r, c);
  for (Real& v : m.values) v = static_cast<Real>(d(rng));
  return m;
}

template <class Real>
bool bitwise_equal(const Matrix<Real>& a, const Matrix<Real>& b) {
  return a.rows == b.rows && a.cols == b.cols &&
         std::memcmp(a.values.data(), b.values.data(), a.values.size() * sizeof(Real)) == 0;
}

}  // namespace

TEST_CASE_TEMPLATE("gemm is bitwise equal to the serial reference", Real, float, double) {
  const int shapes[][3] = {{1, 1, 1},   {7, 3, 5},     {6, 2, 128},  {13, 300, 33},
                           {64, 257, 70}, {300, 128, 256}, {17, 600, 9}, {120, 2, 2048}};
  for (const auto& s : shapes) {
    const auto a = random_matrix<Real>(s[0], s[1], 1);
    const auto b = random_matrix<Real>(s[1], s[2], 2);
    for (Accumulate acc : {Accumulate::No, Accumulate::Yes}) {
      auto c = random_matrix<Real>(s[0], s[2], 3);
      auto ref = c;
      gemm(a, b, c, acc);
      reference::gemm(a, b, ref, acc);
      CHECK(bitwise_equal(c, ref));
    }
  }
}

TEST_CASE("gemm matches a naive product numerically") {
  const auto a = random_matrix<double>(9, 11, 4);
  const auto b = random_matrix<double>(11, 5, 5);
  Matrix<double> c(9, 5);
  gemm(a, b, c);
  for (int i = 0; i < 9; ++i) {
    for (int j = 0; j < 5; ++j) {
      long double acc = 0;
      for (int k = 0; k < 11; ++k) acc += static_cast<long double>(a(i, k)) * b(k, j);
      CHECK(c(i, j) == doctest::Approx(static_cast<double>(acc)).epsilon(1e-13));
    }
  }
}

TEST_CASE("gemm rows do not depend on their position or on the thread count") {
  const auto a = random_matrix<float>(97, 130, 6);
  const auto b = random_matrix<float>(130, 200, 7);
  Matrix<float> full(97, 200);
  gemm(a, b, full);
  for (int start : {0, 5, 6, 41, 96}) {
    Matrix<float> one(1, 130);
    std::copy_n(a.row(start), 130, one.row(0));
    Matrix<float> out(1, 200);
    gemm(one, b, out);
    CHECK(std::memcmp(out.row(0), full.row(start), 200 * sizeof(float)) == 0);
  }
  const int before = threads();
  for (int t : {1, 2, 3}) {
    set_threads(t);
    Matrix<float> again(97, 200);
    gemm(a, b, again);
    CHECK(bitwise_equal(again, full));
  }
  set_threads(before);
}

TEST_CASE("column reductions") {
  const auto a = random_matrix<float>(333, 17, 8);
  std::vector<double> sums, ref;
  column_sums(a, sums);
  reference::column_sums(a, ref);
  CHECK(sums == ref);
  std::vector<double> dots;
  column_dot(a, a, dots);
  for (int j = 0; j < a.cols; ++j) {
    double s = 0.0;
    for (int i = 0; i < a.rows; ++i) s += static_cast<double>(a(i, j)) * a(i, j);
    CHECK(dots[j] == doctest::Approx(s).epsilon(1e-14));
  }
}

TEST_CASE("transpose") {
  const auto a = random_matrix<double>(5, 8, 9);
  Matrix<double> t;
  transpose(a, t);
  REQUIRE(t.rows == 8);
  REQUIRE(t.cols == 5);
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 8; ++j) CHECK(t(j, i) == a(i, j));
  }
}
