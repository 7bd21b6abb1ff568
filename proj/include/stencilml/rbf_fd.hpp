#pragma once

#include <array>
#include <span>
#include <vector>

#include "stencilml/node_gen.hpp"

namespace stencilml {

enum class DiffOp { Dx, Dy, Laplacian };

/// Operator applied to monomials; Identity evaluates the monomial itself.
enum class MonomialOp { Identity, Dx, Dy, Laplacian };

inline constexpr std::array<DiffOp, 3> kAllOps{DiffOp::Dx, DiffOp::Dy, DiffOp::Laplacian};

const char* to_string(DiffOp op);

struct Exponents {
  int nx = 0;
  int ny = 0;
};

/// Augmentation basis {1, x, y, x^2, xy, y^2} in system column order.
inline constexpr std::array<Exponents, 6> kMonomials{{{0, 0}, {1, 0}, {0, 1}, {2, 0}, {1, 1}, {0, 2}}};
inline constexpr int kAugmentation = static_cast<int>(kMonomials.size());

struct WeightSet {
  DiffOp op = DiffOp::Laplacian;
  std::vector<double> weights;
};

/// Dense row-major square system for the weights, with the right-hand side.
struct AugmentedSystem {
  int dim = 0;
  std::vector<double> matrix;
  std::vector<double> rhs;

  double at(int row, int col) const { return matrix[static_cast<std::size_t>(row) * dim + col]; }
};

/// Polyharmonic spline kernel r^3.
inline double phs3(double r) { return r * r * r; }

/// Operator applied to phs3(|p - center|) with respect to p, evaluated at `eval_point`.
double phs3_applied(DiffOp op, Point2 eval_point, Point2 center);

double monomial_applied(MonomialOp op, Exponents e, Point2 eval_point);
double monomial_applied(DiffOp op, Exponents e, Point2 eval_point);

/// Collocation matrix only (shared by every operator).
AugmentedSystem build_matrix(std::span<const Point2> nodes);

/// Matrix plus the right-hand side for `op`, evaluated at the central node (origin).
AugmentedSystem build_system(const Stencil& stencil, DiffOp op);
AugmentedSystem build_system(std::span<const Point2> nodes, DiffOp op);

/// In-place LU factorization with partial pivoting. `condition_estimate` is the
/// max/min absolute pivot ratio.
class LuFactorization {
 public:
  LuFactorization(std::vector<double> matrix, int dim);

  bool singular() const { return singular_; }
  double condition_estimate() const { return condition_estimate_; }
  std::vector<double> solve(std::span<const double> rhs) const;

 private:
  int dim_;
  std::vector<double> lu_;
  std::vector<int> pivots_;
  bool singular_ = false;
  double condition_estimate_ = 0.0;
};

inline constexpr double kMaxConditionEstimate = 1e12;

/// Weights for one operator at the central node. Throws ContractError for fewer than
/// 6 nodes and ConditioningError for singular or ill-conditioned systems.
WeightSet solve_weights(const Stencil& stencil, DiffOp op);
WeightSet solve_weights(std::span<const Point2> nodes, DiffOp op);

/// Weights for Dx, Dy and the Laplacian from a single factorization.
struct OperatorWeights {
  WeightSet dx;
  WeightSet dy;
  WeightSet laplacian;

  const WeightSet& operator[](DiffOp op) const;
};

OperatorWeights solve_all_weights(std::span<const Point2> nodes);

double apply_weights(const WeightSet& weights, std::span<const double> field_values);

}  // namespace stencilml
