#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace stencilml {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

inline Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
inline Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }

double distance(Point2 a, Point2 b);
double norm(Point2 p);

struct Rect {
  Point2 lo;
  Point2 hi;

  double width() const { return hi.x - lo.x; }
  double height() const { return hi.y - lo.y; }
  bool contains(Point2 p) const { return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y; }
};

/// Quasi-uniform candidate nodes. Immutable once built; safe to share between threads.
struct NodeCloud {
  std::vector<Point2> points;
  double spacing_h = 0.0;
  Rect domain;
};

/// Stencil nodes in cloud coordinates before normalization.
struct StencilSample {
  std::vector<Point2> nodes;
  int center_index = 0;

  int size() const { return static_cast<int>(nodes.size()); }
};

/// Centered and scaled stencil: coords[0] is the central node at the origin and
/// the farthest node lies at distance 1.
struct Stencil {
  std::vector<Point2> coords;

  int size() const { return static_cast<int>(coords.size()); }
};

struct GenConfig {
  std::uint64_t seed = 1;
  Rect domain{{0.0, 0.0}, {1.0, 1.0}};
  double spacing_h = 0.02;
  int stencil_size = 15;
  /// Nearest-neighbour pool (central node included). 0 means 3 * stencil_size.
  int candidate_pool = 0;
  double decay_beta = 1.0;

  int pool_size() const { return candidate_pool > 0 ? candidate_pool : 3 * stencil_size; }
  void validate() const;
};

using Rng = std::mt19937_64;

/// Seed for an independent per-item random stream (splitmix64 mixing of seed and index).
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index);

/// Advancing-front Poisson-disc fill of `domain` with nominal spacing `spacing_h`.
/// Deterministic for a fixed seed. Throws InvalidDomainError on a degenerate domain
/// or a spacing that does not fit inside it.
NodeCloud fill_nodes(const Rect& domain, double spacing_h, std::uint64_t seed);

/// Draws a central node uniformly, then s-1 further nodes without replacement from the
/// pool of nearest candidates with weight (1 + r/h)^(-beta). The central node comes first.
StencilSample sample_stencil(const NodeCloud& cloud, const GenConfig& config, Rng& rng);

/// The same node set with every node in turn acting as the center.
std::vector<StencilSample> recenter_variants(const StencilSample& sample);

/// Translates the center to the origin, moves it to position 0 and scales the
/// farthest node to unit distance. Throws ZeroRadiusError when every node coincides
/// with the center.
Stencil normalize(const StencilSample& sample);

/// True when the nodes are pairwise further apart than kDuplicateTolerance * scale.
bool has_distinct_nodes(std::span<const Point2> nodes, double scale);

/// Two nodes closer than this multiple of the spacing are duplicates.
inline constexpr double kDuplicateTolerance = 1e-12;

}  // namespace stencilml
