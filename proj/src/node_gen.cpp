#include "stencilml/node_gen.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <numeric>

#include "stencilml/error.hpp"

namespace stencilml {

double distance(Point2 a, Point2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

double norm(Point2 p) { return std::hypot(p.x, p.y); }

void GenConfig::validate() const {
  if (stencil_size < 1) throw ContractError("stencil size must be positive");
  if (pool_size() < stencil_size) throw ContractError("candidate pool must be at least the stencil size");
  if (!(decay_beta >= 0.0)) throw ContractError("decay exponent must be non-negative");
  if (!(spacing_h > 0.0)) throw ContractError("spacing must be positive");
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(seed ^ mix(index));
}

namespace {

/// Uniform bucket grid over the domain for exclusion-radius queries.
class SpatialGrid {
 public:
  SpatialGrid(const Rect& domain, double cell)
      : origin_(domain.lo),
        cell_(cell),
        nx_(static_cast<int>(std::floor(domain.width() / cell)) + 1),
        ny_(static_cast<int>(std::floor(domain.height() / cell)) + 1),
        buckets_(static_cast<std::size_t>(nx_) * ny_) {}

  void insert(Point2 p, std::size_t index) { buckets_[bucket(cell_x(p), cell_y(p))].push_back(index); }

  bool any_within(Point2 p, double radius, const std::vector<Point2>& points) const {
    const int cx = cell_x(p);
    const int cy = cell_y(p);
    const int reach = static_cast<int>(std::ceil(radius / cell_));
    for (int j = std::max(0, cy - reach); j <= std::min(ny_ - 1, cy + reach); ++j) {
      for (int i = std::max(0, cx - reach); i <= std::min(nx_ - 1, cx + reach); ++i) {
        for (std::size_t idx : buckets_[bucket(i, j)]) {
          if (distance(points[idx], p) < radius) return true;
        }
      }
    }
    return false;
  }

 private:
  int cell_x(Point2 p) const { return std::clamp(static_cast<int>((p.x - origin_.x) / cell_), 0, nx_ - 1); }
  int cell_y(Point2 p) const { return std::clamp(static_cast<int>((p.y - origin_.y) / cell_), 0, ny_ - 1); }
  std::size_t bucket(int i, int j) const { return static_cast<std::size_t>(j) * nx_ + i; }

  Point2 origin_;
  double cell_;
  int nx_;
  int ny_;
  std::vector<std::vector<std::size_t>> buckets_;
};

constexpr int kFrontCandidates = 15;
// Candidates sit at exactly h from their parent; rounding must not reject them.
constexpr double kExclusionSlack = 1e-9;

}  // namespace

NodeCloud fill_nodes(const Rect& domain, double spacing_h, std::uint64_t seed) {
  const double w = domain.width();
  const double h = domain.height();
  if (!std::isfinite(w) || !std::isfinite(h) || !(w > 0.0) || !(h > 0.0)) {
    throw InvalidDomainError("domain must have positive area");
  }
  if (!(spacing_h > 0.0) || !(spacing_h < std::min(w, h))) {
    throw InvalidDomainError("spacing must be positive and smaller than the shortest domain side");
  }

  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  NodeCloud cloud;
  cloud.spacing_h = spacing_h;
  cloud.domain = domain;

  SpatialGrid grid(domain, spacing_h);
  const double exclusion = spacing_h * (1.0 - kExclusionSlack);

  const Point2 start{domain.lo.x + unit(rng) * w, domain.lo.y + unit(rng) * h};
  cloud.points.push_back(start);
  grid.insert(start, 0);

  std::deque<std::size_t> front{0};
  while (!front.empty()) {
    const Point2 parent = cloud.points[front.front()];
    front.pop_front();
    const double offset = unit(rng) * 2.0 * std::numbers::pi;
    for (int k = 0; k < kFrontCandidates; ++k) {
      const double angle = offset + 2.0 * std::numbers::pi * k / kFrontCandidates;
      const Point2 candidate{parent.x + spacing_h * std::cos(angle), parent.y + spacing_h * std::sin(angle)};
      if (!domain.contains(candidate) || grid.any_within(candidate, exclusion, cloud.points)) continue;
      grid.insert(candidate, cloud.points.size());
      front.push_back(cloud.points.size());
      cloud.points.push_back(candidate);
    }
  }
  return cloud;
}

StencilSample sample_stencil(const NodeCloud& cloud, const GenConfig& config, Rng& rng) {
  config.validate();
  const int s = config.stencil_size;
  const int pool = config.pool_size();
  const auto n = cloud.points.size();
  if (n < static_cast<std::size_t>(pool)) {
    throw InsufficientCandidatesError("cloud has " + std::to_string(n) + " nodes, pool needs " +
                                      std::to_string(pool));
  }

  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  const std::size_t center = pick(rng);
  const Point2 c = cloud.points[center];

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> dist(n);
  for (std::size_t i = 0; i < n; ++i) dist[i] = distance(cloud.points[i], c);
  auto closer = [&](std::size_t a, std::size_t b) { return dist[a] != dist[b] ? dist[a] < dist[b] : a < b; };
  std::partial_sort(order.begin(), order.begin() + pool, order.end(), closer);

  // order[0] is the center itself (distance 0, ties broken by index only among
  // coincident nodes, which a valid cloud does not have).
  std::vector<std::size_t> candidates;
  std::vector<double> weights;
  for (int k = 0; k < pool; ++k) {
    if (order[k] == center) continue;
    candidates.push_back(order[k]);
    weights.push_back(std::pow(1.0 + dist[order[k]] / cloud.spacing_h, -config.decay_beta));
  }
  candidates.resize(pool - 1);
  weights.resize(pool - 1);

  StencilSample sample;
  sample.center_index = 0;
  sample.nodes.reserve(s);
  sample.nodes.push_back(c);

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int draw = 1; draw < s; ++draw) {
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    double target = unit(rng) * total;
    std::size_t chosen = weights.size();
    for (std::size_t k = 0; k < weights.size(); ++k) {
      if (weights[k] == 0.0) continue;
      chosen = k;
      if (target < weights[k]) break;
      target -= weights[k];
    }
    sample.nodes.push_back(cloud.points[candidates[chosen]]);
    weights[chosen] = 0.0;
  }
  return sample;
}

std::vector<StencilSample> recenter_variants(const StencilSample& sample) {
  std::vector<StencilSample> variants;
  variants.reserve(sample.nodes.size());
  for (int k = 0; k < sample.size(); ++k) variants.push_back(StencilSample{sample.nodes, k});
  return variants;
}

Stencil normalize(const StencilSample& sample) {
  if (sample.nodes.empty() || sample.center_index < 0 || sample.center_index >= sample.size()) {
    throw ContractError("stencil sample has no valid center");
  }
  const Point2 c = sample.nodes[sample.center_index];
  Stencil out;
  out.coords.reserve(sample.nodes.size());
  out.coords.push_back({0.0, 0.0});
  double radius = 0.0;
  for (int k = 0; k < sample.size(); ++k) {
    if (k == sample.center_index) continue;
    const Point2 rel = sample.nodes[k] - c;
    radius = std::max(radius, norm(rel));
    out.coords.push_back(rel);
  }
  if (!(radius > 0.0)) throw ZeroRadiusError();
  for (auto& p : out.coords) p = {p.x / radius, p.y / radius};
  return out;
}

bool has_distinct_nodes(std::span<const Point2> nodes, double scale) {
  const double tol = kDuplicateTolerance * scale;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    for (std::size_t j = i + 1; j < nodes.size(); ++j) {
      if (distance(nodes[i], nodes[j]) < tol) return false;
    }
  }
  return true;
}

}  // namespace stencilml
