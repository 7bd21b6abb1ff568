#include "stencilml/labeling.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <numeric>
#include <string>

#include <omp.h>

#include "stencilml/error.hpp"
#include "stencilml/rbf_fd.hpp"

namespace stencilml {

const char* to_string(Quartile q) {
  switch (q) {
    case Quartile::Q1: return "Q1";
    case Quartile::Q2: return "Q2";
    case Quartile::Q3: return "Q3";
    case Quartile::Q4: return "Q4";
  }
  return "?";
}

const std::array<double, 3>& QuartileBorders::at(int size) const {
  auto it = per_size.find(size);
  if (it == per_size.end()) throw MissingBordersError(size);
  return it->second;
}

double error_measure(const Stencil& stencil, std::span<const TestField> fields) {
  const OperatorWeights weights = solve_all_weights(stencil.coords);
  const Point2 center = stencil.coords.front();
  std::vector<double> samples(stencil.coords.size());
  double eps = 0.0;
  for (const TestField& field : fields) {
    for (std::size_t j = 0; j < samples.size(); ++j) samples[j] = field_value(field, stencil.coords[j]);
    const Gradient g = field_gradient(field, center);
    eps += std::abs(apply_weights(weights.dx, samples) - g.dx);
    eps += std::abs(apply_weights(weights.dy, samples) - g.dy);
    eps += std::abs(apply_weights(weights.laplacian, samples) - field_laplacian(field, center));
  }
  return eps;
}

double error_measure(const Stencil& stencil) {
  const auto fields = default_fields();
  return error_measure(stencil, fields);
}

namespace {

// Number of sorted ranks that belong to classes Q1..Qk: ceil(k N / 4).
std::size_t rank_limit(int k, std::size_t n) { return (static_cast<std::size_t>(k) * n + 3) / 4; }

}  // namespace

std::array<double, 3> compute_borders(std::span<const double> epsilons) {
  if (epsilons.size() < kNumQuartiles) {
    throw InsufficientDataError("quartile borders need at least 4 samples, got " + std::to_string(epsilons.size()));
  }
  std::vector<double> sorted(epsilons.begin(), epsilons.end());
  std::sort(sorted.begin(), sorted.end());
  std::array<double, 3> cuts{};
  for (int k = 1; k <= 3; ++k) cuts[k - 1] = sorted[rank_limit(k, sorted.size()) - 1];
  return cuts;
}

Quartile assign_class(double epsilon, int size, const QuartileBorders& borders) {
  const auto& cuts = borders.at(size);
  for (int k = 0; k < 3; ++k) {
    if (epsilon <= cuts[k]) return quartile_from_index(k);
  }
  return Quartile::Q4;
}

std::vector<Quartile> assign_classes_by_rank(std::span<const double> epsilons) {
  const std::size_t n = epsilons.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return epsilons[a] < epsilons[b]; });
  std::vector<Quartile> classes(n);
  int k = 0;
  for (std::size_t rank = 0; rank < n; ++rank) {
    while (rank >= rank_limit(k + 1, n)) ++k;
    classes[order[rank]] = quartile_from_index(k);
  }
  return classes;
}

std::vector<Point2> pad_stencil(const Stencil& stencil, int target_size) {
  if (target_size < stencil.size()) {
    throw ContractError("cannot pad a stencil of " + std::to_string(stencil.size()) + " nodes to " +
                        std::to_string(target_size));
  }
  std::vector<Point2> padded = stencil.coords;
  padded.resize(target_size, stencil.coords.empty() ? Point2{} : stencil.coords.front());
  return padded;
}

int default_worker_count() {
  if (const char* env = std::getenv("STENCILML_WORKERS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return std::max(1, omp_get_num_procs());
}

namespace {

// All recentred variants of one random sample that survive the weight solve.
std::vector<LabeledStencil> label_sample(const NodeCloud& cloud, const GenConfig& gen, std::uint64_t stream) {
  Rng rng(stream);
  const StencilSample sample = sample_stencil(cloud, gen, rng);
  std::vector<LabeledStencil> out;
  out.reserve(sample.nodes.size());
  for (const StencilSample& variant : recenter_variants(sample)) {
    Stencil stencil = normalize(variant);
    try {
      const double eps = error_measure(stencil);
      if (std::isfinite(eps)) out.push_back(LabeledStencil{std::move(stencil), eps, std::nullopt});
    } catch (const ConditioningError&) {
      // degenerate geometry: dropped, more samples are drawn as needed
    }
  }
  return out;
}

}  // namespace

std::vector<LabeledStencil> generate_labeled(const NodeCloud& cloud, const GenConfig& gen, int count, int workers) {
  gen.validate();
  if (workers <= 0) workers = default_worker_count();
  const std::uint64_t size_stream = stream_seed(gen.seed, static_cast<std::uint64_t>(gen.stencil_size));

  std::vector<LabeledStencil> records;
  records.reserve(count);
  std::uint64_t next_sample = 0;
  while (static_cast<int>(records.size()) < count) {
    const int missing = count - static_cast<int>(records.size());
    const int batch = (missing + gen.stencil_size - 1) / gen.stencil_size;
    std::vector<std::vector<LabeledStencil>> produced(batch);
    std::exception_ptr failure;

#pragma omp parallel for num_threads(workers) schedule(dynamic, 4)
    for (int b = 0; b < batch; ++b) {
      try {
        produced[b] = label_sample(cloud, gen, stream_seed(size_stream, next_sample + b));
      } catch (...) {
#pragma omp critical(stencilml_generate_failure)
        if (!failure) failure = std::current_exception();
      }
    }
    if (failure) std::rethrow_exception(failure);

    for (auto& group : produced) {
      for (auto& rec : group) {
        if (static_cast<int>(records.size()) == count) break;
        records.push_back(std::move(rec));
      }
    }
    next_sample += batch;
  }
  return records;
}

Dataset build_dataset(const GenConfig& gen, std::span<const int> sizes, int count_per_size, int workers) {
  if (sizes.empty()) throw ContractError("no stencil sizes requested");
  if (count_per_size < kNumQuartiles) {
    throw InsufficientDataError("quartile classes need at least 4 stencils per size, got " +
                                std::to_string(count_per_size));
  }
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] < kAugmentation) {
      throw ContractError("stencil size " + std::to_string(sizes[i]) + " is below the minimum of 6");
    }
    if (std::find(sizes.begin(), sizes.begin() + i, sizes[i]) != sizes.begin() + i) {
      throw ContractError("stencil size " + std::to_string(sizes[i]) + " listed twice");
    }
  }

  Dataset ds;
  ds.meta.gen = gen;
  ds.meta.sizes.assign(sizes.begin(), sizes.end());
  ds.meta.count_per_size = count_per_size;
  ds.max_size = *std::max_element(sizes.begin(), sizes.end());

  const NodeCloud cloud = fill_nodes(gen.domain, gen.spacing_h, gen.seed);
  for (int s : sizes) {
    GenConfig per_size = gen;
    per_size.stencil_size = s;
    std::vector<LabeledStencil> records = generate_labeled(cloud, per_size, count_per_size, workers);

    std::vector<double> eps(records.size());
    std::transform(records.begin(), records.end(), eps.begin(), [](const auto& r) { return r.epsilon; });
    ds.borders.per_size[s] = compute_borders(eps);
    const std::vector<Quartile> classes = assign_classes_by_rank(eps);
    for (std::size_t i = 0; i < records.size(); ++i) {
      records[i].quartile = classes[i];
      ds.records.push_back(std::move(records[i]));
    }
  }
  return ds;
}

}  // namespace stencilml
