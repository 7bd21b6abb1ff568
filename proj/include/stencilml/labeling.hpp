#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "stencilml/fields.hpp"
#include "stencilml/node_gen.hpp"

namespace stencilml {

enum class Quartile : int { Q1 = 0, Q2 = 1, Q3 = 2, Q4 = 3 };

inline constexpr int kNumQuartiles = 4;

inline int index_of(Quartile q) { return static_cast<int>(q); }
inline Quartile quartile_from_index(int i) { return static_cast<Quartile>(i); }
const char* to_string(Quartile q);

struct LabeledStencil {
  Stencil stencil;
  double epsilon = 0.0;
  std::optional<Quartile> quartile;

  int size() const { return stencil.size(); }
};

/// Three cut values per stencil size: Q1 holds eps <= cuts[0], Q2 eps <= cuts[1], ...
struct QuartileBorders {
  std::map<int, std::array<double, 3>> per_size;

  const std::array<double, 3>& at(int size) const;
  /// Median error of the size (the Q2/Q3 border).
  double median(int size) const { return at(size)[1]; }
};

struct DatasetMetadata {
  GenConfig gen;
  std::vector<int> sizes;
  int count_per_size = 0;
  std::array<TestField, 3> fields = default_fields();
};

struct Dataset {
  std::vector<LabeledStencil> records;
  int max_size = 0;
  QuartileBorders borders;
  DatasetMetadata meta;
};

/// Sum over the test fields of |dx error| + |dy error| + |laplacian error| at the central
/// node. Propagates ConditioningError for degenerate stencils.
double error_measure(const Stencil& stencil, std::span<const TestField> fields);
double error_measure(const Stencil& stencil);

/// Cuts at ranks ceil(k N / 4) - 1 of the sorted errors. Needs at least 4 values.
std::array<double, 3> compute_borders(std::span<const double> epsilons);

/// Ties with a border fall into the lower class.
Quartile assign_class(double epsilon, int size, const QuartileBorders& borders);

/// Class by rank in (epsilon, position) order, matching the border rule for distinct
/// values and keeping every class within one of N/4 when values tie.
std::vector<Quartile> assign_classes_by_rank(std::span<const double> epsilons);

/// Appends copies of the central node (origin) up to `target_size` points.
std::vector<Point2> pad_stencil(const Stencil& stencil, int target_size);

/// Generates, labels and classifies `count_per_size` stencils for each size.
/// `workers` <= 0 selects the default worker count. Output is identical for every
/// worker count.
Dataset build_dataset(const GenConfig& gen, std::span<const int> sizes, int count_per_size, int workers = 0);

/// `count` labeled stencils (quartile unset) of size gen.stencil_size. Sample k draws
/// from the random stream stream_seed(stream_seed(gen.seed, size), k).
std::vector<LabeledStencil> generate_labeled(const NodeCloud& cloud, const GenConfig& gen, int count,
                                             int workers = 0);

/// Worker count from STENCILML_WORKERS, else the number of available processors.
int default_worker_count();

}  // namespace stencilml
