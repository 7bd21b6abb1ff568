#pragma once

#include <array>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "stencilml/labeling.hpp"

namespace stencilml {

using ClassProbabilities = std::array<double, kNumQuartiles>;

/// counts[true][predicted]
struct ConfusionMatrix {
  std::array<std::array<long, kNumQuartiles>, kNumQuartiles> counts{};

  long total() const;
  long row_sum(int truth) const;
  long column_sum(int predicted) const;
  /// Each column divided by its sum; empty columns stay zero.
  std::array<std::array<double, kNumQuartiles>, kNumQuartiles> column_normalized() const;
};

ConfusionMatrix confusion(std::span<const Quartile> predictions, std::span<const Quartile> truths);

struct ClassMetrics {
  std::array<double, kNumQuartiles> precision{};
  std::array<double, kNumQuartiles> recall{};
  std::array<double, kNumQuartiles> f1{};
  double accuracy = 0.0;
};

/// Empty denominators give 0; F1 is 0 when precision + recall is 0.
ClassMetrics class_metrics(const ConfusionMatrix& matrix);

double f1_score(double precision, double recall);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;
  double auc = 0.0;
};

/// Threshold sweep over the distinct scores, highest first, from (0,0) to (1,1); AUC by
/// the trapezoidal rule (ties contribute one half). Throws InsufficientDataError when
/// either class is absent.
RocCurve roc_auc(std::span<const double> scores, const std::vector<bool>& positives);

struct MedianReport {
  /// Predicted-Q1 records whose error is below their size's median.
  double q1_better = 0.0;
  long q1_count = 0;
  /// Predicted-Q4 records whose error is above their size's median.
  double q4_worse = 0.0;
  long q4_count = 0;
};

/// The median of each size is the Q2/Q3 border of `borders`.
MedianReport median_analysis(std::span<const Quartile> predictions, std::span<const double> epsilons,
                             std::span<const int> sizes, const QuartileBorders& borders);

Quartile predicted_class(const ClassProbabilities& p);

struct EvalReport {
  std::string test_label;
  std::string train_label;
  long records = 0;
  ConfusionMatrix confusion;
  ClassMetrics metrics;
  std::array<RocCurve, kNumQuartiles> roc;
  MedianReport median;
};

/// Every record must carry a quartile.
EvalReport evaluate(std::span<const ClassProbabilities> probabilities, std::span<const LabeledStencil> records,
                    const QuartileBorders& borders);

/// Key/value lines echoed at the top of the report.
using ConfigEcho = std::vector<std::pair<std::string, std::string>>;

void write_report(std::ostream& out, const ConfigEcho& config, std::span<const EvalReport> sections);

/// `section,class,fpr,tpr` rows.
void write_roc_csv(std::ostream& out, std::span<const EvalReport> sections);

}  // namespace stencilml
