#include "stencilml/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "stencilml/error.hpp"

namespace stencilml {

long ConfusionMatrix::total() const {
  long sum = 0;
  for (const auto& row : counts) sum += std::accumulate(row.begin(), row.end(), 0L);
  return sum;
}

long ConfusionMatrix::row_sum(int truth) const {
  return std::accumulate(counts[truth].begin(), counts[truth].end(), 0L);
}

long ConfusionMatrix::column_sum(int predicted) const {
  long sum = 0;
  for (const auto& row : counts) sum += row[predicted];
  return sum;
}

std::array<std::array<double, kNumQuartiles>, kNumQuartiles> ConfusionMatrix::column_normalized() const {
  std::array<std::array<double, kNumQuartiles>, kNumQuartiles> out{};
  for (int p = 0; p < kNumQuartiles; ++p) {
    const long col = column_sum(p);
    if (col == 0) continue;
    for (int t = 0; t < kNumQuartiles; ++t) out[t][p] = static_cast<double>(counts[t][p]) / static_cast<double>(col);
  }
  return out;
}

ConfusionMatrix confusion(std::span<const Quartile> predictions, std::span<const Quartile> truths) {
  if (predictions.size() != truths.size()) throw ContractError("prediction and truth counts differ");
  if (predictions.empty()) throw ContractError("nothing to evaluate");
  ConfusionMatrix m;
  for (std::size_t i = 0; i < predictions.size(); ++i) ++m.counts[index_of(truths[i])][index_of(predictions[i])];
  return m;
}

double f1_score(double precision, double recall) {
  const double sum = precision + recall;
  return sum > 0.0 ? 2.0 * precision * recall / sum : 0.0;
}

ClassMetrics class_metrics(const ConfusionMatrix& m) {
  ClassMetrics out;
  long trace = 0;
  for (int c = 0; c < kNumQuartiles; ++c) {
    const long hit = m.counts[c][c];
    trace += hit;
    const long col = m.column_sum(c);
    const long row = m.row_sum(c);
    out.precision[c] = col ? static_cast<double>(hit) / static_cast<double>(col) : 0.0;
    out.recall[c] = row ? static_cast<double>(hit) / static_cast<double>(row) : 0.0;
    out.f1[c] = f1_score(out.precision[c], out.recall[c]);
  }
  const long total = m.total();
  out.accuracy = total ? static_cast<double>(trace) / static_cast<double>(total) : 0.0;
  return out;
}

RocCurve roc_auc(std::span<const double> scores, const std::vector<bool>& positives) {
  if (scores.size() != positives.size()) throw ContractError("score and label counts differ");
  const auto n_pos = static_cast<long>(std::count(positives.begin(), positives.end(), true));
  const auto n_neg = static_cast<long>(positives.size()) - n_pos;
  if (n_pos == 0 || n_neg == 0) throw InsufficientDataError("AUC is undefined without both positives and negatives");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve curve;
  curve.points.push_back({0.0, 0.0});
  long tp = 0;
  long fp = 0;
  double area = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    const double threshold = scores[order[i]];
    const long tp_before = tp;
    const long fp_before = fp;
    for (; i < order.size() && scores[order[i]] == threshold; ++i) (positives[order[i]] ? tp : fp) += 1;
    // trapezoid in count units: (fp step) * (tp_before + tp) / 2
    area += static_cast<double>(fp - fp_before) * static_cast<double>(tp_before + tp) / 2.0;
    curve.points.push_back({static_cast<double>(fp) / n_neg, static_cast<double>(tp) / n_pos});
  }
  curve.auc = area / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
  return curve;
}

MedianReport median_analysis(std::span<const Quartile> predictions, std::span<const double> epsilons,
                             std::span<const int> sizes, const QuartileBorders& borders) {
  if (predictions.size() != epsilons.size() || predictions.size() != sizes.size()) {
    throw ContractError("median analysis inputs differ in length");
  }
  MedianReport r;
  long better = 0;
  long worse = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double median = borders.median(sizes[i]);
    if (predictions[i] == Quartile::Q1) {
      ++r.q1_count;
      if (epsilons[i] < median) ++better;
    } else if (predictions[i] == Quartile::Q4) {
      ++r.q4_count;
      if (epsilons[i] > median) ++worse;
    }
  }
  r.q1_better = r.q1_count ? static_cast<double>(better) / static_cast<double>(r.q1_count) : 0.0;
  r.q4_worse = r.q4_count ? static_cast<double>(worse) / static_cast<double>(r.q4_count) : 0.0;
  return r;
}

Quartile predicted_class(const ClassProbabilities& p) {
  return quartile_from_index(static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin()));
}

EvalReport evaluate(std::span<const ClassProbabilities> probabilities, std::span<const LabeledStencil> records,
                    const QuartileBorders& borders) {
  if (probabilities.size() != records.size()) throw ContractError("prediction and record counts differ");
  const std::size_t n = records.size();
  std::vector<Quartile> predicted(n);
  std::vector<Quartile> truth(n);
  std::vector<double> eps(n);
  std::vector<int> sizes(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!records[i].quartile) throw ContractError("evaluation record without a quartile label");
    predicted[i] = predicted_class(probabilities[i]);
    truth[i] = *records[i].quartile;
    eps[i] = records[i].epsilon;
    sizes[i] = records[i].size();
  }
  EvalReport report;
  report.records = static_cast<long>(n);
  report.confusion = confusion(predicted, truth);
  report.metrics = class_metrics(report.confusion);
  for (int c = 0; c < kNumQuartiles; ++c) {
    std::vector<double> scores(n);
    std::vector<bool> positive(n);
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = probabilities[i][c];
      positive[i] = index_of(truth[i]) == c;
    }
    if (std::find(positive.begin(), positive.end(), true) != positive.end() &&
        std::find(positive.begin(), positive.end(), false) != positive.end()) {
      report.roc[c] = roc_auc(scores, positive);
    }
  }
  report.median = median_analysis(predicted, eps, sizes, borders);
  return report;
}

namespace {

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

void write_report(std::ostream& out, const ConfigEcho& config, std::span<const EvalReport> sections) {
  out << "# Stencil quality classifier evaluation\n\n## Configuration\n";
  for (const auto& [key, value] : config) out << key << ": " << value << '\n';

  for (const EvalReport& r : sections) {
    out << "\n## Test " << r.test_label << " / Train " << r.train_label << " (" << r.records << " records)\n";

    out << "\n### Confusion matrix (rows: true class, columns: predicted class)\n";
    out << "true\\pred";
    for (int p = 0; p < kNumQuartiles; ++p) out << '\t' << to_string(quartile_from_index(p));
    out << '\n';
    for (int t = 0; t < kNumQuartiles; ++t) {
      out << to_string(quartile_from_index(t));
      for (int p = 0; p < kNumQuartiles; ++p) out << '\t' << r.confusion.counts[t][p];
      out << '\n';
    }

    out << "\n### Confusion matrix, column-normalized\n";
    out << "true\\pred";
    for (int p = 0; p < kNumQuartiles; ++p) out << '\t' << to_string(quartile_from_index(p));
    out << '\n';
    const auto normalized = r.confusion.column_normalized();
    for (int t = 0; t < kNumQuartiles; ++t) {
      out << to_string(quartile_from_index(t));
      for (int p = 0; p < kNumQuartiles; ++p) out << '\t' << fixed(normalized[t][p]);
      out << '\n';
    }

    out << "\n### Metrics\n";
    out << "Test\tTrain\tQuartile\tPrecision\tRecall\tF1\tAccuracy\n";
    for (int c = 0; c < kNumQuartiles; ++c) {
      out << r.test_label << '\t' << r.train_label << '\t' << to_string(quartile_from_index(c)) << '\t'
          << fixed(r.metrics.precision[c]) << '\t' << fixed(r.metrics.recall[c]) << '\t' << fixed(r.metrics.f1[c])
          << '\t' << (c == 0 ? fixed(r.metrics.accuracy) : std::string()) << '\n';
    }

    out << "\n### AUC (one-vs-rest)\n";
    for (int c = 0; c < kNumQuartiles; ++c) {
      out << to_string(quartile_from_index(c)) << '\t'
          << (r.roc[c].points.empty() ? std::string("undefined") : fixed(r.roc[c].auc)) << '\n';
    }

    out << "\n### Median analysis\n";
    out << "predicted Q1 better than median: " << fixed(r.median.q1_better) << " of " << r.median.q1_count << '\n';
    out << "predicted Q4 worse than median: " << fixed(r.median.q4_worse) << " of " << r.median.q4_count << '\n';

    out << "\n### ROC points (fpr tpr)\n";
    for (int c = 0; c < kNumQuartiles; ++c) {
      out << to_string(quartile_from_index(c)) << ':';
      for (const RocPoint& p : r.roc[c].points) out << ' ' << fixed(p.fpr, 6) << ' ' << fixed(p.tpr, 6);
      out << '\n';
    }
  }
}

void write_roc_csv(std::ostream& out, std::span<const EvalReport> sections) {
  out << "section,class,fpr,tpr\n";
  for (const EvalReport& r : sections) {
    const std::string section = r.test_label + "/" + r.train_label;
    for (int c = 0; c < kNumQuartiles; ++c) {
      for (const RocPoint& p : r.roc[c].points) {
        out << section << ',' << to_string(quartile_from_index(c)) << ',' << fixed(p.fpr, 8) << ',' << fixed(p.tpr, 8)
            << '\n';
      }
    }
  }
}

}  // namespace stencilml
