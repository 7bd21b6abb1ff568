// Acceptance suite: one PASS/FAIL line per criterion, thresholds pinned below.
// Usage: acceptance [work_dir] [--only N,M,...]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "cli.hpp"
#include "stencilml/dataset_io.hpp"
#include "stencilml/error.hpp"
#include "stencilml/eval.hpp"
#include "stencilml/labeling.hpp"
#include "stencilml/model.hpp"
#include "stencilml/rbf_fd.hpp"
#include "support.hpp"

using namespace stencilml;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace limits {

// 1. RBF-FD exactness
constexpr int kExactnessStencils = 1000;
constexpr double kExactnessTolerance = 1e-8;
constexpr double kExactnessSeconds = 10.0;
// 2. Oracle equivalence
constexpr int kOracleStencils = 100;
constexpr double kOracleRelative = 1e-10;
// 3. Error distribution shape
constexpr int kShapeCount = 10000;
constexpr double kTailQuantile = 0.99;
// 4. Quartile balance
constexpr double kBalanceSlack = 1.0;
// 5. Network invariances
constexpr int kInvarianceStencils = 100;
constexpr double kSoftmaxTolerance = 1e-6;
// 6. Gradient check
constexpr int kGradientParams = 50;
constexpr double kGradientStep = 1e-3;
constexpr double kGradientRelative = 1e-4;
// 7. Desk-scale training
constexpr int kDeskCount = 20000;
constexpr int kDeskSize = 15;
constexpr int kDeskBatch = 1024;
constexpr int kDeskEpochs = 20;
constexpr double kDeskAccuracy = 0.45;
constexpr double kDeskQ4Recall = 0.60;
constexpr double kDeskQ4Auc = 0.80;
constexpr double kDeskMinutes = 30.0;
// 8. Median analysis
constexpr double kMedianFraction = 0.80;
// 9. Null control
constexpr double kNullLow = 0.20;
constexpr double kNullHigh = 0.30;

}  // namespace limits

namespace {

constexpr std::uint64_t kSeed = 2024;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double monomial(Exponents e, Point2 p) { return std::pow(p.x, e.nx) * std::pow(p.y, e.ny); }

double monomial_exact(DiffOp op, Exponents e) {
  // derivatives at the origin
  switch (op) {
    case DiffOp::Dx:
      return e.nx == 1 && e.ny == 0 ? 1.0 : 0.0;
    case DiffOp::Dy:
      return e.nx == 0 && e.ny == 1 ? 1.0 : 0.0;
    case DiffOp::Laplacian:
      return (e.nx == 2 && e.ny == 0) || (e.nx == 0 && e.ny == 2) ? 2.0 : 0.0;
  }
  return 0.0;
}

/// Random valid stencils: sampled, re-centered on a random node, normalized, solvable.
std::vector<Stencil> valid_stencils(int s, int count, std::uint64_t seed) {
  static const NodeCloud cloud = fill_nodes({{0.0, 0.0}, {1.0, 1.0}}, 0.02, seed);
  GenConfig gen;
  gen.stencil_size = s;
  Rng rng(seed + static_cast<std::uint64_t>(s));
  std::vector<Stencil> out;
  while (static_cast<int>(out.size()) < count) {
    const StencilSample sample = sample_stencil(cloud, gen, rng);
    const auto variants = recenter_variants(sample);
    Stencil st = normalize(variants[rng() % variants.size()]);
    try {
      solve_all_weights(st.coords);
    } catch (const ConditioningError&) {
      continue;
    }
    out.push_back(std::move(st));
  }
  return out;
}

double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  return v[static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size()))) - 1];
}

bool balanced(const Dataset& ds, std::string& worst) {
  std::map<int, std::array<long, 4>> counts;
  std::map<int, long> totals;
  for (const auto& r : ds.records) {
    if (!r.quartile) return false;
    ++counts[r.size()][index_of(*r.quartile)];
    ++totals[r.size()];
  }
  bool ok = true;
  for (const auto& [s, c] : counts) {
    const double quarter = static_cast<double>(totals[s]) / 4.0;
    for (long n : c) ok = ok && std::abs(static_cast<double>(n) - quarter) <= limits::kBalanceSlack;
    worst += fmt("s=%d:[%ld,%ld,%ld,%ld] ", s, c[0], c[1], c[2], c[3]);
  }
  return ok;
}

// Shared state between criteria 3/4 and 7/8/9/5.
struct Shared {
  fs::path dir;
  std::optional<Dataset> shape_data;
  std::optional<Dataset> desk_data;
  std::optional<TrainResult<float>> desk_model;
  std::optional<EvalReport> desk_report;
  double desk_minutes = 0.0;
};

Dataset& desk_dataset(Shared& sh) {
  if (!sh.desk_data) {
    GenConfig gen;
    gen.seed = kSeed;
    const auto t0 = Clock::now();
    sh.desk_data = build_dataset(gen, std::vector<int>{limits::kDeskSize}, limits::kDeskCount);
    sh.desk_minutes += seconds_since(t0) / 60.0;
  }
  return *sh.desk_data;
}

EvalReport evaluate_split(ModelParams<float>& params, const Dataset& ds, const std::vector<std::size_t>& idx) {
  std::vector<LabeledStencil> records;
  for (std::size_t i : idx) records.push_back(ds.records[i]);
  const auto preds = predict_all(params, std::span<const LabeledStencil>(records));
  std::vector<ClassProbabilities> probs;
  for (const auto& p : preds) probs.push_back(p.probabilities);
  return evaluate(probs, records, ds.borders);
}

void print_history(const TrainHistory& h) {
  for (std::size_t e = 0; e < h.size(); ++e) {
    std::printf("    epoch %2zu  train_loss %.4f  train_acc %.4f  test_loss %.4f  test_acc %.4f\n", e + 1,
                h[e].train_loss, h[e].train_accuracy, h[e].test_loss, h[e].test_accuracy);
  }
  std::fflush(stdout);
}

EvalReport& desk_training(Shared& sh) {
  if (!sh.desk_report) {
    Dataset& ds = desk_dataset(sh);
    ModelConfig mc;
    mc.input_size = ds.max_size;
    TrainConfig tc;
    tc.batch_size = limits::kDeskBatch;
    tc.epochs = limits::kDeskEpochs;
    tc.seed = kSeed;
    const auto t0 = Clock::now();
    sh.desk_model = train<float>(ds, mc, tc);
    sh.desk_minutes += seconds_since(t0) / 60.0;
    print_history(sh.desk_model->history);
    sh.desk_report = evaluate_split(sh.desk_model->params, ds, sh.desk_model->split.test);
  }
  return *sh.desk_report;
}

// ---------------------------------------------------------------------------

Outcome criterion_1(Shared&) {
  const auto t0 = Clock::now();
  double worst = 0.0;
  long checks = 0;
  for (int s : {6, 9, 15}) {
    for (const Stencil& st : valid_stencils(s, limits::kExactnessStencils, kSeed)) {
      const OperatorWeights w = solve_all_weights(st.coords);
      for (Exponents e : kMonomials) {
        std::vector<double> values;
        for (const Point2& p : st.coords) values.push_back(monomial(e, p));
        for (DiffOp op : kAllOps) {
          const double exact = monomial_exact(op, e);
          const double err = std::abs(apply_weights(w[op], values) - exact) / std::max(1.0, std::abs(exact));
          worst = std::max(worst, err);
          ++checks;
        }
      }
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= limits::kExactnessTolerance && secs < limits::kExactnessSeconds,
          fmt("%ld checks, worst scaled error %.3g (<= %.0e), %.2f s (< %.0f s)", checks, worst,
              limits::kExactnessTolerance, secs, limits::kExactnessSeconds)};
}

Outcome criterion_2(Shared&) {
  double worst = 0.0;
  int n = 0;
  const int sizes[] = {6, 7, 9, 12, 15};
  for (int s : sizes) {
    for (const Stencil& st : valid_stencils(s, limits::kOracleStencils / 5, kSeed + 1)) {
      const double eps = error_measure(st);
      const double ref = testing::oracle::epsilon(st.coords);
      worst = std::max(worst, std::abs(eps - ref) / std::abs(ref));
      ++n;
    }
  }
  return {worst <= limits::kOracleRelative,
          fmt("%d stencils, worst relative deviation %.3g (<= %.0e)", n, worst, limits::kOracleRelative)};
}

Outcome criterion_3(Shared& sh) {
  GenConfig gen;
  gen.seed = kSeed;
  sh.shape_data = build_dataset(gen, std::vector<int>{6, 15}, limits::kShapeCount);
  std::map<int, std::vector<double>> eps;
  for (const auto& r : sh.shape_data->records) eps[r.size()].push_back(r.epsilon);
  const double r6 = quantile(eps[6], limits::kTailQuantile) / quantile(eps[6], 0.5);
  const double r15 = quantile(eps[15], limits::kTailQuantile) / quantile(eps[15], 0.5);
  return {r6 > r15, fmt("p99/median: s=6 %.3f > s=15 %.3f (%d stencils per size)", r6, r15, limits::kShapeCount)};
}

Outcome criterion_4(Shared& sh) {
  GenConfig gen;
  gen.seed = kSeed + 4;
  std::vector<std::pair<std::string, Dataset>> sets;
  sets.emplace_back("mix 6,7,9,12,15 x 1001", build_dataset(gen, std::vector<int>{6, 7, 9, 12, 15}, 1001));
  sets.emplace_back("s=9 x 1002", build_dataset(gen, std::vector<int>{9}, 1002));
  if (sh.shape_data) sets.emplace_back("s=6,15 x 10000", *sh.shape_data);
  sets.emplace_back("s=15 x 20000", desk_dataset(sh));
  bool ok = true;
  std::string detail;
  for (auto& [name, ds] : sets) {
    std::string counts;
    const bool b = balanced(ds, counts);
    ok = ok && b;
    detail += name + " " + counts + (b ? "" : "UNBALANCED ");
  }
  return {ok, detail + fmt("(each within +-%.0f of N/4)", limits::kBalanceSlack)};
}

template <class Real>
bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

Outcome criterion_5(Shared& sh) {
  ModelParams<float> params = sh.desk_model ? sh.desk_model->params : init_model<float>(ModelConfig{}, kSeed);
  const int input = params.config.input_size;
  std::mt19937_64 rng(kSeed);
  Rng unused(0);
  int perm_ok = 0, pad_ok = 0;
  double worst_sum = 0.0;
  const std::vector<Stencil> stencils = valid_stencils(input, limits::kInvarianceStencils, kSeed + 5);
  for (const Stencil& st : stencils) {
    const auto base = forward(params, std::span<const Point2>(st.coords), Mode::Infer, unused);
    double sum = 0.0;
    for (double p : base) sum += p;
    worst_sum = std::max(worst_sum, std::abs(sum - 1.0));

    auto permuted = st.coords;
    std::shuffle(permuted.begin(), permuted.end(), rng);
    perm_ok += same_bits<float>(forward(params, std::span<const Point2>(permuted), Mode::Infer, unused), base);

    auto padded = st.coords;
    const int extra = 1 + static_cast<int>(rng() % 8);
    for (int k = 0; k < extra; ++k) padded.push_back(st.coords[rng() % st.coords.size()]);
    pad_ok += same_bits<float>(forward(params, std::span<const Point2>(padded), Mode::Infer, unused), base);
  }
  const int n = static_cast<int>(stencils.size());
  return {perm_ok == n && pad_ok == n && worst_sum <= limits::kSoftmaxTolerance,
          fmt("%s model: permutation bitwise %d/%d, duplicate padding bitwise %d/%d, max |sum-1| %.2g (<= %.0e)",
              sh.desk_model ? "trained" : "initial", perm_ok, n, pad_ok, n, worst_sum, limits::kSoftmaxTolerance)};
}

Outcome criterion_6(Shared&) {
  ModelConfig mc;
  mc.input_size = 15;
  ModelParams<double> p = init_model<double>(mc, kSeed);
  std::mt19937_64 rng(kSeed + 6);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  auto perturb = [&](Layer<double>& l) {
    for (double& v : l.running_mean) v = u(rng);
    for (double& v : l.running_var) v = 1.0 + u(rng);
    for (double& v : l.gamma) v = 1.0 + u(rng);
    for (double& v : l.beta) v = u(rng);
  };
  for (auto& l : p.point_layers) perturb(l);
  for (auto& l : p.dense_layers) perturb(l);

  const int batch = 4;
  std::vector<LabeledStencil> recs;
  for (const Stencil& st : valid_stencils(15, batch, kSeed + 6)) recs.push_back({st, 0.0, std::nullopt});
  std::vector<std::size_t> idx{0, 1, 2, 3};
  const Matrix<double> input = pack_inputs<double>(recs, idx, 15);
  const std::vector<int> labels{0, 1, 2, 3};
  const PassOptions opt{};  // fixed statistics, no dropout

  auto evaluate_loss = [&](std::vector<char>* pattern) {
    Rng r(0);
    ForwardCache<double> cache;
    forward(p, input, batch, opt, r, cache);
    double total = 0.0;
    for (int b = 0; b < batch; ++b) total += -std::log(cache.probabilities(b, labels[b]));
    if (pattern) {
      pattern->clear();
      std::vector<const Layer<double>*> layers;
      for (const auto& l : p.point_layers) layers.push_back(&l);
      for (const auto& l : p.dense_layers) layers.push_back(&l);
      for (std::size_t l = 0; l < layers.size(); ++l) {
        const Matrix<double>& xhat = cache.xhat[l];
        for (int i = 0; i < xhat.rows; ++i) {
          for (int j = 0; j < xhat.cols; ++j) {
            pattern->push_back(std::fma(layers[l]->gamma[j], xhat(i, j), layers[l]->beta[j]) > 0.0);
          }
        }
      }
      for (int a : cache.argmax) pattern->push_back(static_cast<char>(a));
    }
    return total / batch;
  };

  Rng r(0);
  ForwardCache<double> cache;
  forward(p, input, batch, opt, r, cache);
  ModelParams<double> g = zeros_like(p);
  backward(p, cache, labels, g);

  auto params = p.tensors(true);
  auto grads = g.tensors(true);
  std::vector<std::pair<std::size_t, std::size_t>> all;
  for (std::size_t t = 0; t < params.size(); ++t) {
    for (std::size_t i = 0; i < params[t].values.size(); ++i) all.emplace_back(t, i);
  }
  std::shuffle(all.begin(), all.end(), rng);

  std::vector<char> base, up_pattern, down_pattern;
  evaluate_loss(&base);
  int checked = 0, skipped_kink = 0, skipped_flat = 0;
  double worst = 0.0;
  for (const auto& [t, i] : all) {
    if (checked == limits::kGradientParams) break;
    double& w = params[t].values[i];
    const double saved = w;
    w = saved + limits::kGradientStep;
    const double up = evaluate_loss(&up_pattern);
    w = saved - limits::kGradientStep;
    const double down = evaluate_loss(&down_pattern);
    w = saved;
    if (up_pattern != base || down_pattern != base) {
      ++skipped_kink;
      continue;
    }
    const double numeric = (up - down) / (2 * limits::kGradientStep);
    const double analytic = grads[t].values[i];
    const double scale = std::max(std::abs(numeric), std::abs(analytic));
    if (scale < 1e-8) {
      ++skipped_flat;
      continue;
    }
    worst = std::max(worst, std::abs(analytic - numeric) / scale);
    ++checked;
  }
  return {checked == limits::kGradientParams && worst <= limits::kGradientRelative,
          fmt("%d parameters (default widths, float64, step %.0e), worst relative error %.3g (<= %.0e); "
              "skipped %d straddling a kink, %d with |grad| < 1e-8",
              checked, limits::kGradientStep, worst, limits::kGradientRelative, skipped_kink, skipped_flat)};
}

Outcome criterion_7(Shared& sh) {
  const EvalReport& r = desk_training(sh);
  const double acc = r.metrics.accuracy;
  const double recall = r.metrics.recall[3];
  const double auc = r.roc[3].auc;
  const bool ok = acc >= limits::kDeskAccuracy && recall >= limits::kDeskQ4Recall && auc >= limits::kDeskQ4Auc &&
                  sh.desk_minutes < limits::kDeskMinutes;
  return {ok, fmt("%ld test stencils: accuracy %.4f (>= %.2f), Q4 recall %.4f (>= %.2f), Q4 AUC %.4f (>= %.2f), "
                  "generate+train %.1f min (< %.0f)",
                  r.records, acc, limits::kDeskAccuracy, recall, limits::kDeskQ4Recall, auc, limits::kDeskQ4Auc,
                  sh.desk_minutes, limits::kDeskMinutes)};
}

Outcome criterion_8(Shared& sh) {
  const EvalReport& r = desk_training(sh);
  const MedianReport& m = r.median;
  return {m.q1_better >= limits::kMedianFraction && m.q4_worse >= limits::kMedianFraction,
          fmt("predicted Q1 below median %.4f of %ld, predicted Q4 above median %.4f of %ld (both >= %.2f)",
              m.q1_better, m.q1_count, m.q4_worse, m.q4_count, limits::kMedianFraction)};
}

Outcome criterion_9(Shared& sh) {
  Dataset ds = desk_dataset(sh);
  std::vector<std::optional<Quartile>> labels;
  for (const auto& r : ds.records) labels.push_back(r.quartile);
  std::mt19937_64 rng(kSeed + 9);
  std::shuffle(labels.begin(), labels.end(), rng);
  for (std::size_t i = 0; i < labels.size(); ++i) ds.records[i].quartile = labels[i];

  ModelConfig mc;
  mc.input_size = ds.max_size;
  TrainConfig tc;
  tc.batch_size = limits::kDeskBatch;
  tc.epochs = limits::kDeskEpochs;
  tc.seed = kSeed + 9;
  TrainResult<float> result = train<float>(ds, mc, tc);
  print_history(result.history);
  const EvalReport r = evaluate_split(result.params, ds, result.split.test);
  const double acc = r.metrics.accuracy;
  return {acc >= limits::kNullLow && acc <= limits::kNullHigh,
          fmt("label-shuffled test accuracy %.4f (in [%.2f, %.2f])", acc, limits::kNullLow, limits::kNullHigh)};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

Outcome criterion_10(Shared& sh) {
  auto run_pipeline = [&](const std::string& tag, const std::string& threads) {
    const fs::path dir = sh.dir / "determinism" / tag;
    fs::create_directories(dir);
    // each run works in its own directory with the same relative names, so echoed paths match
    fs::current_path(dir);
    auto p = [](const char* name) { return std::string("run") + name; };
    std::ostringstream out, err;
    int status = cli::run_cli({"--threads", threads, "generate", "--sizes", "6,15", "--count", "1000", "--seed",
                               "11", "--out", p(".ds")},
                              out, err);
    if (status == 0) {
      status = cli::run_cli({"--threads", threads, "train", "--data", p(".ds"), "--out", p(".ckpt"), "--history",
                             p(".history.csv"), "--epochs", "3", "--seed", "5", "--quiet"},
                            out, err);
    }
    if (status == 0) {
      status = cli::run_cli({"--threads", threads, "evaluate", "--model", p(".ckpt"), "--data", p(".ds"),
                             "--report", p(".report.txt"), "--roc-csv", p(".roc.csv")},
                            out, err);
    }
    if (status != 0) std::cerr << err.str();
    return status;
  };
  const fs::path previous = fs::current_path();
  const int a = run_pipeline("a", "1");
  const int b = run_pipeline("b", "2");
  fs::current_path(previous);
  if (a != 0 || b != 0) return {false, fmt("pipeline exit status %d / %d", a, b)};
  bool ok = true;
  std::string detail;
  for (const char* ext : {".ds", ".ckpt", ".history.csv", ".report.txt", ".roc.csv"}) {
    const std::string x = slurp(sh.dir / "determinism" / "a" / (std::string("run") + ext));
    const std::string y = slurp(sh.dir / "determinism" / "b" / (std::string("run") + ext));
    const bool same = !x.empty() && x == y;
    ok = ok && same;
    detail += fmt("%s %s (%zu bytes); ", ext + 1, same ? "identical" : "DIFFERENT", x.size());
  }
  return {ok, detail + "runs used 1 and 2 worker threads"};
}

}  // namespace

int main(int argc, char** argv) {
  Shared shared;
  shared.dir = fs::temp_directory_path() / "stencilml_acceptance";
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) {
      std::stringstream list(argv[++i]);
      for (std::string item; std::getline(list, item, ',');) only.insert(std::stoi(item));
    } else {
      shared.dir = fs::absolute(argv[i]);
    }
  }
  fs::create_directories(shared.dir);

  // Criterion 5 runs after 7 so it can use the trained network.
  const std::vector<std::pair<int, std::function<Outcome(Shared&)>>> order{
      {1, criterion_1}, {2, criterion_2}, {3, criterion_3}, {4, criterion_4},  {6, criterion_6},
      {7, criterion_7}, {8, criterion_8}, {5, criterion_5}, {9, criterion_9}, {10, criterion_10}};
  const std::map<int, const char*> names{
      {1, "RBF-FD exactness"},      {2, "oracle equivalence"},    {3, "error distribution shape"},
      {4, "quartile balance"},      {5, "network invariances"},   {6, "gradient check"},
      {7, "desk-scale training"},   {8, "median analysis"},       {9, "null control"},
      {10, "determinism"}};

  std::ofstream report(shared.dir / "acceptance_report.txt");
  std::map<int, Outcome> results;
  for (const auto& [id, fn] : order) {
    if (!only.empty() && !only.contains(id)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = fn(shared);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const std::string line = fmt("[%s] %2d %s: ", o.pass ? "PASS" : "FAIL", id, names.at(id)) + o.detail +
                             fmt(" [%.1f s]", seconds_since(t0));
    std::printf("%s\n", line.c_str());
    std::fflush(stdout);
    report << line << '\n' << std::flush;
    results[id] = o;
  }

  int failed = 0;
  std::printf("\nsummary\n");
  for (const auto& [id, o] : results) {
    std::printf("  %-4s %2d %s\n", o.pass ? "PASS" : "FAIL", id, names.at(id));
    failed += !o.pass;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(results.size()) - failed, results.size());
  report << fmt("%d of %zu criteria passed\n", static_cast<int>(results.size()) - failed, results.size());
  return failed == 0 ? 0 : 1;
}
