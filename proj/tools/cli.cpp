#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "stencilml/checkpoint.hpp"
#include "stencilml/dataset_io.hpp"
#include "stencilml/error.hpp"
#include "stencilml/eval.hpp"
#include "stencilml/kernels.hpp"
#include "stencilml/labeling.hpp"
#include "stencilml/model.hpp"

namespace stencilml::cli {

namespace {

using nlohmann::json;

std::string real17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string hex64(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string join(const std::vector<int>& v, const char* sep = ",") {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? sep : "") + std::to_string(v[i]);
  return s;
}

/// "mix" for a multi-size dataset, else the size.
std::string size_label(const std::vector<int>& sizes) {
  return sizes.size() == 1 ? std::to_string(sizes.front()) : std::string("mix");
}

std::ofstream open_output(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::Data, "cannot open '" + path + "' for writing");
  return f;
}

// ---------------------------------------------------------------------------

struct GenerateArgs {
  std::vector<int> sizes;
  int count = 0;
  std::uint64_t seed = 1;
  std::string out;
  double spacing = 0.02;
  int pool = 0;
  double beta = 1.0;
  int workers = 0;
};

void run_generate(const GenerateArgs& a, std::ostream& out) {
  GenConfig gen;
  gen.seed = a.seed;
  gen.spacing_h = a.spacing;
  gen.candidate_pool = a.pool;
  gen.decay_beta = a.beta;
  const Dataset ds = build_dataset(gen, a.sizes, a.count, a.workers);
  write_dataset(a.out, ds);

  out << "wrote " << ds.records.size() << " stencils to " << a.out << '\n';
  for (int s : ds.meta.sizes) {
    std::vector<double> eps;
    for (const auto& r : ds.records) {
      if (r.size() == s) eps.push_back(r.epsilon);
    }
    const auto [lo, hi] = std::minmax_element(eps.begin(), eps.end());
    const auto& cuts = ds.borders.at(s);
    out << "s=" << s << " n=" << eps.size() << " eps min=" << *lo << " median=" << cuts[1] << " max=" << *hi
        << " borders=(" << cuts[0] << ", " << cuts[1] << ", " << cuts[2] << ")\n";
  }
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string data;
  std::string out;
  std::string history;
  ModelConfig model;
  TrainConfig train;
  std::string precision = "float32";
  bool quiet = false;
};

template <class Real>
void train_and_save(const TrainArgs& a, const Dataset& ds, std::ostream& out) {
  auto report = [&](int epoch, const EpochStats& s) {
    if (a.quiet) return;
    out << "epoch " << epoch << "/" << a.train.epochs << " loss " << s.train_loss << " acc " << s.train_accuracy
        << " test_loss " << s.test_loss << " test_acc " << s.test_accuracy << std::endl;
  };
  TrainResult<Real> result = train<Real>(ds, a.model, a.train, report);

  Checkpoint ckpt;
  ckpt.params = cast_params<double>(result.params);
  const EpochStats& last = result.history.back();
  ckpt.manifest = json{
      {"training",
       {{"seed", a.train.seed},
        {"epochs", a.train.epochs},
        {"batch_size", a.train.batch_size},
        {"test_fraction", a.train.test_fraction},
        {"split", "stratified by stencil size and class"},
        {"split_seed", stream_seed(a.train.seed, 1)},
        {"learning_rate", a.train.optimizer.learning_rate},
        {"adam_beta1", a.train.optimizer.beta1},
        {"adam_beta2", a.train.optimizer.beta2},
        {"adam_epsilon", a.train.optimizer.epsilon},
        {"bn_recalibration_batches", a.train.bn_recalibration_batches},
        {"precision", a.precision}}},
      {"dataset",
       {{"fingerprint", hex64(dataset_fingerprint(ds))},
        {"sizes", ds.meta.sizes},
        {"label", size_label(ds.meta.sizes)},
        {"records", ds.records.size()},
        {"max_size", ds.max_size}}},
      {"metrics",
       {{"train_loss", last.train_loss},
        {"train_accuracy", last.train_accuracy},
        {"test_loss", last.test_loss},
        {"test_accuracy", last.test_accuracy}}},
  };
  save_checkpoint(a.out, ckpt);

  if (!a.history.empty()) {
    std::ofstream h = open_output(a.history);
    h << "epoch,train_loss,train_acc,test_loss,test_acc\n";
    for (std::size_t e = 0; e < result.history.size(); ++e) {
      const EpochStats& s = result.history[e];
      h << e + 1 << ',' << real17(s.train_loss) << ',' << real17(s.train_accuracy) << ',' << real17(s.test_loss) << ','
        << real17(s.test_accuracy) << '\n';
    }
  }
  out << "saved checkpoint to " << a.out << " (test accuracy " << last.test_accuracy << ")\n";
}

void run_train(const TrainArgs& a, std::ostream& out) {
  const Dataset ds = read_dataset(a.data);
  if (a.precision == "float32") {
    train_and_save<float>(a, ds, out);
  } else {
    train_and_save<double>(a, ds, out);
  }
}

// ---------------------------------------------------------------------------

struct EvaluateArgs {
  std::string model;
  std::string data;
  std::string report;
  std::string roc_csv;
  std::string split = "test";
  bool allow_train_eval = false;
  std::vector<int> sizes;
  bool per_size = false;
};

std::vector<ClassProbabilities> infer(const Checkpoint& ckpt, std::span<const LabeledStencil> records) {
  std::vector<Prediction> preds;
  if (ckpt.manifest.at("training").value("precision", std::string("float64")) == "float32") {
    ModelParams<float> p = cast_params<float>(ckpt.params);
    preds = predict_all(p, records);
  } else {
    ModelParams<double> p = ckpt.params;
    preds = predict_all(p, records);
  }
  std::vector<ClassProbabilities> probs(preds.size());
  std::transform(preds.begin(), preds.end(), probs.begin(), [](const Prediction& p) { return p.probabilities; });
  return probs;
}

void run_evaluate(const EvaluateArgs& a, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(a.model);
  const Dataset ds = read_dataset(a.data);
  const json& training = ckpt.manifest.at("training");
  const json& trained_on = ckpt.manifest.at("dataset");
  const int input_size = ckpt.params.config.input_size;
  if (ds.max_size > input_size) {
    throw ContractError("dataset stencils of size " + std::to_string(ds.max_size) + " exceed the model input size " +
                        std::to_string(input_size));
  }

  const bool same_data = trained_on.at("fingerprint").get<std::string>() == hex64(dataset_fingerprint(ds));
  std::vector<std::size_t> chosen;
  std::string split_name = "all";
  if (same_data) {
    if (a.split != "test" && !a.allow_train_eval) {
      throw Error(ErrorKind::Usage, "refusing to evaluate on training records; pass --allow-train-eval to override");
    }
    const Split split = stratified_split(ds, training.at("test_fraction").get<double>(),
                                         training.at("split_seed").get<std::uint64_t>());
    split_name = a.split;
    if (a.split == "test") {
      chosen = split.test;
    } else if (a.split == "train") {
      chosen = split.train;
    }
  }
  if (chosen.empty() && split_name != "test") {
    chosen.resize(ds.records.size());
    for (std::size_t i = 0; i < chosen.size(); ++i) chosen[i] = i;
  }
  if (!a.sizes.empty()) {
    const std::set<int> keep(a.sizes.begin(), a.sizes.end());
    std::erase_if(chosen, [&](std::size_t i) { return !keep.contains(ds.records[i].size()); });
  }
  if (chosen.empty()) throw InsufficientDataError("no records selected for evaluation");

  std::vector<LabeledStencil> records;
  records.reserve(chosen.size());
  for (std::size_t i : chosen) records.push_back(ds.records[i]);
  const std::vector<ClassProbabilities> probs = infer(ckpt, records);

  const std::string train_label = trained_on.value("label", std::string("?"));
  std::vector<int> present;
  for (const auto& r : records) present.push_back(r.size());
  std::sort(present.begin(), present.end());
  present.erase(std::unique(present.begin(), present.end()), present.end());

  std::vector<EvalReport> sections;
  EvalReport whole = evaluate(probs, records, ds.borders);
  whole.test_label = size_label(present);
  whole.train_label = train_label;
  sections.push_back(whole);
  if (a.per_size && present.size() > 1) {
    for (int s : present) {
      std::vector<LabeledStencil> subset;
      std::vector<ClassProbabilities> subset_probs;
      for (std::size_t i = 0; i < records.size(); ++i) {
        if (records[i].size() != s) continue;
        subset.push_back(records[i]);
        subset_probs.push_back(probs[i]);
      }
      EvalReport r = evaluate(subset_probs, subset, ds.borders);
      r.test_label = std::to_string(s);
      r.train_label = train_label;
      sections.push_back(r);
    }
  }

  const ConfigEcho echo{
      {"model", a.model},
      {"dataset", a.data},
      {"split", same_data ? split_name : std::string("all (dataset differs from the training data)")},
      {"records", std::to_string(records.size())},
      {"sizes", join(present)},
      {"point_widths", join(ckpt.params.config.point_widths)},
      {"dense_widths", join(ckpt.params.config.dense_widths)},
      {"input_size", std::to_string(input_size)},
      {"training_seed", training.at("seed").dump()},
      {"training_epochs", training.at("epochs").dump()},
      {"precision", training.value("precision", std::string("float64"))},
  };
  if (a.report.empty()) {
    write_report(out, echo, sections);
  } else {
    std::ofstream f = open_output(a.report);
    write_report(f, echo, sections);
    out << "wrote report to " << a.report << '\n';
  }
  if (!a.roc_csv.empty()) {
    std::ofstream f = open_output(a.roc_csv);
    write_roc_csv(f, sections);
  }
  out << "accuracy " << whole.metrics.accuracy << " on " << records.size() << " records\n";
}

// ---------------------------------------------------------------------------

struct ClassifyArgs {
  std::string model;
  std::string stencil;
  std::string file;
};

std::vector<Point2> parse_points(const std::string& text) {
  std::string cleaned = text;
  for (char& c : cleaned) {
    if (c == ';' || c == ',' || c == '\n' || c == '\t') c = ' ';
  }
  std::istringstream in(cleaned);
  std::vector<double> values;
  std::string token;
  while (in >> token) {
    char* end = nullptr;
    const double v = std::strtod(token.c_str(), &end);
    if (end != token.c_str() + token.size() || !std::isfinite(v)) {
      throw Error(ErrorKind::Usage, "bad coordinate '" + token + "'");
    }
    values.push_back(v);
  }
  if (values.size() % 2 != 0) throw Error(ErrorKind::Usage, "coordinates must come in x,y pairs");
  std::vector<Point2> points(values.size() / 2);
  for (std::size_t i = 0; i < points.size(); ++i) points[i] = {values[2 * i], values[2 * i + 1]};
  return points;
}

void run_classify(const ClassifyArgs& a, std::ostream& out, std::ostream& err) {
  std::string text = a.stencil;
  if (!a.file.empty()) {
    std::ifstream f(a.file);
    if (!f) throw Error(ErrorKind::Data, "cannot open stencil file '" + a.file + "'");
    std::ostringstream buf;
    buf << f.rdbuf();
    text = buf.str();
  }
  const std::vector<Point2> points = parse_points(text);
  if (points.size() < 2) throw Error(ErrorKind::Usage, "a stencil needs a central node and at least one neighbour");

  const Stencil stencil = normalize(StencilSample{points, 0});
  if (!has_distinct_nodes(stencil.coords, 1.0)) {
    throw Error(ErrorKind::Numerical, "degenerate stencil: duplicate nodes");
  }
  double max_dev = std::abs(points[0].x) + std::abs(points[0].y);
  for (std::size_t i = 0; i < points.size(); ++i) {
    max_dev = std::max({max_dev, std::abs(points[i].x - stencil.coords[i].x), std::abs(points[i].y - stencil.coords[i].y)});
  }
  if (max_dev > 1e-9) err << "warning: stencil was not normalized; centered on the first node and scaled to unit radius\n";

  const Checkpoint ckpt = load_checkpoint(a.model);
  if (stencil.size() > ckpt.params.config.input_size) {
    throw ContractError("stencil has " + std::to_string(stencil.size()) + " nodes, the model accepts at most " +
                        std::to_string(ckpt.params.config.input_size));
  }
  const LabeledStencil rec{stencil, 0.0, std::nullopt};
  const ClassProbabilities p = infer(ckpt, std::span<const LabeledStencil>(&rec, 1)).front();
  char line[160];
  std::snprintf(line, sizeof line, "%s %.10f %.10f %.10f %.10f\n", to_string(predicted_class(p)), p[0], p[1], p[2],
                p[3]);
  out << line;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stencil quality laboratory for RBF-FD meshless methods"};
  app.require_subcommand(1);
  int threads = default_worker_count();
  app.add_option("--threads", threads, "Worker threads (default: STENCILML_WORKERS or all cores)");

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Generate a labeled stencil dataset");
  generate->add_option("--sizes", gen.sizes, "Stencil sizes, comma separated")->delimiter(',')->required();
  generate->add_option("--count", gen.count, "Stencils per size")->required();
  generate->add_option("--seed", gen.seed, "Random seed");
  generate->add_option("--out", gen.out, "Output dataset file")->required();
  generate->add_option("--spacing", gen.spacing, "Candidate node spacing h")->check(CLI::PositiveNumber);
  generate->add_option("--pool", gen.pool, "Nearest-neighbour candidate pool (0: 3 x size)")->check(CLI::NonNegativeNumber);
  generate->add_option("--beta", gen.beta, "Radial decay exponent of the sampling weight")->check(CLI::NonNegativeNumber);

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train the classifier on a dataset");
  train_cmd->add_option("--data", tr.data, "Dataset file")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--out", tr.out, "Checkpoint output")->required();
  train_cmd->add_option("--history", tr.history, "Per-epoch history CSV output");
  train_cmd->add_option("--epochs", tr.train.epochs, "Training epochs")->check(CLI::PositiveNumber);
  train_cmd->add_option("--batch-size", tr.train.batch_size, "Batch size")->check(CLI::PositiveNumber);
  train_cmd->add_option("--test-fraction", tr.train.test_fraction, "Held-out fraction")->check(CLI::Range(0.0, 1.0));
  train_cmd->add_option("--dropout", tr.model.dropout, "Dropout rate of the dense layers")->check(CLI::Range(0.0, 1.0));
  train_cmd->add_option("--learning-rate", tr.train.optimizer.learning_rate, "Adam step size");
  train_cmd->add_option("--bn-momentum", tr.model.bn_momentum, "Running statistics momentum");
  train_cmd
      ->add_option("--bn-recalibration-batches", tr.train.bn_recalibration_batches,
                   "Training batches used to re-estimate running statistics after each epoch (0: off)")
      ->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--seed", tr.train.seed, "Training seed");
  train_cmd->add_option("--point-widths", tr.model.point_widths, "Per-point layer widths")->delimiter(',');
  train_cmd->add_option("--dense-widths", tr.model.dense_widths, "Dense layer widths")->delimiter(',');
  train_cmd->add_option("--precision", tr.precision, "Training arithmetic")
      ->check(CLI::IsMember({"float32", "float64"}));
  train_cmd->add_flag("--quiet", tr.quiet, "No per-epoch progress");

  EvaluateArgs ev;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Evaluate a checkpoint and write a report");
  evaluate_cmd->add_option("--model", ev.model, "Checkpoint")->required()->check(CLI::ExistingFile);
  evaluate_cmd->add_option("--data", ev.data, "Dataset file")->required()->check(CLI::ExistingFile);
  evaluate_cmd->add_option("--report", ev.report, "Report output (default: standard output)");
  evaluate_cmd->add_option("--roc-csv", ev.roc_csv, "ROC points as CSV");
  evaluate_cmd->add_option("--split", ev.split, "Records of the training dataset to use")
      ->check(CLI::IsMember({"test", "train", "all"}));
  evaluate_cmd->add_flag("--allow-train-eval", ev.allow_train_eval, "Permit evaluating on training records");
  evaluate_cmd->add_option("--sizes", ev.sizes, "Only these stencil sizes")->delimiter(',');
  evaluate_cmd->add_flag("--per-size", ev.per_size, "Add one report section per stencil size");

  ClassifyArgs cl;
  auto* classify_cmd = app.add_subcommand("classify", "Classify one stencil (central node first)");
  classify_cmd->add_option("--model", cl.model, "Checkpoint")->required()->check(CLI::ExistingFile);
  auto* inline_opt = classify_cmd->add_option("--stencil", cl.stencil, "Coordinates \"x,y;x,y;...\"");
  auto* file_opt = classify_cmd->add_option("--file", cl.file, "File with one x,y pair per line");
  inline_opt->excludes(file_opt);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
    if (classify_cmd->parsed() && cl.stencil.empty() && cl.file.empty()) {
      throw CLI::RequiredError("--stencil or --file");
    }
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    err << "usage error: " << e.what() << '\n';
    return static_cast<int>(ErrorKind::Usage);
  }

  try {
    kernels::set_threads(threads);
    gen.workers = threads;
    if (generate->parsed()) run_generate(gen, out);
    if (train_cmd->parsed()) run_train(tr, out);
    if (evaluate_cmd->parsed()) run_evaluate(ev, out);
    if (classify_cmd->parsed()) run_classify(cl, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace stencilml::cli
