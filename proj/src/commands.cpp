#include "subens/commands.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "subens/csv.hpp"
#include "subens/ensemble.hpp"
#include "subens/error.hpp"
#include "subens/kernels.hpp"
#include "subens/metrics.hpp"
#include "subens/perf.hpp"

namespace subens::cli {

namespace fs = std::filesystem;

namespace {

template <class F>
auto stage(const char* name, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

struct Workspace {
  TrainTest data;
  NetworkSpec spec;
  SplitPoint split_at;
};

TrainTest load_data(const RunConfig& cfg) {
  return stage("data", [&] {
    if (cfg.train_idx) {
      Dataset train = load_idx(cfg.train_idx->images, cfg.train_idx->labels, Partition::Train);
      Dataset test = load_idx(cfg.test_idx->images, cfg.test_idx->labels, Partition::Test, train.num_classes);
      return standardize(std::move(train), std::move(test));
    }
    return synthetic_train_test(cfg.synthetic, cfg.test_per_class);
  });
}

NetworkSpec build_spec(const RunConfig& cfg, const Dataset& train) {
  return stage("network", [&] {
    NetworkSpec spec;
    if (cfg.arch == "mnist") {
      spec = mnist_preset();
    } else if (cfg.arch == "small") {
      spec = small_cnn_preset(train.example_shape(), train.num_classes);
    } else {
      spec = read_network_file(cfg.arch);
    }
    if (spec.input_shape != train.example_shape() || spec.num_classes != train.num_classes) {
      throw ConfigError("architecture expects input " + shape_to_string(spec.input_shape) + " with " +
                        std::to_string(spec.num_classes) + " classes; data has " +
                        shape_to_string(train.example_shape()) + " with " + std::to_string(train.num_classes));
    }
    return spec;
  });
}

Workspace prepare(const RunConfig& cfg) {
  stage("config", [&] { cfg.validate(); });
  kernels::set_backend(cfg.parallel ? kernels::Backend::Parallel : kernels::Backend::Reference);
  Workspace ws{load_data(cfg), {}, {}};
  ws.spec = build_spec(cfg, ws.data.train);
  ws.split_at = stage("network", [&] { return parse_split(ws.spec, cfg.split); });
  return ws;
}

EnsembleMode mode_of(const RunConfig& cfg) { return cfg.mode == "deep" ? EnsembleMode::Deep : EnsembleMode::Sub; }

std::string output_path(const RunConfig& cfg, const std::string& default_name, bool primary = true) {
  fs::create_directories(cfg.out_dir);
  return (fs::path(cfg.out_dir) / (primary && !cfg.csv.empty() ? cfg.csv : default_name)).string();
}

std::string write_table(const CsvTable& table, const std::string& path) {
  stage("output", [&] { table.write(path); });
  return path;
}

/// Either ensemble kind behind one interface for the commands.
class AnyEnsemble {
 public:
  explicit AnyEnsemble(SubEnsemble e) : sub_(std::make_unique<SubEnsemble>(std::move(e))) {}
  explicit AnyEnsemble(DeepEnsemble e) : deep_(std::make_unique<DeepEnsemble>(std::move(e))) {}

  std::size_t size() const { return sub_ ? sub_->size() : deep_->size(); }
  AnyEnsemble prefix(std::size_t n) const { return sub_ ? AnyEnsemble(sub_->prefix(n)) : AnyEnsemble(deep_->prefix(n)); }
  Tensor predict(const Tensor& x) const { return sub_ ? sub_->predict_chunked(x) : deep_->predict_chunked(x); }
  MetricsReport evaluate(const Dataset& d) const { return sub_ ? subens::evaluate(*sub_, d) : subens::evaluate(*deep_, d); }

  /// The first member as a single full network.
  ParamStore base_model() const { return sub_ ? sub_->member_network(0).stitched() : deep_->members().front(); }

  void save(const std::string& dir, const RunConfig& cfg) const {
    if (sub_) {
      save_ensemble(dir, *sub_, cfg.seed, cfg.train, cfg.data_json());
    } else {
      save_ensemble(dir, *deep_, cfg.seed, cfg.train, cfg.data_json());
    }
  }

 private:
  std::unique_ptr<SubEnsemble> sub_;
  std::unique_ptr<DeepEnsemble> deep_;
};

AnyEnsemble train_ensemble(const RunConfig& cfg, const Workspace& ws, std::size_t n, std::uint64_t seed,
                           std::ostream& log) {
  log << "training " << (cfg.mode == "deep" ? "deep ensemble" : "sub-ensemble") << " with " << n << " member(s), seed "
      << seed << '\n';
  return stage("training", [&] {
    if (cfg.mode == "deep") return AnyEnsemble(train_deep_ensemble(ws.data.train, ws.spec, n, cfg.train, seed));
    return AnyEnsemble(train_sub_ensemble(ws.data.train, ws.spec, ws.split_at, n, cfg.train, seed));
  });
}

CsvTable metrics_table() { return CsvTable({"num_ensembles", "error", "nll", "flops"}); }

void add_metrics_row(CsvTable& table, std::size_t n, const MetricsReport& r, std::uint64_t flops) {
  table.row().cell(static_cast<std::uint64_t>(n)).cell(r.error_percent).cell(r.nll).cell(flops);
}

CsvTable calibration_table(const MetricsReport& report, std::size_t bins) {
  CsvTable table({"conf", "acc"});
  for (const auto& bin : calibration_curve(report.records, bins).bins) {
    if (bin.accuracy) table.row().cell(bin.mean_confidence).cell(*bin.accuracy);
  }
  return table;
}

void log_metrics(std::ostream& log, const char* what, std::size_t n, const MetricsReport& r) {
  log << what << " n=" << n << " error=" << format_double(r.error_percent) << "% nll=" << format_double(r.nll) << '\n';
}

}  // namespace

std::vector<std::string> cmd_train(const RunConfig& cfg, std::ostream& log) {
  const Workspace ws = prepare(cfg);
  const AnyEnsemble ens = train_ensemble(cfg, ws, cfg.members, cfg.seed, log);
  const auto report = stage("evaluation", [&] { return ens.evaluate(ws.data.test); });
  log_metrics(log, "test", ens.size(), report);

  const std::string dir =
      cfg.model_dir.empty() ? (fs::path(cfg.out_dir) / ("model_" + cfg.mode)).string() : cfg.model_dir;
  stage("output", [&] { ens.save(dir, cfg); });
  CsvTable table = metrics_table();
  add_metrics_row(table, ens.size(), report, ensemble_flops(ws.spec, ws.split_at, ens.size(), mode_of(cfg)));
  return {dir, write_table(table, output_path(cfg, "train_" + cfg.mode + ".csv"))};
}

std::vector<std::string> cmd_eval(const RunConfig& cfg, std::ostream& log) {
  if (cfg.model_dir.empty()) throw StageError("config", "eval needs --model-dir");
  const Workspace ws = prepare(cfg);
  const AnyEnsemble ens = stage("model", [&] {
    const auto manifest = read_manifest(cfg.model_dir);
    if (manifest.spec != ws.spec) throw ConfigError("saved network does not match --arch for this data");
    if (manifest.kind == "sub") return AnyEnsemble(load_sub_ensemble(cfg.model_dir));
    return AnyEnsemble(load_deep_ensemble(cfg.model_dir));
  });
  const auto report = stage("evaluation", [&] { return ens.evaluate(ws.data.test); });
  log_metrics(log, "test", ens.size(), report);
  CsvTable table = metrics_table();
  add_metrics_row(table, ens.size(), report, ensemble_flops(ws.spec, ws.split_at, ens.size(), mode_of(cfg)));
  return {write_table(table, output_path(cfg, "eval_" + cfg.mode + ".csv")),
          write_table(calibration_table(report, cfg.calibration_bins),
                      output_path(cfg, "calibration_" + cfg.mode + ".csv", false))};
}

std::vector<std::string> cmd_sweep(const RunConfig& cfg, std::ostream& log) {
  const Workspace ws = prepare(cfg);
  // Member i never depends on how many members follow it, so every prefix of
  // one large ensemble is exactly the ensemble of that size.
  const AnyEnsemble full = train_ensemble(cfg, ws, cfg.members, cfg.seed, log);
  CsvTable table = metrics_table();
  for (std::size_t n = cfg.members_min; n <= cfg.members; ++n) {
    const auto report = stage("evaluation", [&] { return full.prefix(n).evaluate(ws.data.test); });
    log_metrics(log, "sweep", n, report);
    add_metrics_row(table, n, report, ensemble_flops(ws.spec, ws.split_at, n, mode_of(cfg)));
  }
  return {write_table(table, output_path(cfg, "sweep_" + cfg.mode + ".csv"))};
}

std::vector<std::string> cmd_correlate(const RunConfig& cfg, std::ostream& log) {
  const Workspace ws = prepare(cfg);
  CsvTable table({"base_error", "base_nll", "error", "nll"});
  for (std::size_t r = 0; r < cfg.runs; ++r) {
    const AnyEnsemble ens = train_ensemble(cfg, ws, cfg.members, cfg.seed + r, log);
    const auto [base, full] = stage("evaluation", [&] {
      const Tensor base_probs = forward(ws.spec, ens.base_model(), ws.data.test.images);
      return std::pair{evaluate_probabilities(base_probs, ws.data.test.labels), ens.evaluate(ws.data.test)};
    });
    log << "run " << r << " base_error=" << format_double(base.error_percent)
        << " error=" << format_double(full.error_percent) << '\n';
    table.row().cell(base.error_percent).cell(base.nll).cell(full.error_percent).cell(full.nll);
  }
  return {write_table(table, output_path(cfg, "correlate.csv"))};
}

std::vector<std::string> cmd_ood(const RunConfig& cfg, std::ostream& log) {
  const Workspace ws = prepare(cfg);
  const Dataset ood = stage("data", [&] {
    if (cfg.ood_idx) {
      Dataset raw = load_idx(cfg.ood_idx->images, cfg.ood_idx->labels, Partition::Test);
      raw.out_of_distribution = true;
      std::fill(raw.labels.begin(), raw.labels.end(), kOodLabel);
      return ws.data.stats.apply(std::move(raw));
    }
    return synthetic_ood(ws.data.test, parse_ood_kind(cfg.ood_kind), cfg.seed);
  });
  if (ood.example_shape() != ws.spec.input_shape) throw StageError("data", "OOD images do not match the network input");

  const std::size_t max_n = *std::max_element(cfg.ood_members.begin(), cfg.ood_members.end());
  const AnyEnsemble full = train_ensemble(cfg, ws, max_n, cfg.seed, log);

  std::vector<std::string> files;
  CsvTable summary({"num_ensembles", "auc", "id_entropy", "ood_entropy"});
  for (std::size_t n : cfg.ood_members) {
    const AnyEnsemble ens = full.prefix(n);
    const auto [id_report, roc, ood_mean] = stage("evaluation", [&] {
      const MetricsReport id_rep = ens.evaluate(ws.data.test);
      const std::vector<double> ood_h = row_entropies(ens.predict(ood.images));
      std::vector<double> scores;
      std::vector<bool> positive;
      for (const auto& r : id_rep.records) {
        scores.push_back(r.entropy);
        positive.push_back(false);
      }
      double ood_sum = 0.0;
      for (double h : ood_h) {
        scores.push_back(h);
        positive.push_back(true);
        ood_sum += h;
      }
      return std::tuple{id_rep, roc_auc(scores, positive), ood_sum / static_cast<double>(ood_h.size())};
    });
    log << "ood n=" << n << " auc=" << format_double(roc.auc) << " id_entropy=" << format_double(id_report.mean_entropy)
        << " ood_entropy=" << format_double(ood_mean) << '\n';
    summary.row().cell(static_cast<std::uint64_t>(n)).cell(roc.auc).cell(id_report.mean_entropy).cell(ood_mean);

    CsvTable roc_table({"fpr", "tpr"});
    for (const auto& p : roc.points) roc_table.row().cell(p.false_positive_rate).cell(p.true_positive_rate);
    const std::string suffix = cfg.mode + "_n" + std::to_string(n) + ".csv";
    files.push_back(write_table(roc_table, output_path(cfg, "ood_roc_" + suffix, false)));
    files.push_back(
        write_table(calibration_table(id_report, cfg.calibration_bins), output_path(cfg, "calibration_" + suffix, false)));
  }
  files.insert(files.begin(), write_table(summary, output_path(cfg, "ood_summary_" + cfg.mode + ".csv")));
  return files;
}

std::vector<std::string> cmd_flops(const RunConfig& cfg, std::ostream& log) {
  stage("config", [&] { cfg.validate(); });
  kernels::set_backend(cfg.parallel ? kernels::Backend::Parallel : kernels::Backend::Reference);
  // FLOPs need only the architecture: derive the input shape from the data
  // settings without loading or generating any examples.
  const NetworkSpec spec = stage("network", [&] {
    if (cfg.arch == "mnist") return mnist_preset();
    if (cfg.arch == "small") {
      if (cfg.train_idx) {
        const Dataset probe = load_idx(cfg.train_idx->images, cfg.train_idx->labels);
        return small_cnn_preset(probe.example_shape(), probe.num_classes);
      }
      return small_cnn_preset({1, cfg.synthetic.image_size, cfg.synthetic.image_size}, cfg.synthetic.num_classes);
    }
    return read_network_file(cfg.arch);
  });
  const SplitPoint sp = stage("network", [&] { return parse_split(spec, cfg.split); });
  const FlopsReport report = stage("flops", [&] { return flops_report(spec, sp, cfg.members); });
  log << "trunk_flops=" << report.trunk_flops << " task_flops=" << report.task_flops
      << " total_flops=" << report.total_flops << " speedup_limit=" << format_double(speedup_limit(spec, sp)) << '\n';
  CsvTable table({"num_ensembles", "speedup"});
  for (const auto& row : report.rows) table.row().cell(static_cast<std::uint64_t>(row.members)).cell(row.speedup);
  if (cfg.timing) {
    const auto t = stage("timing", [&] { return time_inference(spec, sp, cfg.members, 32, 3, cfg.seed); });
    log << "wall-clock per batch of 32 at n=" << cfg.members << ": deep=" << format_double(t.deep_seconds)
        << "s sub=" << format_double(t.sub_seconds) << "s\n";
  }
  return {write_table(table, output_path(cfg, "flops.csv"))};
}

namespace {

using Override = std::function<void(RunConfig&)>;

void add_common_options(CLI::App& app, std::vector<Override>& overrides, std::string& config_file) {
  const auto keep = [&overrides](Override f) { overrides.push_back(std::move(f)); };
  app.add_option("--config", config_file, "JSON config file; command-line flags override its values");
  app.add_option_function<std::string>(
      "--arch", [keep](const std::string& v) { keep([v](RunConfig& c) { c.arch = v; }); },
      "Architecture: mnist, small, or a network text file (default small)");
  app.add_option_function<std::string>(
      "--split", [keep](const std::string& v) { keep([v](RunConfig& c) { c.split = v; }); },
      "Trunk/task split: SE-k or a layer index (default SE-1)");
  app.add_option_function<std::string>(
      "--mode", [keep](const std::string& v) { keep([v](RunConfig& c) { c.mode = v; }); },
      "Ensemble kind: sub or deep (default sub)");
  app.add_option_function<std::size_t>(
      "--members", [keep](const std::size_t& v) { keep([v](RunConfig& c) { c.members = v; }); },
      "Ensemble size; the sweep/flops upper bound (default 5)");
  app.add_option_function<std::size_t>(
      "--members-min", [keep](const std::size_t& v) { keep([v](RunConfig& c) { c.members_min = v; }); },
      "Sweep lower bound (default 1)");
  app.add_option_function<std::uint64_t>(
      "--seed", [keep](const std::uint64_t& v) { keep([v](RunConfig& c) { c.seed = v; }); },
      "Master seed for initialization and shuffling (default 0)");
  app.add_option_function<std::size_t>(
      "--runs", [keep](const std::size_t& v) { keep([v](RunConfig& c) { c.runs = v; }); },
      "Number of runs for correlate (default 10)");
  app.add_option_function<std::size_t>(
      "--epochs", [keep](const std::size_t& v) { keep([v](RunConfig& c) { c.train.epochs = v; }); },
      "Training epochs per network (default 12)");
  app.add_option_function<std::size_t>(
      "--batch-size", [keep](const std::size_t& v) { keep([v](RunConfig& c) { c.train.batch_size = v; }); },
      "Minibatch size (default 32)");
  app.add_option_function<double>(
      "--lr", [keep](const double& v) { keep([v](RunConfig& c) { c.train.sgd.learning_rate = v; }); },
      "SGD learning rate (default 0.05)");
  app.add_option_function<double>(
      "--momentum", [keep](const double& v) { keep([v](RunConfig& c) { c.train.sgd.momentum = v; }); },
      "SGD momentum (default 0.9)");
  app.add_option_function<std::string>(
      "--data-idx",
      [keep](const std::string& v) { keep([v](RunConfig& c) { c.train_idx = parse_idx_pair(v); }); },
      "Training IDX files: images,labels");
  app.add_option_function<std::string>(
      "--test-idx", [keep](const std::string& v) { keep([v](RunConfig& c) { c.test_idx = parse_idx_pair(v); }); },
      "Test IDX files: images,labels");
  app.add_option_function<std::string>(
      "--ood-idx", [keep](const std::string& v) { keep([v](RunConfig& c) { c.ood_idx = parse_idx_pair(v); }); },
      "OOD IDX files for the ood command: images,labels");
  app.add_option_function<std::string>(
         "--synthetic",
         [keep](const std::string& v) {
           keep([v](RunConfig& c) { apply_synthetic_spec(v, c.synthetic, c.test_per_class); });
         },
         "Synthetic data: classes=4,size=12,per_class=200,test_per_class=100,noise=0.35,seed=0")
      ->expected(0, 1);
  app.add_option_function<std::string>(
      "--ood-kind", [keep](const std::string& v) { keep([v](RunConfig& c) { c.ood_kind = v; }); },
      "Synthetic OOD generator: uniform_noise or shuffled_pixels");
  app.add_option_function<std::vector<std::size_t>>(
         "--ood-members",
         [keep](const std::vector<std::size_t>& v) { keep([v](RunConfig& c) { c.ood_members = v; }); },
         "Ensemble sizes for the ood command (default 1,5,10,15)")
      ->delimiter(',');
  app.add_option_function<std::size_t>(
      "--calibration-bins", [keep](const std::size_t& v) { keep([v](RunConfig& c) { c.calibration_bins = v; }); },
      "Calibration bins (default 10)");
  app.add_option_function<std::string>(
      "--out-dir", [keep](const std::string& v) { keep([v](RunConfig& c) { c.out_dir = v; }); },
      "Output directory (default $SUBENS_OUT_DIR or .)");
  app.add_option_function<std::string>(
      "--csv", [keep](const std::string& v) { keep([v](RunConfig& c) { c.csv = v; }); },
      "File name for the command's primary CSV");
  app.add_option_function<std::string>(
      "--model-dir", [keep](const std::string& v) { keep([v](RunConfig& c) { c.model_dir = v; }); },
      "Checkpoint directory (train: output, eval: input)");
  app.add_flag_function(
      "--parallel", [keep](std::int64_t) { keep([](RunConfig& c) { c.parallel = true; }); },
      "Use the OpenMP kernels (results are bitwise identical)");
  app.add_flag_function(
      "--timing", [keep](std::int64_t) { keep([](RunConfig& c) { c.timing = true; }); },
      "flops: also report wall-clock inference time");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  using Command = std::vector<std::string> (*)(const RunConfig&, std::ostream&);
  CLI::App app("Deep sub-ensembles: shared frozen trunk, multiple task heads, uncertainty metrics", "subens");
  app.require_subcommand(1);

  struct Sub {
    const char* name;
    const char* help;
    Command fn;
    std::vector<Override> overrides;
    std::string config_file;
    CLI::App* app = nullptr;
  };
  std::vector<Sub> subs;
  subs.push_back({"train", "Train an ensemble and save a checkpoint directory", cmd_train, {}, {}});
  subs.push_back({"eval", "Evaluate a saved ensemble on the test split", cmd_eval, {}, {}});
  subs.push_back({"sweep", "Error/NLL/FLOPs as the member count varies", cmd_sweep, {}, {}});
  subs.push_back({"ood", "Entropy-based OOD detection (ROC, AUC, calibration)", cmd_ood, {}, {}});
  subs.push_back({"flops", "Analytic speedup of sub-ensembles over deep ensembles", cmd_flops, {}, {}});
  subs.push_back({"correlate", "Initial-model vs sub-ensemble error across runs", cmd_correlate, {}, {}});
  for (auto& s : subs) {
    s.app = app.add_subcommand(s.name, s.help);
    add_common_options(*s.app, s.overrides, s.config_file);
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::ostringstream help;
    const int code = app.exit(e, help, err);
    out << help.str();
    return code;
  } catch (const std::exception& e) {
    err << "error [config]: " << e.what() << '\n';
    return 2;
  }

  for (auto& s : subs) {
    if (!s.app->parsed()) continue;
    try {
      RunConfig cfg;
      cfg.out_dir = default_out_dir();
      if (!s.config_file.empty()) {
        stage("config", [&] {
          std::ifstream in(s.config_file);
          if (!in) throw ConfigError("cannot open config file " + s.config_file);
          std::ostringstream text;
          text << in.rdbuf();
          cfg.apply_json(text.str());
        });
      }
      stage("config", [&] {
        for (const auto& f : s.overrides) f(cfg);
      });
      for (const auto& path : s.fn(cfg, out)) out << "wrote " << path << '\n';
      return 0;
    } catch (const StageError& e) {
      err << "error [" << e.stage() << "]: " << e.what() << '\n';
      return 1;
    } catch (const std::exception& e) {
      err << "error: " << e.what() << '\n';
      return 1;
    }
  }
  return 1;
}

}  // namespace subens::cli
