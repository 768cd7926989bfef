#include "cli.hpp"

#include "fecam/classifier.hpp"
#include "fecam/config.hpp"
#include "fecam/embedding_io.hpp"
#include "fecam/error.hpp"
#include "fecam/format.hpp"
#include "fecam/linear_baseline.hpp"
#include "fecam/model_io.hpp"
#include "fecam/protocol.hpp"
#include "fecam/synth.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fecam {
namespace {

struct UsageError : ConfigError {
  using ConfigError::ConfigError;
};

// Classifier and protocol settings shared by fit, run-protocol and
// baseline-linear. Precedence: config file, then dedicated flags, then --set.
struct SettingsOptions {
  std::string config_file;
  std::optional<std::string> mode;
  std::optional<std::string> gamma1;
  std::optional<std::string> gamma2;
  std::optional<std::string> tukey_lambda;
  std::optional<std::string> tukey_enabled;
  std::optional<std::size_t> threads;
  std::vector<std::string> overrides;

  void attach(CLI::App& cmd) {
    cmd.add_option("--config", config_file, "key=value configuration file")
        ->check(CLI::ExistingFile);
    cmd.add_option("--mode", mode, "per_class, common, diagonal or euclidean");
    cmd.add_option("--gamma1", gamma1, "diagonal shrinkage weight");
    cmd.add_option("--gamma2", gamma2, "off-diagonal shrinkage weight");
    cmd.add_option("--tukey-lambda", tukey_lambda, "Tukey ladder exponent");
    cmd.add_option("--tukey-enabled", tukey_enabled, "true or false");
    cmd.add_option("--threads", threads, "worker threads (0: FECAM_THREADS or all cores)");
    cmd.add_option("--set", overrides, "extra key=value setting, repeatable");
  }

  RunConfig apply(RunConfig base) const {
    if (!config_file.empty()) base = load_run_config(config_file, std::move(base));
    if (mode) base.set("mode", *mode);
    if (gamma1) base.set("gamma1", *gamma1);
    if (gamma2) base.set("gamma2", *gamma2);
    if (tukey_lambda) base.set("tukey.lambda", *tukey_lambda);
    if (tukey_enabled) base.set("tukey.enabled", *tukey_enabled);
    if (threads) base.threads = *threads;
    for (const std::string& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
      base.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    return base;
  }
};

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << text;
  if (!out) throw Error("failed writing " + path);
}

FeCAMModel fit_all(const RunConfig& config, const FeatureMatrix& train) {
  return fit_task(FeCAMModel(config.classifier), train.values, train.labels);
}

// fit ----------------------------------------------------------------------

struct FitCommand {
  SettingsOptions settings;
  std::string train;
  std::string out;

  void attach(CLI::App& app) {
    auto* cmd = app.add_subcommand("fit", "Fit a model on an embedding file (one task)");
    settings.attach(*cmd);
    cmd->add_option("--train", train, "training embeddings")->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", out, "model file to write")->required();
    cmd->callback([this] { run(); });
  }

  void run() const {
    const RunConfig config = settings.apply({});
    const FeatureMatrix data = read_embeddings(train);
    const FeCAMModel model = fit_all(config, data);
    save_model(out, model);
    std::cout << "classes=" << model.class_count() << "\ndim=" << model.dim()
              << "\nmode=" << to_string(model.config().mode)
              << "\ntukey_bypassed=" << (model.tukey_bypassed() ? "true" : "false") << '\n';
  }
};

// eval ---------------------------------------------------------------------

struct EvalCommand {
  std::string model_path;
  std::string data_path;
  std::size_t threads = 0;

  void attach(CLI::App& app) {
    auto* cmd = app.add_subcommand("eval", "Score an embedding file with a saved model");
    cmd->add_option("--model", model_path, "model file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--data", data_path, "embeddings to classify")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--threads", threads, "worker threads (0: FECAM_THREADS or all cores)");
    cmd->callback([this] { run(); });
  }

  void run() const {
    const FeCAMModel model = load_model(model_path);
    const FeatureMatrix data = read_embeddings(data_path);
    const auto predictions = predict(model, data.values, {threads});
    const auto labels = labels_of(predictions);
    std::cout << "rows=" << data.rows() << "\naccuracy=" << format_number(accuracy(labels, data.labels))
              << '\n';
  }
};

// run-protocol -------------------------------------------------------------

struct RunProtocolCommand {
  SettingsOptions settings;
  std::string rerun;
  std::optional<std::string> train;
  std::optional<std::string> test;
  std::optional<std::string> report;
  std::optional<std::string> csv;
  bool no_timing = false;

  void attach(CLI::App& app) {
    auto* cmd = app.add_subcommand("run-protocol", "Run an incremental protocol and report");
    settings.attach(*cmd);
    cmd->add_option("--rerun", rerun, "re-run the configuration echoed in a report")
        ->check(CLI::ExistingFile);
    cmd->add_option("--train", train, "training embeddings");
    cmd->add_option("--test", test, "test embeddings");
    cmd->add_option("--report", report, "key=value report path (default: stdout)");
    cmd->add_option("--csv", csv, "per-task CSV path");
    cmd->add_flag("--no-timing", no_timing, "omit wall-clock lines from the report");
    cmd->callback([this] { run(); });
  }

  void run() const {
    RunConfig base;
    if (!rerun.empty()) {
      base = config_from_report(read_text(rerun));
      // Never overwrite the report being replayed unless asked to.
      base.report_path.clear();
      base.csv_path.clear();
    }
    RunConfig config = settings.apply(std::move(base));
    if (train) config.train_path = *train;
    if (test) config.test_path = *test;
    if (report) config.report_path = *report;
    if (csv) config.csv_path = *csv;
    if (config.train_path.empty()) throw UsageError("no training file (input.train or --train)");
    if (config.test_path.empty()) throw UsageError("no test file (input.test or --test)");

    const FeatureMatrix train_data = read_embeddings(config.train_path);
    const FeatureMatrix test_data = read_embeddings(config.test_path);
    const TaskStream stream = build_splits(train_data, test_data, config.protocol);
    RunOptions options;
    options.predict.threads = config.threads;
    options.config_echo = config.to_pairs();
    const EvalReport result = run_protocol(train_data, test_data, stream, config.classifier, options);

    const std::string text = result.to_key_value(!no_timing);
    if (config.report_path.empty()) {
      std::cout << text;
    } else {
      write_text(config.report_path, text);
      std::cout << "report.avg_incremental_accuracy="
                << format_number(result.avg_incremental_accuracy) << '\n';
    }
    if (!config.csv_path.empty()) write_text(config.csv_path, result.to_csv());
  }
};

// synth --------------------------------------------------------------------

struct SynthCommand {
  std::size_t classes = 20;
  std::size_t dim = 16;
  std::uint64_t seed = 0;
  std::size_t rows_per_class = 500;
  std::size_t test_rows = 0;
  double anisotropy = 1.0;
  std::size_t base_classes = 0;
  double mean_spread = 3.0;
  std::string out;
  std::string test_out;
  std::string format = "binary";

  void attach(CLI::App& app) {
    auto* cmd = app.add_subcommand("synth", "Write synthetic Gaussian embeddings");
    cmd->add_option("--classes", classes, "number of classes")->check(CLI::PositiveNumber);
    cmd->add_option("--dim", dim, "feature dimension")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", seed, "random seed");
    cmd->add_option("--rows-per-class", rows_per_class, "training rows per class")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--test-rows", test_rows, "held-out rows per class (needs --test-out)");
    cmd->add_option("--anisotropy", anisotropy,
                    "anisotropy of post-base classes; 1 gives isotropic classes")
        ->check(CLI::Range(1.0, 1e6));
    cmd->add_option("--base-classes", base_classes,
                    "isotropic base classes when --anisotropy > 1 (default: half)");
    cmd->add_option("--mean-spread", mean_spread, "standard deviation of class means")
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--out", out, "training embedding file")->required();
    cmd->add_option("--test-out", test_out, "held-out embedding file");
    cmd->add_option("--format", format, "binary or csv")
        ->check(CLI::IsMember({"binary", "csv"}));
    cmd->callback([this] { run(); });
  }

  void run() const {
    if (test_rows > 0 && test_out.empty()) throw UsageError("--test-rows needs --test-out");
    if (!test_out.empty() && test_rows == 0) throw UsageError("--test-out needs --test-rows");
    SynthSpec spec;
    if (anisotropy > 1.0) {
      const std::size_t base = base_classes > 0 ? base_classes : classes / 2;
      if (base >= classes) throw UsageError("--base-classes must be below --classes");
      spec = heterogeneous_spec(classes, base, dim, anisotropy, rows_per_class, seed);
    } else {
      spec.classes = classes;
      spec.dim = dim;
      spec.rows_per_class = rows_per_class;
      spec.seed = seed;
    }
    spec.mean_spread = mean_spread;
    const SynthData generated = synth_generate(spec);
    write(out, generated.data);
    if (!test_out.empty()) {
      write(test_out, synth_draw(generated.truth, test_rows, seed + 1));
    }
    std::cout << "rows=" << generated.data.rows() << "\ndim=" << dim << '\n';
  }

  void write(const std::string& path, const FeatureMatrix& batch) const {
    if (format == "csv") {
      write_embeddings_csv(path, batch);
    } else {
      write_embeddings(path, batch);
    }
  }
};

// baseline-linear ----------------------------------------------------------

struct BaselineLinearCommand {
  SettingsOptions settings;
  std::string train;
  std::string test;
  std::size_t samples_per_class = 100;
  std::size_t epochs = 500;
  double lr = 0.1;
  std::uint64_t seed = 0;

  void attach(CLI::App& app) {
    auto* cmd = app.add_subcommand(
        "baseline-linear", "Train a softmax classifier on samples from the fitted Gaussians");
    settings.attach(*cmd);
    cmd->add_option("--train", train, "training embeddings")->required()->check(CLI::ExistingFile);
    cmd->add_option("--test", test, "test embeddings")->required()->check(CLI::ExistingFile);
    cmd->add_option("--samples-per-class", samples_per_class, "Gaussian samples per class")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--epochs", epochs, "full-batch gradient steps");
    cmd->add_option("--lr", lr, "learning rate")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", seed, "sampling and initialization seed");
    cmd->callback([this] { run(); });
  }

  void run() const {
    const RunConfig config = settings.apply({});
    if (config.classifier.mode != CovarianceMode::kPerClass) {
      throw UsageError("baseline-linear samples from per_class covariances (--mode per_class)");
    }
    const FeatureMatrix train_data = read_embeddings(train);
    const FeatureMatrix test_data = read_embeddings(test);
    const FeCAMModel model = fit_all(config, train_data);
    const FeatureMatrix samples = sample_from_gaussians(model, samples_per_class, seed);

    TrainOptions options;
    options.epochs = epochs;
    options.learning_rate = lr;
    options.seed = seed;
    const LinearClassifier linear = train_linear(samples.values, samples.labels, options);

    // The linear model sees samples in the transformed space, so queries are
    // transformed the same way before it scores them.
    const RowMatrix queries = tukey(test_data.values, model.effective_tukey()).values;
    const double linear_acc = accuracy(predict_linear(linear, queries), test_data.labels);
    const double fecam_acc =
        accuracy(labels_of(predict(model, test_data.values, {config.threads})), test_data.labels);
    std::cout << "samples_per_class=" << samples_per_class
              << "\nlinear.accuracy=" << format_number(linear_acc)
              << "\nlinear.final_loss=" << format_number(linear.loss_history.back())
              << "\nfecam.accuracy=" << format_number(fecam_acc) << '\n';
  }
};

// diag ---------------------------------------------------------------------

struct DiagCommand {
  std::string data_path;
  std::string model_path;
  std::size_t top = 5;

  void attach(CLI::App& app) {
    auto* cmd =
        app.add_subcommand("diag", "Per-class singular-value profiles and storage report");
    cmd->add_option("--data", data_path, "embeddings to profile")->check(CLI::ExistingFile);
    cmd->add_option("--model", model_path, "model whose storage is reported")
        ->check(CLI::ExistingFile);
    cmd->add_option("--top", top, "leading singular values printed per class");
    cmd->callback([this] { run(); });
  }

  void run() const {
    if (data_path.empty() && model_path.empty()) throw UsageError("diag needs --data or --model");
    if (!data_path.empty()) {
      const FeatureMatrix data = read_embeddings(data_path);
      for (const ClassSpectrum& s : singular_value_profile(data.values, data.labels)) {
        std::cout << "class." << s.id << ".rows=" << s.rows << '\n';
        std::cout << "class." << s.id << ".anisotropy=" << format_number(s.anisotropy) << '\n';
        std::cout << "class." << s.id << ".singular_values=";
        const auto n = std::min<Eigen::Index>(static_cast<Eigen::Index>(top),
                                              s.singular_values.size());
        for (Eigen::Index i = 0; i < n; ++i) {
          std::cout << (i ? "," : "") << format_number(s.singular_values[i]);
        }
        std::cout << '\n';
      }
    }
    if (!model_path.empty()) {
      const FeCAMModel model = load_model(model_path);
      const StorageReport storage = model_storage_report(model);
      std::cout << "storage.mode=" << to_string(model.config().mode)
                << "\nstorage.classes=" << model.class_count()
                << "\nstorage.prototype_bytes=" << storage.prototype_bytes
                << "\nstorage.covariance_bytes=" << storage.covariance_bytes
                << "\nstorage.total_bytes=" << storage.total() << '\n';
    }
  }
};

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"Training-free continual-learning classifier with class covariances", "fecam"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  FitCommand fit;
  EvalCommand eval;
  RunProtocolCommand run_protocol_cmd;
  SynthCommand synth;
  BaselineLinearCommand baseline;
  DiagCommand diag;
  fit.attach(app);
  eval.attach(app);
  run_protocol_cmd.attach(app);
  synth.attach(app);
  baseline.attach(app);
  diag.attach(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "fecam: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "fecam: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace fecam
