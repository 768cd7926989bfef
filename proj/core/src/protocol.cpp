#include "fecam/protocol.hpp"

#include "fecam/config.hpp"
#include "fecam/error.hpp"
#include "fecam/format.hpp"

#include <algorithm>
#include <chrono>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace fecam {
namespace {

std::vector<ClassId> sorted_unique(const std::vector<ClassId>& labels) {
  std::set<ClassId> s(labels.begin(), labels.end());
  return {s.begin(), s.end()};
}

std::vector<std::size_t> rows_with_labels(const std::vector<ClassId>& labels,
                                          const std::set<ClassId>& wanted) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (wanted.contains(labels[i])) out.push_back(i);
  }
  return out;
}

TaskStream build_class_incremental(const FeatureMatrix& train, const FeatureMatrix& test,
                                   const ProtocolConfig& config) {
  TaskStream stream;
  stream.kind = config.kind;
  stream.class_order = sorted_unique(train.labels);
  if (config.shuffle_classes) {
    std::mt19937_64 engine(config.seed);
    std::shuffle(stream.class_order.begin(), stream.class_order.end(), engine);
  }
  const std::size_t total = stream.class_order.size();
  if (total == 0) throw ProtocolError("training data has no rows");

  std::vector<std::size_t> sizes;
  if (config.tasks == 0) {
    sizes.push_back(config.initial_classes == 0 ? total : config.initial_classes);
  } else {
    if (config.initial_classes == 0 || config.classes_per_task == 0) {
      throw ProtocolError("incremental protocols need initial_classes and classes_per_task > 0");
    }
    sizes.push_back(config.initial_classes);
    sizes.insert(sizes.end(), config.tasks, config.classes_per_task);
  }
  const std::size_t needed = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
  if (needed > total) {
    throw ProtocolError("protocol needs " + std::to_string(needed) + " classes but the data has " +
                        std::to_string(total));
  }
  if (config.kind == ProtocolKind::kFscil && config.shots == 0) {
    throw ProtocolError("few-shot protocol needs shots >= 1");
  }

  std::map<ClassId, std::vector<std::size_t>> train_by_class;
  for (std::size_t i = 0; i < train.labels.size(); ++i) train_by_class[train.labels[i]].push_back(i);

  std::set<ClassId> seen;
  std::size_t cursor = 0;
  for (std::size_t t = 0; t < sizes.size(); ++t) {
    Task task;
    task.index = t;
    task.classes.assign(stream.class_order.begin() + static_cast<std::ptrdiff_t>(cursor),
                        stream.class_order.begin() + static_cast<std::ptrdiff_t>(cursor + sizes[t]));
    cursor += sizes[t];
    for (ClassId c : task.classes) {
      std::vector<std::size_t> rows = train_by_class[c];
      if (config.kind == ProtocolKind::kFscil && t > 0) {
        if (rows.size() < config.shots) {
          throw ProtocolError("class " + std::to_string(c) + " has " + std::to_string(rows.size()) +
                              " training rows, fewer than " + std::to_string(config.shots) +
                              " shots");
        }
        std::mt19937_64 engine(config.seed ^ (0x5851f42d4c957f2dULL * (c + 1)));
        std::shuffle(rows.begin(), rows.end(), engine);
        rows.resize(config.shots);
        std::sort(rows.begin(), rows.end());
      }
      task.train_rows.insert(task.train_rows.end(), rows.begin(), rows.end());
    }
    std::sort(task.train_rows.begin(), task.train_rows.end());

    seen.insert(task.classes.begin(), task.classes.end());
    const std::set<ClassId> scope = config.eval_scope == EvalScope::kCumulative
                                        ? seen
                                        : std::set<ClassId>(task.classes.begin(), task.classes.end());
    task.test_rows = rows_with_labels(test.labels, scope);
    if (task.test_rows.empty()) {
      throw ProtocolError("task " + std::to_string(t) + " has no test rows to evaluate");
    }
    stream.tasks.push_back(std::move(task));
  }
  return stream;
}

TaskStream build_domain_incremental(const FeatureMatrix& train, const FeatureMatrix& test,
                                    const ProtocolConfig& config) {
  if (train.domains.empty()) throw ProtocolError("domain-incremental runs need domain ids");
  TaskStream stream;
  stream.kind = ProtocolKind::kDil;
  stream.class_order = sorted_unique(train.labels);
  std::vector<DomainId> order = config.domain_order;
  if (order.empty()) {
    std::set<DomainId> s(train.domains.begin(), train.domains.end());
    order.assign(s.begin(), s.end());
  }
  std::set<DomainId> unique(order.begin(), order.end());
  if (unique.size() != order.size()) throw ProtocolError("domain order repeats a domain");

  for (std::size_t t = 0; t < order.size(); ++t) {
    Task task;
    task.index = t;
    task.domain = order[t];
    std::set<ClassId> classes;
    for (std::size_t i = 0; i < train.domains.size(); ++i) {
      if (train.domains[i] == order[t]) {
        task.train_rows.push_back(i);
        classes.insert(train.labels[i]);
      }
    }
    if (task.train_rows.empty()) {
      throw ProtocolError("domain " + std::to_string(order[t]) + " has no training rows");
    }
    task.classes.assign(classes.begin(), classes.end());
    stream.tasks.push_back(std::move(task));
  }
  if (stream.tasks.empty()) throw ProtocolError("training data has no domains");
  std::vector<std::size_t>& final_rows = stream.tasks.back().test_rows;
  final_rows.resize(test.rows());
  std::iota(final_rows.begin(), final_rows.end(), std::size_t{0});
  if (final_rows.empty()) throw ProtocolError("domain-incremental run has no test rows");
  return stream;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

std::string_view to_string(ProtocolKind kind) {
  switch (kind) {
    case ProtocolKind::kMscil:
      return "mscil";
    case ProtocolKind::kFscil:
      return "fscil";
    case ProtocolKind::kDil:
      return "dil";
  }
  return "unknown";
}

std::string_view to_string(EvalScope scope) {
  return scope == EvalScope::kCumulative ? "cumulative" : "current_task";
}

TaskStream build_splits(const FeatureMatrix& train, const FeatureMatrix& test,
                        const ProtocolConfig& config) {
  train.validate();
  test.validate();
  if (train.rows() > 0 && test.rows() > 0 && train.dim() != test.dim()) {
    throw DimensionError("train and test features differ in dimension");
  }
  if (config.kind == ProtocolKind::kDil) return build_domain_incremental(train, test, config);
  return build_class_incremental(train, test, config);
}

double average_incremental_accuracy(const std::vector<double>& per_task_accuracy) {
  if (per_task_accuracy.empty()) return 0.0;
  double sum = 0.0;
  for (double a : per_task_accuracy) sum += a;
  return sum / static_cast<double>(per_task_accuracy.size());
}

std::pair<EvalReport, FeCAMModel> run_protocol_with_model(const FeatureMatrix& train,
                                                          const FeatureMatrix& test,
                                                          const TaskStream& stream,
                                                          const ClassifierConfig& classifier,
                                                          const RunOptions& options) {
  EvalReport report;
  report.kind = stream.kind;
  report.config = options.config_echo.empty() ? classifier_echo(classifier) : options.config_echo;
  if (stream.tasks.empty()) throw ProtocolError("task stream is empty");

  FeCAMModel model(classifier);
  std::vector<ClassId> final_predicted;
  std::vector<ClassId> final_truth;
  for (const Task& task : stream.tasks) {
    try {
      const auto fit_start = std::chrono::steady_clock::now();
      const FeatureMatrix batch = train.select(task.train_rows);
      model = fit_task(model, batch.values, batch.labels);
      report.fit_seconds.push_back(seconds_since(fit_start));
      if (task.test_rows.empty()) continue;

      const auto eval_start = std::chrono::steady_clock::now();
      const FeatureMatrix queries = test.select(task.test_rows);
      const auto predictions = options.scorer == Scorer::kModel
                                   ? predict(model, queries.values, options.predict)
                                   : predict_euclidean(model, queries.values, options.predict);
      final_predicted = labels_of(predictions);
      final_truth = queries.labels;
      report.eval_seconds.push_back(seconds_since(eval_start));
      report.evaluated_tasks.push_back(task.index);
      report.seen_classes.push_back(model.class_count());
      report.test_rows.push_back(queries.rows());
      report.per_task_accuracy.push_back(accuracy(final_predicted, final_truth));
    } catch (const Error& e) {
      throw ProtocolError("task " + std::to_string(task.index) + ": " + e.what());
    }
  }
  if (report.per_task_accuracy.empty()) throw ProtocolError("no task was evaluated");
  report.avg_incremental_accuracy = average_incremental_accuracy(report.per_task_accuracy);
  report.last_accuracy = report.per_task_accuracy.back();
  report.storage = model_storage_report(model);

  std::map<ClassId, ClassSummary> summaries;
  std::map<ClassId, std::map<ClassId, std::size_t>> confusions;
  for (std::size_t i = 0; i < final_truth.size(); ++i) {
    ClassSummary& s = summaries[final_truth[i]];
    s.id = final_truth[i];
    ++s.support;
    if (final_predicted[i] == final_truth[i]) {
      ++s.correct;
    } else {
      ++confusions[final_truth[i]][final_predicted[i]];
    }
  }
  for (auto& [id, s] : summaries) {
    for (const auto& [other, count] : confusions[id]) {
      if (count > s.top_confusion_count) {
        s.top_confusion = other;
        s.top_confusion_count = count;
      }
    }
    report.confusion.push_back(s);
  }

  if (stream.kind != ProtocolKind::kDil && stream.tasks.size() > 1) {
    const std::set<ClassId> base(stream.tasks.front().classes.begin(),
                                 stream.tasks.front().classes.end());
    std::size_t old_total = 0, old_hits = 0, new_total = 0, new_hits = 0;
    for (std::size_t i = 0; i < final_truth.size(); ++i) {
      const bool hit = final_predicted[i] == final_truth[i];
      if (base.contains(final_truth[i])) {
        ++old_total;
        old_hits += hit ? 1 : 0;
      } else {
        ++new_total;
        new_hits += hit ? 1 : 0;
      }
    }
    if (old_total > 0) report.old_class_accuracy = static_cast<double>(old_hits) / old_total;
    if (new_total > 0) report.new_class_accuracy = static_cast<double>(new_hits) / new_total;
  }

  if (model.tukey_bypassed()) {
    report.notes.push_back("tukey transform bypassed: training features contain negative values");
  }
  if (classifier.mode == CovarianceMode::kCommon) {
    report.notes.push_back("common covariance is shrunk but not correlation-normalized");
  }
  if (options.scorer == Scorer::kEuclidean) {
    report.notes.push_back("scored with Euclidean nearest class mean");
  }
  return {std::move(report), std::move(model)};
}

EvalReport run_protocol(const FeatureMatrix& train, const FeatureMatrix& test,
                        const TaskStream& stream, const ClassifierConfig& classifier,
                        const RunOptions& options) {
  return run_protocol_with_model(train, test, stream, classifier, options).first;
}

std::string EvalReport::to_key_value(bool include_timing) const {
  std::ostringstream out;
  out << "report.kind=" << to_string(kind) << '\n';
  out << "report.evaluated_tasks=" << per_task_accuracy.size() << '\n';
  for (std::size_t i = 0; i < per_task_accuracy.size(); ++i) {
    const std::string prefix = "task." + std::to_string(evaluated_tasks[i]) + ".";
    out << prefix << "seen_classes=" << seen_classes[i] << '\n';
    out << prefix << "test_rows=" << test_rows[i] << '\n';
    out << prefix << "accuracy=" << format_number(per_task_accuracy[i]) << '\n';
  }
  out << "report.avg_incremental_accuracy=" << format_number(avg_incremental_accuracy) << '\n';
  out << "report.last_accuracy=" << format_number(last_accuracy) << '\n';
  if (old_class_accuracy) {
    out << "report.old_class_accuracy=" << format_number(*old_class_accuracy) << '\n';
  }
  if (new_class_accuracy) {
    out << "report.new_class_accuracy=" << format_number(*new_class_accuracy) << '\n';
  }
  out << "storage.prototype_bytes=" << storage.prototype_bytes << '\n';
  out << "storage.covariance_bytes=" << storage.covariance_bytes << '\n';
  out << "storage.total_bytes=" << storage.total() << '\n';
  for (const auto& s : confusion) {
    out << "class." << s.id << "=support:" << s.support << ",correct:" << s.correct;
    if (s.top_confusion_count > 0) {
      out << ",top_confusion:" << s.top_confusion << ",top_confusion_count:"
          << s.top_confusion_count;
    }
    out << '\n';
  }
  for (std::size_t i = 0; i < notes.size(); ++i) out << "note." << i << '=' << notes[i] << '\n';
  for (const auto& [key, value] : config) out << "config." << key << '=' << value << '\n';
  if (include_timing) {
    for (std::size_t i = 0; i < fit_seconds.size(); ++i) {
      out << "timing.fit." << i << '=' << format_number(fit_seconds[i]) << '\n';
    }
    for (std::size_t i = 0; i < eval_seconds.size(); ++i) {
      out << "timing.eval." << evaluated_tasks[i] << '=' << format_number(eval_seconds[i]) << '\n';
    }
  }
  return out.str();
}

std::string EvalReport::to_csv() const {
  std::ostringstream out;
  out << "task,seen_classes,test_rows,accuracy,eval_seconds\n";
  for (std::size_t i = 0; i < per_task_accuracy.size(); ++i) {
    out << evaluated_tasks[i] << ',' << seen_classes[i] << ',' << test_rows[i] << ','
        << format_number(per_task_accuracy[i]) << ','
        << (i < eval_seconds.size() ? format_number(eval_seconds[i]) : std::string("0")) << '\n';
  }
  return out.str();
}

}  // namespace fecam
