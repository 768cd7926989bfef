#pragma once

#include "fecam/classifier.hpp"
#include "fecam/types.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace fecam {

enum class ProtocolKind : std::uint8_t {
  kMscil = 0,  // many-shot class-incremental
  kFscil = 1,  // few-shot class-incremental: `shots` rows per new class
  kDil = 2,    // domain-incremental: one task per training domain
};

/// Which test rows are scored after each task.
enum class EvalScope : std::uint8_t {
  kCumulative = 0,   // every class seen so far (task-agnostic)
  kCurrentTask = 1,  // only the classes introduced by the task
};

std::string_view to_string(ProtocolKind kind);
std::string_view to_string(EvalScope scope);

struct ProtocolConfig {
  ProtocolKind kind = ProtocolKind::kMscil;
  std::size_t initial_classes = 0;  // 0 with tasks == 0: all classes in one task
  std::size_t tasks = 0;            // incremental tasks after the first
  std::size_t classes_per_task = 0;
  std::size_t shots = 5;
  std::vector<DomainId> domain_order;  // DIL; empty = ascending training domains
  std::uint64_t seed = 1993;
  bool shuffle_classes = false;
  EvalScope eval_scope = EvalScope::kCumulative;

  friend bool operator==(const ProtocolConfig&, const ProtocolConfig&) = default;
};

struct Task {
  std::size_t index = 0;
  std::vector<ClassId> classes;  // classes with training rows in this task
  std::optional<DomainId> domain;
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> test_rows;  // empty: the task is not evaluated

  friend bool operator==(const Task&, const Task&) = default;
};

struct TaskStream {
  ProtocolKind kind = ProtocolKind::kMscil;
  std::vector<ClassId> class_order;
  std::vector<Task> tasks;

  friend bool operator==(const TaskStream&, const TaskStream&) = default;
};

/// Partitions training rows into tasks and attaches the test rows scored
/// after each task. Deterministic in config.seed.
TaskStream build_splits(const FeatureMatrix& train, const FeatureMatrix& test,
                        const ProtocolConfig& config);

struct ClassSummary {
  ClassId id = 0;
  std::size_t support = 0;
  std::size_t correct = 0;
  ClassId top_confusion = 0;  // most frequent wrong label; meaningless when count is 0
  std::size_t top_confusion_count = 0;
};

struct EvalReport {
  ProtocolKind kind = ProtocolKind::kMscil;
  std::vector<std::size_t> evaluated_tasks;
  std::vector<std::size_t> seen_classes;
  std::vector<std::size_t> test_rows;
  std::vector<double> per_task_accuracy;
  double avg_incremental_accuracy = 0.0;
  double last_accuracy = 0.0;
  std::optional<double> old_class_accuracy;  // base-task classes, final evaluation
  std::optional<double> new_class_accuracy;  // classes added later, final evaluation
  std::vector<ClassSummary> confusion;       // final evaluation
  StorageReport storage;
  std::vector<double> fit_seconds;   // per task
  std::vector<double> eval_seconds;  // per evaluated task
  std::vector<std::pair<std::string, std::string>> config;
  std::vector<std::string> notes;

  /// key=value lines. Timing lines are the only nondeterministic content.
  std::string to_key_value(bool include_timing = true) const;
  /// One row per evaluated task.
  std::string to_csv() const;
};

enum class Scorer : std::uint8_t {
  kModel = 0,      // predict()
  kEuclidean = 1,  // predict_euclidean()
};

struct RunOptions {
  Scorer scorer = Scorer::kModel;
  PredictOptions predict{};
  std::vector<std::pair<std::string, std::string>> config_echo;
};

/// Fits the tasks in order and evaluates after each one that has test rows.
/// Errors are rethrown as ProtocolError with the task index attached.
EvalReport run_protocol(const FeatureMatrix& train, const FeatureMatrix& test,
                        const TaskStream& stream, const ClassifierConfig& classifier,
                        const RunOptions& options = {});

/// Same as run_protocol, also returning the final model.
std::pair<EvalReport, FeCAMModel> run_protocol_with_model(const FeatureMatrix& train,
                                                          const FeatureMatrix& test,
                                                          const TaskStream& stream,
                                                          const ClassifierConfig& classifier,
                                                          const RunOptions& options = {});

/// Mean of the per-task accuracies.
double average_incremental_accuracy(const std::vector<double>& per_task_accuracy);

}  // namespace fecam
