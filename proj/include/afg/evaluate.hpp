#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "afg/example.hpp"
#include "afg/model/model.hpp"
#include "json.hpp"

namespace afg::eval {

struct ExampleRecord {
  std::string id;
  TaskKind task_kind = TaskKind::kQa;
  std::string prediction;
  std::vector<std::string> gold_answers;
  double score = 0.0;  // the task metric of this example
};

struct MetricsReport {
  std::string name;  // free-form row label, e.g. the checkpoint path
  Mode mode = Mode::kFull;
  std::size_t n_examples = 0;
  std::string metric;  // task metric name, or "mixed"
  double primary = 0.0;
  // Aggregates: the task metric per task kind present, f1 on qa examples,
  // and recall@K of the retrieved passages.
  std::map<std::string, double> metrics;
  std::vector<ExampleRecord> records;

  nlohmann::ordered_json to_json() const;  // aggregate only
  static MetricsReport from_json(const nlohmann::json& j);
};

// Packs each example for `mode`, decodes greedily and scores the prediction
// with its task metric.
MetricsReport evaluate(const model::Model& model, const Split& split, Mode mode,
                       std::string name = "");

// Aggregate as JSON, per-example records as JSONL.
void write_report(const MetricsReport& report, const std::filesystem::path& json_path,
                  const std::filesystem::path& jsonl_path);
MetricsReport read_report(const std::filesystem::path& json_path);

// Plain-text table, one row per report.
std::string render_table(const std::vector<MetricsReport>& reports);

}  // namespace afg::eval
