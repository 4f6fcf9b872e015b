#include "afg/evaluate.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "afg/error.hpp"
#include "afg/eval.hpp"
#include "afg/model/packing.hpp"

namespace afg::eval {
namespace {

void check_task_gold(const Example& ex) {
  if (ex.task_kind != TaskKind::kFact) return;
  for (const auto& g : ex.gold_answers) {
    if (g != kSupports && g != kRefutes) {
      throw DataError("example '" + ex.id + "': accuracy needs a verdict gold, got '" + g + "'");
    }
  }
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

nlohmann::ordered_json MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  j["name"] = name;
  j["mode"] = std::string(to_string(mode));
  j["n_examples"] = n_examples;
  j["metric"] = metric;
  j["primary"] = primary;
  j["metrics"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : metrics) j["metrics"][k] = v;
  return j;
}

MetricsReport MetricsReport::from_json(const nlohmann::json& j) {
  MetricsReport r;
  try {
    r.name = j.at("name").get<std::string>();
    r.mode = parse_mode(j.at("mode").get<std::string>());
    r.n_examples = j.at("n_examples").get<std::size_t>();
    r.metric = j.at("metric").get<std::string>();
    r.primary = j.at("primary").get<double>();
    for (const auto& [k, v] : j.at("metrics").items()) r.metrics[k] = v.get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("metrics report: ") + e.what());
  }
  return r;
}

MetricsReport evaluate(const model::Model& model, const Split& split, Mode mode,
                       std::string name) {
  MetricsReport report;
  report.name = std::move(name);
  report.mode = mode;
  report.n_examples = split.size();

  std::set<TaskKind> kinds;
  std::map<TaskKind, std::pair<double, int>> per_task;
  double qa_f1 = 0.0;
  int n_qa = 0;
  double recall = 0.0;
  std::size_t max_k = 0;
  for (const auto& ex : split) max_k = std::max(max_k, ex.passages.size());

  for (const auto& ex : split) {
    check_task_gold(ex);
    const auto input = model::pack_input(ex, mode, model.tokenizer(), model.config().max_input_len);
    const auto gen = model.generate_greedy(input, model.config().max_output_len);

    ExampleRecord rec;
    rec.id = ex.id;
    rec.task_kind = ex.task_kind;
    rec.prediction = gen.text;
    rec.gold_answers = ex.gold_answers;
    rec.score = task_metric(ex.task_kind, gen.text, ex.gold_answers);

    kinds.insert(ex.task_kind);
    per_task[ex.task_kind].first += rec.score;
    per_task[ex.task_kind].second += 1;
    if (ex.task_kind == TaskKind::kQa) {
      qa_f1 += unigram_f1(gen.text, ex.gold_answers);
      ++n_qa;
    }
    recall += topk_recall(ex, static_cast<int>(max_k));
    report.primary += rec.score;
    report.records.push_back(std::move(rec));
  }

  if (!split.empty()) {
    const double n = static_cast<double>(split.size());
    report.primary /= n;
    report.metrics["recall@" + std::to_string(max_k)] = recall / n;
  }
  for (const auto& [kind, acc] : per_task) {
    report.metrics[std::string(task_metric_name(kind))] = acc.first / acc.second;
  }
  if (n_qa > 0) report.metrics["f1"] = qa_f1 / n_qa;
  report.metric = kinds.size() == 1 ? std::string(task_metric_name(*kinds.begin()))
                  : kinds.empty()   ? "none"
                                    : "mixed";
  return report;
}

void write_report(const MetricsReport& report, const std::filesystem::path& json_path,
                  const std::filesystem::path& jsonl_path) {
  std::ofstream out(json_path);
  if (!out) throw IoError("cannot write " + json_path.string());
  out << report.to_json().dump(2) << '\n';

  std::ofstream lines(jsonl_path);
  if (!lines) throw IoError("cannot write " + jsonl_path.string());
  for (const auto& r : report.records) {
    nlohmann::ordered_json j;
    j["id"] = r.id;
    j["task_kind"] = std::string(to_string(r.task_kind));
    j["prediction"] = r.prediction;
    j["gold_answers"] = r.gold_answers;
    j["score"] = r.score;
    lines << j.dump() << '\n';
  }
}

MetricsReport read_report(const std::filesystem::path& json_path) {
  std::ifstream in(json_path);
  if (!in) throw IoError("cannot open " + json_path.string());
  try {
    return MetricsReport::from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(json_path.string() + ": " + e.what());
  }
}

std::string render_table(const std::vector<MetricsReport>& reports) {
  std::vector<std::string> columns;
  for (const auto& r : reports) {
    for (const auto& [k, v] : r.metrics) {
      if (std::find(columns.begin(), columns.end(), k) == columns.end()) columns.push_back(k);
    }
  }
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header{"name", "mode", "n", "metric", "primary"};
  header.insert(header.end(), columns.begin(), columns.end());
  rows.push_back(header);
  for (const auto& r : reports) {
    std::vector<std::string> row{r.name, std::string(to_string(r.mode)),
                                 std::to_string(r.n_examples), r.metric, fmt(r.primary)};
    for (const auto& c : columns) {
      auto it = r.metrics.find(c);
      row.push_back(it == r.metrics.end() ? "-" : fmt(it->second));
    }
    rows.push_back(row);
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  }
  std::ostringstream out;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t i = 0; i < rows[r].size(); ++i) {
      if (i > 0) out << "  ";
      out << rows[r][i] << std::string(width[i] - rows[r][i].size(), ' ');
    }
    out << '\n';
    if (r == 0) {
      std::size_t total = 0;
      for (auto w : width) total += w;
      out << std::string(total + 2 * (width.size() - 1), '-') << '\n';
    }
  }
  return out.str();
}

}  // namespace afg::eval
