#pragma once

// One JSON document holding every configurable section of a pipeline run.
// Absent keys keep their defaults; unknown keys are rejected.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "afg/corpus.hpp"
#include "afg/labeling.hpp"
#include "afg/model/config.hpp"
#include "afg/pseudo.hpp"
#include "afg/training.hpp"
#include "json.hpp"

namespace afg {

struct SweepConfig {
  std::vector<double> sigmas{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
};

struct RunConfig {
  corpus::SynthConfig synth;
  labeling::LabelConfig label;
  model::ModelConfig model;
  train::TrainConfig train;
  pseudo::SimulatorConfig pseudo;
  SweepConfig sweep;

  void validate() const;  // throws ConfigError
};

nlohmann::ordered_json to_json(const corpus::SynthConfig& c);
nlohmann::ordered_json to_json(const labeling::LabelConfig& c);
nlohmann::ordered_json to_json(const pseudo::SimulatorConfig& c);
nlohmann::ordered_json to_json(const RunConfig& c);

RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);
void save_run_config(const RunConfig& config, const std::filesystem::path& path);

}  // namespace afg
