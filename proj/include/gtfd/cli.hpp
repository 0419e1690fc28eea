#ifndef GTFD_CLI_HPP
#define GTFD_CLI_HPP

#include <json.hpp>

#include "gtfd/checkpoint.hpp"
#include "gtfd/train.hpp"

namespace gtfd::cli {

// Fully wired training setup as described by a config document.
struct Experiment {
  TrainConfig train;
  GanNets nets;
  DataSources data;
  double peak = 1.0;
  int64_t eval_n = 0;
  nlohmann::json doc;  // normalized config as parsed
};

// Parses {"train":..., "data":..., "gen":..., "critic":...}; unknown
// keys are rejected. Network parameters are initialized from the train
// seed, so the document alone pins the whole run.
Experiment build_experiment(const nlohmann::json& doc);

// Entry point; exit 0 success, 1 usage error, 2 runtime failure.
int run(int argc, const char* const* argv);

}  // namespace gtfd::cli

#endif
