#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedbayes/report.hpp"

namespace fedbayes {

// A validated experiment description. canonical is the effective
// configuration after defaults, with sorted keys; identical experiments
// canonicalize to identical bytes, which is what makes reruns byte-stable
// and the config hash meaningful. out and format stay outside the hash.
struct ExperimentConfig {
  std::string kind;
  std::string canonical;
  std::vector<std::uint64_t> seeds;
  std::string out;
  std::string format = "json";
};

ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::string& path);

std::vector<std::string> preset_names();
// JSON text of a named preset; unknown names raise config_error.
std::string preset_config(const std::string& name);

// Worker count for a batch of independent jobs: FEDBAYES_THREADS when set
// (must parse to a positive integer), hardware concurrency otherwise, never
// more than the job count.
int harness_thread_cap(std::int64_t jobs);

// Dispatches on kind, runs every seed, and aggregates. Deterministic for a
// fixed config regardless of the worker count.
ExperimentReport run_experiment(const ExperimentConfig& config);

}  // namespace fedbayes
