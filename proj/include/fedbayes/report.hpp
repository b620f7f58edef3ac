#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace fedbayes {

// Mean over clients of the squared L2 distance between estimate and truth,
// with the across-client standard error of that mean.
struct MseMetrics {
  double mse = 0.0;
  double stderr_val = 0.0;
};

MseMetrics evaluate_mse(const std::vector<double>& estimates, const std::vector<double>& truths,
                        std::int64_t m, std::int64_t d);

// One line of the flat results table.
struct MetricRow {
  std::string metric;
  std::string estimator;
  double value = 0.0;
  double stderr_val = 0.0;
};

struct PrivacyReport {
  bool present = false;
  bool unbounded = false;
  double rdp_coef = 0.0;
  double alpha_star = 0.0;
  double epsilon = 0.0;
  double delta = 0.0;
};

// Everything a run emits. config_echo holds the canonical JSON text of the
// effective configuration; the hash covers exactly those bytes. With several
// seeds the stderr column is the across-seed sample standard deviation,
// otherwise it is the across-client standard error from the single run.
struct ExperimentReport {
  std::string kind;
  std::string config_hash;
  std::vector<std::uint64_t> seeds;
  std::string config_echo;
  std::vector<MetricRow> metrics;
  std::vector<std::pair<std::string, std::vector<double>>> trajectories;
  PrivacyReport privacy;
  double wall_clock_sec = 0.0;

  const MetricRow* find(const std::string& metric, const std::string& estimator) const;
};

std::uint64_t fnv1a64(const std::string& bytes);
std::string config_hash_hex(const std::string& canonical_config);

std::string report_json(const ExperimentReport& report);
std::string report_csv(const ExperimentReport& report);

// format is "json" or "csv"; an empty path or "-" writes to stdout.
void emit_report(const ExperimentReport& report, const std::string& format,
                 const std::string& path);

}  // namespace fedbayes
