#include "fedbayes/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "fedbayes/errors.hpp"
#include "fedbayes/kernels.hpp"

namespace fedbayes {

namespace {

std::string number_text(double v) { return nlohmann::json(v).dump(); }

}  // namespace

MseMetrics evaluate_mse(const std::vector<double>& estimates, const std::vector<double>& truths,
                        std::int64_t m, std::int64_t d) {
  if (m < 1 || d < 1) throw input_error("evaluate_mse: m and d must be >= 1");
  const std::size_t want = static_cast<std::size_t>(m * d);
  if (estimates.size() != want || truths.size() != want)
    throw input_error("evaluate_mse: expected " + std::to_string(want) +
                      " values, got " + std::to_string(estimates.size()) + " estimates and " +
                      std::to_string(truths.size()) + " truths");

  double total = 0.0;
  double total_sq = 0.0;
  for (std::int64_t i = 0; i < m; ++i) {
    const double e = kern::dist_sq(estimates.data() + i * d, truths.data() + i * d,
                                   static_cast<std::size_t>(d));
    total += e;
    total_sq += e * e;
  }
  MseMetrics out;
  const double md = static_cast<double>(m);
  out.mse = total / md;
  if (m > 1) {
    const double var = (total_sq - md * out.mse * out.mse) / (md - 1.0);
    out.stderr_val = std::sqrt(std::max(var, 0.0) / md);
  }
  return out;
}

const MetricRow* ExperimentReport::find(const std::string& metric,
                                        const std::string& estimator) const {
  for (const MetricRow& row : metrics)
    if (row.metric == metric && row.estimator == estimator) return &row;
  return nullptr;
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t hash = 14695981039346656037ull;
  for (const char ch : bytes) {
    hash ^= static_cast<unsigned char>(ch);
    hash *= 1099511628211ull;
  }
  return hash;
}

std::string config_hash_hex(const std::string& canonical_config) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "fnv1a64:%016llx",
                static_cast<unsigned long long>(fnv1a64(canonical_config)));
  return buf;
}

std::string report_json(const ExperimentReport& report) {
  nlohmann::json doc;
  doc["kind"] = report.kind;
  doc["config_hash"] = report.config_hash;
  doc["seeds"] = report.seeds;
  doc["config"] = nlohmann::json::parse(report.config_echo);
  nlohmann::json rows = nlohmann::json::array();
  for (const MetricRow& row : report.metrics) {
    nlohmann::json item;
    item["metric"] = row.metric;
    item["estimator"] = row.estimator;
    item["value"] = row.value;
    item["stderr"] = row.stderr_val;
    rows.push_back(item);
  }
  doc["metrics"] = rows;
  nlohmann::json series = nlohmann::json::object();
  for (const auto& [name, values] : report.trajectories) series[name] = values;
  doc["trajectories"] = series;
  if (report.privacy.present) {
    nlohmann::json privacy;
    privacy["unbounded"] = report.privacy.unbounded;
    privacy["rdp_coef"] = report.privacy.rdp_coef;
    privacy["alpha_star"] = report.privacy.alpha_star;
    privacy["epsilon"] = report.privacy.epsilon;
    privacy["delta"] = report.privacy.delta;
    doc["privacy"] = privacy;
  }
  doc["wall_clock_sec"] = report.wall_clock_sec;
  return doc.dump(2) + "\n";
}

std::string report_csv(const ExperimentReport& report) {
  std::ostringstream out;
  out << "# kind=" << report.kind << "\n";
  out << "# config_hash=" << report.config_hash << "\n";
  out << "# seeds=";
  for (std::size_t i = 0; i < report.seeds.size(); ++i) {
    if (i) out << ";";
    out << report.seeds[i];
  }
  out << "\n";
  out << "metric,estimator,value,stderr\n";
  for (const MetricRow& row : report.metrics)
    out << row.metric << "," << row.estimator << "," << number_text(row.value) << ","
        << number_text(row.stderr_val) << "\n";
  return out.str();
}

void emit_report(const ExperimentReport& report, const std::string& format,
                 const std::string& path) {
  std::string text;
  if (format == "json")
    text = report_json(report);
  else if (format == "csv")
    text = report_csv(report);
  else
    throw config_error("emit_report: format must be json or csv, got \"" + format + "\"");

  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw input_error("emit_report: cannot write " + path);
  out << text;
  if (!out) throw input_error("emit_report: write failed for " + path);
}

}  // namespace fedbayes
