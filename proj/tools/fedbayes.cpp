#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fedbayes/errors.hpp"
#include "fedbayes/harness.hpp"
#include "fedbayes/report.hpp"

namespace {

using nlohmann::json;

struct CommonArgs {
  std::string config_path;
  std::vector<std::uint64_t> seeds;
  std::string out;
  std::string format;
};

void add_common_options(CLI::App* sub, CommonArgs& args) {
  sub->add_option("--config", args.config_path,
                  "experiment config, a JSON file path or preset:NAME");
  sub->add_option("--seed", args.seeds, "seed override; repeat for several seeds");
  sub->add_option("--out", args.out, "report destination; - or empty writes to stdout");
  sub->add_option("--format", args.format, "report format, json or csv");
}

std::string read_config_text(const std::string& path) {
  const std::string prefix = "preset:";
  if (path.rfind(prefix, 0) == 0) return fedbayes::preset_config(path.substr(prefix.size()));
  std::ifstream in(path);
  if (!in) throw fedbayes::input_error("config: cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

json parse_doc(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw fedbayes::parse_error(std::string("config: invalid JSON: ") + e.what());
  }
}

int run_kind(const std::string& kind, const CommonArgs& args, const json& flag_fields) {
  json doc = json::object();
  if (!args.config_path.empty()) {
    doc = parse_doc(read_config_text(args.config_path));
    if (!doc.is_object()) throw fedbayes::config_error("config: must be a JSON object");
  } else if (flag_fields.empty()) {
    throw fedbayes::config_error("config: --config is required for " + kind);
  }

  if (doc.contains("kind") && doc.at("kind") != kind)
    throw fedbayes::config_error("config: document kind \"" +
                                 doc.at("kind").dump() + "\" does not match subcommand " + kind);
  doc["kind"] = kind;
  for (const auto& [key, value] : flag_fields.items()) doc[key] = value;
  if (!args.seeds.empty()) doc["seeds"] = args.seeds;
  if (!args.out.empty()) doc["out"] = args.out;
  if (!args.format.empty()) doc["format"] = args.format;

  const fedbayes::ExperimentConfig config = fedbayes::parse_experiment_config(doc.dump());
  const fedbayes::ExperimentReport report = fedbayes::run_experiment(config);
  fedbayes::emit_report(report, config.format, config.out);
  if (!config.out.empty() && config.out != "-")
    std::cerr << "wrote " << config.format << " report to " << config.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"personalized federated estimation simulator"};
  app.require_subcommand(1);

  const std::vector<std::string> kinds = {"gauss",     "bern",   "mixture",    "linreg",
                                          "logreg",    "gmm-learn", "adaped",  "dp-adaped",
                                          "accountant", "panel-cv"};
  std::map<std::string, CommonArgs> common;
  for (const std::string& kind : kinds) {
    CLI::App* sub = app.add_subcommand(kind, "run a " + kind + " experiment");
    add_common_options(sub, common[kind]);
  }

  // accountant composes fine from flags alone, no config document needed
  CLI::App* acct = app.get_subcommand("accountant");
  double acct_K = 0, acct_m = 0, acct_T = 0, acct_tau = 1;
  double acct_c1 = 1.0, acct_c2 = 1.0, acct_s1 = 0.0, acct_s2 = 0.0, acct_delta = 1e-5;
  std::string acct_mode = "separate";
  acct->add_option("--K", acct_K, "sampled clients per synchronization");
  acct->add_option("--m", acct_m, "total clients");
  acct->add_option("--T", acct_T, "training iterations");
  acct->add_option("--tau", acct_tau, "iterations between synchronizations");
  acct->add_option("--c1", acct_c1, "model update clip radius");
  acct->add_option("--c2", acct_c2, "psi step clip radius");
  acct->add_option("--mode", acct_mode, "clip mode, separate or joint");
  acct->add_option("--sigma1", acct_s1, "noise scale on model updates");
  acct->add_option("--sigma2", acct_s2, "noise scale on psi steps");
  acct->add_option("--delta", acct_delta, "target delta for the epsilon conversion");

  // panel-cv points at data rather than a synthetic population
  std::string panel_path;
  app.get_subcommand("panel-cv")->add_option("--path", panel_path, "binary panel CSV");

  CLI::App* presets = app.add_subcommand("presets", "list bundled experiment presets");
  std::string preset_show;
  presets->add_option("name", preset_show, "print this preset's JSON instead");

  CLI11_PARSE(app, argc, argv);

  try {
    if (presets->parsed()) {
      if (!preset_show.empty()) {
        std::cout << fedbayes::preset_config(preset_show);
        return 0;
      }
      for (const std::string& name : fedbayes::preset_names()) std::cout << name << "\n";
      return 0;
    }

    for (const std::string& kind : kinds) {
      CLI::App* sub = app.get_subcommand(kind);
      if (!sub->parsed()) continue;

      json flags = json::object();
      if (kind == "accountant") {
        if (sub->count("--K")) flags["K"] = acct_K;
        if (sub->count("--m")) flags["m"] = acct_m;
        if (sub->count("--T")) flags["T"] = acct_T;
        if (sub->count("--tau")) flags["tau"] = acct_tau;
        if (sub->count("--c1")) flags["c1"] = acct_c1;
        if (sub->count("--c2")) flags["c2"] = acct_c2;
        if (sub->count("--mode")) flags["mode"] = acct_mode;
        if (sub->count("--sigma1")) flags["sigma_q1"] = acct_s1;
        if (sub->count("--sigma2")) flags["sigma_q2"] = acct_s2;
        if (sub->count("--delta")) flags["delta"] = acct_delta;
      }
      if (kind == "panel-cv" && sub->count("--path")) flags["path"] = panel_path;
      return run_kind(kind, common[kind], flags);
    }
    return 0;
  } catch (const fedbayes::divergence_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const fedbayes::error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 1;
  }
}
