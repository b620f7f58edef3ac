#include "fedbayes/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <functional>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "fedbayes/adaped.hpp"
#include "fedbayes/accountant.hpp"
#include "fedbayes/bern_est.hpp"
#include "fedbayes/data.hpp"
#include "fedbayes/errors.hpp"
#include "fedbayes/gauss_est.hpp"
#include "fedbayes/learn.hpp"
#include "fedbayes/mechanisms.hpp"
#include "fedbayes/mixture_est.hpp"
#include "fedbayes/panel.hpp"
#include "fedbayes/priors.hpp"
#include "fedbayes/rng.hpp"
#include "fedbayes/sampling.hpp"

namespace fedbayes {

namespace {

using nlohmann::json;

// ---- config field access -------------------------------------------------

[[noreturn]] void bad_field(const std::string& ctx, const std::string& what) {
  throw config_error("config: " + ctx + " " + what);
}

const json& need_object(const json& doc, const std::string& ctx) {
  if (!doc.is_object()) bad_field(ctx, "must be an object");
  return doc;
}

void check_keys(const json& doc, const std::string& ctx,
                std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : doc.items()) {
    bool known = false;
    for (const char* name : allowed)
      if (key == name) known = true;
    if (!known) bad_field(ctx, "has unknown field \"" + key + "\"");
  }
}

double need_number(const json& doc, const std::string& ctx, const char* key) {
  if (!doc.contains(key)) bad_field(ctx, std::string("is missing \"") + key + "\"");
  const json& v = doc.at(key);
  if (!v.is_number()) bad_field(ctx, std::string("field \"") + key + "\" must be a number");
  return v.get<double>();
}

double number_or(const json& doc, const std::string& ctx, const char* key, double dflt) {
  if (!doc.contains(key)) return dflt;
  const json& v = doc.at(key);
  if (!v.is_number()) bad_field(ctx, std::string("field \"") + key + "\" must be a number");
  return v.get<double>();
}

std::int64_t as_integer(double v, const std::string& ctx, const char* key) {
  if (!(std::floor(v) == v) || std::abs(v) > 9.0e15)
    bad_field(ctx, std::string("field \"") + key + "\" must be an integer");
  return static_cast<std::int64_t>(v);
}

std::int64_t need_integer(const json& doc, const std::string& ctx, const char* key) {
  return as_integer(need_number(doc, ctx, key), ctx, key);
}

std::int64_t integer_or(const json& doc, const std::string& ctx, const char* key,
                        std::int64_t dflt) {
  if (!doc.contains(key)) return dflt;
  return as_integer(number_or(doc, ctx, key, 0.0), ctx, key);
}

bool bool_or(const json& doc, const std::string& ctx, const char* key, bool dflt) {
  if (!doc.contains(key)) return dflt;
  const json& v = doc.at(key);
  if (!v.is_boolean()) bad_field(ctx, std::string("field \"") + key + "\" must be a boolean");
  return v.get<bool>();
}

std::string string_or(const json& doc, const std::string& ctx, const char* key,
                      const std::string& dflt) {
  if (!doc.contains(key)) return dflt;
  const json& v = doc.at(key);
  if (!v.is_string()) bad_field(ctx, std::string("field \"") + key + "\" must be a string");
  return v.get<std::string>();
}

std::vector<double> need_number_array(const json& doc, const std::string& ctx, const char* key,
                                      std::int64_t want) {
  if (!doc.contains(key)) bad_field(ctx, std::string("is missing \"") + key + "\"");
  const json& v = doc.at(key);
  if (!v.is_array()) bad_field(ctx, std::string("field \"") + key + "\" must be an array");
  std::vector<double> out;
  for (const json& item : v) {
    if (!item.is_number())
      bad_field(ctx, std::string("field \"") + key + "\" must hold numbers");
    out.push_back(item.get<double>());
  }
  if (want >= 0 && static_cast<std::int64_t>(out.size()) != want)
    bad_field(ctx, std::string("field \"") + key + "\" must have length " +
                       std::to_string(want));
  return out;
}

// mu may be a scalar (broadcast) or an explicit length-d array
std::vector<double> mean_vector(const json& prior, const std::string& ctx, std::int64_t d) {
  if (!prior.contains("mu")) return std::vector<double>(static_cast<std::size_t>(d), 0.0);
  const json& v = prior.at("mu");
  if (v.is_number())
    return std::vector<double>(static_cast<std::size_t>(d), v.get<double>());
  return need_number_array(prior, ctx, "mu", d);
}

// ---- shared normalizer pieces ---------------------------------------------

json normalize_seeds(const json& doc) {
  if (!doc.contains("seeds")) return json::array({1});
  const json& v = doc.at("seeds");
  if (!v.is_array() || v.empty()) bad_field("seeds", "must be a nonempty array");
  json out = json::array();
  for (const json& item : v) {
    if (!item.is_number_integer() && !item.is_number_unsigned())
      bad_field("seeds", "must hold integers");
    if (item.is_number_integer() && item.get<std::int64_t>() < 0)
      bad_field("seeds", "must be nonnegative");
    out.push_back(item.get<std::uint64_t>());
  }
  return out;
}

json normalize_gaussian_prior(const json& doc, const std::string& ctx, std::int64_t d,
                              bool with_sigma_x) {
  if (!doc.contains("prior")) bad_field(ctx, "is missing \"prior\"");
  const json& p = need_object(doc.at("prior"), ctx + ".prior");
  check_keys(p, ctx + ".prior", {"mu", "sigma_theta_sq", "sigma_x_sq"});
  json out;
  out["mu"] = mean_vector(p, ctx + ".prior", d);
  const double st = need_number(p, ctx + ".prior", "sigma_theta_sq");
  if (!(st >= 0.0)) bad_field(ctx + ".prior", "sigma_theta_sq must be >= 0");
  out["sigma_theta_sq"] = st;
  if (with_sigma_x) {
    const double sx = need_number(p, ctx + ".prior", "sigma_x_sq");
    if (!(sx > 0.0)) bad_field(ctx + ".prior", "sigma_x_sq must be > 0");
    out["sigma_x_sq"] = sx;
  }
  return out;
}

GaussianPrior gaussian_prior_from(const json& effective, std::int64_t d, bool with_sigma_x) {
  const json& p = effective.at("prior");
  GaussianPrior prior;
  prior.d = d;
  prior.mu = p.at("mu").get<std::vector<double>>();
  prior.sigma_theta_sq = p.at("sigma_theta_sq").get<double>();
  if (with_sigma_x) prior.sigma_x_sq = p.at("sigma_x_sq").get<double>();
  prior.validate();
  return prior;
}

json normalize_learn(const json& doc, const std::string& ctx) {
  json in = doc.contains("learn") ? doc.at("learn") : json::object();
  need_object(in, ctx + ".learn");
  check_keys(in, ctx + ".learn",
             {"eta", "rounds", "eta_decay", "weight_decay", "sync_every", "variance_floor",
              "divergence_limit", "update_theta", "update_mu", "update_sigma_theta",
              "update_sigma_x"});
  json out;
  out["eta"] = number_or(in, ctx, "eta", 0.01);
  out["rounds"] = integer_or(in, ctx, "rounds", 200);
  out["eta_decay"] = number_or(in, ctx, "eta_decay", 0.99);
  out["weight_decay"] = number_or(in, ctx, "weight_decay", 0.0);
  out["sync_every"] = integer_or(in, ctx, "sync_every", 1);
  out["variance_floor"] = number_or(in, ctx, "variance_floor", 1e-8);
  out["divergence_limit"] = number_or(in, ctx, "divergence_limit", 1e8);
  out["update_theta"] = bool_or(in, ctx, "update_theta", true);
  out["update_mu"] = bool_or(in, ctx, "update_mu", true);
  out["update_sigma_theta"] = bool_or(in, ctx, "update_sigma_theta", true);
  out["update_sigma_x"] = bool_or(in, ctx, "update_sigma_x", true);
  if (!(out["eta"].get<double>() > 0.0)) bad_field(ctx + ".learn", "eta must be > 0");
  if (out["rounds"].get<std::int64_t>() < 1) bad_field(ctx + ".learn", "rounds must be >= 1");
  return out;
}

LearnConfig learn_from(const json& effective) {
  const json& l = effective.at("learn");
  LearnConfig out;
  out.eta = l.at("eta").get<double>();
  out.rounds = l.at("rounds").get<std::int64_t>();
  out.eta_decay = l.at("eta_decay").get<double>();
  out.weight_decay = l.at("weight_decay").get<double>();
  out.sync_every = l.at("sync_every").get<std::int64_t>();
  out.variance_floor = l.at("variance_floor").get<double>();
  out.divergence_limit = l.at("divergence_limit").get<double>();
  out.update_theta = l.at("update_theta").get<bool>();
  out.update_mu = l.at("update_mu").get<bool>();
  out.update_sigma_theta = l.at("update_sigma_theta").get<bool>();
  out.update_sigma_x = l.at("update_sigma_x").get<bool>();
  return out;
}

json normalize_init(const json& doc, const std::string& ctx) {
  json in = doc.contains("init") ? doc.at("init") : json::object();
  need_object(in, ctx + ".init");
  check_keys(in, ctx + ".init", {"sigma_theta_sq0", "sigma_x_sq0"});
  json out;
  out["sigma_theta_sq0"] = number_or(in, ctx, "sigma_theta_sq0", 1.0);
  out["sigma_x_sq0"] = number_or(in, ctx, "sigma_x_sq0", 1.0);
  if (!(out["sigma_theta_sq0"].get<double>() > 0.0))
    bad_field(ctx + ".init", "sigma_theta_sq0 must be > 0");
  if (!(out["sigma_x_sq0"].get<double>() > 0.0))
    bad_field(ctx + ".init", "sigma_x_sq0 must be > 0");
  return out;
}

LearnInit init_from(const json& effective) {
  const json& i = effective.at("init");
  LearnInit out;
  out.sigma_theta_sq0 = i.at("sigma_theta_sq0").get<double>();
  out.sigma_x_sq0 = i.at("sigma_x_sq0").get<double>();
  return out;
}

MechanismKind mechanism_kind_from(const std::string& name, const std::string& ctx) {
  if (name == "identity") return MechanismKind::identity;
  if (name == "quantizer") return MechanismKind::quantizer;
  if (name == "gaussian_ldp") return MechanismKind::gaussian_ldp;
  if (name == "binary_response") return MechanismKind::binary_response;
  bad_field(ctx, "has unknown mechanism kind \"" + name + "\"");
}

json normalize_mechanism(const json& doc, const std::string& ctx, double auto_range) {
  json in = doc.contains("mechanism") ? doc.at("mechanism") : json::object();
  need_object(in, ctx + ".mechanism");
  check_keys(in, ctx + ".mechanism",
             {"kind", "bits", "range_half_width", "epsilon0", "delta"});
  json out;
  const std::string kind = string_or(in, ctx, "kind", "identity");
  mechanism_kind_from(kind, ctx + ".mechanism");
  out["kind"] = kind;
  out["bits"] = integer_or(in, ctx, "bits", 1);
  out["epsilon0"] = number_or(in, ctx, "epsilon0", 1.0);
  out["delta"] = number_or(in, ctx, "delta", 1e-5);
  double range = auto_range;
  if (in.contains("range_half_width") && !in.at("range_half_width").is_string())
    range = need_number(in, ctx + ".mechanism", "range_half_width");
  else if (in.contains("range_half_width") &&
           in.at("range_half_width").get<std::string>() != "auto")
    bad_field(ctx + ".mechanism", "range_half_width must be a number or \"auto\"");
  out["range_half_width"] = range;
  return out;
}

MechanismSpec mechanism_from(const json& effective) {
  const json& m = effective.at("mechanism");
  MechanismSpec out;
  out.kind = mechanism_kind_from(m.at("kind").get<std::string>(), "mechanism");
  out.bits = static_cast<int>(m.at("bits").get<std::int64_t>());
  out.range_half_width = m.at("range_half_width").get<double>();
  out.epsilon0 = m.at("epsilon0").get<double>();
  out.delta = m.at("delta").get<double>();
  if (out.kind != MechanismKind::identity) out.validate();
  return out;
}

// ---- per-kind normalizers --------------------------------------------------

json normalize_gauss(const json& doc) {
  check_keys(doc, "gauss",
             {"kind", "seeds", "out", "format", "m", "n", "d", "prior", "mechanism",
              "epsilon0_grid"});
  json out;
  out["kind"] = "gauss";
  const std::int64_t m = need_integer(doc, "gauss", "m");
  const std::int64_t n = need_integer(doc, "gauss", "n");
  const std::int64_t d = integer_or(doc, "gauss", "d", 1);
  if (m < 2) bad_field("gauss", "needs m >= 2");
  if (n < 1 || d < 1) bad_field("gauss", "needs n >= 1 and d >= 1");
  out["m"] = m;
  out["n"] = n;
  out["d"] = d;
  out["prior"] = normalize_gaussian_prior(doc, "gauss", d, true);

  const double st = out["prior"]["sigma_theta_sq"].get<double>();
  const double sx = out["prior"]["sigma_x_sq"].get<double>();
  double r = 0.0;
  for (const double c : out["prior"]["mu"].get<std::vector<double>>())
    r = std::max(r, std::abs(c));
  const double auto_range = clip_radius_b(r, std::sqrt(st), std::sqrt(sx), n, m);
  out["mechanism"] = normalize_mechanism(doc, "gauss", auto_range);

  if (doc.contains("epsilon0_grid")) {
    if (out["mechanism"]["kind"].get<std::string>() != "gaussian_ldp")
      bad_field("gauss", "epsilon0_grid requires the gaussian_ldp mechanism");
    const std::vector<double> grid = need_number_array(doc, "gauss", "epsilon0_grid", -1);
    if (grid.empty()) bad_field("gauss", "epsilon0_grid must be nonempty");
    for (const double eps : grid)
      if (!(eps > 0.0)) bad_field("gauss", "epsilon0_grid entries must be > 0");
    out["epsilon0_grid"] = grid;
  }
  if (out["mechanism"]["kind"].get<std::string>() == "binary_response")
    bad_field("gauss", "binary_response does not apply to unbounded means");
  return out;
}

json normalize_bern(const json& doc) {
  check_keys(doc, "bern", {"kind", "seeds", "out", "format", "m", "n", "prior", "epsilon0"});
  json out;
  out["kind"] = "bern";
  const std::int64_t m = need_integer(doc, "bern", "m");
  const std::int64_t n = need_integer(doc, "bern", "n");
  if (m < 3) bad_field("bern", "needs m >= 3");
  if (n < 1) bad_field("bern", "needs n >= 1");
  out["m"] = m;
  out["n"] = n;

  if (!doc.contains("prior")) bad_field("bern", "is missing \"prior\"");
  const json& p = need_object(doc.at("prior"), "bern.prior");
  check_keys(p, "bern.prior", {"kind", "alpha", "beta", "normal_mean", "normal_sd"});
  const std::string kind = string_or(p, "bern.prior", "kind", "uniform");
  if (kind != "beta" && kind != "three_spike" && kind != "uniform" && kind != "clipped_normal")
    bad_field("bern.prior", "has unknown kind \"" + kind + "\"");
  json prior;
  prior["kind"] = kind;
  prior["alpha"] = number_or(p, "bern.prior", "alpha", 1.0);
  prior["beta"] = number_or(p, "bern.prior", "beta", 1.0);
  prior["normal_mean"] = number_or(p, "bern.prior", "normal_mean", 0.5);
  prior["normal_sd"] = number_or(p, "bern.prior", "normal_sd", 0.15);
  out["prior"] = prior;

  const double eps0 = number_or(doc, "bern", "epsilon0", 0.0);
  if (eps0 < 0.0) bad_field("bern", "epsilon0 must be >= 0");
  out["epsilon0"] = eps0;
  return out;
}

ScalarPrior scalar_prior_from(const json& effective) {
  const json& p = effective.at("prior");
  ScalarPrior out;
  const std::string kind = p.at("kind").get<std::string>();
  if (kind == "beta")
    out.kind = ScalarPriorKind::beta;
  else if (kind == "three_spike")
    out.kind = ScalarPriorKind::three_spike;
  else if (kind == "uniform")
    out.kind = ScalarPriorKind::uniform;
  else
    out.kind = ScalarPriorKind::clipped_normal;
  out.beta_params.alpha = p.at("alpha").get<double>();
  out.beta_params.beta = p.at("beta").get<double>();
  out.normal_mean = p.at("normal_mean").get<double>();
  out.normal_sd = p.at("normal_sd").get<double>();
  out.validate();
  return out;
}

json normalize_mixture(const json& doc) {
  check_keys(doc, "mixture",
             {"kind", "seeds", "out", "format", "m", "n", "d", "k", "T", "sigma_x_sq",
              "prior", "upload"});
  json out;
  out["kind"] = "mixture";
  const std::int64_t m = need_integer(doc, "mixture", "m");
  const std::int64_t n = need_integer(doc, "mixture", "n");
  const std::int64_t d = need_integer(doc, "mixture", "d");
  const std::int64_t k = need_integer(doc, "mixture", "k");
  const std::int64_t T = integer_or(doc, "mixture", "T", 10);
  if (m < 2 || n < 1 || d < 1 || k < 1 || T < 1)
    bad_field("mixture", "needs m >= 2, n >= 1, d >= 1, k >= 1, T >= 1");
  const double sx = need_number(doc, "mixture", "sigma_x_sq");
  if (!(sx > 0.0)) bad_field("mixture", "sigma_x_sq must be > 0");
  out["m"] = m;
  out["n"] = n;
  out["d"] = d;
  out["k"] = k;
  out["T"] = T;
  out["sigma_x_sq"] = sx;

  if (!doc.contains("prior")) bad_field("mixture", "is missing \"prior\"");
  const json& p = need_object(doc.at("prior"), "mixture.prior");
  check_keys(p, "mixture.prior", {"probs", "centers", "radius_r"});
  json prior;
  prior["probs"] = need_number_array(p, "mixture.prior", "probs", k);
  prior["centers"] = need_number_array(p, "mixture.prior", "centers", k * d);
  double radius = number_or(p, "mixture.prior", "radius_r", 0.0);
  if (radius <= 0.0) {
    const std::vector<double> centers = prior["centers"].get<std::vector<double>>();
    for (std::int64_t l = 0; l < k; ++l) {
      double norm_sq = 0.0;
      for (std::int64_t c = 0; c < d; ++c) {
        const double v = centers[static_cast<std::size_t>(l * d + c)];
        norm_sq += v * v;
      }
      radius = std::max(radius, std::sqrt(norm_sq));
    }
    if (radius <= 0.0) radius = 1.0;
  }
  prior["radius_r"] = radius;
  out["prior"] = prior;

  if (doc.contains("upload")) {
    const json& u = need_object(doc.at("upload"), "mixture.upload");
    check_keys(u, "mixture.upload",
               {"kind", "bits", "range_half_width", "epsilon0", "delta", "clip_radius"});
    json holder;
    holder["mechanism"] = u;
    holder["mechanism"].erase("clip_radius");
    json up = normalize_mechanism(holder, "mixture.upload", 1.0);
    up["clip_radius"] = number_or(u, "mixture.upload", "clip_radius", 0.0);
    out["upload"] = up;
  }
  return out;
}

DiscretePrior discrete_prior_from(const json& effective, std::int64_t k, std::int64_t d) {
  const json& p = effective.at("prior");
  DiscretePrior out;
  out.k = k;
  out.d = d;
  out.probs = p.at("probs").get<std::vector<double>>();
  out.centers = p.at("centers").get<std::vector<double>>();
  out.radius_r = p.at("radius_r").get<double>();
  out.validate();
  return out;
}

json normalize_linreg(const json& doc) {
  check_keys(doc, "linreg",
             {"kind", "seeds", "out", "format", "m", "n", "d", "prior", "feature_sd",
              "learn", "init", "baselines"});
  json out;
  out["kind"] = "linreg";
  const std::int64_t m = need_integer(doc, "linreg", "m");
  const std::int64_t n = need_integer(doc, "linreg", "n");
  const std::int64_t d = need_integer(doc, "linreg", "d");
  if (m < 1 || n < 0 || d < 1) bad_field("linreg", "needs m >= 1, n >= 0, d >= 1");
  out["m"] = m;
  out["n"] = n;
  out["d"] = d;
  out["prior"] = normalize_gaussian_prior(doc, "linreg", d, true);
  const double fsd = number_or(doc, "linreg", "feature_sd", 1.0);
  if (!(fsd > 0.0)) bad_field("linreg", "feature_sd must be > 0");
  out["feature_sd"] = fsd;
  out["learn"] = normalize_learn(doc, "linreg");
  out["init"] = normalize_init(doc, "linreg");
  out["baselines"] = bool_or(doc, "linreg", "baselines", true);
  return out;
}

json normalize_logreg(const json& doc) {
  check_keys(doc, "logreg",
             {"kind", "seeds", "out", "format", "m", "n", "d", "prior", "feature_sd",
              "learn", "init", "baselines"});
  json out;
  out["kind"] = "logreg";
  const std::int64_t m = need_integer(doc, "logreg", "m");
  const std::int64_t n = need_integer(doc, "logreg", "n");
  const std::int64_t d = need_integer(doc, "logreg", "d");
  if (m < 1 || n < 1 || d < 1) bad_field("logreg", "needs m >= 1, n >= 1, d >= 1");
  out["m"] = m;
  out["n"] = n;
  out["d"] = d;
  out["prior"] = normalize_gaussian_prior(doc, "logreg", d, false);
  const double fsd = number_or(doc, "logreg", "feature_sd", 1.0);
  if (!(fsd > 0.0)) bad_field("logreg", "feature_sd must be > 0");
  out["feature_sd"] = fsd;
  out["learn"] = normalize_learn(doc, "logreg");
  out["init"] = normalize_init(doc, "logreg");
  out["baselines"] = bool_or(doc, "logreg", "baselines", true);
  return out;
}

json normalize_gmm_learn(const json& doc) {
  check_keys(doc, "gmm-learn",
             {"kind", "seeds", "out", "format", "m", "n", "d", "k", "prior", "feature_sd",
              "sigma_x_sq", "learn", "init", "seed_prior"});
  json out;
  out["kind"] = "gmm-learn";
  const std::int64_t m = need_integer(doc, "gmm-learn", "m");
  const std::int64_t n = need_integer(doc, "gmm-learn", "n");
  const std::int64_t d = need_integer(doc, "gmm-learn", "d");
  const std::int64_t k = need_integer(doc, "gmm-learn", "k");
  if (m < 1 || n < 1 || d < 1 || k < 1)
    bad_field("gmm-learn", "needs m >= 1, n >= 1, d >= 1, k >= 1");
  out["m"] = m;
  out["n"] = n;
  out["d"] = d;
  out["k"] = k;

  if (!doc.contains("prior")) bad_field("gmm-learn", "is missing \"prior\"");
  const json& p = need_object(doc.at("prior"), "gmm-learn.prior");
  check_keys(p, "gmm-learn.prior", {"probs", "centers", "component_sds"});
  json prior;
  prior["probs"] = need_number_array(p, "gmm-learn.prior", "probs", k);
  prior["centers"] = need_number_array(p, "gmm-learn.prior", "centers", k * d);
  if (p.contains("component_sds") && p.at("component_sds").is_number()) {
    prior["component_sds"] = std::vector<double>(
        static_cast<std::size_t>(k), p.at("component_sds").get<double>());
  } else {
    prior["component_sds"] = need_number_array(p, "gmm-learn.prior", "component_sds", k);
  }
  out["prior"] = prior;

  const double fsd = number_or(doc, "gmm-learn", "feature_sd", 1.0);
  if (!(fsd > 0.0)) bad_field("gmm-learn", "feature_sd must be > 0");
  out["feature_sd"] = fsd;
  const double sx = need_number(doc, "gmm-learn", "sigma_x_sq");
  if (!(sx > 0.0)) bad_field("gmm-learn", "sigma_x_sq must be > 0");
  out["sigma_x_sq"] = sx;
  out["learn"] = normalize_learn(doc, "gmm-learn");
  out["init"] = normalize_init(doc, "gmm-learn");
  const std::string sp = string_or(doc, "gmm-learn", "seed_prior", "none");
  if (sp != "none" && sp != "truth")
    bad_field("gmm-learn", "seed_prior must be \"none\" or \"truth\"");
  out["seed_prior"] = sp;
  return out;
}

GaussianMixturePrior gmm_prior_from(const json& effective, std::int64_t k, std::int64_t d) {
  const json& p = effective.at("prior");
  GaussianMixturePrior out;
  out.k = k;
  out.d = d;
  out.probs = p.at("probs").get<std::vector<double>>();
  out.centers = p.at("centers").get<std::vector<double>>();
  out.component_sds = p.at("component_sds").get<std::vector<double>>();
  out.validate();
  return out;
}

json normalize_adaped_train(const json& doc, const std::string& ctx) {
  json in = doc.contains("train") ? doc.at("train") : json::object();
  need_object(in, ctx + ".train");
  check_keys(in, ctx + ".train",
             {"rounds", "tau", "clients_per_round", "eta1", "eta2", "eta3", "psi0",
              "psi_floor", "batch_size", "kd_weight", "reverse_kd", "finetune",
              "finetune_cap"});
  json out;
  out["rounds"] = integer_or(in, ctx, "rounds", 100);
  out["tau"] = integer_or(in, ctx, "tau", 1);
  out["clients_per_round"] = integer_or(in, ctx, "clients_per_round", 0);
  out["eta1"] = number_or(in, ctx, "eta1", 0.1);
  out["eta2"] = number_or(in, ctx, "eta2", 0.1);
  out["eta3"] = number_or(in, ctx, "eta3", 0.03);
  out["psi0"] = number_or(in, ctx, "psi0", 1.0);
  out["psi_floor"] = number_or(in, ctx, "psi_floor", 0.5);
  out["batch_size"] = integer_or(in, ctx, "batch_size", 0);
  out["kd_weight"] = number_or(in, ctx, "kd_weight", 1.0);
  out["reverse_kd"] = bool_or(in, ctx, "reverse_kd", false);
  out["finetune"] = bool_or(in, ctx, "finetune", false);
  out["finetune_cap"] = integer_or(in, ctx, "finetune_cap", -1);
  return out;
}

json normalize_adaped_common(const json& doc, const std::string& ctx) {
  json out;
  const std::int64_t m = need_integer(doc, ctx, "m");
  const std::int64_t n = need_integer(doc, ctx, "n");
  const std::int64_t d = need_integer(doc, ctx, "d");
  if (m < 1 || n < 1 || d < 1) bad_field(ctx, "needs m >= 1, n >= 1, d >= 1");
  out["m"] = m;
  out["n"] = n;
  out["d"] = d;
  const std::int64_t n_test = integer_or(doc, ctx, "n_test", 4 * n);
  if (n_test < 1) bad_field(ctx, "n_test must be >= 1");
  out["n_test"] = n_test;
  const std::int64_t clusters = integer_or(doc, ctx, "clusters", 3);
  if (clusters < 1) bad_field(ctx, "clusters must be >= 1");
  out["clusters"] = clusters;
  const double scale = number_or(doc, ctx, "teacher_scale", 2.0);
  if (!(scale > 0.0)) bad_field(ctx, "teacher_scale must be > 0");
  out["teacher_scale"] = scale;
  const std::string labels = string_or(doc, ctx, "labels", "logistic");
  if (labels != "logistic" && labels != "threshold")
    bad_field(ctx, "labels must be \"logistic\" or \"threshold\"");
  out["labels"] = labels;

  json model_in = doc.contains("model") ? doc.at("model") : json::object();
  need_object(model_in, ctx + ".model");
  check_keys(model_in, ctx + ".model", {"arch", "hidden", "classes"});
  json model;
  const std::string arch = string_or(model_in, ctx, "arch", "linear_softmax");
  if (arch != "linear_softmax" && arch != "one_hidden")
    bad_field(ctx + ".model", "arch must be linear_softmax or one_hidden");
  model["arch"] = arch;
  model["hidden"] = integer_or(model_in, ctx, "hidden", arch == "one_hidden" ? 8 : 0);
  const std::int64_t classes = integer_or(model_in, ctx, "classes", 2);
  if (classes != 2) bad_field(ctx + ".model", "binary teachers need classes = 2");
  model["classes"] = classes;
  out["model"] = model;

  out["train"] = normalize_adaped_train(doc, ctx);
  return out;
}

json normalize_adaped(const json& doc) {
  check_keys(doc, "adaped",
             {"kind", "seeds", "out", "format", "m", "n", "n_test", "d", "clusters",
              "teacher_scale", "labels", "model", "train", "baselines"});
  json out = normalize_adaped_common(doc, "adaped");
  out["kind"] = "adaped";
  out["baselines"] = bool_or(doc, "adaped", "baselines", true);
  return out;
}

json normalize_dp_adaped(const json& doc) {
  check_keys(doc, "dp-adaped",
             {"kind", "seeds", "out", "format", "m", "n", "n_test", "d", "clusters",
              "teacher_scale", "labels", "model", "train", "baselines", "dp"});
  json out = normalize_adaped_common(doc, "dp-adaped");
  out["kind"] = "dp-adaped";
  out["baselines"] = bool_or(doc, "dp-adaped", "baselines", false);

  if (!doc.contains("dp")) bad_field("dp-adaped", "is missing \"dp\"");
  const json& in = need_object(doc.at("dp"), "dp-adaped.dp");
  check_keys(in, "dp-adaped.dp", {"c1", "c2", "mode", "sigma_q1", "sigma_q2", "delta"});
  json dp;
  dp["c1"] = number_or(in, "dp-adaped.dp", "c1", 1.0);
  dp["c2"] = number_or(in, "dp-adaped.dp", "c2", 1.0);
  const std::string mode = string_or(in, "dp-adaped.dp", "mode", "separate");
  if (mode != "separate" && mode != "joint")
    bad_field("dp-adaped.dp", "mode must be \"separate\" or \"joint\"");
  dp["mode"] = mode;
  dp["sigma_q1"] = number_or(in, "dp-adaped.dp", "sigma_q1", 0.0);
  dp["sigma_q2"] = number_or(in, "dp-adaped.dp", "sigma_q2", 0.0);
  const double delta = number_or(in, "dp-adaped.dp", "delta", 1e-5);
  if (!(delta > 0.0 && delta < 1.0)) bad_field("dp-adaped.dp", "delta must be in (0,1)");
  dp["delta"] = delta;
  out["dp"] = dp;
  return out;
}

json normalize_accountant(const json& doc) {
  check_keys(doc, "accountant",
             {"kind", "seeds", "out", "format", "K", "m", "T", "tau", "c1", "c2", "mode",
              "sigma_q1", "sigma_q2", "delta"});
  json out;
  out["kind"] = "accountant";
  out["K"] = need_integer(doc, "accountant", "K");
  out["m"] = need_integer(doc, "accountant", "m");
  out["T"] = need_integer(doc, "accountant", "T");
  out["tau"] = integer_or(doc, "accountant", "tau", 1);
  out["c1"] = number_or(doc, "accountant", "c1", 1.0);
  out["c2"] = number_or(doc, "accountant", "c2", 1.0);
  const std::string mode = string_or(doc, "accountant", "mode", "separate");
  if (mode != "separate" && mode != "joint")
    bad_field("accountant", "mode must be \"separate\" or \"joint\"");
  out["mode"] = mode;
  out["sigma_q1"] = need_number(doc, "accountant", "sigma_q1");
  out["sigma_q2"] = need_number(doc, "accountant", "sigma_q2");
  const double delta = number_or(doc, "accountant", "delta", 1e-5);
  if (!(delta > 0.0 && delta < 1.0)) bad_field("accountant", "delta must be in (0,1)");
  out["delta"] = delta;
  return out;
}

json normalize_panel_cv(const json& doc) {
  check_keys(doc, "panel-cv", {"kind", "seeds", "out", "format", "path"});
  json out;
  out["kind"] = "panel-cv";
  if (!doc.contains("path")) bad_field("panel-cv", "is missing \"path\"");
  if (!doc.at("path").is_string()) bad_field("panel-cv", "path must be a string");
  out["path"] = doc.at("path").get<std::string>();
  return out;
}

json normalize_config(const json& doc) {
  const std::string kind = string_or(doc, "config", "kind", "");
  if (kind.empty()) bad_field("config", "is missing \"kind\"");
  json out;
  if (kind == "gauss")
    out = normalize_gauss(doc);
  else if (kind == "bern")
    out = normalize_bern(doc);
  else if (kind == "mixture")
    out = normalize_mixture(doc);
  else if (kind == "linreg")
    out = normalize_linreg(doc);
  else if (kind == "logreg")
    out = normalize_logreg(doc);
  else if (kind == "gmm-learn")
    out = normalize_gmm_learn(doc);
  else if (kind == "adaped")
    out = normalize_adaped(doc);
  else if (kind == "dp-adaped")
    out = normalize_dp_adaped(doc);
  else if (kind == "accountant")
    out = normalize_accountant(doc);
  else if (kind == "panel-cv")
    out = normalize_panel_cv(doc);
  else
    throw config_error("config: unknown experiment kind \"" + kind + "\"");
  out["seeds"] = normalize_seeds(doc);
  return out;
}

// ---- per-seed runners -------------------------------------------------------

struct SeedOutcome {
  std::vector<MetricRow> rows;
  std::vector<std::pair<std::string, std::vector<double>>> series;
  PrivacyReport privacy;
};

void push_row(SeedOutcome& out, const std::string& metric, const std::string& estimator,
              double value, double stderr_val = 0.0) {
  out.rows.push_back({metric, estimator, value, stderr_val});
}

std::string eps_label(double eps) { return "private_eps=" + nlohmann::json(eps).dump(); }

SeedOutcome run_gauss_seed(const json& doc, std::uint64_t seed) {
  const std::int64_t m = doc.at("m").get<std::int64_t>();
  const std::int64_t n = doc.at("n").get<std::int64_t>();
  const std::int64_t d = doc.at("d").get<std::int64_t>();
  const GaussianPrior prior = gaussian_prior_from(doc, d, true);
  const SyntheticDataset data = sample_gaussian_population(prior, m, n, seed);

  SeedOutcome out;
  const double a = shrinkage_weight(prior.sigma_theta_sq, prior.sigma_x_sq, n, 0.0, m);
  const GaussEstimateReport pers = personalized_gaussian(data, a);
  const GaussEstimateReport local = personalized_gaussian(data, 1.0);
  const GaussEstimateReport global = personalized_gaussian(data, 0.0);
  push_row(out, "mse", "personalized", pers.empirical_mse, pers.empirical_mse_stderr);
  push_row(out, "mse", "local", local.empirical_mse, local.empirical_mse_stderr);
  push_row(out, "mse", "global", global.empirical_mse, global.empirical_mse_stderr);
  push_row(out, "mse", "theory", pers.theoretical_mse);
  push_row(out, "shrinkage_weight", "personalized", a);

  const MechanismSpec mech = mechanism_from(doc);
  if (mech.kind != MechanismKind::identity) {
    if (doc.contains("epsilon0_grid")) {
      for (const double eps : doc.at("epsilon0_grid").get<std::vector<double>>()) {
        MechanismSpec point = mech;
        point.epsilon0 = eps;
        const GaussEstimateReport priv = constrained_personalized_gaussian(data, point, seed);
        push_row(out, "mse", eps_label(eps), priv.empirical_mse, priv.empirical_mse_stderr);
        push_row(out, "mse_unclipped", eps_label(eps), priv.mse_unclipped);
      }
    } else {
      const GaussEstimateReport priv = constrained_personalized_gaussian(data, mech, seed);
      push_row(out, "mse", "private", priv.empirical_mse, priv.empirical_mse_stderr);
      push_row(out, "mse_unclipped", "private", priv.mse_unclipped);
      push_row(out, "mse", "private_theory", priv.theoretical_mse);
      push_row(out, "clipped_clients", "private", static_cast<double>(priv.clipped_clients));
      push_row(out, "sigma_q", "private", mech.sigma_q());
    }
  }
  return out;
}

SeedOutcome run_bern_seed(const json& doc, std::uint64_t seed) {
  const std::int64_t m = doc.at("m").get<std::int64_t>();
  const std::int64_t n = doc.at("n").get<std::int64_t>();
  const ScalarPrior prior = scalar_prior_from(doc);
  const SyntheticDataset data = sample_bernoulli_population(prior, m, n, seed);

  SeedOutcome out;
  const BernEstimateReport rep = personalized_bernoulli(data);
  push_row(out, "mse", "personalized", rep.empirical_mse, rep.empirical_mse_stderr);
  push_row(out, "mse", "local", rep.local_mse);

  if (prior.kind == ScalarPriorKind::beta) {
    const double alpha = prior.beta_params.alpha;
    const double beta = prior.beta_params.beta;
    std::vector<double> oracle(static_cast<std::size_t>(m));
    for (std::int64_t i = 0; i < m; ++i) {
      const std::int64_t z =
          static_cast<std::int64_t>(data.clients[static_cast<std::size_t>(i)].z_sum());
      oracle[static_cast<std::size_t>(i)] = posterior_mean_known(alpha, beta, n, z);
    }
    const MseMetrics known = evaluate_mse(oracle, data.true_params, m, 1);
    push_row(out, "mse", "known_prior", known.mse, known.stderr_val);
    const KnownPriorRisk risk = mse_known(alpha, beta, n);
    push_row(out, "mse", "known_prior_exact", risk.mse);
    push_row(out, "mse", "local_exact", risk.local_mse);
  }

  const double eps0 = doc.at("epsilon0").get<double>();
  if (eps0 > 0.0) {
    const BernEstimateReport priv = private_personalized_bernoulli(data, eps0, seed);
    push_row(out, "mse", "private", priv.empirical_mse, priv.empirical_mse_stderr);
  }
  return out;
}

SeedOutcome run_mixture_seed(const json& doc, std::uint64_t seed) {
  const std::int64_t m = doc.at("m").get<std::int64_t>();
  const std::int64_t n = doc.at("n").get<std::int64_t>();
  const std::int64_t d = doc.at("d").get<std::int64_t>();
  const std::int64_t k = doc.at("k").get<std::int64_t>();
  const std::int64_t T = doc.at("T").get<std::int64_t>();
  const double sigma_x_sq = doc.at("sigma_x_sq").get<double>();
  const DiscretePrior prior = discrete_prior_from(doc, k, d);
  const SyntheticDataset data = sample_mixture_population(prior, m, n, sigma_x_sq, seed);

  UploadChannel upload;
  const bool has_upload = doc.contains("upload");
  if (has_upload) {
    json holder;
    holder["mechanism"] = doc.at("upload");
    holder["mechanism"].erase("clip_radius");
    upload.mechanism = mechanism_from(holder);
    upload.clip_radius = doc.at("upload").at("clip_radius").get<double>();
  }

  const AltMinResult res =
      alt_min_estimation(data, k, T, sigma_x_sq, seed, has_upload ? &upload : nullptr);

  SeedOutcome out;
  push_row(out, "mse", "personalized", res.empirical_mse, res.empirical_mse_stderr);
  push_row(out, "mse", "local", res.local_mse);

  std::vector<double> oracle(static_cast<std::size_t>(m * d));
  for (std::int64_t i = 0; i < m; ++i) {
    const PosteriorWeights w =
        posterior_weights(data.clients[static_cast<std::size_t>(i)], prior, sigma_x_sq);
    const std::vector<double> mean = posterior_mean_mixture(w, prior);
    std::copy(mean.begin(), mean.end(), oracle.begin() + i * d);
  }
  const MseMetrics known = evaluate_mse(oracle, data.true_params, m, d);
  push_row(out, "mse", "known_prior", known.mse, known.stderr_val);

  const CenterMatching match =
      match_centers(res.rounds.back().centers, prior.centers, k, d);
  push_row(out, "center_matching_cost", "personalized", match.total_cost);

  std::vector<double> inertia;
  for (const ClusterModel& round : res.rounds) inertia.push_back(round.inertia);
  out.series.emplace_back("inertia", std::move(inertia));
  return out;
}

void push_learn_rows(SeedOutcome& out, const LearnResult& res, const char* estimator) {
  if (res.has_mse) {
    push_row(out, "mse", estimator, res.empirical_mse, res.empirical_mse_stderr);
    push_row(out, "mse", "local", res.local_mse);
  }
  std::vector<double> objective;
  for (const RoundRecord& rec : res.rounds) objective.push_back(rec.objective);
  out.series.emplace_back("objective", std::move(objective));
}

SeedOutcome run_linreg_seed(const json& doc, std::uint64_t seed) {
  const std::int64_t m = doc.at("m").get<std::int64_t>();
  const std::int64_t n = doc.at("n").get<std::int64_t>();
  const std::int64_t d = doc.at("d").get<std::int64_t>();
  const GaussianPrior prior = gaussian_prior_from(doc, d, true);
  const double feature_sd = doc.at("feature_sd").get<double>();
  const SyntheticDataset data = sample_regression_population(prior, m, n, feature_sd, seed);
  const LearnConfig config = learn_from(doc);
  const LearnInit init = init_from(doc);

  SeedOutcome out;
  const LearnResult res = linreg_gd_run(data, config, init);
  push_learn_rows(out, res, "personalized");

  std::vector<double> oracle(static_cast<std::size_t>(m * d));
  double trace_total = 0.0;
  for (std::int64_t i = 0; i < m; ++i) {
    const ClientDataset& client = data.clients[static_cast<std::size_t>(i)];
    const std::vector<double> fit =
        linreg_closed_form(client, prior.mu, prior.sigma_theta_sq, prior.sigma_x_sq);
    std::copy(fit.begin(), fit.end(), oracle.begin() + i * d);
    trace_total += linreg_mse_trace(client, prior.sigma_theta_sq, prior.sigma_x_sq);
  }
  const MseMetrics known = evaluate_mse(oracle, data.true_params, m, d);
  push_row(out, "mse", "known_prior", known.mse, known.stderr_val);
  push_row(out, "mse_expected", "known_prior", trace_total / static_cast<double>(m));

  if (doc.at("baselines").get<bool>()) {
    const FedAvgResult fa = fedavg_baseline(data, ModelFamily::linear_regression, config, init);
    if (fa.has_mse) push_row(out, "mse", "fedavg", fa.empirical_mse, fa.empirical_mse_stderr);
  }
  return out;
}

SyntheticDataset sample_logistic_population(const GaussianPrior& prior, std::int64_t m,
                                            std::int64_t n, double feature_sd,
                                            std::uint64_t seed) {
  const std::int64_t d = prior.d;
  SyntheticDataset data;
  data.m = m;
  data.n = n;
  data.d = d;
  data.prior_kind = PriorKind::gaussian;
  data.gaussian_prior = prior;
  data.true_params.resize(static_cast<std::size_t>(m * d));
  data.clients.resize(static_cast<std::size_t>(m));
  const double sd_theta = std::sqrt(prior.sigma_theta_sq);
  for (std::int64_t i = 0; i < m; ++i) {
    Rng pop = substream(seed, static_cast<std::uint64_t>(i), 0, StreamTag::population);
    double* theta = data.true_params.data() + i * d;
    for (std::int64_t c = 0; c < d; ++c) theta[c] = prior.mu[static_cast<std::size_t>(c)] + sd_theta * pop.gaussian();

    ClientDataset& client = data.clients[static_cast<std::size_t>(i)];
    client.client_id = i;
    client.n = n;
    client.d = d;
    client.x.resize(static_cast<std::size_t>(n * d));
    client.y.resize(static_cast<std::size_t>(n));
    Rng obs = substream(seed, static_cast<std::uint64_t>(i), 0, StreamTag::observation);
    for (std::int64_t j = 0; j < n; ++j) {
      double score = 0.0;
      for (std::int64_t c = 0; c < d; ++c) {
        const double v = feature_sd * obs.gaussian();
        client.x[c * n + j] = v;
        score += v * theta[c];
      }
      const double p = 1.0 / (1.0 + std::exp(-score));
      client.y[static_cast<std::size_t>(j)] = obs.bernoulli(p) ? 1.0 : 0.0;
    }
  }
  return data;
}

SeedOutcome run_logreg_seed(const json& doc, std::uint64_t seed) {
  const std::int64_t m = doc.at("m").get<std::int64_t>();
  const std::int64_t n = doc.at("n").get<std::int64_t>();
  const std::int64_t d = doc.at("d").get<std::int64_t>();
  const GaussianPrior prior = gaussian_prior_from(doc, d, false);
  const double feature_sd = doc.at("feature_sd").get<double>();
  const SyntheticDataset data = sample_logistic_population(prior, m, n, feature_sd, seed);
  const LearnConfig config = learn_from(doc);
  const LearnInit init = init_from(doc);

  SeedOutcome out;
  const LearnResult res = logreg_gd_run(data, config, init);
  const MseMetrics pers = evaluate_mse(res.state.theta, data.true_params, m, d);
  push_row(out, "mse", "personalized", pers.mse, pers.stderr_val);

  // no-sharing baseline: the same step schedule on each client's data loss
  // alone (passing theta as its own anchor zeroes the prior pull)
  std::vector<double> solo(static_cast<std::size_t>(m * d), 0.0);
  for (std::int64_t i = 0; i < m; ++i) {
    std::vector<double> theta(static_cast<std::size_t>(d), 0.0);
    double eta = config.eta;
    for (std::int64_t t = 0; t < config.rounds; ++t) {
      const ClientGradients g =
          logreg_client_gradients(data.clients[static_cast<std::size_t>(i)], theta, theta, 1.0);
      for (std::int64_t c = 0; c < d; ++c)
        theta[static_cast<std::size_t>(c)] -= eta * g.theta[static_cast<std::size_t>(c)];
      eta *= config.eta_decay;
    }
    std::copy(theta.begin(), theta.end(), solo.begin() + i * d);
  }
  const MseMetrics local = evaluate_mse(solo, data.true_params, m, d);
  push_row(out, "mse", "local", local.mse, local.stderr_val);

  std::vector<double> objective;
  for (const RoundRecord& rec : res.rounds) objective.push_back(rec.objective);
  out.series.emplace_back("objective", std::move(objective));

  if (doc.at("baselines").get<bool>()) {
    const FedAvgResult fa =
        fedavg_baseline(data, ModelFamily::logistic_regression, config, init);
    if (fa.has_mse) push_row(out, "mse", "fedavg", fa.empirical_mse, fa.empirical_mse_stderr);
  }
  return out;
}

SeedOutcome run_gmm_learn_seed(const json& doc, std::uint64_t seed) {
  const std::int64_t m = doc.at("m").get<std::int64_t>();
  const std::int64_t n = doc.at("n").get<std::int64_t>();
  const std::int64_t d = doc.at("d").get<std::int64_t>();
  const std::int64_t k = doc.at("k").get<std::int64_t>();
  const GaussianMixturePrior prior = gmm_prior_from(doc, k, d);
  const double feature_sd = doc.at("feature_sd").get<double>();
  const double sigma_x_sq = doc.at("sigma_x_sq").get<double>();
  const double noise_sd = std::sqrt(sigma_x_sq);

  SyntheticDataset data;
  data.m = m;
  data.n = n;
  data.d = d;
  data.prior_kind = PriorKind::gaussian_mixture;
  data.mixture_prior = prior;
  data.true_params.resize(static_cast<std::size_t>(m * d));
  data.true_labels.resize(static_cast<std::size_t>(m));
  data.clients.resize(static_cast<std::size_t>(m));
  for (std::int64_t i = 0; i < m; ++i) {
    Rng pick = substream(seed, static_cast<std::uint64_t>(i), 0, StreamTag::cluster_seed);
    const double u = pick.uniform();
    double acc = 0.0;
    int component = static_cast<int>(k) - 1;
    for (std::int64_t l = 0; l < k; ++l) {
      acc += prior.probs[static_cast<std::size_t>(l)];
      if (u < acc) {
        component = static_cast<int>(l);
        break;
      }
    }
    data.true_labels[static_cast<std::size_t>(i)] = component;
    Rng pop = substream(seed, static_cast<std::uint64_t>(i), 0, StreamTag::population);
    double* theta = data.true_params.data() + i * d;
    const double* center = prior.centers.data() + component * d;
    const double sd = prior.component_sds[static_cast<std::size_t>(component)];
    for (std::int64_t c = 0; c < d; ++c) theta[c] = center[c] + sd * pop.gaussian();

    ClientDataset& client = data.clients[static_cast<std::size_t>(i)];
    client.client_id = i;
    client.n = n;
    client.d = d;
    client.x.resize(static_cast<std::size_t>(n * d));
    client.y.resize(static_cast<std::size_t>(n));
    Rng obs = substream(seed, static_cast<std::uint64_t>(i), 0, StreamTag::observation);
    for (std::int64_t j = 0; j < n; ++j) {
      double score = 0.0;
      for (std::int64_t c = 0; c < d; ++c) {
        const double v = feature_sd * obs.gaussian();
        client.x[c * n + j] = v;
        score += v * theta[c];
      }
      client.y[static_cast<std::size_t>(j)] = score + noise_sd * obs.gaussian();
    }
  }

  const LearnConfig config = learn_from(doc);
  const LearnInit init = init_from(doc);
  const bool seed_truth = doc.at("seed_prior").get<std::string>() == "truth";
  const GmmLearnResult res =
      gmm_prior_learning(data, k, config, init, seed, seed_truth ? &prior : nullptr);

  SeedOutcome out;
  if (res.has_mse) {
    push_row(out, "mse", "personalized", res.empirical_mse, res.empirical_mse_stderr);
    push_row(out, "mse", "local", res.local_mse);
  }
  out.series.emplace_back("objective", res.objective_path);
  return out;
}

// ---- adaped task synthesis ---------------------------------------------------

struct AdapedTasks {
  std::vector<ClientDataset> train;
  std::vector<ClientDataset> test;
};

ClientDataset adaped_client(std::int64_t id, std::int64_t n, const std::vector<double>& teacher,
                            bool logistic_labels, std::uint64_t seed, StreamTag tag) {
  const std::int64_t d = static_cast<std::int64_t>(teacher.size());
  ClientDataset client;
  client.client_id = id;
  client.n = n;
  client.d = d;
  client.x.resize(static_cast<std::size_t>(n * d));
  client.y.resize(static_cast<std::size_t>(n));
  Rng rng = substream(seed, static_cast<std::uint64_t>(id), 0, tag);
  for (std::int64_t j = 0; j < n; ++j) {
    double score = 0.0;
    for (std::int64_t c = 0; c < d; ++c) {
      const double v = rng.gaussian();
      client.x[c * n + j] = v;
      score += teacher[static_cast<std::size_t>(c)] * v;
    }
    double label;
    if (logistic_labels) {
      const double p = 1.0 / (1.0 + std::exp(-score));
      label = rng.bernoulli(p) ? 1.0 : 0.0;
    } else {
      label = score > 0.0 ? 1.0 : 0.0;
    }
    client.y[static_cast<std::size_t>(j)] = label;
  }
  return client;
}

AdapedTasks make_adaped_tasks(const json& doc, std::uint64_t seed) {
  const std::int64_t m = doc.at("m").get<std::int64_t>();
  const std::int64_t n = doc.at("n").get<std::int64_t>();
  const std::int64_t n_test = doc.at("n_test").get<std::int64_t>();
  const std::int64_t d = doc.at("d").get<std::int64_t>();
  const std::int64_t clusters = doc.at("clusters").get<std::int64_t>();
  const double scale = doc.at("teacher_scale").get<double>();
  const bool logistic_labels = doc.at("labels").get<std::string>() == "logistic";

  std::vector<std::vector<double>> teachers(static_cast<std::size_t>(clusters));
  const double coord_sd = scale / std::sqrt(static_cast<double>(d));
  for (std::int64_t c = 0; c < clusters; ++c) {
    Rng rng = substream(seed, static_cast<std::uint64_t>(c), 0, StreamTag::population);
    std::vector<double>& w = teachers[static_cast<std::size_t>(c)];
    w.resize(static_cast<std::size_t>(d));
    for (double& v : w) v = coord_sd * rng.gaussian();
  }

  AdapedTasks tasks;
  for (std::int64_t i = 0; i < m; ++i) {
    const std::vector<double>& w = teachers[static_cast<std::size_t>(i % clusters)];
    tasks.train.push_back(adaped_client(i, n, w, logistic_labels, seed, StreamTag::observation));
    tasks.test.push_back(adaped_client(i, n_test, w, logistic_labels, seed, StreamTag::generic));
  }
  return tasks;
}

AdaPedConfig adaped_config_from(const json& doc) {
  AdaPedConfig out;
  const json& model = doc.at("model");
  out.model.arch = model.at("arch").get<std::string>() == "one_hidden"
                       ? ClassifierArch::one_hidden
                       : ClassifierArch::linear_softmax;
  out.model.d_in = doc.at("d").get<std::int64_t>();
  out.model.hidden = model.at("hidden").get<std::int64_t>();
  out.model.classes = model.at("classes").get<std::int64_t>();

  const json& train = doc.at("train");
  out.rounds = train.at("rounds").get<std::int64_t>();
  out.tau = train.at("tau").get<std::int64_t>();
  out.clients_per_round = train.at("clients_per_round").get<std::int64_t>();
  out.eta1 = train.at("eta1").get<double>();
  out.eta2 = train.at("eta2").get<double>();
  out.eta3 = train.at("eta3").get<double>();
  out.psi0 = train.at("psi0").get<double>();
  out.psi_floor = train.at("psi_floor").get<double>();
  out.batch_size = train.at("batch_size").get<std::int64_t>();
  out.kd_weight = train.at("kd_weight").get<double>();
  out.reverse_kd = train.at("reverse_kd").get<bool>();
  out.finetune_cap = train.at("finetune_cap").get<std::int64_t>();
  return out;
}

double logistic_global_accuracy(const std::vector<double>& w,
                                const std::vector<ClientDataset>& test) {
  double total = 0.0;
  for (const ClientDataset& client : test) {
    std::int64_t hits = 0;
    for (std::int64_t j = 0; j < client.n; ++j) {
      double score = 0.0;
      for (std::int64_t c = 0; c < client.d; ++c)
        score += w[static_cast<std::size_t>(c)] * client.x[c * client.n + j];
      const double predicted = score > 0.0 ? 1.0 : 0.0;
      if (predicted == client.y[static_cast<std::size_t>(j)]) ++hits;
    }
    total += static_cast<double>(hits) / static_cast<double>(client.n);
  }
  return total / static_cast<double>(test.size());
}

void push_adaped_series(SeedOutcome& out, const AdaPedResult& run) {
  std::vector<double> psi, kd, ce;
  for (const AdaPedRound& rec : run.rounds) {
    psi.push_back(rec.psi);
    kd.push_back(rec.mean_kd);
    ce.push_back(rec.mean_ce);
  }
  out.series.emplace_back("psi", std::move(psi));
  out.series.emplace_back("mean_kd", std::move(kd));
  out.series.emplace_back("mean_ce", std::move(ce));
}

void run_adaped_baselines(SeedOutcome& out, const json& doc, const AdapedTasks& tasks,
                          const AdaPedConfig& cfg, std::uint64_t seed) {
  AdaPedConfig local = cfg;
  local.kd_weight = 0.0;
  local.clients_per_round = 0;
  local.tau = 1;
  const AdaPedResult local_run = adaped_run(tasks.train, local, seed, &tasks.test);
  push_row(out, "accuracy", "local", local_run.mean_accuracy);

  SyntheticDataset flat;
  flat.m = static_cast<std::int64_t>(tasks.train.size());
  flat.n = tasks.train.front().n;
  flat.d = tasks.train.front().d;
  flat.clients = tasks.train;
  LearnConfig lc;
  lc.eta = cfg.eta1;
  lc.rounds = cfg.rounds;
  lc.sync_every = cfg.tau;
  const FedAvgResult fa = fedavg_baseline(flat, ModelFamily::logistic_regression, lc, LearnInit{});
  push_row(out, "accuracy", "fedavg", logistic_global_accuracy(fa.global, tasks.test));
  (void)doc;
}

SeedOutcome run_adaped_seed(const json& doc, std::uint64_t seed) {
  const AdapedTasks tasks = make_adaped_tasks(doc, seed);
  const AdaPedConfig cfg = adaped_config_from(doc);
  const bool finetune = doc.at("train").at("finetune").get<bool>();

  const AdaPedResult run = finetune ? adaped_finetune_run(tasks.train, cfg, seed, &tasks.test)
                                    : adaped_run(tasks.train, cfg, seed, &tasks.test);
  SeedOutcome out;
  const char* name = finetune ? "adaped_finetune" : "adaped";
  push_row(out, "accuracy", name, run.mean_accuracy);
  push_row(out, "psi_final", name, run.psi);
  push_adaped_series(out, run);
  if (doc.at("baselines").get<bool>()) run_adaped_baselines(out, doc, tasks, cfg, seed);
  return out;
}

SeedOutcome run_dp_adaped_seed(const json& doc, std::uint64_t seed) {
  const AdapedTasks tasks = make_adaped_tasks(doc, seed);
  const AdaPedConfig cfg = adaped_config_from(doc);
  const bool finetune = doc.at("train").at("finetune").get<bool>();

  const json& dp_doc = doc.at("dp");
  DpAdaPedConfig dp;
  dp.clip.c1 = dp_doc.at("c1").get<double>();
  dp.clip.c2 = dp_doc.at("c2").get<double>();
  dp.clip.mode = dp_doc.at("mode").get<std::string>() == "joint" ? ClipSpec::Mode::joint
                                                                 : ClipSpec::Mode::separate;
  dp.sigma_q1 = dp_doc.at("sigma_q1").get<double>();
  dp.sigma_q2 = dp_doc.at("sigma_q2").get<double>();
  const double delta = dp_doc.at("delta").get<double>();

  const DpAdaPedResult res = dp_adaped_run(tasks.train, cfg, dp, seed, &tasks.test, finetune);

  SeedOutcome out;
  push_row(out, "accuracy", "dp_adaped", res.run.mean_accuracy);
  push_row(out, "psi_final", "dp_adaped", res.run.psi);
  push_row(out, "max_update_norm", "dp_adaped", res.max_update_norm);
  push_row(out, "max_scalar_step", "dp_adaped", res.max_scalar_step);
  push_adaped_series(out, res.run);

  out.privacy.present = true;
  out.privacy.unbounded = res.privacy.curve.unbounded;
  out.privacy.rdp_coef = res.privacy.curve.coef;
  out.privacy.delta = delta;
  if (!res.privacy.curve.unbounded) {
    const DpBudget budget = rdp_to_dp_fixed_delta(res.privacy.curve, delta);
    out.privacy.epsilon = budget.epsilon;
    out.privacy.alpha_star = rdp_to_dp_argmin_alpha(res.privacy.curve, delta);
    push_row(out, "epsilon", "dp_adaped", out.privacy.epsilon);
    push_row(out, "alpha_star", "dp_adaped", out.privacy.alpha_star);
  } else {
    push_row(out, "rdp_unbounded", "dp_adaped", 1.0);
  }
  if (doc.at("baselines").get<bool>()) run_adaped_baselines(out, doc, tasks, cfg, seed);
  return out;
}

SeedOutcome run_accountant_seed(const json& doc, std::uint64_t /*seed*/) {
  ClipSpec clip;
  clip.c1 = doc.at("c1").get<double>();
  clip.c2 = doc.at("c2").get<double>();
  clip.mode = doc.at("mode").get<std::string>() == "joint" ? ClipSpec::Mode::joint
                                                           : ClipSpec::Mode::separate;
  const AdapedRdpResult res = adaped_rdp(
      static_cast<int>(doc.at("K").get<std::int64_t>()),
      static_cast<int>(doc.at("m").get<std::int64_t>()),
      static_cast<int>(doc.at("T").get<std::int64_t>()),
      static_cast<int>(doc.at("tau").get<std::int64_t>()), clip,
      doc.at("sigma_q1").get<double>(), doc.at("sigma_q2").get<double>());
  const double delta = doc.at("delta").get<double>();

  SeedOutcome out;
  out.privacy.present = true;
  out.privacy.unbounded = res.curve.unbounded;
  out.privacy.rdp_coef = res.curve.coef;
  out.privacy.delta = delta;
  push_row(out, "rdp_coef", "accountant", res.curve.coef);
  push_row(out, "ragged_rounds", "accountant", res.ragged_rounds ? 1.0 : 0.0);
  push_row(out, "unbounded", "accountant", res.curve.unbounded ? 1.0 : 0.0);
  if (!res.curve.unbounded) {
    const DpBudget budget = rdp_to_dp_fixed_delta(res.curve, delta);
    out.privacy.epsilon = budget.epsilon;
    out.privacy.alpha_star = rdp_to_dp_argmin_alpha(res.curve, delta);
    push_row(out, "epsilon", "accountant", budget.epsilon);
    push_row(out, "delta", "accountant", delta);
    push_row(out, "alpha_star", "accountant", out.privacy.alpha_star);
  }
  return out;
}

SeedOutcome run_panel_cv_seed(const json& doc, std::uint64_t /*seed*/) {
  const BinaryPanel panel = load_binary_panel(doc.at("path").get<std::string>());
  const PanelCvResult cv = panel_cv(panel);

  SeedOutcome out;
  push_row(out, "mse", "local", cv.local_mse);
  push_row(out, "mse", "personalized", cv.personalized_mse);
  push_row(out, "units", "panel", static_cast<double>(cv.units));
  push_row(out, "rounds", "panel", static_cast<double>(cv.rounds));
  out.series.emplace_back("fold_local", cv.fold_local);
  out.series.emplace_back("fold_personalized", cv.fold_personalized);
  return out;
}

using SeedRunner = SeedOutcome (*)(const json&, std::uint64_t);

SeedRunner runner_for(const std::string& kind) {
  if (kind == "gauss") return run_gauss_seed;
  if (kind == "bern") return run_bern_seed;
  if (kind == "mixture") return run_mixture_seed;
  if (kind == "linreg") return run_linreg_seed;
  if (kind == "logreg") return run_logreg_seed;
  if (kind == "gmm-learn") return run_gmm_learn_seed;
  if (kind == "adaped") return run_adaped_seed;
  if (kind == "dp-adaped") return run_dp_adaped_seed;
  if (kind == "accountant") return run_accountant_seed;
  if (kind == "panel-cv") return run_panel_cv_seed;
  throw config_error("config: unknown experiment kind \"" + kind + "\"");
}

// ---- aggregation --------------------------------------------------------------

void run_jobs(std::int64_t count, const std::function<void(std::int64_t)>& job) {
  const int workers = harness_thread_cap(count);
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
  if (workers <= 1) {
    for (std::int64_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::int64_t> next{0};
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      while (true) {
        const std::int64_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          job(i);
        } catch (...) {
          errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  for (const std::exception_ptr& err : errors)
    if (err) std::rethrow_exception(err);
}

void aggregate_outcomes(const std::vector<SeedOutcome>& outcomes, ExperimentReport& report) {
  const std::size_t runs = outcomes.size();
  const SeedOutcome& first = outcomes.front();
  for (const SeedOutcome& other : outcomes) {
    if (other.rows.size() != first.rows.size() || other.series.size() != first.series.size())
      throw error("harness: seed outcomes disagree in shape");
  }

  for (std::size_t r = 0; r < first.rows.size(); ++r) {
    MetricRow row = first.rows[r];
    if (runs > 1) {
      double mean = 0.0;
      for (const SeedOutcome& o : outcomes) mean += o.rows[r].value;
      mean /= static_cast<double>(runs);
      double var = 0.0;
      for (const SeedOutcome& o : outcomes) {
        const double dv = o.rows[r].value - mean;
        var += dv * dv;
      }
      row.value = mean;
      row.stderr_val = std::sqrt(var / static_cast<double>(runs - 1));
    }
    report.metrics.push_back(row);
  }

  for (std::size_t s = 0; s < first.series.size(); ++s) {
    std::vector<double> mean = first.series[s].second;
    for (std::size_t o = 1; o < runs; ++o) {
      const std::vector<double>& other = outcomes[o].series[s].second;
      if (other.size() != mean.size()) throw error("harness: trajectory lengths disagree");
      for (std::size_t t = 0; t < mean.size(); ++t) mean[t] += other[t];
    }
    if (runs > 1)
      for (double& v : mean) v /= static_cast<double>(runs);
    report.trajectories.emplace_back(first.series[s].first, std::move(mean));
  }

  report.privacy = first.privacy;

  for (const char* base : {"local", "global"}) {
    const MetricRow* baseline = report.find("mse", base);
    if (!baseline || !(baseline->value > 0.0)) continue;
    std::vector<MetricRow> gains;
    for (const MetricRow& row : report.metrics) {
      if (row.metric != "mse" || row.estimator == base) continue;
      MetricRow gain;
      gain.metric = std::string("gain_pct_vs_") + base;
      gain.estimator = row.estimator;
      gain.value = 100.0 * (1.0 - row.value / baseline->value);
      gains.push_back(gain);
    }
    for (MetricRow& g : gains) report.metrics.push_back(std::move(g));
  }
}

}  // namespace

int harness_thread_cap(std::int64_t jobs) {
  if (jobs < 1) return 1;
  long cap;
  if (const char* env = std::getenv("FEDBAYES_THREADS")) {
    char* end = nullptr;
    errno = 0;
    cap = std::strtol(env, &end, 10);
    if (errno != 0 || end == env || *end != '\0' || cap < 1)
      throw config_error("FEDBAYES_THREADS must be a positive integer");
  } else {
    const unsigned hw = std::thread::hardware_concurrency();
    cap = hw > 0 ? static_cast<long>(hw) : 1;
  }
  return static_cast<int>(std::min<long>(cap, jobs));
}

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw parse_error(std::string("config: invalid JSON: ") + e.what());
  }
  need_object(doc, "config");

  ExperimentConfig out;
  out.out = string_or(doc, "config", "out", "");
  out.format = string_or(doc, "config", "format", "json");
  if (out.format != "json" && out.format != "csv")
    bad_field("config", "format must be \"json\" or \"csv\"");

  const json effective = normalize_config(doc);
  out.kind = effective.at("kind").get<std::string>();
  out.seeds = effective.at("seeds").get<std::vector<std::uint64_t>>();
  out.canonical = effective.dump();
  return out;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw input_error("config: cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_experiment_config(buffer.str());
}

std::vector<std::string> preset_names() {
  return {"paper-linreg", "paper-bern-3spike", "paper-dp-gauss"};
}

std::string preset_config(const std::string& name) {
  if (name == "paper-linreg")
    return R"({
  "kind": "linreg",
  "m": 2000, "n": 10, "d": 50,
  "prior": {"mu": [-0.123637, 0.00831, -0.063725, -0.059456, -0.130464,
                   0.083459, -0.017589, 0.017543, 0.133191, 0.116971,
                   -0.076446, -0.024335, 0.00766, -0.01871, 0.196531,
                   -0.07808, -0.018919, 0.102514, 0.003677, 0.010438,
                   0.029687, -0.080052, -0.081049, -0.020757, -0.148314,
                   -0.189873, 0.071042, 0.071905, -0.083878, -0.072957,
                   -0.114217, 0.124799, -0.180802, 0.05914, -0.03971,
                   -0.016838, 0.002429, 0.016389, 0.089349, -0.127702,
                   -0.173708, -0.057102, -0.036642, -0.167502, -0.035322,
                   -0.084236, -0.136972, 0.135959, 0.054097, 0.087885],
            "sigma_theta_sq": 0.01, "sigma_x_sq": 0.05},
  "feature_sd": 0.22360679774997896,
  "learn": {"eta": 0.003, "rounds": 800, "eta_decay": 0.9985, "variance_floor": 0.005},
  "init": {"sigma_theta_sq0": 0.02, "sigma_x_sq0": 0.1},
  "baselines": false,
  "seeds": [1]
})";
  if (name == "paper-bern-3spike")
    return R"({
  "kind": "bern",
  "m": 10000, "n": 14,
  "prior": {"kind": "three_spike"},
  "epsilon0": 0.0,
  "seeds": [1, 2, 3]
})";
  if (name == "paper-dp-gauss")
    return R"({
  "kind": "gauss",
  "m": 10000, "n": 15, "d": 1,
  "prior": {"mu": 0.0, "sigma_theta_sq": 0.01, "sigma_x_sq": 0.25},
  "mechanism": {"kind": "gaussian_ldp", "epsilon0": 100.0, "delta": 1e-5,
                "range_half_width": "auto"},
  "epsilon0_grid": [0.5, 1.0, 2.0, 4.0, 8.0, 100.0],
  "seeds": [1, 2, 3]
})";
  throw config_error("presets: unknown preset \"" + name + "\"");
}

ExperimentReport run_experiment(const ExperimentConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  const json doc = json::parse(config.canonical);
  const SeedRunner runner = runner_for(config.kind);

  std::vector<SeedOutcome> outcomes(config.seeds.size());
  run_jobs(static_cast<std::int64_t>(config.seeds.size()), [&](std::int64_t i) {
    outcomes[static_cast<std::size_t>(i)] =
        runner(doc, config.seeds[static_cast<std::size_t>(i)]);
  });

  ExperimentReport report;
  report.kind = config.kind;
  report.config_hash = config_hash_hex(config.canonical);
  report.seeds = config.seeds;
  report.config_echo = config.canonical;
  aggregate_outcomes(outcomes, report);
  report.wall_clock_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace fedbayes
