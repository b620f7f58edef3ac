#pragma once

#include <cstdint>
#include <vector>

#include "fedbayes/accountant.hpp"
#include "fedbayes/data.hpp"

namespace fedbayes {

// Desk-scale differentiable classifiers used by the distillation trainer.
// Parameters live in one flat vector so the trainer can treat every
// architecture as a point in R^D.
//
// linear_softmax: logits = W x + b, layout [W row-major | b].
// one_hidden:     logits = W2 tanh(W1 x + b1) + b2,
//                 layout [W1 row-major | b1 | W2 row-major | b2].
enum class ClassifierArch { linear_softmax, one_hidden };

struct Classifier {
  ClassifierArch arch = ClassifierArch::linear_softmax;
  std::int64_t d_in = 1;
  std::int64_t hidden = 0;
  std::int64_t classes = 2;

  std::int64_t dim() const;
  void validate() const;
};

// Class probabilities for one feature vector; probs has length classes.
void classifier_forward(const Classifier& model, const std::vector<double>& params,
                        const double* x, double* probs);

// Mean cross-entropy over the batch; fills the analytic parameter gradient
// when grad is non-null (length dim()).
double ce_loss(const Classifier& model, const std::vector<double>& params,
               const ClientDataset& batch, double* grad);

struct KdValue {
  double value = 0.0;
  std::vector<double> grad_theta;
  std::vector<double> grad_mu;
};

// Mean KL divergence between the two networks' predictive distributions over
// the batch, with analytic gradients for both parameter vectors. The default
// direction is KL(mu-model || theta-model); reverse swaps the arguments.
KdValue kd_loss(const Classifier& model, const std::vector<double>& theta,
                const std::vector<double>& mu, const ClientDataset& batch, bool reverse = false);

// Per-client training objective: data loss plus the adaptive distillation
// penalty f_i + 0.5*log(2*psi) + f_kd/(2*psi).
double local_objective(const Classifier& model, const std::vector<double>& theta,
                       const std::vector<double>& mu, double psi, const ClientDataset& batch,
                       bool reverse = false);

// d/dpsi of 0.5*log(2*psi) + f_kd/(2*psi); callers guarantee psi > 0.
double psi_gradient(double psi, double f_kd);

struct AdaPedConfig {
  Classifier model;
  std::int64_t rounds = 100;
  std::int64_t tau = 1;
  // sampled clients per synchronization; 0 means every client
  std::int64_t clients_per_round = 0;
  double eta1 = 0.1;
  double eta2 = 0.1;
  double eta3 = 0.03;
  double psi0 = 4.0;
  double psi_floor = 0.5;
  // examples per gradient step; 0 means the full local dataset
  std::int64_t batch_size = 0;
  // scales the distillation pull on theta; 0 decouples theta from the
  // global model entirely
  double kd_weight = 1.0;
  bool reverse_kd = false;
  double divergence_limit = 1e8;
  // fine-tuning runs only: successive unsynchronized local steps allowed per
  // client; negative means unlimited, 0 disables fine-tuning
  std::int64_t finetune_cap = -1;
  // empty -> zeros, dim() -> broadcast, m*dim() -> per client
  std::vector<double> theta0;
  // empty -> zeros, else dim()
  std::vector<double> mu0;

  void validate() const;
};

struct AdaPedRound {
  std::int64_t round = 0;
  // server estimate after any aggregation this iteration
  double psi = 0.0;
  // means over the sampled set, post-update
  double mean_psi_local = 0.0;
  double mean_kd = 0.0;
  double mean_ce = 0.0;
};

struct AdaPedResult {
  std::int64_t m = 0;
  std::int64_t dim = 0;
  std::vector<double> theta;
  std::vector<double> mu;
  double psi = 0.0;
  std::vector<AdaPedRound> rounds;
  bool has_accuracy = false;
  std::vector<double> accuracy;
  double mean_accuracy = 0.0;
};

struct DpAdaPedConfig {
  ClipSpec clip;
  double sigma_q1 = 0.0;
  double sigma_q2 = 0.0;

  void validate() const;
};

struct DpAdaPedResult {
  AdaPedResult run;
  AdapedRdpResult privacy;
  // largest post-clip update magnitudes seen during the run; never exceed
  // the configured radii
  double max_update_norm = 0.0;
  double max_scalar_step = 0.0;
};

// Alternating distillation trainer: sampled clients step the personalized
// model, their copy of the global model, and their copy of the collaboration
// weight psi each iteration; the server averages the copies at
// synchronization boundaries.
AdaPedResult adaped_run(const std::vector<ClientDataset>& train, const AdaPedConfig& config,
                        std::uint64_t seed, const std::vector<ClientDataset>* test = nullptr);

// Same trainer, but clients outside the sampled set keep stepping their
// personalized models against the last globals they received.
AdaPedResult adaped_finetune_run(const std::vector<ClientDataset>& train,
                                 const AdaPedConfig& config, std::uint64_t seed,
                                 const std::vector<ClientDataset>* test = nullptr);

// Private variant: the communicated updates are norm-clipped and carry
// Gaussian noise; returns the trajectory together with the accumulated
// Renyi privacy curve for the run's parameters. Joint clip mode treats the
// model update and the psi step as one concatenated vector governed by
// (c1, sigma_q1). A zero noise scale skips the corresponding draws.
DpAdaPedResult dp_adaped_run(const std::vector<ClientDataset>& train, const AdaPedConfig& config,
                             const DpAdaPedConfig& dp, std::uint64_t seed,
                             const std::vector<ClientDataset>* test = nullptr,
                             bool finetune = false);

// Closed-form density over binary predictive tables q(x) = P(y=1|x) induced
// by penalizing KL divergence from a reference table: proportional to
// exp(-psi * KL(reference || q)) with the normalizer expressed through Beta
// functions. class_probs is a flat |X| x classes row-major table; only
// two-class tables are supported.
struct KdPopulationDensity {
  std::vector<double> p_one;
  std::vector<double> p_x;
  double psi = 0.0;
  double log_norm = 0.0;

  // q holds P(y=1|x) per input; boundary values where the density vanishes
  // yield -infinity
  double log_density(const std::vector<double>& q) const;
  double density(const std::vector<double>& q) const;
};

KdPopulationDensity kd_population_density(const std::vector<double>& class_probs,
                                          std::int64_t classes, double psi,
                                          const std::vector<double>& p_x);

}  // namespace fedbayes
