#pragma once

#include <cstdint>
#include <vector>

#include "fedbayes/data.hpp"
#include "fedbayes/priors.hpp"

namespace fedbayes {

// Gradient-descent settings shared by the learning runs. One round performs
// one full-batch step per client (sync_every of them between aggregations for
// the mixture and baseline loops); the step size is multiplied by eta_decay
// after every round.
struct LearnConfig {
  double eta = 0.01;
  std::int64_t rounds = 200;
  double eta_decay = 0.99;
  double weight_decay = 0.0;
  std::int64_t sync_every = 1;
  double variance_floor = 1e-8;
  double divergence_limit = 1e8;
  bool update_theta = true;
  bool update_mu = true;
  bool update_sigma_theta = true;
  bool update_sigma_x = true;
};

// Starting point for a run. theta0 may be empty (zeros), length d (broadcast
// to every client), or length m*d; mu0 may be empty (zeros) or length d.
struct LearnInit {
  std::vector<double> theta0;
  std::vector<double> mu0;
  double sigma_theta_sq0 = 1.0;
  double sigma_x_sq0 = 1.0;
};

// Round-synchronized state of a personalized gradient run: per-client
// parameters, per-client local copies of the population parameters, and the
// server aggregates they synchronize through.
struct LearnState {
  std::int64_t m = 0;
  std::int64_t d = 0;
  std::int64_t round = 0;
  std::vector<double> theta;                 // m*d, client i at [i*d, (i+1)*d)
  std::vector<double> mu_local;              // m*d
  std::vector<double> sigma_theta_sq_local;  // length m
  std::vector<double> sigma_x_sq_local;      // length m
  std::vector<double> mu;                    // length d, server copy
  double sigma_theta_sq = 1.0;
  double sigma_x_sq = 1.0;
};

// Server-side summary recorded after each round.
struct RoundRecord {
  std::int64_t round = 0;
  double objective = 0.0;  // negative log posterior summed over clients
  std::vector<double> mu;
  double sigma_theta_sq = 0.0;
  double sigma_x_sq = 0.0;
};

// Output of a personalized gradient run. The error fields compare against the
// generating parameters and are filled only when the dataset carries them;
// local_mse uses the per-client least-squares fit as the no-sharing baseline.
struct LearnResult {
  LearnState state;
  std::vector<RoundRecord> rounds;
  bool has_mse = false;
  double empirical_mse = 0.0;
  double empirical_mse_stderr = 0.0;
  double local_mse = 0.0;
  double gain_pct = 0.0;
};

// Value and gradient of a prior penalty at one parameter vector.
struct RegularizerValue {
  double value = 0.0;
  std::vector<double> gradient;
};

// Gradient blocks of one client's objective at a fixed point. For the
// logistic model the observation-variance entry stays 0.
struct ClientGradients {
  std::vector<double> theta;
  std::vector<double> mu;
  double sigma_theta_sq = 0.0;
  double sigma_x_sq = 0.0;
};

// Output of the mixture-prior learning loop.
struct GmmLearnResult {
  std::int64_t m = 0;
  std::int64_t d = 0;
  std::int64_t k = 0;
  std::vector<double> theta;  // m*d
  GaussianMixturePrior mixture;
  std::vector<double> objective_path;  // mean client loss plus penalty, per round
  bool has_mse = false;
  double empirical_mse = 0.0;
  double empirical_mse_stderr = 0.0;
  double local_mse = 0.0;
  double gain_pct = 0.0;
};

// Output of alternating minimization under a discrete prior.
struct DiscreteRegressionResult {
  std::int64_t m = 0;
  std::int64_t d = 0;
  std::int64_t k = 0;
  std::vector<double> theta;    // m*d
  DiscretePrior prior;          // final candidate set and weights
  std::vector<double> weights;  // m*k responsibilities under the final prior
  bool has_mse = false;
  double empirical_mse = 0.0;
  double empirical_mse_stderr = 0.0;
  double local_mse = 0.0;
  double gain_pct = 0.0;
};

enum class ModelFamily { linear_regression, logistic_regression };

// Output of the averaged single-model baseline.
struct FedAvgResult {
  std::int64_t m = 0;
  std::int64_t d = 0;
  std::vector<double> global;          // length d
  std::vector<double> client_loss;     // final per-client data loss
  std::vector<double> objective_path;  // mean client data loss, per round
  bool has_mse = false;
  double empirical_mse = 0.0;
  double empirical_mse_stderr = 0.0;
};

// Posterior mode of one client's regression weights given the population
// parameters, via a symmetric positive definite solve:
//   (I/sigma_theta_sq + X^T X/sigma_x_sq)^{-1} (X^T Y/sigma_x_sq + mu/sigma_theta_sq).
std::vector<double> linreg_closed_form(const ClientDataset& data, const std::vector<double>& mu,
                                       double sigma_theta_sq, double sigma_x_sq);

// Expected squared error of that posterior mode for a fixed design: the trace
// of (I/sigma_theta_sq + X^T X/sigma_x_sq)^{-1}. Only the features are read.
double linreg_mse_trace(const ClientDataset& data, double sigma_theta_sq, double sigma_x_sq);

// Local least squares through the pseudo-inverse; rank-deficient designs get
// the minimum-norm solution.
std::vector<double> ols_local(const ClientDataset& data);

// One client's negative log posterior at (theta, mu, variances) and its
// gradient blocks. These back linreg_gd_run and are exposed so gradient
// checks exercise the production formulas.
double linreg_client_objective(const ClientDataset& data, const std::vector<double>& theta,
                               const std::vector<double>& mu, double sigma_theta_sq,
                               double sigma_x_sq);
ClientGradients linreg_client_gradients(const ClientDataset& data, const std::vector<double>& theta,
                                        const std::vector<double>& mu, double sigma_theta_sq,
                                        double sigma_x_sq);

// Cross-entropy analogue for binary labels in {0,1}; no observation variance.
double logreg_client_objective(const ClientDataset& data, const std::vector<double>& theta,
                               const std::vector<double>& mu, double sigma_theta_sq);
ClientGradients logreg_client_gradients(const ClientDataset& data, const std::vector<double>& theta,
                                        const std::vector<double>& mu, double sigma_theta_sq);

// Alternating gradient descent for personalized linear regression. Every
// round each client steps theta and its local copies of mu and both variances
// from the last synchronized values; every sync_every rounds the server
// averages the local copies in client order and broadcasts the result.
// Clients with n = 0 participate through the prior terms alone.
LearnResult linreg_gd_run(const SyntheticDataset& data, const LearnConfig& config,
                          const LearnInit& init);

// The same loop for logistic regression; labels live in y as 0/1 and the
// observation variance is not part of the model.
LearnResult logreg_gd_run(const SyntheticDataset& data, const LearnConfig& config,
                          const LearnInit& init);

// Mixture prior penalty -log sum_l p_l N(theta; mu_l, sd_l^2 I) evaluated by
// log-sum-exp; the gradient weights each component pull by its responsibility.
RegularizerValue gmm_prior_regularizer(const std::vector<double>& theta,
                                       const GaussianMixturePrior& prior);

// Personalized regression under a mixture prior: clients take sync_every
// steps on squared loss plus the mixture penalty, then the server re-fits the
// mixture by clustering the stepped parameters (component sd = within-cluster
// root mean square deviation, floored). prior0 seeds the mixture when given;
// otherwise one is bootstrapped by clustering the initial parameters.
GmmLearnResult gmm_prior_learning(const SyntheticDataset& data, std::int64_t k,
                                  const LearnConfig& config, const LearnInit& init,
                                  std::uint64_t seed,
                                  const GaussianMixturePrior* prior0 = nullptr);

// Alternating minimization for regression under a discrete prior: each round
// clients rebuild theta as the likelihood-weighted combination of the
// candidate centers (log-sum-exp weights), then the server re-clusters the
// combinations. theta starts at the local least-squares fit and the initial
// candidates come from clustering those fits.
DiscreteRegressionResult discrete_prior_regression(const SyntheticDataset& data, std::int64_t k,
                                                   std::int64_t rounds, double sigma_x_sq,
                                                   std::uint64_t seed);

// Single shared model trained by local steps plus server averaging on the
// same model family; the personalization-free baseline.
FedAvgResult fedavg_baseline(const SyntheticDataset& data, ModelFamily family,
                             const LearnConfig& config, const LearnInit& init);

}  // namespace fedbayes
