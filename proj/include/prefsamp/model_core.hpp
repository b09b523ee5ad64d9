#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace prefsamp {

using Index = Eigen::Index;
using CountMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;
using CountVector = Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>;

/// Daily design matrix x(t). Row i is the covariate vector of study day i
/// (0-based); column 0 is the constant intercept.
struct CovariateSeries {
  Eigen::MatrixXd values;          // N x p
  std::vector<int> day_index;      // calendar-day identifiers, strictly increasing
  std::vector<std::string> names;  // column names, names[0] == "intercept"
  std::vector<std::string> dates;  // optional ISO dates (empty or length N)
  std::vector<bool> warmup;        // true where a smoothing window was truncated

  Index n_days() const { return values.rows(); }
  Index n_covariates() const { return values.cols(); }

  /// Throws ValidationError if the intercept column, finiteness, length or
  /// day ordering invariants fail.
  void validate() const;

  /// Position of a calendar day in the series, if present.
  std::optional<Index> position_of(int day) const;
};

/// log lambda_j(t_i) for every species j and every study day i.
struct LatentState {
  Eigen::MatrixXd log_lambda;  // J x N

  Index n_species() const { return log_lambda.rows(); }
  Index n_days() const { return log_lambda.cols(); }
  double total_abundance(Index day) const { return log_lambda.col(day).array().exp().sum(); }
};

/// All unknowns of the hierarchical model.
struct ModelParams {
  Eigen::VectorXd alpha;        // J, diagonal of A
  Eigen::MatrixXd beta;         // J x p, rows beta_j
  double sigma2 = 1.0;          // process variance
  Eigen::Vector2d theta{0.0, 0.0};
  double lambda_tilde = 1.0;    // probit abundance threshold
  Eigen::VectorXd mu_beta;      // p
  Eigen::MatrixXd sigma_beta;   // p x p
  Eigen::VectorXd z;            // N augmentation variables (may be empty)

  Index n_species() const { return alpha.size(); }
  Index n_covariates() const { return beta.cols(); }

  /// Checks positivity, |alpha_j| < 1 (when `require_stationary`), SPD
  /// sigma_beta and shape agreement.
  void validate(bool require_stationary = true) const;
};

struct Hyperpriors {
  Eigen::VectorXd mu1;          // J, prior mean of log lambda(t_1)
  double sigma2_1 = 100.0;
  Eigen::VectorXd mu0;          // p
  Eigen::MatrixXd Sigma0;       // p x p
  Eigen::MatrixXd Psi;          // p x p inverse-Wishart scale
  double nu = 0.0;              // inverse-Wishart degrees of freedom
  Eigen::VectorXd mu_alpha;     // J
  double sigma2_alpha = 1.0;
  Eigen::Vector2d mu_theta{0.0, 0.0};
  Eigen::Matrix2d Sigma_theta = 4.0 * Eigen::Matrix2d::Identity();
  double q = 2.0;               // inverse-gamma shape on sigma2
  double r = 0.1;               // inverse-gamma rate on sigma2
  double alpha_lambda = 2.0;    // gamma shape on lambda_tilde
  double beta_lambda = 1.0;     // gamma rate on lambda_tilde

  /// Weakly informative defaults. beta_lambda puts the prior mean of the
  /// threshold at 10% of `max_count` (1.0 when there are no counts).
  static Hyperpriors defaults(Index n_species, Index n_covariates, double max_count);

  void validate(Index n_species, Index n_covariates) const;
};

/// Which days were observed, and what was counted on them.
struct ObservationSet {
  std::vector<std::uint8_t> tau;       // N indicators
  std::vector<Index> observed_days;    // n positions (0-based study days), increasing
  CountMatrix counts;                  // J x n
  Eigen::VectorXd effort;              // n
  std::optional<Eigen::VectorXd> trap_fraction;
  std::optional<Eigen::VectorXd> duration_days;

  Index n_days() const { return static_cast<Index>(tau.size()); }
  Index n_observed() const { return static_cast<Index>(observed_days.size()); }
  Index n_species() const { return counts.rows(); }

  void validate() const;

  /// For each study day, the column of `counts` holding it, or -1.
  std::vector<Index> column_of_day() const;

  /// Every day observed with unit effort.
  static ObservationSet fully_observed(const CountMatrix& full_counts);
};

/// Conditional mean of log lambda(t_i) given log lambda(t_{i-1}), for day >= 1:
/// B x(t_i) - A B x(t_{i-1}) + A prev.
Eigen::VectorXd process_mean(const ModelParams& params, const CovariateSeries& covariates,
                             const Eigen::VectorXd& prev_log_lambda, Index day);

/// Joint log density of the latent path under the initial-state prior and
/// the trend-anchored autoregression.
double process_logdensity(const LatentState& state, const ModelParams& params,
                          const CovariateSeries& covariates, const Hyperpriors& hyper);

/// Sum over species of log Pois(y_j; lambda_j * effort).
double observation_logdensity(const CountVector& counts, const Eigen::VectorXd& lambda, double effort);

/// Phi(theta0 + theta1 * 1{total >= lambda_tilde}).
double inclusion_probability(const Eigen::Vector2d& theta, double total_abundance, double lambda_tilde);

/// Trend matrix B X' (J x N).
Eigen::MatrixXd trend(const Eigen::MatrixXd& beta, const CovariateSeries& covariates);

}  // namespace prefsamp
