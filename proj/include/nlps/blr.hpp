#pragma once

// Conjugate Bayesian linear regression with a Gaussian prior N(w0, tau^2 I)
// and Gaussian likelihood N(r | Phi w, sigma^2 I).

#include "nlps/random.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>

namespace nlps::blr {

struct PriorSpec {
  std::size_t dim = 0;
  double prior_variance = 1.0;  // tau^2
  double noise_variance = 1.0;  // sigma^2
  Eigen::VectorXd mean;         // w0; empty means zero

  void validate() const;
  Eigen::VectorXd prior_mean() const;
};

class GaussianPosterior {
 public:
  GaussianPosterior() = default;

  // Builds a posterior from explicit moments. A covariance that is exactly
  // zero gives a point mass (factor = 0); anything else must be positive
  // definite.
  static GaussianPosterior from_moments(Eigen::VectorXd mean, Eigen::MatrixXd covariance);

  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::MatrixXd& covariance() const { return covariance_; }
  // factor * factor^T == covariance
  const Eigen::MatrixXd& factor() const { return factor_; }
  std::size_t dim() const { return static_cast<std::size_t>(mean_.size()); }

 private:
  friend GaussianPosterior posterior_fit(const PriorSpec&,
                                         const Eigen::Ref<const Eigen::MatrixXd>&,
                                         const Eigen::Ref<const Eigen::VectorXd>&);
  Eigen::VectorXd mean_;
  Eigen::MatrixXd covariance_;
  Eigen::MatrixXd factor_;
};

// `design` has one row per observation. Zero rows returns the prior exactly.
// Throws std::invalid_argument on non-finite input or shape mismatch and
// std::runtime_error if the precision matrix is not positive definite.
GaussianPosterior posterior_fit(const PriorSpec& prior,
                                const Eigen::Ref<const Eigen::MatrixXd>& design,
                                const Eigen::Ref<const Eigen::VectorXd>& rewards);

Eigen::VectorXd posterior_sample(const GaussianPosterior& post, Rng& rng);
Eigen::VectorXd posterior_sample(const GaussianPosterior& post, std::uint64_t seed);

double predict(const Eigen::VectorXd& w, const Eigen::VectorXd& feature);

}  // namespace nlps::blr
