#include "nlps/blr.hpp"

#include <cmath>
#include <stdexcept>

namespace nlps::blr {

using Eigen::MatrixXd;
using Eigen::VectorXd;

void PriorSpec::validate() const {
  if (dim == 0) throw std::invalid_argument("prior dimension must be positive");
  if (!(prior_variance > 0.0) || !std::isfinite(prior_variance))
    throw std::invalid_argument("prior variance must be positive");
  if (!(noise_variance > 0.0) || !std::isfinite(noise_variance))
    throw std::invalid_argument("noise variance must be positive");
  if (mean.size() != 0 && mean.size() != static_cast<Eigen::Index>(dim))
    throw std::invalid_argument("prior mean dimension mismatch");
}

VectorXd PriorSpec::prior_mean() const {
  return mean.size() == 0 ? VectorXd::Zero(static_cast<Eigen::Index>(dim)) : mean;
}

GaussianPosterior GaussianPosterior::from_moments(VectorXd mean, MatrixXd covariance) {
  if (covariance.rows() != mean.size() || covariance.cols() != mean.size())
    throw std::invalid_argument("covariance shape does not match mean");
  GaussianPosterior p;
  p.mean_ = std::move(mean);
  if (covariance.isZero(0.0)) {
    p.factor_ = MatrixXd::Zero(covariance.rows(), covariance.cols());
  } else {
    Eigen::LLT<MatrixXd> llt(covariance);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("covariance is not positive definite");
    p.factor_ = llt.matrixL();
  }
  p.covariance_ = std::move(covariance);
  return p;
}

GaussianPosterior posterior_fit(const PriorSpec& prior, const Eigen::Ref<const MatrixXd>& design,
                                const Eigen::Ref<const VectorXd>& rewards) {
  prior.validate();
  const auto d = static_cast<Eigen::Index>(prior.dim);
  if (design.rows() != rewards.size())
    throw std::invalid_argument("design rows and reward count differ");
  if (design.rows() > 0 && design.cols() != d)
    throw std::invalid_argument("design columns do not match prior dimension");
  if (!design.allFinite() || !rewards.allFinite())
    throw std::invalid_argument("non-finite value in design matrix or rewards");

  const VectorXd w0 = prior.prior_mean();
  GaussianPosterior post;
  if (design.rows() == 0) {
    post.mean_ = w0;
    post.covariance_ = prior.prior_variance * MatrixXd::Identity(d, d);
    post.factor_ = std::sqrt(prior.prior_variance) * MatrixXd::Identity(d, d);
    return post;
  }

  // Precision = V0^-1 + Phi^T Phi / sigma^2, factored as R R^T.
  MatrixXd precision = MatrixXd::Identity(d, d) / prior.prior_variance;
  precision.selfadjointView<Eigen::Lower>().rankUpdate(design.transpose(),
                                                       1.0 / prior.noise_variance);
  precision.triangularView<Eigen::StrictlyUpper>() = precision.transpose();
  Eigen::LLT<MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("posterior precision is not positive definite");

  const VectorXd rhs = design.transpose() * rewards / prior.noise_variance +
                       w0 / prior.prior_variance;
  post.mean_ = llt.solve(rhs);
  // Sigma = R^-T R^-1, so R^-T is an (upper-triangular) square root of Sigma.
  const MatrixXd r_inv =
      llt.matrixL().solve(MatrixXd::Identity(d, d));
  post.factor_ = r_inv.transpose();
  post.covariance_ = post.factor_ * post.factor_.transpose();
  return post;
}

VectorXd posterior_sample(const GaussianPosterior& post, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  VectorXd eps(post.mean().size());
  for (Eigen::Index i = 0; i < eps.size(); ++i) eps(i) = normal(rng);
  return post.mean() + post.factor() * eps;
}

VectorXd posterior_sample(const GaussianPosterior& post, std::uint64_t seed) {
  Rng rng(seed);
  return posterior_sample(post, rng);
}

double predict(const VectorXd& w, const VectorXd& feature) {
  if (w.size() != feature.size()) throw std::invalid_argument("predict: dimension mismatch");
  return w.dot(feature);
}

}  // namespace nlps::blr
