// Copyright (C) 2026 The cminv Authors
// SPDX-License-Identifier: Apache-2.0

#include "cminv/priors.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "cminv/random.hpp"

namespace cminv {

namespace {

constexpr double kMinRcond = 1e-14;

Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

// Solves `lhs * X = rhs` for symmetric positive definite `lhs`.
Matrix spd_solve(const Matrix& lhs, const Matrix& rhs, const char* what) {
  Eigen::LLT<Matrix> llt(lhs);
  if (llt.info() != Eigen::Success || !(llt.rcond() > kMinRcond)) {
    std::ostringstream os;
    os << what << ": system is singular or ill-conditioned (rcond "
       << (llt.info() == Eigen::Success ? llt.rcond() : 0.0) << ")";
    throw std::domain_error(os.str());
  }
  return llt.solve(rhs);
}

void check_level(const char* what, double t) {
  if (!(t > 0.0) || !std::isfinite(t)) {
    throw std::invalid_argument(std::string(what) + ": noise level must be positive");
  }
}

// G1 = Σ (Σ + t² I)⁻¹, the gain of the x_t observation.
Matrix latent_gain(const GaussianPrior& prior, double t) {
  const Matrix& cov = prior.covariance();
  const Index n = prior.dim();
  if (prior.is_diagonal()) {
    const Vector var = cov.diagonal();
    return (var.array() / (var.array() + t * t)).matrix().asDiagonal();
  }
  const Matrix shifted = cov + t * t * Matrix::Identity(n, n);
  return spd_solve(shifted, cov, "gaussian denoise").transpose();
}

AffineDenoiser joint_affine(const GaussianPrior& prior, double t, const Matrix& a, double sigma_y) {
  const Index n = prior.dim();
  const Matrix g1 = latent_gain(prior, t);
  const Matrix cov1 = symmetrized(prior.covariance() - g1 * prior.covariance());
  const Matrix s = a * cov1 * a.transpose() +
                   sigma_y * sigma_y * Matrix::Identity(a.rows(), a.rows());
  const Matrix g2 = spd_solve(s, a * cov1, "gaussian joint denoise").transpose();
  const Matrix keep = Matrix::Identity(n, n) - g2 * a;
  AffineDenoiser out;
  out.gain_xt = keep * g1;
  out.gain_y = g2;
  out.offset = keep * (prior.mean() - g1 * prior.mean());
  return out;
}

Vector softmax_weights(const Vector& log_weights) {
  double peak = -std::numeric_limits<double>::infinity();
  for (Index j = 0; j < log_weights.size(); ++j) peak = std::max(peak, log_weights[j]);
  Vector w(log_weights.size());
  double total = 0.0;
  for (Index j = 0; j < log_weights.size(); ++j) {
    w[j] = std::isfinite(log_weights[j]) ? std::exp(log_weights[j] - peak) : 0.0;
    total += w[j];
  }
  return w / total;
}

Vector empirical_log_weights(const EmpiricalPrior& prior, const Vector& x_t, double t) {
  Vector logits(prior.size());
  const double inv = 1.0 / (2.0 * t * t);
  for (Index j = 0; j < prior.size(); ++j) {
    const double w = prior.weights()[j];
    logits[j] = w > 0.0 ? std::log(w) - (x_t - prior.atoms().col(j)).squaredNorm() * inv
                        : -std::numeric_limits<double>::infinity();
  }
  return logits;
}

}  // namespace

// ---------------------------------------------------------------------------

GaussianPrior::GaussianPrior(Vector mean, Matrix covariance)
    : mean_(std::move(mean)), covariance_(std::move(covariance)) {
  const Index n = mean_.size();
  if (n == 0) throw std::invalid_argument("GaussianPrior: empty mean");
  if (covariance_.rows() != n || covariance_.cols() != n) {
    throw DimensionError("GaussianPrior covariance", n, covariance_.rows());
  }
  if (!all_finite(mean_) || !covariance_.allFinite()) {
    throw std::invalid_argument("GaussianPrior: non-finite parameters");
  }
  if ((covariance_ - covariance_.transpose()).cwiseAbs().maxCoeff() > 1e-8) {
    throw std::invalid_argument("GaussianPrior: covariance is not symmetric");
  }
  covariance_ = symmetrized(covariance_);
  const Matrix off = covariance_ - Matrix(covariance_.diagonal().asDiagonal());
  diagonal_ = off.cwiseAbs().maxCoeff() == 0.0;
  if (diagonal_) {
    if (covariance_.diagonal().minCoeff() < -1e-8) {
      throw std::invalid_argument("GaussianPrior: covariance is not positive semi-definite");
    }
    sqrt_ = std::make_shared<const Matrix>(covariance_.diagonal().cwiseMax(0.0).cwiseSqrt().asDiagonal());
    return;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(covariance_);
  if (eig.eigenvalues().minCoeff() < -1e-8) {
    throw std::invalid_argument("GaussianPrior: covariance is not positive semi-definite");
  }
  const Vector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  sqrt_ = std::make_shared<const Matrix>(eig.eigenvectors() * root.asDiagonal() *
                                         eig.eigenvectors().transpose());
}

GaussianPrior GaussianPrior::diagonal(Vector mean, const Vector& variances) {
  if (variances.size() != mean.size()) {
    throw DimensionError("GaussianPrior variances", mean.size(), variances.size());
  }
  return GaussianPrior(std::move(mean), Matrix(variances.asDiagonal()));
}

GaussianPrior GaussianPrior::isotropic(Vector mean, double variance) {
  const Index n = mean.size();
  return diagonal(std::move(mean), Vector::Constant(n, variance));
}

Vector GaussianPrior::sample(Rng& rng) const {
  const Vector z = rng.normal_vector(dim());
  if (diagonal_) return mean_ + covariance_.diagonal().cwiseMax(0.0).cwiseSqrt().cwiseProduct(z);
  return mean_ + *sqrt_ * z;
}

EmpiricalPrior::EmpiricalPrior(std::vector<Vector> atoms, std::vector<double> weights) {
  if (atoms.empty()) throw std::invalid_argument("EmpiricalPrior: no atoms");
  if (atoms.size() != weights.size()) {
    throw DimensionError("EmpiricalPrior weights", static_cast<Index>(atoms.size()),
                         static_cast<Index>(weights.size()));
  }
  const Index n = atoms.front().size();
  atoms_.resize(n, static_cast<Index>(atoms.size()));
  weights_.resize(static_cast<Index>(weights.size()));
  double total = 0.0;
  for (std::size_t j = 0; j < atoms.size(); ++j) {
    check_dim("EmpiricalPrior atom", n, atoms[j].size());
    if (!(weights[j] >= 0.0)) throw std::invalid_argument("EmpiricalPrior: negative weight");
    atoms_.col(static_cast<Index>(j)) = atoms[j];
    weights_[static_cast<Index>(j)] = weights[j];
    total += weights[j];
  }
  if (std::abs(total - 1.0) > 1e-10) {
    throw std::invalid_argument("EmpiricalPrior: weights must sum to 1");
  }
  if (!atoms_.allFinite()) throw std::invalid_argument("EmpiricalPrior: non-finite atom");
}

EmpiricalPrior::EmpiricalPrior(std::vector<Vector> atoms)
    : EmpiricalPrior(atoms, std::vector<double>(atoms.size(), 1.0 / static_cast<double>(
                                                                     std::max<std::size_t>(atoms.size(), 1)))) {}

// ---------------------------------------------------------------------------

ImageTensor gaussian_denoise(const GaussianPrior& prior, const ImageTensor& x_t, double t) {
  check_level("gaussian_denoise", t);
  check_dim("gaussian_denoise x_t", prior.dim(), x_t.size());
  const Vector centered = x_t.data() - prior.mean();
  if (prior.is_diagonal()) {
    const Vector var = prior.covariance().diagonal();
    return x_t.with_data(prior.mean() +
                         (var.array() / (var.array() + t * t) * centered.array()).matrix());
  }
  const Matrix shifted = prior.covariance() + t * t * Matrix::Identity(prior.dim(), prior.dim());
  const Vector solved = spd_solve(shifted, centered, "gaussian_denoise");
  return x_t.with_data(prior.mean() + prior.covariance() * solved);
}

ImageTensor gaussian_joint_denoise(const GaussianPrior& prior, const ImageTensor& x_t, double t,
                                   const LinearOperator& op, const Vector& y, double sigma_y) {
  check_level("gaussian_joint_denoise", t);
  if (!(sigma_y >= 0.0)) throw std::invalid_argument("gaussian_joint_denoise: sigma_y < 0");
  check_dim("gaussian_joint_denoise x_t", prior.dim(), x_t.size());
  check_dim("gaussian_joint_denoise operator", prior.dim(), op.input_dim());
  check_dim("gaussian_joint_denoise y", op.output_dim(), y.size());
  const AffineDenoiser a = joint_affine(prior, t, op.to_dense(), sigma_y);
  return x_t.with_data(a.offset + a.gain_xt * x_t.data() + a.gain_y * y);
}

GaussianPosterior gaussian_posterior(const GaussianPrior& prior, const LinearOperator& op,
                                     const Vector& y, double sigma_y) {
  if (!(sigma_y >= 0.0)) throw std::invalid_argument("gaussian_posterior: sigma_y < 0");
  check_dim("gaussian_posterior operator", prior.dim(), op.input_dim());
  check_dim("gaussian_posterior y", op.output_dim(), y.size());
  const Matrix a = op.to_dense();
  const Matrix& cov = prior.covariance();
  const Matrix s = a * cov * a.transpose() + sigma_y * sigma_y * Matrix::Identity(a.rows(), a.rows());
  const Matrix gain = spd_solve(s, a * cov, "gaussian_posterior").transpose();
  GaussianPosterior out;
  out.mean = prior.mean() + gain * (y - a * prior.mean());
  out.covariance = symmetrized(cov - gain * a * cov);
  return out;
}

Matrix gaussian_conditional_covariance(const GaussianPrior& prior, double t) {
  check_level("gaussian_conditional_covariance", t);
  const Matrix g1 = latent_gain(prior, t);
  return symmetrized(prior.covariance() - g1 * prior.covariance());
}

ImageTensor empirical_denoise(const EmpiricalPrior& prior, const ImageTensor& x_t, double t) {
  check_level("empirical_denoise", t);
  check_dim("empirical_denoise x_t", prior.dim(), x_t.size());
  const Vector w = softmax_weights(empirical_log_weights(prior, x_t.data(), t));
  return x_t.with_data(prior.atoms() * w);
}

// ---------------------------------------------------------------------------

GaussianConsistency::GaussianConsistency(GaussianPrior prior) : prior_(std::move(prior)) {}

ImageTensor GaussianConsistency::predict(const ImageTensor& x_t, const Vector&, double t) const {
  check_level("GaussianConsistency", t);
  check_dim("GaussianConsistency x_t", prior_.dim(), x_t.size());
  if (prior_.is_diagonal()) return gaussian_denoise(prior_, x_t, t);
  std::shared_ptr<const AffineDenoiser> affine;
  {
    std::lock_guard lock(mutex_);
    auto it = cache_.find(t);
    if (it == cache_.end()) {
      AffineDenoiser a;
      a.gain_xt = latent_gain(prior_, t);
      a.offset = prior_.mean() - a.gain_xt * prior_.mean();
      it = cache_.emplace(t, std::make_shared<const AffineDenoiser>(std::move(a))).first;
    }
    affine = it->second;
  }
  return x_t.with_data(affine->offset + affine->gain_xt * x_t.data());
}

GaussianMeasurementConsistency::GaussianMeasurementConsistency(GaussianPrior prior,
                                                               LinearOperatorPtr op, double sigma_y)
    : prior_(std::move(prior)), op_(std::move(op)), sigma_y_(sigma_y) {
  if (!op_) throw std::invalid_argument("GaussianMeasurementConsistency: null operator");
  if (!(sigma_y_ >= 0.0)) throw std::invalid_argument("GaussianMeasurementConsistency: sigma_y < 0");
  check_dim("GaussianMeasurementConsistency operator", prior_.dim(), op_->input_dim());
  dense_op_ = op_->to_dense();
}

std::shared_ptr<const AffineDenoiser> GaussianMeasurementConsistency::affine(double t) const {
  check_level("GaussianMeasurementConsistency", t);
  std::lock_guard lock(mutex_);
  auto it = cache_.find(t);
  if (it == cache_.end()) {
    auto a = std::make_shared<const AffineDenoiser>(joint_affine(prior_, t, dense_op_, sigma_y_));
    it = cache_.emplace(t, std::move(a)).first;
  }
  return it->second;
}

ImageTensor GaussianMeasurementConsistency::predict(const ImageTensor& x_t, const Vector& y,
                                                    double t) const {
  check_dim("GaussianMeasurementConsistency x_t", prior_.dim(), x_t.size());
  check_dim("GaussianMeasurementConsistency y", op_->output_dim(), y.size());
  const auto a = affine(t);
  return x_t.with_data(a->offset + a->gain_xt * x_t.data() + a->gain_y * y);
}

ImageTensor EmpiricalConsistency::predict(const ImageTensor& x_t, const Vector&, double t) const {
  return empirical_denoise(prior_, x_t, t);
}

EmpiricalMeasurementConsistency::EmpiricalMeasurementConsistency(EmpiricalPrior prior,
                                                                 ForwardOperatorPtr op,
                                                                 double sigma_y)
    : prior_(std::move(prior)), op_(std::move(op)), sigma_y_(sigma_y) {
  if (!op_) throw std::invalid_argument("EmpiricalMeasurementConsistency: null operator");
  if (!(sigma_y_ > 0.0)) {
    throw std::invalid_argument("EmpiricalMeasurementConsistency: sigma_y must be positive");
  }
  check_dim("EmpiricalMeasurementConsistency operator", prior_.dim(), op_->input_dim());
  measured_atoms_.resize(op_->output_dim(), prior_.size());
  for (Index j = 0; j < prior_.size(); ++j) {
    measured_atoms_.col(j) = op_->apply(Vector(prior_.atoms().col(j)));
  }
}

ImageTensor EmpiricalMeasurementConsistency::predict(const ImageTensor& x_t, const Vector& y,
                                                     double t) const {
  check_level("EmpiricalMeasurementConsistency", t);
  check_dim("EmpiricalMeasurementConsistency x_t", prior_.dim(), x_t.size());
  Vector logits = empirical_log_weights(prior_, x_t.data(), t);
  if (y.size() > 0) {
    check_dim("EmpiricalMeasurementConsistency y", op_->output_dim(), y.size());
    const double inv = 1.0 / (2.0 * sigma_y_ * sigma_y_);
    for (Index j = 0; j < prior_.size(); ++j) {
      logits[j] -= (y - measured_atoms_.col(j)).squaredNorm() * inv;
    }
  }
  return x_t.with_data(prior_.atoms() * softmax_weights(logits));
}

}  // namespace cminv
