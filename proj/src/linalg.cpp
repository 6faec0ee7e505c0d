#include "voi_twin/linalg.hpp"

#include <Eigen/Eigenvalues>

#include "voi_twin/errors.hpp"

namespace voi_twin {

bool is_symmetric(const Eigen::Ref<const Eigen::MatrixXd>& m, double tol) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

bool is_psd(const Eigen::Ref<const Eigen::MatrixXd>& m, double tol) {
  if (!m.allFinite() || !is_symmetric(m, tol)) return false;
  if (m.size() == 0) return true;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return es.eigenvalues().minCoeff() >= -tol * scale;
}

Eigen::MatrixXd symmetrize_psd(const Eigen::Ref<const Eigen::MatrixXd>& m) {
  Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  if (es.eigenvalues().minCoeff() >= 0.0) return sym;
  const Eigen::VectorXd clamped = es.eigenvalues().cwiseMax(0.0);
  Eigen::MatrixXd out = es.eigenvectors() * clamped.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

Eigen::MatrixXd psd_sqrt(const Eigen::Ref<const Eigen::MatrixXd>& cov) {
  if (!is_psd(cov)) throw ConfigError("covariance is not symmetric positive semidefinite");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (cov + cov.transpose()));
  const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal();
}

Eigen::VectorXd sample_gaussian(const Eigen::Ref<const Eigen::VectorXd>& mean,
                                const Eigen::Ref<const Eigen::MatrixXd>& cov, Rng& rng) {
  if (cov.rows() != mean.size() || cov.cols() != mean.size()) {
    throw ContractError("sample_gaussian: mean/cov size mismatch");
  }
  const Eigen::MatrixXd S = psd_sqrt(cov);
  return mean + S * rng.standard_normal(mean.size());
}

}  // namespace voi_twin
