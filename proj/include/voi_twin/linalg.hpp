#pragma once

#include <Eigen/Core>

#include "voi_twin/random.hpp"

namespace voi_twin {

inline constexpr double kPsdTolerance = 1e-9;

bool is_symmetric(const Eigen::Ref<const Eigen::MatrixXd>& m, double tol = kPsdTolerance);

// Symmetric and no eigenvalue below -tol.
bool is_psd(const Eigen::Ref<const Eigen::MatrixXd>& m, double tol = kPsdTolerance);

// (A + A^T) / 2 with negative eigenvalues clamped to zero.
Eigen::MatrixXd symmetrize_psd(const Eigen::Ref<const Eigen::MatrixXd>& m);

// Square root factor S with S S^T = cov, valid for singular PSD cov.
Eigen::MatrixXd psd_sqrt(const Eigen::Ref<const Eigen::MatrixXd>& cov);

// One draw from N(mean, cov). Throws ConfigError when cov is not PSD.
Eigen::VectorXd sample_gaussian(const Eigen::Ref<const Eigen::VectorXd>& mean,
                                const Eigen::Ref<const Eigen::MatrixXd>& cov, Rng& rng);

}  // namespace voi_twin
