#pragma once

#include <Eigen/Dense>
#include <vector>

#include "lic/state.hpp"

namespace lic {

// One batch of linearized measurements r = H dx + n with independent rows;
// noise_var holds the per-row variances of n.
struct ResidualBlock {
  Eigen::VectorXd residual;
  Eigen::MatrixXd jacobian;
  Eigen::VectorXd noise_var;
  int rows() const { return static_cast<int>(residual.size()); }
  int cols() const { return static_cast<int>(jacobian.cols()); }
};

// Vertical concatenation; all blocks must share the state dimension.
ResidualBlock stack_blocks(const std::vector<ResidualBlock> &blocks);

// Whitens the rows and, when rows > cols, reduces the system with Givens
// rotations to an upper-triangular Jacobian of at most `cols` rows
// (r_c = Q1^T r). The output noise is identity.
ResidualBlock qr_compress(ResidualBlock block);

struct KalmanCorrection {
  bool ok = false;
  Eigen::VectorXd dx;
  Eigen::MatrixXd cov;
};

// K = P H^T (H P H^T + R)^-1, dx = K r, Joseph-form covariance. ok is false
// when the innovation covariance is not positive definite.
KalmanCorrection kalman_correction(const Eigen::MatrixXd &cov, const ResidualBlock &block);

// Applies the correction through boxplus and symmetrizes. Returns false (and
// leaves the state untouched) when the innovation covariance is singular.
bool ekf_update(FullState &state, const ResidualBlock &block);

// Inverse CDF of the chi-squared distribution; values for dof <= 200 are
// cached per confidence level. Throws std::invalid_argument on bad inputs.
double chi_squared_quantile(int dof, double confidence);

}  // namespace lic
