#include "lic/update_engine.hpp"

#include <Eigen/Jacobi>
#include <cmath>
#include <stdexcept>
#include <string>

namespace lic {

ResidualBlock stack_blocks(const std::vector<ResidualBlock> &blocks) {
  if (blocks.empty()) return ResidualBlock{Eigen::VectorXd(0), Eigen::MatrixXd(0, 0), Eigen::VectorXd(0)};
  const int cols = blocks.front().cols();
  int rows = 0;
  for (const ResidualBlock &b : blocks) {
    if (b.cols() != cols || b.rows() != b.jacobian.rows() || b.rows() != b.noise_var.size()) {
      throw std::invalid_argument("stack_blocks: inconsistent block dimensions");
    }
    rows += b.rows();
  }
  ResidualBlock out;
  out.residual.resize(rows);
  out.jacobian.resize(rows, cols);
  out.noise_var.resize(rows);
  int at = 0;
  for (const ResidualBlock &b : blocks) {
    out.residual.segment(at, b.rows()) = b.residual;
    out.jacobian.middleRows(at, b.rows()) = b.jacobian;
    out.noise_var.segment(at, b.rows()) = b.noise_var;
    at += b.rows();
  }
  return out;
}

ResidualBlock qr_compress(ResidualBlock block) {
  const int rows = block.rows();
  const int cols = block.cols();
  for (int i = 0; i < rows; ++i) {
    const double sigma = std::sqrt(block.noise_var(i));
    if (!(sigma > 0.0)) throw std::invalid_argument("qr_compress: non-positive noise variance");
    block.jacobian.row(i) /= sigma;
    block.residual(i) /= sigma;
  }
  block.noise_var.setOnes();
  if (rows <= cols) return block;

  // Givens rotations zero the sub-diagonal column by column; the rotations
  // are applied to the residual as well, which yields Q1^T r in the top rows.
  Eigen::JacobiRotation<double> rot;
  for (int n = 0; n < cols; ++n) {
    for (int m = rows - 1; m > n; --m) {
      rot.makeGivens(block.jacobian(m - 1, n), block.jacobian(m, n));
      block.jacobian.block(m - 1, n, 2, cols - n).applyOnTheLeft(0, 1, rot.adjoint());
      block.residual.segment(m - 1, 2).applyOnTheLeft(0, 1, rot.adjoint());
    }
  }
  ResidualBlock out;
  out.residual = block.residual.head(cols);
  out.jacobian = block.jacobian.topRows(cols);
  out.noise_var = Eigen::VectorXd::Ones(cols);
  return out;
}

KalmanCorrection kalman_correction(const Eigen::MatrixXd &cov, const ResidualBlock &block) {
  KalmanCorrection out;
  const Eigen::MatrixXd &h = block.jacobian;
  Eigen::MatrixXd s = h * cov * h.transpose();
  s.diagonal() += block.noise_var;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(0.5 * (s + s.transpose()));
  if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= 0.0) {
    out.ok = false;
    return out;
  }
  const Eigen::MatrixXd pht = cov * h.transpose();
  const Eigen::MatrixXd k = ldlt.solve(pht.transpose()).transpose();
  out.dx = k * block.residual;
  const Eigen::MatrixXd ikh = Eigen::MatrixXd::Identity(cov.rows(), cov.cols()) - k * h;
  out.cov = ikh * cov * ikh.transpose() + k * block.noise_var.asDiagonal() * k.transpose();
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  out.ok = true;
  return out;
}

bool ekf_update(FullState &state, const ResidualBlock &block) {
  if (block.cols() != state.error_dim()) {
    throw std::invalid_argument("ekf_update: block has " + std::to_string(block.cols()) +
                                " columns, state error dimension is " + std::to_string(state.error_dim()));
  }
  if (block.rows() == 0) return true;
  const KalmanCorrection corr = kalman_correction(state.cov, block);
  if (!corr.ok) return false;
  state = boxplus(state, corr.dx);
  state.cov = corr.cov;
  symmetrize_covariance(state.cov);
  return true;
}

}  // namespace lic
