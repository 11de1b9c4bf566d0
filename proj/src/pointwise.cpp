#include "higgsflow/pointwise.hpp"

#include <cmath>

namespace higgsflow::pointwise {

GeneralizedEigen generalized_eigen(const Mat& A, const Mat& B) {
  Eigen::LLT<Mat> llt(B);
  if (llt.info() != Eigen::Success) throw InvalidInput("generalized eigenproblem: B is not positive-definite");
  // C = L^{-1} A L^{-dagger}
  Mat C = llt.matrixL().solve(A);
  C = llt.matrixL().solve(C.adjoint().eval());
  C = 0.5 * (C + C.adjoint()).eval();
  Eigen::SelfAdjointEigenSolver<Mat> es(C);
  GeneralizedEigen out;
  out.values = es.eigenvalues();
  out.vectors = llt.matrixU().solve(es.eigenvectors());
  return out;
}

double min_hermitian_eigenvalue(const Mat& M) {
  const Mat S = 0.5 * (M + M.adjoint());
  Eigen::SelfAdjointEigenSolver<Mat> es(S, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

Mat metric_selfadjoint_function(const Mat& H, const Mat& K, const std::function<double(double)>& f) {
  if (K.isZero(0.0)) return f(0.0) * Mat::Identity(K.rows(), K.cols());
  const Mat HK = H * K;
  const GeneralizedEigen ge = generalized_eigen(0.5 * (HK + HK.adjoint()), H);
  Mat D = Mat::Zero(K.rows(), K.cols());
  for (int i = 0; i < K.rows(); ++i) D(i, i) = f(ge.values(i));
  // V^{-1} = V^dagger H for an H-orthonormal V.
  return ge.vectors * D * ge.vectors.adjoint() * H;
}

Mat exponential_metric_update(const Mat& H, const Mat& K, double dt) {
  if (K.isZero(0.0)) return H;
  const Mat HK = H * K;
  const GeneralizedEigen ge = generalized_eigen(0.5 * (HK + HK.adjoint()), H);
  const Mat W = H * ge.vectors;
  Mat D = Mat::Zero(K.rows(), K.cols());
  for (int i = 0; i < K.rows(); ++i) D(i, i) = std::exp(-2.0 * dt * ge.values(i));
  Mat out = W * D * W.adjoint();
  return 0.5 * (out + out.adjoint());
}

Mat hermitian_exp(const Mat& S) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (S + S.adjoint()));
  Mat D = Mat::Zero(S.rows(), S.cols());
  for (int i = 0; i < S.rows(); ++i) D(i, i) = std::exp(es.eigenvalues()(i));
  return es.eigenvectors() * D * es.eigenvectors().adjoint();
}

double hermitian_defect(const Mat& M) {
  const double scale = std::max(1.0, M.norm());
  return (M - M.adjoint()).norm() / scale;
}

}  // namespace higgsflow::pointwise
