#pragma once

// Small dense kernels evaluated at a single grid point.

#include <functional>

#include "higgsflow/kahler_grid.hpp"

namespace higgsflow::pointwise {

using RealVec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, 4, 1>;

struct GeneralizedEigen {
  RealVec values;  // ascending
  Mat vectors;     // B-orthonormal: V^dagger B V = I
};

/// Solves A v = lambda B v for Hermitian A and Hermitian positive-definite B.
GeneralizedEigen generalized_eigen(const Mat& A, const Mat& B);

/// Smallest eigenvalue of the Hermitian part of M.
double min_hermitian_eigenvalue(const Mat& M);

/// f(K) for an H-self-adjoint K (that is, H K is Hermitian).
Mat metric_selfadjoint_function(const Mat& H, const Mat& K, const std::function<double(double)>& f);

/// H exp(-2 dt K), symmetrised so the result is exactly Hermitian.
Mat exponential_metric_update(const Mat& H, const Mat& K, double dt);

Mat hermitian_exp(const Mat& S);

/// Relative distance of M from being Hermitian.
double hermitian_defect(const Mat& M);

}  // namespace higgsflow::pointwise
