#pragma once

#include <optional>
#include <vector>

#include "higgsflow/kahler_grid.hpp"

namespace higgsflow {

/// Grid of Hermitian positive-definite matrices, validated on construction.
class HermitianMetric {
 public:
  explicit HermitianMetric(FormField h);

  static HermitianMetric identity(const TorusBase& base, int rank);

  const TorusBase& base() const { return h_.base(); }
  int rank() const { return h_.rows(); }
  const FormField& field() const { return h_; }
  const FormField& inverse_field() const { return inv_; }
  ConstMatMap at(std::size_t pt) const { return h_.at(0, pt); }
  ConstMatMap inverse_at(std::size_t pt) const { return inv_.at(0, pt); }
  double min_eigenvalue() const;

 private:
  FormField h_;
  FormField inv_;
  mutable std::optional<double> min_eig_;
};

/// X^* = H_col^{-1} X^dagger H_row with dz <-> dzbar, for Hom(col, row)-valued forms.
FormField form_adjoint(const FormField& x, const HermitianMetric& row_metric,
                       const HermitianMetric& col_metric);
inline FormField form_adjoint(const FormField& x, const HermitianMetric& h) {
  return form_adjoint(x, h, h);
}

/// Pointwise |X|^2 with |dz|^2 = 2 on form indices.
std::vector<double> pointwise_norm_sq(const FormField& x, const HermitianMetric& row_metric,
                                      const HermitianMetric& col_metric);
inline std::vector<double> pointwise_norm_sq(const FormField& x, const HermitianMetric& h) {
  return pointwise_norm_sq(x, h, h);
}

/// Pointwise Re <X, Y>.
std::vector<double> pointwise_inner(const FormField& x, const FormField& y,
                                    const HermitianMetric& row_metric,
                                    const HermitianMetric& col_metric);

double l2_norm_sq(const FormField& x, const HermitianMetric& row_metric, const HermitianMetric& col_metric);
inline double l2_norm_sq(const FormField& x, const HermitianMetric& h) { return l2_norm_sq(x, h, h); }

double l2_inner(const FormField& x, const FormField& y, const HermitianMetric& h);

double sup_norm(const FormField& x, const HermitianMetric& row_metric, const HermitianMetric& col_metric);
inline double sup_norm(const FormField& x, const HermitianMetric& h) { return sup_norm(x, h, h); }

/// sqrt of sup over points of the summed pointwise squares of several parts.
double sup_norm_of_sum(const std::vector<const FormField*>& parts, const HermitianMetric& row_metric,
                       const HermitianMetric& col_metric);

}  // namespace higgsflow
