#include "higgsflow/metric.hpp"

#include <cmath>
#include <limits>

#include "higgsflow/pointwise.hpp"

namespace higgsflow {

HermitianMetric::HermitianMetric(FormField h) : h_(std::move(h)), inv_(zero_like(h_)) {
  if (!h_.square() || !(h_.degree() == Bidegree{0, 0}))
    throw InvalidInput("metric: needs a square (0,0)-form");
  const int r = h_.rows();
  for (std::size_t pt = 0; pt < h_.base().num_points(); ++pt) {
    Mat m = h_.at(0, pt);
    if (!m.allFinite()) throw InvalidInput("metric: non-finite entry at grid point " + std::to_string(pt));
    if (pointwise::hermitian_defect(m) > 1e-10)
      throw InvalidInput("metric: not Hermitian at grid point " + std::to_string(pt));
    m = 0.5 * (m + m.adjoint()).eval();
    Eigen::LLT<Mat> llt(m);
    if (llt.info() != Eigen::Success || !(std::real(llt.matrixLLT()(r - 1, r - 1)) > 0.0))
      throw InvalidInput("metric: not positive-definite at grid point " + std::to_string(pt));
    h_.at(0, pt) = m;
    Mat inv = llt.solve(Mat::Identity(r, r));
    inv_.at(0, pt) = 0.5 * (inv + inv.adjoint());
  }
}

double HermitianMetric::min_eigenvalue() const {
  if (!min_eig_) {
    double e = std::numeric_limits<double>::infinity();
    for (std::size_t pt = 0; pt < h_.base().num_points(); ++pt)
      e = std::min(e, pointwise::min_hermitian_eigenvalue(h_.at(0, pt)));
    min_eig_ = e;
  }
  return *min_eig_;
}

HermitianMetric HermitianMetric::identity(const TorusBase& base, int rank) {
  return HermitianMetric(FormField::identity(base, rank));
}

FormField form_adjoint(const FormField& x, const HermitianMetric& row_metric, const HermitianMetric& col_metric) {
  if (row_metric.rank() != x.rows() || col_metric.rank() != x.cols())
    throw InvalidInput("adjoint: metric ranks do not match the field");
  const Bidegree d = x.degree();
  FormField out(x.base(), x.cols(), x.rows(), {d.q, d.p});
  const double sign = ((d.p * d.q) % 2 == 0) ? 1.0 : -1.0;
  for (int c = 0; c < x.components(); ++c) {
    const int oc = out.component_of(x.dzbar_mask(c), x.dz_mask(c));
    for (std::size_t pt = 0; pt < x.base().num_points(); ++pt) {
      out.at(oc, pt) = sign * (col_metric.inverse_at(pt) * x.at(c, pt).adjoint() * row_metric.at(pt));
    }
  }
  return out;
}

std::vector<double> pointwise_inner(const FormField& x, const FormField& y, const HermitianMetric& row_metric,
                                    const HermitianMetric& col_metric) {
  x.require_same_shape(y, "inner product");
  if (row_metric.rank() != x.rows() || col_metric.rank() != x.cols())
    throw InvalidInput("inner product: metric ranks do not match the field");
  std::vector<double> out(x.base().num_points(), 0.0);
  const double form_weight = std::pow(2.0, x.degree().total());
  for (int c = 0; c < x.components(); ++c) {
    for (std::size_t pt = 0; pt < out.size(); ++pt) {
      const Mat t = y.at(c, pt).adjoint() * row_metric.at(pt) * x.at(c, pt) * col_metric.inverse_at(pt);
      out[pt] += form_weight * t.trace().real();
    }
  }
  return out;
}

std::vector<double> pointwise_norm_sq(const FormField& x, const HermitianMetric& row_metric,
                                      const HermitianMetric& col_metric) {
  return pointwise_inner(x, x, row_metric, col_metric);
}

double l2_norm_sq(const FormField& x, const HermitianMetric& row_metric, const HermitianMetric& col_metric) {
  return integrate(pointwise_norm_sq(x, row_metric, col_metric), x.base());
}

double l2_inner(const FormField& x, const FormField& y, const HermitianMetric& h) {
  return integrate(pointwise_inner(x, y, h, h), x.base());
}

double sup_norm(const FormField& x, const HermitianMetric& row_metric, const HermitianMetric& col_metric) {
  return std::sqrt(std::max(0.0, sup_value(pointwise_norm_sq(x, row_metric, col_metric))));
}

double sup_norm_of_sum(const std::vector<const FormField*>& parts, const HermitianMetric& row_metric,
                       const HermitianMetric& col_metric) {
  if (parts.empty()) return 0.0;
  std::vector<double> total(parts.front()->base().num_points(), 0.0);
  for (const FormField* f : parts) {
    const auto p = pointwise_norm_sq(*f, row_metric, col_metric);
    for (std::size_t i = 0; i < total.size(); ++i) total[i] += p[i];
  }
  return std::sqrt(std::max(0.0, sup_value(total)));
}

}  // namespace higgsflow
