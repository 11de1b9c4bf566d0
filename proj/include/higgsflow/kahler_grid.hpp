#pragma once

// Flat complex tori (R/Z)^{2n} and matrix-valued (p,q)-forms sampled on a
// uniform periodic grid.
//
// Conventions used throughout the library:
//   z^k = x_{2k} + i x_{2k+1}   (real axis 2k is Re z^k, axis 2k+1 is Im z^k)
//   omega = (i/2) sum_k dz^k ^ dzbar^k,   |dz^k|^2 = 2,   Lambda(omega) = n
//   a (p,q)-form is stored on the basis dz^I ^ dzbar^J with I, J increasing.

#include <array>
#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace higgsflow {

using cplx = std::complex<double>;

// Pointwise matrices never exceed rank 4, so temporaries live on the stack.
using Mat = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, 4, 4>;
using Vec = Eigen::Matrix<cplx, Eigen::Dynamic, 1, Eigen::ColMajor, 4, 1>;
using DynMat = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic>;
using MatMap = Eigen::Map<DynMat>;
using ConstMatMap = Eigen::Map<const DynMat>;

inline constexpr int kMaxRank = 4;

/// Raised for any input that violates an operation's precondition.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class TorusBase {
 public:
  TorusBase(int n, int N);

  int dim() const { return n_; }
  int real_dim() const { return 2 * n_; }
  int resolution() const { return N_; }
  std::size_t num_points() const { return num_points_; }
  double spacing() const { return 1.0 / N_; }
  /// Riemann-sum weight of one grid cell, spacing^{2n}.
  double cell_volume() const { return cell_volume_; }
  /// Integral of omega^n/n! over the torus.
  double volume() const { return volume_; }
  double injectivity_radius() const { return 0.5; }

  std::size_t stride(int axis) const { return strides_[axis]; }
  int coord(std::size_t pt, int axis) const {
    return static_cast<int>((pt / strides_[axis]) % N_);
  }
  std::size_t shift(std::size_t pt, int axis, int offset) const;
  std::array<double, 4> position(std::size_t pt) const;

  bool operator==(const TorusBase& other) const { return n_ == other.n_ && N_ == other.N_; }

 private:
  int n_;
  int N_;
  std::size_t num_points_;
  double cell_volume_;
  double volume_;
  std::array<std::size_t, 4> strides_{};
};

struct Bidegree {
  int p = 0;
  int q = 0;
  int total() const { return p + q; }
  bool operator==(const Bidegree&) const = default;
};

/// Increasing index sets of size k in {0..n-1}, as bitmasks in lexicographic order.
const std::vector<unsigned>& index_sets(int n, int k);
int binomial(int n, int k);

/// Matrix-valued (p,q)-form: one grid of rows x cols matrices per basis element.
/// Square fields are End(E)-valued; rectangular ones carry Hom-blocks.
class FormField {
 public:
  FormField(const TorusBase& base, int rows, int cols, Bidegree degree);
  FormField(const TorusBase& base, int rank, Bidegree degree) : FormField(base, rank, rank, degree) {}

  const TorusBase& base() const { return base_; }
  int rows() const { return rows_; }
  int cols() const { return cols_; }
  bool square() const { return rows_ == cols_; }
  Bidegree degree() const { return degree_; }
  int components() const { return components_; }

  unsigned dz_mask(int comp) const;
  unsigned dzbar_mask(int comp) const;
  /// Component index of dz^I ^ dzbar^J, or -1 if that basis element is absent.
  int component_of(unsigned dz, unsigned dzbar) const;

  MatMap at(int comp, std::size_t pt) {
    return MatMap(data_.data() + offset(comp, pt), rows_, cols_);
  }
  ConstMatMap at(int comp, std::size_t pt) const {
    return ConstMatMap(data_.data() + offset(comp, pt), rows_, cols_);
  }

  std::span<cplx> raw() { return data_; }
  std::span<const cplx> raw() const { return data_; }

  bool same_shape(const FormField& other) const;
  void require_same_shape(const FormField& other, const char* what) const;

  FormField& operator+=(const FormField& other);
  FormField& operator-=(const FormField& other);
  FormField& operator*=(cplx s);

  friend FormField operator+(FormField a, const FormField& b) { return a += b; }
  friend FormField operator-(FormField a, const FormField& b) { return a -= b; }
  friend FormField operator*(cplx s, FormField a) { return a *= s; }
  friend FormField operator*(FormField a, cplx s) { return a *= s; }
  FormField operator-() const { FormField r = *this; r *= -1.0; return r; }

  /// Same value at every grid point: comps[c] is the coefficient of basis element c.
  static FormField constant(const TorusBase& base, Bidegree degree, const std::vector<Mat>& comps);
  /// Identity endomorphism as a (0,0)-form.
  static FormField identity(const TorusBase& base, int rank);

 private:
  std::size_t offset(int comp, std::size_t pt) const {
    return (static_cast<std::size_t>(comp) * base_.num_points() + pt) * block_;
  }

  TorusBase base_;
  int rows_;
  int cols_;
  Bidegree degree_;
  int components_;
  std::size_t block_;
  std::vector<cplx> data_;
};

/// Flat dbar: second-order centered differences, raises q.
FormField dbar_flat(const FormField& f);
/// Flat del (the holomorphic derivative), raises p.
FormField del_flat(const FormField& f);

/// Matrix product composed with the exterior product of form parts.
FormField wedge(const FormField& a, const FormField& b);

// Variants used when assembling curvature parts: a result whose bidegree
// exceeds n is returned as a field with no components instead of rejected.
FormField wedge_or_empty(const FormField& a, const FormField& b);
FormField dbar_or_empty(const FormField& f);
FormField del_or_empty(const FormField& f);

/// Contraction with omega of a (1,1)-form.
FormField contract_lambda(const FormField& f);

/// omega * M for a (0,0)-form M.
FormField omega_times(const FormField& m);

/// Pointwise matrix multiplication of a (0,0)-form on either side of a form.
FormField left_multiply(const FormField& m, const FormField& f);
FormField right_multiply(const FormField& f, const FormField& m);

/// Zero field with the same shape.
FormField zero_like(const FormField& f);

/// Deterministic compensated sum of cell values times the cell volume.
double integrate(std::span<const double> density, const TorusBase& base);
cplx integrate(std::span<const cplx> density, const TorusBase& base);

double sup_value(std::span<const double> values);

/// Pointwise trace of a square (0,0)-form.
std::vector<cplx> trace_field(const FormField& f);

/// Largest absolute matrix entry over all components and points.
double sup_abs_entry(const FormField& f);

}  // namespace higgsflow
