#include "higgsflow/kahler_grid.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

namespace higgsflow {

namespace {

// Sign for moving a single dz^k (or dzbar^k) to its sorted position inside set.
int insertion_sign(unsigned set, int k) {
  const unsigned below = set & ((1u << k) - 1u);
  return (std::popcount(below) % 2 == 0) ? 1 : -1;
}

// Sign of sorting the concatenation I,K of two disjoint increasing index sets.
int merge_sign(unsigned I, unsigned K) {
  int inversions = 0;
  for (int k = 0; k < 4; ++k) {
    if (K & (1u << k)) inversions += std::popcount(I >> (k + 1));
  }
  return (inversions % 2 == 0) ? 1 : -1;
}

std::vector<unsigned> build_sets(int n, int k) {
  std::vector<unsigned> out;
  for (unsigned m = 0; m < (1u << n); ++m) {
    if (std::popcount(m) == k) out.push_back(m);
  }
  // Lexicographic order on increasing sequences.
  std::sort(out.begin(), out.end(), [](unsigned a, unsigned b) {
    for (int i = 0; i < 4; ++i) {
      const bool ia = a & (1u << i), ib = b & (1u << i);
      if (ia != ib) return ia;
    }
    return false;
  });
  return out;
}

// Centered difference d/dx_axis of component comp of f at pt.
template <typename Out>
void centered_difference(const FormField& f, int comp, std::size_t pt, int axis, double scale,
                         Out&& out) {
  const TorusBase& b = f.base();
  const std::size_t up = b.shift(pt, axis, +1);
  const std::size_t dn = b.shift(pt, axis, -1);
  out = (f.at(comp, up) - f.at(comp, dn)) * (scale * 0.5 * b.resolution());
}

enum class Direction { Holomorphic, AntiHolomorphic };

FormField complex_derivative(const FormField& f, Direction dir) {
  const TorusBase& base = f.base();
  const int n = base.dim();
  const Bidegree d = f.degree();
  const bool anti = dir == Direction::AntiHolomorphic;
  if ((anti ? d.q : d.p) + 1 > n) {
    throw InvalidInput(std::string(anti ? "dbar" : "del") + ": derivative of a (" +
                       std::to_string(d.p) + "," + std::to_string(d.q) +
                       ")-form exceeds the complex dimension");
  }
  const Bidegree od = anti ? Bidegree{d.p, d.q + 1} : Bidegree{d.p + 1, d.q};
  FormField out(base, f.rows(), f.cols(), od);
  const cplx imag_coeff = anti ? cplx(0, 0.5) : cplx(0, -0.5);
  Mat dx, dy;
  for (int c = 0; c < f.components(); ++c) {
    const unsigned I = f.dz_mask(c), J = f.dzbar_mask(c);
    for (int k = 0; k < n; ++k) {
      const unsigned bit = 1u << k;
      if ((anti ? J : I) & bit) continue;
      int sign;
      int oc;
      if (anti) {
        sign = (std::popcount(I) % 2 == 0 ? 1 : -1) * insertion_sign(J, k);
        oc = out.component_of(I, J | bit);
      } else {
        sign = insertion_sign(I, k);
        oc = out.component_of(I | bit, J);
      }
      const cplx real_coeff = 0.5 * sign;
      const cplx im = imag_coeff * static_cast<double>(sign);
      for (std::size_t pt = 0; pt < base.num_points(); ++pt) {
        centered_difference(f, c, pt, 2 * k, 1.0, dx);
        centered_difference(f, c, pt, 2 * k + 1, 1.0, dy);
        out.at(oc, pt) += real_coeff * dx + im * dy;
      }
    }
  }
  return out;
}

}  // namespace

TorusBase::TorusBase(int n, int N) : n_(n), N_(N) {
  if (n != 1 && n != 2) throw InvalidInput("torus: complex dimension must be 1 or 2");
  if (N < 8 || N % 2 != 0) throw InvalidInput("torus: resolution must be even and >= 8");
  num_points_ = 1;
  for (int a = 0; a < 2 * n; ++a) num_points_ *= static_cast<std::size_t>(N);
  std::size_t s = 1;
  for (int a = 2 * n - 1; a >= 0; --a) {
    strides_[a] = s;
    s *= static_cast<std::size_t>(N);
  }
  cell_volume_ = std::pow(1.0 / N, 2 * n);
  // omega^n/n! is the Euclidean volume form, density 1 on every cell.
  volume_ = cell_volume_ * static_cast<double>(num_points_);
}

std::size_t TorusBase::shift(std::size_t pt, int axis, int offset) const {
  const int c = coord(pt, axis);
  const int m = ((c + offset) % N_ + N_) % N_;
  return pt + static_cast<std::size_t>(m) * strides_[axis] - static_cast<std::size_t>(c) * strides_[axis];
}

std::array<double, 4> TorusBase::position(std::size_t pt) const {
  std::array<double, 4> x{};
  for (int a = 0; a < 2 * n_; ++a) x[a] = coord(pt, a) * spacing();
  return x;
}

const std::vector<unsigned>& index_sets(int n, int k) {
  static const std::array<std::array<std::vector<unsigned>, 3>, 3> table = [] {
    std::array<std::array<std::vector<unsigned>, 3>, 3> t;
    for (int nn = 0; nn <= 2; ++nn)
      for (int kk = 0; kk <= 2; ++kk) t[nn][kk] = build_sets(nn, kk);
    return t;
  }();
  if (n < 0 || n > 2 || k < 0 || k > 2) throw InvalidInput("index_sets: out of range");
  return table[n][k];
}

int binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  int r = 1;
  for (int i = 0; i < k; ++i) r = r * (n - i) / (i + 1);
  return r;
}

FormField::FormField(const TorusBase& base, int rows, int cols, Bidegree degree)
    : base_(base), rows_(rows), cols_(cols), degree_(degree) {
  if (rows < 1 || cols < 1 || rows > kMaxRank || cols > kMaxRank)
    throw InvalidInput("form field: matrix size must be between 1 and 4");
  if (degree.p < 0 || degree.q < 0 || degree.p > 2 || degree.q > 2)
    throw InvalidInput("form field: bidegree entries must lie in {0,1,2}");
  components_ = binomial(base.dim(), degree.p) * binomial(base.dim(), degree.q);
  block_ = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
  data_.assign(static_cast<std::size_t>(components_) * base.num_points() * block_, cplx(0.0, 0.0));
}

unsigned FormField::dz_mask(int comp) const {
  const int nq = binomial(base_.dim(), degree_.q);
  return index_sets(base_.dim(), degree_.p)[comp / nq];
}

unsigned FormField::dzbar_mask(int comp) const {
  const int nq = binomial(base_.dim(), degree_.q);
  return index_sets(base_.dim(), degree_.q)[comp % nq];
}

int FormField::component_of(unsigned dz, unsigned dzbar) const {
  const auto& ps = index_sets(base_.dim(), degree_.p);
  const auto& qs = index_sets(base_.dim(), degree_.q);
  const auto ip = std::find(ps.begin(), ps.end(), dz);
  const auto iq = std::find(qs.begin(), qs.end(), dzbar);
  if (ip == ps.end() || iq == qs.end()) return -1;
  return static_cast<int>((ip - ps.begin()) * static_cast<long>(qs.size()) + (iq - qs.begin()));
}

bool FormField::same_shape(const FormField& other) const {
  return base_ == other.base_ && rows_ == other.rows_ && cols_ == other.cols_ &&
         degree_ == other.degree_;
}

void FormField::require_same_shape(const FormField& other, const char* what) const {
  if (!same_shape(other)) throw InvalidInput(std::string(what) + ": field shapes differ");
}

FormField& FormField::operator+=(const FormField& other) {
  require_same_shape(other, "add");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

FormField& FormField::operator-=(const FormField& other) {
  require_same_shape(other, "subtract");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

FormField& FormField::operator*=(cplx s) {
  for (auto& v : data_) v *= s;
  return *this;
}

FormField FormField::constant(const TorusBase& base, Bidegree degree, const std::vector<Mat>& comps) {
  if (comps.empty()) throw InvalidInput("constant field: no component values");
  FormField f(base, static_cast<int>(comps[0].rows()), static_cast<int>(comps[0].cols()), degree);
  if (static_cast<int>(comps.size()) != f.components())
    throw InvalidInput("constant field: wrong number of components");
  for (int c = 0; c < f.components(); ++c) {
    if (comps[c].rows() != f.rows() || comps[c].cols() != f.cols())
      throw InvalidInput("constant field: inconsistent component sizes");
    for (std::size_t pt = 0; pt < base.num_points(); ++pt) f.at(c, pt) = comps[c];
  }
  return f;
}

FormField FormField::identity(const TorusBase& base, int rank) {
  return constant(base, {0, 0}, {Mat::Identity(rank, rank)});
}

FormField dbar_flat(const FormField& f) { return complex_derivative(f, Direction::AntiHolomorphic); }

FormField del_flat(const FormField& f) { return complex_derivative(f, Direction::Holomorphic); }

FormField wedge(const FormField& a, const FormField& b) {
  if (!(a.base() == b.base())) throw InvalidInput("wedge: fields live on different grids");
  if (a.cols() != b.rows()) throw InvalidInput("wedge: matrix sizes do not compose");
  const int n = a.base().dim();
  const Bidegree da = a.degree(), db = b.degree();
  if (da.p + db.p > n || da.q + db.q > n)
    throw InvalidInput("wedge: resulting bidegree exceeds the complex dimension");
  FormField out(a.base(), a.rows(), b.cols(), {da.p + db.p, da.q + db.q});
  const std::size_t np = a.base().num_points();
  for (int ca = 0; ca < a.components(); ++ca) {
    const unsigned I = a.dz_mask(ca), J = a.dzbar_mask(ca);
    for (int cb = 0; cb < b.components(); ++cb) {
      const unsigned K = b.dz_mask(cb), L = b.dzbar_mask(cb);
      if ((I & K) || (J & L)) continue;
      int sign = merge_sign(I, K) * merge_sign(J, L);
      if ((std::popcount(J) * std::popcount(K)) % 2 != 0) sign = -sign;
      const int oc = out.component_of(I | K, J | L);
      const double s = sign;
      for (std::size_t pt = 0; pt < np; ++pt) {
        out.at(oc, pt).noalias() += s * (a.at(ca, pt) * b.at(cb, pt));
      }
    }
  }
  return out;
}

FormField wedge_or_empty(const FormField& a, const FormField& b) {
  const int n = a.base().dim();
  const Bidegree da = a.degree(), db = b.degree();
  if (da.p + db.p > n || da.q + db.q > n) {
    if (a.cols() != b.rows()) throw InvalidInput("wedge: matrix sizes do not compose");
    return FormField(a.base(), a.rows(), b.cols(), {da.p + db.p, da.q + db.q});
  }
  return wedge(a, b);
}

FormField dbar_or_empty(const FormField& f) {
  if (f.degree().q + 1 > f.base().dim())
    return FormField(f.base(), f.rows(), f.cols(), {f.degree().p, f.degree().q + 1});
  return dbar_flat(f);
}

FormField del_or_empty(const FormField& f) {
  if (f.degree().p + 1 > f.base().dim())
    return FormField(f.base(), f.rows(), f.cols(), {f.degree().p + 1, f.degree().q});
  return del_flat(f);
}

FormField contract_lambda(const FormField& f) {
  if (!(f.degree() == Bidegree{1, 1})) throw InvalidInput("contract_lambda: input must be a (1,1)-form");
  FormField out(f.base(), f.rows(), f.cols(), {0, 0});
  const cplx coeff(0.0, -2.0);
  for (int i = 0; i < f.base().dim(); ++i) {
    const int c = f.component_of(1u << i, 1u << i);
    for (std::size_t pt = 0; pt < f.base().num_points(); ++pt) out.at(0, pt) += coeff * f.at(c, pt);
  }
  return out;
}

FormField omega_times(const FormField& m) {
  if (!(m.degree() == Bidegree{0, 0})) throw InvalidInput("omega_times: input must be a (0,0)-form");
  FormField out(m.base(), m.rows(), m.cols(), {1, 1});
  const cplx coeff(0.0, 0.5);
  for (int i = 0; i < m.base().dim(); ++i) {
    const int c = out.component_of(1u << i, 1u << i);
    for (std::size_t pt = 0; pt < m.base().num_points(); ++pt) out.at(c, pt) = coeff * m.at(0, pt);
  }
  return out;
}

FormField left_multiply(const FormField& m, const FormField& f) {
  if (!(m.degree() == Bidegree{0, 0})) throw InvalidInput("left_multiply: multiplier must be a (0,0)-form");
  return wedge(m, f);
}

FormField right_multiply(const FormField& f, const FormField& m) {
  if (!(m.degree() == Bidegree{0, 0})) throw InvalidInput("right_multiply: multiplier must be a (0,0)-form");
  return wedge(f, m);
}

FormField zero_like(const FormField& f) { return FormField(f.base(), f.rows(), f.cols(), f.degree()); }

double integrate(std::span<const double> density, const TorusBase& base) {
  if (density.size() != base.num_points()) throw InvalidInput("integrate: density size mismatch");
  // Neumaier summation in grid order.
  double sum = 0.0, comp = 0.0;
  for (double v : density) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v))
      comp += (sum - t) + v;
    else
      comp += (v - t) + sum;
    sum = t;
  }
  return (sum + comp) * base.cell_volume();
}

cplx integrate(std::span<const cplx> density, const TorusBase& base) {
  std::vector<double> re(density.size()), im(density.size());
  for (std::size_t i = 0; i < density.size(); ++i) {
    re[i] = density[i].real();
    im[i] = density[i].imag();
  }
  return {integrate(re, base), integrate(im, base)};
}

double sup_value(std::span<const double> values) {
  double m = 0.0;
  for (double v : values) m = std::max(m, v);
  return m;
}

std::vector<cplx> trace_field(const FormField& f) {
  if (!f.square() || !(f.degree() == Bidegree{0, 0})) throw InvalidInput("trace_field: needs a square (0,0)-form");
  std::vector<cplx> t(f.base().num_points());
  for (std::size_t pt = 0; pt < t.size(); ++pt) t[pt] = f.at(0, pt).trace();
  return t;
}

double sup_abs_entry(const FormField& f) {
  double m = 0.0;
  for (const cplx& v : f.raw()) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace higgsflow
