#include "etsim/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>

#include "etsim/errors.hpp"

namespace etsim {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> entries)
    : rows_(rows), cols_(cols), data_(std::move(entries)) {
  if (data_.size() != rows_ * cols_) {
    throw InvalidInputError("matrix entry count " + std::to_string(data_.size()) +
                            " does not match " + std::to_string(rows_) + "x" +
                            std::to_string(cols_));
  }
  for (double v : data_) {
    if (!std::isfinite(v)) throw InvalidInputError("matrix entry is not finite");
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& row : rows) {
    if (row.size() != cols_) throw InvalidInputError("ragged matrix literal");
    data_.insert(data_.end(), row.begin(), row.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

bool Matrix::is_symmetric(double tol) const {
  if (!is_square()) return false;
  const double scale = std::max(1.0, max_abs());
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = r + 1; c < cols_; ++c)
      if (std::abs((*this)(r, c) - (*this)(c, r)) > tol * scale) return false;
  return true;
}

double Matrix::frobenius_norm() const {
  double s = 0.0;
  for (double v : data_) s += v * v;
  return std::sqrt(s);
}

double Matrix::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

Matrix operator+(const Matrix& a, const Matrix& b) {
  if (a.rows_ != b.rows_ || a.cols_ != b.cols_)
    throw InvalidInputError("matrix sum dimension mismatch");
  Matrix out = a;
  for (std::size_t i = 0; i < out.data_.size(); ++i) out.data_[i] += b.data_[i];
  return out;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
  if (a.rows_ != b.rows_ || a.cols_ != b.cols_)
    throw InvalidInputError("matrix difference dimension mismatch");
  Matrix out = a;
  for (std::size_t i = 0; i < out.data_.size(); ++i) out.data_[i] -= b.data_[i];
  return out;
}

Matrix operator*(const Matrix& a, const Matrix& b) {
  if (a.cols_ != b.rows_) throw InvalidInputError("matrix product dimension mismatch");
  Matrix out(a.rows_, b.cols_);
  for (std::size_t i = 0; i < a.rows_; ++i)
    for (std::size_t k = 0; k < a.cols_; ++k) {
      const double aik = a(i, k);
      for (std::size_t j = 0; j < b.cols_; ++j) out(i, j) += aik * b(k, j);
    }
  return out;
}

Matrix operator*(double s, const Matrix& a) {
  Matrix out = a;
  for (double& v : out.data_) v *= s;
  return out;
}

std::vector<double> operator*(const Matrix& a, std::span<const double> v) {
  if (a.cols() != v.size()) throw InvalidInputError("matrix-vector dimension mismatch");
  std::vector<double> out(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out[i] += a(i, j) * v[j];
  return out;
}

double quadratic_form(const Matrix& m, std::span<const double> x) {
  if (!m.is_square() || m.rows() != x.size())
    throw InvalidInputError("quadratic form dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < x.size(); ++j) s += x[i] * m(i, j) * x[j];
  return s;
}

bool is_hurwitz_polynomial(std::span<const double> coeffs) {
  const std::size_t n = coeffs.size();
  if (n == 0) return false;
  for (double c : coeffs)
    if (!std::isfinite(c)) return false;

  // Full coefficient list, highest power first: 1, c_1, ..., c_n.
  std::vector<double> poly(n + 1);
  poly[0] = 1.0;
  std::copy(coeffs.begin(), coeffs.end(), poly.begin() + 1);

  const std::size_t width = n / 2 + 1;
  std::vector<double> prev(width, 0.0), cur(width, 0.0);
  for (std::size_t j = 0; j < width; ++j) {
    if (2 * j <= n) prev[j] = poly[2 * j];
    if (2 * j + 1 <= n) cur[j] = poly[2 * j + 1];
  }
  for (std::size_t row = 1; row <= n; ++row) {
    if (!(cur[0] > 0.0)) return false;
    if (row == n) break;
    std::vector<double> next(width, 0.0);
    for (std::size_t j = 0; j + 1 < width; ++j)
      next[j] = (cur[0] * prev[j + 1] - prev[0] * cur[j + 1]) / cur[0];
    prev = std::move(cur);
    cur = std::move(next);
  }
  return true;
}

HurwitzCoeffs::HurwitzCoeffs(std::vector<double> coeffs) : coeffs_(std::move(coeffs)) {
  if (coeffs_.empty()) throw InvalidInputError("Hurwitz coefficient list is empty");
  for (std::size_t k = 0; k < coeffs_.size(); ++k) {
    if (!std::isfinite(coeffs_[k]) || coeffs_[k] <= 0.0) {
      throw InvalidInputError("Hurwitz coefficient " + std::to_string(k + 1) +
                              " must be positive, got " + std::to_string(coeffs_[k]));
    }
  }
  if (!is_hurwitz_polynomial(coeffs_))
    throw InvalidInputError("coefficients do not define a Hurwitz polynomial");
}

ObserverCompanion build_observer_companion(const HurwitzCoeffs& a) {
  const std::size_t n = a.size();
  ObserverCompanion out{Matrix(n, n), std::vector<double>(a.values().begin(), a.values().end())};
  for (std::size_t k = 0; k < n; ++k) {
    out.a_e(k, 0) = -a[k];
    if (k + 1 < n) out.a_e(k, k + 1) += 1.0;
  }
  return out;
}

ControllerCompanion build_controller_companion(const HurwitzCoeffs& b) {
  const std::size_t n = b.size();
  ControllerCompanion out{Matrix(n, n), std::vector<double>(n, 0.0),
                          std::vector<double>(n, 0.0)};
  for (std::size_t k = 0; k + 1 < n; ++k) out.a_z(k, k + 1) = 1.0;
  for (std::size_t j = 0; j < n; ++j) out.a_z(n - 1, j) -= b[n - 1 - j];
  out.r_z[n - 1] = 1.0;
  out.d_z[0] = 1.0;
  return out;
}

std::vector<double> controller_coupling_vector(const HurwitzCoeffs& a, double l2) {
  std::vector<double> g(a.size(), 0.0);
  for (std::size_t k = 2; k <= a.size(); ++k)
    g[k - 1] = a.at1(k) / std::pow(l2, static_cast<double>(k - 2));
  return g;
}

namespace {

// LU factorisation with partial pivoting, kept so a refinement pass can reuse it.
class LuSolver {
 public:
  explicit LuSolver(Matrix m) : lu_(std::move(m)), perm_(lu_.rows()) {
    const std::size_t n = lu_.rows();
    std::iota(perm_.begin(), perm_.end(), std::size_t{0});
    const double scale = std::max(lu_.max_abs(), 1e-300);
    for (std::size_t col = 0; col < n; ++col) {
      std::size_t pivot = col;
      for (std::size_t r = col + 1; r < n; ++r)
        if (std::abs(lu_(r, col)) > std::abs(lu_(pivot, col))) pivot = r;
      if (std::abs(lu_(pivot, col)) <= 1e-14 * scale)
        throw NumericalError("singular linear system in Lyapunov solve");
      if (pivot != col) {
        for (std::size_t c = 0; c < n; ++c) std::swap(lu_(pivot, c), lu_(col, c));
        std::swap(perm_[pivot], perm_[col]);
      }
      for (std::size_t r = col + 1; r < n; ++r) {
        const double f = lu_(r, col) / lu_(col, col);
        lu_(r, col) = f;
        for (std::size_t c = col + 1; c < n; ++c) lu_(r, c) -= f * lu_(col, c);
      }
    }
  }

  std::vector<double> solve(std::span<const double> rhs) const {
    const std::size_t n = lu_.rows();
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = rhs[perm_[i]];
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < i; ++k) x[i] -= lu_(i, k) * x[k];
    for (std::size_t i = n; i-- > 0;) {
      for (std::size_t k = i + 1; k < n; ++k) x[i] -= lu_(i, k) * x[k];
      x[i] /= lu_(i, i);
    }
    return x;
  }

 private:
  Matrix lu_;
  std::vector<std::size_t> perm_;
};

Matrix lyapunov_operator(const Matrix& a) {
  const std::size_t n = a.rows();
  Matrix op(n * n, n * n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) {
      const std::size_t eq = r * n + c;
      for (std::size_t k = 0; k < n; ++k) {
        op(eq, k * n + c) += a(k, r);  // (A^T X)_{rc}
        op(eq, r * n + k) += a(k, c);  // (X A)_{rc}
      }
    }
  return op;
}

}  // namespace

double lyapunov_residual(const Matrix& a, const Matrix& x) {
  return (a.transposed() * x + x * a + Matrix::identity(a.rows())).frobenius_norm();
}

Matrix solve_lyapunov(const Matrix& a) {
  if (!a.is_square() || a.rows() == 0)
    throw InvalidInputError("Lyapunov solve needs a non-empty square matrix");
  if (!is_hurwitz(a)) throw NoSolutionError("Lyapunov solve: matrix is not Hurwitz");

  const std::size_t n = a.rows();
  const Matrix op = lyapunov_operator(a);
  const LuSolver lu(op);

  std::vector<double> rhs(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) rhs[i * n + i] = -1.0;
  std::vector<double> vec_x = lu.solve(rhs);

  // One pass of iterative refinement.
  const std::vector<double> applied = op * std::span<const double>(vec_x);
  std::vector<double> defect(n * n);
  for (std::size_t i = 0; i < n * n; ++i) defect[i] = rhs[i] - applied[i];
  const std::vector<double> correction = lu.solve(defect);
  for (std::size_t i = 0; i < n * n; ++i) vec_x[i] += correction[i];

  Matrix x(n, n, std::move(vec_x));
  Matrix sym = 0.5 * (x + x.transposed());
  if (const double res = lyapunov_residual(a, sym); !(res <= 1e-10)) {
    throw NumericalError("Lyapunov residual " + std::to_string(res) + " exceeds 1e-10");
  }
  return sym;
}

std::vector<double> symmetric_eigenvalues(const Matrix& m) {
  if (!m.is_symmetric()) throw InvalidInputError("symmetric eigensolver given asymmetric matrix");
  const std::size_t n = m.rows();
  Matrix a = m;
  const double scale = std::max(1.0, a.frobenius_norm());

  auto off_norm = [&] {
    double s = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = 0; q < n; ++q)
        if (p != q) s += a(p, q) * a(p, q);
    return std::sqrt(s);
  };

  for (int sweep = 0; sweep < 100 && off_norm() > 1e-12 * scale; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
  }

  std::vector<double> eig(n);
  for (std::size_t i = 0; i < n; ++i) eig[i] = a(i, i);
  std::sort(eig.begin(), eig.end());
  return eig;
}

double spectral_norm(const Matrix& m) {
  if (!m.is_square() || !m.is_symmetric())
    throw InvalidInputError("spectral_norm requires a square symmetric matrix");
  double best = 0.0;
  for (double v : symmetric_eigenvalues(m)) best = std::max(best, std::abs(v));
  return best;
}

std::vector<std::complex<double>> eigenvalues(const Matrix& input) {
  if (!input.is_square()) throw InvalidInputError("eigenvalues need a square matrix");
  const int n = static_cast<int>(input.rows());
  if (n == 0) return {};

  // 1-based working copy to keep the classic Hessenberg/QR index arithmetic legible.
  std::vector<double> buf(static_cast<std::size_t>((n + 1) * (n + 1)), 0.0);
  auto A = [&](int i, int j) -> double& {
    return buf[static_cast<std::size_t>(i * (n + 1) + j)];
  };
  for (int i = 1; i <= n; ++i)
    for (int j = 1; j <= n; ++j) A(i, j) = input(i - 1, j - 1);

  // Reduction to upper Hessenberg form by stabilised elimination.
  for (int m = 2; m < n; ++m) {
    double x = 0.0;
    int i = m;
    for (int j = m; j <= n; ++j)
      if (std::abs(A(j, m - 1)) > std::abs(x)) {
        x = A(j, m - 1);
        i = j;
      }
    if (i != m) {
      for (int j = m - 1; j <= n; ++j) std::swap(A(i, j), A(m, j));
      for (int j = 1; j <= n; ++j) std::swap(A(j, i), A(j, m));
    }
    if (x != 0.0) {
      for (i = m + 1; i <= n; ++i) {
        double y = A(i, m - 1);
        if (y != 0.0) {
          y /= x;
          A(i, m - 1) = y;
          for (int j = m; j <= n; ++j) A(i, j) -= y * A(m, j);
          for (int j = 1; j <= n; ++j) A(j, m) += y * A(j, i);
        }
      }
    }
  }
  for (int i = 3; i <= n; ++i)
    for (int j = 1; j <= i - 2; ++j) A(i, j) = 0.0;

  std::vector<double> wr(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<double> wi(static_cast<std::size_t>(n + 1), 0.0);
  double anorm = 0.0;
  for (int i = 1; i <= n; ++i)
    for (int j = std::max(i - 1, 1); j <= n; ++j) anorm += std::abs(A(i, j));

  int nn = n;
  double t = 0.0;
  double p = 0, q = 0, r = 0, s = 0, w = 0, x = 0, y = 0, z = 0;
  while (nn >= 1) {
    int its = 0;
    int l = 0;
    do {
      for (l = nn; l >= 2; --l) {
        s = std::abs(A(l - 1, l - 1)) + std::abs(A(l, l));
        if (s == 0.0) s = anorm;
        if (std::abs(A(l, l - 1)) + s == s) {
          A(l, l - 1) = 0.0;
          break;
        }
      }
      x = A(nn, nn);
      if (l == nn) {
        wr[nn] = x + t;
        wi[nn--] = 0.0;
      } else {
        y = A(nn - 1, nn - 1);
        w = A(nn, nn - 1) * A(nn - 1, nn);
        if (l == nn - 1) {
          p = 0.5 * (y - x);
          q = p * p + w;
          z = std::sqrt(std::abs(q));
          x += t;
          if (q >= 0.0) {
            z = p + std::copysign(z, p);
            wr[nn - 1] = wr[nn] = x + z;
            if (z != 0.0) wr[nn] = x - w / z;
            wi[nn - 1] = wi[nn] = 0.0;
          } else {
            wr[nn - 1] = wr[nn] = x + p;
            wi[nn - 1] = -(wi[nn] = z);
          }
          nn -= 2;
        } else {
          if (its == 60) throw NumericalError("QR eigenvalue iteration did not converge");
          if (its == 10 || its == 20 || its == 40) {
            t += x;
            for (int i = 1; i <= nn; ++i) A(i, i) -= x;
            s = std::abs(A(nn, nn - 1)) + std::abs(A(nn - 1, nn - 2));
            y = x = 0.75 * s;
            w = -0.4375 * s * s;
          }
          ++its;
          int m = nn - 2;
          for (; m >= l; --m) {
            z = A(m, m);
            r = x - z;
            s = y - z;
            p = (r * s - w) / A(m + 1, m) + A(m, m + 1);
            q = A(m + 1, m + 1) - z - r - s;
            r = A(m + 2, m + 1);
            s = std::abs(p) + std::abs(q) + std::abs(r);
            p /= s;
            q /= s;
            r /= s;
            if (m == l) break;
            const double u = std::abs(A(m, m - 1)) * (std::abs(q) + std::abs(r));
            const double v =
                std::abs(p) * (std::abs(A(m - 1, m - 1)) + std::abs(z) + std::abs(A(m + 1, m + 1)));
            if (u + v == v) break;
          }
          for (int i = m + 2; i <= nn; ++i) {
            A(i, i - 2) = 0.0;
            if (i != m + 2) A(i, i - 3) = 0.0;
          }
          for (int k = m; k <= nn - 1; ++k) {
            if (k != m) {
              p = A(k, k - 1);
              q = A(k + 1, k - 1);
              r = 0.0;
              if (k != nn - 1) r = A(k + 2, k - 1);
              if ((x = std::abs(p) + std::abs(q) + std::abs(r)) != 0.0) {
                p /= x;
                q /= x;
                r /= x;
              }
            }
            if ((s = std::copysign(std::sqrt(p * p + q * q + r * r), p)) != 0.0) {
              if (k == m) {
                if (l != m) A(k, k - 1) = -A(k, k - 1);
              } else {
                A(k, k - 1) = -s * x;
              }
              p += s;
              x = p / s;
              y = q / s;
              z = r / s;
              q /= p;
              r /= p;
              for (int j = k; j <= nn; ++j) {
                p = A(k, j) + q * A(k + 1, j);
                if (k != nn - 1) {
                  p += r * A(k + 2, j);
                  A(k + 2, j) -= p * z;
                }
                A(k + 1, j) -= p * y;
                A(k, j) -= p * x;
              }
              const int mmin = nn < k + 3 ? nn : k + 3;
              for (int i = l; i <= mmin; ++i) {
                p = x * A(i, k) + y * A(i, k + 1);
                if (k != nn - 1) {
                  p += z * A(i, k + 2);
                  A(i, k + 2) -= p * r;
                }
                A(i, k + 1) -= p * q;
                A(i, k) -= p;
              }
            }
          }
        }
      }
    } while (l < nn - 1);
  }

  std::vector<std::complex<double>> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 1; i <= n; ++i) out.emplace_back(wr[i], wi[i]);
  return out;
}

bool is_hurwitz(const Matrix& a) {
  if (!a.is_square() || a.rows() == 0) return false;
  for (const auto& ev : eigenvalues(a))
    if (!(ev.real() < -1e-12)) return false;
  return true;
}

std::vector<double> characteristic_polynomial(const Matrix& a) {
  if (!a.is_square()) throw InvalidInputError("characteristic polynomial needs a square matrix");
  const std::size_t n = a.rows();
  std::vector<double> c(n + 1, 0.0);
  c[0] = 1.0;
  Matrix m(n, n);
  for (std::size_t k = 1; k <= n; ++k) {
    m = a * m + c[k - 1] * Matrix::identity(n);
    const Matrix am = a * m;
    double trace = 0.0;
    for (std::size_t i = 0; i < n; ++i) trace += am(i, i);
    c[k] = -trace / static_cast<double>(k);
  }
  return {c.begin() + 1, c.end()};
}

Matrix expm(const Matrix& a) {
  if (!a.is_square()) throw InvalidInputError("expm needs a square matrix");
  const std::size_t n = a.rows();
  double norm1 = 0.0;
  for (std::size_t c = 0; c < n; ++c) {
    double col = 0.0;
    for (std::size_t r = 0; r < n; ++r) col += std::abs(a(r, c));
    norm1 = std::max(norm1, col);
  }
  int squarings = 0;
  if (norm1 > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm1 / 0.5)));
  const Matrix b = std::ldexp(1.0, -squarings) * a;

  Matrix result = Matrix::identity(n);
  Matrix term = Matrix::identity(n);
  for (int k = 1; k <= 24; ++k) {
    term = (1.0 / k) * (term * b);
    result = result + term;
  }
  for (int i = 0; i < squarings; ++i) result = result * result;
  return result;
}

}  // namespace etsim
