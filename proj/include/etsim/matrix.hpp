#pragma once

// Small dense matrices and the handful of linear-algebra routines the gain
// design needs: companion forms, Lyapunov solves, symmetric spectra and
// Hurwitz tests. Sizes are tiny (n <= ~6), so everything is O(n^3) or worse
// without apology.

#include <complex>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace etsim {

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  // Entries in row-major order; throws InvalidInputError on a size mismatch
  // or a non-finite entry.
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> entries);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool is_square() const { return rows_ == cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  std::span<const double> entries() const { return data_; }

  Matrix transposed() const;
  bool is_symmetric(double tol = 1e-12) const;
  double frobenius_norm() const;
  double max_abs() const;

  friend Matrix operator+(const Matrix& a, const Matrix& b);
  friend Matrix operator-(const Matrix& a, const Matrix& b);
  friend Matrix operator*(const Matrix& a, const Matrix& b);
  friend Matrix operator*(double s, const Matrix& a);
  friend bool operator==(const Matrix& a, const Matrix& b) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

std::vector<double> operator*(const Matrix& a, std::span<const double> v);

// x^T M x
double quadratic_form(const Matrix& m, std::span<const double> x);

// Positive coefficients c_1..c_n of the monic polynomial
// s^n + c_1 s^{n-1} + ... + c_n, verified Hurwitz at construction.
class HurwitzCoeffs {
 public:
  explicit HurwitzCoeffs(std::vector<double> coeffs);

  std::size_t size() const { return coeffs_.size(); }
  double operator[](std::size_t k) const { return coeffs_[k]; }
  // 1-based access matching the textbook indexing c_1..c_n.
  double at1(std::size_t k) const { return coeffs_.at(k - 1); }
  std::span<const double> values() const { return coeffs_; }

  friend bool operator==(const HurwitzCoeffs&, const HurwitzCoeffs&) = default;

 private:
  std::vector<double> coeffs_;
};

// Routh-Hurwitz test for s^n + c_1 s^{n-1} + ... + c_n. Coefficients need
// not be positive; any sign change or zero in the first column is "false".
bool is_hurwitz_polynomial(std::span<const double> coeffs);

struct ObserverCompanion {
  Matrix a_e;                // first column -a_k, superdiagonal identity
  std::vector<double> g_e;   // (a_1, ..., a_n)
};

struct ControllerCompanion {
  Matrix a_z;                // bottom row (-b_n, ..., -b_1), superdiagonal identity
  std::vector<double> r_z;   // e_n
  std::vector<double> d_z;   // e_1
};

ObserverCompanion build_observer_companion(const HurwitzCoeffs& a);
ControllerCompanion build_controller_companion(const HurwitzCoeffs& b);

// G_z = (0, a_2, a_3 / L2, ..., a_n / L2^{n-2}); the observer coefficients
// enter the z-dynamics through this vector.
std::vector<double> controller_coupling_vector(const HurwitzCoeffs& a, double l2);

// Solves A^T X + X A = -I for symmetric positive-definite X by vectorising
// into an n^2 x n^2 system with partial-pivot elimination.
// Throws NoSolutionError when A is not Hurwitz, NumericalError when the
// linear system is singular or the residual exceeds 1e-10.
Matrix solve_lyapunov(const Matrix& a);

// ||A^T X + X A + I||_F
double lyapunov_residual(const Matrix& a, const Matrix& x);

// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
std::vector<double> symmetric_eigenvalues(const Matrix& m);

// Largest |eigenvalue| of a symmetric matrix. Throws InvalidInputError for
// asymmetric input.
double spectral_norm(const Matrix& m);

// Eigenvalues of a general real square matrix (Hessenberg reduction followed
// by shifted QR).
std::vector<std::complex<double>> eigenvalues(const Matrix& a);

// True iff every eigenvalue has real part < -1e-12.
bool is_hurwitz(const Matrix& a);

// Coefficients c_1..c_n of det(sI - A) = s^n + c_1 s^{n-1} + ... + c_n
// (Faddeev-LeVerrier).
std::vector<double> characteristic_polynomial(const Matrix& a);

// Matrix exponential by scaling and squaring of a truncated Taylor series.
Matrix expm(const Matrix& a);

}  // namespace etsim
