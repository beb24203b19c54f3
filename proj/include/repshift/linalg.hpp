#pragma once

// Dense linear-algebra primitives shared by every other module. All values are
// double precision; the bound chains multiply several near-one factors and
// single precision drifts visibly.

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace repshift {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kSpectralTol = 1e-10;
inline constexpr int kSpectralMaxIter = 10000;

/// Largest singular value by power iteration on mᵀm.
///
/// Starts from the normalized all-ones vector so the result is reproducible
/// without an RNG. Convergence is judged on the Rayleigh quotient: the
/// remaining error is extrapolated from the observed contraction rate of
/// successive changes and must drop below `tol` relative.
/// Throws ConvergenceError (carrying the last estimate) after `max_iter`.
double spectral_norm(const Matrix& m, double tol = kSpectralTol, int max_iter = kSpectralMaxIter);

double frobenius_norm(const Matrix& m);

struct AlignmentFit {
    Matrix transform;   // target.rows × source.rows
    double residual{};  // ‖T·source − target‖_F
};

/// Ridge used when the caller does not pick one: 1e-10 · trace(S·Sᵀ) / rows.
double default_alignment_ridge(const Matrix& source);

/// T minimizing ‖T·source − target‖²_F + ridge‖T‖²_F, via the closed form
/// T = target·sourceᵀ·(source·sourceᵀ + ridge·I)⁻¹ and a Cholesky solve.
/// Throws NumericalError when the normal matrix is singular (ridge = 0 on a
/// rank-deficient source).
AlignmentFit solve_right_alignment(const Matrix& source, const Matrix& target, double ridge);

/// Exact minimizer of c1²‖X‖²_F + c2²‖X − a‖²_F, i.e. c2²/(c1²+c2²)·a.
Matrix shrinkage_minimizer(const Matrix& a, double c1, double c2);

/// Polynomial stored in a rescaled abscissa u = (x − shift) / scale.
struct Polynomial {
    std::vector<double> coeffs;  // ascending powers of u
    double shift = 0.0;
    double scale = 1.0;

    int degree() const { return static_cast<int>(coeffs.size()) - 1; }
    double operator()(double x) const;
    /// d/dx, kept in the same rescaled domain.
    Polynomial derivative() const;
    /// Coefficients of the same polynomial in powers of the raw x.
    std::vector<double> monomial_coefficients() const;
};

/// Least-squares polynomial fit. Abscissae are mapped affinely onto [0, 1]
/// before forming the normal equations (ridge 1e-12) to keep the Vandermonde
/// system conditioned for long curves.
Polynomial polyfit(std::span<const double> xs, std::span<const double> ys, int degree);

double residual_sum_of_squares(const Polynomial& p, std::span<const double> xs,
                               std::span<const double> ys);

/// Smallest x in the open interval (lo, hi) where p' crosses zero from + to −.
/// Uses a 1024-cell grid on p' and bisection down to |p'| ≤ 1e-10.
std::optional<double> first_local_max(const Polynomial& p, double lo, double hi);

struct LinearFit {
    double slope{};
    double intercept{};
    double r2{};
    bool constant_y = false;  // r2 is 1 if the fit is exact, else 0
};

/// Ordinary least squares y ≈ slope·x + intercept with R² = 1 − RSS/TSS.
LinearFit linreg_r2(std::span<const double> xs, std::span<const double> ys);

/// Pearson correlation; NaN when either series is constant.
double pearson(std::span<const double> xs, std::span<const double> ys);

double median(std::vector<double> values);

}  // namespace repshift
