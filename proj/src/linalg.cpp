#include "repshift/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "repshift/error.hpp"

namespace repshift {

namespace {

void require_finite(const Matrix& m, const char* what) {
    if (!m.allFinite()) {
        throw NumericalError(std::string(what) + ": matrix has non-finite entries");
    }
}

double horner(const std::vector<double>& c, double u) {
    double acc = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * u + *it;
    return acc;
}

}  // namespace

double spectral_norm(const Matrix& m, double tol, int max_iter) {
    if (m.rows() < 1 || m.cols() < 1) throw DimensionError("spectral_norm: empty matrix");
    if (!(tol > 0.0) || max_iter < 1) throw Error("spectral_norm: tol must be > 0 and max_iter >= 1");
    require_finite(m, "spectral_norm");
    if (m.squaredNorm() == 0.0) return 0.0;

    auto gram_apply = [&m](const Vector& v) -> Vector { return m.transpose() * (m * v); };

    Vector v = Vector::Ones(m.cols()).normalized();
    Vector w = gram_apply(v);
    if (w.squaredNorm() == 0.0) {
        // All-ones lies in the null space; fall back to the heaviest column.
        Eigen::Index j = 0;
        m.colwise().squaredNorm().maxCoeff(&j);
        v = Vector::Unit(m.cols(), j);
        w = gram_apply(v);
    }
    double theta = v.dot(w);
    double prev_delta = std::numeric_limits<double>::infinity();
    const double eps = std::numeric_limits<double>::epsilon();

    for (int iter = 0; iter < max_iter; ++iter) {
        v = w / w.norm();
        w = gram_apply(v);
        const double next = v.dot(w);
        const double delta = std::abs(next - theta);
        theta = next;

        if (delta <= 8.0 * eps * theta) return std::sqrt(theta);
        if (std::isfinite(prev_delta) && prev_delta > 0.0) {
            const double rate = std::min(delta / prev_delta, 1.0 - 1e-12);
            const double remaining = delta * rate / (1.0 - rate);
            if (remaining <= tol * theta) return std::sqrt(theta);
        }
        prev_delta = delta;
    }
    const double residual = (w - theta * v).norm() / theta;
    std::ostringstream msg;
    msg << "spectral_norm: power iteration did not converge in " << max_iter
        << " iterations (estimate " << std::sqrt(theta) << ", relative residual " << residual << ")";
    throw ConvergenceError(msg.str(), std::sqrt(theta), residual);
}

double frobenius_norm(const Matrix& m) {
    require_finite(m, "frobenius_norm");
    return m.norm();
}

double default_alignment_ridge(const Matrix& source) {
    if (source.rows() == 0) return 0.0;
    return 1e-10 * source.squaredNorm() / static_cast<double>(source.rows());
}

AlignmentFit solve_right_alignment(const Matrix& source, const Matrix& target, double ridge) {
    if (source.cols() != target.cols()) {
        std::ostringstream msg;
        msg << "solve_right_alignment: source has " << source.cols() << " columns, target has "
            << target.cols();
        throw DimensionError(msg.str());
    }
    if (ridge < 0.0) throw Error("solve_right_alignment: ridge must be >= 0");
    require_finite(source, "solve_right_alignment(source)");
    require_finite(target, "solve_right_alignment(target)");

    const Eigen::Index n = source.rows();
    Matrix gram = source * source.transpose();
    gram.diagonal().array() += ridge;

    Eigen::LLT<Matrix> llt(gram);
    bool singular = llt.info() != Eigen::Success;
    if (!singular) {
        const Vector pivots = Matrix(llt.matrixL()).diagonal().array().square();
        const double max_diag = gram.diagonal().maxCoeff();
        singular = !(pivots.minCoeff() > static_cast<double>(n) *
                                              std::numeric_limits<double>::epsilon() * max_diag);
    }
    if (singular) {
        throw NumericalError(
            "solve_right_alignment: normal matrix source*source^T is singular; use ridge > 0");
    }
    AlignmentFit fit;
    fit.transform = llt.solve(source * target.transpose()).transpose();
    fit.residual = (fit.transform * source - target).norm();
    return fit;
}

Matrix shrinkage_minimizer(const Matrix& a, double c1, double c2) {
    if (!(c1 > 0.0) || !(c2 > 0.0)) throw Error("shrinkage_minimizer: c1 and c2 must be positive");
    const double s = c2 * c2 / (c1 * c1 + c2 * c2);
    return s * a;
}

double Polynomial::operator()(double x) const { return horner(coeffs, (x - shift) / scale); }

Polynomial Polynomial::derivative() const {
    Polynomial d;
    d.shift = shift;
    d.scale = scale;
    if (coeffs.size() <= 1) {
        d.coeffs = {0.0};
        return d;
    }
    d.coeffs.resize(coeffs.size() - 1);
    for (std::size_t j = 1; j < coeffs.size(); ++j) {
        d.coeffs[j - 1] = static_cast<double>(j) * coeffs[j] / scale;
    }
    return d;
}

std::vector<double> Polynomial::monomial_coefficients() const {
    // Σ_j c_j ((x − s)/a)^j expanded binomially.
    const std::size_t n = coeffs.size();
    std::vector<double> out(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        const double cj = coeffs[j] / std::pow(scale, static_cast<double>(j));
        double binom = 1.0;
        for (std::size_t i = 0; i <= j; ++i) {
            if (i > 0) binom = binom * static_cast<double>(j - i + 1) / static_cast<double>(i);
            out[i] += cj * binom * std::pow(-shift, static_cast<double>(j - i));
        }
    }
    return out;
}

Polynomial polyfit(std::span<const double> xs, std::span<const double> ys, int degree) {
    if (degree < 0) throw Error("polyfit: degree must be >= 0");
    if (xs.size() != ys.size()) throw DimensionError("polyfit: xs and ys differ in length");
    const std::set<double> distinct(xs.begin(), xs.end());
    if (distinct.size() < static_cast<std::size_t>(degree) + 1) {
        std::ostringstream msg;
        msg << "polyfit: underdetermined, " << distinct.size() << " distinct abscissae for degree "
            << degree;
        throw NumericalError(msg.str());
    }
    const auto [lo_it, hi_it] = std::minmax_element(xs.begin(), xs.end());
    Polynomial p;
    p.shift = *lo_it;
    p.scale = *hi_it - *lo_it;

    const auto n = static_cast<Eigen::Index>(xs.size());
    const Eigen::Index cols = degree + 1;
    Matrix vander(n, cols);
    Vector rhs(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double u = (xs[static_cast<std::size_t>(i)] - p.shift) / p.scale;
        double pw = 1.0;
        for (Eigen::Index j = 0; j < cols; ++j) {
            vander(i, j) = pw;
            pw *= u;
        }
        rhs(i) = ys[static_cast<std::size_t>(i)];
    }
    Matrix normal = vander.transpose() * vander;
    normal.diagonal().array() += 1e-12;
    const Vector c = normal.ldlt().solve(vander.transpose() * rhs);
    p.coeffs.assign(c.data(), c.data() + c.size());
    return p;
}

double residual_sum_of_squares(const Polynomial& p, std::span<const double> xs,
                               std::span<const double> ys) {
    double rss = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double r = ys[i] - p(xs[i]);
        rss += r * r;
    }
    return rss;
}

std::optional<double> first_local_max(const Polynomial& p, double lo, double hi) {
    if (!(lo < hi)) throw Error("first_local_max: need lo < hi");
    constexpr int kCells = 1024;
    const Polynomial dp = p.derivative();
    std::vector<double> grid(kCells + 1);
    std::vector<double> slope(kCells + 1);
    for (int i = 0; i <= kCells; ++i) {
        grid[i] = lo + (hi - lo) * static_cast<double>(i) / kCells;
        slope[i] = dp(grid[i]);
    }
    for (int i = 0; i < kCells; ++i) {
        if (!(slope[i] > 0.0)) continue;
        if (slope[i + 1] == 0.0 && i + 1 < kCells) {
            // Exact grid hit; it is a maximum if the slope turns negative next.
            int j = i + 2;
            while (j <= kCells && slope[j] == 0.0) ++j;
            if (j <= kCells && slope[j] < 0.0) return grid[i + 1];
            continue;
        }
        if (!(slope[i + 1] < 0.0)) continue;
        double a = grid[i];
        double b = grid[i + 1];
        double mid = 0.5 * (a + b);
        for (int it = 0; it < 200; ++it) {
            mid = 0.5 * (a + b);
            const double g = dp(mid);
            if (std::abs(g) <= 1e-10) break;
            if (g > 0.0) {
                a = mid;
            } else {
                b = mid;
            }
            if (b - a <= 1e-15 * std::max(1.0, std::abs(mid))) break;
        }
        return mid;
    }
    return std::nullopt;
}

LinearFit linreg_r2(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) throw DimensionError("linreg_r2: xs and ys differ in length");
    if (xs.size() < 2) throw Error("linreg_r2: need at least two points");
    const double n = static_cast<double>(xs.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0;
    double sxy = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    if (sxx == 0.0) throw NumericalError("linreg_r2: all abscissae are equal");

    LinearFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double rss = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double r = ys[i] - (fit.slope * xs[i] + fit.intercept);
        rss += r * r;
    }
    if (syy == 0.0) {
        fit.constant_y = true;
        fit.r2 = rss == 0.0 ? 1.0 : 0.0;
        return fit;
    }
    fit.r2 = std::clamp(1.0 - rss / syy, 0.0, 1.0);
    return fit;
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) throw DimensionError("pearson: series differ in length");
    if (xs.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    const double n = static_cast<double>(xs.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0;
    double syy = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        syy += (ys[i] - my) * (ys[i] - my);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return sxy / std::sqrt(sxx * syy);
}

double median(std::vector<double> values) {
    if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(values.begin(), values.end());
    const std::size_t mid = values.size() / 2;
    if (values.size() % 2 == 1) return values[mid];
    return 0.5 * (values[mid - 1] + values[mid]);
}

}  // namespace repshift
