#pragma once

// Small dense real matrix kernel for the 4x4 state matrices and the 5x5
// augmented matrices used for exact affine propagation.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <string>

#include "zsource/error.hpp"

namespace zsource {

template <std::size_t N>
using Vec = std::array<double, N>;

using Vec4 = Vec<4>;

/**
 * Fixed-size row-major square matrix with value semantics.
 */
template <std::size_t N>
class Mat {
public:
    static_assert(N >= 1 && N <= 8, "Mat is intended for small dense matrices");
    static constexpr std::size_t dim = N;

    constexpr Mat() = default;

    /// Row-major initializer; missing trailing entries are zero.
    constexpr Mat(std::initializer_list<double> rowmajor) {
        std::size_t k = 0;
        for (double v : rowmajor) {
            if (k >= N * N) break;
            a_[k++] = v;
        }
    }

    static constexpr Mat zero() { return Mat{}; }

    static constexpr Mat identity() {
        Mat m;
        for (std::size_t i = 0; i < N; ++i) m(i, i) = 1.0;
        return m;
    }

    static constexpr Mat diag(const Vec<N>& d) {
        Mat m;
        for (std::size_t i = 0; i < N; ++i) m(i, i) = d[i];
        return m;
    }

    constexpr double& operator()(std::size_t i, std::size_t j) { return a_[i * N + j]; }
    constexpr double operator()(std::size_t i, std::size_t j) const { return a_[i * N + j]; }

    constexpr const std::array<double, N * N>& data() const { return a_; }

    constexpr Mat transpose() const {
        Mat t;
        for (std::size_t i = 0; i < N; ++i)
            for (std::size_t j = 0; j < N; ++j) t(j, i) = (*this)(i, j);
        return t;
    }

    constexpr Mat& operator+=(const Mat& o) {
        for (std::size_t k = 0; k < N * N; ++k) a_[k] += o.a_[k];
        return *this;
    }
    constexpr Mat& operator-=(const Mat& o) {
        for (std::size_t k = 0; k < N * N; ++k) a_[k] -= o.a_[k];
        return *this;
    }
    constexpr Mat& operator*=(double s) {
        for (auto& v : a_) v *= s;
        return *this;
    }

    friend constexpr Mat operator+(Mat a, const Mat& b) { return a += b; }
    friend constexpr Mat operator-(Mat a, const Mat& b) { return a -= b; }
    friend constexpr Mat operator-(Mat a) { return a *= -1.0; }
    friend constexpr Mat operator*(Mat a, double s) { return a *= s; }
    friend constexpr Mat operator*(double s, Mat a) { return a *= s; }

    friend constexpr Mat operator*(const Mat& a, const Mat& b) {
        Mat c;
        for (std::size_t i = 0; i < N; ++i)
            for (std::size_t k = 0; k < N; ++k) {
                const double aik = a(i, k);
                if (aik == 0.0) continue;
                for (std::size_t j = 0; j < N; ++j) c(i, j) += aik * b(k, j);
            }
        return c;
    }

    friend constexpr Vec<N> operator*(const Mat& a, const Vec<N>& x) {
        Vec<N> y{};
        for (std::size_t i = 0; i < N; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < N; ++j) s += a(i, j) * x[j];
            y[i] = s;
        }
        return y;
    }

    friend constexpr bool operator==(const Mat&, const Mat&) = default;

private:
    std::array<double, N * N> a_{};
};

using Mat4 = Mat<4>;
using Mat5 = Mat<5>;

// ---------------------------------------------------------------------------
// Vector helpers
// ---------------------------------------------------------------------------

template <std::size_t N>
constexpr Vec<N> operator+(Vec<N> a, const Vec<N>& b) {
    for (std::size_t i = 0; i < N; ++i) a[i] += b[i];
    return a;
}

template <std::size_t N>
constexpr Vec<N> operator-(Vec<N> a, const Vec<N>& b) {
    for (std::size_t i = 0; i < N; ++i) a[i] -= b[i];
    return a;
}

template <std::size_t N>
constexpr Vec<N> operator*(double s, Vec<N> a) {
    for (auto& v : a) v *= s;
    return a;
}

template <std::size_t N>
constexpr double dot(const Vec<N>& a, const Vec<N>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < N; ++i) s += a[i] * b[i];
    return s;
}

template <std::size_t N>
double norm(const Vec<N>& a) {
    // hypot-style scaling is unnecessary at the magnitudes the simulator admits.
    return std::sqrt(dot(a, a));
}

template <std::size_t N>
constexpr Vec<N> unit_vector(std::size_t i) {
    Vec<N> e{};
    e[i] = 1.0;
    return e;
}

template <std::size_t N>
bool all_finite(const Vec<N>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

template <std::size_t N>
bool all_finite(const Mat<N>& m) {
    return std::all_of(m.data().begin(), m.data().end(), [](double x) { return std::isfinite(x); });
}

/// x' S x
template <std::size_t N>
constexpr double quadratic_form(const Mat<N>& s, const Vec<N>& x) {
    return dot(x, s * x);
}

// ---------------------------------------------------------------------------
// Norms
// ---------------------------------------------------------------------------

template <std::size_t N>
double norm_1(const Mat<N>& m) {
    double best = 0.0;
    for (std::size_t j = 0; j < N; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < N; ++i) s += std::abs(m(i, j));
        best = std::max(best, s);
    }
    return best;
}

template <std::size_t N>
double norm_inf(const Mat<N>& m) {
    return norm_1(m.transpose());
}

template <std::size_t N>
double norm_fro(const Mat<N>& m) {
    double s = 0.0;
    for (double v : m.data()) s += v * v;
    return std::sqrt(s);
}

template <std::size_t N>
double max_abs(const Mat<N>& m) {
    double best = 0.0;
    for (double v : m.data()) best = std::max(best, std::abs(v));
    return best;
}

template <std::size_t N>
double max_abs(const Vec<N>& v) {
    double best = 0.0;
    for (double x : v) best = std::max(best, std::abs(x));
    return best;
}

// ---------------------------------------------------------------------------
// Linear solves (LU with partial pivoting)
// ---------------------------------------------------------------------------

template <std::size_t N>
struct LuFactors {
    Mat<N> lu;
    std::array<std::size_t, N> perm{};
    double min_pivot = 0.0;
};

/// Throws SingularMatrixError when a pivot falls below rel_tol * ||A||_inf.
template <std::size_t N>
LuFactors<N> lu_factor(const Mat<N>& a, double rel_tol = 1e-12) {
    if (!all_finite(a)) throw Error(ErrorKind::invalid_input, "lu_factor: non-finite matrix entry");
    LuFactors<N> f{a, {}, std::numeric_limits<double>::infinity()};
    for (std::size_t i = 0; i < N; ++i) f.perm[i] = i;
    const double scale = norm_inf(a);
    const double threshold = rel_tol * scale;
    auto& m = f.lu;
    for (std::size_t k = 0; k < N; ++k) {
        std::size_t p = k;
        for (std::size_t i = k + 1; i < N; ++i)
            if (std::abs(m(i, k)) > std::abs(m(p, k))) p = i;
        const double piv = std::abs(m(p, k));
        f.min_pivot = std::min(f.min_pivot, piv);
        if (piv <= threshold || piv == 0.0) {
            throw SingularMatrixError("matrix is singular to working precision (pivot " +
                                          std::to_string(piv) + ")",
                                      piv);
        }
        if (p != k) {
            for (std::size_t j = 0; j < N; ++j) std::swap(m(p, j), m(k, j));
            std::swap(f.perm[p], f.perm[k]);
        }
        for (std::size_t i = k + 1; i < N; ++i) {
            const double l = m(i, k) / m(k, k);
            m(i, k) = l;
            for (std::size_t j = k + 1; j < N; ++j) m(i, j) -= l * m(k, j);
        }
    }
    return f;
}

template <std::size_t N>
Vec<N> lu_solve(const LuFactors<N>& f, const Vec<N>& b) {
    Vec<N> x{};
    for (std::size_t i = 0; i < N; ++i) x[i] = b[f.perm[i]];
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = 0; j < i; ++j) x[i] -= f.lu(i, j) * x[j];
    for (std::size_t ii = N; ii-- > 0;) {
        for (std::size_t j = ii + 1; j < N; ++j) x[ii] -= f.lu(ii, j) * x[j];
        x[ii] /= f.lu(ii, ii);
    }
    return x;
}

template <std::size_t N>
Mat<N> lu_solve(const LuFactors<N>& f, const Mat<N>& b) {
    Mat<N> x;
    for (std::size_t j = 0; j < N; ++j) {
        Vec<N> col{};
        for (std::size_t i = 0; i < N; ++i) col[i] = b(i, j);
        col = lu_solve(f, col);
        for (std::size_t i = 0; i < N; ++i) x(i, j) = col[i];
    }
    return x;
}

/// Solves A x = b. Near-singular A raises SingularMatrixError carrying the pivot.
template <std::size_t N>
Vec<N> solve(const Mat<N>& a, const Vec<N>& b) {
    if (!all_finite(b)) throw Error(ErrorKind::invalid_input, "solve: non-finite right-hand side");
    return lu_solve(lu_factor(a), b);
}

template <std::size_t N>
Mat<N> inverse(const Mat<N>& a) {
    return lu_solve(lu_factor(a), Mat<N>::identity());
}

// ---------------------------------------------------------------------------
// Matrix exponential
// ---------------------------------------------------------------------------

/**
 * e^{A t} by scaling and squaring with the degree-13 diagonal Padé approximant.
 *
 * The scaling exponent is chosen so that ||A t / 2^s||_1 <= 0.5, well inside
 * the region where the [13/13] approximant is accurate to double precision.
 */
template <std::size_t N>
Mat<N> expm(const Mat<N>& a, double t = 1.0) {
    if (!std::isfinite(t) || !all_finite(a))
        throw Error(ErrorKind::invalid_input, "expm: non-finite input");
    Mat<N> x = a * t;
    const double nrm = norm_1(x);
    int s = 0;
    if (nrm > 0.5) s = static_cast<int>(std::ceil(std::log2(nrm / 0.5)));
    if (s > 0) x *= std::ldexp(1.0, -s);

    static constexpr std::array<double, 14> b = {
        64764752532480000.0, 32382376266240000.0, 7771770303897600.0, 1187353796428800.0,
        129060195264000.0,   10559470521600.0,    670442572800.0,     33522128640.0,
        1323241920.0,        40840800.0,          960960.0,           16380.0,
        182.0,               1.0};
    const Mat<N> id = Mat<N>::identity();
    const Mat<N> x2 = x * x;
    const Mat<N> x4 = x2 * x2;
    const Mat<N> x6 = x4 * x2;
    const Mat<N> u_inner = x6 * (b[13] * x6 + b[11] * x4 + b[9] * x2) + b[7] * x6 + b[5] * x4 +
                           b[3] * x2 + b[1] * id;
    const Mat<N> u = x * u_inner;
    const Mat<N> v = x6 * (b[12] * x6 + b[10] * x4 + b[8] * x2) + b[6] * x6 + b[4] * x4 +
                     b[2] * x2 + b[0] * id;
    Mat<N> r = lu_solve(lu_factor(v - u, 1e-300), v + u);
    for (int k = 0; k < s; ++k) r = r * r;
    return r;
}

// ---------------------------------------------------------------------------
// Symmetric eigenvalues (cyclic Jacobi) and definiteness
// ---------------------------------------------------------------------------

template <std::size_t N>
struct SymEigen {
    Vec<N> values{};  // ascending
    Mat<N> vectors;   // column k pairs with values[k]
    int sweeps = 0;
};

/// Eigen-decomposition of the symmetric part of s by cyclic Jacobi rotations.
template <std::size_t N>
SymEigen<N> sym_eigen(const Mat<N>& s) {
    if (!all_finite(s)) throw Error(ErrorKind::invalid_input, "sym_eigen: non-finite input");
    Mat<N> a = 0.5 * (s + s.transpose());
    Mat<N> v = Mat<N>::identity();
    const double scale = norm_fro(a);
    int sweep = 0;
    for (; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < N; ++p)
            for (std::size_t q = p + 1; q < N; ++q) off += 2.0 * a(p, q) * a(p, q);
        if (std::sqrt(off) <= 1e-13 * scale || off == 0.0) break;
        for (std::size_t p = 0; p < N; ++p) {
            for (std::size_t q = p + 1; q < N; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = std::copysign(1.0, theta) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double sn = t * c;
                for (std::size_t k = 0; k < N; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - sn * akq;
                    a(k, q) = sn * akp + c * akq;
                }
                for (std::size_t k = 0; k < N; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - sn * aqk;
                    a(q, k) = sn * apk + c * aqk;
                }
                for (std::size_t k = 0; k < N; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - sn * vkq;
                    v(k, q) = sn * vkp + c * vkq;
                }
            }
        }
    }
    std::array<std::size_t, N> order{};
    for (std::size_t i = 0; i < N; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return a(i, i) < a(j, j); });
    SymEigen<N> out;
    out.sweeps = sweep;
    for (std::size_t k = 0; k < N; ++k) {
        out.values[k] = a(order[k], order[k]);
        for (std::size_t i = 0; i < N; ++i) out.vectors(i, k) = v(i, order[k]);
    }
    return out;
}

template <std::size_t N>
Vec<N> sym_eigenvalues(const Mat<N>& s) {
    return sym_eigen(s).values;
}

enum class Definiteness { positive_definite, negative_definite, indefinite, semidefinite_boundary };

constexpr const char* to_string(Definiteness d) {
    switch (d) {
        case Definiteness::positive_definite: return "positive-definite";
        case Definiteness::negative_definite: return "negative-definite";
        case Definiteness::indefinite: return "indefinite";
        case Definiteness::semidefinite_boundary: return "semidefinite-boundary";
    }
    return "unknown";
}

struct SymVerdict {
    Definiteness definite = Definiteness::indefinite;
    /// lambda_min for a positive verdict, lambda_max for a negative one; for the
    /// boundary verdict, whichever extreme sits inside the band.
    double extreme_eigenvalue = 0.0;
    double lambda_min = 0.0;
    double lambda_max = 0.0;
    /// Absolute half-width of the band around zero treated as the boundary.
    double tolerance_used = 0.0;
};

/**
 * Classifies a symmetric matrix. Eigenvalues within +-rel_tol*||S||_2 of zero
 * are reported as a boundary case instead of being rounded to either side.
 * Asymmetry larger than the same band is rejected.
 */
template <std::size_t N>
SymVerdict sym_definiteness(const Mat<N>& s, double rel_tol = 1e-9) {
    if (!all_finite(s)) throw Error(ErrorKind::invalid_input, "sym_definiteness: non-finite input");
    const auto ev = sym_eigenvalues(s);
    const double lmin = ev.front(), lmax = ev.back();
    const double snorm = std::max(std::abs(lmin), std::abs(lmax));
    const double band = rel_tol * snorm;
    const double asym = max_abs(s - s.transpose());
    if (asym > rel_tol * std::max(snorm, max_abs(s)))
        throw Error(ErrorKind::invalid_input,
                    "sym_definiteness: matrix is not symmetric (asymmetry " + std::to_string(asym) + ")");
    SymVerdict v;
    v.lambda_min = lmin;
    v.lambda_max = lmax;
    v.tolerance_used = band;
    if (lmin > band) {
        v.definite = Definiteness::positive_definite;
        v.extreme_eigenvalue = lmin;
    } else if (lmax < -band) {
        v.definite = Definiteness::negative_definite;
        v.extreme_eigenvalue = lmax;
    } else if (lmin < -band && lmax > band) {
        v.definite = Definiteness::indefinite;
        v.extreme_eigenvalue = std::abs(lmin) < std::abs(lmax) ? lmin : lmax;
    } else {
        v.definite = Definiteness::semidefinite_boundary;
        v.extreme_eigenvalue = lmin >= -band ? lmin : lmax;
    }
    return v;
}

/// Spectral norm via the largest eigenvalue of M'M.
template <std::size_t N>
double norm_2(const Mat<N>& m) {
    return std::sqrt(std::max(0.0, sym_eigenvalues(m.transpose() * m).back()));
}

// ---------------------------------------------------------------------------
// General eigenvalues: balancing, Hessenberg reduction, Francis double-shift QR
// ---------------------------------------------------------------------------

namespace detail {

inline double sign_of(double a, double b) { return b >= 0.0 ? std::abs(a) : -std::abs(a); }

template <std::size_t N>
void balance(Mat<N>& a) {
    constexpr double radix = 2.0;
    constexpr double sqrdx = radix * radix;
    bool done = false;
    while (!done) {
        done = true;
        for (std::size_t i = 0; i < N; ++i) {
            double r = 0.0, c = 0.0;
            for (std::size_t j = 0; j < N; ++j) {
                if (j == i) continue;
                c += std::abs(a(j, i));
                r += std::abs(a(i, j));
            }
            if (c == 0.0 || r == 0.0) continue;
            double g = r / radix;
            double f = 1.0;
            const double s = c + r;
            while (c < g) {
                f *= radix;
                c *= sqrdx;
            }
            g = r * radix;
            while (c > g) {
                f /= radix;
                c /= sqrdx;
            }
            if ((c + r) / f < 0.95 * s) {
                done = false;
                g = 1.0 / f;
                for (std::size_t j = 0; j < N; ++j) a(i, j) *= g;
                for (std::size_t j = 0; j < N; ++j) a(j, i) *= f;
            }
        }
    }
}

// Gaussian elimination with pivoting to upper Hessenberg form.
template <std::size_t N>
void to_hessenberg(Mat<N>& a) {
    for (std::size_t m = 1; m + 1 < N; ++m) {
        double x = 0.0;
        std::size_t i = m;
        for (std::size_t j = m; j < N; ++j) {
            if (std::abs(a(j, m - 1)) > std::abs(x)) {
                x = a(j, m - 1);
                i = j;
            }
        }
        if (i != m) {
            for (std::size_t j = m - 1; j < N; ++j) std::swap(a(i, j), a(m, j));
            for (std::size_t j = 0; j < N; ++j) std::swap(a(j, i), a(j, m));
        }
        if (x != 0.0) {
            for (i = m + 1; i < N; ++i) {
                double y = a(i, m - 1);
                if (y == 0.0) continue;
                y /= x;
                a(i, m - 1) = y;
                for (std::size_t j = m; j < N; ++j) a(i, j) -= y * a(m, j);
                for (std::size_t j = 0; j < N; ++j) a(j, m) += y * a(j, i);
            }
        }
    }
    for (std::size_t i = 2; i < N; ++i)
        for (std::size_t j = 0; j + 1 < i; ++j) a(i, j) = 0.0;
}

// Eigenvalues of an upper Hessenberg matrix (EISPACK hqr lineage).
template <std::size_t N>
std::array<std::complex<double>, N> hessenberg_qr(Mat<N> a) {
    using std::abs;
    const double eps = std::numeric_limits<double>::epsilon();
    std::array<std::complex<double>, N> w{};
    int n = static_cast<int>(N);
    auto A = [&](int i, int j) -> double& { return a(static_cast<std::size_t>(i), static_cast<std::size_t>(j)); };

    double anorm = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = std::max(i - 1, 0); j < n; ++j) anorm += abs(A(i, j));

    int nn = n - 1;
    double t = 0.0;
    double p = 0, q = 0, r = 0, s = 0, x = 0, y = 0, z = 0, ww = 0;
    while (nn >= 0) {
        int its = 0;
        int l;
        do {
            for (l = nn; l > 0; --l) {
                s = abs(A(l - 1, l - 1)) + abs(A(l, l));
                if (s == 0.0) s = anorm;
                if (abs(A(l, l - 1)) <= eps * s) {
                    A(l, l - 1) = 0.0;
                    break;
                }
            }
            x = A(nn, nn);
            if (l == nn) {
                w[static_cast<std::size_t>(nn)] = x + t;
                --nn;
            } else {
                y = A(nn - 1, nn - 1);
                ww = A(nn, nn - 1) * A(nn - 1, nn);
                if (l == nn - 1) {
                    p = 0.5 * (y - x);
                    q = p * p + ww;
                    z = std::sqrt(abs(q));
                    x += t;
                    if (q >= 0.0) {
                        z = p + sign_of(z, p);
                        w[static_cast<std::size_t>(nn - 1)] = w[static_cast<std::size_t>(nn)] = x + z;
                        if (z != 0.0) w[static_cast<std::size_t>(nn)] = x - ww / z;
                    } else {
                        w[static_cast<std::size_t>(nn)] = std::complex<double>(x + p, -z);
                        w[static_cast<std::size_t>(nn - 1)] = std::conj(w[static_cast<std::size_t>(nn)]);
                    }
                    nn -= 2;
                } else {
                    if (its == 60) throw Error(ErrorKind::invalid_input, "eigenvalues: QR iteration did not converge");
                    if (its == 10 || its == 20 || its == 40) {
                        t += x;
                        for (int i = 0; i <= nn; ++i) A(i, i) -= x;
                        s = abs(A(nn, nn - 1)) + abs(A(nn - 1, nn - 2));
                        y = x = 0.75 * s;
                        ww = -0.4375 * s * s;
                    }
                    ++its;
                    int m;
                    for (m = nn - 2; m >= l; --m) {
                        z = A(m, m);
                        r = x - z;
                        s = y - z;
                        p = (r * s - ww) / A(m + 1, m) + A(m, m + 1);
                        q = A(m + 1, m + 1) - z - r - s;
                        r = A(m + 2, m + 1);
                        s = abs(p) + abs(q) + abs(r);
                        p /= s;
                        q /= s;
                        r /= s;
                        if (m == l) break;
                        const double u = abs(A(m, m - 1)) * (abs(q) + abs(r));
                        const double v = abs(p) * (abs(A(m - 1, m - 1)) + abs(z) + abs(A(m + 1, m + 1)));
                        if (u <= eps * v) break;
                    }
                    for (int i = m; i < nn - 1; ++i) {
                        A(i + 2, i) = 0.0;
                        if (i != m) A(i + 2, i - 1) = 0.0;
                    }
                    for (int k = m; k < nn; ++k) {
                        if (k != m) {
                            p = A(k, k - 1);
                            q = A(k + 1, k - 1);
                            r = 0.0;
                            if (k + 1 != nn) r = A(k + 2, k - 1);
                            x = abs(p) + abs(q) + abs(r);
                            if (x != 0.0) {
                                p /= x;
                                q /= x;
                                r /= x;
                            }
                        }
                        s = sign_of(std::sqrt(p * p + q * q + r * r), p);
                        if (s != 0.0) {
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
                                if (k + 1 != nn) {
                                    p += r * A(k + 2, j);
                                    A(k + 2, j) -= p * z;
                                }
                                A(k + 1, j) -= p * y;
                                A(k, j) -= p * x;
                            }
                            const int mmin = nn < k + 3 ? nn : k + 3;
                            for (int i = l; i <= mmin; ++i) {
                                p = x * A(i, k) + y * A(i, k + 1);
                                if (k + 1 != nn) {
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
        } while (l + 1 < nn);
    }
    return w;
}

}  // namespace detail

/// All (complex) eigenvalues of a general real matrix, unordered.
template <std::size_t N>
std::array<std::complex<double>, N> eigenvalues(const Mat<N>& m) {
    if (!all_finite(m)) throw Error(ErrorKind::invalid_input, "eigenvalues: non-finite input");
    if constexpr (N == 1) {
        return {std::complex<double>(m(0, 0), 0.0)};
    } else {
        Mat<N> a = m;
        detail::balance(a);
        detail::to_hessenberg(a);
        return detail::hessenberg_qr(a);
    }
}

/// Eigenvalue moduli in descending order.
template <std::size_t N>
Vec<N> eigenvalue_moduli(const Mat<N>& m) {
    const auto ev = eigenvalues(m);
    Vec<N> out{};
    for (std::size_t i = 0; i < N; ++i) out[i] = std::abs(ev[i]);
    std::sort(out.begin(), out.end(), std::greater<>());
    return out;
}

template <std::size_t N>
double spectral_radius(const Mat<N>& m) {
    return eigenvalue_moduli(m).front();
}

}  // namespace zsource
