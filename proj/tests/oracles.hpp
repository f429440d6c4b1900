#pragma once

// Independent reference routines used only by the test suites. None of these
// share code paths with the library implementations they check.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <random>
#include <vector>

#include "zsource/numerics.hpp"

namespace oracle {

using zsource::Mat;

/// Taylor series in long double with power-of-two scaling.
template <std::size_t N>
Mat<N> expm_taylor(const Mat<N>& a, double t) {
    using LD = long double;
    std::array<LD, N * N> x{};
    LD nrm = 0;
    for (std::size_t i = 0; i < N; ++i) {
        LD row = 0;
        for (std::size_t j = 0; j < N; ++j) {
            x[i * N + j] = static_cast<LD>(a(i, j)) * t;
            row += std::abs(x[i * N + j]);
        }
        nrm = std::max(nrm, row);
    }
    int s = 0;
    while (nrm > 0.125L) {
        nrm /= 2;
        ++s;
    }
    for (auto& v : x) v = std::ldexp(v, -s);
    auto mul = [](const std::array<LD, N * N>& p, const std::array<LD, N * N>& q) {
        std::array<LD, N * N> r{};
        for (std::size_t i = 0; i < N; ++i)
            for (std::size_t k = 0; k < N; ++k)
                for (std::size_t j = 0; j < N; ++j) r[i * N + j] += p[i * N + k] * q[k * N + j];
        return r;
    };
    std::array<LD, N * N> sum{}, term{};
    for (std::size_t i = 0; i < N; ++i) sum[i * N + i] = term[i * N + i] = 1;
    for (int k = 1; k < 40; ++k) {
        term = mul(term, x);
        for (auto& v : term) v /= k;
        for (std::size_t i = 0; i < N * N; ++i) sum[i] += term[i];
    }
    for (int k = 0; k < s; ++k) sum = mul(sum, sum);
    Mat<N> out;
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = 0; j < N; ++j) out(i, j) = static_cast<double>(sum[i * N + j]);
    return out;
}

/// Characteristic polynomial coefficients c[0..N] (monic, c[0] = 1) of
/// det(lambda I - A) = sum c[k] lambda^{N-k}, by Faddeev–LeVerrier.
template <std::size_t N>
std::array<long double, N + 1> charpoly(const Mat<N>& a) {
    using LD = long double;
    std::array<LD, N + 1> c{};
    c[0] = 1;
    std::array<LD, N * N> A{}, Mk{};
    for (std::size_t i = 0; i < N * N; ++i) A[i] = a.data()[i];
    for (std::size_t k = 1; k <= N; ++k) {
        // M_k = A M_{k-1} + c_{k-1} I, with M_0 = 0.
        std::array<LD, N * N> next{};
        for (std::size_t i = 0; i < N; ++i)
            for (std::size_t l = 0; l < N; ++l)
                for (std::size_t j = 0; j < N; ++j) next[i * N + j] += A[i * N + l] * Mk[l * N + j];
        for (std::size_t i = 0; i < N; ++i) next[i * N + i] += c[k - 1];
        Mk = next;
        LD tr = 0;
        for (std::size_t i = 0; i < N; ++i)
            for (std::size_t l = 0; l < N; ++l) tr += A[i * N + l] * Mk[l * N + i];
        c[k] = -tr / static_cast<LD>(k);
    }
    return c;
}

/// Durand–Kerner simultaneous root iteration on a monic polynomial.
template <std::size_t N>
std::array<std::complex<long double>, N> polynomial_roots(const std::array<long double, N + 1>& c) {
    using C = std::complex<long double>;
    auto eval = [&](C z) {
        C v = c[0];
        for (std::size_t k = 1; k <= N; ++k) v = v * z + c[k];
        return v;
    };
    long double bound = 1;
    for (std::size_t k = 1; k <= N; ++k) bound = std::max(bound, 1 + std::abs(c[k]));
    std::array<C, N> z{};
    const C seed(0.4L, 0.9L);
    for (std::size_t i = 0; i < N; ++i) z[i] = std::pow(seed, static_cast<int>(i)) * (bound * 0.5L);
    for (int it = 0; it < 2000; ++it) {
        long double change = 0;
        for (std::size_t i = 0; i < N; ++i) {
            C den = 1;
            for (std::size_t j = 0; j < N; ++j)
                if (j != i) den *= (z[i] - z[j]);
            if (std::abs(den) == 0) den = C(1e-30L, 0);
            const C dz = eval(z[i]) / den;
            z[i] -= dz;
            change = std::max(change, std::abs(dz));
        }
        if (change < 1e-19L) break;
    }
    return z;
}

template <std::size_t N>
double spectral_radius_charpoly(const Mat<N>& a) {
    const auto roots = polynomial_roots<N>(charpoly(a));
    long double best = 0;
    for (const auto& r : roots) best = std::max(best, std::abs(r));
    return static_cast<double>(best);
}

/// Real roots (sorted) of the characteristic polynomial of a symmetric matrix.
template <std::size_t N>
std::array<double, N> sym_eigenvalues_charpoly(const Mat<N>& a) {
    const auto roots = polynomial_roots<N>(charpoly(a));
    std::array<double, N> out{};
    for (std::size_t i = 0; i < N; ++i) out[i] = static_cast<double>(roots[i].real());
    std::sort(out.begin(), out.end());
    return out;
}

template <std::size_t N>
Mat<N> random_matrix(std::mt19937_64& rng, double scale) {
    std::uniform_real_distribution<double> u(-scale, scale);
    Mat<N> m;
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = 0; j < N; ++j) m(i, j) = u(rng);
    return m;
}

template <std::size_t N>
Mat<N> random_symmetric(std::mt19937_64& rng, double scale) {
    const auto m = random_matrix<N>(rng, scale);
    return 0.5 * (m + m.transpose());
}

template <std::size_t N>
double max_abs_diff(const Mat<N>& a, const Mat<N>& b) {
    return zsource::max_abs(a - b);
}

}  // namespace oracle
