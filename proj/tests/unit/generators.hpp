#pragma once

// Seeded random inputs for property tests.

#include <cmath>
#include <random>

#include "msf/onsager.hpp"
#include "msf/scheme.hpp"

namespace gen {

using msf::Matrix;
using msf::Vector;

class Source {
public:
    explicit Source(std::uint64_t seed) : rng_(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    double normal() { return std::normal_distribution<double>()(rng_); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }

    /// Densities log-uniform over [lo, hi].
    Vector density(int n, double lo = 0.01, double hi = 3.0) {
        Vector rho(n);
        for (int i = 0; i < n; ++i) rho[i] = std::exp(uniform(std::log(lo), std::log(hi)));
        return rho;
    }

    Vector gaussian(int n, double scale = 1.0) {
        Vector z(n);
        for (int i = 0; i < n; ++i) z[i] = scale * normal();
        return z;
    }

    Matrix friction(int n) {
        Matrix b = Matrix::Zero(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) b(i, j) = b(j, i) = uniform(0.1, 5.0);
        return b;
    }

    /// Random entropy-variable field of moderate amplitude.
    msf::EntropyState entropy_state(int n, int N, double amp = 1.0) {
        msf::EntropyState y{Matrix(n - 1, N), Vector(N)};
        for (int k = 0; k < N; ++k) {
            for (int i = 0; i < n - 1; ++i) y.v(i, k) = uniform(-amp, amp);
            y.w[k] = uniform(-0.5 * amp, 0.5 * amp);
        }
        return y;
    }

    std::mt19937_64& engine() { return rng_; }

private:
    std::mt19937_64 rng_;
};

}  // namespace gen
