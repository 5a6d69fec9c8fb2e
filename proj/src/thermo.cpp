#include "msf/thermo.hpp"

#include <cmath>
#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>
#include <string>

#include "msf/errors.hpp"

namespace msf {

namespace {

constexpr double kTiny = std::numeric_limits<double>::min();

}  // namespace

void require_admissible(const Eigen::Ref<const Vector>& rho, double theta) {
    for (Eigen::Index i = 0; i < rho.size(); ++i) {
        if (!(rho[i] > 0.0)) {
            throw DomainError("density rho_" + std::to_string(i + 1) +
                                  " must be positive, got " + std::to_string(rho[i]),
                              static_cast<int>(i));
        }
    }
    if (!(theta > 0.0)) {
        throw DomainError("temperature must be positive, got " + std::to_string(theta), -1);
    }
}

double entropy_density(const Vector& rho, double theta) {
    require_admissible(rho, theta);
    double h = 0.0;
    double total = 0.0;
    for (Eigen::Index i = 0; i < rho.size(); ++i) {
        h += rho[i] * (std::log(rho[i]) - 1.0);
        total += rho[i];
    }
    return h - total * std::log(theta);
}

double total_density(const Eigen::Ref<const Vector>& rho) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < rho.size(); ++i) s += rho[i];
    return s;
}

Vector densities_from_potentials(const Eigen::Ref<const Vector>& v, double rho_total) {
    const Eigen::Index n = v.size() + 1;
    double vmax = 0.0;  // v_n = 0
    for (Eigen::Index i = 0; i < v.size(); ++i) vmax = std::max(vmax, v[i]);

    Vector p(n);
    double denom = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        p[i] = std::exp((i + 1 < n ? v[i] : 0.0) - vmax);
        denom += p[i];
    }
    p /= denom;

    // A large component absorbs the closure defect so that every component keeps full
    // relative accuracy. Stepping one addend of the fixed-order sum can skip rho_total on a
    // rounding tie; shifting a second addend by one ulp breaks the tie.
    Vector base = (rho_total * p).cwiseMax(kTiny);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return base[a] > base[b]; });
    for (int attempt = 0; attempt < 16; ++attempt) {
        for (Eigen::Index c : order) {
            if (base[c] < rho_total / (2.0 * static_cast<double>(n * n))) break;
            Vector rho = base;
            double rest = 0.0;
            for (Eigen::Index i = 0; i < n; ++i)
                if (i != c) rest += rho[i];
            rho[c] = rho_total - rest;
            for (int iter = 0; iter < 4096; ++iter) {
                const double total = total_density(rho);
                if (total == rho_total) return rho;
                if (iter < 4) {
                    rho[c] += rho_total - total;
                } else {
                    const double toward = total > rho_total ? 0.0 : std::numeric_limits<double>::infinity();
                    rho[c] = std::nextafter(rho[c], toward);
                }
            }
        }
        const Eigen::Index j = order[static_cast<std::size_t>(1 + attempt % (n - 1))];
        base[j] = std::nextafter(base[j], std::numeric_limits<double>::infinity());
    }
    // Fallback: the last component is the complement in summation order.
    Vector rho = base;
    double partial = 0.0;
    for (Eigen::Index i = 0; i + 1 < n; ++i) partial += rho[i];
    rho[n - 1] = std::max(rho_total - partial, kTiny);
    return rho;
}

Vector relative_potentials(const Eigen::Ref<const Vector>& rho) {
    const Eigen::Index n = rho.size();
    Vector v(n - 1);
    const double log_last = std::log(rho[n - 1]);
    for (Eigen::Index i = 0; i + 1 < n; ++i) v[i] = std::log(rho[i]) - log_last;
    return v;
}

Vector project_pi(const Eigen::Ref<const Vector>& z) {
    return z.array() - z.mean();
}

Vector pi_q_from_potentials(const Eigen::Ref<const Vector>& v) {
    const Eigen::Index n = v.size() + 1;
    const double mean = v.sum() / static_cast<double>(n);
    Vector out(n);
    for (Eigen::Index i = 0; i + 1 < n; ++i) out[i] = v[i] - mean;
    out[n - 1] = -mean;
    return out;
}

EntropyState to_entropy_state(const MixtureState& state) {
    const int n = state.species();
    const int N = state.nodes();
    EntropyState y{Matrix(n - 1, N), Vector(N)};
    for (int k = 0; k < N; ++k) {
        require_admissible(state.rho.col(k), state.theta[k]);
        y.v.col(k) = relative_potentials(state.rho.col(k));
        y.w[k] = std::log(state.theta[k]);
    }
    return y;
}

MixtureState to_mixture_state(const EntropyState& y, const Vector& rho_total) {
    const int n = y.species();
    const int N = y.nodes();
    MixtureState s{Matrix(n, N), Vector(N), rho_total};
    for (int k = 0; k < N; ++k) {
        s.rho.col(k) = densities_from_potentials(y.v.col(k), rho_total[k]);
        s.theta[k] = std::exp(y.w[k]);
    }
    return s;
}

std::pair<EntropyState, PotentialSet> potentials_from_densities(const MixtureState& state) {
    EntropyState y = to_entropy_state(state);
    const int n = state.species();
    const int N = state.nodes();
    PotentialSet pot{Matrix(n, N), Matrix(n, N)};
    for (int k = 0; k < N; ++k) {
        const double log_theta = std::log(state.theta[k]);
        for (int i = 0; i < n; ++i) pot.q(i, k) = std::log(state.rho(i, k)) - log_theta;
        pot.pi_q.col(k) = project_pi(pot.q.col(k));
    }
    return {std::move(y), std::move(pot)};
}

FreeEnergy free_energy_and_derived(const Vector& rho, double theta) {
    require_admissible(rho, theta);
    const double total = total_density(rho);
    const double log_theta = std::log(theta);
    double mix = 0.0;
    Vector mu(rho.size());
    for (Eigen::Index i = 0; i < rho.size(); ++i) {
        mix += rho[i] * (std::log(rho[i]) - 1.0);
        mu[i] = theta * (std::log(rho[i] / theta) + 1.0);
    }
    FreeEnergy f;
    f.psi = theta * mix - total * theta * (log_theta - 1.0);
    f.s = -mix + total * log_theta;
    f.mu = std::move(mu);
    f.energy = total * theta;
    f.pressure = total * theta;
    return f;
}

Matrix entropy_hessian(const Eigen::Ref<const Vector>& rho_prime, double theta,
                       double rho_total) {
    const Eigen::Index m = rho_prime.size();
    const double rho_last = rho_total - rho_prime.sum();
    if (!(rho_last > 0.0)) {
        throw DomainError("complementary density rho_n = " + std::to_string(rho_last) +
                              " must be positive",
                          static_cast<int>(m));
    }
    Vector full(m + 1);
    full.head(m) = rho_prime;
    full[m] = rho_last;
    require_admissible(full, theta);

    Matrix hess = Matrix::Zero(m + 1, m + 1);
    hess.topLeftCorner(m, m).setConstant(1.0 / rho_last);
    for (Eigen::Index i = 0; i < m; ++i) hess(i, i) += 1.0 / rho_prime[i];
    hess(m, m) = rho_total / (theta * theta);
    return hess;
}

}  // namespace msf
