#include <doctest.h>

#include <cmath>

#include "generators.hpp"
#include "msf/errors.hpp"
#include "msf/thermo.hpp"

using namespace msf;

namespace {
Vector vec(std::initializer_list<double> xs) {
    Vector v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v[i++] = x;
    return v;
}
}  // namespace

TEST_SUITE("thermo") {

TEST_CASE("entropy density at reference states") {
    CHECK(entropy_density(vec({1, 1}), 1.0) == doctest::Approx(-2.0).epsilon(1e-15));
    const double e = std::exp(1.0);
    CHECK(entropy_density(vec({e, e}), e) == doctest::Approx(-2.0 * e).epsilon(1e-14));
    // mpmath, 40 digits
    CHECK(entropy_density(vec({1, 2}), 2.0) == doctest::Approx(-3.6931471805599453094).epsilon(1e-14));
}

TEST_CASE("entropy density rejects nonpositive input") {
    CHECK_THROWS_AS(entropy_density(vec({1, 0}), 1.0), DomainError);
    CHECK_THROWS_AS(entropy_density(vec({1, 1}), -1.0), DomainError);
}

TEST_CASE("densities from potentials") {
    const Vector uniform = densities_from_potentials(Vector::Zero(2), 1.0);
    for (int i = 0; i < 3; ++i) CHECK(uniform[i] == doctest::Approx(1.0 / 3).epsilon(1e-15));

    const Vector two = densities_from_potentials(vec({std::log(3.0)}), 2.0);
    CHECK(two[0] == doctest::Approx(1.5).epsilon(1e-15));
    CHECK(two[1] == doctest::Approx(0.5).epsilon(1e-14));

    // mpmath: e^30 / (e^30 + e^-30 + 1) and its complements
    const Vector extreme = densities_from_potentials(vec({30, -30}), 1.0);
    CHECK(extreme.allFinite());
    CHECK(extreme[0] == doctest::Approx(0.99999999999990642377).epsilon(1e-15));
    CHECK(extreme[1] == doctest::Approx(8.7565107626957009372e-27).epsilon(1e-12));
    CHECK(extreme[2] > 0.0);
    CHECK(std::abs(extreme[2] - 9.3576229688392989538e-14) < 1e-16);

    const Vector huge = densities_from_potentials(vec({800, -800}), 1.0);
    CHECK(huge.allFinite());
    CHECK(huge.minCoeff() > 0.0);
}

TEST_CASE("potentials of reference states") {
    MixtureState s{Matrix(2, 2), Vector::Ones(2), Vector::Constant(2, 2.0)};
    s.rho.col(0) = vec({1, 1});
    s.rho.col(1) = vec({1.5, 0.5});
    const auto [y, pot] = potentials_from_densities(s);
    CHECK(y.v(0, 0) == 0.0);
    CHECK(y.w[0] == 0.0);
    CHECK(pot.pi_q.col(0).cwiseAbs().maxCoeff() == 0.0);
    CHECK(y.v(0, 1) == doctest::Approx(std::log(3.0)).epsilon(1e-15));
    CHECK(pot.pi_q(0, 1) == doctest::Approx(std::log(3.0) / 2).epsilon(1e-15));
    CHECK(pot.pi_q(1, 1) == doctest::Approx(-std::log(3.0) / 2).epsilon(1e-15));
}

TEST_CASE("project_pi") {
    CHECK(project_pi(vec({1, 1, 1})).cwiseAbs().maxCoeff() == 0.0);
    CHECK((project_pi(vec({1, -1})) - vec({1, -1})).cwiseAbs().maxCoeff() == 0.0);
    CHECK((project_pi(vec({2, 0, 1})) - vec({1, -1, 0})).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("free energy identities") {
    const FreeEnergy f = free_energy_and_derived(vec({1, 1}), 1.0);
    CHECK(f.energy == 2.0);
    CHECK(f.pressure == 2.0);
    CHECK(f.energy == doctest::Approx(f.psi + f.s));
}

TEST_CASE("entropy hessian at reference states") {
    const Matrix h2 = entropy_hessian(vec({1}), 1.0, 2.0);
    CHECK((h2 - Matrix::Identity(2, 2) * 2.0).cwiseAbs().maxCoeff() < 1e-15);
    Matrix expected(3, 3);
    expected << 2, 1, 0, 1, 2, 0, 0, 0, 3;
    CHECK((entropy_hessian(vec({1, 1}), 1.0, 3.0) - expected).cwiseAbs().maxCoeff() < 1e-15);
    CHECK_THROWS_AS(entropy_hessian(vec({1, 2}), 1.0, 3.0), DomainError);
}

TEST_CASE("property: potential round trip, closure and positivity") {
    gen::Source src(11);
    for (int s = 0; s < 50000; ++s) {
        const int n = src.integer(2, 6);
        const Vector v = src.gaussian(n - 1, s % 3 ? 4.0 : 40.0);
        const double rho_total = std::pow(10.0, src.uniform(-5.0, 3.0));
        const Vector rho = densities_from_potentials(v, rho_total);
        REQUIRE(rho.minCoeff() > 0.0);
        REQUIRE(total_density(rho) == rho_total);
        REQUIRE((relative_potentials(rho) - v).cwiseAbs().maxCoeff() < 1e-12 * std::max(1.0, v.cwiseAbs().maxCoeff()));
    }
}

TEST_CASE("property: state round trip") {
    gen::Source src(12);
    for (int s = 0; s < 100; ++s) {
        const int n = src.integer(2, 5), N = src.integer(1, 8);
        MixtureState st{Matrix(n, N), Vector(N), Vector(N)};
        for (int k = 0; k < N; ++k) {
            st.rho.col(k) = src.density(n);
            st.theta[k] = src.uniform(0.1, 5.0);
            st.rho_total[k] = total_density(st.rho.col(k));
        }
        const MixtureState back = to_mixture_state(to_entropy_state(st), st.rho_total);
        REQUIRE(((back.rho - st.rho).array() / st.rho.array()).abs().maxCoeff() < 1e-12);
        REQUIRE(((back.theta - st.theta).array() / st.theta.array()).abs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("property: hessian positive definite") {
    gen::Source src(13);
    for (int s = 0; s < 1000; ++s) {
        const int n = src.integer(2, 6);
        const Vector rho = src.density(n);
        const Matrix H = entropy_hessian(rho.head(n - 1), src.uniform(0.1, 5.0), total_density(rho));
        REQUIRE(Eigen::LLT<Matrix>(H).info() == Eigen::Success);
    }
}

TEST_CASE("property: projection and potential consistency") {
    gen::Source src(14);
    for (int s = 0; s < 500; ++s) {
        const int n = src.integer(2, 6);
        const Vector z = src.gaussian(n, 3.0);
        const Vector p = project_pi(z);
        REQUIRE((project_pi(p) - p).cwiseAbs().maxCoeff() < 1e-12);
        REQUIRE(std::abs(p.sum()) < 1e-12);

        const Vector rho = src.density(n);
        const double theta = src.uniform(0.2, 4.0);
        Vector q(n);
        for (int i = 0; i < n; ++i) q[i] = std::log(rho[i] / theta);
        REQUIRE((project_pi(q) - pi_q_from_potentials(relative_potentials(rho))).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("property: energy equals psi plus theta s") {
    gen::Source src(15);
    for (int s = 0; s < 200; ++s) {
        const int n = src.integer(2, 5);
        const Vector rho = src.density(n);
        const double theta = src.uniform(0.1, 5.0);
        const FreeEnergy f = free_energy_and_derived(rho, theta);
        REQUIRE(std::abs(f.energy - (f.psi + theta * f.s)) < 1e-12 * std::max(1.0, std::abs(f.energy)));
    }
}

}
