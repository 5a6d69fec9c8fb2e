#include <doctest.h>

#include <cmath>

#include "generators.hpp"
#include "msf/diagnostics.hpp"

using namespace msf;

namespace {

SchemeConfig base_config(int n, int N) {
    SchemeConfig cfg;
    cfg.grid = Grid1D(1.0, N);
    cfg.tau = 2e-3;
    cfg.theta0 = 1.2;
    cfg.kappa = {0.5, 1.0};
    cfg.matrix = n == 3 ? builtin_matrix_model("maxwell_stefan", {{"b", {1.0, 2.0, 0.5}}, {"qstar", {0.3, -0.1, 0.2}}}, n)
                        : builtin_matrix_model("maxwell_stefan", {{"b", {1.5}}}, n);
    return cfg;
}

MixtureState random_state(gen::Source& src, int n, int N, double rho_lo = 0.1) {
    MixtureState s{Matrix(n, N), Vector(N), Vector(N)};
    for (int k = 0; k < N; ++k) {
        s.rho.col(k) = src.density(n, rho_lo, 1.0);
        s.theta[k] = src.uniform(0.6, 1.8);
        s.rho_total[k] = total_density(s.rho.col(k));
    }
    return admissible_initial_state(s);
}

}  // namespace

TEST_SUITE("diagnostics") {

TEST_CASE("uniform equilibrium has zero production") {
    const int n = 3, N = 12;
    SchemeConfig cfg = base_config(n, N);
    cfg.lambda = 1.0;
    MixtureState s{Matrix::Constant(n, N, 0.4), Vector::Constant(N, cfg.theta0), Vector::Constant(N, 1.2)};
    const EntropyLedger L = entropy_balance(s, s, cfg, cfg.tau);
    CHECK(L.entropy_after == L.entropy_before);
    CHECK(L.production() == 0.0);
    CHECK(L.pass);
    const TemperatureLedger T = temperature_estimate(s, s, cfg, cfg.tau);
    CHECK(T.pass);
}

TEST_CASE("property: every solved step passes the entropy ledger") {
    gen::Source src(61);
    for (int trial = 0; trial < 12; ++trial) {
        const int n = 3, N = 16;
        SchemeConfig cfg = base_config(n, N);
        cfg.epsilon = trial % 2 ? 1e-3 : 0.0;
        cfg.lambda = trial % 3 ? 0.7 : 0.0;
        cfg.reaction = trial % 4 == 0 ? ReactionModel::linear_pi_q : ReactionModel::none;
        cfg.c_r = 0.5;
        const MixtureState prev = random_state(src, n, N);
        const StepResult r = solve_step(to_entropy_state(prev), prev.rho_total, cfg);
        const EntropyLedger L = entropy_balance(prev, r.state, cfg, cfg.tau);
        CAPTURE(trial);
        REQUIRE(L.pass);
        REQUIRE(L.diffusion >= 0.0);
        REQUIRE(L.heat >= 0.0);
        REQUIRE(L.boundary >= 0.0);
        REQUIRE(L.reaction >= 0.0);
        if (cfg.epsilon == 0.0) REQUIRE(L.entropy_after - L.entropy_before <= 10 * cfg.newton.tol);
        REQUIRE(temperature_estimate(prev, r.state, cfg, cfg.tau).pass);
    }
}

TEST_CASE("property: degenerate production equals the weighted potential gradient") {
    gen::Source src(62);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = src.integer(2, 5), N = 10;
        SchemeConfig cfg = base_config(n, N);
        cfg.matrix = builtin_matrix_model("degenerate_pirhopi", {}, n);
        const MixtureState s = random_state(src, n, N, 1e-4);
        const Vector a = diffusion_production_faces(s, cfg), b = weighted_potential_faces(s, cfg.grid);
        REQUIRE((a - b).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, b.cwiseAbs().maxCoeff()));
    }
}

TEST_CASE("closed insulated system without heat sources keeps theta^2 nonincreasing") {
    const int n = 2, N = 32;
    SchemeConfig cfg = base_config(n, N);
    cfg.matrix = builtin_matrix_model("constant_pi", {}, n);
    MixtureState s{Matrix(n, N), Vector(N), Vector::Ones(N)};
    for (int k = 0; k < N; ++k) {
        const double x = cfg.grid.x(k);
        s.rho(0, k) = 0.5 + 0.3 * std::sin(6 * x);
        s.rho(1, k) = 1.0 - s.rho(0, k);
        s.theta[k] = 1.0 + 0.8 * std::exp(-50 * (x - 0.4) * (x - 0.4));
    }
    double last = INFINITY;
    run(s, cfg, 0.1, [&](const StepRecord& rec) {
        const TemperatureLedger T = temperature_estimate(rec.previous, rec.current, cfg, rec.report.tau);
        REQUIRE(T.pass);
        REQUIRE(T.C_prime == 0.0);
        REQUIRE(T.theta2_after <= std::min(last, T.theta2_before) * (1 + 1e-14));
        last = T.theta2_after;
    });
}

TEST_CASE("conservation accumulator") {
    const Grid1D g(1.0, 8);
    MixtureState s{Matrix::Constant(2, 8, 0.5), Vector::Ones(8), Vector::Ones(8)};
    ConservationAccumulator acc(g, true, true);
    acc.add(s);
    acc.add(s);
    CHECK_FALSE(acc.report().flagged);
    CHECK(acc.report().max_mass_drift == 0.0);
    MixtureState leak = s;
    leak.rho(0, 3) *= 1.001;
    leak.rho(1, 3) = leak.rho_total[3] - leak.rho(0, 3);
    acc.add(leak);
    CHECK(acc.report().flagged);
    ConservationAccumulator open(g, false, false);
    open.add(s);
    open.add(leak);
    CHECK_FALSE(open.report().flagged);
    MixtureState broken = s;
    broken.rho(1, 0) = 0.6;
    open.add(broken);
    CHECK(open.report().flagged);
    CHECK(conservation_report({{0.0, s}, {1.0, s}}, g, true, true).masses.size() == 2);
}

TEST_CASE("norms of a constant temperature") {
    const Grid1D g(1.0, 10);
    const double theta0 = 1.5;
    MixtureState s{Matrix::Constant(2, 10, 0.5), Vector::Constant(10, theta0), Vector::Ones(10)};
    std::vector<TrajectoryPoint> traj;
    for (int k = 0; k <= 4; ++k) traj.push_back({0.05 * k, s});
    const NormsReport r = norms_report(traj, g);
    // theta0 (L T)^{3/16} with L = 1, T = 0.2
    CHECK(r.theta_l16_3 == doctest::Approx(theta0 * std::pow(0.2, 3.0 / 16)).epsilon(1e-13));
    CHECK(r.sup_theta2 == doctest::Approx(theta0 * theta0));
    CHECK(r.theta2_grad2 == 0.0);
}

TEST_CASE("regularized runs drift in mass by at most the epsilon source") {
    const int n = 3, N = 16;
    SchemeConfig cfg = base_config(n, N);
    cfg.epsilon = 1e-2;
    gen::Source src(63);
    const MixtureState s = random_state(src, n, N);
    run(s, cfg, 0.02, [&](const StepRecord& rec) {
        const EntropyState y = to_entropy_state(rec.current);
        for (int i = 0; i < n - 1; ++i) {
            const double dm = integrate(cfg.grid, rec.current.rho.row(i).transpose()) -
                              integrate(cfg.grid, rec.previous.rho.row(i).transpose());
            const double bound = rec.report.tau * cfg.epsilon * integrate(cfg.grid, y.v.row(i).cwiseAbs().transpose());
            REQUIRE(std::abs(dm) <= bound + 10 * rec.report.tau * cfg.newton.tol);
        }
    });
}

TEST_CASE("sup of densities stays below the initial sup of the total") {
    const int n = 3, N = 20;
    SchemeConfig cfg = base_config(n, N);
    gen::Source src(64);
    const MixtureState s = random_state(src, n, N);
    NormsAccumulator acc(cfg.grid);
    acc.add(0.0, s);
    run(s, cfg, 0.02, [&](const StepRecord& rec) { acc.add(rec.t, rec.current); });
    CHECK(acc.report().sup_rho.maxCoeff() <= s.rho_total.maxCoeff());
}

}
