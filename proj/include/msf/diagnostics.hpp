#pragma once

// Structural checks recomputed from mixture states, independent of the solver's
// assembly: entropy balance, temperature estimate, conservation, and norms.

#include <vector>

#include "msf/scheme.hpp"

namespace msf {

struct EntropyLedger {
    double entropy_before = 0.0;
    double entropy_after = 0.0;
    double diffusion = 0.0;  ///< sum over faces of dq . M_f dq / h
    double heat = 0.0;       ///< discrete integral of kappa |grad w|^2
    double boundary = 0.0;   ///< 2 lambda sum (cosh(w0 - w_b) - 1)
    double reaction = 0.0;
    double eps_v = 0.0;
    double eps_w_low = 0.0;
    double eps_w_high = 0.0;
    double slack_budget = 0.0;  ///< tau 2 eps ||w0||^2
    double tolerance = 0.0;     ///< 10 newton.tol L
    double lhs = 0.0;           ///< Phi_k - Phi_{k-1} + tau * production
    double margin = 0.0;        ///< slack_budget + tolerance - lhs
    bool pass = true;

    double production() const {
        return diffusion + heat + boundary + reaction + eps_v + eps_w_low + eps_w_high;
    }
};

/// Both sides of the discrete entropy inequality for a step of length tau.
EntropyLedger entropy_balance(const MixtureState& prev, const MixtureState& cur,
                              const SchemeConfig& cfg, double tau);

/// Per-face diffusion production dq . M_f dq / h (N-1 entries).
Vector diffusion_production_faces(const MixtureState& s, const SchemeConfig& cfg);

/// Per-face sum_i rho_i,f |(Pi dq)_i|^2 / h with rho_i,f the face average.
Vector weighted_potential_faces(const MixtureState& s, const Grid1D& g);

struct TemperatureLedger {
    double theta2_before = 0.0;   ///< integral of rho0 theta_bar^2
    double theta2_after = 0.0;    ///< integral of rho0 theta^2
    double heat = 0.0;            ///< integral of kappa(theta) |grad theta|^2
    double theta2_grad2 = 0.0;    ///< integral of theta^2 |grad theta|^2
    double boundary = 0.0;        ///< lambda sum (theta_b - theta0) theta_b
    double grad_v2 = 0.0;         ///< integral of |grad v|^2
    double sup_soret_over_theta = 0.0;
    double C = 0.0;
    double C_prime = 0.0;
    double lhs = 0.0;
    double rhs = 0.0;
    bool pass = true;
};

TemperatureLedger temperature_estimate(const MixtureState& prev, const MixtureState& cur,
                                       const SchemeConfig& cfg, double tau);

struct TrajectoryPoint {
    double t;
    MixtureState state;
};

struct ConservationReport {
    std::vector<Vector> masses;
    std::vector<double> energy;
    double max_total_density_deviation = 0.0;  ///< max |sum_i rho_i - rho0| over nodes and times
    double max_mass_drift = 0.0;               ///< max_i,k |m_i(t_k) - m_i(0)| / m_i(0)
    double energy_drift = 0.0;
    bool flagged = false;
};

/// `expect_mass` and `expect_energy` enable the drift flags (mass: r = 0, eps = 0; energy also lambda = 0).
ConservationReport conservation_report(const std::vector<TrajectoryPoint>& trajectory,
                                       const Grid1D& g, bool expect_mass, bool expect_energy);

/// Streaming version of conservation_report.
class ConservationAccumulator {
public:
    ConservationAccumulator(const Grid1D& g, bool expect_mass, bool expect_energy)
        : grid_(g), expect_mass_(expect_mass), expect_energy_(expect_energy) {}
    void add(const MixtureState& s);
    const ConservationReport& report() const { return r_; }

private:
    Grid1D grid_;
    bool expect_mass_;
    bool expect_energy_;
    ConservationReport r_;
};

struct NormsReport {
    double sup_theta2 = 0.0;         ///< sup_t integral of theta^2
    double theta2_grad2 = 0.0;       ///< space-time integral of theta^2 |grad theta|^2
    double theta_l16_3 = 0.0;        ///< L^{16/3} norm of theta over the run
    Vector sup_rho;
};

/// Space-time quadratures use the step lengths t_k - t_{k-1}.
NormsReport norms_report(const std::vector<TrajectoryPoint>& trajectory, const Grid1D& g);

/// Streaming version of norms_report for long runs.
class NormsAccumulator {
public:
    explicit NormsAccumulator(const Grid1D& g) : grid_(g) {}
    void add(double t, const MixtureState& s);
    NormsReport report() const;

private:
    Grid1D grid_;
    bool started_ = false;
    double last_t_ = 0.0;
    double l16_sum_ = 0.0;
    NormsReport r_;
};

}  // namespace msf
