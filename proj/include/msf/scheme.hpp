#pragma once

// Implicit Euler step in entropy variables (v', w): residual, analytic Jacobian,
// damped Newton with a frozen-coefficient Picard fallback, and the time loop.

#include <functional>
#include <string_view>

#include <Eigen/SparseCore>

#include "msf/grid.hpp"
#include "msf/onsager.hpp"
#include "msf/thermo.hpp"

namespace msf {

enum class Formulation { potential, density };
enum class ReactionModel { none, linear_pi_q };

std::string_view to_string(Formulation f);
std::string_view to_string(ReactionModel r);

/// kappa(theta) = c + C theta^2, so c(1 + theta^2) <= kappa <= C(1 + theta^2) when c <= C.
struct KappaModel {
    double c = 1.0;
    double C = 1.0;

    double operator()(double theta) const { return c + C * theta * theta; }
    double derivative(double theta) const { return 2.0 * C * theta; }
};

struct NewtonOptions {
    double tol = 1e-9;
    int max_iter = 50;
    double damping_min = 1.0 / 1073741824.0;  // 2^-30
    bool picard_fallback = true;
    int picard_max_iter = 400;
};

struct SchemeConfig {
    Grid1D grid;
    double tau = 1e-3;
    double epsilon = 0.0;
    double lambda = 0.0;
    double theta0 = 1.0;
    KappaModel kappa;
    MatrixModelPtr matrix;
    ReactionModel reaction = ReactionModel::none;
    double c_r = 0.0;
    Formulation formulation = Formulation::potential;
    NewtonOptions newton;

    /// Throws ConfigError naming the offending key.
    void validate(int species) const;
};

/// Unknowns are stored node-major: index k*n + c with c < n-1 for v_{c+1} and c = n-1 for w.
Vector pack(const EntropyState& y);
EntropyState unpack(const Vector& y, int species, int nodes);

/// Stacked per-unit-volume residual of the step from y_prev to y.
Vector residual(const EntropyState& y, const EntropyState& y_prev, const Vector& rho_total,
                const SchemeConfig& cfg);

/// Exact Jacobian of `residual` with respect to the packed unknowns.
Eigen::SparseMatrix<double> jacobian(const EntropyState& y, const EntropyState& y_prev,
                                     const Vector& rho_total, const SchemeConfig& cfg);

/// Jacobian with frozen coefficients (M, M_i, kappa, e^w weights): the linear operator
/// of the Picard iteration.
Eigen::SparseMatrix<double> frozen_jacobian(const EntropyState& y, const EntropyState& y_prev,
                                            const Vector& rho_total, const SchemeConfig& cfg);

struct StepReport {
    double tau = 0.0;
    int newton_iterations = 0;
    int picard_iterations = 0;
    bool used_picard = false;
    int halvings = 0;  ///< tau was halved this many times to accept the step
    double residual_norm = 0.0;
    double entropy_before = 0.0;
    double entropy_after = 0.0;
    Vector masses;
    double energy = 0.0;
    Vector min_rho;
    Vector max_rho;
    double min_theta = 0.0;
    double max_theta = 0.0;
    double boundary_heat_exchange = 0.0;  ///< energy received through the boundary this step
};

struct StepResult {
    EntropyState y;
    MixtureState state;
    StepReport report;
};

/// Solves one step. Throws NonConvergence when Newton (and Picard, if enabled) fail.
StepResult solve_step(const EntropyState& y_prev, const Vector& rho_total,
                      const SchemeConfig& cfg);

/// Integral of h(rho, theta) + e^{-w0} rho theta.
double relative_entropy(const MixtureState& s, const Grid1D& g, double theta0);

/// Fills masses, energy and extrema of a report from a state.
void summarize_state(const MixtureState& s, const Grid1D& g, StepReport& report);

/// Maps data through the entropy variables so the total density closes bitwise.
MixtureState admissible_initial_state(const MixtureState& initial);

struct StepRecord {
    double t;
    const MixtureState& previous;
    const MixtureState& current;
    const StepReport& report;
};

using StepCallback = std::function<void(const StepRecord&)>;

struct RunSummary {
    MixtureState final_state;
    double t = 0.0;
    int steps = 0;
    int halvings = 0;
};

/// Advances to t_end with fixed tau. A step that fails is retried with tau/2^k
/// substeps, k <= 10; after that the run throws Abort.
RunSummary run(const MixtureState& initial, const SchemeConfig& cfg, double t_end,
               const StepCallback& on_step = {});

}  // namespace msf
