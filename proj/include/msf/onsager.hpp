#pragma once

// Diffusion (Onsager) matrices: the Maxwell-Stefan construction through the group
// inverse of the friction matrix, built-in state-dependent matrix models, and
// coercivity certificates.

#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "msf/thermo.hpp"

namespace msf {

enum class MatrixKind { constant, maxwell_stefan, degenerate, custom };

std::string_view to_string(MatrixKind kind);

/// Diffusion matrix M and Soret/Dufour vector evaluated at one state.
struct OnsagerMatrices {
    Matrix M;
    Vector soret;
    MatrixKind kind = MatrixKind::custom;
};

/// Derivatives of an OnsagerMatrices evaluation with respect to every density
/// (treated as independent) and the temperature.
struct OnsagerDerivatives {
    std::vector<Matrix> dM_drho;  ///< n entries
    Matrix dM_dtheta;
    Matrix dsoret_drho;           ///< column m holds d(soret)/d(rho_m)
    Vector dsoret_dtheta;
};

/// Violations of the structural invariants: zero column sums, symmetry, and
/// positive semidefiniteness. Empty string when all hold at `tol` (relative).
std::string check_invariants(const OnsagerMatrices& m, double tol = 1e-12);

/// Symmetric friction coefficients b_ij; optionally state-dependent.
struct FrictionSpec {
    Matrix b;
    std::function<Matrix(const Vector& rho, double theta)> state_dependent;

    Matrix at(const Vector& rho, double theta) const;
};

struct FrictionMatrixB {
    Matrix B;
    Vector rho;
};

/// B_ii = sum_{j != i} b_ij rho_j, B_ij = -b_ij rho_i. Throws ConfigError for asymmetric b.
FrictionMatrixB friction_matrix(const Vector& rho, const Matrix& b);

/// Group inverse of B through the bordered nonsingular system
/// (B + Q) X = I - Q with Q = rho (x) 1 / (1 . rho), B# = X (I - Q).
Matrix group_inverse(const FrictionMatrixB& fb);

/// M = B# R P and M_i = -theta sum_k B#_ik rho_k q*_k. Requires sum_i q*_i rho_i = 0.
OnsagerMatrices onsager_from_friction(const Vector& rho, double theta, const FrictionSpec& b,
                                      const Vector& q_star);

/// q* - (q* . rho / sum rho) 1, the per-state projection that makes q* admissible.
Vector project_q_star(const Vector& q_star, const Vector& rho);

/// Residual ||d + B J||_inf / max(1, ||d||_inf) between the Maxwell-Stefan driving
/// forces and the Fick-Onsager fluxes built from the same gradient data.
double flux_equivalence_check(const Vector& rho, double theta, const Vector& grad_q,
                              double grad_inv_theta, const FrictionSpec& b,
                              const Vector& q_star);

/// Fick-Onsager flux J = -M grad_q - M_soret grad(1/theta).
Vector fick_onsager_flux(const OnsagerMatrices& m, const Vector& grad_q, double grad_inv_theta);

enum class CoercivityKind { M2, M3 };

struct CoercivityCertificate {
    CoercivityKind kind = CoercivityKind::M2;
    double c_M = 0.0;
    Vector witness;
};

/// Smallest eigenvalue of M restricted to span{1}^perp.
CoercivityCertificate certify_m2(const OnsagerMatrices& m);

struct ReducedCoercivity {
    bool pass = true;
    double min_eigenvalue = 0.0;
    double bound = 0.0;  ///< c_M / n
    Vector witness;      ///< violating (or minimizing) y in R^{n-1}
};

/// Checks that the leading (n-1)x(n-1) block is bounded below by c_M / n.
ReducedCoercivity reduced_coercivity_check(const OnsagerMatrices& m, double c_M,
                                           int samples = 0, unsigned seed = 1);

/// A state-dependent matrix model (rho, theta) -> OnsagerMatrices.
class MatrixModel {
public:
    virtual ~MatrixModel() = default;

    virtual OnsagerMatrices evaluate(const Vector& rho, double theta) const = 0;

    /// Defaults to central differences; built-in models override with exact derivatives.
    virtual OnsagerDerivatives derivatives(const Vector& rho, double theta) const;

    virtual MatrixKind kind() const = 0;
    virtual std::string description() const = 0;

    int species() const { return species_; }

protected:
    explicit MatrixModel(int species) : species_(species) {}

private:
    int species_;
};

using MatrixModelPtr = std::shared_ptr<const MatrixModel>;

struct StateSample {
    Vector rho;
    double theta;
};

/// Infimum over the samples of min_z z.Mz / sum rho_i (Pi z)_i^2, via a generalized
/// eigenproblem on span{1}^perp.
CoercivityCertificate certify_m3(const MatrixModel& model, std::span<const StateSample> samples);

/// Pointwise M3 quotient at one evaluation.
CoercivityCertificate certify_m3_at(const OnsagerMatrices& m, const Vector& rho);

/// Named parameters such as "c=1 soret=0.1,-0.1"; each value is a list.
using ModelParams = std::map<std::string, std::vector<double>>;

ModelParams parse_model_params(std::string_view text);

using CustomModelFn = std::function<OnsagerMatrices(const Vector& rho, double theta)>;

/// name in {constant_pi, maxwell_stefan, degenerate_pirhopi, custom}.
///
/// constant_pi:        c (default 1), soret (n values, default 0); M = c Pi, M_i = theta (Pi soret)_i
/// maxwell_stefan:     b (1 value or n(n-1)/2 upper-triangle values), qstar (n values, default 0)
/// degenerate_pirhopi: c (default 1), soret (default 0), qstar (n values, default 0);
///                     M = c Pi R Pi, M_i = soret theta (Pi R Pi q*)_i
/// custom:             requires `fn`
MatrixModelPtr builtin_matrix_model(std::string_view name, const ModelParams& params, int n,
                                    CustomModelFn fn = {});

/// Symmetric friction coefficients from the maxwell_stefan parameter `b`
/// (one value, or n(n-1)/2 upper-triangle values in row order).
Matrix friction_coefficients(const ModelParams& params, int n);

MatrixModelPtr custom_matrix_model(int n, CustomModelFn fn, std::string description = "custom");

}  // namespace msf
