#pragma once

// Thermodynamic state algebra for an ideal mixture with unit molar masses and
// unit heat capacity: entropy, chemical potentials, and the change of variables
// between partial densities and entropy variables.

#include <Eigen/Dense>

namespace msf {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Nodal partial densities and temperature. `rho` is n x N (one column per node).
struct MixtureState {
    Matrix rho;
    Vector theta;
    Vector rho_total;

    int species() const { return static_cast<int>(rho.rows()); }
    int nodes() const { return static_cast<int>(rho.cols()); }
};

/// Scheme unknowns: relative potentials v_i = log(rho_i / rho_n), i < n, and w = log(theta).
/// `v` is (n-1) x N.
struct EntropyState {
    Matrix v;
    Vector w;

    int species() const { return static_cast<int>(v.rows()) + 1; }
    int nodes() const { return static_cast<int>(w.size()); }
};

/// Thermo-chemical potentials q_i = log(rho_i / theta) and their mean-free part Pi q.
/// Both are n x N.
struct PotentialSet {
    Matrix q;
    Matrix pi_q;
};

/// Mixture entropy h = sum rho_i (log rho_i - 1) - rho log theta.
double entropy_density(const Vector& rho, double theta);

/// Inverse of v_i = log(rho_i / rho_n): softmax with v_n = 0, evaluated with a max shift.
/// The largest component absorbs the rounding defect so that `total_density` of the
/// result reproduces rho_total bitwise.
Vector densities_from_potentials(const Eigen::Ref<const Vector>& v, double rho_total);

/// Left-to-right sum of the components; the canonical total used for closure checks.
double total_density(const Eigen::Ref<const Vector>& rho);

/// Reduced potentials v (n-1 entries) at one node.
Vector relative_potentials(const Eigen::Ref<const Vector>& rho);

/// Pi z = z - mean(z).
Vector project_pi(const Eigen::Ref<const Vector>& z);

/// (Pi q)_i computed from the reduced potentials, v_n = 0.
Vector pi_q_from_potentials(const Eigen::Ref<const Vector>& v);

EntropyState to_entropy_state(const MixtureState& state);
MixtureState to_mixture_state(const EntropyState& y, const Vector& rho_total);

/// Entropy variables together with q and Pi q at every node.
std::pair<EntropyState, PotentialSet> potentials_from_densities(const MixtureState& state);

struct FreeEnergy {
    double psi;     ///< Helmholtz free energy
    double s;       ///< physical entropy -dpsi/dtheta
    Vector mu;      ///< chemical potentials
    double energy;  ///< E = rho theta
    double pressure;
};

FreeEnergy free_energy_and_derived(const Vector& rho, double theta);

/// Hessian of h in the variables (rho_1..rho_{n-1}, theta) with rho_n = rho_total - sum.
Matrix entropy_hessian(const Eigen::Ref<const Vector>& rho_prime, double theta, double rho_total);

/// Throws DomainError when any density or the temperature is not strictly positive.
void require_admissible(const Eigen::Ref<const Vector>& rho, double theta);

}  // namespace msf
