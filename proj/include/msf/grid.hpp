#pragma once

// Uniform cell-centered grid on [0, L] with two-point difference operators.
// Face arrays have N+1 entries; entries 0 and N are the boundary faces.

#include <utility>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

namespace msf {

class Grid1D {
public:
    Grid1D() = default;
    Grid1D(double length, int cells);

    double length() const { return length_; }
    int cells() const { return cells_; }
    double h() const { return h_; }

    /// Center of cell k.
    double x(int k) const { return (k + 0.5) * h_; }
    Eigen::VectorXd nodes() const;

private:
    double length_ = 1.0;
    int cells_ = 4;
    double h_ = 0.25;
};

/// Face differences (f_{k+1} - f_k)/h at interior faces, zero at the two boundary faces.
Eigen::VectorXd grad(const Grid1D& g, const Eigen::VectorXd& f);

/// (F_{k+1/2} - F_{k-1/2})/h from N+1 face values (boundary faces included).
Eigen::VectorXd div_flux(const Grid1D& g, const Eigen::VectorXd& F);

/// Midpoint rule sum_k f_k h.
double integrate(const Grid1D& g, const Eigen::VectorXd& f);

/// Degree-one extrapolation of the two outermost cells to x = 0 and x = L.
std::pair<double, double> boundary_values(const Grid1D& g, const Eigen::VectorXd& f);

/// Second differences at cells 1..N-2 (N-2 entries).
Eigen::VectorXd second_difference(const Grid1D& g, const Eigen::VectorXd& f);

/// Sparse (N-2) x N matrix of `second_difference`.
Eigen::SparseMatrix<double> second_difference_matrix(const Grid1D& g);

/// D2^T D2 f: the (1,-4,6,-4,1)/h^4 stencil in the interior with the natural closure.
/// Symmetric positive semidefinite; annihilates linear fields. Requires N >= 5.
Eigen::VectorXd discrete_bilaplacian(const Grid1D& g, const Eigen::VectorXd& f);

/// D2^T diag(weights) D2 f with one weight per interior cell (N-2 entries).
Eigen::VectorXd weighted_bilaplacian(const Grid1D& g, const Eigen::VectorXd& f,
                                     const Eigen::VectorXd& weights);

Eigen::SparseMatrix<double> bilaplacian_matrix(const Grid1D& g);

}  // namespace msf
