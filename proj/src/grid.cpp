#include "msf/grid.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "msf/errors.hpp"

namespace msf {

namespace {

void require_size(const Grid1D& g, const Eigen::VectorXd& f, Eigen::Index expected,
                  const char* what) {
    if (f.size() != expected) {
        throw Error(std::string(what) + ": expected " + std::to_string(expected) +
                    " values, got " + std::to_string(f.size()) + " (grid has " +
                    std::to_string(g.cells()) + " cells)");
    }
}

void require_bilaplacian_cells(const Grid1D& g) {
    if (g.cells() < 5) throw ConfigError("domain.cells", "bilaplacian requires at least 5 cells");
}

}  // namespace

Grid1D::Grid1D(double length, int cells) : length_(length), cells_(cells) {
    if (!(length > 0.0) || !std::isfinite(length)) {
        throw ConfigError("domain.length", "must be positive and finite");
    }
    if (cells < 4) throw ConfigError("domain.cells", "at least 4 cells are required");
    h_ = length / cells;
}

Eigen::VectorXd Grid1D::nodes() const {
    Eigen::VectorXd x(cells_);
    for (int k = 0; k < cells_; ++k) x[k] = this->x(k);
    return x;
}

Eigen::VectorXd grad(const Grid1D& g, const Eigen::VectorXd& f) {
    const int N = g.cells();
    require_size(g, f, N, "grad");
    Eigen::VectorXd out = Eigen::VectorXd::Zero(N + 1);
    for (int k = 0; k + 1 < N; ++k) out[k + 1] = (f[k + 1] - f[k]) / g.h();
    return out;
}

Eigen::VectorXd div_flux(const Grid1D& g, const Eigen::VectorXd& F) {
    const int N = g.cells();
    require_size(g, F, N + 1, "div_flux");
    Eigen::VectorXd out(N);
    for (int k = 0; k < N; ++k) out[k] = (F[k + 1] - F[k]) / g.h();
    return out;
}

double integrate(const Grid1D& g, const Eigen::VectorXd& f) {
    require_size(g, f, g.cells(), "integrate");
    double s = 0.0;
    for (Eigen::Index k = 0; k < f.size(); ++k) s += f[k];
    return s * g.h();
}

std::pair<double, double> boundary_values(const Grid1D& g, const Eigen::VectorXd& f) {
    const int N = g.cells();
    require_size(g, f, N, "boundary_values");
    return {1.5 * f[0] - 0.5 * f[1], 1.5 * f[N - 1] - 0.5 * f[N - 2]};
}

Eigen::VectorXd second_difference(const Grid1D& g, const Eigen::VectorXd& f) {
    const int N = g.cells();
    require_size(g, f, N, "second_difference");
    const double h2 = g.h() * g.h();
    Eigen::VectorXd out(N - 2);
    for (int m = 1; m + 1 < N; ++m) out[m - 1] = (f[m - 1] - 2.0 * f[m] + f[m + 1]) / h2;
    return out;
}

Eigen::SparseMatrix<double> second_difference_matrix(const Grid1D& g) {
    const int N = g.cells();
    const double h2 = g.h() * g.h();
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(3 * (N - 2));
    for (int m = 1; m + 1 < N; ++m) {
        t.emplace_back(m - 1, m - 1, 1.0 / h2);
        t.emplace_back(m - 1, m, -2.0 / h2);
        t.emplace_back(m - 1, m + 1, 1.0 / h2);
    }
    Eigen::SparseMatrix<double> D(N - 2, N);
    D.setFromTriplets(t.begin(), t.end());
    return D;
}

Eigen::VectorXd weighted_bilaplacian(const Grid1D& g, const Eigen::VectorXd& f,
                                     const Eigen::VectorXd& weights) {
    require_bilaplacian_cells(g);
    const int N = g.cells();
    require_size(g, weights, N - 2, "weighted_bilaplacian weights");
    const Eigen::VectorXd d2 = second_difference(g, f);
    const double h2 = g.h() * g.h();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(N);
    for (int m = 1; m + 1 < N; ++m) {
        const double s = weights[m - 1] * d2[m - 1] / h2;
        out[m - 1] += s;
        out[m] -= 2.0 * s;
        out[m + 1] += s;
    }
    return out;
}

Eigen::VectorXd discrete_bilaplacian(const Grid1D& g, const Eigen::VectorXd& f) {
    return weighted_bilaplacian(g, f, Eigen::VectorXd::Ones(g.cells() - 2));
}

Eigen::SparseMatrix<double> bilaplacian_matrix(const Grid1D& g) {
    require_bilaplacian_cells(g);
    const Eigen::SparseMatrix<double> D = second_difference_matrix(g);
    return Eigen::SparseMatrix<double>(D.transpose() * D);
}

}  // namespace msf
