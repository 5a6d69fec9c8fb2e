#include "msf/scheme.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/SparseLU>

#include "msf/errors.hpp"

namespace msf {

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;
using SparseMatrix = Eigen::SparseMatrix<double>;

/// (b - a) / (log b - log a), with a series near a = b.
double log_mean(double a, double b) {
    const double u = (b - a) / (b + a);
    if (std::abs(u) < 1e-3) {
        const double u2 = u * u;
        return 0.5 * (a + b) / (1.0 + u2 * (1.0 / 3.0 + u2 * (1.0 / 5.0 + u2 / 7.0)));
    }
    return (b - a) / (std::log(b) - std::log(a));
}

struct NodeState {
    Vector rho;
    Vector p;
    double theta = 1.0;
    Matrix M;
    Vector S;
    std::vector<Matrix> dM;  // per local unknown c (c = n-1 is w)
    std::vector<Vector> dS;
};

class Assembler {
public:
    Assembler(const EntropyState& y_prev, const Vector& rho_total, const SchemeConfig& cfg)
        : cfg_(cfg), rho_total_(rho_total), n_(y_prev.species()), N_(y_prev.nodes()) {
        if (rho_total.size() != N_ || cfg.grid.cells() != N_) {
            throw Error("state size does not match the grid");
        }
        prev_ = to_mixture_state(y_prev, rho_total);
        if (cfg.epsilon > 0.0) {
            bilap_ = bilaplacian_matrix(cfg.grid);
            d2_ = second_difference_matrix(cfg.grid);
        }
    }

    int size() const { return n_ * N_; }

    Vector residual(const Vector& y) const {
        Vector R;
        assemble(y, R, nullptr, false);
        return R;
    }

    SparseMatrix jacobian(const Vector& y, bool frozen) const {
        Vector R;
        Triplets t;
        assemble(y, R, &t, frozen);
        SparseMatrix J(size(), size());
        J.setFromTriplets(t.begin(), t.end());
        return J;
    }

private:
    int idx(int k, int c) const { return k * n_ + c; }

    NodeState node(const EntropyState& y, int k, bool derivs) const {
        NodeState s;
        s.rho = densities_from_potentials(y.v.col(k), rho_total_[k]);
        s.theta = std::exp(y.w[k]);
        if (!s.rho.allFinite() || !std::isfinite(s.theta) || !(s.theta > 0.0)) {
            throw SolverError("non-finite state at node " + std::to_string(k), k);
        }
        s.p = s.rho / rho_total_[k];
        const OnsagerMatrices om = cfg_.matrix->evaluate(s.rho, s.theta);
        if (!om.M.allFinite() || !om.soret.allFinite()) {
            throw SolverError("non-finite diffusion matrix at node " + std::to_string(k), k);
        }
        s.M = om.M;
        s.S = om.soret;
        if (!derivs) return s;

        const OnsagerDerivatives d = cfg_.matrix->derivatives(s.rho, s.theta);
        s.dM.resize(n_);
        s.dS.resize(n_);
        for (int c = 0; c + 1 < n_; ++c) {
            Vector drho(n_);
            for (int i = 0; i < n_; ++i) {
                drho[i] = rho_total_[k] * s.p[i] * ((i == c ? 1.0 : 0.0) - s.p[c]);
            }
            s.dM[c] = Matrix::Zero(n_, n_);
            for (int m = 0; m < n_; ++m) s.dM[c] += d.dM_drho[m] * drho[m];
            s.dS[c] = d.dsoret_drho * drho;
        }
        s.dM[n_ - 1] = d.dM_dtheta * s.theta;
        s.dS[n_ - 1] = d.dsoret_dtheta * s.theta;
        return s;
    }

    void assemble(const Vector& packed, Vector& R, Triplets* T, bool frozen) const {
        const EntropyState y = unpack(packed, n_, N_);
        const bool jac = T != nullptr;
        const bool coeff_derivs = jac && !frozen;
        const int n = n_;
        const int N = N_;
        const double h = cfg_.grid.h();
        const double tau = cfg_.tau;
        const double eps = cfg_.epsilon;
        const double w0 = std::log(cfg_.theta0);
        const auto add = [T](int r, int c, double v) {
            if (v != 0.0) T->emplace_back(r, c, v);
        };

        std::vector<NodeState> nodes;
        nodes.reserve(N);
        for (int k = 0; k < N; ++k) nodes.push_back(node(y, k, coeff_derivs));

        R = Vector::Zero(size());

        // Time derivative, reaction, lower-order regularization, Robin exchange.
        for (int k = 0; k < N; ++k) {
            const NodeState& s = nodes[k];
            const double rt = rho_total_[k];
            for (int i = 0; i + 1 < n; ++i) {
                R[idx(k, i)] += (s.rho[i] - prev_.rho(i, k)) / tau + eps * y.v(i, k);
                if (jac) {
                    for (int c = 0; c + 1 < n; ++c) {
                        add(idx(k, i), idx(k, c),
                            rt * s.p[i] * ((i == c ? 1.0 : 0.0) - s.p[c]) / tau);
                    }
                    add(idx(k, i), idx(k, i), eps);
                }
            }
            if (cfg_.reaction == ReactionModel::linear_pi_q) {
                const Vector pq = pi_q_from_potentials(y.v.col(k));
                for (int i = 0; i + 1 < n; ++i) {
                    R[idx(k, i)] += cfg_.c_r * pq[i];
                    if (jac) {
                        for (int c = 0; c + 1 < n; ++c) {
                            add(idx(k, i), idx(k, c), cfg_.c_r * ((i == c ? 1.0 : 0.0) - 1.0 / n));
                        }
                    }
                }
            }

            const int e = idx(k, n - 1);
            const double dw = y.w[k] - w0;
            R[e] += rt * (s.theta - prev_.theta[k]) / tau + eps * (cfg_.theta0 + s.theta) * dw;
            if (jac) {
                const double low = frozen ? cfg_.theta0 + s.theta
                                          : s.theta * dw + cfg_.theta0 + s.theta;
                add(e, e, rt * s.theta / tau + eps * low);
            }
            if (k == 0 || k == N - 1) {
                R[e] -= cfg_.lambda * (cfg_.theta0 - s.theta) / h;
                if (jac) add(e, e, cfg_.lambda * s.theta / h);
            }
        }

        // Two-point fluxes. F[i] (i < n-1) is the mass flux G_i, F[n-1] the energy flux H.
        Vector g(n), F(n), dg(n), dF(n);
        for (int k = 0; k + 1 < N; ++k) {
            const NodeState& a = nodes[k];
            const NodeState& b = nodes[k + 1];
            const Matrix Mf = 0.5 * (a.M + b.M);
            const Vector Sf = 0.5 * (a.S + b.S);
            const double kf = 0.5 * (cfg_.kappa(a.theta) + cfg_.kappa(b.theta));
            const double de = std::exp(-y.w[k + 1]) - std::exp(-y.w[k]);
            const double dtheta = b.theta - a.theta;

            if (cfg_.formulation == Formulation::potential) {
                for (int j = 0; j + 1 < n; ++j) g[j] = y.v(j, k + 1) - y.v(j, k);
                g[n - 1] = 0.0;
            } else {
                for (int j = 0; j < n; ++j) {
                    g[j] = (b.rho[j] - a.rho[j]) / log_mean(a.rho[j], b.rho[j]);
                }
            }
            for (int i = 0; i + 1 < n; ++i) F[i] = (Mf.row(i).dot(g) + Sf[i] * de) / h;
            F[n - 1] = (kf * dtheta + Sf.dot(g)) / h;

            for (int i = 0; i < n; ++i) {
                R[idx(k, i)] -= F[i] / h;
                R[idx(k + 1, i)] += F[i] / h;
            }
            if (!jac) continue;

            for (int side = 0; side < 2; ++side) {
                const NodeState& s = side == 0 ? a : b;
                const int node_k = k + side;
                const double sigma = side == 0 ? -1.0 : 1.0;
                for (int c = 0; c < n; ++c) {
                    const bool is_w = c == n - 1;
                    dg.setZero();
                    if (!is_w) {
                        if (cfg_.formulation == Formulation::potential) {
                            dg[c] = sigma;
                        } else {
                            for (int j = 0; j < n; ++j) {
                                dg[j] = sigma * ((j == c ? 1.0 : 0.0) - s.p[c]);
                            }
                        }
                    }
                    const double dde = is_w ? -sigma * std::exp(-y.w[node_k]) : 0.0;
                    const double ddtheta = is_w ? sigma * s.theta : 0.0;
                    for (int i = 0; i + 1 < n; ++i) {
                        double v = Mf.row(i).dot(dg) + Sf[i] * dde;
                        if (coeff_derivs) v += 0.5 * (s.dM[c].row(i).dot(g) + s.dS[c][i] * de);
                        dF[i] = v / h;
                    }
                    double v = kf * ddtheta + Sf.dot(dg);
                    if (coeff_derivs) {
                        v += 0.5 * s.dS[c].dot(g);
                        if (is_w) v += 0.5 * cfg_.kappa.derivative(s.theta) * s.theta * dtheta;
                    }
                    dF[n - 1] = v / h;
                    for (int i = 0; i < n; ++i) {
                        add(idx(k, i), idx(node_k, c), -dF[i] / h);
                        add(idx(k + 1, i), idx(node_k, c), dF[i] / h);
                    }
                }
            }
        }

        if (eps > 0.0) assemble_higher_order(y, R, T, frozen);

        for (int r = 0; r < size(); ++r) {
            if (!std::isfinite(R[r])) {
                throw SolverError("non-finite residual at node " + std::to_string(r / n), r / n);
            }
        }
    }

    void assemble_higher_order(const EntropyState& y, Vector& R, Triplets* T, bool frozen) const {
        const int n = n_;
        const int N = N_;
        const double h = cfg_.grid.h();
        const double eps = cfg_.epsilon;
        const bool jac = T != nullptr;

        for (int i = 0; i + 1 < n; ++i) {
            const Vector av = bilap_ * y.v.row(i).transpose();
            for (int k = 0; k < N; ++k) R[idx(k, i)] += eps * av[k];
            if (jac) {
                for (int col = 0; col < bilap_.outerSize(); ++col) {
                    for (SparseMatrix::InnerIterator it(bilap_, col); it; ++it) {
                        T->emplace_back(idx(static_cast<int>(it.row()), i),
                                        idx(static_cast<int>(it.col()), i), eps * it.value());
                    }
                }
            }
        }

        const int e = n - 1;
        Vector weights(N - 2);
        for (int m = 1; m + 1 < N; ++m) weights[m - 1] = std::exp(y.w[m]);
        const Vector d2w = second_difference(cfg_.grid, y.w);
        const Vector bw = weighted_bilaplacian(cfg_.grid, y.w, weights);
        for (int k = 0; k < N; ++k) R[idx(k, e)] += eps * bw[k];
        if (jac) {
            const SparseMatrix A = d2_.transpose() * weights.asDiagonal() * d2_;
            for (int col = 0; col < A.outerSize(); ++col) {
                for (SparseMatrix::InnerIterator it(A, col); it; ++it) {
                    T->emplace_back(idx(static_cast<int>(it.row()), e),
                                    idx(static_cast<int>(it.col()), e), eps * it.value());
                }
            }
            if (!frozen) {
                const double h2 = h * h;
                for (int m = 1; m + 1 < N; ++m) {
                    const double s = eps * weights[m - 1] * d2w[m - 1] / h2;
                    T->emplace_back(idx(m - 1, e), idx(m, e), s);
                    T->emplace_back(idx(m, e), idx(m, e), -2.0 * s);
                    T->emplace_back(idx(m + 1, e), idx(m, e), s);
                }
            }
        }

        const double h3 = h * h * h;
        for (int k = 0; k + 1 < N; ++k) {
            const double dw = y.w[k + 1] - y.w[k];
            const double wt = std::exp(0.5 * (y.w[k] + y.w[k + 1]));
            const double P = wt * dw * dw * dw / h3;
            R[idx(k, e)] -= eps * P / h;
            R[idx(k + 1, e)] += eps * P / h;
            if (!jac) continue;
            double dP_left, dP_right;
            if (frozen) {
                dP_right = wt * dw * dw / h3;
                dP_left = -dP_right;
            } else {
                dP_left = 0.5 * P - 3.0 * wt * dw * dw / h3;
                dP_right = 0.5 * P + 3.0 * wt * dw * dw / h3;
            }
            T->emplace_back(idx(k, e), idx(k, e), -eps * dP_left / h);
            T->emplace_back(idx(k, e), idx(k + 1, e), -eps * dP_right / h);
            T->emplace_back(idx(k + 1, e), idx(k, e), eps * dP_left / h);
            T->emplace_back(idx(k + 1, e), idx(k + 1, e), eps * dP_right / h);
        }
    }

    const SchemeConfig& cfg_;
    Vector rho_total_;
    int n_;
    int N_;
    MixtureState prev_;
    SparseMatrix bilap_;
    SparseMatrix d2_;
};

double inf_norm(const Vector& r) { return r.size() ? r.cwiseAbs().maxCoeff() : 0.0; }

struct SolveOutcome {
    bool converged = false;
    int iterations = 0;
    double residual = 0.0;
};

/// Damped iteration y <- y - alpha L(y)^{-1} R(y) with residual-norm backtracking.
template <class Linearization>
SolveOutcome damped_iteration(const Assembler& A, Vector& y, const NewtonOptions& opt,
                              int max_iter, Linearization&& linearize) {
    SolveOutcome out;
    Vector R = A.residual(y);
    out.residual = inf_norm(R);
    Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
    for (int it = 0; it < max_iter; ++it) {
        if (out.residual <= opt.tol) {
            out.converged = true;
            return out;
        }
        const SparseMatrix J = linearize(y);
        lu.compute(J);
        if (lu.info() != Eigen::Success) return out;
        const Vector dy = lu.solve(-R);
        if (lu.info() != Eigen::Success || !dy.allFinite()) return out;
        ++out.iterations;

        const double norm0 = R.norm();
        double alpha = 1.0;
        bool accepted = false;
        while (alpha >= opt.damping_min) {
            const Vector trial = y + alpha * dy;
            try {
                Vector Rt = A.residual(trial);
                const double inf_t = inf_norm(Rt);
                if (Rt.norm() < norm0 || inf_t <= opt.tol) {
                    y = trial;
                    R = std::move(Rt);
                    out.residual = inf_t;
                    accepted = true;
                    break;
                }
            } catch (const Error&) {
                // Trial left the admissible range; shorten the step.
            }
            alpha *= 0.5;
        }
        if (!accepted) return out;
    }
    out.converged = out.residual <= opt.tol;
    return out;
}

}  // namespace

std::string_view to_string(Formulation f) {
    return f == Formulation::potential ? "potential" : "density";
}

std::string_view to_string(ReactionModel r) {
    return r == ReactionModel::none ? "none" : "linear_pi_q";
}

void SchemeConfig::validate(int species) const {
    if (species < 2) throw ConfigError("n", "at least two species are required");
    if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("time.tau", "must be positive");
    if (!(epsilon >= 0.0)) throw ConfigError("epsilon", "must be nonnegative");
    if (epsilon > 0.0 && grid.cells() < 5) {
        throw ConfigError("domain.cells", "epsilon > 0 requires at least 5 cells");
    }
    if (!(lambda >= 0.0)) throw ConfigError("boundary.lambda", "must be nonnegative");
    if (!(theta0 > 0.0)) throw ConfigError("boundary.theta0", "must be positive");
    if (!(kappa.C > 0.0)) throw ConfigError("kappa", "kappa.C must be positive");
    if (!(kappa.c >= 0.0)) throw ConfigError("kappa", "kappa.c must be nonnegative");
    if (kappa.c > kappa.C) {
        throw ConfigError("kappa", "lower constant kappa.c exceeds upper constant kappa.C");
    }
    if (lambda > 0.0 && !(kappa.c > 0.0)) {
        throw ConfigError("kappa", "kappa.c must be positive when boundary.lambda > 0");
    }
    if (!matrix) throw ConfigError("matrix.model", "no matrix model");
    if (matrix->species() != species) {
        throw ConfigError("matrix.model", "model species count does not match n");
    }
    if (reaction == ReactionModel::linear_pi_q && !(c_r > 0.0)) {
        throw ConfigError("reaction.c_r", "must be positive for linear_pi_q");
    }
    if (!(newton.tol > 0.0)) throw ConfigError("newton.tol", "must be positive");
    if (newton.max_iter < 1) throw ConfigError("newton.max_iter", "must be at least 1");
    if (!(newton.damping_min > 0.0 && newton.damping_min <= 1.0)) {
        throw ConfigError("newton.damping_min", "must lie in (0, 1]");
    }
}

Vector pack(const EntropyState& y) {
    const int n = y.species();
    const int N = y.nodes();
    Vector out(n * N);
    for (int k = 0; k < N; ++k) {
        for (int c = 0; c + 1 < n; ++c) out[k * n + c] = y.v(c, k);
        out[k * n + n - 1] = y.w[k];
    }
    return out;
}

EntropyState unpack(const Vector& y, int species, int nodes) {
    if (y.size() != static_cast<Eigen::Index>(species) * nodes) {
        throw Error("packed state has the wrong size");
    }
    EntropyState out{Matrix(species - 1, nodes), Vector(nodes)};
    for (int k = 0; k < nodes; ++k) {
        for (int c = 0; c + 1 < species; ++c) out.v(c, k) = y[k * species + c];
        out.w[k] = y[k * species + species - 1];
    }
    return out;
}

Vector residual(const EntropyState& y, const EntropyState& y_prev, const Vector& rho_total,
                const SchemeConfig& cfg) {
    return Assembler(y_prev, rho_total, cfg).residual(pack(y));
}

Eigen::SparseMatrix<double> jacobian(const EntropyState& y, const EntropyState& y_prev,
                                     const Vector& rho_total, const SchemeConfig& cfg) {
    return Assembler(y_prev, rho_total, cfg).jacobian(pack(y), false);
}

Eigen::SparseMatrix<double> frozen_jacobian(const EntropyState& y, const EntropyState& y_prev,
                                            const Vector& rho_total, const SchemeConfig& cfg) {
    return Assembler(y_prev, rho_total, cfg).jacobian(pack(y), true);
}

double relative_entropy(const MixtureState& s, const Grid1D& g, double theta0) {
    double total = 0.0;
    for (int k = 0; k < s.nodes(); ++k) {
        total += entropy_density(s.rho.col(k), s.theta[k]) + s.rho_total[k] * s.theta[k] / theta0;
    }
    return total * g.h();
}

void summarize_state(const MixtureState& s, const Grid1D& g, StepReport& report) {
    const int n = s.species();
    report.masses.resize(n);
    for (int i = 0; i < n; ++i) report.masses[i] = integrate(g, s.rho.row(i).transpose());
    report.energy = integrate(g, s.rho_total.cwiseProduct(s.theta));
    report.min_rho = s.rho.rowwise().minCoeff();
    report.max_rho = s.rho.rowwise().maxCoeff();
    report.min_theta = s.theta.minCoeff();
    report.max_theta = s.theta.maxCoeff();
}

StepResult solve_step(const EntropyState& y_prev, const Vector& rho_total,
                      const SchemeConfig& cfg) {
    const Assembler A(y_prev, rho_total, cfg);
    const int n = y_prev.species();
    const int N = y_prev.nodes();
    const Vector y0 = pack(y_prev);

    StepReport report;
    report.tau = cfg.tau;
    Vector y = y0;
    SolveOutcome newton = damped_iteration(A, y, cfg.newton, cfg.newton.max_iter,
                                           [&](const Vector& z) { return A.jacobian(z, false); });
    report.newton_iterations = newton.iterations;
    report.residual_norm = newton.residual;
    if (!newton.converged && cfg.newton.picard_fallback) {
        y = y0;
        const SolveOutcome picard =
            damped_iteration(A, y, cfg.newton, cfg.newton.picard_max_iter,
                             [&](const Vector& z) { return A.jacobian(z, true); });
        report.used_picard = true;
        report.picard_iterations = picard.iterations;
        report.residual_norm = picard.residual;
        if (!picard.converged) {
            throw NonConvergence(newton.iterations + picard.iterations, picard.residual);
        }
    } else if (!newton.converged) {
        throw NonConvergence(newton.iterations, newton.residual);
    }

    StepResult out;
    out.y = unpack(y, n, N);
    out.state = to_mixture_state(out.y, rho_total);
    const MixtureState prev = to_mixture_state(y_prev, rho_total);
    report.entropy_before = relative_entropy(prev, cfg.grid, cfg.theta0);
    report.entropy_after = relative_entropy(out.state, cfg.grid, cfg.theta0);
    summarize_state(out.state, cfg.grid, report);
    report.boundary_heat_exchange =
        cfg.tau * cfg.lambda * (2.0 * cfg.theta0 - out.state.theta[0] - out.state.theta[N - 1]);
    out.report = std::move(report);
    return out;
}

MixtureState admissible_initial_state(const MixtureState& initial) {
    Vector rho_total(initial.nodes());
    for (int k = 0; k < initial.nodes(); ++k) rho_total[k] = total_density(initial.rho.col(k));
    return to_mixture_state(to_entropy_state(initial), rho_total);
}

RunSummary run(const MixtureState& initial, const SchemeConfig& cfg, double t_end,
               const StepCallback& on_step) {
    cfg.validate(initial.species());
    if (!(t_end >= 0.0)) throw ConfigError("time.t_end", "must be nonnegative");

    RunSummary summary;
    summary.final_state = admissible_initial_state(initial);
    const Vector rho_total = summary.final_state.rho_total;
    EntropyState y = to_entropy_state(summary.final_state);
    constexpr int kMaxHalvings = 10;

    const long long planned = static_cast<long long>(std::ceil(t_end / cfg.tau - 1e-9));
    for (long long step = 0; step < planned; ++step) {
        const double t0 = summary.t;
        const double t1 = step + 1 == planned ? t_end : (step + 1) * cfg.tau;
        const double dt = t1 - t0;

        bool done = false;
        std::string last_error;
        for (int halvings = 0; halvings <= kMaxHalvings && !done; ++halvings) {
            const int substeps = 1 << halvings;
            SchemeConfig sub = cfg;
            sub.tau = dt / substeps;
            std::vector<StepResult> accepted;
            accepted.reserve(substeps);
            EntropyState ys = y;
            try {
                for (int s = 0; s < substeps; ++s) {
                    accepted.push_back(solve_step(ys, rho_total, sub));
                    ys = accepted.back().y;
                }
            } catch (const NonConvergence& e) {
                last_error = e.what();
                continue;
            } catch (const SolverError& e) {
                last_error = e.what();
                continue;
            }
            MixtureState prev = summary.final_state;
            for (int s = 0; s < substeps; ++s) {
                StepResult& r = accepted[s];
                r.report.halvings = halvings;
                const double t = s + 1 == substeps ? t1 : t0 + (s + 1) * sub.tau;
                if (on_step) on_step(StepRecord{t, prev, r.state, r.report});
                prev = r.state;
                ++summary.steps;
            }
            summary.halvings += halvings;
            summary.final_state = std::move(prev);
            y = ys;
            summary.t = t1;
            done = true;
        }
        if (!done) throw Abort(t0, last_error);
    }
    return summary;
}

}  // namespace msf
