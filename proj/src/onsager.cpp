#include "msf/onsager.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "msf/errors.hpp"

namespace msf {

namespace {

/// Orthonormal (Helmert) basis of span{1}^perp as the columns of an n x (n-1) matrix.
Matrix mean_free_basis(int n) {
    Matrix U = Matrix::Zero(n, n - 1);
    for (int k = 1; k < n; ++k) {
        const double scale = 1.0 / std::sqrt(static_cast<double>(k) * (k + 1));
        for (int i = 0; i < k; ++i) U(i, k - 1) = scale;
        U(k, k - 1) = -k * scale;
    }
    return U;
}

Matrix pi_matrix(int n) {
    return Matrix::Identity(n, n) - Matrix::Constant(n, n, 1.0 / n);
}

Matrix symmetric_part(const Matrix& a) { return 0.5 * (a + a.transpose()); }

/// Smallest eigenpair of a symmetric matrix.
std::pair<double, Vector> smallest_eigenpair(const Matrix& a) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetric_part(a));
    return {es.eigenvalues()[0], es.eigenvectors().col(0)};
}

double clamp_roundoff(double value, double scale) {
    return (value < 0.0 && value > -1e-13 * std::max(1.0, scale)) ? 0.0 : value;
}

class ConstantPiModel final : public MatrixModel {
public:
    ConstantPiModel(int n, double c, Vector soret)
        : MatrixModel(n), c_(c), soret_(project_pi(soret)) {}

    OnsagerMatrices evaluate(const Vector&, double theta) const override {
        return {c_ * pi_matrix(species()), theta * soret_, MatrixKind::constant};
    }

    OnsagerDerivatives derivatives(const Vector&, double) const override {
        const int n = species();
        return {std::vector<Matrix>(n, Matrix::Zero(n, n)), Matrix::Zero(n, n),
                Matrix::Zero(n, n), soret_};
    }

    MatrixKind kind() const override { return MatrixKind::constant; }

    std::string description() const override {
        std::ostringstream os;
        os << "constant_pi(c=" << c_ << ")";
        return os.str();
    }

private:
    double c_;
    Vector soret_;
};

class MaxwellStefanModel final : public MatrixModel {
public:
    MaxwellStefanModel(int n, FrictionSpec friction, Vector q_star)
        : MatrixModel(n), friction_(std::move(friction)), q_star_(std::move(q_star)) {}

    OnsagerMatrices evaluate(const Vector& rho, double theta) const override {
        return onsager_from_friction(rho, theta, friction_, project_q_star(q_star_, rho));
    }

    OnsagerDerivatives derivatives(const Vector& rho, double theta) const override {
        if (friction_.state_dependent) return MatrixModel::derivatives(rho, theta);

        const int n = species();
        const Matrix& b = friction_.b;
        const FrictionMatrixB fb = friction_matrix(rho, b);
        const Matrix Bs = group_inverse(fb);
        const Matrix Bs2 = Bs * Bs;
        const double rt = rho.sum();
        const Matrix Z = rho * Vector::Ones(n).transpose() / rt;  // I - B B#
        const Matrix R = rho.asDiagonal();
        const Matrix P = Matrix::Identity(n, n) - Vector::Ones(n) * rho.transpose() / rt;
        const double qr = q_star_.dot(rho);
        const Vector u = (rho.array() * q_star_.array()).matrix() - (qr / rt) * rho;
        const Vector soret = -theta * (Bs * u);

        OnsagerDerivatives d;
        d.dM_drho.reserve(n);
        d.dsoret_drho.resize(n, n);
        for (int m = 0; m < n; ++m) {
            Matrix dB = Matrix::Zero(n, n);
            for (int i = 0; i < n; ++i) {
                if (i == m) continue;
                dB(i, i) = b(i, m);
                dB(m, i) = -b(m, i);
            }
            const Matrix dBs = -Bs * dB * Bs + Bs2 * dB * Z + Z * dB * Bs2;
            Matrix dR = Matrix::Zero(n, n);
            dR(m, m) = 1.0;
            Vector dw = -rho / (rt * rt);
            dw[m] += 1.0 / rt;
            const Matrix dP = -Vector::Ones(n) * dw.transpose();
            d.dM_drho.push_back(symmetric_part(dBs * R * P + Bs * dR * P + Bs * R * dP));

            Vector du = -(q_star_[m] / rt - qr / (rt * rt)) * rho;
            du[m] += q_star_[m] - qr / rt;
            d.dsoret_drho.col(m) = -theta * (dBs * u + Bs * du);
        }
        d.dM_dtheta = Matrix::Zero(n, n);
        d.dsoret_dtheta = soret / theta;
        return d;
    }

    MatrixKind kind() const override { return MatrixKind::maxwell_stefan; }

    std::string description() const override { return "maxwell_stefan"; }

private:
    FrictionSpec friction_;
    Vector q_star_;
};

class DegenerateModel final : public MatrixModel {
public:
    DegenerateModel(int n, double c, double soret, Vector q_star)
        : MatrixModel(n), c_(c), soret_(soret), q_star_(std::move(q_star)) {}

    OnsagerMatrices evaluate(const Vector& rho, double theta) const override {
        const Matrix pi = pi_matrix(species());
        const Matrix prp = pi * rho.asDiagonal() * pi;
        return {c_ * prp, soret_ * theta * (prp * q_star_), MatrixKind::degenerate};
    }

    OnsagerDerivatives derivatives(const Vector& rho, double theta) const override {
        const int n = species();
        const Matrix pi = pi_matrix(n);
        OnsagerDerivatives d;
        d.dM_drho.reserve(n);
        d.dsoret_drho.resize(n, n);
        for (int m = 0; m < n; ++m) {
            const Vector pm = pi.col(m);
            d.dM_drho.push_back(c_ * pm * pm.transpose());
            d.dsoret_drho.col(m) = soret_ * theta * pm.dot(q_star_) * pm;
        }
        d.dM_dtheta = Matrix::Zero(n, n);
        d.dsoret_dtheta = soret_ * (pi * rho.asDiagonal() * pi * q_star_);
        return d;
    }

    MatrixKind kind() const override { return MatrixKind::degenerate; }

    std::string description() const override {
        std::ostringstream os;
        os << "degenerate_pirhopi(c=" << c_ << ")";
        return os.str();
    }

private:
    double c_;
    double soret_;
    Vector q_star_;
};

class CustomModel final : public MatrixModel {
public:
    CustomModel(int n, CustomModelFn fn, std::string description)
        : MatrixModel(n), fn_(std::move(fn)), description_(std::move(description)) {}

    OnsagerMatrices evaluate(const Vector& rho, double theta) const override {
        OnsagerMatrices m = fn_(rho, theta);
        m.kind = MatrixKind::custom;
        return m;
    }

    MatrixKind kind() const override { return MatrixKind::custom; }
    std::string description() const override { return description_; }

private:
    CustomModelFn fn_;
    std::string description_;
};

std::vector<double> param_or(const ModelParams& params, const std::string& key,
                             std::vector<double> fallback) {
    const auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
}

double scalar_param(const ModelParams& params, const std::string& key, double fallback) {
    const auto values = param_or(params, key, {fallback});
    if (values.size() != 1) throw ConfigError("matrix.params", key + " expects one value");
    return values[0];
}

Vector vector_param(const ModelParams& params, const std::string& key, int n) {
    const auto values = param_or(params, key, std::vector<double>(n, 0.0));
    if (static_cast<int>(values.size()) != n) {
        throw ConfigError("matrix.params", key + " expects " + std::to_string(n) + " values");
    }
    return Eigen::Map<const Vector>(values.data(), n);
}

void require_known_keys(const ModelParams& params, std::initializer_list<std::string_view> keys) {
    for (const auto& [key, _] : params) {
        if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
            throw ConfigError("matrix.params", "unknown parameter '" + key + "'");
        }
    }
}

}  // namespace

std::string_view to_string(MatrixKind kind) {
    switch (kind) {
        case MatrixKind::constant: return "constant";
        case MatrixKind::maxwell_stefan: return "maxwell_stefan";
        case MatrixKind::degenerate: return "degenerate";
        case MatrixKind::custom: return "custom";
    }
    return "unknown";
}

std::string check_invariants(const OnsagerMatrices& m, double tol) {
    const Eigen::Index n = m.M.rows();
    std::ostringstream err;
    if (m.M.cols() != n || m.soret.size() != n) return "dimension mismatch";
    if (!m.M.allFinite() || !m.soret.allFinite()) return "non-finite entries";
    const double scale = std::max(1.0, m.M.cwiseAbs().maxCoeff());
    const double soret_scale = std::max(1.0, m.soret.cwiseAbs().maxCoeff());
    for (Eigen::Index j = 0; j < n; ++j) {
        const double col = m.M.col(j).sum();
        if (std::abs(col) > tol * scale) err << "column " << j + 1 << " sums to " << col << "; ";
    }
    if (std::abs(m.soret.sum()) > tol * soret_scale)
        err << "soret vector sums to " << m.soret.sum() << "; ";
    const double asym = (m.M - m.M.transpose()).cwiseAbs().maxCoeff();
    if (asym > tol * scale) err << "asymmetry " << asym << "; ";
    const double lmin = Eigen::SelfAdjointEigenSolver<Matrix>(symmetric_part(m.M)).eigenvalues()[0];
    if (lmin < -tol * scale) err << "negative eigenvalue " << lmin << "; ";
    return err.str();
}

Matrix FrictionSpec::at(const Vector& rho, double theta) const {
    return state_dependent ? state_dependent(rho, theta) : b;
}

FrictionMatrixB friction_matrix(const Vector& rho, const Matrix& b) {
    const Eigen::Index n = rho.size();
    if (b.rows() != n || b.cols() != n) {
        throw ConfigError("matrix.params", "friction matrix must be " + std::to_string(n) + "x" +
                                               std::to_string(n));
    }
    const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            if (std::abs(b(i, j) - b(j, i)) > 1e-14 * scale) {
                throw ConfigError("matrix.params", "friction coefficients must be symmetric (b_" +
                                                       std::to_string(i + 1) + std::to_string(j + 1) +
                                                       " != b_" + std::to_string(j + 1) +
                                                       std::to_string(i + 1) + ")");
            }
        }
    }
    Matrix B = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i == j) continue;
            B(i, i) += b(i, j) * rho[j];
            B(i, j) = -b(i, j) * rho[i];
        }
    }
    return {std::move(B), rho};
}

Matrix group_inverse(const FrictionMatrixB& fb) {
    const Eigen::Index n = fb.B.rows();
    const double rt = fb.rho.sum();
    const Matrix Q = fb.rho * Vector::Ones(n).transpose() / rt;
    const Matrix I_Q = Matrix::Identity(n, n) - Q;
    Eigen::PartialPivLU<Matrix> lu(fb.B + Q);
    const double rcond = lu.rcond();
    if (!(rcond > 1e-13)) {
        throw SingularityError("friction matrix has a kernel of dimension > 1 (rcond " +
                               std::to_string(rcond) + ")");
    }
    return lu.solve(I_Q) * I_Q;
}

Vector project_q_star(const Vector& q_star, const Vector& rho) {
    return q_star.array() - q_star.dot(rho) / rho.sum();
}

OnsagerMatrices onsager_from_friction(const Vector& rho, double theta, const FrictionSpec& b,
                                      const Vector& q_star) {
    require_admissible(rho, theta);
    const Eigen::Index n = rho.size();
    const double orth = q_star.dot(rho);
    const double orth_scale = std::max(1.0, (q_star.cwiseAbs().array() * rho.array()).sum());
    if (std::abs(orth) > 1e-10 * orth_scale) {
        throw ConfigError("matrix.params",
                          "q_star must satisfy sum q*_i rho_i = 0 (got " + std::to_string(orth) + ")");
    }
    const FrictionMatrixB fb = friction_matrix(rho, b.at(rho, theta));
    const Matrix Bs = group_inverse(fb);
    const double rt = rho.sum();
    const Matrix P = Matrix::Identity(n, n) - Vector::Ones(n) * rho.transpose() / rt;
    OnsagerMatrices out;
    out.M = symmetric_part(Bs * rho.asDiagonal() * P);
    out.soret = -theta * (Bs * (rho.array() * q_star.array()).matrix());
    out.kind = MatrixKind::maxwell_stefan;
    return out;
}

Vector fick_onsager_flux(const OnsagerMatrices& m, const Vector& grad_q, double grad_inv_theta) {
    return -(m.M * grad_q) - m.soret * grad_inv_theta;
}

double flux_equivalence_check(const Vector& rho, double theta, const Vector& grad_q,
                              double grad_inv_theta, const FrictionSpec& b,
                              const Vector& q_star) {
    const Vector qs = project_q_star(q_star, rho);
    const OnsagerMatrices om = onsager_from_friction(rho, theta, b, qs);
    const Vector J = fick_onsager_flux(om, grad_q, grad_inv_theta);
    const FrictionMatrixB fb = friction_matrix(rho, b.at(rho, theta));

    // Driving forces assembled term by term from the same gradient data.
    const Eigen::Index n = rho.size();
    const double grad_log_theta = -theta * grad_inv_theta;
    const double grad_theta = theta * grad_log_theta;
    double total = 0.0;
    double grad_total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        total += rho[i];
        grad_total += rho[i] * (grad_q[i] + grad_log_theta);
    }
    const double grad_energy = theta * grad_total + total * grad_theta;  // grad(rho theta)
    Vector d(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        d[i] = rho[i] * grad_q[i] - rho[i] / (total * theta) * grad_energy -
               2.0 * rho[i] * theta * grad_inv_theta + qs[i] * rho[i] * grad_log_theta;
    }
    const Vector resid = d + fb.B * J;
    return resid.cwiseAbs().maxCoeff() / std::max(1.0, d.cwiseAbs().maxCoeff());
}

CoercivityCertificate certify_m2(const OnsagerMatrices& m) {
    const int n = static_cast<int>(m.M.rows());
    const Matrix U = mean_free_basis(n);
    const auto [lmin, vec] = smallest_eigenpair(U.transpose() * m.M * U);
    return {CoercivityKind::M2, clamp_roundoff(lmin, m.M.cwiseAbs().maxCoeff()), U * vec};
}

ReducedCoercivity reduced_coercivity_check(const OnsagerMatrices& m, double c_M, int samples,
                                           unsigned seed) {
    const int n = static_cast<int>(m.M.rows());
    const Matrix block = symmetric_part(m.M.topLeftCorner(n - 1, n - 1));
    ReducedCoercivity out;
    out.bound = c_M / n;
    std::tie(out.min_eigenvalue, out.witness) = smallest_eigenpair(block);
    const double tol = 1e-12 * std::max({1.0, std::abs(out.bound), block.cwiseAbs().maxCoeff()});
    out.pass = out.min_eigenvalue >= out.bound - tol;

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    for (int s = 0; s < samples && out.pass; ++s) {
        Vector y(n - 1);
        for (int i = 0; i < n - 1; ++i) y[i] = normal(rng);
        if (y.dot(block * y) < out.bound * y.squaredNorm() - tol * y.squaredNorm()) {
            out.pass = false;
            out.witness = y;
        }
    }
    return out;
}

CoercivityCertificate certify_m3_at(const OnsagerMatrices& m, const Vector& rho) {
    const int n = static_cast<int>(m.M.rows());
    const Matrix U = mean_free_basis(n);
    const Matrix A = symmetric_part(U.transpose() * m.M * U);
    const Matrix W = U.transpose() * rho.asDiagonal() * U;
    Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> ges(A, W);
    if (ges.info() != Eigen::Success) {
        throw SingularityError("M3 certificate: weight matrix is not positive definite");
    }
    return {CoercivityKind::M3, clamp_roundoff(ges.eigenvalues()[0], m.M.cwiseAbs().maxCoeff()),
            U * ges.eigenvectors().col(0)};
}

CoercivityCertificate certify_m3(const MatrixModel& model, std::span<const StateSample> samples) {
    CoercivityCertificate best{CoercivityKind::M3, std::numeric_limits<double>::infinity(), {}};
    for (const auto& s : samples) {
        auto cert = certify_m3_at(model.evaluate(s.rho, s.theta), s.rho);
        if (cert.c_M < best.c_M) best = std::move(cert);
    }
    if (samples.empty()) best.c_M = 0.0;
    return best;
}

OnsagerDerivatives MatrixModel::derivatives(const Vector& rho, double theta) const {
    const int n = species();
    OnsagerDerivatives d;
    d.dM_drho.reserve(n);
    d.dsoret_drho.resize(n, n);
    for (int m = 0; m < n; ++m) {
        const double step = 1e-6 * rho[m];
        Vector up = rho, dn = rho;
        up[m] += step;
        dn[m] -= step;
        const OnsagerMatrices a = evaluate(up, theta);
        const OnsagerMatrices b = evaluate(dn, theta);
        d.dM_drho.push_back((a.M - b.M) / (2.0 * step));
        d.dsoret_drho.col(m) = (a.soret - b.soret) / (2.0 * step);
    }
    const double step = 1e-6 * theta;
    const OnsagerMatrices a = evaluate(rho, theta + step);
    const OnsagerMatrices b = evaluate(rho, theta - step);
    d.dM_dtheta = (a.M - b.M) / (2.0 * step);
    d.dsoret_dtheta = (a.soret - b.soret) / (2.0 * step);
    return d;
}

ModelParams parse_model_params(std::string_view text) {
    ModelParams out;
    std::istringstream is{std::string(text)};
    std::string token;
    while (is >> token) {
        const auto eq = token.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw ConfigError("matrix.params", "expected key=value, got '" + token + "'");
        }
        std::string key = token.substr(0, eq);
        std::vector<double> values;
        std::stringstream list(token.substr(eq + 1));
        std::string item;
        while (std::getline(list, item, ',')) {
            try {
                std::size_t used = 0;
                values.push_back(std::stod(item, &used));
                if (used != item.size()) throw std::invalid_argument(item);
            } catch (const std::exception&) {
                throw ConfigError("matrix.params", "bad number '" + item + "' for " + key);
            }
        }
        if (values.empty()) throw ConfigError("matrix.params", key + " has no values");
        out[key] = std::move(values);
    }
    return out;
}

Matrix friction_coefficients(const ModelParams& params, int n) {
    const auto bvals = param_or(params, "b", {1.0});
    const std::size_t upper = static_cast<std::size_t>(n) * (n - 1) / 2;
    if (bvals.size() != 1 && bvals.size() != upper) {
        throw ConfigError("matrix.params", "b expects 1 or " + std::to_string(upper) + " values");
    }
    Matrix b = Matrix::Zero(n, n);
    std::size_t idx = 0;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double bij = bvals.size() == 1 ? bvals[0] : bvals[idx++];
            if (!(bij > 0.0)) {
                throw ConfigError("matrix.params", "friction coefficients must be positive");
            }
            b(i, j) = b(j, i) = bij;
        }
    }
    return b;
}

MatrixModelPtr custom_matrix_model(int n, CustomModelFn fn, std::string description) {
    if (!fn) throw ConfigError("matrix.model", "custom model requires a callable");
    return std::make_shared<CustomModel>(n, std::move(fn), std::move(description));
}

MatrixModelPtr builtin_matrix_model(std::string_view name, const ModelParams& params, int n,
                                    CustomModelFn fn) {
    if (n < 2) throw ConfigError("n", "at least two species are required");
    if (name == "constant_pi") {
        require_known_keys(params, {"c", "soret"});
        const double c = scalar_param(params, "c", 1.0);
        if (c < 0.0) throw ConfigError("matrix.params", "c must be nonnegative");
        return std::make_shared<ConstantPiModel>(n, c, vector_param(params, "soret", n));
    }
    if (name == "maxwell_stefan") {
        require_known_keys(params, {"b", "qstar"});
        const Matrix b = friction_coefficients(params, n);
        return std::make_shared<MaxwellStefanModel>(n, FrictionSpec{b, {}},
                                                    vector_param(params, "qstar", n));
    }
    if (name == "degenerate_pirhopi") {
        require_known_keys(params, {"c", "soret", "qstar"});
        const double c = scalar_param(params, "c", 1.0);
        if (c < 0.0) throw ConfigError("matrix.params", "c must be nonnegative");
        return std::make_shared<DegenerateModel>(n, c, scalar_param(params, "soret", 0.0),
                                                 vector_param(params, "qstar", n));
    }
    if (name == "custom") return custom_matrix_model(n, std::move(fn));
    throw ConfigError("matrix.model", "unknown matrix model '" + std::string(name) + "'");
}

}  // namespace msf
