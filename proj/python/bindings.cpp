#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "msf/commands.hpp"
#include "msf/config.hpp"
#include "msf/errors.hpp"
#include "msf/onsager.hpp"
#include "msf/thermo.hpp"

namespace py = pybind11;
using namespace msf;

namespace {

ModelParams friction_params(const Matrix& b) {
    ModelParams p;
    auto& values = p["b"];
    for (Eigen::Index i = 0; i < b.rows(); ++i)
        for (Eigen::Index j = i + 1; j < b.cols(); ++j) values.push_back(b(i, j));
    return p;
}

py::dict simulation_dict(const SimulationResult& r, const Config& cfg, const std::vector<double>& entropy) {
    const Grid1D g = make_grid(cfg);
    py::dict d;
    d["exit_code"] = r.exit_code;
    d["t"] = r.t;
    d["steps"] = r.gates.steps;
    d["aborted"] = r.aborted;
    d["abort_reason"] = r.abort_reason;
    d["triggered"] = r.gates.triggered();
    d["x"] = Vector(g.nodes());
    d["rho"] = r.final_state.rho;
    d["theta"] = r.final_state.theta;
    d["initial_rho"] = r.initial.rho;
    d["initial_theta"] = r.initial.theta;
    d["entropy"] = entropy;
    d["max_mass_drift"] = r.conservation.max_mass_drift;
    d["energy_drift"] = r.conservation.energy_drift;
    d["theta_l16_3"] = r.norms.theta_l16_3;
    return d;
}

template <class F>
std::pair<int, std::string> captured(F&& f) {
    std::ostringstream log;
    const int code = f(log);
    return {code, log.str()};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Entropy-variable finite-volume solver for non-isothermal multicomponent diffusion";
    m.attr("__version__") = std::string(kArtifactVersion);

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<DomainError>(m, "DomainError", base.ptr());
    py::register_exception<SingularityError>(m, "SingularityError", base.ptr());
    py::register_exception<NonConvergence>(m, "NonConvergence", base.ptr());

    m.def("entropy_density", &entropy_density, py::arg("rho"), py::arg("theta"));
    m.def("densities_from_potentials", [](const Vector& v, double rho_total) {
        return densities_from_potentials(v, rho_total);
    }, py::arg("v"), py::arg("rho_total"));
    m.def("relative_potentials", [](const Vector& rho) { return relative_potentials(rho); }, py::arg("rho"));
    m.def("project_pi", [](const Vector& z) { return project_pi(z); }, py::arg("z"));
    m.def("entropy_hessian", [](const Vector& rho_prime, double theta, double rho_total) {
        return entropy_hessian(rho_prime, theta, rho_total);
    }, py::arg("rho_prime"), py::arg("theta"), py::arg("rho_total"));

    m.def("friction_matrix", [](const Vector& rho, const Matrix& b) { return friction_matrix(rho, b).B; },
          py::arg("rho"), py::arg("b"));
    m.def("group_inverse", [](const Vector& rho, const Matrix& b) { return group_inverse(friction_matrix(rho, b)); },
          py::arg("rho"), py::arg("b"));
    m.def("onsager_from_friction", [](const Vector& rho, double theta, const Matrix& b, std::optional<Vector> q_star) {
        const OnsagerMatrices om = onsager_from_friction(rho, theta, FrictionSpec{b, {}},
                                                         q_star ? *q_star : Vector(Vector::Zero(rho.size())));
        return py::make_tuple(om.M, om.soret);
    }, py::arg("rho"), py::arg("theta"), py::arg("b"), py::arg("q_star") = py::none());
    m.def("flux_equivalence_check", [](const Vector& rho, double theta, const Vector& grad_q, double grad_inv_theta,
                                       const Matrix& b, const Vector& q_star) {
        return flux_equivalence_check(rho, theta, grad_q, grad_inv_theta, FrictionSpec{b, {}}, q_star);
    }, py::arg("rho"), py::arg("theta"), py::arg("grad_q"), py::arg("grad_inv_theta"), py::arg("b"), py::arg("q_star"));
    m.def("matrix_model", [](const std::string& name, const std::string& params, int n, const Vector& rho, double theta) {
        const OnsagerMatrices om = builtin_matrix_model(name, parse_model_params(params), n)->evaluate(rho, theta);
        return py::make_tuple(om.M, om.soret);
    }, py::arg("name"), py::arg("params"), py::arg("n"), py::arg("rho"), py::arg("theta"),
       "Evaluate a built-in model; returns (M, soret).");
    m.def("certify_m2", [](const Matrix& M) {
        return certify_m2(OnsagerMatrices{M, Vector::Zero(M.rows())}).c_M;
    }, py::arg("M"));
    m.def("certify_m3", [](const Matrix& M, const Vector& rho) {
        return certify_m3_at(OnsagerMatrices{M, Vector::Zero(M.rows())}, rho).c_M;
    }, py::arg("M"), py::arg("rho"));
    m.def("maxwell_stefan_params", [](const Matrix& b) {
        std::ostringstream os;
        os << "b=";
        const auto values = friction_params(b).at("b");
        for (std::size_t i = 0; i < values.size(); ++i) os << (i ? "," : "") << values[i];
        return os.str();
    }, py::arg("b"), "matrix.params text for a symmetric friction matrix.");

    py::class_<Config>(m, "Config")
        .def(py::init<>())
        .def_static("parse", &Config::parse, py::arg("text"))
        .def_static("load", &Config::load, py::arg("path"))
        .def("set", &Config::set, py::arg("key"), py::arg("value"))
        .def("get", &Config::get, py::arg("key"))
        .def("number", &Config::number, py::arg("key"))
        .def("resolved", &Config::resolved)
        .def("to_text", &Config::to_text)
        .def("validate", &Config::validate)
        .def("__repr__", [](const Config& c) { return "<Config n=" + c.get("n") + ">"; });

    m.def("simulate", [](const Config& cfg, std::optional<std::filesystem::path> out_dir) {
        std::vector<double> entropy;
        SimulationResult r;
        {
            py::gil_scoped_release release;
            r = simulate(cfg, out_dir, [&](const StepRecord&, const EntropyLedger& L, const TemperatureLedger&) {
                if (entropy.empty()) entropy.push_back(L.entropy_before);
                entropy.push_back(L.entropy_after);
            });
        }
        return simulation_dict(r, cfg, entropy);
    }, py::arg("config"), py::arg("out_dir") = py::none(),
       "Run a configuration; returns final fields, entropy history and gate results.");

    m.def("convergence_study", [](const Config& cfg) {
        ConvergenceStudy s;
        {
            py::gil_scoped_release release;
            s = convergence_study(cfg);
        }
        py::list rows;
        for (const auto& r : s.rows) rows.append(py::make_tuple(r.kind, r.resolution, r.error, r.order));
        py::dict d;
        d["rows"] = rows;
        d["spatial_ok"] = s.spatial_ok;
        d["temporal_ok"] = s.temporal_ok;
        return d;
    }, py::arg("config"));

    m.def("cmd_run", [](const std::filesystem::path& config, std::optional<std::filesystem::path> out) {
        return captured([&](std::ostream& os) { return cmd_run(config, out, os); });
    }, py::arg("config"), py::arg("out") = py::none(), "Returns (exit_code, log).");
    m.def("cmd_check_matrix", [](const std::filesystem::path& config, std::optional<std::filesystem::path> out) {
        return captured([&](std::ostream& os) { return cmd_check_matrix(config, out, os); });
    }, py::arg("config"), py::arg("out") = py::none());
    m.def("cmd_convergence", [](const std::filesystem::path& config, std::optional<std::filesystem::path> out) {
        return captured([&](std::ostream& os) { return cmd_convergence(config, out, os); });
    }, py::arg("config"), py::arg("out") = py::none());
}
