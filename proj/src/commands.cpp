#include "msf/commands.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "msf/errors.hpp"

namespace msf {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::ofstream open_output(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    return out;
}

void write_field_rows(std::ostream& os, double t, const MixtureState& s, const Grid1D& g) {
    for (int k = 0; k < s.nodes(); ++k) {
        os << fmt(t) << ',' << fmt(g.x(k));
        for (int i = 0; i < s.species(); ++i) os << ',' << fmt(s.rho(i, k));
        os << ',' << fmt(s.theta[k]) << '\n';
    }
}

struct DiagnosticsRow {
    double t;
    double entropy;
    double slack;
    Vector masses;
    double energy;
    double min_rho;
    double min_theta;
    double max_theta;
    int newton_iters;
    double diffusion;
    double heat;
    double boundary;
};

void write_diagnostics_row(std::ostream& os, const DiagnosticsRow& r) {
    os << fmt(r.t) << ',' << fmt(r.entropy) << ',' << fmt(r.slack);
    for (Eigen::Index i = 0; i < r.masses.size(); ++i) os << ',' << fmt(r.masses[i]);
    os << ',' << fmt(r.energy) << ',' << fmt(r.min_rho) << ',' << fmt(r.min_theta) << ','
       << fmt(r.max_theta) << ',' << r.newton_iters << ',' << fmt(r.diffusion) << ','
       << fmt(r.heat) << ',' << fmt(r.boundary) << '\n';
}

nlohmann::ordered_json config_json(const Config& cfg) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& [key, value] : cfg.resolved()) j[key] = value;
    return j;
}

void write_manifest(const fs::path& dir, const std::string& command, const Config& cfg,
                    double wall_clock, const nlohmann::ordered_json& outputs,
                    const nlohmann::ordered_json& gates, int exit_code) {
    nlohmann::ordered_json j;
    j["artifact"] = "msfsolve";
    j["version"] = std::string(kArtifactVersion);
    j["schema_version"] = kConfigSchemaVersion;
    j["command"] = command;
    j["config"] = config_json(cfg);
    j["wall_clock_seconds"] = wall_clock;
    j["outputs"] = outputs;
    j["gates"] = gates;
    j["exit_code"] = exit_code;
    open_output(dir / "manifest.json") << j.dump(2) << '\n';
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

/// Nodal values of every density and the temperature, stacked species-major.
Vector stacked_fields(const MixtureState& s) {
    const int n = s.species();
    const int N = s.nodes();
    Vector out((n + 1) * N);
    for (int i = 0; i < n; ++i) out.segment(i * N, N) = s.rho.row(i).transpose();
    out.segment(n * N, N) = s.theta;
    return out;
}

/// Averages pairs of fine cells onto the coarse grid of half the size.
Vector restrict_pairs(const Vector& fine, int fields, int coarse_cells) {
    Vector out(fields * coarse_cells);
    for (int f = 0; f < fields; ++f) {
        for (int k = 0; k < coarse_cells; ++k) {
            const Eigen::Index base = static_cast<Eigen::Index>(f) * 2 * coarse_cells + 2 * k;
            out[f * coarse_cells + k] = 0.5 * (fine[base] + fine[base + 1]);
        }
    }
    return out;
}

template <class F>
int guarded(std::ostream& log, F&& body) {
    try {
        return body();
    } catch (const ConfigError& e) {
        log << "config error: " << e.what() << '\n';
    } catch (const std::exception& e) {
        log << "error: " << e.what() << '\n';
    }
    return kExitError;
}

}  // namespace

std::vector<std::string> GateCounts::triggered() const {
    std::vector<std::string> out;
    if (entropy_failures) out.push_back("entropy_balance");
    if (temperature_failures) out.push_back("temperature_estimate");
    if (positivity_failures) out.push_back("positivity");
    if (conservation_flagged) out.push_back("conservation");
    return out;
}

SimulationResult simulate(const Config& cfg, const std::optional<fs::path>& out_dir,
                          const LedgerCallback& on_step) {
    const auto start = std::chrono::steady_clock::now();
    cfg.validate();
    const SchemeConfig sc = make_scheme_config(cfg);
    const Grid1D& g = sc.grid;
    const int n = cfg.species();
    const double t_end = cfg.number("time.t_end");
    const int stride = cfg.integer("output.stride");
    const bool expect_mass = sc.reaction == ReactionModel::none && sc.epsilon == 0.0;
    const bool expect_energy = expect_mass && sc.lambda == 0.0;

    SimulationResult result;
    result.initial = admissible_initial_state(make_initial_state(cfg));
    result.final_state = result.initial;
    result.gates.worst_entropy_margin = std::numeric_limits<double>::infinity();
    result.gates.max_entropy_increase = -std::numeric_limits<double>::infinity();
    ConservationAccumulator conservation(g, expect_mass, expect_energy);
    NormsAccumulator norms(g);

    std::ofstream fields, diagnostics;
    if (out_dir) {
        fs::create_directories(*out_dir);
        fields = open_output(*out_dir / "fields.csv");
        diagnostics = open_output(*out_dir / "diagnostics.csv");
        fields << "t,x";
        for (int i = 1; i <= n; ++i) fields << ",rho_" << i;
        fields << ",theta\n";
        diagnostics << "t,entropy,entropy_slack";
        for (int i = 1; i <= n; ++i) diagnostics << ",mass_" << i;
        diagnostics << ",energy,min_rho,min_theta,max_theta,newton_iters,diffusion_production,"
                       "heat_production,boundary_production\n";
    }

    const auto record_state = [&](double t, const MixtureState& s) {
        conservation.add(s);
        norms.add(t, s);
        if (!(s.rho.minCoeff() > 0.0) || !(s.theta.minCoeff() > 0.0) || !s.rho.allFinite() ||
            !s.theta.allFinite()) {
            ++result.gates.positivity_failures;
        }
    };

    record_state(0.0, result.initial);
    if (out_dir) {
        StepReport r0;
        summarize_state(result.initial, g, r0);
        write_field_rows(fields, 0.0, result.initial, g);
        write_diagnostics_row(diagnostics,
                              {0.0, relative_entropy(result.initial, g, sc.theta0), 0.0, r0.masses,
                               r0.energy, r0.min_rho.minCoeff(), r0.min_theta, r0.max_theta, 0, 0.0,
                               0.0, 0.0});
    }

    const auto callback = [&](const StepRecord& rec) {
        const EntropyLedger L = entropy_balance(rec.previous, rec.current, sc, rec.report.tau);
        const TemperatureLedger T = temperature_estimate(rec.previous, rec.current, sc, rec.report.tau);
        GateCounts& gates = result.gates;
        ++gates.steps;
        if (!L.pass) ++gates.entropy_failures;
        if (!T.pass) ++gates.temperature_failures;
        gates.worst_entropy_margin = std::min(gates.worst_entropy_margin, L.margin);
        gates.max_entropy_increase =
            std::max(gates.max_entropy_increase, L.entropy_after - L.entropy_before);
        record_state(rec.t, rec.current);
        if (out_dir) {
            const StepReport& r = rec.report;
            write_diagnostics_row(diagnostics,
                                  {rec.t, L.entropy_after, L.margin, r.masses, r.energy,
                                   r.min_rho.minCoeff(), r.min_theta, r.max_theta,
                                   r.newton_iterations + r.picard_iterations, L.diffusion, L.heat,
                                   L.boundary});
            if (gates.steps % stride == 0) write_field_rows(fields, rec.t, rec.current, g);
        }
        if (on_step) on_step(rec, L, T);
    };

    try {
        RunSummary summary = run(result.initial, sc, t_end, callback);
        result.final_state = std::move(summary.final_state);
        result.t = summary.t;
    } catch (const Abort& e) {
        result.aborted = true;
        result.abort_reason = e.what();
        result.t = e.time();
    }
    result.conservation = conservation.report();
    result.norms = norms.report();
    result.gates.conservation_flagged = result.conservation.flagged;
    result.exit_code = result.aborted ? kExitAbort : result.gates.ok() ? kExitOk : kExitGate;

    if (out_dir) {
        fields.close();
        diagnostics.close();
        open_output(*out_dir / "resolved.cfg") << cfg.to_text();
        nlohmann::ordered_json outputs;
        outputs["fields"] = (*out_dir / "fields.csv").generic_string();
        outputs["diagnostics"] = (*out_dir / "diagnostics.csv").generic_string();
        outputs["resolved_config"] = (*out_dir / "resolved.cfg").generic_string();
        nlohmann::ordered_json gates;
        gates["steps"] = result.gates.steps;
        gates["entropy_failures"] = result.gates.entropy_failures;
        gates["temperature_failures"] = result.gates.temperature_failures;
        gates["positivity_failures"] = result.gates.positivity_failures;
        gates["conservation_flagged"] = result.gates.conservation_flagged;
        gates["max_mass_drift"] = result.conservation.max_mass_drift;
        gates["energy_drift"] = result.conservation.energy_drift;
        gates["theta_l16_3"] = result.norms.theta_l16_3;
        gates["triggered"] = result.gates.triggered();
        gates["aborted"] = result.aborted;
        if (result.aborted) gates["abort_reason"] = result.abort_reason;
        write_manifest(*out_dir, "run", cfg, seconds_since(start), outputs, gates,
                       result.exit_code);
    }
    return result;
}

int cmd_run(const fs::path& config, const std::optional<fs::path>& out, std::ostream& log) {
    return guarded(log, [&] {
        Config cfg = Config::load(config);
        if (out) cfg.set("output.dir", out->string());
        const fs::path dir = cfg.get("output.dir");
        const SimulationResult r = simulate(cfg, dir);
        log << "run " << config.string() << ": " << r.gates.steps << " steps to t=" << r.t
            << ", output in " << dir.string() << '\n';
        if (r.aborted) log << "aborted: " << r.abort_reason << '\n';
        for (const auto& gate : r.gates.triggered()) log << "gate violated: " << gate << '\n';
        return r.exit_code;
    });
}

int cmd_sweep(const std::vector<fs::path>& configs, const std::optional<fs::path>& out,
              std::ostream& log) {
    std::vector<int> codes(configs.size(), kExitError);
    std::vector<std::string> logs(configs.size());
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (std::size_t i = next++; i < configs.size(); i = next++) {
            std::ostringstream os;
            codes[i] = guarded(os, [&] {
                Config cfg = Config::load(configs[i]);
                const fs::path base = out ? *out : fs::path(cfg.get("output.dir"));
                const fs::path dir = base / configs[i].stem();
                cfg.set("output.dir", dir.string());
                const SimulationResult r = simulate(cfg, dir);
                os << "run " << configs[i].string() << ": " << r.gates.steps << " steps, exit "
                   << r.exit_code << ", output in " << dir.string() << '\n';
                for (const auto& gate : r.gates.triggered()) os << "gate violated: " << gate << '\n';
                return r.exit_code;
            });
            logs[i] = os.str();
        }
    };
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const std::size_t workers = std::min<std::size_t>(hw, configs.size());
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    for (const auto& l : logs) log << l;
    return configs.empty() ? kExitError : *std::max_element(codes.begin(), codes.end());
}

int cmd_check_matrix(const fs::path& config, const std::optional<fs::path>& out,
                     std::ostream& log) {
    return guarded(log, [&] {
        const auto start = std::chrono::steady_clock::now();
        Config cfg = Config::load(config);
        cfg.validate();
        const int n = cfg.species();
        const std::string model_name = cfg.get("matrix.model");
        const ModelParams params = parse_model_params(cfg.get("matrix.params"));
        const MatrixModelPtr model = builtin_matrix_model(model_name, params, n);
        const int samples = cfg.integer("check.samples");
        const double floor = cfg.number("check.floor");
        const double rho_min = cfg.number("check.rho_min");
        if (samples < 1) throw ConfigError("check.samples", "must be at least 1");
        if (!(rho_min > 0.0 && rho_min < 1.0)) throw ConfigError("check.rho_min", "must lie in (0, 1)");

        bool want_inv = false, want_m2 = false, want_m3 = false, want_id = false;
        {
            std::stringstream ss(cfg.get("check.conditions"));
            std::string item;
            while (std::getline(ss, item, ',')) {
                if (item == "invariants") want_inv = true;
                else if (item == "m2") want_m2 = true;
                else if (item == "m3") want_m3 = true;
                else if (item == "identities") want_id = true;
                else throw ConfigError("check.conditions", "unknown condition '" + item + "'");
            }
        }
        const bool friction = model_name == "maxwell_stefan";
        const Matrix b = friction ? friction_coefficients(params, n) : Matrix();
        const Vector q_star = friction && params.count("qstar")
                                  ? Vector(Eigen::Map<const Vector>(params.at("qstar").data(), n))
                                  : Vector(Vector::Zero(n));

        std::mt19937_64 rng(static_cast<std::uint64_t>(cfg.integer("check.seed")));
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::normal_distribution<double> normal;
        std::ofstream csv;
        if (out) {
            fs::create_directories(*out);
            csv = open_output(*out / "certificates.csv");
            csv << "sample,theta,invariants,c_M2,c_M3,reduced,identities\n";
        }

        double min_m2 = std::numeric_limits<double>::infinity();
        double min_m3 = min_m2;
        bool inv_ok = true, id_ok = true, reduced_ok = true;
        for (int s = 0; s < samples; ++s) {
            Vector rho(n);
            for (int i = 0; i < n; ++i) rho[i] = rho_min + (1.0 - rho_min) * unit(rng);
            const double theta = 0.5 + 1.5 * unit(rng);
            const OnsagerMatrices om = model->evaluate(rho, theta);
            const std::string inv = check_invariants(om, 1e-10);
            const double c2 = certify_m2(om).c_M;
            const double c3 = certify_m3_at(om, rho).c_M;
            const ReducedCoercivity red = reduced_coercivity_check(om, c2, 100, 1000u + s);
            min_m2 = std::min(min_m2, c2);
            min_m3 = std::min(min_m3, c3);
            inv_ok = inv_ok && inv.empty();
            reduced_ok = reduced_ok && red.pass;

            std::string id_status = "n/a";
            if (friction) {
                const FrictionMatrixB fb = friction_matrix(rho, b);
                const Matrix& B = fb.B;
                const Matrix Bs = group_inverse(fb);
                const Matrix Q = rho * Vector::Ones(n).transpose() / rho.sum();
                const double scale = std::max({1.0, B.cwiseAbs().maxCoeff(), Bs.cwiseAbs().maxCoeff()});
                const double e = std::max({(B * Bs * B - B).cwiseAbs().maxCoeff(),
                                           (Bs * B * Bs - Bs).cwiseAbs().maxCoeff(),
                                           (B * Bs - Bs * B).cwiseAbs().maxCoeff(),
                                           (B * Bs - (Matrix::Identity(n, n) - Q)).cwiseAbs().maxCoeff(),
                                           (Bs * rho).cwiseAbs().maxCoeff(),
                                           Bs.colwise().sum().cwiseAbs().maxCoeff()}) /
                                 scale;
                Vector grad_q(n);
                for (int i = 0; i < n; ++i) grad_q[i] = normal(rng);
                const double flux = flux_equivalence_check(rho, theta, grad_q, normal(rng),
                                                           FrictionSpec{b, {}}, q_star);
                const bool pass = e <= 1e-10 && flux <= 1e-8;
                id_ok = id_ok && pass;
                std::ostringstream os;
                os << (pass ? "pass" : "FAIL") << " (identities " << e << ", flux " << flux << ")";
                id_status = os.str();
            }
            log << "sample " << s + 1 << ": theta=" << theta << " invariants="
                << (inv.empty() ? "ok" : inv) << " c_M2=" << c2 << " c_M3=" << c3
                << " reduced=" << (red.pass ? "pass" : "FAIL") << " identities=" << id_status
                << '\n';
            if (out) {
                csv << s + 1 << ',' << fmt(theta) << ',' << (inv.empty() ? "ok" : "fail") << ','
                    << fmt(c2) << ',' << fmt(c3) << ',' << (red.pass ? "pass" : "fail") << ','
                    << (friction ? (id_status.rfind("pass", 0) == 0 ? "pass" : "fail") : "n/a")
                    << '\n';
            }
        }

        bool ok = true;
        if (want_inv) ok = ok && inv_ok;
        if (want_m2) ok = ok && min_m2 >= floor && reduced_ok;
        if (want_m3) ok = ok && min_m3 >= floor;
        if (want_id) ok = ok && id_ok;
        log << "model " << model->description() << ", n=" << n << ", " << samples << " states\n";
        log << "certificate M2: c_M = " << min_m2 << '\n';
        log << "certificate M3: c_M = " << min_m3 << '\n';
        log << "floor " << floor << ": " << (ok ? "PASS" : "FAIL") << '\n';
        const int code = ok ? kExitOk : kExitGate;
        if (out) {
            nlohmann::ordered_json outputs, gates;
            outputs["certificates"] = (*out / "certificates.csv").generic_string();
            gates["c_M2"] = min_m2;
            gates["c_M3"] = min_m3;
            gates["invariants"] = inv_ok;
            gates["identities"] = id_ok;
            gates["pass"] = ok;
            write_manifest(*out, "check-matrix", cfg, seconds_since(start), outputs, gates, code);
        }
        return code;
    });
}

ConvergenceStudy convergence_study(const Config& cfg) {
    cfg.validate();
    std::vector<int> cells;
    for (double c : cfg.numbers("convergence.cells")) {
        if (c != std::floor(c) || c < 4) throw ConfigError("convergence.cells", "cells must be integers >= 4");
        cells.push_back(static_cast<int>(c));
    }
    const std::vector<double> taus = cfg.numbers("convergence.taus");
    if (cells.size() < 3) {
        throw ConfigError("convergence.cells", "need at least three resolutions to measure an order");
    }
    if (taus.size() < 2) throw ConfigError("convergence.taus", "need at least two time steps");
    for (std::size_t j = 1; j < cells.size(); ++j) {
        if (cells[j] != 2 * cells[j - 1]) {
            throw ConfigError("convergence.cells", "each resolution must double the previous one");
        }
    }
    for (std::size_t j = 0; j < taus.size(); ++j) {
        if (!(taus[j] > 0.0) || (j > 0 && !(taus[j] < taus[j - 1]))) {
            throw ConfigError("convergence.taus", "time steps must be positive and decreasing");
        }
    }
    const int factor = cfg.integer("convergence.reference_factor");
    if (factor < 2) throw ConfigError("convergence.reference_factor", "must be at least 2");

    const auto final_fields = [&](Config c) {
        const SimulationResult r = simulate(c);
        if (r.aborted) throw Error("convergence run aborted: " + r.abort_reason);
        return stacked_fields(r.final_state);
    };
    const int fields = cfg.species() + 1;
    const double nan = std::numeric_limits<double>::quiet_NaN();

    ConvergenceStudy study;
    std::vector<Vector> space;
    for (int N : cells) {
        Config c = cfg;
        c.set("domain.cells", std::to_string(N));
        space.push_back(final_fields(c));
    }
    std::vector<double> space_err;
    for (std::size_t j = 0; j + 1 < cells.size(); ++j) {
        space_err.push_back((restrict_pairs(space[j + 1], fields, cells[j]) - space[j]).cwiseAbs().maxCoeff());
    }
    study.spatial_ok = true;
    for (std::size_t j = 0; j < space_err.size(); ++j) {
        const double order = j == 0 ? nan : std::log2(space_err[j - 1] / space_err[j]);
        if (j > 0 && !(space_err[j] < space_err[j - 1] && order >= 1.8 && order <= 2.2)) {
            study.spatial_ok = false;
        }
        study.rows.push_back({"space", static_cast<double>(cells[j]), space_err[j], order});
    }

    Config ref = cfg;
    ref.set("time.tau", fmt(taus.back() / factor));
    const Vector reference = final_fields(ref);
    std::vector<double> time_err;
    for (double tau : taus) {
        Config c = cfg;
        c.set("time.tau", fmt(tau));
        time_err.push_back((final_fields(c) - reference).cwiseAbs().maxCoeff());
    }
    study.temporal_ok = true;
    for (std::size_t j = 0; j < taus.size(); ++j) {
        const double order =
            j == 0 ? nan : std::log(time_err[j - 1] / time_err[j]) / std::log(taus[j - 1] / taus[j]);
        if (j > 0 && !(time_err[j] < time_err[j - 1] && order >= 0.8 && order <= 1.2)) {
            study.temporal_ok = false;
        }
        study.rows.push_back({"time", taus[j], time_err[j], order});
    }
    return study;
}

int cmd_convergence(const fs::path& config, const std::optional<fs::path>& out,
                    std::ostream& log) {
    return guarded(log, [&] {
        const auto start = std::chrono::steady_clock::now();
        const Config cfg = Config::load(config);
        const ConvergenceStudy study = convergence_study(cfg);
        std::ofstream csv;
        if (out) {
            fs::create_directories(*out);
            csv = open_output(*out / "convergence.csv");
            csv << "kind,resolution,error,order\n";
        }
        log << "kind   resolution        error           order\n";
        for (const auto& r : study.rows) {
            char order[32] = "-";
            if (!std::isnan(r.order)) std::snprintf(order, sizeof order, "%.3f", r.order);
            char line[128];
            std::snprintf(line, sizeof line, "%-6s %-17.6g %-15.6e %s\n", r.kind.c_str(),
                          r.resolution, r.error, order);
            log << line;
            if (out) {
                csv << r.kind << ',' << fmt(r.resolution) << ',' << fmt(r.error) << ','
                    << (std::isnan(r.order) ? "" : fmt(r.order)) << '\n';
            }
        }
        log << "spatial order in [1.8, 2.2]: " << (study.spatial_ok ? "yes" : "NO") << '\n';
        log << "temporal order in [0.8, 1.2]: " << (study.temporal_ok ? "yes" : "NO") << '\n';
        const int code = study.spatial_ok && study.temporal_ok ? kExitOk : kExitGate;
        if (out) {
            nlohmann::ordered_json outputs, gates;
            outputs["convergence"] = (*out / "convergence.csv").generic_string();
            gates["spatial_ok"] = study.spatial_ok;
            gates["temporal_ok"] = study.temporal_ok;
            write_manifest(*out, "convergence", cfg, seconds_since(start), outputs, gates, code);
        }
        return code;
    });
}

}  // namespace msf
