#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "msf/commands.hpp"
#include "msf/config.hpp"
#include "msf/errors.hpp"

using namespace msf;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("msf_unit_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

fs::path write_file(const fs::path& p, const std::string& text) {
    std::ofstream(p) << text;
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string error_key(const std::string& text) {
    try {
        Config::parse(text).validate();
    } catch (const ConfigError& e) {
        return e.key();
    }
    return "";
}

const char* kMixing =
    "n = 2\ndomain.cells = 32\ntime.tau = 0.002\ntime.t_end = 0.04\n"
    "initial.profile_1 = step left=0.8 right=0.2 at=0.5\n"
    "initial.profile_2 = step left=0.2 right=0.8 at=0.5\n";

}  // namespace

TEST_SUITE("config") {

TEST_CASE("defaults and parsing") {
    const Config c = Config::parse("# comment\nn = 3   # trailing\nmatrix.params = \"b=1,2,3\"\n");
    CHECK(c.species() == 3);
    CHECK(c.get("matrix.params") == "b=1,2,3");
    CHECK(c.number("time.tau") == 0.001);
    CHECK(c.get("formulation") == "potential");
    CHECK(c.boolean("newton.picard_fallback"));
    CHECK(c.numbers("convergence.cells") == std::vector<double>{16, 32, 64, 128});
    CHECK(c.get("initial.profile_3") == "constant value=1");
}

TEST_CASE("hard errors name the key") {
    CHECK(error_key("time.dt = 1\n") == "time.dt");
    CHECK(error_key("n = 2\nn = 3\n") == "n");
    CHECK(error_key("kappa.c = 2\nkappa.C = 1\n") == "kappa");
    CHECK(error_key("version = 2\n") == "version");
    CHECK(error_key("n = 2\ninitial.profile_3 = constant value=1\n") == "initial.profile_3");
    CHECK(error_key("time.tau = fast\n") == "time.tau");
    CHECK(error_key("matrix.model = custom\n") == "matrix.model");
    CHECK(error_key("formulation = mixed\n") == "formulation");
    CHECK(error_key("domain.cells = 2\n") == "domain.cells");
    CHECK(error_key("boundary.lambda = 1\nkappa.c = 0\n") == "kappa");
    CHECK_THROWS_AS(Config::parse("just words\n"), ConfigError);
}

TEST_CASE("profiles") {
    CHECK(profile_value("constant value=2.5", 0.3, "k") == 2.5);
    CHECK(profile_value("step left=1 right=2 at=0.5", 0.2, "k") == 1.0);
    CHECK(profile_value("step left=1 right=2 at=0.5", 0.7, "k") == 2.0);
    CHECK(profile_value("gaussian base=1 amp=2 center=0.5 width=0.1", 0.5, "k") == doctest::Approx(3.0));
    CHECK(profile_value("gaussian base=1 amp=2 center=0.5 width=0.1", 0.6, "k") == doctest::Approx(1 + 2 * std::exp(-0.5)));
    CHECK_THROWS_AS(profile_value("sine a=1", 0.5, "k"), ConfigError);
    CHECK_THROWS_AS(profile_value("constant", 0.5, "k"), ConfigError);
    CHECK_THROWS_AS(profile_value("constant value=1 extra=2", 0.5, "k"), ConfigError);
}

TEST_CASE("resolved text round-trips") {
    const Config c = Config::parse(kMixing);
    const Config back = Config::parse(c.to_text());
    CHECK(back.resolved() == c.resolved());
    const MixtureState s = make_initial_state(c);
    CHECK(s.rho.cols() == 32);
    CHECK(s.rho(0, 0) == 0.8);
}

TEST_CASE("initial densities must be positive") {
    CHECK_THROWS_AS(make_initial_state(Config::parse("initial.profile_1 = constant value=0\n")), ConfigError);
}

}

TEST_SUITE("commands") {

TEST_CASE("equilibrium run writes constant diagnostics") {
    const fs::path dir = scratch("equilibrium");
    const fs::path cfg = write_file(dir / "eq.cfg", "n = 2\ndomain.cells = 16\ntime.tau = 0.01\ntime.t_end = 0.05\n"
                                                   "initial.profile_1 = constant value=0.3\ninitial.profile_2 = constant value=0.7\n");
    std::ostringstream log;
    CHECK(cmd_run(cfg, dir / "out", log) == kExitOk);
    std::ifstream in(dir / "out" / "diagnostics.csv");
    std::string header, line, first;
    std::getline(in, header);
    CHECK(header == "t,entropy,entropy_slack,mass_1,mass_2,energy,min_rho,min_theta,max_theta,newton_iters,"
                    "diffusion_production,heat_production,boundary_production");
    int rows = 0;
    while (std::getline(in, line)) {
        // every column after t except the slack, which holds the tolerance budget after t = 0
        std::string tail = line.substr(line.find(','));
        const std::size_t a = tail.find(',', 1), b = tail.find(',', a + 1);
        tail.erase(a, b - a);
        if (rows == 0) first = tail;
        CHECK(tail == first);
        ++rows;
    }
    CHECK(rows == 6);
    std::ifstream fields(dir / "out" / "fields.csv");
    std::getline(fields, header);
    CHECK(header == "t,x,rho_1,rho_2,theta");
}

TEST_CASE("mixing run decreases entropy and replays bitwise from its manifest") {
    const fs::path dir = scratch("mixing");
    const fs::path cfg = write_file(dir / "mix.cfg", kMixing);
    std::ostringstream log;
    REQUIRE(cmd_run(cfg, dir / "a", log) == kExitOk);
    std::ifstream in(dir / "a" / "diagnostics.csv");
    std::string line;
    std::getline(in, line);
    double last = INFINITY;
    int rows = 0;
    while (std::getline(in, line)) {
        const double entropy = std::stod(line.substr(line.find(',') + 1));
        CHECK(entropy < last);
        last = entropy;
        ++rows;
    }
    CHECK(rows == 21);
    REQUIRE(cmd_run(dir / "a" / "manifest.json", dir / "b", log) == kExitOk);
    CHECK(slurp(dir / "a" / "fields.csv") == slurp(dir / "b" / "fields.csv"));
    CHECK(slurp(dir / "a" / "diagnostics.csv") == slurp(dir / "b" / "diagnostics.csv"));
}

TEST_CASE("configuration errors exit with status 1 and name the key") {
    const fs::path dir = scratch("bad");
    std::ostringstream log;
    CHECK(cmd_run(write_file(dir / "k.cfg", "kappa.c = 3\nkappa.C = 1\n"), dir / "out", log) == kExitError);
    CHECK(log.str().find("kappa") != std::string::npos);
    CHECK(cmd_run(dir / "missing.cfg", dir / "out", log) == kExitError);
    CHECK(cmd_convergence(write_file(dir / "c.cfg", "convergence.cells = 32\n"), std::nullopt, log) == kExitError);
    CHECK(log.str().find("convergence.cells") != std::string::npos);
}

TEST_CASE("check-matrix exit codes") {
    const fs::path dir = scratch("check");
    std::ostringstream log;
    CHECK(cmd_check_matrix(write_file(dir / "ms.cfg", "matrix.model = maxwell_stefan\nmatrix.params = b=1\ncheck.samples = 5\n"),
                           dir / "ms", log) == kExitOk);
    CHECK(log.str().find("identities=pass") != std::string::npos);
    CHECK(fs::exists(dir / "ms" / "certificates.csv"));
    std::ostringstream deg;
    CHECK(cmd_check_matrix(write_file(dir / "d.cfg", "n = 3\nmatrix.model = degenerate_pirhopi\ncheck.samples = 5\n"),
                           std::nullopt, deg) == kExitOk);
    CHECK(deg.str().find("certificate M3: c_M = 1\n") != std::string::npos);
    std::ostringstream zero;
    CHECK(cmd_check_matrix(write_file(dir / "z.cfg", "matrix.params = c=0\ncheck.samples = 3\n"), std::nullopt, zero) == kExitGate);
    CHECK(zero.str().find("certificate M2: c_M = 0\n") != std::string::npos);
}

TEST_CASE("sweep isolates output directories") {
    const fs::path dir = scratch("sweep");
    const fs::path a = write_file(dir / "a.cfg", kMixing);
    const fs::path b = write_file(dir / "b.cfg", std::string(kMixing) + "matrix.params = c=2\n");
    std::ostringstream log;
    CHECK(cmd_sweep({a, b}, dir / "out", log) == kExitOk);
    CHECK(fs::exists(dir / "out" / "a" / "fields.csv"));
    CHECK(fs::exists(dir / "out" / "b" / "fields.csv"));
    CHECK(slurp(dir / "out" / "a" / "fields.csv") != slurp(dir / "out" / "b" / "fields.csv"));
}

TEST_CASE("gate violation exits with status 2") {
    // A zero-diffusion matrix still solves; negative theta cannot occur, so trip conservation instead.
    SimulationResult r = simulate(Config::parse(kMixing));
    CHECK(r.exit_code == kExitOk);
    CHECK(r.gates.ok());
    r.gates.entropy_failures = 1;
    CHECK(r.gates.triggered() == std::vector<std::string>{"entropy_balance"});
}

}
