#include "msf/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "msf/errors.hpp"

namespace msf {

namespace {

enum class Kind { integer, number, text, boolean, list };

struct KeySpec {
    const char* key;
    const char* fallback;
    Kind kind;
};

constexpr KeySpec kSchema[] = {
    {"version", "1", Kind::integer},
    {"n", "2", Kind::integer},
    {"domain.length", "1", Kind::number},
    {"domain.cells", "64", Kind::integer},
    {"time.tau", "0.001", Kind::number},
    {"time.t_end", "0.1", Kind::number},
    {"epsilon", "0", Kind::number},
    {"boundary.lambda", "0", Kind::number},
    {"boundary.theta0", "1", Kind::number},
    {"kappa.c", "1", Kind::number},
    {"kappa.C", "1", Kind::number},
    {"matrix.model", "constant_pi", Kind::text},
    {"matrix.params", "", Kind::text},
    {"reaction.model", "none", Kind::text},
    {"reaction.c_r", "0", Kind::number},
    {"formulation", "potential", Kind::text},
    {"newton.tol", "1e-09", Kind::number},
    {"newton.max_iter", "50", Kind::integer},
    {"newton.damping_min", "9.3132257461547852e-10", Kind::number},
    {"newton.picard_fallback", "true", Kind::boolean},
    {"output.stride", "1", Kind::integer},
    {"output.dir", "out", Kind::text},
    {"check.samples", "50", Kind::integer},
    {"check.seed", "1", Kind::integer},
    {"check.floor", "1e-12", Kind::number},
    {"check.rho_min", "0.001", Kind::number},
    {"check.conditions", "invariants,m2,m3,identities", Kind::text},
    {"convergence.cells", "16,32,64,128", Kind::list},
    {"convergence.taus", "0.02,0.01,0.005,0.0025", Kind::list},
    {"convergence.reference_factor", "16", Kind::integer},
};

constexpr const char* kProfilePrefix = "initial.profile_";
constexpr const char* kDefaultProfile = "constant value=1";

const KeySpec* find_spec(const std::string& key) {
    for (const auto& s : kSchema) {
        if (key == s.key) return &s;
    }
    return nullptr;
}

/// Suffix of an `initial.profile_<i>` key, or empty when the key is not a profile key.
std::string profile_suffix(const std::string& key) {
    const std::string prefix = kProfilePrefix;
    if (key.rfind(prefix, 0) != 0) return {};
    return key.substr(prefix.size());
}

bool valid_profile_suffix(const std::string& suffix) {
    if (suffix == "theta") return true;
    return !suffix.empty() && std::all_of(suffix.begin(), suffix.end(), ::isdigit) &&
           suffix[0] != '0';
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

double parse_number(const std::string& key, const std::string& text) {
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used == text.size() && std::isfinite(v)) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError(key, "expected a number, got '" + text + "'");
}

int parse_integer(const std::string& key, const std::string& text) {
    try {
        std::size_t used = 0;
        const long v = std::stol(text, &used);
        if (used == text.size() && v >= -2147483647L && v <= 2147483647L) {
            return static_cast<int>(v);
        }
    } catch (const std::exception&) {
    }
    throw ConfigError(key, "expected an integer, got '" + text + "'");
}

std::vector<double> parse_list(const std::string& key, const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_number(key, trim(item)));
    return out;
}

std::map<std::string, double> profile_params(const std::string& key, std::istringstream& is) {
    std::map<std::string, double> out;
    std::string token;
    while (is >> token) {
        const auto eq = token.find('=');
        if (eq == std::string::npos) throw ConfigError(key, "expected name=value, got '" + token + "'");
        out[token.substr(0, eq)] = parse_number(key, token.substr(eq + 1));
    }
    return out;
}

double require_param(const std::map<std::string, double>& p, const std::string& key,
                     const char* name) {
    const auto it = p.find(name);
    if (it == p.end()) throw ConfigError(key, std::string("missing profile parameter '") + name + "'");
    return it->second;
}

void require_only(const std::map<std::string, double>& p, const std::string& key,
                  std::initializer_list<std::string_view> names) {
    for (const auto& [name, _] : p) {
        if (std::find(names.begin(), names.end(), name) == names.end()) {
            throw ConfigError(key, "unknown profile parameter '" + name + "'");
        }
    }
}

}  // namespace

Config Config::parse(std::string_view text) {
    Config cfg;
    std::istringstream is{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string body = trim(line);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("", "line " + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key = trim(std::string_view(body).substr(0, eq));
        std::string value = trim(std::string_view(body).substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
            value = value.substr(1, value.size() - 2);
        }
        if (cfg.has(key)) throw ConfigError(key, "duplicate key");
        cfg.set(key, std::move(value));
    }
    return cfg;
}

Config Config::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config file '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    if (path.extension() != ".json") return parse(ss.str());

    nlohmann::json j;
    try {
        j = nlohmann::json::parse(ss.str());
    } catch (const std::exception& e) {
        throw ConfigError("", "manifest '" + path.string() + "' is not valid JSON: " + e.what());
    }
    if (!j.contains("config") || !j["config"].is_object()) {
        throw ConfigError("config", "manifest has no config object");
    }
    Config cfg;
    for (const auto& [key, value] : j["config"].items()) {
        if (!value.is_string()) throw ConfigError(key, "manifest values must be strings");
        cfg.set(key, value.get<std::string>());
    }
    return cfg;
}

void Config::set(const std::string& key, std::string value) {
    if (!find_spec(key) && !valid_profile_suffix(profile_suffix(key))) {
        throw ConfigError(key, "unknown key");
    }
    values_[key] = std::move(value);
}

std::string Config::get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it != values_.end()) return it->second;
    if (const KeySpec* s = find_spec(key)) return s->fallback;
    if (valid_profile_suffix(profile_suffix(key))) return kDefaultProfile;
    throw ConfigError(key, "unknown key");
}

double Config::number(const std::string& key) const { return parse_number(key, get(key)); }
int Config::integer(const std::string& key) const { return parse_integer(key, get(key)); }

bool Config::boolean(const std::string& key) const {
    const std::string v = get(key);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError(key, "expected true or false, got '" + v + "'");
}

std::vector<double> Config::numbers(const std::string& key) const {
    return parse_list(key, get(key));
}

std::vector<std::pair<std::string, std::string>> Config::resolved() const {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& s : kSchema) out.emplace_back(s.key, get(s.key));
    const int n = species();
    for (int i = 1; i <= n; ++i) {
        const std::string key = kProfilePrefix + std::to_string(i);
        out.emplace_back(key, get(key));
    }
    const std::string theta_key = std::string(kProfilePrefix) + "theta";
    out.emplace_back(theta_key, get(theta_key));
    return out;
}

std::string Config::to_text() const {
    std::ostringstream os;
    for (const auto& [key, value] : resolved()) os << key << " = " << value << "\n";
    return os.str();
}

void Config::validate() const {
    if (integer("version") != kConfigSchemaVersion) {
        throw ConfigError("version", "unsupported schema version " + get("version") +
                                         " (expected " + std::to_string(kConfigSchemaVersion) + ")");
    }
    for (const auto& s : kSchema) {
        switch (s.kind) {
            case Kind::integer: integer(s.key); break;
            case Kind::number: number(s.key); break;
            case Kind::boolean: boolean(s.key); break;
            case Kind::list: numbers(s.key); break;
            case Kind::text: break;
        }
    }
    const int n = species();
    if (n < 2) throw ConfigError("n", "at least two species are required");
    for (const auto& [key, _] : values_) {
        const std::string suffix = profile_suffix(key);
        if (suffix.empty() || suffix == "theta") continue;
        if (std::stoi(suffix) > n) throw ConfigError(key, "species index exceeds n");
    }
    if (!(number("time.t_end") >= 0.0)) throw ConfigError("time.t_end", "must be nonnegative");
    if (integer("output.stride") < 1) throw ConfigError("output.stride", "must be at least 1");
    const std::string formulation = get("formulation");
    if (formulation != "potential" && formulation != "density") {
        throw ConfigError("formulation", "expected potential or density");
    }
    const std::string reaction = get("reaction.model");
    if (reaction != "none" && reaction != "linear_pi_q") {
        throw ConfigError("reaction.model", "expected none or linear_pi_q");
    }
    if (get("matrix.model") == "custom") {
        throw ConfigError("matrix.model", "custom models are only available through the library API");
    }
    make_scheme_config(*this).validate(n);
    make_initial_state(*this);
}

double profile_value(const std::string& spec, double x, const std::string& key) {
    std::istringstream is(spec);
    std::string kind;
    if (!(is >> kind)) throw ConfigError(key, "empty profile");
    const auto p = profile_params(key, is);
    if (kind == "constant") {
        require_only(p, key, {"value"});
        return require_param(p, key, "value");
    }
    if (kind == "gaussian") {
        require_only(p, key, {"base", "amp", "center", "width"});
        const double width = require_param(p, key, "width");
        if (!(width > 0.0)) throw ConfigError(key, "gaussian width must be positive");
        const double z = (x - require_param(p, key, "center")) / width;
        return require_param(p, key, "base") + require_param(p, key, "amp") * std::exp(-0.5 * z * z);
    }
    if (kind == "step") {
        require_only(p, key, {"left", "right", "at"});
        return x < require_param(p, key, "at") ? require_param(p, key, "left")
                                               : require_param(p, key, "right");
    }
    throw ConfigError(key, "unknown profile kind '" + kind + "' (constant, gaussian, step)");
}

Grid1D make_grid(const Config& cfg) {
    return Grid1D(cfg.number("domain.length"), cfg.integer("domain.cells"));
}

SchemeConfig make_scheme_config(const Config& cfg) {
    SchemeConfig s;
    s.grid = make_grid(cfg);
    s.tau = cfg.number("time.tau");
    s.epsilon = cfg.number("epsilon");
    s.lambda = cfg.number("boundary.lambda");
    s.theta0 = cfg.number("boundary.theta0");
    s.kappa = KappaModel{cfg.number("kappa.c"), cfg.number("kappa.C")};
    s.matrix = builtin_matrix_model(cfg.get("matrix.model"), parse_model_params(cfg.get("matrix.params")),
                                    cfg.species());
    s.reaction = cfg.get("reaction.model") == "linear_pi_q" ? ReactionModel::linear_pi_q
                                                            : ReactionModel::none;
    s.c_r = cfg.number("reaction.c_r");
    s.formulation = cfg.get("formulation") == "density" ? Formulation::density
                                                        : Formulation::potential;
    s.newton.tol = cfg.number("newton.tol");
    s.newton.max_iter = cfg.integer("newton.max_iter");
    s.newton.damping_min = cfg.number("newton.damping_min");
    s.newton.picard_fallback = cfg.boolean("newton.picard_fallback");
    return s;
}

MixtureState make_initial_state(const Config& cfg) {
    const Grid1D g = make_grid(cfg);
    const int n = cfg.species();
    const int N = g.cells();
    MixtureState s{Matrix(n, N), Vector(N), Vector(N)};
    for (int i = 0; i < n; ++i) {
        const std::string key = kProfilePrefix + std::to_string(i + 1);
        const std::string spec = cfg.get(key);
        for (int k = 0; k < N; ++k) {
            s.rho(i, k) = profile_value(spec, g.x(k), key);
            if (!(s.rho(i, k) > 0.0)) throw ConfigError(key, "initial density must be positive");
        }
    }
    const std::string theta_key = std::string(kProfilePrefix) + "theta";
    const std::string theta_spec = cfg.get(theta_key);
    for (int k = 0; k < N; ++k) {
        s.theta[k] = profile_value(theta_spec, g.x(k), theta_key);
        if (!(s.theta[k] > 0.0)) throw ConfigError(theta_key, "initial temperature must be positive");
        s.rho_total[k] = total_density(s.rho.col(k));
    }
    return s;
}

}  // namespace msf
