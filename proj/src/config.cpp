#include "bpve/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "bpve/errors.hpp"

namespace bpve {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("");
        return v;
    } catch (...) {
        throw ConfigError("bad numeric value for " + key + ": '" + value + "'");
    }
}

long long parse_int(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("");
        return v;
    } catch (...) {
        throw ConfigError("bad integer value for " + key + ": '" + value + "'");
    }
}

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

}  // namespace

void ScenarioConfig::validate() const {
    environment.validate();
    if (!(eps > 0.0 && eps <= 1.0)) throw ConfigError("eps must lie in (0,1]");
    if (time_grid.empty()) throw ConfigError("time grid is empty");
    if (!std::is_sorted(time_grid.begin(), time_grid.end()))
        throw ConfigError("time grid must be sorted");
    for (double t : time_grid)
        if (t <= 0.0) throw ConfigError("grid times must be positive");
    if (n_values.empty()) throw ConfigError("n_values is empty");
    for (long long n : n_values)
        if (n < 1) throw ConfigError("n_values must be >= 1");
    if (!std::is_sorted(n_values.begin(), n_values.end()))
        throw ConfigError("n_values must be sorted");
    if (mc_n < 1) throw ConfigError("mc n must be >= 1");
    if (replicates < 1000) throw ConfigError("replicates must be >= 1000");
    if (truncation < 64) throw ConfigError("truncation must be >= 64");
    if (population_cap < 1) throw ConfigError("population cap must be >= 1");
    if (workers < 0) throw ConfigError("workers must be >= 0");
}

std::string ScenarioConfig::canonical_text() const {
    std::ostringstream out;
    out << "family="
        << (environment.family == OffspringFamily::bernoulli ? "bernoulli" : "linear_fractional")
        << "\nalpha=" << fmt(environment.alpha) << "\nnu=" << fmt(environment.nu)
        << "\nimmigration=";
    for (const auto& atom : environment.immigration)
        out << atom.value << ":" << fmt(atom.weight) << " ";
    out << "\neps=" << fmt(eps) << "\ntimes=";
    for (double t : time_grid) out << fmt(t) << " ";
    out << "\nn_values=";
    for (long long n : n_values) out << n << " ";
    out << "\nmc_n=" << mc_n << "\nreplicates=" << replicates << "\nseed=" << seed
        << "\ntruncation=" << truncation << "\npopulation_cap=" << population_cap
        << "\ntol=" << fmt(tol.exact) << "," << fmt(tol.identity) << "," << fmt(tol.mc_tv) << ","
        << fmt(tol.scale_tv) << "," << fmt(tol.survival_rel) << "," << fmt(tol.mean_rel) << ","
        << fmt(tol.rate_fd) << "," << fmt(tol.zsim_tv) << "," << fmt(tol.wsim_tv) << ","
        << fmt(tol.eq16_abs) << "\n";
    return out.str();
}

ScenarioConfig default_config() {
    ScenarioConfig config;
    config.environment.family = OffspringFamily::linear_fractional;
    config.environment.alpha = 1.0;
    config.environment.nu = 2.0;
    return config;
}

ScenarioConfig parse_config_text(const std::string& text, const std::string& name) {
    ScenarioConfig config = default_config();
    config.name = name;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("malformed section header at line " + std::to_string(lineno));
            section = line.substr(1, line.size() - 2);
            if (section != "environment" && section != "limit" && section != "grid" &&
                section != "mc" && section != "tolerances")
                throw ConfigError("unknown section [" + section + "]");
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("expected key = value at line " + std::to_string(lineno));
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (section == "environment") {
            if (key == "family") {
                if (value == "bernoulli")
                    config.environment.family = OffspringFamily::bernoulli;
                else if (value == "linear_fractional")
                    config.environment.family = OffspringFamily::linear_fractional;
                else
                    throw ConfigError("unknown offspring family '" + value + "'");
            } else if (key == "alpha") {
                config.environment.alpha = parse_double(key, value);
            } else if (key == "nu") {
                config.environment.nu = parse_double(key, value);
            } else if (key == "immigration") {
                config.environment.immigration.clear();
                if (value != "none") {
                    for (const auto& tok : split_ws(value)) {
                        const std::size_t colon = tok.find(':');
                        if (colon == std::string::npos)
                            throw ConfigError("immigration entries are k:weight, got '" + tok + "'");
                        ImmigrationAtom atom;
                        atom.value = static_cast<int>(parse_int("immigration k", tok.substr(0, colon)));
                        atom.weight = parse_double("immigration weight", tok.substr(colon + 1));
                        config.environment.immigration.push_back(atom);
                    }
                }
            } else {
                throw ConfigError("unknown key '" + key + "' in [environment]");
            }
        } else if (section == "limit") {
            if (key == "eps")
                config.eps = parse_double(key, value);
            else
                throw ConfigError("unknown key '" + key + "' in [limit]");
        } else if (section == "grid") {
            if (key == "times") {
                config.time_grid.clear();
                for (const auto& tok : split_ws(value)) config.time_grid.push_back(parse_double(key, tok));
            } else if (key == "n_values") {
                config.n_values.clear();
                for (const auto& tok : split_ws(value)) config.n_values.push_back(parse_int(key, tok));
            } else {
                throw ConfigError("unknown key '" + key + "' in [grid]");
            }
        } else if (section == "mc") {
            if (key == "n")
                config.mc_n = parse_int(key, value);
            else if (key == "replicates")
                config.replicates = parse_int(key, value);
            else if (key == "seed")
                config.seed = static_cast<std::uint64_t>(parse_int(key, value));
            else if (key == "workers")
                config.workers = static_cast<int>(parse_int(key, value));
            else if (key == "truncation")
                config.truncation = static_cast<int>(parse_int(key, value));
            else if (key == "population_cap")
                config.population_cap = parse_int(key, value);
            else
                throw ConfigError("unknown key '" + key + "' in [mc]");
        } else if (section == "tolerances") {
            if (key == "exact")
                config.tol.exact = parse_double(key, value);
            else if (key == "identity")
                config.tol.identity = parse_double(key, value);
            else if (key == "mc_tv")
                config.tol.mc_tv = parse_double(key, value);
            else if (key == "scale_tv")
                config.tol.scale_tv = parse_double(key, value);
            else if (key == "survival_rel")
                config.tol.survival_rel = parse_double(key, value);
            else if (key == "mean_rel")
                config.tol.mean_rel = parse_double(key, value);
            else if (key == "rate_fd")
                config.tol.rate_fd = parse_double(key, value);
            else if (key == "zsim_tv")
                config.tol.zsim_tv = parse_double(key, value);
            else if (key == "wsim_tv")
                config.tol.wsim_tv = parse_double(key, value);
            else if (key == "eq16_abs")
                config.tol.eq16_abs = parse_double(key, value);
            else
                throw ConfigError("unknown key '" + key + "' in [tolerances]");
        } else {
            throw ConfigError("key outside any section at line " + std::to_string(lineno));
        }
    }
    config.validate();
    return config;
}

ScenarioConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    std::string name = path;
    const std::size_t slash = name.find_last_of("/\\");
    if (slash != std::string::npos) name.erase(0, slash + 1);
    const std::size_t dot = name.find_last_of('.');
    if (dot != std::string::npos) name.erase(dot);
    return parse_config_text(buf.str(), name);
}

std::string config_hash(const ScenarioConfig& config) {
    // FNV-1a over the canonical rendering.
    const std::string text = config.canonical_text();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace bpve
