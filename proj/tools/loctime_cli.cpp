#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "loctime/bounds.hpp"
#include "loctime/chain.hpp"
#include "loctime/density.hpp"
#include "loctime/error.hpp"
#include "loctime/harness.hpp"

namespace fs = std::filesystem;
using namespace loctime;

namespace {

constexpr int exit_pass = 0;
constexpr int exit_fail = 1;
constexpr int exit_usage = 2;

// Flags shared by every subcommand; anything given on the command line
// overrides the same key of the --config document.
struct Flags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::optional<double> tol;
    std::optional<std::uint64_t> samples;

    std::string generator;
    std::vector<std::string> range, s, l, mu, c, v;
    std::string a, b, start, pivot, method = "series";
    std::optional<double> horizon, threshold, level, h, alpha, kappa;
    std::optional<int> radius, dimension, rk_b;
};

void add_common(CLI::App* cmd, Flags& f) {
    cmd->add_option("--config", f.config, "JSON config document")->check(CLI::ExistingFile);
    cmd->add_option("--seed", f.seed, "root seed");
    cmd->add_option("--out", f.out, "output directory");
    cmd->add_option("--tol", f.tol, "tolerance");
    cmd->add_option("--samples", f.samples, "Monte Carlo sample count");
}

void add_generator(CLI::App* cmd, Flags& f) {
    cmd->add_option("--generator", f.generator, "generator JSON file")->check(CLI::ExistingFile);
}

json resolve(const Flags& f) {
    json doc = f.config.empty() ? json::object() : load_json(f.config);
    if (!doc.is_object()) throw Error(ErrorKind::ConfigParse, "config: expected an object");
    auto set_list = [&](const char* key, const std::vector<std::string>& xs) {
        if (!xs.empty()) doc[key] = xs;
    };
    auto set_numbers = [&](const char* key, const std::vector<std::string>& xs) {
        if (xs.empty()) return;
        json arr = json::array();
        for (const auto& x : xs) {
            try {
                std::size_t used = 0;
                arr.push_back(std::stod(x, &used));
                if (used != x.size()) throw std::invalid_argument(x);
            } catch (const std::exception&) {
                throw Error(ErrorKind::ConfigParse, std::string("--") + key + ": '" + x + "' is not a number");
            }
        }
        doc[key] = arr;
    };
    if (!f.generator.empty()) doc["generator_file"] = f.generator;
    if (f.seed) doc["seed"] = *f.seed;
    if (f.tol) doc["tol"] = *f.tol;
    if (f.samples) doc["samples"] = *f.samples;
    set_list("R", f.range);
    set_list("S", f.s);
    set_numbers("l", f.l);
    set_numbers("mu", f.mu);
    set_numbers("c", f.c);
    set_numbers("v", f.v);
    if (!f.a.empty()) doc["a"] = f.a;
    if (!f.b.empty()) doc["b"] = f.b;
    if (!f.start.empty()) doc["start"] = f.start;
    if (!f.pivot.empty()) doc["pivot"] = f.pivot;
    if (f.horizon) doc["T"] = *f.horizon;
    if (f.threshold) doc["threshold"] = *f.threshold;
    if (f.level) doc["level"] = *f.level;
    if (f.h) doc["h"] = *f.h;
    if (f.rk_b) doc["b"] = *f.rk_b;
    if (f.alpha) doc["alpha"] = *f.alpha;
    if (f.kappa) doc["kappa"] = *f.kappa;
    if (f.radius) doc["radius"] = *f.radius;
    if (f.dimension) doc["dimension"] = *f.dimension;
    return doc;
}

[[noreturn]] void missing(const std::string& key) {
    throw Error(ErrorKind::ConfigParse, key + ": missing");
}

Generator generator_of(const json& doc) {
    if (doc.contains("generator")) return generator_from_json(doc.at("generator"));
    if (doc.contains("generator_file")) return load_generator(doc.at("generator_file").get<std::string>());
    missing("generator");
}

std::string label(const json& v) {
    return v.is_string() ? v.get<std::string>() : v.dump();
}

Index index_of(const Generator& g, const json& doc, const char* key) {
    if (!doc.contains(key)) missing(key);
    return g.index_of(label(doc.at(key)));
}

std::vector<Index> indices(const Generator& g, const json& doc, const char* key) {
    if (!doc.contains(key) || !doc.at(key).is_array()) missing(key);
    std::vector<Index> out;
    for (const auto& x : doc.at(key)) out.push_back(g.index_of(label(x)));
    return out;
}

Eigen::VectorXd vector_of(const json& doc, const char* key) {
    if (!doc.contains(key)) missing(key);
    const auto xs = doc.at(key).get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(xs.data(), static_cast<Index>(xs.size()));
}

double number(const json& doc, const char* key) {
    if (!doc.contains(key) || !doc.at(key).is_number()) missing(key);
    return doc.at(key).get<double>();
}

SimplexPoint point_of(const Generator& g, const json& doc) {
    return make_simplex_point(indices(g, doc, "R"), vector_of(doc, "l"));
}

fs::path out_dir(const Flags& f, const json& doc, const std::string& fallback) {
    if (!f.out.empty()) return f.out;
    if (doc.contains("out")) return doc.at("out").get<std::string>();
    return fallback;
}

int cmd_density(const Flags& f) {
    const json doc = resolve(f);
    const Generator g = generator_of(doc);
    const auto l = point_of(g, doc);
    const Index a = index_of(g, doc, "a"), b = index_of(g, doc, "b");
    std::cout << std::setprecision(16);
    if (f.method == "quadrature") {
        std::cout << "density " << density_quadrature(g, l, a, b) << '\n';
    } else if (f.method == "tridiagonal") {
        std::cout << "density " << density_tridiagonal(g, l, a, b) << '\n';
    } else {
        DensityOptions opt;
        if (doc.contains("tol")) opt.tol = doc.at("tol").get<double>();
        const auto v = density_certified(g, l, a, b, opt);
        std::cout << "density " << v.value << '\n'
                  << "tail_bound " << v.tail_bound << '\n'
                  << "order " << v.order << '\n'
                  << "flows " << v.flows << '\n';
    }
    return exit_pass;
}

int cmd_bound(const Flags& f) {
    const json doc = resolve(f);
    const Generator g = generator_of(doc);
    const auto l = point_of(g, doc);
    const Index a = index_of(g, doc, "a"), b = index_of(g, doc, "b");
    const double rho = density(g, l, a, b);
    const double bound = density_upper_bound(g, l, a, b);
    std::cout << std::setprecision(16) << "density " << rho << '\n' << "bound " << bound << '\n';
    return rho <= bound + 1e-12 ? exit_pass : exit_fail;
}

int cmd_rate(const Flags& f) {
    const json doc = resolve(f);
    const Generator g = generator_of(doc);
    const auto mu = vector_of(doc, "mu");
    RateOptions opt;
    if (doc.contains("tol")) opt.tol = doc.at("tol").get<double>();
    const auto sol = rate_general(g, mu, opt);
    std::cout << std::setprecision(16) << "rate " << sol.value << '\n'
              << "iterations " << sol.iterations << '\n'
              << "gradient_norm " << sol.final_gradient_norm << '\n'
              << "minimizer";
    for (Index i = 0; i < sol.minimizer.size(); ++i) std::cout << ' ' << sol.minimizer[i];
    std::cout << '\n';
    if (g.is_symmetric(1e-12)) std::cout << "rate_symmetric " << rate_symmetric(g, mu) << '\n';
    return exit_pass;
}

int cmd_ldp(const Flags& f) {
    const json doc = resolve(f);
    const Generator g = generator_of(doc);
    const auto s = indices(g, doc, "S");
    const double t = number(doc, "T");
    std::cout << std::setprecision(16);
    if (doc.contains("v")) {
        const auto v = vector_of(doc, "v");
        const double sup = linear_sup_value(g, s, v);
        const double bound = ldp_varadhan_bound(g, s, sup, t);
        std::cout << "sup_value " << sup << '\n' << "log_bound " << bound << '\n';
        if (doc.contains("start")) {
            const double exact = log_feynman_kac(g, s, v, index_of(g, doc, "start"), t);
            std::cout << "log_exact " << exact << '\n';
            return exact <= bound ? exit_pass : exit_fail;
        }
        return exit_pass;
    }
    const auto c = vector_of(doc, "c");
    const double inf = halfspace_inf_rate(g, s, c, number(doc, "threshold"));
    std::cout << "inf_rate " << inf << '\n' << "log_bound " << ldp_probability_bound(g, s, inf, t) << '\n';
    return exit_pass;
}

int cmd_simulate(const Flags& f) {
    const json doc = resolve(f);
    const Generator g = generator_of(doc);
    const Index start = index_of(g, doc, "start");
    const auto seed = doc.value("seed", std::uint64_t{1});
    const auto n = doc.value("samples", std::uint64_t{1000});
    const bool inverse = doc.contains("pivot");
    const ChainSimulator sim(g);

    const fs::path dir = out_dir(f, doc, ".");
    fs::create_directories(dir);
    std::ofstream csv(dir / "simulate.csv");
    write_csv_header(csv, doc, seed);
    csv << "sample,endpoint,horizon,jumps";
    for (const auto& lab : g.labels()) csv << ",l_" << lab;
    csv << '\n' << std::setprecision(17);

    // one substream per sample keeps each row reproducible on its own
    const Rng root(seed);
    for (std::uint64_t i = 0; i < n; ++i) {
        Rng rng = root.split(i);
        const PathSummary p = inverse
                                  ? sim.inverse_local_time(start, index_of(g, doc, "pivot"), number(doc, "level"), rng).path
                                  : sim.fixed_time(start, number(doc, "T"), rng);
        csv << i << ',' << g.label(p.endpoint) << ',' << p.horizon << ',' << p.jumps;
        for (Index x = 0; x < g.size(); ++x) csv << ',' << p.local_times[x];
        csv << '\n';
    }
    std::cout << "wrote " << (dir / "simulate.csv").string() << '\n';
    return exit_pass;
}

void write_summary(const fs::path& dir, const json& doc, std::uint64_t seed, json report) {
    report["config_hash"] = hex(config_hash(doc));
    report["seed"] = seed;
    std::ofstream(dir / "summary.json") << report.dump(2) << '\n';
}

int cmd_verify_density(const Flags& f) {
    const json doc = resolve(f);
    const auto config = density_mc_config(doc);
    const auto rep = verify_density_mc(config);
    const fs::path dir = out_dir(f, doc, "out");
    fs::create_directories(dir);
    std::ofstream csv(dir / "verify_density.csv");
    write_csv_header(csv, doc, config.seed);
    write_density_csv(csv, rep);
    write_summary(dir, doc, config.seed, to_json(rep));
    std::cout << std::setprecision(6) << "conditioned " << rep.conditioned << " of " << rep.paths << '\n'
              << "chi2 " << rep.chi2 << " dof " << rep.dof << " p " << rep.p_value << '\n'
              << "worst_z " << rep.worst_z << " conditioning_z " << rep.conditioning_z << '\n';
    if (rep.two_state) std::cout << "two_state z " << rep.z_same << ' ' << rep.z_other << '\n';
    std::cout << (rep.passed ? "PASS" : "FAIL") << '\n';
    return rep.passed ? exit_pass : exit_fail;
}

int cmd_verify_rayknight(const Flags& f) {
    const json doc = resolve(f);
    const auto config = rayknight_mc_config(doc);
    const auto rep = verify_rayknight_mc(config);
    const fs::path dir = out_dir(f, doc, "out");
    fs::create_directories(dir);
    std::ofstream csv(dir / "verify_rayknight.csv");
    write_csv_header(csv, doc, config.seed);
    write_rayknight_csv(csv, rep);
    write_summary(dir, doc, config.seed, to_json(rep));
    std::cout << std::setprecision(4);
    for (const auto& s : rep.sites)
        std::cout << "site " << s.site << " z_mean " << s.z_mean << " z_var " << s.z_var << " z_atom " << s.z_atom
                  << '\n';
    std::cout << "atom b+1 " << rep.atom_direct << " vs " << rep.atom_expected << " z " << rep.z_atom_direct
              << '\n'
              << (rep.passed ? "PASS" : "FAIL") << '\n';
    return rep.passed ? exit_pass : exit_fail;
}

// F(phi) = kappa * sum phi_x^2, a local quadratic interaction.
int cmd_chi_discrete(const Flags& f) {
    const json doc = resolve(f);
    const int radius = doc.value("radius", 3);
    const double alpha = doc.value("alpha", 1.0);
    const double kappa = doc.value("kappa", 1.0);
    ChiOptions opt;
    opt.dimension = doc.value("dimension", 1);
    opt.seed = doc.value("seed", std::uint64_t{1});
    if (doc.contains("tol")) opt.tol = doc.at("tol").get<double>();
    GridFunctional fn{[kappa](const Eigen::VectorXd& phi) { return kappa * phi.squaredNorm(); },
                      [kappa](const Eigen::VectorXd& phi) -> Eigen::VectorXd { return 2.0 * kappa * phi; }};
    const auto r = rescaled_chi_discrete(radius, alpha, fn, opt);
    std::cout << std::setprecision(16) << "chi " << r.value << '\n'
              << "gradient_norm " << r.gradient_norm << '\n'
              << "mu";
    for (Index i = 0; i < r.mu.size(); ++i) std::cout << ' ' << r.mu[i];
    std::cout << '\n';
    return exit_pass;
}

int cmd_suite(const Flags& f) {
    if (f.config.empty()) missing("--config");
    json doc = load_json(f.config);
    if (f.seed) doc["seed"] = *f.seed;
    const int status = run_suite(doc, f.out.empty() ? fs::path("out") : fs::path(f.out));
    std::cout << (status == 0 ? "PASS" : "FAIL") << '\n';
    return status;
}

bool usage_error(ErrorKind k) {
    switch (k) {
    case ErrorKind::ConfigParse:
    case ErrorKind::UnknownLabel:
    case ErrorKind::NegativeRate:
    case ErrorKind::NonConservative:
    case ErrorKind::TooSmall:
    case ErrorKind::EmptySubset:
    case ErrorKind::DomainError:
        return true;
    default:
        return false;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Local times of finite Markov chains: densities, bounds and Monte Carlo checks"};
    app.require_subcommand(1);
    Flags f;

    auto* density = app.add_subcommand("density", "joint density of local times, range and endpoint");
    add_common(density, f);
    add_generator(density, f);
    density->add_option("--R", f.range, "range labels")->delimiter(',');
    density->add_option("--a", f.a, "start label");
    density->add_option("--b", f.b, "end label");
    density->add_option("--l", f.l, "local times, one per label of R")->delimiter(',');
    density->add_option("--method", f.method, "series, quadrature or tridiagonal")
        ->check(CLI::IsMember({"series", "quadrature", "tridiagonal"}));

    auto* bound = app.add_subcommand("bound", "density against its explicit upper bound");
    add_common(bound, f);
    add_generator(bound, f);
    bound->add_option("--R", f.range, "range labels")->delimiter(',');
    bound->add_option("--a", f.a, "start label");
    bound->add_option("--b", f.b, "end label");
    bound->add_option("--l", f.l, "local times")->delimiter(',');

    auto* rate = app.add_subcommand("rate", "Donsker-Varadhan rate function");
    add_common(rate, f);
    add_generator(rate, f);
    rate->add_option("--mu", f.mu, "probability vector over all states")->delimiter(',');

    auto* ldp = app.add_subcommand("ldp", "finite-T large deviation bounds");
    add_common(ldp, f);
    add_generator(ldp, f);
    ldp->add_option("--S", f.s, "confining set labels")->delimiter(',');
    ldp->add_option("--T", f.horizon, "horizon");
    ldp->add_option("--c", f.c, "half-space normal, one entry per label of S")->delimiter(',');
    ldp->add_option("--threshold", f.threshold, "half-space level");
    ldp->add_option("--v", f.v, "linear potential, one entry per label of S")->delimiter(',');
    ldp->add_option("--start", f.start, "start label for the exact Feynman-Kac value");

    auto* simulate = app.add_subcommand("simulate", "sample paths, one CSV row per path");
    add_common(simulate, f);
    add_generator(simulate, f);
    simulate->add_option("--start", f.start, "start label");
    simulate->add_option("--T", f.horizon, "fixed horizon");
    simulate->add_option("--pivot", f.pivot, "pivot label for inverse local time");
    simulate->add_option("--level", f.level, "local time level at the pivot");

    auto* vdensity = app.add_subcommand("verify-density", "Monte Carlo chi-square check of the density");
    add_common(vdensity, f);

    auto* vrk = app.add_subcommand("verify-rayknight", "direct simulation against the Ray-Knight profile");
    add_common(vrk, f);
    vrk->add_option("--b", f.rk_b, "pivot site");
    vrk->add_option("--level", f.h, "local time level h at the pivot");

    auto* chi = app.add_subcommand("chi-discrete", "discrete variational constant for F = kappa |phi|^2");
    add_common(chi, f);
    chi->add_option("--radius", f.radius, "box radius");
    chi->add_option("--alpha", f.alpha, "scale");
    chi->add_option("--kappa", f.kappa, "interaction strength");
    chi->add_option("--dimension", f.dimension, "lattice dimension");

    auto* suite = app.add_subcommand("suite", "run every experiment of a suite document");
    add_common(suite, f);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? exit_pass : exit_usage;
    }

    try {
        if (*density) return cmd_density(f);
        if (*bound) return cmd_bound(f);
        if (*rate) return cmd_rate(f);
        if (*ldp) return cmd_ldp(f);
        if (*simulate) return cmd_simulate(f);
        if (*vdensity) return cmd_verify_density(f);
        if (*vrk) return cmd_verify_rayknight(f);
        if (*chi) return cmd_chi_discrete(f);
        if (*suite) return cmd_suite(f);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return usage_error(e.kind()) ? exit_usage : exit_fail;
    } catch (const json::exception& e) {
        std::cerr << "error: ConfigParse: " << e.what() << '\n';
        return exit_usage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_fail;
    }
    return exit_usage;
}
