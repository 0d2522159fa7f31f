#include "loctime/harness.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <thread>

#include "loctime/bounds.hpp"
#include "loctime/density.hpp"
#include "loctime/error.hpp"
#include "loctime/ray_knight.hpp"

namespace loctime {

namespace {

[[noreturn]] void config_error(const std::string& where, const std::string& what) {
    throw Error(ErrorKind::ConfigParse, where + ": " + what);
}

std::string label_of(const json& v, const std::string& where) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    config_error(where, "expected a state label (string or integer)");
}

double number_of(const json& v, const std::string& where) {
    if (!v.is_number()) config_error(where, "expected a number");
    return v.get<double>();
}

template <typename T>
T get_or(const json& doc, const char* key, T fallback) {
    if (!doc.contains(key)) return fallback;
    try {
        return doc.at(key).get<T>();
    } catch (const json::exception& e) {
        config_error(key, e.what());
    }
}

} // namespace

Generator generator_from_json(const json& doc) {
    if (!doc.is_object()) config_error("generator", "expected an object");
    try {
        if (doc.contains("builtin")) {
            const auto kind = doc.at("builtin").get<std::string>();
            if (kind == "two_state") return two_state_chain(get_or(doc, "rate", 1.0));
            if (kind == "srw_interval") return srw_interval(doc.at("lo").get<int>(), doc.at("hi").get<int>());
            config_error("generator.builtin", "unknown builtin '" + kind + "'");
        }
        if (!doc.contains("states") || !doc.at("states").is_array()) config_error("generator.states", "missing list");
        std::vector<std::string> labels;
        for (std::size_t i = 0; i < doc.at("states").size(); ++i)
            labels.push_back(label_of(doc.at("states")[i], "generator.states[" + std::to_string(i) + "]"));
        const Index n = static_cast<Index>(labels.size());
        auto find = [&](const std::string& l, const std::string& where) {
            auto it = std::find(labels.begin(), labels.end(), l);
            if (it == labels.end()) config_error(where, "unknown state '" + l + "'");
            return static_cast<Index>(it - labels.begin());
        };
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
        const json& rates = doc.contains("rates") ? doc.at("rates") : json::array();
        if (!rates.is_array()) config_error("generator.rates", "expected a list of triples");
        for (std::size_t k = 0; k < rates.size(); ++k) {
            const std::string where = "generator.rates[" + std::to_string(k) + "]";
            const json& t = rates[k];
            json from, to, rate;
            if (t.is_array()) {
                if (t.size() != 3) config_error(where, "a rate triple needs exactly three fields (from, to, rate)");
                from = t[0], to = t[1], rate = t[2];
            } else if (t.is_object()) {
                if (!t.contains("from") || !t.contains("to") || !t.contains("rate"))
                    config_error(where, "needs fields from, to, rate");
                from = t.at("from"), to = t.at("to"), rate = t.at("rate");
            } else {
                config_error(where, "expected [from, to, rate] or an object");
            }
            const Index x = find(label_of(from, where + ".from"), where + ".from");
            const Index y = find(label_of(to, where + ".to"), where + ".to");
            if (x == y) config_error(where, "diagonal entries belong in 'diagonal'");
            a(x, y) += number_of(rate, where + ".rate");
        }
        Diagonal mode = Diagonal::Recompute;
        if (doc.contains("diagonal")) {
            const json& d = doc.at("diagonal");
            if (!d.is_object()) config_error("generator.diagonal", "expected an object label -> value");
            for (Index x = 0; x < n; ++x) {
                double row = 0.0;
                for (Index y = 0; y < n; ++y)
                    if (y != x) row += a(x, y);
                a(x, x) = -row;
            }
            for (auto it = d.begin(); it != d.end(); ++it) {
                const Index x = find(it.key(), "generator.diagonal." + it.key());
                a(x, x) = number_of(it.value(), "generator.diagonal." + it.key());
            }
            mode = Diagonal::Check;
        }
        return validate_generator(std::move(labels), a, mode);
    } catch (const json::exception& e) {
        config_error("generator", e.what());
    }
}

json load_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) config_error(path.string(), "cannot open file");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        config_error(path.string(), e.what());
    }
}

Generator load_generator(const std::filesystem::path& path) {
    return generator_from_json(load_json(path));
}

std::uint64_t config_hash(const json& doc) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : doc.dump()) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string hex(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

void for_each_chunk(std::size_t chunks, const Rng& root, const std::function<void(std::size_t, Rng&)>& fn,
                    unsigned threads) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, chunks));
    auto work = [&](unsigned w) {
        for (std::size_t c = w; c < chunks; c += threads) {
            Rng rng = root.split(c);
            fn(c, rng);
        }
    };
    if (threads <= 1) {
        work(0);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (unsigned w = 0; w < threads; ++w)
        pool.emplace_back([&, w] {
            try {
                work(w);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

namespace {

constexpr std::size_t mc_chunks = 64;

// Degree-5 seven-point rule on a triangle, barycentric points and weights.
struct TrianglePoint {
    double l1, l2, l3, w;
};
constexpr std::array<TrianglePoint, 7> triangle_rule{{
    {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.225},
    {0.059715871789770, 0.470142064105115, 0.470142064105115, 0.132394152788506},
    {0.470142064105115, 0.059715871789770, 0.470142064105115, 0.132394152788506},
    {0.470142064105115, 0.470142064105115, 0.059715871789770, 0.132394152788506},
    {0.797426985353087, 0.101286507323456, 0.101286507323456, 0.125939180544827},
    {0.101286507323456, 0.797426985353087, 0.101286507323456, 0.125939180544827},
    {0.101286507323456, 0.101286507323456, 0.797426985353087, 0.125939180544827},
}};

using Vec2 = std::array<double, 2>;

double triangle_integral(const std::function<double(double, double)>& f, Vec2 p, Vec2 q, Vec2 r) {
    const double area = 0.5 * std::abs((q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]));
    double s = 0.0;
    for (const auto& t : triangle_rule)
        s += t.w * f(t.l1 * p[0] + t.l2 * q[0] + t.l3 * r[0], t.l1 * p[1] + t.l2 * q[1] + t.l3 * r[1]);
    return area * s;
}

// One level on the triangle and one on its four midpoint children.
std::pair<double, double> triangle_two_levels(const std::function<double(double, double)>& f, Vec2 p, Vec2 q,
                                              Vec2 r) {
    auto mid = [](Vec2 x, Vec2 y) { return Vec2{0.5 * (x[0] + y[0]), 0.5 * (x[1] + y[1])}; };
    const Vec2 pq = mid(p, q), qr = mid(q, r), rp = mid(r, p);
    const double coarse = triangle_integral(f, p, q, r);
    const double fine = triangle_integral(f, p, pq, rp) + triangle_integral(f, pq, q, qr) +
                        triangle_integral(f, rp, qr, r) + triangle_integral(f, pq, qr, rp);
    return {coarse, fine};
}

std::pair<double, double> interval_two_levels(const std::function<double(double)>& f, double lo, double hi) {
    using boost::math::quadrature::gauss;
    const double coarse = gauss<double, 7>::integrate(f, lo, hi);
    double fine = 0.0;
    const double w = (hi - lo) / 4.0;
    for (int k = 0; k < 4; ++k) fine += gauss<double, 7>::integrate(f, lo + k * w, lo + (k + 1) * w);
    return {coarse, fine};
}

struct CellGrid {
    int dim = 1;
    int k = 1;
    double horizon = 1.0;

    std::size_t size() const { return dim == 1 ? static_cast<std::size_t>(k) : static_cast<std::size_t>(k * k); }

    // Square (i, j) with i + j <= k - 1 splits into a lower triangle and,
    // when i + j <= k - 2, an upper one. Cells are numbered in that order.
    std::size_t index(const std::vector<double>& free) const {
        const double h = horizon / k;
        if (dim == 1) return static_cast<std::size_t>(std::clamp(static_cast<int>(free[0] / h), 0, k - 1));
        int i = std::clamp(static_cast<int>(free[0] / h), 0, k - 1);
        int j = std::clamp(static_cast<int>(free[1] / h), 0, k - 1);
        double fu = free[0] / h - i, fv = free[1] / h - j;
        if (i + j > k - 1) {
            // rounding at the hypotenuse
            j = k - 1 - i;
            fv = 1.0 - fu;
        }
        const bool upper = fu + fv >= 1.0 && i + j <= k - 2;
        return 2 * square_index(i, j) + (upper ? 1 : 0);
    }

    // squares enumerated row-major over i + j <= k - 1, two slots each
    std::size_t square_index(int i, int j) const { return static_cast<std::size_t>(i * k + j); }
};

double normal_z(double observed, double expected, double var) {
    return var > 0.0 ? (observed - expected) / std::sqrt(var) : 0.0;
}

} // namespace

DensityMcReport verify_density_mc(const DensityMcConfig& config) {
    const Generator& g = config.generator;
    std::vector<Index> range = config.range;
    std::sort(range.begin(), range.end());
    const std::size_t m = range.size();
    if (m < 2 || m > 3) throw Error(ErrorKind::DomainError, "the cell grid supports ranges of two or three states");
    if (!std::binary_search(range.begin(), range.end(), config.a) ||
        !std::binary_search(range.begin(), range.end(), config.b))
        throw Error(ErrorKind::DomainError, "a and b must lie in R");
    const double t = config.horizon;

    CellGrid grid;
    grid.dim = static_cast<int>(m) - 1;
    grid.k = config.cells_per_axis > 0 ? config.cells_per_axis : (m == 2 ? 40 : 7);
    grid.horizon = t;
    const std::size_t slots = m == 2 ? static_cast<std::size_t>(grid.k) : static_cast<std::size_t>(2 * grid.k * grid.k);

    // Monte Carlo: the last state of R is the eliminated coordinate.
    std::vector<std::vector<std::uint64_t>> chunk_counts(mc_chunks, std::vector<std::uint64_t>(slots, 0));
    std::vector<std::vector<std::uint64_t>> chunk_end(mc_chunks, std::vector<std::uint64_t>(static_cast<std::size_t>(g.size()), 0));
    std::vector<std::uint64_t> chunk_paths(mc_chunks, 0);
    const ChainSimulator sim(g);
    for_each_chunk(mc_chunks, Rng(config.seed), [&](std::size_t c, Rng& rng) {
        const std::uint64_t n = config.samples / mc_chunks + (c < config.samples % mc_chunks ? 1 : 0);
        std::vector<double> free(m - 1);
        for (std::uint64_t i = 0; i < n; ++i) {
            const auto p = sim.fixed_time(config.a, t, rng);
            if (p.range != range) continue;
            ++chunk_end[c][static_cast<std::size_t>(p.endpoint)];
            if (p.endpoint != config.b) continue;
            for (std::size_t k = 0; k + 1 < m; ++k) free[k] = p.local_times[range[k]];
            ++chunk_counts[c][grid.index(free)];
        }
        chunk_paths[c] = n;
    });
    DensityMcReport rep;
    std::vector<std::uint64_t> counts(slots, 0), ends(static_cast<std::size_t>(g.size()), 0);
    for (std::size_t c = 0; c < mc_chunks; ++c) {
        rep.paths += chunk_paths[c];
        for (std::size_t s = 0; s < slots; ++s) counts[s] += chunk_counts[c][s];
        for (std::size_t s = 0; s < ends.size(); ++s) ends[s] += chunk_end[c][s];
    }
    rep.conditioned = ends[static_cast<std::size_t>(config.b)];
    if (rep.conditioned < 1000)
        throw Error(ErrorKind::InsufficientConditioned,
                    std::to_string(rep.conditioned) + " conditioned paths, need at least 1000");

    // expected cell masses
    auto rho = [&](const std::vector<double>& free) {
        Eigen::VectorXd v(static_cast<Index>(m));
        double rest = t;
        for (std::size_t k = 0; k + 1 < m; ++k) v[static_cast<Index>(k)] = free[k], rest -= free[k];
        v[static_cast<Index>(m - 1)] = rest;
        if ((v.array() < min_local_time).any()) return 0.0;
        return density(g, make_simplex_point(range, v), config.a, config.b, 1e-13);
    };
    const double h = t / grid.k;
    auto add_cell = [&](std::size_t slot, std::vector<double> centre, std::pair<double, double> levels) {
        HistogramCell cell;
        cell.index = slot;
        cell.centre = std::move(centre);
        cell.mass = levels.second;
        cell.refinement_flag = std::abs(levels.first - levels.second) > 0.01 * std::abs(levels.second);
        cell.observed = counts[slot];
        rep.cells.push_back(std::move(cell));
    };
    if (m == 2) {
        for (int i = 0; i < grid.k; ++i) {
            auto levels = interval_two_levels([&](double u) { return rho({u}); }, i * h, (i + 1) * h);
            add_cell(static_cast<std::size_t>(i), {(i + 0.5) * h}, levels);
        }
    } else {
        auto f = [&](double u, double v) { return rho({u, v}); };
        for (int i = 0; i < grid.k; ++i)
            for (int j = 0; i + j <= grid.k - 1; ++j) {
                const Vec2 p{i * h, j * h}, q{(i + 1) * h, j * h}, r{i * h, (j + 1) * h}, s{(i + 1) * h, (j + 1) * h};
                add_cell(2 * grid.square_index(i, j), {(i + 1.0 / 3) * h, (j + 1.0 / 3) * h},
                         triangle_two_levels(f, p, q, r));
                if (i + j <= grid.k - 2)
                    add_cell(2 * grid.square_index(i, j) + 1, {(i + 2.0 / 3) * h, (j + 2.0 / 3) * h},
                             triangle_two_levels(f, q, s, r));
            }
    }
    for (const auto& c : rep.cells) rep.total_mass += c.mass;
    const double pn = static_cast<double>(rep.paths);
    rep.conditioning_z = normal_z(static_cast<double>(rep.conditioned) / pn, rep.total_mass,
                                  rep.total_mass * (1.0 - rep.total_mass) / pn);

    // chi-square over cells merged until the expected count reaches 5
    double group_e = 0.0, group_o = 0.0;
    std::vector<std::pair<double, double>> groups;
    for (auto& c : rep.cells) {
        c.expected = static_cast<double>(rep.conditioned) * c.mass / rep.total_mass;
        if (c.refinement_flag) ++rep.flagged_cells;
        if (c.mass <= 0.0) {
            ++rep.empty_cells;
            group_o += static_cast<double>(c.observed);
            continue;
        }
        group_e += c.expected;
        group_o += static_cast<double>(c.observed);
        if (group_e >= 5.0) {
            groups.emplace_back(group_o, group_e);
            group_e = group_o = 0.0;
        }
    }
    if (group_e > 0.0 || group_o > 0.0) {
        if (groups.empty()) groups.emplace_back(group_o, group_e);
        else groups.back().first += group_o, groups.back().second += group_e;
    }
    for (auto [o, e] : groups) {
        rep.chi2 += (o - e) * (o - e) / e;
        rep.worst_z = std::max(rep.worst_z, std::abs(o - e) / std::sqrt(e));
    }
    rep.merged_groups = groups.size();
    rep.dof = static_cast<int>(groups.size()) - 1;
    rep.p_value = rep.dof > 0 ? boost::math::cdf(boost::math::complement(
                                    boost::math::chi_squared_distribution<double>(rep.dof), rep.chi2))
                              : 1.0;
    rep.passed = rep.p_value > config.p_threshold && std::abs(rep.conditioning_z) <= 4.0;

    if (g.size() == 2 && g(0, 1) == 1.0 && g(1, 0) == 1.0 && m == 2) {
        rep.two_state = true;
        const Index other = config.a == 0 ? 1 : 0;
        rep.freq_same = static_cast<double>(ends[static_cast<std::size_t>(config.a)]) / pn;
        rep.freq_other = static_cast<double>(ends[static_cast<std::size_t>(other)]) / pn;
        rep.expect_same = std::exp(-t) * (std::cosh(t) - 1.0);
        rep.expect_other = std::exp(-t) * std::sinh(t);
        rep.z_same = normal_z(rep.freq_same, rep.expect_same, rep.expect_same * (1.0 - rep.expect_same) / pn);
        rep.z_other = normal_z(rep.freq_other, rep.expect_other, rep.expect_other * (1.0 - rep.expect_other) / pn);
        rep.passed = rep.passed && std::abs(rep.z_same) <= 4.0 && std::abs(rep.z_other) <= 4.0;
    }
    return rep;
}

namespace {

struct Moments {
    double mean = 0.0, var = 0.0, se_mean = 0.0, se_var = 0.0, zero_freq = 0.0;
};

Moments moments(const std::vector<double>& x) {
    Moments r;
    const double n = static_cast<double>(x.size());
    double zeros = 0.0;
    for (double v : x) {
        r.mean += v;
        if (v == 0.0) zeros += 1.0;
    }
    r.mean /= n;
    double m2 = 0.0, m4 = 0.0;
    for (double v : x) {
        const double d = (v - r.mean) * (v - r.mean);
        m2 += d;
        m4 += d * d;
    }
    r.var = m2 / (n - 1.0);
    m4 /= n;
    r.se_mean = std::sqrt(r.var / n);
    r.se_var = std::sqrt(std::max(0.0, m4 - (m2 / n) * (m2 / n)) / n);
    r.zero_freq = zeros / n;
    return r;
}

} // namespace

RayKnightMcReport verify_rayknight_mc(const RayKnightMcConfig& config) {
    const int b = config.b;
    if (b < 1) throw Error(ErrorKind::DomainError, "b must be at least 1");
    const int lo = -config.window, hi = b + config.window;
    for (int s : config.sites)
        if (s < lo || s > hi) throw Error(ErrorKind::DomainError, "site outside the window");
    std::vector<int> tracked = config.sites;
    tracked.push_back(b - 1);
    tracked.push_back(b + 1);
    const std::size_t ns = tracked.size();

    // Direct simulation on the window: its end rows make it the trace of the
    // walk on Z, so local times inside the window have the same law.
    const Generator g = srw_interval(lo, hi);
    const ChainSimulator sim(g);
    const Index start = g.index_of("0");
    const Index pivot = g.index_of(std::to_string(b));

    const Rng root(config.seed);
    std::vector<std::vector<std::vector<double>>> direct(mc_chunks), profile(mc_chunks);
    for_each_chunk(mc_chunks, root.split(1), [&](std::size_t c, Rng& rng) {
        const std::uint64_t n = config.samples / mc_chunks + (c < config.samples % mc_chunks ? 1 : 0);
        direct[c].assign(ns, {});
        for (std::uint64_t i = 0; i < n; ++i) {
            const auto r = sim.inverse_local_time(start, pivot, config.h, rng);
            for (std::size_t k = 0; k < ns; ++k)
                direct[c][k].push_back(r.path.local_times[g.index_of(std::to_string(tracked[k]))]);
        }
    });
    for_each_chunk(mc_chunks, root.split(2), [&](std::size_t c, Rng& rng) {
        const std::uint64_t n = config.samples / mc_chunks + (c < config.samples % mc_chunks ? 1 : 0);
        profile[c].assign(ns, {});
        for (std::uint64_t i = 0; i < n; ++i) {
            const auto p = sample_rk_profile(b, config.h, config.window, rng.split(i));
            for (std::size_t k = 0; k < ns; ++k) profile[c][k].push_back(p.at(tracked[k]));
        }
    });
    std::vector<std::vector<double>> d(ns), q(ns);
    for (std::size_t c = 0; c < mc_chunks; ++c)
        for (std::size_t k = 0; k < ns; ++k) {
            d[k].insert(d[k].end(), direct[c][k].begin(), direct[c][k].end());
            q[k].insert(q[k].end(), profile[c][k].begin(), profile[c][k].end());
        }

    RayKnightMcReport rep;
    rep.passed = true;
    const double n = static_cast<double>(config.samples);
    for (std::size_t k = 0; k < config.sites.size(); ++k) {
        const Moments md = moments(d[k]), mp = moments(q[k]);
        SiteMoments s;
        s.site = tracked[k];
        s.mean_direct = md.mean, s.se_mean_direct = md.se_mean;
        s.mean_profile = mp.mean, s.se_mean_profile = mp.se_mean;
        s.var_direct = md.var, s.se_var_direct = md.se_var;
        s.var_profile = mp.var, s.se_var_profile = mp.se_var;
        s.z_mean = normal_z(md.mean, mp.mean, md.se_mean * md.se_mean + mp.se_mean * mp.se_mean);
        s.z_var = normal_z(md.var, mp.var, md.se_var * md.se_var + mp.se_var * mp.se_var);
        s.atom_direct = md.zero_freq, s.atom_profile = mp.zero_freq;
        const double pooled = 0.5 * (md.zero_freq + mp.zero_freq);
        s.z_atom = normal_z(md.zero_freq, mp.zero_freq, 2.0 * pooled * (1.0 - pooled) / n);
        if (std::abs(s.z_mean) >= config.z_moment || std::abs(s.z_var) >= config.z_moment ||
            std::abs(s.z_atom) >= config.z_atom)
            rep.passed = false;
        rep.sites.push_back(s);
    }

    const std::size_t right = ns - 1, left = ns - 2;
    rep.atom_expected = std::exp(-config.h);
    const double pvar = rep.atom_expected * (1.0 - rep.atom_expected) / n;
    const Moments rd = moments(d[right]), rp = moments(q[right]);
    rep.atom_direct = rd.zero_freq;
    rep.atom_profile = rp.zero_freq;
    rep.atom_count_direct = static_cast<std::uint64_t>(std::llround(rd.zero_freq * n));
    rep.z_atom_direct = normal_z(rep.atom_direct, rep.atom_expected, pvar);
    rep.z_atom_profile = normal_z(rep.atom_profile, rep.atom_expected, pvar);
    if (std::abs(rep.z_atom_direct) >= config.z_atom || std::abs(rep.z_atom_profile) >= config.z_atom)
        rep.passed = false;

    const Moments ld = moments(d[left]);
    double cov = 0.0;
    for (std::size_t i = 0; i < d[left].size(); ++i) cov += (d[left][i] - ld.mean) * (d[right][i] - rd.mean);
    cov /= n - 1.0;
    rep.correlation = cov / std::sqrt(ld.var * rd.var);
    rep.z_correlation = rep.correlation * std::sqrt(n);
    if (std::abs(rep.z_correlation) >= 4.0) rep.passed = false;
    return rep;
}

void write_csv_header(std::ostream& os, const json& config, std::uint64_t seed) {
    os << "# config_hash=" << hex(config_hash(config)) << ", seed=" << seed << '\n';
}

void write_density_csv(std::ostream& os, const DensityMcReport& r) {
    os << std::setprecision(17);
    os << "cell,centre_1,centre_2,mass,expected,observed,refinement_flag\n";
    for (const auto& c : r.cells) {
        os << c.index << ',' << c.centre[0] << ',' << (c.centre.size() > 1 ? c.centre[1] : 0.0) << ',' << c.mass
           << ',' << c.expected << ',' << c.observed << ',' << (c.refinement_flag ? 1 : 0) << '\n';
    }
}

void write_rayknight_csv(std::ostream& os, const RayKnightMcReport& r) {
    os << std::setprecision(17);
    os << "site,mean_direct,se_mean_direct,mean_profile,se_mean_profile,var_direct,se_var_direct,"
          "var_profile,se_var_profile,z_mean,z_var,atom_direct,atom_profile,z_atom\n";
    for (const auto& s : r.sites)
        os << s.site << ',' << s.mean_direct << ',' << s.se_mean_direct << ',' << s.mean_profile << ','
           << s.se_mean_profile << ',' << s.var_direct << ',' << s.se_var_direct << ',' << s.var_profile << ','
           << s.se_var_profile << ',' << s.z_mean << ',' << s.z_var << ',' << s.atom_direct << ','
           << s.atom_profile << ',' << s.z_atom << '\n';
}

json to_json(const DensityMcReport& r) {
    json j = {{"paths", r.paths},
              {"conditioned", r.conditioned},
              {"total_mass", r.total_mass},
              {"conditioning_z", r.conditioning_z},
              {"chi2", r.chi2},
              {"dof", r.dof},
              {"p_value", r.p_value},
              {"worst_z", r.worst_z},
              {"merged_groups", r.merged_groups},
              {"empty_cells", r.empty_cells},
              {"flagged_cells", r.flagged_cells},
              {"passed", r.passed}};
    if (r.two_state) {
        j["two_state"] = {{"freq_same", r.freq_same},   {"expect_same", r.expect_same},
                          {"z_same", r.z_same},         {"freq_other", r.freq_other},
                          {"expect_other", r.expect_other}, {"z_other", r.z_other}};
    }
    return j;
}

json to_json(const RayKnightMcReport& r) {
    json sites = json::array();
    for (const auto& s : r.sites)
        sites.push_back({{"site", s.site}, {"z_mean", s.z_mean}, {"z_var", s.z_var}, {"z_atom", s.z_atom}});
    return {{"sites", sites},
            {"atom_expected", r.atom_expected},
            {"atom_direct", r.atom_direct},
            {"z_atom_direct", r.z_atom_direct},
            {"atom_profile", r.atom_profile},
            {"z_atom_profile", r.z_atom_profile},
            {"atom_count_direct", r.atom_count_direct},
            {"correlation", r.correlation},
            {"z_correlation", r.z_correlation},
            {"passed", r.passed}};
}

namespace {

Generator experiment_generator(const json& doc) {
    if (doc.contains("generator")) return generator_from_json(doc.at("generator"));
    if (doc.contains("generator_file")) return load_generator(doc.at("generator_file").get<std::string>());
    config_error("generator", "missing 'generator' or 'generator_file'");
}

std::vector<Index> labels_to_indices(const Generator& g, const json& list, const std::string& where) {
    if (!list.is_array()) config_error(where, "expected a list of labels");
    std::vector<Index> out;
    for (std::size_t i = 0; i < list.size(); ++i) {
        const auto l = label_of(list[i], where + "[" + std::to_string(i) + "]");
        try {
            out.push_back(g.index_of(l));
        } catch (const Error&) {
            config_error(where, "unknown state '" + l + "'");
        }
    }
    return out;
}

Index label_index(const Generator& g, const json& doc, const char* key) {
    if (!doc.contains(key)) config_error(key, "missing");
    const auto l = label_of(doc.at(key), key);
    try {
        return g.index_of(l);
    } catch (const Error&) {
        config_error(key, "unknown state '" + l + "'");
    }
}

} // namespace

DensityMcConfig density_mc_config(const json& doc) {
    DensityMcConfig c;
    c.generator = experiment_generator(doc);
    if (!doc.contains("R")) config_error("R", "missing");
    c.range = labels_to_indices(c.generator, doc.at("R"), "R");
    c.a = label_index(c.generator, doc, "a");
    c.b = label_index(c.generator, doc, "b");
    c.horizon = get_or(doc, "T", 1.0);
    c.samples = get_or<std::uint64_t>(doc, "samples", c.samples);
    c.seed = get_or<std::uint64_t>(doc, "seed", c.seed);
    c.cells_per_axis = get_or(doc, "cells", 0);
    c.p_threshold = get_or(doc, "p_threshold", c.p_threshold);
    if (!(c.horizon > 0.0)) config_error("T", "must be positive");
    return c;
}

RayKnightMcConfig rayknight_mc_config(const json& doc) {
    RayKnightMcConfig c;
    c.b = get_or(doc, "b", c.b);
    c.h = get_or(doc, "h", c.h);
    c.samples = get_or<std::uint64_t>(doc, "samples", c.samples);
    c.seed = get_or<std::uint64_t>(doc, "seed", c.seed);
    c.window = get_or(doc, "window", c.window);
    if (doc.contains("sites")) c.sites = get_or(doc, "sites", c.sites);
    if (c.b < 1) config_error("b", "must be at least 1");
    if (!(c.h > 0.0)) config_error("h", "must be positive");
    return c;
}

namespace {

struct ExperimentOutcome {
    bool passed = false;
    json summary;
};

ExperimentOutcome run_density_point(const json& doc, std::ostream& csv) {
    const Generator g = experiment_generator(doc);
    const auto range = labels_to_indices(g, doc.at("R"), "R");
    const auto values = get_or<std::vector<double>>(doc, "l", {});
    if (values.size() != range.size()) config_error("l", "needs one value per state of R");
    const auto l = make_simplex_point(range, Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Index>(values.size())));
    const Index a = label_index(g, doc, "a"), b = label_index(g, doc, "b");
    DensityOptions opt;
    opt.tol = get_or(doc, "tol", opt.tol);
    const auto v = density_certified(g, l, a, b, opt);
    csv << std::setprecision(17) << "value,tail_bound,order,flows\n"
        << v.value << ',' << v.tail_bound << ',' << v.order << ',' << v.flows << '\n';
    ExperimentOutcome out{true, {{"value", v.value}, {"tail_bound", v.tail_bound}, {"order", v.order}}};
    if (doc.contains("expect")) {
        const double e = doc.at("expect").get<double>();
        const double tol = get_or(doc, "expect_tol", 1e-10);
        out.passed = std::abs(v.value - e) <= tol * std::max(1.0, std::abs(e));
        out.summary["expect"] = e;
    }
    return out;
}

ExperimentOutcome run_bound_point(const json& doc, std::ostream& csv) {
    const Generator g = experiment_generator(doc);
    const auto range = labels_to_indices(g, doc.at("R"), "R");
    const auto values = get_or<std::vector<double>>(doc, "l", {});
    if (values.size() != range.size()) config_error("l", "needs one value per state of R");
    const auto l = make_simplex_point(range, Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Index>(values.size())));
    const Index a = label_index(g, doc, "a"), b = label_index(g, doc, "b");
    const double rho = density(g, l, a, b);
    const double bound = density_upper_bound(g, l, a, b);
    csv << std::setprecision(17) << "density,bound\n" << rho << ',' << bound << '\n';
    return {rho <= bound + 1e-12, {{"density", rho}, {"bound", bound}}};
}

ExperimentOutcome run_rate_point(const json& doc, std::ostream& csv) {
    const Generator g = experiment_generator(doc);
    const auto mu = get_or<std::vector<double>>(doc, "mu", {});
    if (static_cast<Index>(mu.size()) != g.size()) config_error("mu", "needs one value per state");
    const Eigen::VectorXd m = Eigen::Map<const Eigen::VectorXd>(mu.data(), static_cast<Index>(mu.size()));
    const auto sol = rate_general(g, m);
    csv << std::setprecision(17) << "value,iterations,gradient_norm\n"
        << sol.value << ',' << sol.iterations << ',' << sol.final_gradient_norm << '\n';
    json out = {{"value", sol.value}, {"iterations", sol.iterations}};
    bool ok = true;
    if (g.is_symmetric(1e-12)) {
        const double s = rate_symmetric(g, m);
        out["symmetric_value"] = s;
        ok = std::abs(s - sol.value) <= 1e-6;
    }
    return {ok, out};
}

} // namespace

int run_suite(const json& doc, const std::filesystem::path& out) {
    if (!doc.is_object() || !doc.contains("experiments") || !doc.at("experiments").is_array())
        config_error("suite", "expected an object with an 'experiments' list");
    std::filesystem::create_directories(out);
    const auto suite_seed = get_or<std::uint64_t>(doc, "seed", 1);

    json summary = {{"config_hash", hex(config_hash(doc))}, {"seed", suite_seed}, {"experiments", json::array()}};
    bool all = true;
    const auto& list = doc.at("experiments");
    for (std::size_t i = 0; i < list.size(); ++i) {
        json exp = list[i];
        if (!exp.is_object() || !exp.contains("kind")) config_error("experiments[" + std::to_string(i) + "]", "missing kind");
        if (!exp.contains("seed")) exp["seed"] = suite_seed;
        const auto kind = exp.at("kind").get<std::string>();
        const auto name = get_or<std::string>(exp, "name", kind + "-" + std::to_string(i));
        const auto seed = exp.at("seed").get<std::uint64_t>();

        std::ofstream csv(out / (name + ".csv"));
        write_csv_header(csv, exp, seed);
        ExperimentOutcome o;
        if (kind == "verify-density") {
            const auto r = verify_density_mc(density_mc_config(exp));
            write_density_csv(csv, r);
            o = {r.passed, to_json(r)};
        } else if (kind == "verify-rayknight") {
            const auto r = verify_rayknight_mc(rayknight_mc_config(exp));
            write_rayknight_csv(csv, r);
            o = {r.passed, to_json(r)};
        } else if (kind == "density") {
            o = run_density_point(exp, csv);
        } else if (kind == "bound") {
            o = run_bound_point(exp, csv);
        } else if (kind == "rate") {
            o = run_rate_point(exp, csv);
        } else {
            config_error("experiments[" + std::to_string(i) + "].kind", "unknown kind '" + kind + "'");
        }
        o.summary["name"] = name;
        o.summary["kind"] = kind;
        o.summary["seed"] = seed;
        o.summary["config_hash"] = hex(config_hash(exp));
        o.summary["passed"] = o.passed;
        summary["experiments"].push_back(o.summary);
        all = all && o.passed;
    }
    summary["all_passed"] = all;
    std::ofstream(out / "summary.json") << summary.dump(2) << '\n';
    return all ? 0 : 1;
}

} // namespace loctime
