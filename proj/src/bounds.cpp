#include "loctime/bounds.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "loctime/error.hpp"
#include "loctime/rng.hpp"

namespace loctime {

Eigen::MatrixXd killed_rates(const Generator& g, const std::vector<Index>& range) {
    if (range.empty()) throw Error(ErrorKind::EmptySubset, "empty range");
    const Index m = static_cast<Index>(range.size());
    Eigen::MatrixXd a(m, m);
    for (Index i = 0; i < m; ++i)
        for (Index j = 0; j < m; ++j) a(i, j) = g(range[i], range[j]);
    return a;
}

double eta(const Generator& g, const std::vector<Index>& range) {
    return eta(killed_rates(g, range));
}

double rate_symmetric(const Generator& g, const Eigen::VectorXd& mu) {
    return rate_symmetric(g.rates(), mu);
}

namespace {

bool strongly_connected(const Eigen::MatrixXd& a, const std::vector<Index>& support) {
    const std::size_t k = support.size();
    auto reach = [&](bool forward) {
        std::vector<bool> seen(k, false);
        std::vector<std::size_t> stack{0};
        seen[0] = true;
        while (!stack.empty()) {
            auto i = stack.back();
            stack.pop_back();
            for (std::size_t j = 0; j < k; ++j) {
                const double w = forward ? a(support[i], support[j]) : a(support[j], support[i]);
                if (i != j && w > 0.0 && !seen[j]) {
                    seen[j] = true;
                    stack.push_back(j);
                }
            }
        }
        return std::all_of(seen.begin(), seen.end(), [](bool s) { return s; });
    };
    return reach(true) && reach(false);
}

} // namespace

double rate_objective(const Eigen::MatrixXd& a, const Eigen::VectorXd& mu, const Eigen::VectorXd& g) {
    double s = 0.0;
    for (Index x = 0; x < a.rows(); ++x) {
        if (!(mu[x] > 0.0)) continue;
        double row = 0.0;
        for (Index y = 0; y < a.cols(); ++y)
            if (mu[y] > 0.0) row += a(x, y) * g[y];
        s += mu[x] * row / g[x];
    }
    return s;
}

RateSolution rate_general(const Eigen::MatrixXd& a, const Eigen::VectorXd& mu, const RateOptions& options) {
    const Index n = a.rows();
    if (a.cols() != n || mu.size() != n) throw Error(ErrorKind::DomainError, "size mismatch");
    if ((mu.array() < 0.0).any() || std::abs(mu.sum() - 1.0) > 1e-9)
        throw Error(ErrorKind::DomainError, "mu is not a probability vector");

    std::vector<Index> support;
    for (Index x = 0; x < n; ++x)
        if (mu[x] > 0.0) support.push_back(x);
    const Index k = static_cast<Index>(support.size());

    RateSolution sol;
    sol.minimizer = Eigen::VectorXd::Zero(n);
    if (k == 1) {
        sol.value = -a(support[0], support[0]);
        sol.minimizer[support[0]] = 1.0;
        return sol;
    }
    if (!strongly_connected(a, support))
        throw Error(ErrorKind::Unbounded, "support of mu is not strongly connected; the infimum is not attained");

    Eigen::VectorXd m(k), diag(k);
    Eigen::MatrixXd b(k, k);
    for (Index i = 0; i < k; ++i) {
        m[i] = mu[support[i]];
        diag[i] = a(support[i], support[i]);
        for (Index j = 0; j < k; ++j) b(i, j) = i == j ? 0.0 : a(support[i], support[j]);
    }
    const double constant = m.dot(diag);

    // w_ij = m_i b_ij e^{u_j - u_i}; f = constant + sum w_ij
    auto weights = [&](const Eigen::VectorXd& u) {
        Eigen::MatrixXd w(k, k);
        for (Index i = 0; i < k; ++i)
            for (Index j = 0; j < k; ++j) w(i, j) = b(i, j) == 0.0 ? 0.0 : m[i] * b(i, j) * std::exp(u[j] - u[i]);
        return w;
    };
    auto objective = [&](const Eigen::VectorXd& u) { return constant + weights(u).sum(); };

    Eigen::VectorXd u = 0.5 * m.array().log().matrix();
    u.array() -= u[0];
    const double scale = 1.0 + b.cwiseAbs().maxCoeff();
    double f = objective(u);
    for (int it = 0;; ++it) {
        const Eigen::MatrixXd w = weights(u);
        const Eigen::VectorXd grad = w.colwise().sum().transpose() - w.rowwise().sum();
        const Eigen::VectorXd gf = grad.tail(k - 1);
        sol.iterations = it;
        sol.final_gradient_norm = gf.norm();
        if (sol.final_gradient_norm <= options.tol * scale) break;
        if (it >= options.max_iterations)
            throw Error(ErrorKind::NotConverged, "rate minimisation stalled at gradient norm " +
                                                     std::to_string(sol.final_gradient_norm));

        const Eigen::MatrixXd sym = w + w.transpose();
        Eigen::MatrixXd h = -sym;
        h.diagonal() = sym.rowwise().sum();
        Eigen::VectorXd step = h.bottomRightCorner(k - 1, k - 1).ldlt().solve(-gf);
        if (!step.allFinite() || step.dot(gf) >= 0.0) step = -gf;

        double t = 1.0;
        bool moved = false;
        Eigen::VectorXd trial(k);
        for (int back = 0; back < 60 && !moved; ++back, t *= 0.5) {
            trial = u;
            trial.tail(k - 1) += t * step;
            const double ft = objective(trial);
            if (ft <= f + 1e-4 * t * step.dot(gf)) {
                u = trial;
                f = ft;
                moved = true;
            }
        }
        if (!moved) break; // no decrease representable in double precision
    }
    sol.value = -f;
    for (Index i = 0; i < k; ++i) sol.minimizer[support[i]] = std::exp(u[i] - u[0]);
    return sol;
}

RateSolution rate_general(const Generator& g, const Eigen::VectorXd& mu, const RateOptions& options) {
    return rate_general(g.rates(), mu, options);
}

double density_upper_bound(const Generator& g, const SimplexPoint& l, Index a, Index b) {
    l.position(a);
    l.position(b);
    const double t = l.total();
    const Index m = l.size();
    const Eigen::MatrixXd ar = killed_rates(g, l.range);
    Eigen::MatrixXd br = ar;
    br.diagonal().setZero();
    const double e = eta(br);
    const Eigen::VectorXd mu = l.values / t;

    double log_bound = (m - 1) * std::log(e);
    for (Index i = 0; i < m; ++i) {
        const Index x = l.range[static_cast<std::size_t>(i)];
        if (x != a && x != b) log_bound += 0.5 * std::log(t / l.values[i]);
    }
    // g = sqrt(l) is the minimizer for symmetric rates; without a minimizer
    // (support not strongly connected) it still gives a valid bound.
    Eigen::VectorXd gg = l.values.cwiseSqrt();
    const double asym = (ar - ar.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-12 * (1.0 + ar.cwiseAbs().maxCoeff())) {
        try {
            gg = rate_general(ar, mu).minimizer;
        } catch (const Error& err) {
            if (err.kind() != ErrorKind::Unbounded && err.kind() != ErrorKind::NotConverged) throw;
        }
    }
    log_bound += t * rate_objective(ar, mu, gg);
    double s = 0.0;
    for (Index x = 0; x < m; ++x)
        for (Index y = 0; y < m; ++y)
            if (x != y && br(x, y) != 0.0)
                s += std::sqrt(l.values[x]) * gg[y] * br(x, y) / (std::sqrt(l.values[y]) * gg[x]);
    log_bound += (1.0 / e + 1.0 / (4.0 * e * e * t)) * s;
    return std::exp(log_bound);
}

namespace {

double ldp_error_terms(const Generator& g, const std::vector<Index>& s, double horizon) {
    if (horizon < 1.0) throw Error(ErrorKind::TooEarly, "the finite-T bounds need T >= 1");
    if (s.empty()) throw Error(ErrorKind::EmptySubset, "empty set S");
    if (!g.is_symmetric(1e-12)) throw Error(ErrorKind::NotSymmetric, "the bounds need a symmetric generator");
    const double e = eta(g, s);
    const double n = static_cast<double>(s.size());
    return n * std::log(e * std::sqrt(8.0 * std::numbers::e) * horizon) + std::log(n) + n / (4.0 * horizon);
}

} // namespace

double ldp_probability_bound(const Generator& g, const std::vector<Index>& s, double inf_rate, double horizon) {
    return -horizon * inf_rate + ldp_error_terms(g, s, horizon);
}

double ldp_varadhan_bound(const Generator& g, const std::vector<Index>& s, double sup_value, double horizon) {
    return horizon * sup_value + ldp_error_terms(g, s, horizon);
}

double halfspace_inf_rate(const Generator& g, const std::vector<Index>& s, const Eigen::VectorXd& c,
                          double threshold) {
    const Eigen::MatrixXd a = killed_rates(g, s);
    const Index k = a.rows();
    if (c.size() != k) throw Error(ErrorKind::DomainError, "constraint vector size mismatch");
    if (k > 3) throw Error(ErrorKind::DomainError, "half-space helper supports |S| <= 3");
    auto rate = [&](const Eigen::VectorXd& mu) {
        const Eigen::VectorXd r = mu.cwiseMax(0.0).cwiseSqrt();
        return -r.dot(a * r);
    };
    constexpr double inf = std::numeric_limits<double>::infinity();

    if (k == 1) return c[0] >= threshold ? -a(0, 0) : inf;

    if (k == 2) {
        // feasible mu_2 = t form an interval; the rate is convex in t
        double lo = 0.0, hi = 1.0;
        const double slope = c[1] - c[0];
        if (slope > 0.0) lo = std::max(lo, (threshold - c[0]) / slope);
        else if (slope < 0.0) hi = std::min(hi, (threshold - c[0]) / slope);
        else if (c[0] < threshold) return inf;
        if (lo > hi) return inf;
        auto at = [&](double t) { return rate(Eigen::Vector2d(1.0 - t, t)); };
        const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
        double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
        double f1 = at(x1), f2 = at(x2);
        for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
            if (f1 < f2) {
                hi = x2, x2 = x1, f2 = f1;
                x1 = hi - phi * (hi - lo), f1 = at(x1);
            } else {
                lo = x1, x1 = x2, f1 = f2;
                x2 = lo + phi * (hi - lo), f2 = at(x2);
            }
        }
        return std::min({at(lo), at(hi), f1, f2});
    }

    // three states: grid on the simplex, then a shrinking pattern search
    auto feasible = [&](const Eigen::Vector3d& mu) { return (mu.array() >= 0.0).all() && c.dot(mu) >= threshold; };
    const int n = 400;
    double best = inf;
    Eigen::Vector3d arg;
    for (int i = 0; i <= n; ++i)
        for (int j = 0; i + j <= n; ++j) {
            Eigen::Vector3d mu(i, j, n - i - j);
            mu /= n;
            if (!feasible(mu)) continue;
            const double v = rate(mu);
            if (v < best) best = v, arg = mu;
        }
    if (!std::isfinite(best)) return inf;
    const Eigen::Vector3d dirs[6] = {{1, -1, 0}, {-1, 1, 0}, {1, 0, -1}, {-1, 0, 1}, {0, 1, -1}, {0, -1, 1}};
    for (double h = 1.0 / n; h > 1e-14;) {
        bool moved = false;
        for (const auto& d : dirs) {
            const Eigen::Vector3d trial = arg + h * d;
            if (!feasible(trial)) continue;
            const double v = rate(trial);
            if (v < best) best = v, arg = trial, moved = true;
        }
        if (!moved) h *= 0.5;
    }
    return best;
}

double linear_sup_value(const Generator& g, const std::vector<Index>& s, const Eigen::VectorXd& v) {
    Eigen::MatrixXd m = killed_rates(g, s);
    if (v.size() != m.rows()) throw Error(ErrorKind::DomainError, "potential size mismatch");
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + m.cwiseAbs().maxCoeff()))
        throw Error(ErrorKind::NotSymmetric, "variational formula needs symmetric rates");
    m.diagonal() += v;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
}

double log_feynman_kac(const Generator& g, const std::vector<Index>& s, const Eigen::VectorXd& v, Index start,
                       double horizon) {
    Eigen::MatrixXd m = killed_rates(g, s);
    if (v.size() != m.rows()) throw Error(ErrorKind::DomainError, "potential size mismatch");
    auto it = std::find(s.begin(), s.end(), start);
    if (it == s.end()) throw Error(ErrorKind::DomainError, "start is not in S");
    m.diagonal() += v;
    const Eigen::MatrixXd e = (horizon * m).exp();
    return std::log(e.row(it - s.begin()).sum());
}

std::vector<std::vector<int>> box_sites(int box_radius, int dimension) {
    if (box_radius < 0 || dimension < 1) throw Error(ErrorKind::DomainError, "bad box");
    std::vector<std::vector<int>> out{{}};
    for (int d = 0; d < dimension; ++d) {
        std::vector<std::vector<int>> next;
        for (const auto& p : out)
            for (int x = -box_radius; x <= box_radius; ++x) {
                auto q = p;
                q.push_back(x);
                next.push_back(std::move(q));
            }
        out = std::move(next);
    }
    return out;
}

namespace {

struct ChiProblem {
    double alpha;
    double scale; // alpha^d
    std::vector<std::pair<Index, Index>> edges;
    const GridFunctional* f;

    Eigen::VectorXd softmax(const Eigen::VectorXd& w) const {
        Eigen::VectorXd e = (w.array() - w.maxCoeff()).exp();
        return e / e.sum();
    }

    double value_mu(const Eigen::VectorXd& mu) const {
        double d = 0.0;
        for (auto [x, y] : edges) {
            const double diff = std::sqrt(mu[x]) - std::sqrt(mu[y]);
            d += diff * diff;
        }
        return 0.5 * alpha * alpha * d - f->value(scale * mu);
    }

    Eigen::VectorXd functional_gradient(const Eigen::VectorXd& phi) const {
        if (f->gradient) return f->gradient(phi);
        Eigen::VectorXd g(phi.size());
        Eigen::VectorXd p = phi;
        for (Index i = 0; i < phi.size(); ++i) {
            const double h = 1e-6 * std::max(1.0, std::abs(phi[i]));
            p[i] = phi[i] + h;
            const double up = f->value(p);
            p[i] = phi[i] - h;
            const double down = f->value(p);
            p[i] = phi[i];
            g[i] = (up - down) / (2.0 * h);
        }
        return g;
    }

    double evaluate(const Eigen::VectorXd& w, Eigen::VectorXd& grad) const {
        const Eigen::VectorXd mu = softmax(w);
        Eigen::VectorXd h = -scale * functional_gradient(scale * mu);
        const Eigen::VectorXd root = mu.cwiseSqrt();
        for (auto [x, y] : edges) {
            h[x] += 0.5 * alpha * alpha * (1.0 - root[y] / root[x]);
            h[y] += 0.5 * alpha * alpha * (1.0 - root[x] / root[y]);
        }
        grad = mu.cwiseProduct(h.array().matrix() - Eigen::VectorXd::Constant(mu.size(), h.dot(mu)));
        return value_mu(mu);
    }
};

} // namespace

ChiResult rescaled_chi_discrete(int box_radius, double alpha, const GridFunctional& f, const ChiOptions& options) {
    if (!(alpha > 0.0)) throw Error(ErrorKind::DomainError, "alpha must be positive");
    if (!f.value) throw Error(ErrorKind::DomainError, "functional has no value");
    const auto sites = box_sites(box_radius, options.dimension);
    const Index n = static_cast<Index>(sites.size());

    ChiProblem p{alpha, std::pow(alpha, options.dimension), {}, &f};
    for (Index i = 0; i < n; ++i)
        for (Index j = i + 1; j < n; ++j) {
            int dist = 0;
            for (int d = 0; d < options.dimension; ++d)
                dist += std::abs(sites[static_cast<std::size_t>(i)][static_cast<std::size_t>(d)] -
                                 sites[static_cast<std::size_t>(j)][static_cast<std::size_t>(d)]);
            if (dist == 1) p.edges.emplace_back(i, j);
        }

    ChiResult best;
    best.value = std::numeric_limits<double>::infinity();
    bool any_converged = false;
    const Rng root(options.seed);
    for (int r = 0; r < std::max(1, options.restarts); ++r) {
        Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
        if (r > 0) {
            Rng rng = root.split(static_cast<std::uint64_t>(r));
            std::normal_distribution<double> normal;
            for (Index i = 0; i < n; ++i) w[i] = normal(rng.engine());
        }
        // BFGS with Armijo backtracking
        Eigen::VectorXd grad(n), trial_grad(n);
        double val = p.evaluate(w, grad);
        Eigen::MatrixXd hinv = Eigen::MatrixXd::Identity(n, n);
        bool converged = false;
        for (int it = 0; it < options.max_iterations; ++it) {
            if (grad.norm() <= options.tol) {
                converged = true;
                break;
            }
            Eigen::VectorXd dir = -hinv * grad;
            if (dir.dot(grad) >= 0.0) {
                hinv.setIdentity();
                dir = -grad;
            }
            double t = 1.0;
            Eigen::VectorXd trial;
            double tv = 0.0;
            bool accepted = false;
            for (int back = 0; back < 60; ++back, t *= 0.5) {
                trial = w + t * dir;
                tv = p.evaluate(trial, trial_grad);
                if (tv <= val + 1e-4 * t * dir.dot(grad)) {
                    accepted = true;
                    break;
                }
            }
            if (!accepted) {
                if (hinv.isIdentity()) break;
                hinv.setIdentity();
                continue;
            }
            const Eigen::VectorXd s = trial - w;
            const Eigen::VectorXd y = trial_grad - grad;
            const double sy = s.dot(y);
            if (sy > 1e-300) {
                const double rho = 1.0 / sy;
                const Eigen::MatrixXd i_n = Eigen::MatrixXd::Identity(n, n);
                hinv = (i_n - rho * s * y.transpose()) * hinv * (i_n - rho * y * s.transpose()) + rho * s * s.transpose();
            }
            w = trial;
            val = tv;
            grad = trial_grad;
        }
        if (grad.norm() <= options.tol) converged = true;
        any_converged = any_converged || converged;
        if (val < best.value) {
            best.value = val;
            best.mu = p.softmax(w);
            best.gradient_norm = grad.norm();
        }
    }
    if (!any_converged)
        throw Error(ErrorKind::NotConverged, "no restart reached gradient norm " + std::to_string(options.tol));
    return best;
}

} // namespace loctime
