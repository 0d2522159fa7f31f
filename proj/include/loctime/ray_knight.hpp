#pragma once

#include <utility>
#include <vector>

#include "loctime/chain.hpp"
#include "loctime/density.hpp"
#include "loctime/rng.hpp"

namespace loctime {

// f(h1, h2) = e^{-h1-h2} I0(2 sqrt(h1 h2)), a probability density in h2.
double rk_inner_density(double h1, double h2);

// Mass of the outer kernel at 0.
double rk_outer_atom(double h1);

// Absolutely continuous part e^{-h1-h2} sqrt(h1/h2) I1(2 sqrt(h1 h2)).
double rk_outer_density(double h1, double h2);

// One step of each kernel: Gamma(K + 1) resp. Gamma(K) with K ~ Poisson(h),
// Gamma(0) being the point mass at 0.
double sample_inner_step(double h, Rng& rng);
double sample_outer_step(double h, Rng& rng);

// Local-time profile on the sites lo..hi.
struct RkProfile {
    int lo = 0;
    int hi = 0;
    std::vector<double> values;

    double at(int site) const {
        return site < lo || site > hi ? 0.0 : values[static_cast<std::size_t>(site - lo)];
    }
};

// Profile at the inverse local time of level h at b for a walk started at 0,
// on the sites -window..b+window. The inner chain and the two outer chains
// draw from the substreams rng.split(0), rng.split(1), rng.split(2).
RkProfile sample_rk_profile(int b, double h, int window, const Rng& rng);

// (density value, kernel product) for simple random walk on Z. The range
// must be an interval with both neighbours present in g. a > b is reflected.
// Throws NotSRW, NotInterval.
std::pair<double, double> rk_fixed_time_check(const Generator& g, const SimplexPoint& l, Index a, Index b);

} // namespace loctime
