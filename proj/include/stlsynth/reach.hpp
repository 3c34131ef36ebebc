#pragma once

#include "stlsynth/polyzono.hpp"
#include "stlsynth/system.hpp"

namespace stlsynth {

struct ReachError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ReachConfig {
    double step = 0.01;        // internal propagation step; c/2 windows subdivide evenly
    int taylor_order = 4;      // matrix exponential Taylor order
    int poly_order = 4;        // truncation degree for polynomial controller resets
    int max_gens_factor = 20;  // generator budget = factor * augmented dimension
    int max_inflations = 30;
    double inflation_rel = 0.1;
    double inflation_abs = 1e-9;
};

// ── ReachSequence ───────────────────────────────────────────────────────────
// Alternating point / open-interval entries on the c/2 grid: even grid
// indices hold polynomial zonotopes over a shared factor space whose first
// p0 factors parameterize the initial set (never reduced away); odd indices
// hold interval boxes covering the whole open window, which the a-priori
// step enclosures provide. Entries are over the state dimensions only.

struct ReachEntry {
    bool is_point = true;
    PolyZonotope set;   // point entries
    Box box;            // enclosure (both kinds)
    Interval time;      // degenerate for points, the window closure otherwise
};

struct ReachSequence {
    Rational c;
    int p0 = 0;
    std::vector<int> init_factor_dims;  // initial factor k -> state dimension
    Box init_box;
    std::vector<ReachEntry> entries;

    const ReachEntry& at(int grid_index) const {
        if (grid_index < 0 || grid_index >= static_cast<int>(entries.size()))
            throw std::out_of_range("reach sequence has no entry at grid index " +
                                    std::to_string(grid_index));
        return entries[grid_index];
    }

    // initial state for a parameterization restricted to the initial factors
    std::vector<double> initial_point(const std::vector<double>& alpha_init) const;
};

// Over-approximate reachability of the sampled-data closed loop by
// conservative linearization: held input as extra state dimensions, resets
// u <- kappa(t_k, x) applied exactly for polynomial controllers (first-order
// mean value with interval remainder otherwise), propagation between events
// by Taylor-truncated exponential of the local linearization with the
// Lagrange remainder bounded over a validated a-priori enclosure, and
// disturbances entering as fresh interval factors each step.
ReachSequence reach_closed_loop(const SystemModel& sys, const Controller& kappa,
                                const Rational& horizon, const ReachConfig& cfg);

// CSV dump: one line per grid entry with the enclosure box.
std::string reach_csv(const ReachSequence& seq);

}  // namespace stlsynth
