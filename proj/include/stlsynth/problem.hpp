#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "stlsynth/gp.hpp"
#include "stlsynth/reach.hpp"
#include "stlsynth/stl.hpp"
#include "stlsynth/system.hpp"
#include "stlsynth/verify.hpp"

namespace stlsynth {

inline constexpr const char* kToolVersion = "0.1.0";

// ── ProblemSpec ─────────────────────────────────────────────────────────────
// One benchmark in a single structured text file: dynamics, sets, sampling
// and grid steps, the STL formula with named propositional macros, the GP
// grammar with per-target starting trees, and the engine settings.

struct ProblemSpec {
    std::string name;
    int version = 1;
    SystemModel sys;
    Box input_box;  // empty when the formula has no input constraints

    std::string stl_text;       // as written, before macro substitution
    std::string stl_expanded;   // after macro substitution
    StlFormula formula;

    std::string grammar_text;

    enum class Mode { Free, ReferenceTracking };
    Mode mode = Mode::Free;

    int ns = 1;
    int max_refinements = 50;
    int a1a_cap = 100;
    bool error_model = true;
    double delta_max = 0.2;

    GpConfig gp_kappa, gp_omega, gp_uff, gp_xref;
    ReachConfig reach;
    VerifyConfig verify;

    std::uint64_t problem_hash = 0;

    // grammar instantiated with terminal bindings (uff1.., xref1.. in
    // reference-tracking mode)
    Grammar grammar(const std::map<std::string, ScalarExpression>& terminals = {}) const;

    Rational horizon() const;  // tau_f of the transformed formula
};

ProblemSpec parse_problem(const std::string& text);
ProblemSpec load_problem(const std::string& path);
std::string print_problem(const ProblemSpec& spec);

std::uint64_t fnv1a(const std::string& data);

}  // namespace stlsynth
