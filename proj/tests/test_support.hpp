#pragma once

// Shared random generators for the property harnesses: random normal-form RTL
// formulas, random finite point maps, random fragment STL formulas and random
// sampled signals. Deterministic under the caller's RNG.

#include <random>
#include <vector>

#include "stlsynth/rtl.hpp"
#include "stlsynth/stl.hpp"

namespace testgen {

using namespace stlsynth;

inline ScalarExpression random_affine(std::mt19937_64& rng, int dims) {
    std::uniform_real_distribution<double> coeff(-1.0, 1.0);
    std::uniform_int_distribution<int> var(1, dims);
    auto e = ScalarExpression::constant(coeff(rng));
    int terms = 1 + static_cast<int>(rng() % 2);
    for (int i = 0; i < terms; ++i) {
        double a = coeff(rng);
        if (std::abs(a) < 0.05) a = 0.3;
        e = ScalarExpression::add(
            e, ScalarExpression::mul(ScalarExpression::constant(a),
                                     ScalarExpression::state(var(rng))));
    }
    return e;
}

inline Prop random_prop(std::mt19937_64& rng, int dims, int depth = 2) {
    std::uniform_int_distribution<int> pick(0, depth > 0 ? 4 : 0);
    switch (pick(rng)) {
        case 1: return Prop::negation(random_prop(rng, dims, depth - 1));
        case 2: return Prop::conj(random_prop(rng, dims, depth - 1),
                                  random_prop(rng, dims, depth - 1));
        case 3: return Prop::disj(random_prop(rng, dims, depth - 1),
                                  random_prop(rng, dims, depth - 1));
        case 4:
            if (rng() % 20 == 0) return Prop::make_true();
            [[fallthrough]];
        default:
            return Prop::pred(random_affine(rng, dims), rng() % 2 == 0);
    }
}

inline NormalFormRtl random_normal_form(std::mt19937_64& rng, int dims, int max_grid) {
    NormalFormRtl phi;
    phi.c = Rational(1, 2);
    int n_conj = 1 + static_cast<int>(rng() % 4);
    for (int i = 0; i < n_conj; ++i) {
        RtlClause cl;
        int n_at = 1 + static_cast<int>(rng() % 3);
        for (int k = 0; k < n_at; ++k) {
            RtlAtom at;
            at.grid_index = static_cast<int>(rng() % (max_grid + 1));
            at.prop = to_dnf(random_prop(rng, dims));
            cl.atoms.push_back(std::move(at));
        }
        phi.conjuncts.push_back(std::move(cl));
    }
    return phi;
}

inline TimedPointMap random_point_map(std::mt19937_64& rng, int dims, int entries) {
    std::uniform_real_distribution<double> val(-2.0, 2.0);
    TimedPointMap map;
    map.c = Rational(1, 2);
    map.entries.resize(entries);
    for (auto& e : map.entries) {
        int pts = 1 + static_cast<int>(rng() % 4);
        for (int p = 0; p < pts; ++p) {
            std::vector<double> x(dims);
            for (auto& v : x) v = val(rng);
            e.push_back(std::move(x));
        }
    }
    return map;
}

// Random c-divisible STL formula in the transformation fragment: temporal
// operators over propositional operands, combined with & and |.
inline StlFormula random_prop_stl(std::mt19937_64& rng, int dims, int depth = 1) {
    std::uniform_int_distribution<int> pick(0, depth > 0 ? 3 : 0);
    switch (pick(rng)) {
        case 1: return StlFormula::negation(random_prop_stl(rng, dims, depth - 1));
        case 2: return StlFormula::conj(random_prop_stl(rng, dims, depth - 1),
                                        random_prop_stl(rng, dims, depth - 1));
        case 3: return StlFormula::disj(random_prop_stl(rng, dims, depth - 1),
                                        random_prop_stl(rng, dims, depth - 1));
        default: return StlFormula::pred(random_affine(rng, dims), rng() % 2 == 0);
    }
}

inline StlFormula random_fragment_formula(std::mt19937_64& rng, int dims, const Rational& c,
                                          int max_steps) {
    auto bound = [&](int lo, int hi) {
        return Rational(lo + static_cast<int>(rng() % (hi - lo + 1))) * c;
    };
    auto temporal = [&]() -> StlFormula {
        int kind = static_cast<int>(rng() % 5);
        Rational a = bound(0, max_steps / 2);
        Rational b = a + bound(1, max_steps / 2);
        switch (kind) {
            case 0: return StlFormula::always(a, b, random_prop_stl(rng, dims));
            case 1: return StlFormula::eventually(a, b, random_prop_stl(rng, dims));
            case 2: return StlFormula::until(a, b, random_prop_stl(rng, dims),
                                             random_prop_stl(rng, dims));
            case 3: return StlFormula::always(a, a, random_prop_stl(rng, dims));
            default: return StlFormula::next(a, random_prop_stl(rng, dims));
        }
    };
    StlFormula f = temporal();
    int extra = static_cast<int>(rng() % 3);
    for (int i = 0; i < extra; ++i) {
        if (rng() % 2 == 0) f = StlFormula::conj(f, temporal());
        else f = StlFormula::disj(f, temporal());
    }
    return f;
}

inline SampledSignal random_signal(std::mt19937_64& rng, int dims, const Rational& c,
                                   int entities) {
    std::uniform_real_distribution<double> val(-1.0, 1.0);
    SampledSignal sig;
    sig.c = c;
    sig.entries.resize(entities);
    for (auto& e : sig.entries) {
        e.resize(dims);
        for (auto& v : e) v = val(rng);
    }
    return sig;
}

// Point map view of a sampled signal (singleton entries).
inline TimedPointMap signal_as_map(const SampledSignal& sig) {
    TimedPointMap map;
    map.c = sig.c;
    for (const auto& e : sig.entries) map.entries.push_back({e});
    return map;
}

}  // namespace testgen
