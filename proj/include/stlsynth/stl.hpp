#pragma once

#include <memory>
#include <string>
#include <vector>

#include "stlsynth/expr.hpp"
#include "stlsynth/rational.hpp"

namespace stlsynth {

// ── StlFormula ──────────────────────────────────────────────────────────────
// AST for bounded STL. Derived operators (Or, Next, Eventually, Always) are
// kept as explicit variants; their semantics expand to the Not/And/Until
// base per the usual definitions. All interval bounds are exact rationals.

enum class StlKind : std::uint8_t {
    True, Pred, Not, And, Or, Until, Next, Eventually, Always
};

struct StlNode;
using StlPtr = std::shared_ptr<const StlNode>;

struct StlNode {
    StlKind kind = StlKind::True;
    ScalarExpression pred;  // Pred: h(t,x,u) with `strict` selecting > vs >=
    bool strict = false;
    Rational a, b;          // temporal bounds; Next uses a only
    StlPtr lhs, rhs;
};

class StlFormula {
public:
    StlFormula() : node_(std::make_shared<const StlNode>()) {}
    explicit StlFormula(StlPtr n) : node_(std::move(n)) {}

    static StlFormula make_true();
    static StlFormula pred(ScalarExpression h, bool strict = false);
    static StlFormula negation(StlFormula f);
    static StlFormula conj(StlFormula a, StlFormula b);
    static StlFormula disj(StlFormula a, StlFormula b);
    static StlFormula until(Rational a, Rational b, StlFormula lhs, StlFormula rhs);
    static StlFormula next(Rational a, StlFormula f);
    static StlFormula eventually(Rational a, Rational b, StlFormula f);
    static StlFormula always(Rational a, Rational b, StlFormula f);

    const StlNode& node() const { return *node_; }
    const StlPtr& ptr() const { return node_; }

    // largest time the formula can reference, starting at 0
    Rational horizon() const;

    std::string str() const;

private:
    StlPtr node_;
};

// ── parse_stl ───────────────────────────────────────────────────────────────
// Surface syntax:
//   phi := "true" | pred | "!" phi | phi "&" phi | phi "|" phi
//        | "G[a,b]" phi | "F[a,b]" phi | "X[a]" phi | phi "U[a,b]" phi
//   pred := e ">=" e | e ">" e | e "<=" e | e "<" e   (normalized to h ~ 0)
// Interval bounds are rationals, optionally scaled by the symbol `c`
// (e.g. "U[c,2c]") which is bound by the caller. Precedence: ! > temporal
// prefix > U > & > |. Singleton intervals like G[1,1] are allowed for the
// point-in-time operators; a < b is required for F and U.

struct StlParseOptions {
    ExprLimits limits;        // variable bounds for predicates
    bool have_c = false;
    Rational c_value{1};
    IdentResolver macro = nullptr;  // named sub-formulas are not resolved here;
                                    // this hook resolves identifiers inside predicates
};

StlFormula parse_stl(const std::string& text, const StlParseOptions& opt = {});

// check_divisible: every temporal bound is an exact integer multiple of c.
bool check_divisible(const StlFormula& f, const Rational& c);

// ── Sampled signals & STL robustness ────────────────────────────────────────
// A sampled trajectory on the c/2 grid, stored as alternating "entities":
// entry q holds the state at time q*c/2 for even q, and the (constant)
// representative of the open interval between grid points for odd q. The
// induced continuous-time signal is piecewise constant on open intervals
// with exact values at the even grid points, which is the signal class the
// RTL point-map comparison reasons about.

struct SampledSignal {
    Rational c;                               // RTL step; sample spacing is c/2
    std::vector<std::vector<double>> entries; // entries[q] = state vector
    std::vector<double> inputs_at(int) const = delete;
};

// Quantitative STL semantics of the sampled signal starting at entity
// `entity0` (usually 0). Predicates over u are evaluated through `kappa`
// (optional controller tapes, one per input dimension) at the entity time.
struct SignalContext {
    const std::vector<CompiledExpr>* kappa = nullptr;  // for predicates over u
};

double stl_robustness(const SampledSignal& sig, const StlFormula& f, int entity0 = 0,
                      const SignalContext& ctx = {});

}  // namespace stlsynth
