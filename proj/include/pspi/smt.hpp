#pragma once

#include "pspi/game.hpp"
#include "pspi/pmdp.hpp"
#include "pspi/polynomial.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pspi {

enum class Rel { Eq, Le, Lt, Ge, Gt };

/// poly rel 0
struct Atom {
    Polynomial poly;
    Rel rel = Rel::Eq;
};

/// Disjunction of atoms (a single atom in the common case).
struct Constraint {
    std::vector<Atom> any_of;
    std::string tag;  // emitted as a comment
};

/// Bellman optimality system of a pMDP over the reals. Variables are
/// x_<param>, v_<state index> and q_<state index>_<action index>.
struct EtrSystem {
    std::vector<std::string> param_vars;
    std::vector<std::string> v_vars;
    std::vector<std::string> q_vars;
    std::vector<Constraint> constraints;
    std::optional<Constraint> query;

    std::size_t constraint_count() const { return constraints.size() + (query ? 1 : 0); }
    std::size_t atom_count() const;
};

std::string param_var(const std::string& param);
std::string v_var(std::size_t s);
std::string q_var(std::size_t s, std::size_t a);

/// Graph-preserving conditions on the parameters, Q = R + sum disc * P * V for
/// every enabled pair, V >= Q for every action and V equal to one of them.
EtrSystem encode_bellman(const PMdp& m);

/// Deterministic SMT-LIB 2 script (QF_NRA) with exact rational constants.
std::string emit_smtlib(const EtrSystem& sys);

/// Minimal S-expression reader for solver output and emitted scripts.
struct Sexp {
    std::string atom;  // empty for lists
    std::vector<Sexp> list;
    bool is_list = false;
};
std::vector<Sexp> parse_sexps(std::string_view text);

enum class SmtStatus { Sat, Unsat, Unknown, Timeout };
std::string to_string(SmtStatus s);

struct SolverVerdict {
    SmtStatus status = SmtStatus::Unknown;
    /// Present only for sat: variable -> value text as printed by the solver.
    std::optional<std::map<std::string, std::string>> model;
    double wall_time = 0.0;
};

/// Value of a solver model entry, if it is a rational literal or a quotient of them.
std::optional<double> model_value(const std::string& text);

/// PSPI_SMT_SOLVER from the environment, else the solver found at build time, else "z3 -in".
std::string default_solver_command();

/// Runs `solver_command` through /bin/sh with the script on stdin.
/// Throws SolverError on launch failure, abnormal exit or unreadable output.
SolverVerdict solve(const std::string& script, const std::string& solver_command, double timeout_s);

/// aVal of every state as exact rationals, consistent with the max-min equations.
std::vector<Rational> exact_aval(const PMdp& m);

struct SmtOptions {
    std::string solver_command = default_solver_command();
    double timeout_s = 60.0;
    /// Graph-preserving valuations tried before the solver runs. A valuation at
    /// which the query holds by more than the strict margin answers sat directly.
    std::size_t witness_samples = 0;
    std::uint64_t witness_seed = 1;
};

/// Verdict-backed answer; `queried` is false for guarded pairs (single action).
struct SmtDecision {
    bool prunable = false;
    bool queried = false;
    bool strict_bound = false;
    bool witnessed = false;  // sat shown by a sampled valuation, no solver run
    SolverVerdict verdict;
};

enum class SmtQuery { AvalQ, QQ };

/// System plus the negated pruning condition for (s,a).
EtrSystem pruning_query(const PMdp& m, std::size_t s, std::size_t a, SmtQuery kind);

SmtDecision aval_q_prunable(const PMdp& m, std::size_t s, std::size_t a, const SmtOptions& opt = {});
SmtDecision qq_prunable(const PMdp& m, std::size_t s, std::size_t a, const SmtOptions& opt = {});

struct SmtPruneOptions {
    SmtOptions smt;
    bool use_aval_q = true;
    bool use_qq = true;
    std::size_t jobs = 1;  // concurrent solver processes
};

/// One pass over every pair at states with several actions, each query on m
/// itself. Unknown or timeout never prunes; a state always keeps one action.
std::pair<PMdp, PruneResult> smt_prune(const PMdp& m, const SmtPruneOptions& opt = {});

} // namespace pspi
