#ifndef DROIDGEN_SOLVER_HPP
#define DROIDGEN_SOLVER_HPP

#include <atomic>
#include <bit>
#include <chrono>
#include <cstdint>
#include <numeric>
#include <vector>

#include "droidgen/encode.hpp"

namespace droidgen {

struct SolveStats {
    std::uint64_t nodes = 0;
    std::uint64_t prunings = 0;
    double seconds = 0.0; // wall time; the only field that varies across runs
};

struct SolveResult {
    Assignment assignment;
    Ratio score{0};
    bool optimal = false;
    SolveStats stats;
};

struct ExactOptions {
    // Cooperative stop flag polled during the search. When it fires the
    // incumbent is returned with optimal=false; callers that enforce
    // timeouts discard it and fall back to the greedy result.
    const std::atomic<bool>* cancel = nullptr;
    // Audits the node bound against an exhaustive enumeration of the
    // subtree. Exponential; only for small test instances.
    bool debug_check_bounds = false;
};

namespace detail {

// All three solvers run on integer weights over a common denominator so the
// hot path never touches rational arithmetic.
struct ScaledInstance {
    long long denom = 1;
    long long base = 0;
    long long total = 0;
    std::vector<long long> benign_w;
    std::vector<long long> malware_w;
};

inline ScaledInstance scale_weights(const MaxSatInstance& inst) {
    ScaledInstance s;
    s.denom = inst.base_weight.denominator();
    for (const auto* clauses : {&inst.benign_clauses, &inst.malware_clauses}) {
        for (const auto& c : *clauses) {
            s.denom = std::lcm(s.denom, c.weight.denominator());
        }
    }
    const auto scale = [&](const Ratio& w) {
        return w.numerator() * (s.denom / w.denominator());
    };
    s.base = scale(inst.base_weight);
    s.total = s.base;
    s.benign_w.reserve(inst.benign_clauses.size());
    for (const auto& c : inst.benign_clauses) {
        s.benign_w.push_back(scale(c.weight));
        s.total += s.benign_w.back();
    }
    s.malware_w.reserve(inst.malware_clauses.size());
    for (const auto& c : inst.malware_clauses) {
        s.malware_w.push_back(scale(c.weight));
        s.total += s.malware_w.back();
    }
    return s;
}

inline long long eval_scaled(const MaxSatInstance& inst, const ScaledInstance& sc,
                             const Assignment& a) {
    long long total = sc.base;
    for (std::size_t i = 0; i < inst.benign_clauses.size(); ++i) {
        bool all_true = true;
        for (const VarId v : inst.benign_clauses[i].vars) {
            if (!a[v]) {
                all_true = false;
                break;
            }
        }
        if (all_true) {
            total += sc.benign_w[i];
        }
    }
    for (std::size_t i = 0; i < inst.malware_clauses.size(); ++i) {
        for (const VarId v : inst.malware_clauses[i].vars) {
            if (!a[v]) {
                total += sc.malware_w[i];
                break;
            }
        }
    }
    return total;
}

// Tie-break among equal-score assignments: most variables true (fewest
// deny-rules), then lexicographically greatest bit-vector.
inline bool lex_greater(const Assignment& a, const Assignment& b) {
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] != b[i]) {
            return a[i];
        }
    }
    return false;
}

inline std::size_t count_true(const Assignment& a) {
    std::size_t n = 0;
    for (const bool v : a) {
        n += v;
    }
    return n;
}

inline bool better_assignment(long long score_a, const Assignment& a,
                              long long score_b, const Assignment& b) {
    if (score_a != score_b) {
        return score_a > score_b;
    }
    const std::size_t pa = count_true(a);
    const std::size_t pb = count_true(b);
    if (pa != pb) {
        return pa > pb;
    }
    return lex_greater(a, b);
}

class Timer {
public:
    Timer() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_)
            .count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

} // namespace detail

// Exhaustive search over all 2^n assignments; the testing oracle for the
// exact solver. Guarded at 25 variables.
inline SolveResult solve_brute(const MaxSatInstance& inst) {
    const std::size_t n = inst.vars.size();
    if (n > 25) {
        throw std::invalid_argument("solve_brute is limited to 25 variables, got " +
                                    std::to_string(n));
    }
    const detail::Timer timer;
    const auto sc = detail::scale_weights(inst);

    // Clause var sets as bitmasks over var ids.
    std::vector<std::uint32_t> benign_masks, malware_masks;
    benign_masks.reserve(inst.benign_clauses.size());
    for (const auto& c : inst.benign_clauses) {
        std::uint32_t m = 0;
        for (const VarId v : c.vars) {
            m |= (std::uint32_t{1} << v);
        }
        benign_masks.push_back(m);
    }
    malware_masks.reserve(inst.malware_clauses.size());
    for (const auto& c : inst.malware_clauses) {
        std::uint32_t m = 0;
        for (const VarId v : c.vars) {
            m |= (std::uint32_t{1} << v);
        }
        malware_masks.push_back(m);
    }

    // Lexicographically greatest bit-vector = at the lowest differing var
    // id, the greater assignment is true there.
    const auto mask_lex_greater = [](std::uint32_t a, std::uint32_t b) {
        const std::uint32_t diff = a ^ b;
        if (diff == 0) {
            return false;
        }
        return ((a >> std::countr_zero(diff)) & 1u) != 0;
    };

    std::uint32_t best_mask = 0;
    long long best_score = -1;
    const std::uint64_t count = std::uint64_t{1} << n;
    for (std::uint64_t bits = 0; bits < count; ++bits) {
        const auto mask = static_cast<std::uint32_t>(bits);
        long long s = sc.base;
        for (std::size_t i = 0; i < benign_masks.size(); ++i) {
            if ((mask & benign_masks[i]) == benign_masks[i]) {
                s += sc.benign_w[i];
            }
        }
        for (std::size_t i = 0; i < malware_masks.size(); ++i) {
            if ((mask & malware_masks[i]) != malware_masks[i]) {
                s += sc.malware_w[i];
            }
        }
        if (s > best_score ||
            (s == best_score &&
             (std::popcount(mask) > std::popcount(best_mask) ||
              (std::popcount(mask) == std::popcount(best_mask) &&
               mask_lex_greater(mask, best_mask))))) {
            best_score = s;
            best_mask = mask;
        }
    }

    SolveResult res;
    res.assignment.resize(n);
    for (std::size_t v = 0; v < n; ++v) {
        res.assignment[v] = ((best_mask >> v) & 1u) != 0;
    }
    res.score = Ratio(best_score, sc.denom);
    res.optimal = true;
    res.stats.nodes = count;
    res.stats.seconds = timer.seconds();
    return res;
}

inline SolveResult solve_greedy(const MaxSatInstance& inst, std::uint64_t seed);

namespace detail {

class BranchAndBound {
public:
    BranchAndBound(const MaxSatInstance& inst, const ExactOptions& opts)
        : inst_(inst), sc_(scale_weights(inst)), opts_(opts),
          n_(inst.vars.size()) {
        benign_with_.resize(n_);
        malware_with_.resize(n_);
        for (std::size_t c = 0; c < inst.benign_clauses.size(); ++c) {
            for (const VarId v : inst.benign_clauses[c].vars) {
                benign_with_[v].push_back(c);
            }
        }
        for (std::size_t c = 0; c < inst.malware_clauses.size(); ++c) {
            for (const VarId v : inst.malware_clauses[c].vars) {
                malware_with_[v].push_back(c);
            }
        }
        // Branch on the variable occurring in the most clauses first.
        order_.resize(n_);
        std::iota(order_.begin(), order_.end(), 0);
        std::sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) {
            const std::size_t occ_a = benign_with_[a].size() + malware_with_[a].size();
            const std::size_t occ_b = benign_with_[b].size() + malware_with_[b].size();
            if (occ_a != occ_b) {
                return occ_a > occ_b;
            }
            return a < b;
        });
        b_unassigned_.reserve(inst.benign_clauses.size());
        for (const auto& c : inst.benign_clauses) {
            b_unassigned_.push_back(static_cast<int>(c.vars.size()));
        }
        b_false_.assign(inst.benign_clauses.size(), 0);
        m_unassigned_.reserve(inst.malware_clauses.size());
        for (const auto& c : inst.malware_clauses) {
            m_unassigned_.push_back(static_cast<int>(c.vars.size()));
        }
        m_false_.assign(inst.malware_clauses.size(), 0);
        value_.assign(n_, -1);
        satisfied_ = sc_.base;
        undetermined_ = sc_.total - sc_.base;
    }

    SolveResult run() {
        const Timer timer;
        // Initial incumbent: the greedy solution.
        incumbent_ = solve_greedy(inst_, 0).assignment;
        inc_score_ = eval_scaled(inst_, sc_, incumbent_);
        inc_true_ = count_true(incumbent_);
        dfs();
        SolveResult res;
        res.assignment = std::move(incumbent_);
        res.score = Ratio(inc_score_, sc_.denom);
        res.optimal = !cancelled_;
        res.stats = stats_;
        res.stats.seconds = timer.seconds();
        return res;
    }

private:
    void assign(std::size_t v, bool val) {
        value_[v] = val ? 1 : 0;
        ++assigned_;
        trues_ += val ? 1 : 0;
        for (const std::size_t c : benign_with_[v]) {
            --b_unassigned_[c];
            if (val) {
                if (b_unassigned_[c] == 0 && b_false_[c] == 0) {
                    satisfied_ += sc_.benign_w[c];
                    undetermined_ -= sc_.benign_w[c];
                }
            } else {
                if (++b_false_[c] == 1) {
                    undetermined_ -= sc_.benign_w[c];
                }
            }
        }
        for (const std::size_t c : malware_with_[v]) {
            --m_unassigned_[c];
            if (val) {
                if (m_unassigned_[c] == 0 && m_false_[c] == 0) {
                    undetermined_ -= sc_.malware_w[c];
                }
            } else {
                if (++m_false_[c] == 1) {
                    satisfied_ += sc_.malware_w[c];
                    undetermined_ -= sc_.malware_w[c];
                }
            }
        }
    }

    // Exact reverse of assign; the DFS unwinds assignments in LIFO order,
    // so each clause is in the state assign left it in.
    void unassign(std::size_t v, bool val) {
        for (const std::size_t c : benign_with_[v]) {
            if (val) {
                if (b_unassigned_[c] == 0 && b_false_[c] == 0) {
                    satisfied_ -= sc_.benign_w[c];
                    undetermined_ += sc_.benign_w[c];
                }
            } else {
                if (b_false_[c]-- == 1) {
                    undetermined_ += sc_.benign_w[c];
                }
            }
            ++b_unassigned_[c];
        }
        for (const std::size_t c : malware_with_[v]) {
            if (val) {
                if (m_unassigned_[c] == 0 && m_false_[c] == 0) {
                    undetermined_ += sc_.malware_w[c];
                }
            } else {
                if (m_false_[c]-- == 1) {
                    satisfied_ -= sc_.malware_w[c];
                    undetermined_ += sc_.malware_w[c];
                }
            }
            ++m_unassigned_[c];
        }
        value_[v] = -1;
        --assigned_;
        trues_ -= val ? 1 : 0;
    }

    // Whether the subtree under the current partial assignment can still
    // contain an assignment strictly better than the incumbent. Each
    // component is an upper bound over the subtree, so the lexicographic
    // comparison is sound.
    bool can_improve() const {
        const long long bound = satisfied_ + undetermined_;
        if (bound != inc_score_) {
            return bound > inc_score_;
        }
        const std::size_t max_true = trues_ + (n_ - assigned_);
        if (max_true != inc_true_) {
            return max_true > inc_true_;
        }
        // Lex-greatest completion: all unassigned variables true.
        for (std::size_t v = 0; v < n_; ++v) {
            const bool a = value_[v] != 0; // unassigned counts as true
            if (a != incumbent_[v]) {
                return a;
            }
        }
        return false;
    }

    void audit_bound() {
        std::vector<std::size_t> free_vars;
        for (std::size_t v = 0; v < n_; ++v) {
            if (value_[v] == -1) {
                free_vars.push_back(v);
            }
        }
        if (free_vars.size() > 20) {
            return;
        }
        Assignment a(n_);
        for (std::size_t v = 0; v < n_; ++v) {
            a[v] = value_[v] == 1;
        }
        long long best = std::numeric_limits<long long>::min();
        for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << free_vars.size());
             ++bits) {
            for (std::size_t i = 0; i < free_vars.size(); ++i) {
                a[free_vars[i]] = ((bits >> i) & 1u) != 0;
            }
            best = std::max(best, eval_scaled(inst_, sc_, a));
        }
        if (satisfied_ + undetermined_ < best) {
            throw std::logic_error("branch-and-bound bound below subtree optimum");
        }
    }

    void dfs() {
        if (cancelled_ ||
            (opts_.cancel && (stats_.nodes & 1023) == 0 &&
             opts_.cancel->load(std::memory_order_relaxed))) {
            cancelled_ = true;
            return;
        }
        ++stats_.nodes;
        if (opts_.debug_check_bounds) {
            audit_bound();
        }
        if (assigned_ == n_) {
            Assignment a(n_);
            for (std::size_t v = 0; v < n_; ++v) {
                a[v] = value_[v] == 1;
            }
            if (better_assignment(satisfied_, a, inc_score_, incumbent_)) {
                inc_score_ = satisfied_;
                inc_true_ = trues_;
                incumbent_ = std::move(a);
            }
            return;
        }
        if (!can_improve()) {
            ++stats_.prunings;
            return;
        }
        const std::size_t v = order_[assigned_];
        for (const bool val : {true, false}) {
            assign(v, val);
            dfs();
            unassign(v, val);
            if (cancelled_) {
                return;
            }
        }
    }

    const MaxSatInstance& inst_;
    const ScaledInstance sc_;
    const ExactOptions opts_;
    const std::size_t n_;
    std::vector<std::vector<std::size_t>> benign_with_, malware_with_;
    std::vector<std::size_t> order_;
    std::vector<int> b_unassigned_, b_false_, m_unassigned_, m_false_;
    std::vector<signed char> value_;
    std::size_t assigned_ = 0;
    std::size_t trues_ = 0;
    long long satisfied_ = 0;
    long long undetermined_ = 0;
    Assignment incumbent_;
    long long inc_score_ = 0;
    std::size_t inc_true_ = 0;
    SolveStats stats_;
    bool cancelled_ = false;
};

} // namespace detail

// Depth-first branch and bound over variables ordered by descending clause
// occurrence. The node bound is satisfied weight plus the weight of all
// still-undetermined clauses; a node is cut only when it cannot strictly
// beat the incumbent under the full tie-break, so the result matches
// solve_brute assignment-for-assignment.
inline SolveResult solve_exact(const MaxSatInstance& inst,
                               const ExactOptions& opts = {}) {
    return detail::BranchAndBound(inst, opts).run();
}

// Start from all-true and repeatedly deny the variable with the best
// marginal gain (malware weight newly blocked minus benign weight newly
// excluded) while one is positive, then run single-flip local search to a
// fixpoint. Ties go to the property-order-least variable. The all-false
// assignment is polished and kept as a fallback candidate so the result
// dominates both trivial assignments. Deterministic; the seed is accepted
// for interface parity and currently unused.
inline SolveResult solve_greedy(const MaxSatInstance& inst, std::uint64_t seed) {
    (void)seed;
    const detail::Timer timer;
    const auto sc = detail::scale_weights(inst);
    const std::size_t n = inst.vars.size();

    std::vector<std::vector<std::size_t>> benign_with(n), malware_with(n);
    for (std::size_t c = 0; c < inst.benign_clauses.size(); ++c) {
        for (const VarId v : inst.benign_clauses[c].vars) {
            benign_with[v].push_back(c);
        }
    }
    for (std::size_t c = 0; c < inst.malware_clauses.size(); ++c) {
        for (const VarId v : inst.malware_clauses[c].vars) {
            malware_with[v].push_back(c);
        }
    }

    // Per-clause count of denied variables; a benign clause is satisfied at
    // 0, a malware clause at >= 1.
    struct State {
        Assignment value;
        std::vector<int> b_false;
        std::vector<int> m_false;
        long long score = 0;
    };

    // Gain of denying v: malware clauses with no denied variable yet become
    // blocked; benign clauses with none become excluded.
    const auto deny_gain = [&](const State& s, std::size_t v) {
        long long g = 0;
        for (const std::size_t c : malware_with[v]) {
            if (s.m_false[c] == 0) {
                g += sc.malware_w[c];
            }
        }
        for (const std::size_t c : benign_with[v]) {
            if (s.b_false[c] == 0) {
                g -= sc.benign_w[c];
            }
        }
        return g;
    };
    // Gain of re-allowing v: benign clauses where v was the only denied
    // variable recover; malware clauses blocked only through v unblock.
    const auto allow_gain = [&](const State& s, std::size_t v) {
        long long g = 0;
        for (const std::size_t c : benign_with[v]) {
            if (s.b_false[c] == 1) {
                g += sc.benign_w[c];
            }
        }
        for (const std::size_t c : malware_with[v]) {
            if (s.m_false[c] == 1) {
                g -= sc.malware_w[c];
            }
        }
        return g;
    };
    const auto flip = [&](State& s, std::size_t v) {
        const int delta = s.value[v] ? 1 : -1;
        s.value[v] = !s.value[v];
        for (const std::size_t c : benign_with[v]) {
            s.b_false[c] += delta;
        }
        for (const std::size_t c : malware_with[v]) {
            s.m_false[c] += delta;
        }
    };

    SolveStats stats;
    const auto deny_descent = [&](State& s) {
        while (true) {
            long long best_gain = 0;
            std::size_t best_var = n;
            for (std::size_t v = 0; v < n; ++v) {
                if (!s.value[v]) {
                    continue;
                }
                const long long g = deny_gain(s, v);
                if (g > best_gain) {
                    best_gain = g;
                    best_var = v;
                }
            }
            if (best_var == n) {
                break;
            }
            flip(s, best_var);
            s.score += best_gain;
            ++stats.nodes;
        }
    };
    const auto local_search = [&](State& s) {
        while (true) {
            long long best_gain = 0;
            std::size_t best_var = n;
            for (std::size_t v = 0; v < n; ++v) {
                const long long g =
                    s.value[v] ? deny_gain(s, v) : allow_gain(s, v);
                if (g > best_gain) {
                    best_gain = g;
                    best_var = v;
                }
            }
            if (best_var == n) {
                break;
            }
            flip(s, best_var);
            s.score += best_gain;
            ++stats.nodes;
        }
    };

    State main_state;
    main_state.value.assign(n, true);
    main_state.b_false.assign(inst.benign_clauses.size(), 0);
    main_state.m_false.assign(inst.malware_clauses.size(), 0);
    main_state.score = sc.base;
    for (const long long w : sc.benign_w) {
        main_state.score += w;
    }
    deny_descent(main_state);
    local_search(main_state);

    State fallback;
    fallback.value.assign(n, false);
    fallback.b_false.reserve(inst.benign_clauses.size());
    for (const auto& c : inst.benign_clauses) {
        fallback.b_false.push_back(static_cast<int>(c.vars.size()));
    }
    fallback.m_false.reserve(inst.malware_clauses.size());
    for (const auto& c : inst.malware_clauses) {
        fallback.m_false.push_back(static_cast<int>(c.vars.size()));
    }
    fallback.score = sc.base;
    for (const long long w : sc.malware_w) {
        fallback.score += w;
    }
    local_search(fallback);

    State& best = detail::better_assignment(fallback.score, fallback.value,
                                            main_state.score, main_state.value)
                      ? fallback
                      : main_state;
    SolveResult res;
    res.assignment = std::move(best.value);
    res.score = Ratio(best.score, sc.denom);
    res.optimal = false;
    res.stats = stats;
    res.stats.seconds = timer.seconds();
    return res;
}

} // namespace droidgen

#endif // DROIDGEN_SOLVER_HPP
