#ifndef DROIDGEN_TESTS_SUPPORT_HPP
#define DROIDGEN_TESTS_SUPPORT_HPP

// Shared fixtures, random generators and independent oracles. Everything
// here re-derives expected values from first principles and stays off the
// implementation paths it is used to check.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include "droidgen/droidgen.hpp"

namespace testutil {

using namespace droidgen;

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open " + path);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write " + path);
    }
    out << content;
}

struct CommandResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

// Runs a shell command capturing stdout/stderr; used for CLI-level tests.
inline CommandResult run_command(const std::string& cmd,
                                 const std::filesystem::path& scratch) {
    const auto out_path = (scratch / "stdout.txt").string();
    const auto err_path = (scratch / "stderr.txt").string();
    const std::string full = cmd + " >" + out_path + " 2>" + err_path;
    const int status = std::system(full.c_str());
    CommandResult r;
    if (WIFEXITED(status)) {
        r.exit_code = WEXITSTATUS(status);
    }
    r.out = read_file(out_path);
    r.err = read_file(err_path);
    return r;
}

// Fresh scratch directory under the system temp root.
inline std::filesystem::path make_scratch_dir(const std::string& tag) {
    static int counter = 0;
    const auto dir = std::filesystem::temp_directory_path() /
                     ("droidgen_" + tag + "_" + std::to_string(::getpid()) + "_" +
                      std::to_string(counter++));
    std::filesystem::create_directories(dir);
    return dir;
}

inline Property perm_prop(Context c, std::string id) {
    return Property{c, Resource{ResourceKind::permission, std::move(id)}};
}

inline Property api_prop(Context c, std::string id) {
    return Property{c, Resource{ResourceKind::api, std::move(id)}};
}

// The six-app worked corpus: three benign, three malware specs over five
// properties p_a..p_e with identifiers chosen so variable order follows the
// a..e naming.
struct SixApps {
    Property pa, pb, pc, pd, pe;
    std::vector<AppSpec> benign;
    std::vector<AppSpec> malware;
};

inline SixApps six_apps() {
    SixApps s;
    s.pa = perm_prop(Context::activity, "ACCESS_FINE_LOCATION");
    s.pb = perm_prop(Context::activity, "BLUETOOTH");
    s.pc = perm_prop(Context::activity, "CAMERA");
    s.pd = perm_prop(Context::activity, "DELETE_PACKAGES");
    s.pe = perm_prop(Context::activity, "EXPAND_STATUS_BAR");
    const auto spec = [](std::string id, Label l, std::vector<Property> props) {
        return make_app_spec(std::move(id), l, ResourceKind::permission,
                             std::move(props));
    };
    s.benign = {spec("benign_1", Label::benign, {s.pa}),
                spec("benign_2", Label::benign, {s.pc}),
                spec("benign_3", Label::benign, {s.pb, s.pe})};
    s.malware = {spec("malware_1", Label::malware, {s.pa, s.pb}),
                 spec("malware_2", Label::malware, {s.pa, s.pc}),
                 spec("malware_3", Label::malware, {s.pd})};
    return s;
}

// --- objective oracle -------------------------------------------------------

// The benign-minus-malware sum of conjunction indicators, evaluated
// directly on the specs. score(inst, a) must equal this plus w_m times the
// number of malware apps.
inline Ratio objective_oracle(const std::vector<AppSpec>& benign,
                              const std::vector<AppSpec>& malware,
                              const Ratio& w_b, const Ratio& w_m,
                              const std::function<bool(const Property&)>& allowed) {
    const auto conj = [&](const AppSpec& s) {
        for (const auto& p : s.properties) {
            if (!allowed(p)) {
                return false;
            }
        }
        return true;
    };
    Ratio total{0};
    for (const auto& s : benign) {
        if (conj(s)) {
            total += w_b;
        }
    }
    for (const auto& s : malware) {
        if (conj(s)) {
            total -= w_m;
        }
    }
    return total;
}

inline std::function<bool(const Property&)>
allowed_by(const MaxSatInstance& inst, const Assignment& a) {
    return [&inst, &a](const Property& p) {
        const auto it = std::lower_bound(inst.vars.begin(), inst.vars.end(), p);
        if (it == inst.vars.end() || *it != p) {
            return true; // properties outside the instance are unconstrained
        }
        return static_cast<bool>(a[static_cast<std::size_t>(it - inst.vars.begin())]);
    };
}

// --- random corpora ----------------------------------------------------------

struct RandomCorpus {
    std::vector<AppSpec> benign;
    std::vector<AppSpec> malware;
    Ratio w_b{1};
    Ratio w_m{1};
};

// Specs over a shared property pool; empty specs occur so the vacuous
// benign / unsatisfiable malware paths get exercised too.
inline RandomCorpus random_corpus(std::mt19937_64& rng, std::size_t max_vars = 12,
                                  std::size_t max_apps = 30) {
    RandomCorpus c;
    const std::size_t n_vars = 1 + uniform_below(rng, max_vars);
    std::vector<Property> pool;
    for (std::size_t i = 0; i < n_vars; ++i) {
        pool.push_back(perm_prop(kAllContexts[uniform_below(rng, kContextCount)],
                                 "P_" + std::to_string(i)));
    }
    std::sort(pool.begin(), pool.end());
    pool.erase(std::unique(pool.begin(), pool.end()), pool.end());

    c.w_b = Ratio(1 + static_cast<long long>(uniform_below(rng, 3)));
    c.w_m = Ratio(1 + static_cast<long long>(uniform_below(rng, 3)));
    const std::size_t n_apps = 2 + uniform_below(rng, max_apps - 1);
    for (std::size_t i = 0; i < n_apps; ++i) {
        const bool malware = uniform_below(rng, 2) == 1;
        std::vector<Property> props;
        for (const auto& p : pool) {
            if (uniform_double(rng) < 0.3) {
                props.push_back(p);
            }
        }
        const Label label = malware ? Label::malware : Label::benign;
        const std::string id =
            (malware ? "m" : "b") + std::to_string(i);
        auto spec = make_app_spec(id, label, ResourceKind::permission, props);
        (malware ? c.malware : c.benign).push_back(std::move(spec));
    }
    return c;
}

// --- reachability oracle -------------------------------------------------------

// Per-method depth-first union of direct apis over all transitively
// reachable methods; independent of the worklist fixpoint.
inline std::map<std::string, std::set<std::string>> reach_oracle(const AppGraph& g) {
    std::map<std::string, std::set<std::string>> out;
    for (const auto& [id, m] : g.methods) {
        std::set<std::string> apis;
        std::set<std::string> seen;
        std::vector<const MethodNode*> stack{&m};
        seen.insert(id);
        while (!stack.empty()) {
            const MethodNode* cur = stack.back();
            stack.pop_back();
            apis.insert(cur->direct_apis.begin(), cur->direct_apis.end());
            for (const auto& callee : cur->callees) {
                if (seen.insert(callee).second) {
                    stack.push_back(g.find_method(callee));
                }
            }
        }
        out.emplace(id, std::move(apis));
    }
    return out;
}

// --- random graphs -------------------------------------------------------------

// Arbitrary digraphs (cycles and self-loops allowed) with random component
// kinds, callbacks, handlers and api invocations; the entry-point closure
// is respected by construction.
inline AppGraph random_graph(std::mt19937_64& rng, std::size_t max_nodes = 12,
                             std::size_t api_pool = 6) {
    AppGraph g;
    g.app_id = "app";
    g.label = Label::unknown;
    const std::size_t n = 1 + uniform_below(rng, max_nodes);
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) {
        ids.push_back("m" + std::to_string(i));
    }
    constexpr std::array<ComponentKind, 4> kKinds = {
        ComponentKind::activity, ComponentKind::service, ComponentKind::receiver,
        ComponentKind::other};
    for (std::size_t i = 0; i < n; ++i) {
        MethodNode m;
        m.method_id = ids[i];
        m.component_kind = kKinds[uniform_below(rng, 4)];
        if (uniform_double(rng) < 0.3) {
            m.callbacks.push_back(std::string(
                context_name(kAllContexts[6 + uniform_below(rng, 7)])));
        }
        if (uniform_double(rng) < 0.2) {
            m.handlers.push_back(uniform_below(rng, 2) ? "ontouch" : "onclick");
        }
        m.is_entry_point = !m.callbacks.empty() || !m.handlers.empty() ||
                           uniform_double(rng) < 0.3;
        for (std::size_t j = 0; j < n; ++j) {
            if (uniform_double(rng) < 0.25) {
                m.callees.push_back(ids[j]);
            }
        }
        for (std::size_t a = 0; a < api_pool; ++a) {
            if (uniform_double(rng) < 0.25) {
                m.direct_apis.push_back("api_" + std::to_string(a));
            }
        }
        std::sort(m.callees.begin(), m.callees.end());
        std::sort(m.direct_apis.begin(), m.direct_apis.end());
        g.methods.emplace(m.method_id, std::move(m));
    }
    return g;
}

// Maps a random subset of the api pool, leaving some apis unmapped.
inline PermissionMap random_permission_map(std::mt19937_64& rng,
                                           std::size_t api_pool = 6,
                                           std::size_t perm_pool = 4) {
    PermissionMap pm;
    for (std::size_t a = 0; a < api_pool; ++a) {
        if (uniform_double(rng) < 0.7) {
            std::vector<std::string> perms;
            for (std::size_t p = 0; p < perm_pool; ++p) {
                if (uniform_double(rng) < 0.4) {
                    perms.push_back("PERM_" + std::to_string(p));
                }
            }
            if (perms.empty()) {
                perms.push_back("PERM_0");
            }
            pm.entries.emplace("api_" + std::to_string(a), std::move(perms));
        }
    }
    return pm;
}

// --- WCNF brute force ------------------------------------------------------------

struct WcnfClause {
    long long weight = 0;
    std::vector<long long> lits;
};

struct WcnfFormula {
    long long n_vars = 0;
    long long n_clauses = 0;
    long long top = 1;
    std::vector<WcnfClause> clauses;
};

inline WcnfFormula parse_wcnf(const std::string& text) {
    WcnfFormula f;
    std::istringstream in(text);
    std::string line;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == 'c') {
            continue;
        }
        std::istringstream ls(line);
        if (line[0] == 'p') {
            std::string p, fmt;
            ls >> p >> fmt >> f.n_vars >> f.n_clauses >> f.top;
            if (fmt != "wcnf") {
                throw std::runtime_error("not a wcnf header");
            }
            header_seen = true;
            continue;
        }
        WcnfClause c;
        ls >> c.weight;
        long long lit = 0;
        while (ls >> lit && lit != 0) {
            c.lits.push_back(lit);
        }
        f.clauses.push_back(std::move(c));
    }
    if (!header_seen) {
        throw std::runtime_error("missing wcnf header");
    }
    if (static_cast<long long>(f.clauses.size()) != f.n_clauses) {
        throw std::runtime_error("clause count mismatch in wcnf");
    }
    return f;
}

// Minimum total weight of falsified soft clauses over all assignments that
// satisfy every hard clause (weight == top).
inline long long wcnf_min_cost(const WcnfFormula& f) {
    if (f.n_vars > 22) {
        throw std::runtime_error("wcnf brute force limited to 22 variables");
    }
    long long best = -1;
    for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << f.n_vars); ++bits) {
        const auto sat = [&](const WcnfClause& c) {
            for (const long long lit : c.lits) {
                const auto v = static_cast<std::size_t>(std::llabs(lit) - 1);
                const bool val = ((bits >> v) & 1u) != 0;
                if ((lit > 0) == val) {
                    return true;
                }
            }
            return false;
        };
        long long cost = 0;
        bool valid = true;
        for (const auto& c : f.clauses) {
            if (sat(c)) {
                continue;
            }
            if (c.weight >= f.top) {
                valid = false;
                break;
            }
            cost += c.weight;
        }
        if (valid && (best < 0 || cost < best)) {
            best = cost;
        }
    }
    return best;
}

// --- witness oracles --------------------------------------------------------------

inline bool method_realizes(const AppGraph&, const PermissionMap& pm,
                            const MethodNode& m, const Property& rule) {
    for (const auto& api : m.direct_apis) {
        if (rule.resource.kind == ResourceKind::api) {
            if (api == rule.resource.identifier) {
                return true;
            }
        } else {
            const auto& perms = pm.lookup(api);
            if (std::find(perms.begin(), perms.end(), rule.resource.identifier) !=
                perms.end()) {
                return true;
            }
        }
    }
    return false;
}

// Checks every Violation invariant against the graph directly.
inline bool witness_valid(const AppGraph& g, const PermissionMap& pm,
                          const Property& rule,
                          const std::vector<std::string>& chain) {
    if (chain.empty()) {
        return false;
    }
    const MethodNode* first = g.find_method(chain.front());
    if (first == nullptr) {
        return false;
    }
    const auto contexts = match_contexts(*first);
    if (std::find(contexts.begin(), contexts.end(), rule.context) == contexts.end()) {
        return false;
    }
    for (std::size_t i = 0; i + 1 < chain.size(); ++i) {
        const MethodNode* m = g.find_method(chain[i]);
        if (m == nullptr || std::find(m->callees.begin(), m->callees.end(),
                                      chain[i + 1]) == m->callees.end()) {
            return false;
        }
    }
    const MethodNode* last = g.find_method(chain.back());
    return last != nullptr && method_realizes(g, pm, *last, rule);
}

// Shortest witness length by all-pairs distances (Floyd-Warshall), a
// different algorithm family than the checker's BFS.
inline std::optional<std::size_t>
shortest_witness_len_oracle(const AppGraph& g, const PermissionMap& pm,
                            const Property& rule) {
    std::vector<const MethodNode*> nodes;
    std::map<std::string, std::size_t> index;
    for (const auto& [id, m] : g.methods) {
        index.emplace(id, nodes.size());
        nodes.push_back(&m);
    }
    const std::size_t n = nodes.size();
    constexpr std::size_t kInf = static_cast<std::size_t>(-1) / 2;
    std::vector<std::vector<std::size_t>> dist(n, std::vector<std::size_t>(n, kInf));
    for (std::size_t i = 0; i < n; ++i) {
        for (const auto& callee : nodes[i]->callees) {
            dist[i][index.at(callee)] = 1;
        }
        dist[i][i] = 0; // after edges, so a self-loop cannot shadow it
    }
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                dist[i][j] = std::min(dist[i][j], dist[i][k] + dist[k][j]);
            }
        }
    }
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < n; ++i) {
        const auto contexts = match_contexts(*nodes[i]);
        if (std::find(contexts.begin(), contexts.end(), rule.context) ==
            contexts.end()) {
            continue;
        }
        for (std::size_t j = 0; j < n; ++j) {
            if (dist[i][j] < kInf && method_realizes(g, pm, *nodes[j], rule)) {
                const std::size_t len = dist[i][j] + 1;
                if (!best || len < *best) {
                    best = len;
                }
            }
        }
    }
    return best;
}

// --- random policies ---------------------------------------------------------------

inline std::string random_identifier(std::mt19937_64& rng) {
    // printable, no whitespace, no ':'
    static constexpr std::string_view kChars =
        "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789"
        "_./;-+=<>()[]{}!@#$%^&*?~|\\\"'";
    const std::size_t len = 1 + uniform_below(rng, 24);
    std::string id;
    for (std::size_t i = 0; i < len; ++i) {
        id += kChars[uniform_below(rng, kChars.size())];
    }
    return id;
}

inline Policy random_policy(std::mt19937_64& rng) {
    const ResourceKind kind =
        uniform_below(rng, 2) ? ResourceKind::api : ResourceKind::permission;
    std::vector<Property> rules;
    const std::size_t n = uniform_below(rng, 12);
    for (std::size_t i = 0; i < n; ++i) {
        rules.push_back(Property{kAllContexts[uniform_below(rng, kContextCount)],
                                 Resource{kind, random_identifier(rng)}});
    }
    std::map<std::string, std::string> metadata;
    if (uniform_below(rng, 2)) {
        metadata["name"] = "policy_" + std::to_string(uniform_below(rng, 1000));
        metadata["solver"] = uniform_below(rng, 2) ? "exact" : "greedy";
    }
    return make_policy(kind, std::move(rules), std::move(metadata));
}

} // namespace testutil

#endif // DROIDGEN_TESTS_SUPPORT_HPP
