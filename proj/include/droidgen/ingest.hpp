#ifndef DROIDGEN_INGEST_HPP
#define DROIDGEN_INGEST_HPP

#include <deque>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "droidgen/model.hpp"

namespace droidgen {

enum class ComponentKind : std::uint8_t {
    activity,
    service,
    receiver,
    other,
};

inline constexpr std::string_view component_kind_name(ComponentKind k) {
    switch (k) {
    case ComponentKind::activity: return "activity";
    case ComponentKind::service: return "service";
    case ComponentKind::receiver: return "receiver";
    case ComponentKind::other: return "other";
    }
    return "other";
}

// Unknown component tokens map to `other`; front-ends may emit classes
// outside the four component types.
inline ComponentKind parse_component_kind(std::string_view token) {
    if (token == "activity") {
        return ComponentKind::activity;
    }
    if (token == "service") {
        return ComponentKind::service;
    }
    if (token == "receiver") {
        return ComponentKind::receiver;
    }
    return ComponentKind::other;
}

// One call-graph node: a method with its component membership, registered
// callbacks/handlers, entry-point flag, call edges and directly invoked
// sensitive apis. All string lists are kept sorted and duplicate-free.
struct MethodNode {
    std::string method_id;
    ComponentKind component_kind = ComponentKind::other;
    std::vector<std::string> callbacks; // lifecycle names, e.g. "oncreate"
    std::vector<std::string> handlers;  // subset of {"onclick", "ontouch"}
    bool is_entry_point = false;
    std::vector<std::string> callees;   // method_ids within the same graph
    std::vector<std::string> direct_apis;
};

struct AppGraph {
    std::string app_id;
    Label label = Label::unknown;
    std::map<std::string, MethodNode> methods; // keyed by method_id

    const MethodNode* find_method(const std::string& id) const {
        auto it = methods.find(id);
        return it == methods.end() ? nullptr : &it->second;
    }
};

// api identifier -> set of permission names guarding it. Lookup of an
// unmapped api yields the empty set, never an error.
struct PermissionMap {
    std::map<std::string, std::vector<std::string>> entries;

    bool contains(const std::string& api) const {
        return entries.find(api) != entries.end();
    }

    const std::vector<std::string>& lookup(const std::string& api) const {
        static const std::vector<std::string> empty;
        auto it = entries.find(api);
        return it == entries.end() ? empty : it->second;
    }
};

// Least fixpoint of backward api propagation over the call graph:
// Reach(m) = direct_apis(m) union Reach(m') for every callee m'.
struct ReachSet {
    std::map<std::string, std::vector<std::string>> reachable;

    const std::vector<std::string>& of(const std::string& method_id) const {
        static const std::vector<std::string> empty;
        auto it = reachable.find(method_id);
        return it == reachable.end() ? empty : it->second;
    }
};

namespace detail {

inline void sort_unique(std::vector<std::string>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
}

inline std::string method_err(const std::string& method_id, const std::string& what) {
    return "method '" + method_id + "': " + what;
}

} // namespace detail

// Checks every AppGraph invariant: non-empty app_id, callee references
// resolve, entry-point closure (a node with callbacks or handlers must be an
// entry point), and identifier validity for api strings.
inline void validate_app_graph(const AppGraph& g) {
    if (g.app_id.empty()) {
        throw ParseError("app_id must be non-empty");
    }
    for (const auto& [id, m] : g.methods) {
        if (id.empty()) {
            throw ParseError("empty method id");
        }
        if (id != m.method_id) {
            throw ParseError(detail::method_err(id, "inconsistent method_id"));
        }
        for (const auto& cb : m.callbacks) {
            const auto ctx = parse_context(cb);
            if (!ctx || !is_lifecycle_context(*ctx)) {
                throw ParseError(detail::method_err(id, "unknown callback '" + cb + "'"));
            }
        }
        for (const auto& h : m.handlers) {
            if (h != "onclick" && h != "ontouch") {
                throw ParseError(detail::method_err(id, "unknown handler '" + h + "'"));
            }
        }
        if (!m.is_entry_point && (!m.callbacks.empty() || !m.handlers.empty())) {
            throw ParseError(detail::method_err(
                id, "callbacks/handlers set but entry_point is false"));
        }
        for (const auto& callee : m.callees) {
            if (g.methods.find(callee) == g.methods.end()) {
                throw ParseError(detail::method_err(id, "dangling callee '" + callee + "'"));
            }
        }
        for (const auto& api : m.direct_apis) {
            if (!is_valid_identifier(api)) {
                throw ParseError(detail::method_err(id, "invalid api identifier '" + api + "'"));
            }
        }
    }
}

// --- JSON app-graph format ---------------------------------------------
//
// {"app_id": str, "label": "benign"|"malware"|"unknown",
//  "methods": [{"id": str, "component": str, "callbacks": [str],
//               "handlers": [str], "entry_point": bool,
//               "calls": [str], "apis": [str]}]}
//
// Corpora are streamed as one such object per line (.jsonl).

namespace detail {

inline std::vector<std::string> string_array(const nlohmann::json& j,
                                             const char* key,
                                             const std::string& who) {
    std::vector<std::string> out;
    auto it = j.find(key);
    if (it == j.end()) {
        return out;
    }
    if (!it->is_array()) {
        throw ParseError(who + ": field '" + key + "' must be an array");
    }
    for (const auto& e : *it) {
        if (!e.is_string()) {
            throw ParseError(who + ": field '" + key + "' must contain strings");
        }
        out.push_back(e.get<std::string>());
    }
    sort_unique(out);
    return out;
}

} // namespace detail

inline AppGraph parse_app_graph_json(const nlohmann::json& j) {
    if (!j.is_object()) {
        throw ParseError("app graph must be a JSON object");
    }
    AppGraph g;
    if (!j.contains("app_id") || !j["app_id"].is_string()) {
        throw ParseError("missing or non-string 'app_id'");
    }
    g.app_id = j["app_id"].get<std::string>();
    if (g.app_id.empty()) {
        throw ParseError("app_id must be non-empty");
    }
    if (j.contains("label")) {
        if (!j["label"].is_string()) {
            throw ParseError(g.app_id + ": 'label' must be a string");
        }
        const auto l = parse_label(j["label"].get<std::string>());
        if (!l) {
            throw ParseError(g.app_id + ": unknown label '" +
                             j["label"].get<std::string>() + "'");
        }
        g.label = *l;
    }
    if (j.contains("methods")) {
        if (!j["methods"].is_array()) {
            throw ParseError(g.app_id + ": 'methods' must be an array");
        }
        for (const auto& mj : j["methods"]) {
            if (!mj.is_object() || !mj.contains("id") || !mj["id"].is_string()) {
                throw ParseError(g.app_id + ": method entry missing string 'id'");
            }
            MethodNode m;
            m.method_id = mj["id"].get<std::string>();
            if (m.method_id.empty()) {
                throw ParseError(g.app_id + ": empty method id");
            }
            const std::string who = "method '" + m.method_id + "'";
            if (mj.contains("component")) {
                if (!mj["component"].is_string()) {
                    throw ParseError(who + ": 'component' must be a string");
                }
                m.component_kind =
                    parse_component_kind(mj["component"].get<std::string>());
            }
            m.callbacks = detail::string_array(mj, "callbacks", who);
            m.handlers = detail::string_array(mj, "handlers", who);
            if (mj.contains("entry_point")) {
                if (!mj["entry_point"].is_boolean()) {
                    throw ParseError(who + ": 'entry_point' must be a boolean");
                }
                m.is_entry_point = mj["entry_point"].get<bool>();
            }
            m.callees = detail::string_array(mj, "calls", who);
            m.direct_apis = detail::string_array(mj, "apis", who);
            if (!g.methods.emplace(m.method_id, std::move(m)).second) {
                throw ParseError(detail::method_err(mj["id"].get<std::string>(),
                                                    "duplicate method_id"));
            }
        }
    }
    validate_app_graph(g);
    return g;
}

inline AppGraph load_app_graph(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed JSON: ") + e.what());
    }
    return parse_app_graph_json(j);
}

inline nlohmann::json app_graph_to_json(const AppGraph& g) {
    nlohmann::json methods = nlohmann::json::array();
    for (const auto& [id, m] : g.methods) {
        methods.push_back({{"id", id},
                           {"component", component_kind_name(m.component_kind)},
                           {"callbacks", m.callbacks},
                           {"handlers", m.handlers},
                           {"entry_point", m.is_entry_point},
                           {"calls", m.callees},
                           {"apis", m.direct_apis}});
    }
    return {{"app_id", g.app_id},
            {"label", std::string(label_name(g.label))},
            {"methods", std::move(methods)}};
}

// One graph object per line; blank lines are skipped.
inline std::vector<AppGraph> read_app_graphs_jsonl(std::string_view text) {
    std::vector<AppGraph> graphs;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t nl = text.find('\n', pos);
        std::string_view line = text.substr(
            pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        if (!line.empty()) {
            try {
                graphs.push_back(load_app_graph(line));
            } catch (const ParseError& e) {
                throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
            }
        }
        if (nl == std::string_view::npos) {
            break;
        }
        pos = nl + 1;
    }
    return graphs;
}

// --- Permission map (TSV) ------------------------------------------------
//
// One `api_id<TAB>PERMISSION_NAME` pair per line; extra tab-separated
// permission fields extend the same api; '#' lines are comments. Duplicate
// api lines merge by union.
inline PermissionMap load_permission_map(std::string_view text) {
    PermissionMap pm;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t nl = text.find('\n', pos);
        std::string_view line = text.substr(
            pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        if (!line.empty() && line[0] != '#') {
            std::vector<std::string_view> fields;
            std::size_t start = 0;
            while (true) {
                const std::size_t tab = line.find('\t', start);
                fields.push_back(line.substr(
                    start, tab == std::string_view::npos ? line.size() - start
                                                         : tab - start));
                if (tab == std::string_view::npos) {
                    break;
                }
                start = tab + 1;
            }
            if (fields.size() < 2) {
                throw ParseError("line " + std::to_string(line_no) +
                                 ": expected api<TAB>permission");
            }
            for (const auto& f : fields) {
                if (!is_valid_identifier(f)) {
                    throw ParseError("line " + std::to_string(line_no) +
                                     ": invalid identifier '" + std::string(f) + "'");
                }
            }
            auto& perms = pm.entries[std::string(fields[0])];
            for (std::size_t i = 1; i < fields.size(); ++i) {
                perms.emplace_back(fields[i]);
            }
        }
        if (nl == std::string_view::npos) {
            break;
        }
        pos = nl + 1;
    }
    for (auto& [api, perms] : pm.entries) {
        detail::sort_unique(perms);
    }
    return pm;
}

// --- Reachability ---------------------------------------------------------

// Worklist over reverse call edges with set-union transfer. The transfer is
// monotone, so the result is the unique least fixpoint regardless of the
// processing order, and the loop terminates on cyclic graphs.
inline ReachSet compute_reach(const AppGraph& g) {
    const std::size_t n = g.methods.size();
    std::vector<const MethodNode*> nodes;
    nodes.reserve(n);
    std::map<std::string_view, std::size_t> index;
    for (const auto& [id, m] : g.methods) {
        index.emplace(id, nodes.size());
        nodes.push_back(&m);
    }

    std::vector<std::vector<std::size_t>> callees(n);
    std::vector<std::vector<std::size_t>> callers(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (const auto& callee : nodes[i]->callees) {
            const std::size_t j = index.at(callee);
            callees[i].push_back(j);
            callers[j].push_back(i);
        }
    }

    std::vector<std::set<std::string>> reach(n);
    for (std::size_t i = 0; i < n; ++i) {
        reach[i].insert(nodes[i]->direct_apis.begin(), nodes[i]->direct_apis.end());
    }

    std::deque<std::size_t> worklist;
    std::vector<bool> queued(n, true);
    for (std::size_t i = 0; i < n; ++i) {
        worklist.push_back(i);
    }
    while (!worklist.empty()) {
        const std::size_t i = worklist.front();
        worklist.pop_front();
        queued[i] = false;
        bool grew = false;
        for (const std::size_t j : callees[i]) {
            for (const auto& api : reach[j]) {
                grew |= reach[i].insert(api).second;
            }
        }
        if (grew) {
            for (const std::size_t c : callers[i]) {
                if (!queued[c]) {
                    queued[c] = true;
                    worklist.push_back(c);
                }
            }
        }
    }

    ReachSet rs;
    for (std::size_t i = 0; i < n; ++i) {
        rs.reachable.emplace(nodes[i]->method_id,
                             std::vector<std::string>(reach[i].begin(), reach[i].end()));
    }
    return rs;
}

// --- Context matching ------------------------------------------------------

// The contexts a method matches: its component kind (when it is one of the
// three tracked components), each registered lifecycle callback, the click
// and touch handler contexts, and entry_point iff the method is one.
inline std::vector<Context> match_contexts(const MethodNode& m) {
    std::set<Context> out;
    switch (m.component_kind) {
    case ComponentKind::activity: out.insert(Context::activity); break;
    case ComponentKind::service: out.insert(Context::service); break;
    case ComponentKind::receiver: out.insert(Context::receiver); break;
    case ComponentKind::other: break;
    }
    for (const auto& cb : m.callbacks) {
        if (const auto ctx = parse_context(cb)) {
            out.insert(*ctx);
        }
    }
    for (const auto& h : m.handlers) {
        if (h == "onclick") {
            out.insert(Context::onclick_handler);
        } else if (h == "ontouch") {
            out.insert(Context::ontouch_handler);
        }
    }
    if (m.is_entry_point) {
        out.insert(Context::entry_point);
    }
    return std::vector<Context>(out.begin(), out.end());
}

// --- Specification derivation ----------------------------------------------

// (c, r) is in the spec iff some method matching c transitively reaches r.
// In api mode only apis present in the permission map are tracked; in
// permission mode each reachable api contributes its mapped permissions.
// Unmapped apis are silently excluded in both modes.
inline AppSpec derive_spec(const AppGraph& g, const PermissionMap& pm,
                           ResourceKind mode) {
    const ReachSet rs = compute_reach(g);
    std::set<Property> props;
    for (const auto& [id, m] : g.methods) {
        const auto contexts = match_contexts(m);
        if (contexts.empty()) {
            continue;
        }
        std::set<std::string> resources;
        for (const auto& api : rs.of(id)) {
            if (mode == ResourceKind::api) {
                if (pm.contains(api)) {
                    resources.insert(api);
                }
            } else {
                for (const auto& perm : pm.lookup(api)) {
                    resources.insert(perm);
                }
            }
        }
        for (const Context c : contexts) {
            for (const auto& r : resources) {
                props.insert(Property{c, Resource{mode, r}});
            }
        }
    }
    return make_app_spec(g.app_id, g.label, mode,
                         std::vector<Property>(props.begin(), props.end()));
}

// Distinct directly-invoked apis with no permission-map entry.
inline std::set<std::string> unmapped_apis(const AppGraph& g,
                                           const PermissionMap& pm) {
    std::set<std::string> unmapped;
    for (const auto& [id, m] : g.methods) {
        for (const auto& api : m.direct_apis) {
            if (!pm.contains(api)) {
                unmapped.insert(api);
            }
        }
    }
    return unmapped;
}

inline std::size_t count_unmapped_apis(const AppGraph& g, const PermissionMap& pm) {
    return unmapped_apis(g, pm).size();
}

// --- Spec JSONL format -------------------------------------------------------
//
// {"app_id": str, "label": str, "resource_kind": "permission"|"api",
//  "properties": [[context, identifier], ...]}   (sorted by property order)

inline nlohmann::json spec_to_json(const AppSpec& s) {
    nlohmann::json props = nlohmann::json::array();
    for (const auto& p : s.properties) {
        props.push_back({std::string(context_name(p.context)), p.resource.identifier});
    }
    return {{"app_id", s.app_id},
            {"label", std::string(label_name(s.label))},
            {"resource_kind", std::string(resource_kind_name(s.resource_kind))},
            {"properties", std::move(props)}};
}

inline AppSpec parse_spec_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("app_id") || !j["app_id"].is_string()) {
        throw ParseError("spec entry missing string 'app_id'");
    }
    const std::string app_id = j["app_id"].get<std::string>();
    if (!j.contains("label") || !j["label"].is_string()) {
        throw ParseError(app_id + ": missing string 'label'");
    }
    const auto label = parse_label(j["label"].get<std::string>());
    if (!label) {
        throw ParseError(app_id + ": unknown label '" + j["label"].get<std::string>() + "'");
    }
    if (!j.contains("resource_kind") || !j["resource_kind"].is_string()) {
        throw ParseError(app_id + ": missing string 'resource_kind'");
    }
    const auto kind = parse_resource_kind(j["resource_kind"].get<std::string>());
    if (!kind) {
        throw ParseError(app_id + ": unknown resource_kind '" +
                         j["resource_kind"].get<std::string>() + "'");
    }
    std::vector<Property> props;
    if (j.contains("properties")) {
        if (!j["properties"].is_array()) {
            throw ParseError(app_id + ": 'properties' must be an array");
        }
        for (const auto& pj : j["properties"]) {
            if (!pj.is_array() || pj.size() != 2 || !pj[0].is_string() ||
                !pj[1].is_string()) {
                throw ParseError(app_id + ": property entries must be [context, identifier]");
            }
            const auto ctx = parse_context(pj[0].get<std::string>());
            if (!ctx) {
                throw ParseError(app_id + ": unknown context '" +
                                 pj[0].get<std::string>() + "'");
            }
            props.push_back(Property{*ctx, Resource{*kind, pj[1].get<std::string>()}});
        }
    }
    try {
        return make_app_spec(app_id, *label, *kind, std::move(props));
    } catch (const std::invalid_argument& e) {
        throw ParseError(e.what());
    }
}

inline std::string write_specs_jsonl(const std::vector<AppSpec>& specs) {
    std::string out;
    for (const auto& s : specs) {
        out += spec_to_json(s).dump();
        out += '\n';
    }
    return out;
}

inline std::vector<AppSpec> read_specs_jsonl(std::string_view text) {
    std::vector<AppSpec> specs;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t nl = text.find('\n', pos);
        std::string_view line = text.substr(
            pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        if (!line.empty()) {
            try {
                nlohmann::json j = nlohmann::json::parse(line);
                specs.push_back(parse_spec_json(j));
            } catch (const nlohmann::json::exception& e) {
                throw ParseError("line " + std::to_string(line_no) +
                                 ": malformed JSON: " + e.what());
            } catch (const ParseError& e) {
                throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
            }
        }
        if (nl == std::string_view::npos) {
            break;
        }
        pos = nl + 1;
    }
    return specs;
}

} // namespace droidgen

#endif // DROIDGEN_INGEST_HPP
