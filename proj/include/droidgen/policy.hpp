#ifndef DROIDGEN_POLICY_HPP
#define DROIDGEN_POLICY_HPP

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "droidgen/encode.hpp"
#include "droidgen/ingest.hpp"
#include "droidgen/model.hpp"

namespace droidgen {

// An ordered set of deny-rules: each rule Property p means "deny p". An app
// violates the policy iff its spec contains any denied property.
struct Policy {
    ResourceKind resource_kind = ResourceKind::permission;
    std::vector<Property> rules; // sorted, duplicate-free, homogeneous kind
    // Creation parameters (name, solver, weights, corpus sizes, ...),
    // serialized as header comments.
    std::map<std::string, std::string> metadata;

    bool operator==(const Policy&) const = default;
};

inline Policy make_policy(ResourceKind kind, std::vector<Property> rules,
                          std::map<std::string, std::string> metadata = {}) {
    for (const auto& r : rules) {
        if (r.resource.kind != kind) {
            throw std::invalid_argument("policy mixes resource kinds");
        }
        if (!is_valid_identifier(r.resource.identifier)) {
            throw std::invalid_argument("invalid rule identifier '" +
                                        r.resource.identifier + "'");
        }
    }
    std::sort(rules.begin(), rules.end());
    rules.erase(std::unique(rules.begin(), rules.end()), rules.end());
    return Policy{kind, std::move(rules), std::move(metadata)};
}

// A violated rule together with an optional call chain demonstrating it:
// the first method matches the rule's context, the last directly invokes an
// api realizing the rule's resource, and consecutive methods are
// caller->callee edges.
struct Violation {
    Property rule;
    std::optional<std::vector<std::string>> witness;

    bool operator==(const Violation&) const = default;
};

// Denied properties are exactly the variables assigned false.
inline Policy policy_from_solution(const MaxSatInstance& inst, const Assignment& a) {
    if (a.size() != inst.vars.size()) {
        throw std::invalid_argument("assignment length does not match instance");
    }
    std::vector<Property> rules;
    for (std::size_t v = 0; v < inst.vars.size(); ++v) {
        if (!a[v]) {
            rules.push_back(inst.vars[v]);
        }
    }
    return make_policy(inst.resource_kind, std::move(rules));
}

// rules(p) intersected with properties(s), sorted. The app is rejected iff
// the result is non-empty.
inline std::vector<Property> check(const Policy& p, const AppSpec& s) {
    if (p.resource_kind != s.resource_kind) {
        throw std::invalid_argument("policy is " +
                                    std::string(resource_kind_name(p.resource_kind)) +
                                    "-based but spec '" + s.app_id + "' is " +
                                    std::string(resource_kind_name(s.resource_kind)) +
                                    "-based");
    }
    std::vector<Property> violated;
    std::set_intersection(p.rules.begin(), p.rules.end(), s.properties.begin(),
                          s.properties.end(), std::back_inserter(violated));
    return violated;
}

// Shortest call chain from any method matching the rule's context to any
// method directly invoking an api that realizes the rule's resource.
// Breadth-first over call edges; every layer is visited in method_id order,
// so tie-breaking is deterministic. Length-1 witnesses are allowed.
inline std::optional<std::vector<std::string>>
find_witness(const AppGraph& g, const PermissionMap& pm, const Property& rule) {
    const auto realizes = [&](const MethodNode& m) {
        if (rule.resource.kind == ResourceKind::api) {
            return std::binary_search(m.direct_apis.begin(), m.direct_apis.end(),
                                      rule.resource.identifier);
        }
        for (const auto& api : m.direct_apis) {
            const auto& perms = pm.lookup(api);
            if (std::binary_search(perms.begin(), perms.end(),
                                   rule.resource.identifier)) {
                return true;
            }
        }
        return false;
    };

    std::vector<const MethodNode*> layer;
    for (const auto& [id, m] : g.methods) { // map order = method_id order
        const auto contexts = match_contexts(m);
        if (std::binary_search(contexts.begin(), contexts.end(), rule.context)) {
            layer.push_back(&m);
        }
    }

    std::set<std::string> visited;
    std::map<std::string, std::string> parent;
    for (const auto* m : layer) {
        visited.insert(m->method_id);
    }

    const auto chain_to = [&](const MethodNode& target) {
        std::vector<std::string> chain{target.method_id};
        auto it = parent.find(target.method_id);
        while (it != parent.end()) {
            chain.push_back(it->second);
            it = parent.find(it->second);
        }
        std::reverse(chain.begin(), chain.end());
        return chain;
    };

    while (!layer.empty()) {
        for (const auto* m : layer) {
            if (realizes(*m)) {
                return chain_to(*m);
            }
        }
        std::vector<const MethodNode*> next;
        for (const auto* m : layer) {
            for (const auto& callee : m->callees) {
                if (visited.insert(callee).second) {
                    parent.emplace(callee, m->method_id);
                    next.push_back(g.find_method(callee));
                }
            }
        }
        std::sort(next.begin(), next.end(),
                  [](const MethodNode* a, const MethodNode* b) {
                      return a->method_id < b->method_id;
                  });
        layer = std::move(next);
    }
    return std::nullopt;
}

// Re-derives the app's spec, checks it, and produces one witnessed
// Violation per violated rule. A violated rule always has a witness; a
// missing one signals an internal spec/graph mismatch.
inline std::vector<Violation> explain(const Policy& p, const AppGraph& g,
                                      const PermissionMap& pm) {
    const AppSpec spec = derive_spec(g, pm, p.resource_kind);
    std::vector<Violation> out;
    for (const auto& rule : check(p, spec)) {
        auto witness = find_witness(g, pm, rule);
        if (!witness) {
            throw std::logic_error("rule '" + format_property(rule) +
                                   "' is violated by '" + g.app_id +
                                   "' but no call chain realizes it");
        }
        out.push_back(Violation{rule, std::move(witness)});
    }
    return out;
}

// --- Policy text format -----------------------------------------------------
//
// # droidgen-policy v1
// # resource-kind: <permission|api>
// # <key>: <value>              (metadata, sorted by key)
// deny <context> : <kind> <identifier>

namespace detail {

inline constexpr std::string_view kPolicyMagic = "# droidgen-policy v1";

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
        s.remove_prefix(1);
    }
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
        s.remove_suffix(1);
    }
    return s;
}

inline void validate_metadata(const std::map<std::string, std::string>& meta) {
    for (const auto& [key, value] : meta) {
        if (key.empty() || key == "resource-kind" ||
            key.find_first_of(":\n\r") != std::string::npos ||
            value.find_first_of("\n\r") != std::string::npos) {
            throw std::invalid_argument("unserializable metadata key '" + key + "'");
        }
    }
}

} // namespace detail

inline std::string serialize_policy(const Policy& p) {
    detail::validate_metadata(p.metadata);
    std::string out;
    out += detail::kPolicyMagic;
    out += "\n# resource-kind: ";
    out += resource_kind_name(p.resource_kind);
    out += '\n';
    for (const auto& [key, value] : p.metadata) {
        out += "# " + key + ": " + value + "\n";
    }
    for (const auto& rule : p.rules) {
        out += "deny " + format_property(rule) + "\n";
    }
    return out;
}

// Duplicate rules deduplicate with a warning; hand-edited policies are
// expected. Everything else malformed is an error with its line number.
inline Policy parse_policy(std::string_view text,
                           std::vector<std::string>* warnings = nullptr) {
    std::optional<ResourceKind> kind;
    std::map<std::string, std::string> metadata;
    std::set<Property> rules;
    bool magic_seen = false;

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
        const std::string_view stripped = detail::trim(line);
        const std::string where = "line " + std::to_string(line_no) + ": ";
        if (stripped.empty()) {
            // skip
        } else if (!magic_seen) {
            if (stripped != detail::kPolicyMagic) {
                throw ParseError(where + "expected '" +
                                 std::string(detail::kPolicyMagic) + "' header");
            }
            magic_seen = true;
        } else if (stripped.front() == '#') {
            std::string_view body = detail::trim(stripped.substr(1));
            const std::size_t colon = body.find(':');
            if (colon != std::string_view::npos) {
                const std::string key{detail::trim(body.substr(0, colon))};
                const std::string value{detail::trim(body.substr(colon + 1))};
                if (key == "resource-kind") {
                    const auto k = parse_resource_kind(value);
                    if (!k) {
                        throw ParseError(where + "unknown resource kind '" + value + "'");
                    }
                    if (kind && *kind != *k) {
                        throw ParseError(where + "conflicting resource-kind headers");
                    }
                    kind = *k;
                } else if (!key.empty()) {
                    metadata[key] = value;
                }
            }
        } else if (stripped.starts_with("deny ")) {
            Property rule;
            try {
                rule = parse_property(stripped.substr(5));
            } catch (const ParseError& e) {
                throw ParseError(where + e.what());
            }
            if (!kind) {
                throw ParseError(where + "rule before resource-kind header");
            }
            if (rule.resource.kind != *kind) {
                throw ParseError(where + "rule kind '" +
                                 std::string(resource_kind_name(rule.resource.kind)) +
                                 "' does not match policy resource-kind");
            }
            if (!rules.insert(rule).second && warnings) {
                warnings->push_back(where + "duplicate rule '" + format_property(rule) +
                                    "' ignored");
            }
        } else {
            throw ParseError(where + "malformed rule line '" + std::string(stripped) + "'");
        }
        if (nl == std::string_view::npos) {
            break;
        }
        pos = nl + 1;
    }
    if (!magic_seen) {
        throw ParseError("missing '" + std::string(detail::kPolicyMagic) + "' header");
    }
    if (!kind) {
        throw ParseError("missing resource-kind header");
    }
    return Policy{*kind, std::vector<Property>(rules.begin(), rules.end()),
                  std::move(metadata)};
}

// --- Violation report (JSON) -------------------------------------------------
//
// {"app_id": str,
//  "violations": [{"rule": [context, kind, id], "witness": [method_id, ...]}]}

inline nlohmann::json violation_report_json(const std::string& app_id,
                                            const std::vector<Violation>& violations) {
    nlohmann::json items = nlohmann::json::array();
    for (const auto& v : violations) {
        nlohmann::json item = {
            {"rule",
             {std::string(context_name(v.rule.context)),
              std::string(resource_kind_name(v.rule.resource.kind)),
              v.rule.resource.identifier}},
        };
        if (v.witness) {
            item["witness"] = *v.witness;
        }
        items.push_back(std::move(item));
    }
    return {{"app_id", app_id}, {"violations", std::move(items)}};
}

} // namespace droidgen

#endif // DROIDGEN_POLICY_HPP
