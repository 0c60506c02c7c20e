#ifndef DROIDGEN_ENCODE_HPP
#define DROIDGEN_ENCODE_HPP

#include <map>
#include <set>
#include <string>
#include <vector>

#include "droidgen/model.hpp"

namespace droidgen {

using VarId = std::uint32_t;

// One soft clause per application. For a benign app the clause is the
// conjunction of its property variables (satisfied iff the policy allows
// every property); for a malware app it is the disjunction of their
// negations (satisfied iff the policy denies at least one).
struct SoftClause {
    std::string app_id;
    std::vector<VarId> vars; // sorted, distinct, indices into vars
    Ratio weight{1};
};

struct MaxSatInstance {
    // Distinct properties across all specs, sorted by property order;
    // the index is the variable id.
    std::vector<Property> vars;
    std::vector<SoftClause> benign_clauses;
    std::vector<SoftClause> malware_clauses;
    // Weight of empty-spec benign apps: an empty conjunction is true, so
    // these are allowed under every assignment and their clause is omitted.
    Ratio base_weight{0};
    // base_weight plus the weight of every emitted clause. Empty-spec
    // malware apps are excluded: an empty disjunction can never be
    // satisfied, so their weight would be dead.
    Ratio total_weight{0};
    std::vector<std::string> skipped_malware;
    ResourceKind resource_kind = ResourceKind::permission;
};

// A candidate policy in solver form: values[v] == true means the property
// vars[v] stays allowed.
using Assignment = std::vector<bool>;

inline MaxSatInstance build_instance(const std::vector<AppSpec>& benign,
                                     const std::vector<AppSpec>& malware,
                                     const Ratio& w_b, const Ratio& w_m) {
    if (w_b <= 0 || w_m <= 0) {
        throw std::invalid_argument("clause weights must be positive");
    }
    for (const auto& s : benign) {
        if (s.label != Label::benign) {
            throw std::invalid_argument("app '" + s.app_id +
                                        "' in benign list is not labeled benign");
        }
    }
    for (const auto& s : malware) {
        if (s.label != Label::malware) {
            throw std::invalid_argument("app '" + s.app_id +
                                        "' in malware list is not labeled malware");
        }
    }

    MaxSatInstance inst;
    bool kind_set = false;
    std::set<Property> universe;
    for (const auto* list : {&benign, &malware}) {
        for (const auto& s : *list) {
            if (!kind_set) {
                inst.resource_kind = s.resource_kind;
                kind_set = true;
            } else if (s.resource_kind != inst.resource_kind) {
                throw std::invalid_argument("mixed resource kinds across specs ('" +
                                            s.app_id + "')");
            }
            universe.insert(s.properties.begin(), s.properties.end());
        }
    }
    inst.vars.assign(universe.begin(), universe.end());

    std::map<Property, VarId> index;
    for (VarId v = 0; v < inst.vars.size(); ++v) {
        index.emplace(inst.vars[v], v);
    }
    const auto to_ids = [&](const AppSpec& s) {
        std::vector<VarId> ids;
        ids.reserve(s.properties.size());
        for (const auto& p : s.properties) {
            ids.push_back(index.at(p));
        }
        return ids; // spec properties are sorted, so ids are too
    };

    for (const auto& s : benign) {
        if (s.properties.empty()) {
            inst.base_weight += w_b;
        } else {
            inst.benign_clauses.push_back(SoftClause{s.app_id, to_ids(s), w_b});
        }
    }
    for (const auto& s : malware) {
        if (s.properties.empty()) {
            inst.skipped_malware.push_back(s.app_id);
        } else {
            inst.malware_clauses.push_back(SoftClause{s.app_id, to_ids(s), w_m});
        }
    }

    inst.total_weight = inst.base_weight;
    for (const auto& c : inst.benign_clauses) {
        inst.total_weight += c.weight;
    }
    for (const auto& c : inst.malware_clauses) {
        inst.total_weight += c.weight;
    }
    return inst;
}

// Total weight of satisfied clauses under the assignment. With unit weights
// this equals (#benign allowed) + (#malware blocked), whose argmax set
// coincides with the argmax set of the benign-minus-malware objective.
inline Ratio score(const MaxSatInstance& inst, const Assignment& a) {
    if (a.size() != inst.vars.size()) {
        throw std::invalid_argument("assignment length does not match instance");
    }
    Ratio total = inst.base_weight;
    for (const auto& c : inst.benign_clauses) {
        bool all_true = true;
        for (const VarId v : c.vars) {
            if (!a[v]) {
                all_true = false;
                break;
            }
        }
        if (all_true) {
            total += c.weight;
        }
    }
    for (const auto& c : inst.malware_clauses) {
        for (const VarId v : c.vars) {
            if (!a[v]) {
                total += c.weight;
                break;
            }
        }
    }
    return total;
}

// Weighted partial DIMACS export. Each benign conjunction gets one
// auxiliary variable y with hard clauses (y -> x_i) and a soft unit clause
// (y); each malware clause is a direct soft disjunction of negated
// literals. Minimum cost of the exported formula equals
// total_weight - base_weight - best satisfiable weight.
inline std::string export_wcnf(const MaxSatInstance& inst) {
    long long soft_sum = 0;
    const auto integral = [](const Ratio& w) { return w.denominator() == 1; };
    for (const auto* clauses : {&inst.benign_clauses, &inst.malware_clauses}) {
        for (const auto& c : *clauses) {
            if (!integral(c.weight)) {
                throw std::invalid_argument(
                    "wcnf export requires integer clause weights ('" + c.app_id +
                    "' has " + to_string(c.weight) + "); rescale first");
            }
            soft_sum += c.weight.numerator();
        }
    }
    const long long top = soft_sum + 1;
    const std::size_t n_orig = inst.vars.size();
    const std::size_t n_aux = inst.benign_clauses.size();
    std::size_t n_clauses = inst.malware_clauses.size() + n_aux;
    for (const auto& c : inst.benign_clauses) {
        n_clauses += c.vars.size();
    }

    std::string out;
    for (std::size_t v = 0; v < n_orig; ++v) {
        out += "c var " + std::to_string(v + 1) + " = " + format_property(inst.vars[v]) + "\n";
    }
    for (std::size_t i = 0; i < n_aux; ++i) {
        out += "c aux " + std::to_string(n_orig + i + 1) + " = " +
               inst.benign_clauses[i].app_id + "\n";
    }
    out += "p wcnf " + std::to_string(n_orig + n_aux) + " " +
           std::to_string(n_clauses) + " " + std::to_string(top) + "\n";
    for (std::size_t i = 0; i < n_aux; ++i) {
        const auto& c = inst.benign_clauses[i];
        const long long aux = static_cast<long long>(n_orig + i + 1);
        for (const VarId v : c.vars) {
            out += std::to_string(top) + " -" + std::to_string(aux) + " " +
                   std::to_string(v + 1) + " 0\n";
        }
        out += std::to_string(c.weight.numerator()) + " " + std::to_string(aux) + " 0\n";
    }
    for (const auto& c : inst.malware_clauses) {
        out += std::to_string(c.weight.numerator());
        for (const VarId v : c.vars) {
            out += " -" + std::to_string(v + 1);
        }
        out += " 0\n";
    }
    return out;
}

} // namespace droidgen

#endif // DROIDGEN_ENCODE_HPP
