#ifndef DROIDGEN_EVALKIT_HPP
#define DROIDGEN_EVALKIT_HPP

#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "droidgen/ingest.hpp"
#include "droidgen/model.hpp"
#include "droidgen/policy.hpp"
#include "droidgen/rng.hpp"

namespace droidgen {

struct EvalReport {
    std::size_t malware_total = 0;
    std::size_t malware_filtered = 0;
    std::size_t benign_total = 0;
    std::size_t benign_excluded = 0;
    Ratio detection_rate{0};
    Ratio false_positive_rate{0};
    // Per rule: how many of the evaluated apps that rule alone would catch.
    std::map<Property, std::size_t> per_rule_hits;
};

// Counts are driven through policy check app by app; there is deliberately
// no second implementation of the violation semantics here.
inline EvalReport evaluate(const Policy& p, const std::vector<AppSpec>& benign,
                           const std::vector<AppSpec>& malware) {
    EvalReport r;
    r.benign_total = benign.size();
    r.malware_total = malware.size();
    for (const auto& s : benign) {
        const auto violated = check(p, s);
        if (!violated.empty()) {
            ++r.benign_excluded;
        }
        for (const auto& rule : violated) {
            ++r.per_rule_hits[rule];
        }
    }
    for (const auto& s : malware) {
        const auto violated = check(p, s);
        if (!violated.empty()) {
            ++r.malware_filtered;
        }
        for (const auto& rule : violated) {
            ++r.per_rule_hits[rule];
        }
    }
    if (r.malware_total > 0) {
        r.detection_rate = Ratio(static_cast<long long>(r.malware_filtered),
                                 static_cast<long long>(r.malware_total));
    }
    if (r.benign_total > 0) {
        r.false_positive_rate = Ratio(static_cast<long long>(r.benign_excluded),
                                      static_cast<long long>(r.benign_total));
    }
    return r;
}

// One decimal percent, rounded half up, computed in exact arithmetic.
inline std::string render_percent(const Ratio& rate) {
    const Ratio shifted = rate * 1000 + Ratio(1, 2);
    const long long permille = shifted.numerator() / shifted.denominator();
    return std::to_string(permille / 10) + "." + std::to_string(permille % 10);
}

namespace detail {

inline std::string pad(std::string s, std::size_t width) {
    if (s.size() < width) {
        s.append(width - s.size(), ' ');
    }
    return s;
}

} // namespace detail

// counts/total presentation with the rounded percent alongside, e.g.
// "910/1000 (91.0%)".
inline std::string render_fraction(std::size_t hits, std::size_t total,
                                   const Ratio& rate) {
    return std::to_string(hits) + "/" + std::to_string(total) + " (" +
           render_percent(rate) + "%)";
}

inline std::string render_report_table(const EvalReport& r,
                                       const std::string& policy_name) {
    std::string out;
    out += detail::pad("Policy", 20) + detail::pad("Malware filtered out", 26) +
           "Benign excluded\n";
    out += detail::pad(policy_name, 20) +
           detail::pad(render_fraction(r.malware_filtered, r.malware_total,
                                       r.detection_rate),
                       26) +
           render_fraction(r.benign_excluded, r.benign_total,
                           r.false_positive_rate) +
           "\n";
    return out;
}

inline nlohmann::json report_to_json(const EvalReport& r) {
    nlohmann::json hits = nlohmann::json::array();
    for (const auto& [rule, count] : r.per_rule_hits) {
        hits.push_back({{"rule",
                         {std::string(context_name(rule.context)),
                          std::string(resource_kind_name(rule.resource.kind)),
                          rule.resource.identifier}},
                        {"apps_caught", count}});
    }
    return {{"malware_total", r.malware_total},
            {"malware_filtered", r.malware_filtered},
            {"benign_total", r.benign_total},
            {"benign_excluded", r.benign_excluded},
            {"detection_rate", to_string(r.detection_rate)},
            {"detection_percent", render_percent(r.detection_rate)},
            {"false_positive_rate", to_string(r.false_positive_rate)},
            {"false_positive_percent", render_percent(r.false_positive_rate)},
            {"per_rule_hits", std::move(hits)}};
}

// --- Synthetic corpora -----------------------------------------------------

// A property injected with asymmetric class probabilities to create a known
// benign/malware separation.
struct PlantedProperty {
    Property property;
    double prob_benign = 0.0;
    double prob_malware = 0.0;
};

struct GenProfile {
    std::size_t n_noise_properties = 0;
    double noise_prob_benign = 0.0;
    double noise_prob_malware = 0.0;
    std::vector<PlantedProperty> planted;
    std::size_t n_benign = 0;
    std::size_t n_malware = 0;
    std::uint64_t seed = 0;
    ResourceKind resource_kind = ResourceKind::permission;
};

struct GeneratedCorpus {
    std::vector<AppSpec> benign;
    std::vector<AppSpec> malware;
};

struct GeneratedGraphCorpus {
    std::vector<AppGraph> benign;
    std::vector<AppGraph> malware;
    PermissionMap permission_map;
};

namespace detail {

inline constexpr std::uint64_t kStreamBenign = 0x42454E49ULL;
inline constexpr std::uint64_t kStreamMalware = 0x4D414C57ULL;
inline constexpr std::uint64_t kStreamSplit = 0x53504C49ULL;

inline std::string padded_index(std::size_t i, int width) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%0*zu", width, i);
    return buf;
}

// Noise property i cycles through the context list with a synthetic
// identifier, e.g. (service, NOISE_0002).
inline std::vector<Property> noise_properties(const GenProfile& profile) {
    std::vector<Property> noise;
    noise.reserve(profile.n_noise_properties);
    for (std::size_t i = 0; i < profile.n_noise_properties; ++i) {
        noise.push_back(Property{kAllContexts[i % kContextCount],
                                 Resource{profile.resource_kind,
                                          "NOISE_" + padded_index(i, 4)}});
    }
    return noise;
}

inline void validate_profile(const GenProfile& profile) {
    const auto valid_prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!valid_prob(profile.noise_prob_benign) ||
        !valid_prob(profile.noise_prob_malware)) {
        throw std::invalid_argument("noise probabilities must be in [0, 1]");
    }
    const auto noise = noise_properties(profile);
    for (const auto& pl : profile.planted) {
        if (!valid_prob(pl.prob_benign) || !valid_prob(pl.prob_malware)) {
            throw std::invalid_argument("planted probabilities must be in [0, 1]");
        }
        if (pl.property.resource.kind != profile.resource_kind) {
            throw std::invalid_argument("planted property '" +
                                        format_property(pl.property) +
                                        "' does not match profile resource kind");
        }
        if (!is_valid_identifier(pl.property.resource.identifier)) {
            throw std::invalid_argument("invalid planted identifier '" +
                                        pl.property.resource.identifier + "'");
        }
        if (std::find(noise.begin(), noise.end(), pl.property) != noise.end()) {
            throw std::invalid_argument("planted property '" +
                                        format_property(pl.property) +
                                        "' collides with a noise property");
        }
    }
}

// Per-app sampling: one rng per app (seeded from profile seed, class stream
// and app index), one draw per candidate property in a fixed order.
inline std::vector<AppSpec> sample_class(const GenProfile& profile,
                                         const std::vector<Property>& noise,
                                         Label label) {
    const bool malware = label == Label::malware;
    const std::uint64_t stream = malware ? kStreamMalware : kStreamBenign;
    const double noise_prob =
        malware ? profile.noise_prob_malware : profile.noise_prob_benign;
    const std::size_t count = malware ? profile.n_malware : profile.n_benign;
    const std::string prefix = malware ? "malware_" : "benign_";

    std::vector<AppSpec> specs;
    specs.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        auto rng = make_rng(profile.seed, stream, i);
        std::vector<Property> props;
        for (const auto& p : noise) {
            if (uniform_double(rng) < noise_prob) {
                props.push_back(p);
            }
        }
        for (const auto& pl : profile.planted) {
            const double prob = malware ? pl.prob_malware : pl.prob_benign;
            if (uniform_double(rng) < prob) {
                props.push_back(pl.property);
            }
        }
        specs.push_back(make_app_spec(prefix + padded_index(i, 5), label,
                                      profile.resource_kind, std::move(props)));
    }
    return specs;
}

} // namespace detail

inline GeneratedCorpus gen_corpus(const GenProfile& profile) {
    detail::validate_profile(profile);
    const auto noise = detail::noise_properties(profile);
    return GeneratedCorpus{
        detail::sample_class(profile, noise, Label::benign),
        detail::sample_class(profile, noise, Label::malware),
    };
}

namespace detail {

// The api identifier whose invocation realizes a generated resource, and
// the permission it maps to. Permission-kind resources get a synthetic api
// per permission; api-kind resources get a synthetic permission per api (an
// unmapped api would be invisible in api mode).
inline std::string api_for_resource(const Resource& r) {
    return r.kind == ResourceKind::permission ? "api." + r.identifier : r.identifier;
}

inline std::string permission_for_resource(const Resource& r) {
    return r.kind == ResourceKind::permission ? r.identifier : "P_" + r.identifier;
}

// One method per property, shaped so that the method matches exactly the
// property's context (plus the mandatory entry-point closure for callbacks
// and handlers) and directly invokes the realizing api.
inline AppGraph spec_to_graph(const AppSpec& spec) {
    AppGraph g;
    g.app_id = spec.app_id;
    g.label = spec.label;
    std::size_t i = 0;
    for (const auto& p : spec.properties) {
        MethodNode m;
        m.method_id = "m" + padded_index(i++, 4) + "_" +
                      std::string(context_name(p.context));
        switch (p.context) {
        case Context::activity: m.component_kind = ComponentKind::activity; break;
        case Context::service: m.component_kind = ComponentKind::service; break;
        case Context::receiver: m.component_kind = ComponentKind::receiver; break;
        case Context::entry_point: m.is_entry_point = true; break;
        case Context::onclick_handler:
            m.handlers = {"onclick"};
            m.is_entry_point = true;
            break;
        case Context::ontouch_handler:
            m.handlers = {"ontouch"};
            m.is_entry_point = true;
            break;
        default: // lifecycle callbacks
            m.callbacks = {std::string(context_name(p.context))};
            m.is_entry_point = true;
            break;
        }
        m.direct_apis = {api_for_resource(p.resource)};
        g.methods.emplace(m.method_id, std::move(m));
    }
    return g;
}

} // namespace detail

// Graph-mode generation: the same sampled specs realized as trivial
// one-method-per-property graphs, plus a permission map covering every
// candidate resource, so the full ingest path can run end to end.
inline GeneratedGraphCorpus gen_graph_corpus(const GenProfile& profile) {
    GeneratedCorpus specs = gen_corpus(profile);
    GeneratedGraphCorpus out;
    out.benign.reserve(specs.benign.size());
    for (const auto& s : specs.benign) {
        out.benign.push_back(detail::spec_to_graph(s));
    }
    out.malware.reserve(specs.malware.size());
    for (const auto& s : specs.malware) {
        out.malware.push_back(detail::spec_to_graph(s));
    }
    for (const auto& p : detail::noise_properties(profile)) {
        out.permission_map.entries[detail::api_for_resource(p.resource)] = {
            detail::permission_for_resource(p.resource)};
    }
    for (const auto& pl : profile.planted) {
        out.permission_map.entries[detail::api_for_resource(pl.property.resource)] = {
            detail::permission_for_resource(pl.property.resource)};
    }
    return out;
}

struct SplitResult {
    std::vector<AppSpec> train;
    std::vector<AppSpec> test;
};

// Disjoint, exhaustive, label-stratified split. Per-label groups are
// shuffled with a seeded Fisher-Yates; the train quota per group is its
// floor share, with the remaining slots (up to the rounded global target)
// handed out by largest fractional remainder.
inline SplitResult split_corpus(const std::vector<AppSpec>& specs,
                                double train_fraction, std::uint64_t seed) {
    if (specs.empty()) {
        throw std::invalid_argument("cannot split an empty corpus");
    }
    if (!(train_fraction > 0.0) || !(train_fraction < 1.0)) {
        throw std::invalid_argument("train fraction must be in (0, 1)");
    }

    constexpr std::array<Label, 3> kLabels = {Label::benign, Label::malware,
                                              Label::unknown};
    std::array<std::vector<std::size_t>, 3> groups;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        groups[static_cast<std::size_t>(specs[i].label)].push_back(i);
    }
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        auto rng = make_rng(seed, detail::kStreamSplit, gi);
        shuffle_stable(groups[gi], rng);
    }

    const auto target_total = static_cast<std::size_t>(
        train_fraction * static_cast<double>(specs.size()) + 0.5);
    std::array<std::size_t, 3> quota{};
    std::array<double, 3> remainder{};
    std::size_t assigned = 0;
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        const double share =
            train_fraction * static_cast<double>(groups[gi].size());
        quota[gi] = static_cast<std::size_t>(share);
        remainder[gi] = share - static_cast<double>(quota[gi]);
        assigned += quota[gi];
    }
    std::array<std::size_t, 3> order = {0, 1, 2};
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (remainder[a] != remainder[b]) {
            return remainder[a] > remainder[b];
        }
        return a < b;
    });
    for (const std::size_t gi : order) {
        if (assigned >= target_total) {
            break;
        }
        if (quota[gi] < groups[gi].size() && remainder[gi] > 0.0) {
            ++quota[gi];
            ++assigned;
        }
    }

    SplitResult result;
    for (std::size_t gi = 0; gi < kLabels.size(); ++gi) {
        for (std::size_t k = 0; k < groups[gi].size(); ++k) {
            auto& dest = k < quota[gi] ? result.train : result.test;
            dest.push_back(specs[groups[gi][k]]);
        }
    }
    const auto by_app_id = [](const AppSpec& a, const AppSpec& b) {
        return a.app_id < b.app_id;
    };
    std::sort(result.train.begin(), result.train.end(), by_app_id);
    std::sort(result.test.begin(), result.test.end(), by_app_id);
    return result;
}

} // namespace droidgen

#endif // DROIDGEN_EVALKIT_HPP
