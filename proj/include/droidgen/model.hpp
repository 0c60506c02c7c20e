#ifndef DROIDGEN_MODEL_HPP
#define DROIDGEN_MODEL_HPP

#include <algorithm>
#include <array>
#include <cctype>
#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <boost/rational.hpp>

namespace droidgen {

// Exact rational arithmetic for clause weights, scores and rates.
using Ratio = boost::rational<long long>;

inline std::string to_string(const Ratio& r) {
    if (r.denominator() == 1) {
        return std::to_string(r.numerator());
    }
    return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

// Raised on malformed input files (graphs, maps, specs, policies).
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// The context part of a property. The declaration order below defines the
// total order used for tie-breaking and serialization everywhere.
enum class Context : std::uint8_t {
    entry_point,
    activity,
    service,
    receiver,
    onclick_handler,
    ontouch_handler,
    oncreate,
    onstart,
    onresume,
    onpause,
    onstop,
    ondestroy,
    onrestart,
};

inline constexpr std::size_t kContextCount = 13;

inline constexpr std::array<Context, kContextCount> kAllContexts = {
    Context::entry_point,     Context::activity, Context::service,
    Context::receiver,        Context::onclick_handler,
    Context::ontouch_handler, Context::oncreate, Context::onstart,
    Context::onresume,        Context::onpause,  Context::onstop,
    Context::ondestroy,       Context::onrestart,
};

inline constexpr std::array<std::string_view, kContextCount> kContextNames = {
    "entry_point",     "activity", "service",  "receiver", "onclick_handler",
    "ontouch_handler", "oncreate", "onstart",  "onresume", "onpause",
    "onstop",          "ondestroy", "onrestart",
};

inline constexpr std::string_view context_name(Context c) {
    return kContextNames[static_cast<std::size_t>(c)];
}

// The set of contexts is closed: any other token is a parse failure.
inline std::optional<Context> parse_context(std::string_view token) {
    for (std::size_t i = 0; i < kContextCount; ++i) {
        if (kContextNames[i] == token) {
            return kAllContexts[i];
        }
    }
    return std::nullopt;
}

// A context is one of the seven activity lifecycle callbacks.
inline constexpr bool is_lifecycle_context(Context c) {
    return c >= Context::oncreate && c <= Context::onrestart;
}

enum class ResourceKind : std::uint8_t {
    permission,
    api,
};

inline constexpr std::string_view resource_kind_name(ResourceKind k) {
    return k == ResourceKind::permission ? "permission" : "api";
}

inline std::optional<ResourceKind> parse_resource_kind(std::string_view token) {
    if (token == "permission") {
        return ResourceKind::permission;
    }
    if (token == "api") {
        return ResourceKind::api;
    }
    return std::nullopt;
}

// Identifiers are opaque strings: non-empty, printable, no whitespace and no
// ':' (reserved by the policy text format).
inline bool is_valid_identifier(std::string_view id) {
    if (id.empty()) {
        return false;
    }
    for (unsigned char ch : id) {
        if (ch == ':' || std::isspace(ch) || !std::isprint(ch)) {
            return false;
        }
    }
    return true;
}

// A permission name or a fully qualified api method identifier.
struct Resource {
    ResourceKind kind = ResourceKind::permission;
    std::string identifier;

    auto operator<=>(const Resource&) const = default;
};

// p = c : r, the atomic unit of specifications, rules and solver variables.
struct Property {
    Context context = Context::entry_point;
    Resource resource;

    // Lexicographic over (context order, resource kind, identifier).
    auto operator<=>(const Property&) const = default;
};

inline std::strong_ordering property_order(const Property& a, const Property& b) {
    return a <=> b;
}

// Renders the policy text token, e.g. "oncreate : permission RECORD_AUDIO".
inline std::string format_property(const Property& p) {
    std::string out;
    out += context_name(p.context);
    out += " : ";
    out += resource_kind_name(p.resource.kind);
    out += ' ';
    out += p.resource.identifier;
    return out;
}

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view s) {
    std::vector<std::string_view> tokens;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) {
            ++i;
        }
        std::size_t start = i;
        while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) {
            ++i;
        }
        if (i > start) {
            tokens.push_back(s.substr(start, i - start));
        }
    }
    return tokens;
}

} // namespace detail

// Parses "<context> : <kind> <identifier>". Throws ParseError on any
// malformed part; the context vocabulary is closed.
inline Property parse_property(std::string_view token) {
    const auto parts = detail::split_ws(token);
    if (parts.size() != 4 || parts[1] != ":") {
        throw ParseError("malformed property token: '" + std::string(token) + "'");
    }
    const auto ctx = parse_context(parts[0]);
    if (!ctx) {
        throw ParseError("unknown context '" + std::string(parts[0]) + "'");
    }
    const auto kind = parse_resource_kind(parts[2]);
    if (!kind) {
        throw ParseError("unknown resource kind '" + std::string(parts[2]) + "'");
    }
    if (!is_valid_identifier(parts[3])) {
        throw ParseError("invalid resource identifier '" + std::string(parts[3]) + "'");
    }
    return Property{*ctx, Resource{*kind, std::string(parts[3])}};
}

enum class Label : std::uint8_t {
    benign,
    malware,
    unknown,
};

inline constexpr std::string_view label_name(Label l) {
    switch (l) {
    case Label::benign: return "benign";
    case Label::malware: return "malware";
    case Label::unknown: return "unknown";
    }
    return "unknown";
}

inline std::optional<Label> parse_label(std::string_view token) {
    if (token == "benign") {
        return Label::benign;
    }
    if (token == "malware") {
        return Label::malware;
    }
    if (token == "unknown") {
        return Label::unknown;
    }
    return std::nullopt;
}

// An application's derived specification: its label plus the set of
// properties observed in it. Properties are kept sorted and duplicate-free,
// and all share resource_kind (a spec is either permission- or api-based).
struct AppSpec {
    std::string app_id;
    Label label = Label::unknown;
    ResourceKind resource_kind = ResourceKind::permission;
    std::vector<Property> properties;

    bool operator==(const AppSpec&) const = default;
};

// Normalizes (sort + dedupe) and validates the homogeneity invariant.
inline AppSpec make_app_spec(std::string app_id, Label label, ResourceKind kind,
                             std::vector<Property> properties) {
    if (app_id.empty()) {
        throw std::invalid_argument("app_id must be non-empty");
    }
    for (const auto& p : properties) {
        if (p.resource.kind != kind) {
            throw std::invalid_argument("spec '" + app_id +
                                        "' mixes resource kinds");
        }
        if (!is_valid_identifier(p.resource.identifier)) {
            throw std::invalid_argument("spec '" + app_id +
                                        "' has invalid identifier '" +
                                        p.resource.identifier + "'");
        }
    }
    std::sort(properties.begin(), properties.end());
    properties.erase(std::unique(properties.begin(), properties.end()),
                     properties.end());
    return AppSpec{std::move(app_id), label, kind, std::move(properties)};
}

} // namespace droidgen

#endif // DROIDGEN_MODEL_HPP
