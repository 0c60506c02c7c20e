#include <catch2/catch_amalgamated.hpp>

#include "support.hpp"

using namespace droidgen;
using testutil::perm_prop;

namespace {

AppGraph recorder_graph() {
    return load_app_graph(testutil::read_file(std::string(TEST_DATA_DIR) +
                                              "/recorder.graph.json"));
}

PermissionMap recorder_map() {
    return load_permission_map(testutil::read_file(std::string(TEST_DATA_DIR) +
                                                   "/recorder.permissions.tsv"));
}

} // namespace

// ============================================================================
// policy_from_solution
// ============================================================================

TEST_CASE("worked example solution denies p_a and p_d", "[policy]") {
    const auto six = testutil::six_apps();
    const auto inst = build_instance(six.benign, six.malware, Ratio(1), Ratio(1));
    const auto res = solve_exact(inst);
    const Policy p = policy_from_solution(inst, res.assignment);
    REQUIRE(p.rules == std::vector<Property>{six.pa, six.pd});
    REQUIRE(p.resource_kind == ResourceKind::permission);
}

TEST_CASE("all-true assignment yields the empty policy", "[policy]") {
    const auto six = testutil::six_apps();
    const auto inst = build_instance(six.benign, six.malware, Ratio(1), Ratio(1));
    REQUIRE(policy_from_solution(inst, Assignment(5, true)).rules.empty());
    REQUIRE(policy_from_solution(inst, Assignment(5, false)).rules.size() == 5);
    REQUIRE_THROWS_AS(policy_from_solution(inst, Assignment(4, true)),
                      std::invalid_argument);
}

// ============================================================================
// check
// ============================================================================

TEST_CASE("recorder violates a policy denying activity RECORD_AUDIO", "[policy]") {
    const AppSpec spec =
        derive_spec(recorder_graph(), recorder_map(), ResourceKind::permission);
    const Policy p = make_policy(ResourceKind::permission,
                                 {perm_prop(Context::activity, "RECORD_AUDIO")});
    REQUIRE(check(p, spec) ==
            std::vector<Property>{perm_prop(Context::activity, "RECORD_AUDIO")});
}

TEST_CASE("the empty policy admits everything", "[policy]") {
    const AppSpec spec =
        derive_spec(recorder_graph(), recorder_map(), ResourceKind::permission);
    REQUIRE(check(make_policy(ResourceKind::permission, {}), spec).empty());
}

TEST_CASE("worked example policy filters the right apps", "[policy]") {
    const auto six = testutil::six_apps();
    const Policy p = make_policy(ResourceKind::permission, {six.pa, six.pd});
    REQUIRE(check(p, six.malware[1]) == std::vector<Property>{six.pa});
    REQUIRE(check(p, six.benign[1]).empty());
    REQUIRE(check(p, six.benign[0]) == std::vector<Property>{six.pa});
    for (const auto& m : six.malware) {
        REQUIRE_FALSE(check(p, m).empty());
    }
}

TEST_CASE("check rejects resource-kind mismatches", "[policy]") {
    const Policy p = make_policy(ResourceKind::api, {});
    const auto spec =
        make_app_spec("a", Label::benign, ResourceKind::permission, {});
    REQUIRE_THROWS_AS(check(p, spec), std::invalid_argument);
}

// ============================================================================
// explain
// ============================================================================

TEST_CASE("direct invocation yields a length-1 witness", "[policy]") {
    const Policy p = make_policy(ResourceKind::permission,
                                 {perm_prop(Context::oncreate, "RECORD_AUDIO")});
    const auto violations = explain(p, recorder_graph(), recorder_map());
    REQUIRE(violations.size() == 1);
    REQUIRE(violations[0].rule == perm_prop(Context::oncreate, "RECORD_AUDIO"));
    REQUIRE(violations[0].witness ==
            std::vector<std::string>{"Recorder.onCreate"});
}

TEST_CASE("transitive invocation yields the call chain", "[policy]") {
    const Policy p = make_policy(
        ResourceKind::permission,
        {perm_prop(Context::onclick_handler, "WRITE_EXTERNAL_STORAGE")});
    const auto violations = explain(p, recorder_graph(), recorder_map());
    REQUIRE(violations.size() == 1);
    REQUIRE(violations[0].witness ==
            std::vector<std::string>{"Recorder.onClick", "Recorder.startRecording"});
}

TEST_CASE("rules the app does not violate produce no entries", "[policy]") {
    const Policy p = make_policy(ResourceKind::permission,
                                 {perm_prop(Context::service, "RECORD_AUDIO")});
    REQUIRE(explain(p, recorder_graph(), recorder_map()).empty());
}

TEST_CASE("api-kind rules are witnessed too", "[policy]") {
    const Policy p = make_policy(
        ResourceKind::api,
        {testutil::api_prop(Context::activity, "MediaRecorder.setOutputFile")});
    const auto violations = explain(p, recorder_graph(), recorder_map());
    REQUIRE(violations.size() == 1);
    // startRecording is itself an activity member, so the shortest witness
    // is the direct invocation
    REQUIRE(violations[0].witness ==
            std::vector<std::string>{"Recorder.startRecording"});
}

TEST_CASE("witnesses are valid and shortest on random graphs",
          "[policy][oracle]") {
    auto rng = std::mt19937_64(4021);
    int rules_checked = 0;
    for (int i = 0; rules_checked < 100 && i < 500; ++i) {
        const AppGraph g = testutil::random_graph(rng);
        const PermissionMap pm = testutil::random_permission_map(rng);
        for (const ResourceKind kind :
             {ResourceKind::permission, ResourceKind::api}) {
            const AppSpec spec = derive_spec(g, pm, kind);
            if (spec.properties.empty()) {
                continue;
            }
            const Policy p = make_policy(
                kind, {spec.properties[uniform_below(rng, spec.properties.size())]});
            const auto violations = explain(p, g, pm);
            REQUIRE(violations.size() == 1);
            const auto& v = violations[0];
            REQUIRE(v.witness.has_value());
            REQUIRE(testutil::witness_valid(g, pm, v.rule, *v.witness));
            const auto oracle_len =
                testutil::shortest_witness_len_oracle(g, pm, v.rule);
            REQUIRE(oracle_len.has_value());
            REQUIRE(v.witness->size() == *oracle_len);
            ++rules_checked;
        }
    }
    REQUIRE(rules_checked >= 100);
}

// ============================================================================
// solver / checker consistency
// ============================================================================

// The central cross-module link: a training app is rejected by the inferred
// policy exactly when its clause is unsatisfied (benign) or satisfied
// (malware) under the solver's assignment.
TEST_CASE("check agrees with clause satisfaction on training corpora",
          "[policy][oracle]") {
    auto rng = std::mt19937_64(5077);
    for (int i = 0; i < 30; ++i) {
        const auto corpus = testutil::random_corpus(rng);
        const auto inst =
            build_instance(corpus.benign, corpus.malware, corpus.w_b, corpus.w_m);
        const auto res = solve_exact(inst);
        const Policy p = policy_from_solution(inst, res.assignment);
        const auto allowed = testutil::allowed_by(inst, res.assignment);
        for (const auto& s : corpus.benign) {
            bool conj = true;
            for (const auto& prop : s.properties) {
                conj = conj && allowed(prop);
            }
            REQUIRE(check(p, s).empty() == conj);
        }
        for (const auto& s : corpus.malware) {
            bool any_denied = false;
            for (const auto& prop : s.properties) {
                any_denied = any_denied || !allowed(prop);
            }
            REQUIRE(!check(p, s).empty() == any_denied);
        }
    }
}

// ============================================================================
// text format
// ============================================================================

TEST_CASE("single-rule policy serializes to the documented line", "[policy]") {
    const Policy p = make_policy(ResourceKind::permission,
                                 {perm_prop(Context::service, "SEND_SMS")});
    REQUIRE(serialize_policy(p) ==
            "# droidgen-policy v1\n"
            "# resource-kind: permission\n"
            "deny service : permission SEND_SMS\n");
}

TEST_CASE("empty policy is header only", "[policy]") {
    const Policy p = make_policy(ResourceKind::api, {});
    const std::string text = serialize_policy(p);
    REQUIRE(text ==
            "# droidgen-policy v1\n"
            "# resource-kind: api\n");
    REQUIRE(parse_policy(text) == p);
}

TEST_CASE("unknown context token fails with its line number", "[policy]") {
    const std::string text =
        "# droidgen-policy v1\n"
        "# resource-kind: permission\n"
        "deny sevice : permission X\n";
    REQUIRE_THROWS_WITH(parse_policy(text),
                        Catch::Matchers::ContainsSubstring("line 3") &&
                            Catch::Matchers::ContainsSubstring("sevice"));
}

TEST_CASE("parse rejects malformed and mismatched lines", "[policy]") {
    REQUIRE_THROWS_WITH(parse_policy("deny service : permission X\n"),
                        Catch::Matchers::ContainsSubstring("droidgen-policy"));
    REQUIRE_THROWS_WITH(parse_policy("# droidgen-policy v1\n"
                                     "# resource-kind: permission\n"
                                     "allow service : permission X\n"),
                        Catch::Matchers::ContainsSubstring("malformed rule"));
    REQUIRE_THROWS_WITH(parse_policy("# droidgen-policy v1\n"
                                     "# resource-kind: api\n"
                                     "deny service : permission X\n"),
                        Catch::Matchers::ContainsSubstring("does not match"));
    REQUIRE_THROWS_WITH(parse_policy("# droidgen-policy v1\n"
                                     "deny service : permission X\n"),
                        Catch::Matchers::ContainsSubstring("resource-kind"));
}

TEST_CASE("duplicate rules deduplicate with a warning", "[policy]") {
    const std::string text =
        "# droidgen-policy v1\n"
        "# resource-kind: permission\n"
        "deny service : permission X\n"
        "deny service : permission X\n";
    std::vector<std::string> warnings;
    const Policy p = parse_policy(text, &warnings);
    REQUIRE(p.rules.size() == 1);
    REQUIRE(warnings.size() == 1);
    REQUIRE_THAT(warnings[0], Catch::Matchers::ContainsSubstring("duplicate"));
}

TEST_CASE("metadata survives the round trip", "[policy]") {
    const Policy p = make_policy(
        ResourceKind::permission, {perm_prop(Context::receiver, "SEND_SMS")},
        {{"name", "pilot"}, {"solver", "exact"}, {"wb", "1"}, {"wm", "2"}});
    REQUIRE(parse_policy(serialize_policy(p)) == p);
}

TEST_CASE("random policies round-trip", "[policy][property]") {
    auto rng = std::mt19937_64(6101);
    for (int i = 0; i < 100; ++i) {
        const Policy p = testutil::random_policy(rng);
        REQUIRE(parse_policy(serialize_policy(p)) == p);
    }
}

// ============================================================================
// violation report
// ============================================================================

TEST_CASE("violation report renders rules and witnesses", "[policy]") {
    const std::vector<Violation> violations = {
        Violation{perm_prop(Context::oncreate, "RECORD_AUDIO"),
                  std::vector<std::string>{"Recorder.onCreate"}},
        Violation{perm_prop(Context::activity, "RECORD_AUDIO"), std::nullopt},
    };
    const auto j = violation_report_json("recorder", violations);
    REQUIRE(j["app_id"] == "recorder");
    REQUIRE(j["violations"].size() == 2);
    REQUIRE(j["violations"][0]["rule"] ==
            nlohmann::json({"oncreate", "permission", "RECORD_AUDIO"}));
    REQUIRE(j["violations"][0]["witness"] ==
            nlohmann::json({"Recorder.onCreate"}));
    REQUIRE_FALSE(j["violations"][1].contains("witness"));
}
