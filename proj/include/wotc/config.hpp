#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "wotc/model.hpp"

namespace wotc {

// Malformed document: syntax, missing keys, wrong types.
struct config_parse_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Well-formed document describing an invalid scenario.
struct config_invariant_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A parsed scenario document. The aggregated population groups are kept (in
// F, C, U order) when the document used the `types` form, so sweeps can
// rescale them.
struct ScenarioConfig {
    std::string id;
    Scenario scenario;
    long long trials = 1000;
    std::uint64_t seed = 0;
    std::vector<std::pair<UtilityTable, int>> groups;  // empty for explicit agent lists
    bool aggregated = false;
};

namespace detail {

inline UtilityTable parse_utility(const nlohmann::json& j, const std::string& path) {
    try {
        const std::vector<double> accept = j.at("accept").get<std::vector<double>>();
        const std::vector<double> reject = j.at("reject").get<std::vector<double>>();
        std::vector<int> ai, ri;
        for (double v : accept) {
            if (v != static_cast<int>(v)) {
                throw config_invariant_error(path + ": utilities must be integers");
            }
            ai.push_back(static_cast<int>(v));
        }
        for (double v : reject) {
            if (v != static_cast<int>(v)) {
                throw config_invariant_error(path + ": utilities must be integers");
            }
            ri.push_back(static_cast<int>(v));
        }
        int bound = 0;
        if (j.contains("bound")) {
            bound = j.at("bound").get<int>();
        } else {
            for (int v : ai) bound = std::max(bound, v);
            for (int v : ri) bound = std::max(bound, v);
        }
        try {
            return UtilityTable(std::move(ai), std::move(ri), bound);
        } catch (const std::invalid_argument& e) {
            throw config_invariant_error(path + ": " + e.what());
        }
    } catch (const nlohmann::json::exception& e) {
        throw config_parse_error(path + ": " + e.what());
    }
}

inline nlohmann::json utility_to_json(const UtilityTable& t) {
    return {{"accept", t.value_accept}, {"reject", t.value_reject}, {"bound", t.bound}};
}

}  // namespace detail

inline ScenarioConfig parse_config(const nlohmann::json& doc, const std::string& default_id) {
    ScenarioConfig cfg;
    std::vector<AgentType> declared_types;  // per aggregated group
    try {
        cfg.id = doc.contains("id") ? doc.at("id").get<std::string>() : default_id;
        const std::vector<double> prior = doc.at("worlds").at("prior").get<std::vector<double>>();
        const auto likelihood =
            doc.at("signals").at("likelihood").get<std::vector<std::vector<double>>>();
        try {
            cfg.scenario.model = SignalModel(prior, likelihood);
        } catch (const std::invalid_argument& e) {
            throw config_invariant_error(std::string("signals.likelihood: ") + e.what());
        }

        const nlohmann::json& pop = doc.at("population");
        std::vector<UtilityTable> agents;
        if (pop.contains("agents")) {
            size_t i = 0;
            for (const nlohmann::json& a : pop.at("agents")) {
                agents.push_back(detail::parse_utility(a, "population.agents[" + std::to_string(i) + "]"));
                ++i;
            }
        } else if (pop.contains("types")) {
            const nlohmann::json& types = pop.at("types");
            cfg.aggregated = true;
            const std::pair<const char*, AgentType> keys[] = {
                {"F", AgentType::Friendly}, {"C", AgentType::Contingent}, {"U", AgentType::Unfriendly}};
            for (const auto& [key, type] : keys) {
                if (!types.contains(key)) continue;
                const nlohmann::json& block = types.at(key);
                const int count = block.at("count").get<int>();
                if (count < 0) {
                    throw config_invariant_error(std::string("population.types.") + key +
                                                 ".count: must be non-negative");
                }
                if (count == 0) continue;
                UtilityTable table =
                    detail::parse_utility(block.at("utility"), std::string("population.types.") + key);
                cfg.groups.emplace_back(std::move(table), count);
                declared_types.push_back(type);
            }
            for (const auto& [table, count] : cfg.groups) {
                for (int i = 0; i < count; ++i) agents.push_back(table);
            }
        } else {
            throw config_parse_error("population: needs either `agents` or `types`");
        }
        try {
            cfg.scenario.population = Population(std::move(agents));
        } catch (const std::invalid_argument& e) {
            throw config_invariant_error(std::string("population: ") + e.what());
        }

        const std::string mech = doc.at("mechanism").get<std::string>();
        const std::optional<MechanismId> id = mechanism_from_string(mech);
        if (!id) throw config_invariant_error("mechanism: unknown mechanism `" + mech + "`");
        cfg.scenario.mechanism = *id;
        if (doc.contains("tau")) cfg.scenario.tau = doc.at("tau").get<double>();
        if (doc.contains("binarize_cut")) cfg.scenario.binarize_cut = doc.at("binarize_cut").get<double>();
        if (doc.contains("seed")) cfg.seed = doc.at("seed").get<std::uint64_t>();
        if (doc.contains("trials")) {
            cfg.trials = doc.at("trials").get<long long>();
            if (cfg.trials < 1) throw config_invariant_error("trials: must be >= 1");
        }
    } catch (const nlohmann::json::exception& e) {
        throw config_parse_error(e.what());
    }

    const std::vector<Violation> violations = validate_scenario(cfg.scenario);
    if (!violations.empty()) {
        std::string msg;
        for (const Violation& v : violations) {
            if (!msg.empty()) msg += "; ";
            // key-path prefixes for the two structured sections
            std::string prefix;
            if (v.code == "column sum" || v.code == "positive correlation" ||
                v.code == "likelihood range") {
                prefix = "signals.likelihood: ";
            } else if (v.code == "prior sum" || v.code == "prior positivity") {
                prefix = "worlds.prior: ";
            }
            msg += prefix + v.code + " (" + v.detail + ")";
        }
        throw config_invariant_error(msg);
    }
    if (cfg.aggregated) {
        // each declared type key must match the classification its table
        // actually gets under the assembled population
        size_t agent_index = 0;
        for (size_t g = 0; g < cfg.groups.size(); ++g) {
            const AgentType derived = cfg.scenario.population.types[agent_index];
            if (derived != declared_types[g]) {
                throw config_invariant_error(std::string("population.types.") +
                                             to_string(declared_types[g]) +
                                             ": representative table classifies as " +
                                             to_string(derived));
            }
            agent_index += static_cast<size_t>(cfg.groups[g].second);
        }
    }
    return cfg;
}

// Loads and validates a scenario document from disk.
inline ScenarioConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_parse_error("cannot open " + path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw config_parse_error(e.what());
    }
    std::string stem = path;
    if (const size_t slash = stem.find_last_of('/'); slash != std::string::npos) {
        stem = stem.substr(slash + 1);
    }
    if (const size_t dot = stem.find_last_of('.'); dot != std::string::npos) {
        stem = stem.substr(0, dot);
    }
    return parse_config(doc, stem);
}

// Canonical serialization (explicit agent list); parse(to_json(parse(doc)))
// is semantically the same scenario as parse(doc).
inline nlohmann::json to_json(const ScenarioConfig& cfg) {
    nlohmann::json doc;
    doc["id"] = cfg.id;
    doc["worlds"] = {{"prior", cfg.scenario.model.prior}};
    doc["signals"] = {{"likelihood", cfg.scenario.model.likelihood}};
    nlohmann::json agents = nlohmann::json::array();
    for (const UtilityTable& t : cfg.scenario.population.agents) {
        agents.push_back(detail::utility_to_json(t));
    }
    doc["population"] = {{"agents", agents}};
    doc["mechanism"] = to_string(cfg.scenario.mechanism);
    if (cfg.scenario.tau) doc["tau"] = *cfg.scenario.tau;
    if (cfg.scenario.binarize_cut) doc["binarize_cut"] = *cfg.scenario.binarize_cut;
    doc["seed"] = cfg.seed;
    doc["trials"] = cfg.trials;
    return doc;
}

// ---- results rows ----------------------------------------------------------

inline constexpr const char* kResultsCsvHeader =
    "scenario_id,mechanism,T,world,trials,lambda_A,stderr,error_rate_I,theorem2_bound,"
    "majority_wish,seed";
inline constexpr int kResultsSchemaVersion = 1;

struct ResultsRow {
    std::string scenario_id;
    std::string mechanism;
    int t = 0;
    int world = 0;  // 1-based in the file
    long long trials = 0;
    double lambda_accept = 0.0;
    double standard_error = 0.0;
    double error_rate = 0.0;
    std::optional<double> theorem2_bound;
    std::string majority_wish;
    std::uint64_t seed = 0;
};

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

inline void write_results_csv(std::ostream& out, const std::vector<ResultsRow>& rows) {
    out << kResultsCsvHeader << "\n";
    for (const ResultsRow& r : rows) {
        out << r.scenario_id << ',' << r.mechanism << ',' << r.t << ',' << r.world << ','
            << r.trials << ',' << format_double(r.lambda_accept) << ','
            << format_double(r.standard_error) << ',' << format_double(r.error_rate) << ','
            << (r.theorem2_bound ? format_double(*r.theorem2_bound) : std::string{}) << ','
            << r.majority_wish << ',' << r.seed << "\n";
    }
}

}  // namespace wotc
