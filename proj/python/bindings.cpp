// Python bindings. JSON-shaped results cross the boundary as text and are decoded in the package.
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <json.hpp>

#include "cacherl/errors.hpp"
#include "cacherl/experiment.hpp"
#include "cacherl/mdp.hpp"
#include "cacherl/popularity.hpp"
#include "cacherl/two_tier.hpp"

namespace py = pybind11;
using namespace cacherl;
using nlohmann::json;

namespace {

ExperimentConfig config_from_text(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("<root>", e.what());
    }
    return parse_config(doc);
}

json record_to_json(const RunRecord& r) {
    json cols = json::object();
    for (std::size_t i = 0; i < r.policy_names.size(); ++i) cols[r.policy_names[i]] = r.policies[i];
    return {{"seed", r.seed}, {"cost", r.cost}, {"policies", cols}, {"summary", r.summary}};
}

ActionVector action_from_indices(std::size_t files, const std::vector<std::size_t>& cached) {
    return ActionVector::from_indices(files, cached);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Caching-policy simulator core";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

    m.def("preset_names", &preset_names);
    m.def("preset", [](const std::string& name) { return preset(name).dump(); });
    m.def("expand_config", [](const std::string& text) {
        const auto cfg = config_from_text(text);
        json doc = config_to_json(cfg);
        doc["config_hash"] = hash_hex(config_hash(cfg));
        return doc.dump();
    });
    m.def(
        "run",
        [](const std::string& text, unsigned threads) {
            const auto cfg = config_from_text(text);
            std::vector<RunRecord> records;
            {
                py::gil_scoped_release release;
                records = run_experiment(cfg, threads);
            }
            json out = json::array();
            for (const auto& r : records) out.push_back(record_to_json(r));
            return out.dump();
        },
        py::arg("config"), py::arg("threads") = 1);
    m.def(
        "run_to_dir",
        [](const std::string& text, const std::filesystem::path& dir, unsigned threads) {
            const auto cfg = config_from_text(text);
            py::gil_scoped_release release;
            return write_outputs(cfg, run_experiment(cfg, threads), dir);
        },
        py::arg("config"), py::arg("out_dir"), py::arg("threads") = 1);
    m.def(
        "compare",
        [](const std::vector<std::filesystem::path>& paths, const std::string& reference, std::size_t samples,
           std::uint64_t seed) {
            std::vector<RunRecord> records;
            std::vector<std::string> labels;
            for (const auto& p : paths) {
                records.push_back(read_csv(p));
                labels.push_back(p.stem().string());
            }
            auto result = compare_policies(records, labels, reference, samples, seed);
            return py::make_tuple(result.summary.dump(), result.cdf_csv);
        },
        py::arg("paths"), py::arg("reference") = "nocache", py::arg("samples") = 100, py::arg("seed") = 0);
    m.def(
        "oracle",
        [](const std::string& text, std::uint64_t seed) {
            const auto cfg = config_from_text(text);
            const auto problem = make_single_mdp(cfg, seed);
            const auto table = policy_iteration(problem.mdp);
            auto doc = value_table_to_json(problem, table);
            doc["bellman_residual"] = bellman_residual(problem.mdp, table.value, table.policy);
            return doc.dump();
        },
        py::arg("config"), py::arg("seed") = 1);

    m.def("zipf_profile", [](std::size_t files, double eta) { return zipf_profile(files, eta).vec(); });
    m.def(
        "random_chain",
        [](std::size_t states, std::size_t files, double eta_lo, double eta_hi, std::uint64_t seed) {
            Rng rng(seed);
            return chain_to_json(random_chain(states, files, eta_lo, eta_hi, rng)).dump();
        },
        py::arg("num_states"), py::arg("num_files"), py::arg("eta_lo"), py::arg("eta_hi"), py::arg("seed") = 0);
    m.def("top_m", [](const std::vector<double>& scores, std::size_t m) { return top_m_action(scores, m).indices(); });
    m.def("leaf_cost",
          [](std::size_t files, const std::vector<std::size_t>& leaf, const std::vector<std::uint32_t>& requests,
             const std::vector<std::size_t>& parent) {
              return leaf_cost(action_from_indices(files, leaf), requests, action_from_indices(files, parent));
          });
}
