#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "irtvuong/data.hpp"
#include "irtvuong/estimation.hpp"
#include "irtvuong/models.hpp"
#include "irtvuong/nesting.hpp"
#include "irtvuong/simgen.hpp"
#include "irtvuong/vuong.hpp"

namespace irtvuong {

using json = nlohmann::json;

// Model spec documents. A bare string is a family name with default
// constraints. An object may carry:
//   family, n_dims, label, guessing
//   slopes: [{items: [1, 2] | "all", dim: 1, fixed: v | equal: id | free: true}, ...]
//     (items and dim are 1-based; entries are applied in order)
//   latent: "identity" | "free_variance" | {type: "correlation", matrix: [[...]]}
//   categories: [K_1, ...] (must match the shape when one is given)
ModelSpec spec_from_json(const json& doc, const DataShape& shape);
ModelSpec spec_from_json(const json& doc);  // needs `categories`
json spec_to_json(const ModelSpec& spec);

// Resolves a command-line model argument: a path to a JSON file, an inline
// JSON document, or a bare family name.
ModelSpec load_spec(const std::string& arg, const DataShape& shape);

json to_json(const EmConfig& config);
EmConfig em_config_from_json(const json& doc, EmConfig base = {});
json to_json(const FittedModel& fit);
json to_json(const NestingVerdict& verdict);
json to_json(const DistinguishabilityResult& r);
json to_json(const VuongResult& r);
json to_json(const NestedTestResult& r);
json to_json(const LrtResult& r);

json to_json(const GeneratorSpec& g);
GeneratorSpec generator_from_json(const json& doc, GeneratorSpec base = {});
json to_json(const SimDesign& design);
// Design documents start from `preset` when present; every other field
// overrides it. Keys: name, preset, generator, N, J, replications, seed,
// threads, alpha, model_a, model_b, em.
SimDesign design_from_json(const json& doc);
json to_json(const RepRecord& rec);
json to_json(const SimRates& rates);
json to_json(const SimReport& report);

json read_json_file(const std::string& path);

}  // namespace irtvuong
