#pragma once

// JSON serialization of model instances. Field order is canonical (sites, a,
// blocks, disorder, omega); complex entries are [re, im] pairs. Doubles round
// trip exactly through the shortest-representation printer, so a saved model
// reloads bit-identically.

#include <string>

#include "json.hpp"
#include "specmult/operator_model.hpp"

namespace specmult {

using ojson = nlohmann::ordered_json;

ojson model_to_json(const ModelInstance& model);

// Strict parse: unknown fields are rejected with their path, the background
// and every block matrix must be exactly Hermitian, supports ascending and in
// range. Blocks are rebuilt through make_block, so ranks and block bases come
// out identical to the original construction.
ModelInstance model_from_json(const ojson& j);

void save_model(const ModelInstance& model, const std::string& path);
ModelInstance load_model(const std::string& path);

}  // namespace specmult
