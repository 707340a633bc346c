#pragma once

#include <iosfwd>
#include <string>

#include "json.hpp"
#include "polyformer/model.hpp"
#include "polyformer/network.hpp"
#include "polyformer/polynomial.hpp"
#include "polyformer/ridge.hpp"
#include "polyformer/training.hpp"

namespace polyformer {

// {"dim": d, "degree": q, "terms": [{"exp": [..], "coef": c}, ..]}
nlohmann::json polynomial_to_json(const Polynomial& p);
Polynomial polynomial_from_json(const nlohmann::json& j);

// {"dim", "degree", "seed", "xi": [[..], ..]}
nlohmann::json basis_to_json(const RidgeBasis& b);
RidgeBasis basis_from_json(const nlohmann::json& j);

// Dimensions, F row-major, per-block {s, C}, sparse beta triples, bias,
// input bound. Blocks are rebuilt from (s, C) on load.
nlohmann::json model_to_json(const TransformerModel& m);
TransformerModel model_from_json(const nlohmann::json& j);

// epoch,train_mse,test_mse,lr,seconds
void write_history_csv(const RunHistory& history, std::ostream& os);

// One JSON object per block: selection indices and power-slot values.
void write_trace_jsonl(const ForwardTrace& trace, std::ostream& os);

nlohmann::json load_json_file(const std::string& path);
void save_json_file(const std::string& path, const nlohmann::json& j);

}  // namespace polyformer
