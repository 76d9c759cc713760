#pragma once

#include <json.hpp>

#include <span>
#include <string>
#include <vector>

namespace huapa::cli {

// Per-sentence min-max scaling to [0, 1] for shading. A sentence whose
// weights are all equal (including a single word) renders at full
// intensity.
std::vector<double> display_intensity(std::span<const double> weights);

// Standalone HTML page for one attention record: the user view above the
// product view, each word shaded by its scaled weight and each sentence
// prefixed by a bar showing its sentence-level weight.
std::string render_attention_page(const nlohmann::json& record);

}  // namespace huapa::cli
