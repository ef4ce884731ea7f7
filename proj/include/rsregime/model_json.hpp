#pragma once

#include <string>

#include "rsregime/market_model.hpp"

namespace rsr {

/// Parses a model from its JSON document. States are 1-based in files.
/// Throws ValidationError on schema problems; the result still has to pass
/// validate_model before use.
MarketModel model_from_json_text(const std::string& text);

/// Reads and parses a model file. Throws IoError when unreadable.
MarketModel load_model(const std::string& path);

}  // namespace rsr
