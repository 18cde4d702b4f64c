#ifndef SPAG_REGISTRY_HPP
#define SPAG_REGISTRY_HPP

#include <string>
#include <vector>

#include "spag/model.hpp"

namespace spag {

// Names of the models that ship with the library.
const std::vector<std::string>& fixture_names();

// Builds a bundled model by name; throws ValidationError for unknown names.
GameModel make_fixture(const std::string& name);

// Accepts either a bundled fixture name or a path to a model file.
GameModel load_model(const std::string& path_or_name);

}  // namespace spag

#endif  // SPAG_REGISTRY_HPP
