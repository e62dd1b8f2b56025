#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "stabledmd/hybrid_twin.hpp"

namespace stabledmd {

// Plain-text model document. Scalars are written with 17 significant digits
// so a save/load round trip is loss-free to the last bit. A non-empty
// coarse_source marks a hybrid-twin correction and names the coarse
// trajectory file the correction was built against.
struct ModelFile {
    ControlledLinearModel model;
    std::optional<ReducedControlledModel> reduced;
    std::string coarse_source;
};

void save_model(const ModelFile& file, const std::filesystem::path& path);

ModelFile load_model(const std::filesystem::path& path);

}  // namespace stabledmd
