#pragma once

#include <cstdint>
#include <filesystem>

#include "scenefit/scene.hpp"

namespace scenefit {

// Synthetic-scene recipe: a room drawn from the given ranges, object_count
// boxes rejection-sampled onto the floor without collisions, optionally a
// human standing on the floor with its palm touching object 0, exact 2D
// evidence by forward projection, and initial estimates perturbed by the
// sigmas (Gaussian per box coordinate; the body translation moves by exactly
// sigma_body_translation in a random direction).
struct SynthSpec {
    struct Range {
        double lo = 0, hi = 0;
    };

    int object_count = 3;
    Range room_width{4.0, 7.0};    // meters, x extent
    Range room_depth{4.0, 7.0};    // meters, z extent
    Range room_height{2.6, 3.2};   // meters, y extent
    double sigma_centroid = 0.2;   // meters
    double sigma_size = 0.05;      // meters
    double sigma_yaw = 0.1;        // radians
    double sigma_body_translation = 0.5;  // meters
    bool include_human = true;

    void validate() const;  // throws InvalidArgument
};

struct SynthResult {
    SceneDocument init;  // perturbed estimates, same evidence
    SceneDocument gt;
};

// Generates a scene deterministically from the seed. Mesh assets (the object
// cube and the body template) are written into asset_dir, and both documents
// reference them there. Ground truth is verified collision-free and
// floor-seated before returning; placement gives up with PlacementFailed
// after 10^4 rejected attempts.
SynthResult synth_scene(std::uint64_t seed, const SynthSpec& spec,
                        const std::filesystem::path& asset_dir);

}  // namespace scenefit
