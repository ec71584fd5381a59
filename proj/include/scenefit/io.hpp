#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "scenefit/metrics.hpp"
#include "scenefit/optim.hpp"
#include "scenefit/scene.hpp"
#include "scenefit/synth.hpp"

namespace scenefit {

// Scene files are JSON with schema tag "scenefit/1"; lengths are meters and
// image-plane quantities pixels. Mesh and template paths are stored relative
// to the scene file. Loading validates the full document: meshes are read,
// normalized to the unit cube, and checked watertight; keypoint counts must
// match the template's keypoint map. Throws SchemaError naming the offending
// field path, ParseError, NotWatertight or IoError.
SceneDocument load_scene(const std::filesystem::path& path);

// Writes a document loadable by load_scene; load(save(x)) reproduces every
// number exactly. Mesh files are not copied; references are rewritten
// relative to the destination.
void save_scene(const SceneDocument& doc, const std::filesystem::path& path);

// A copy of the document carrying the given parameters.
SceneDocument apply_params(SceneDocument doc, const SceneParams& params);

// Writes placed object meshes, the posed body (when present) and the layout
// box to dir as OBJ files plus a manifest.json listing them.
void export_meshes(const SceneDocument& doc, const SceneParams& params,
                   const std::filesystem::path& dir);

// Optimization settings as JSON; every field is optional and defaults to the
// built-in schedule. Unknown keys are rejected to catch typos.
RunConfig load_config(const std::filesystem::path& path);

// One JSON object per line: stage, iteration, loss terms, step size.
void write_trajectory(std::span<const TrajectoryEntry> trajectory, const std::filesystem::path& path);

// The loss terms as a pretty-printed JSON object.
std::string breakdown_to_json(const LossBreakdown& terms);

// Synthetic-scene recipe as JSON; every field optional, unknown keys rejected.
SynthSpec load_synth_spec(const std::filesystem::path& path);

// Explicit object matching for `evaluate`: JSON list of [pred, gt] pairs.
std::vector<std::pair<int, int>> load_matching(const std::filesystem::path& path);

std::string report_to_json(const EvalReport& report);

}  // namespace scenefit
