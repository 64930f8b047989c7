#pragma once

// JSON encoding of the on-disk dataset format (manifest.json and frames.jsonl).

#include "wristloc/synthworld.hpp"

#include <json.hpp>

namespace wristloc::synth {

using ordered_json = nlohmann::ordered_json;

ordered_json frame_to_json(const FrameMeta& frame);
/// Throws SchemaError naming the first missing or malformed field.
FrameMeta frame_from_json(const nlohmann::json& row);

ordered_json manifest_to_json(const DatasetManifest& manifest);
/// Throws VersionError for any format_version other than "1", SchemaError
/// for malformed content. The returned manifest has no in-memory frames.
DatasetManifest manifest_from_json(const nlohmann::json& doc);

ordered_json camera_to_json(const CameraModel& cam);
CameraModel camera_from_json(const nlohmann::json& doc);

}  // namespace wristloc::synth
