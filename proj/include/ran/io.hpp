#pragma once

#include "ran/metrics.hpp"
#include "ran/volume.hpp"

#include <filesystem>
#include <string>

namespace ran::io {

// Native format: raw little-endian samples next to a JSON sidecar.
// "x.json" <-> "x.raw"; volumes are f32, fields are f32 with kind "ddf",
// labels are i32 with kind "labels". Single-file little-endian NIfTI-1
// (.nii, float32 or uint8) is accepted for reading.

Volume read_volume(const std::filesystem::path& path);
DisplacementField read_field(const std::filesystem::path& path);
LabelVolume read_labels(const std::filesystem::path& path);

void write_volume(const std::filesystem::path& sidecar, const Volume& vol);
void write_field(const std::filesystem::path& sidecar, const DisplacementField& field);
void write_labels(const std::filesystem::path& sidecar, const LabelVolume& labels);

/// Temp-file-plus-rename write; partial outputs are never left behind.
void atomic_write_bytes(const std::filesystem::path& path, const void* data, size_t size);
void atomic_write_text(const std::filesystem::path& path, const std::string& text);

std::string fnv1a64_file(const std::filesystem::path& path);

/// The data file a sidecar path refers to (same base name, .raw).
std::filesystem::path raw_path_for(const std::filesystem::path& sidecar);

}  // namespace ran::io
