#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "vgse/types.hpp"

namespace vgse {

// Image records live in `<stem>.jsonl`; class records in the companion
// `<stem>.classes.jsonl` next to it.
std::filesystem::path companion_classes_path(const std::filesystem::path& manifest);

DatasetManifest load_manifest(const std::filesystem::path& images_path);
DatasetManifest load_manifest(const std::filesystem::path& images_path,
                              const std::filesystem::path& classes_path);

// Class records only. Class ids follow line order.
std::vector<ClassRecord> load_class_records(const std::filesystem::path& path);

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& images_path);

// Replaces every class's word embedding with the vector of the same class
// name in `knowledge`. Used to swap the external knowledge source.
DatasetManifest with_knowledge(const DatasetManifest& manifest,
                               const std::vector<ClassRecord>& knowledge);

}  // namespace vgse
