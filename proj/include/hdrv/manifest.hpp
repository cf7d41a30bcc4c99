#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "hdrv/datagen.hpp"

namespace hdrv::manifest {

inline constexpr int kSchemaVersion = 1;

struct FrameEntry {
  int index = 0;
  std::string ldr;       // relative to the manifest directory
  double exposure = 1.0;
  std::string hdr;       // optional ground truth, relative path or empty
};

struct PairEntry {
  int center = 0;
  int stride = 1;
};

struct SequenceEntry {
  std::string name;
  int period = 2;
  std::vector<double> exposures;
  double gamma = kDefaultGamma;
  std::vector<FrameEntry> frames;
  std::vector<PairEntry> pairs;

  datagen::ExposureSchedule schedule() const;
};

struct Manifest {
  int schema_version = kSchemaVersion;
  std::vector<SequenceEntry> sequences;
  std::filesystem::path root;  // directory relative paths resolve against

  const SequenceEntry& sequence(const std::string& name) const;
};

// Throws DataError on schema violations and IoError on unreadable files.
Manifest load(const std::filesystem::path& path);
void save(const Manifest& manifest, const std::filesystem::path& path);

std::string to_json_string(const Manifest& manifest);
Manifest from_json_string(const std::string& text, const std::filesystem::path& root);

// Loads every LDR frame of a sequence (exposures from the manifest).
datagen::LdrSequence load_sequence(const Manifest& manifest, const SequenceEntry& seq);
// Loads the pair's window frames and its center ground truth.
datagen::LdrsHdrPair load_pair(const Manifest& manifest, const SequenceEntry& seq,
                               const PairEntry& pair);

}  // namespace hdrv::manifest
