#include "hdrv/manifest.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hdrv/errors.hpp"
#include "hdrv/image_io.hpp"

namespace hdrv::manifest {
namespace fs = std::filesystem;
using nlohmann::json;

datagen::ExposureSchedule SequenceEntry::schedule() const {
  datagen::ExposureSchedule s{period, exposures};
  s.validate();
  return s;
}

const SequenceEntry& Manifest::sequence(const std::string& name) const {
  for (const auto& s : sequences) {
    if (s.name == name) return s;
  }
  throw DataError("manifest has no sequence named '" + name + "'");
}

std::string to_json_string(const Manifest& m) {
  json doc;
  doc["schema_version"] = m.schema_version;
  doc["sequences"] = json::array();
  for (const auto& s : m.sequences) {
    json js;
    js["name"] = s.name;
    js["period"] = s.period;
    js["exposures"] = s.exposures;
    js["gamma"] = s.gamma;
    js["frames"] = json::array();
    for (const auto& f : s.frames) {
      json jf{{"index", f.index}, {"ldr", f.ldr}, {"exposure", f.exposure}};
      if (!f.hdr.empty()) jf["hdr"] = f.hdr;
      js["frames"].push_back(jf);
    }
    js["pairs"] = json::array();
    for (const auto& p : s.pairs) js["pairs"].push_back({{"center", p.center}, {"stride", p.stride}});
    doc["sequences"].push_back(js);
  }
  return doc.dump(2);
}

Manifest from_json_string(const std::string& text, const fs::path& root) {
  Manifest m;
  m.root = root;
  try {
    const json doc = json::parse(text);
    m.schema_version = doc.at("schema_version").get<int>();
    if (m.schema_version != kSchemaVersion) {
      throw DataError("unsupported manifest schema_version " + std::to_string(m.schema_version));
    }
    for (const auto& js : doc.at("sequences")) {
      SequenceEntry s;
      s.name = js.at("name").get<std::string>();
      s.period = js.at("period").get<int>();
      s.exposures = js.at("exposures").get<std::vector<double>>();
      s.gamma = js.value("gamma", kDefaultGamma);
      for (const auto& jf : js.at("frames")) {
        s.frames.push_back({jf.at("index").get<int>(), jf.at("ldr").get<std::string>(),
                            jf.at("exposure").get<double>(), jf.value("hdr", std::string())});
      }
      for (const auto& jp : js.value("pairs", json::array())) {
        s.pairs.push_back({jp.at("center").get<int>(), jp.value("stride", 1)});
      }
      try {
        s.schedule();
      } catch (const InvalidArgument& e) {
        throw DataError("sequence '" + s.name + "': " + e.what());
      }
      for (std::size_t i = 0; i < s.frames.size(); ++i) {
        if (s.frames[i].index != static_cast<int>(i)) {
          throw DataError("sequence '" + s.name + "': frame indices must be 0..n-1 in order");
        }
      }
      m.sequences.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed manifest: ") + e.what());
  }
  return m;
}

Manifest load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string() + ": cannot open manifest");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_string(ss.str(), path.parent_path());
}

void save(const Manifest& manifest, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError(path.string() + ": cannot write manifest");
  out << to_json_string(manifest) << "\n";
}

datagen::LdrSequence load_sequence(const Manifest& manifest, const SequenceEntry& seq) {
  datagen::LdrSequence out{{}, seq.schedule()};
  for (const auto& f : seq.frames) {
    out.frames.push_back({io::read_frame(manifest.root / f.ldr), f.exposure, seq.gamma});
  }
  try {
    out.validate();
  } catch (const InvalidArgument& e) {
    throw DataError("sequence '" + seq.name + "': " + e.what());
  }
  return out;
}

datagen::LdrsHdrPair load_pair(const Manifest& manifest, const SequenceEntry& seq,
                               const PairEntry& pair) {
  const auto schedule = seq.schedule();
  const auto idx = datagen::window_indices(pair.center, pair.stride, schedule.pair_half_width());
  if (idx.front() < 0 || idx.back() >= static_cast<int>(seq.frames.size())) {
    throw DataError("sequence '" + seq.name + "': pair centered at " + std::to_string(pair.center) +
                    " leaves the sequence");
  }
  const auto& center = seq.frames[pair.center];
  if (center.hdr.empty()) {
    throw DataError("sequence '" + seq.name + "': pair center has no ground truth");
  }
  datagen::LdrsHdrPair out;
  for (int i : idx) {
    const auto& f = seq.frames[i];
    out.inputs.push_back({io::read_frame(manifest.root / f.ldr), f.exposure, seq.gamma});
  }
  out.target.pixels = io::read_frame(manifest.root / center.hdr);
  out.reference_role = schedule.role_at(pair.center);
  out.period = seq.period;
  out.stride = pair.stride;
  out.source_indices = idx;
  return out;
}

}  // namespace hdrv::manifest
