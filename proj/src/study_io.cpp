#include "echoreason/study_io.hpp"

#include <fstream>
#include <iterator>

#include "echoreason/error.hpp"

namespace echoreason {

namespace fs = std::filesystem;

namespace {

template <typename T>
T require(const json& doc, const char* key) {
  if (!doc.contains(key)) throw Error(Errc::FormatError, std::string("missing field '") + key + "'");
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(Errc::FormatError, std::string("field '") + key + "': " + e.what());
  }
}

Kind require_kind(const std::string& name) {
  auto k = parse_kind(name);
  if (!k) throw Error(Errc::FormatError, "unknown measurement kind '" + name + "'");
  return *k;
}

}  // namespace

json study_to_json(const EchoStudy& study, const std::string& pixel_path) {
  json values = json::object();
  for (const auto& [kind, v] : study.cycle.values) {
    values[std::string(kind_name(kind))] = {{"ed_cm", v.ed_cm}, {"es_cm", v.es_cm}};
  }
  json visible = json::array();
  for (const auto& k : measurement_kinds()) {
    if (study.quality.visible.test(kind_index(k.kind))) visible.push_back(std::string(k.name));
  }
  json degraded = json::array();
  for (const auto& w : study.quality.degraded) {
    json kinds = json::array();
    for (Kind k : w.kinds) kinds.push_back(std::string(kind_name(k)));
    degraded.push_back({{"begin_frame", w.begin_frame}, {"end_frame", w.end_frame}, {"kinds", kinds}});
  }
  return {
      {"schema", kStudySchema},
      {"study_id", study.study_id},
      {"view", std::string(view_name(study.view))},
      {"frame_count", study.frame_count},
      {"frame_rate", study.frame_rate},
      {"pixel_scale_cm", study.pixel_scale},
      {"height", study.height},
      {"width", study.width},
      {"cycle",
       {{"period_frames", study.cycle.period_frames},
        {"phase_offset_frames", study.cycle.phase_offset_frames},
        {"values", values}}},
      {"quality", {{"visible", visible}, {"degraded", degraded}}},
      {"pixels", pixel_path.empty() ? json(nullptr) : json(pixel_path)},
  };
}

EchoStudy study_from_json(const json& doc) {
  if (!doc.is_object()) throw Error(Errc::FormatError, "study document is not an object");
  const auto schema = require<std::string>(doc, "schema");
  if (schema != kStudySchema) throw Error(Errc::FormatError, "unsupported study schema '" + schema + "'");

  EchoStudy s;
  s.study_id = require<std::string>(doc, "study_id");
  const auto view = require<std::string>(doc, "view");
  auto v = parse_view(view);
  if (!v) throw Error(Errc::FormatError, "unknown view '" + view + "'");
  s.view = *v;
  s.frame_count = require<int>(doc, "frame_count");
  s.frame_rate = require<double>(doc, "frame_rate");
  s.pixel_scale = require<double>(doc, "pixel_scale_cm");
  s.height = require<int>(doc, "height");
  s.width = require<int>(doc, "width");

  const auto cycle = require<json>(doc, "cycle");
  s.cycle.period_frames = require<int>(cycle, "period_frames");
  s.cycle.phase_offset_frames = require<int>(cycle, "phase_offset_frames");
  const auto values = require<json>(cycle, "values");
  for (const auto& [name, pv] : values.items()) {
    s.cycle.values[require_kind(name)] = {require<double>(pv, "ed_cm"), require<double>(pv, "es_cm")};
  }

  const auto quality = require<json>(doc, "quality");
  for (const auto& name : require<std::vector<std::string>>(quality, "visible")) {
    s.quality.visible.set(kind_index(require_kind(name)));
  }
  for (const auto& w : require<json>(quality, "degraded")) {
    DegradedWindow window;
    window.begin_frame = require<int>(w, "begin_frame");
    window.end_frame = require<int>(w, "end_frame");
    for (const auto& name : require<std::vector<std::string>>(w, "kinds")) {
      window.kinds.push_back(require_kind(name));
    }
    s.quality.degraded.push_back(std::move(window));
  }
  return s;
}

fs::path write_study(const EchoStudy& study, const fs::path& dir) {
  fs::create_directories(dir);
  std::string pixel_file;
  if (study.has_pixels()) {
    pixel_file = study.study_id + ".u8";
    std::ofstream out(dir / pixel_file, std::ios::binary);
    out.write(reinterpret_cast<const char*>(study.pixels->data()),
              static_cast<std::streamsize>(study.pixels->size()));
    if (!out) throw Error(Errc::IoError, "cannot write " + (dir / pixel_file).string());
  }
  const fs::path doc_path = dir / (study.study_id + ".json");
  std::ofstream out(doc_path);
  out << dump_json(study_to_json(study, pixel_file), 2) << '\n';
  if (!out) throw Error(Errc::IoError, "cannot write " + doc_path.string());
  return doc_path;
}

EchoStudy read_study(const fs::path& document) {
  std::ifstream in(document);
  if (!in) throw Error(Errc::IoError, "cannot open " + document.string());
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw Error(Errc::FormatError, "invalid JSON in " + document.string());
  EchoStudy study = study_from_json(doc);

  if (doc.contains("pixels") && doc["pixels"].is_string()) {
    const fs::path pixel_path = document.parent_path() / doc["pixels"].get<std::string>();
    std::ifstream raw(pixel_path, std::ios::binary);
    if (!raw) throw Error(Errc::IoError, "cannot open pixel payload " + pixel_path.string());
    auto bytes = std::make_shared<std::vector<std::uint8_t>>(std::istreambuf_iterator<char>(raw),
                                                             std::istreambuf_iterator<char>());
    const auto expected = static_cast<std::size_t>(study.frame_count) *
                          static_cast<std::size_t>(study.height) * static_cast<std::size_t>(study.width);
    if (bytes->size() != expected) throw Error(Errc::FormatError, "pixel payload size mismatch");
    study.pixels = std::move(bytes);
  }
  return study;
}

StudyCatalog::StudyCatalog(std::vector<EchoStudy> studies) {
  for (auto& s : studies) {
    auto id = s.study_id;
    studies_.insert_or_assign(std::move(id), std::move(s));
  }
}

StudyCatalog StudyCatalog::load(const fs::path& dataset_dir) {
  std::ifstream in(dataset_dir / "manifest.json");
  if (!in) throw Error(Errc::IoError, "no manifest.json in " + dataset_dir.string());
  json manifest = json::parse(in, nullptr, false);
  if (manifest.is_discarded() || manifest.value("schema", "") != kDatasetSchema) {
    throw Error(Errc::FormatError, "invalid dataset manifest in " + dataset_dir.string());
  }
  std::vector<EchoStudy> studies;
  for (const auto& entry : manifest.at("studies")) {
    studies.push_back(read_study(dataset_dir / entry.at("path").get<std::string>()));
  }
  return StudyCatalog(std::move(studies));
}

const EchoStudy* StudyCatalog::find(const std::string& study_id) const {
  const auto it = studies_.find(study_id);
  return it == studies_.end() ? nullptr : &it->second;
}

std::vector<std::string> StudyCatalog::ids() const {
  std::vector<std::string> out;
  out.reserve(studies_.size());
  for (const auto& [id, _] : studies_) out.push_back(id);
  return out;
}

}  // namespace echoreason
