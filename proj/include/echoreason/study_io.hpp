#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "echoreason/domain.hpp"
#include "echoreason/text.hpp"

namespace echoreason {

inline constexpr std::string_view kStudySchema = "echostudy/1";
inline constexpr std::string_view kDatasetSchema = "echodataset/1";

// Pixel payloads are not embedded: `pixel_path` names a sibling raw file
// (frame_count * height * width grayscale bytes) relative to the document.
json study_to_json(const EchoStudy& study, const std::string& pixel_path = {});
EchoStudy study_from_json(const json& doc);

// Writes <dir>/<study_id>.json and, when the study has pixels,
// <dir>/<study_id>.u8. Returns the document path.
std::filesystem::path write_study(const EchoStudy& study, const std::filesystem::path& dir);
EchoStudy read_study(const std::filesystem::path& document);

// Read-only set of studies keyed by id, loaded from a dataset directory
// (manifest.json + one document per study).
class StudyCatalog {
 public:
  StudyCatalog() = default;
  explicit StudyCatalog(std::vector<EchoStudy> studies);

  static StudyCatalog load(const std::filesystem::path& dataset_dir);

  const EchoStudy* find(const std::string& study_id) const;
  std::vector<std::string> ids() const;
  std::size_t size() const noexcept { return studies_.size(); }

 private:
  std::map<std::string, EchoStudy> studies_;
};

}  // namespace echoreason
