#include "echoreason/echo_sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numeric>
#include <optional>

#include "echoreason/error.hpp"
#include "echoreason/reference_pack.hpp"
#include "echoreason/rng.hpp"
#include "echoreason/study_io.hpp"
#include "echoreason/text.hpp"

namespace echoreason {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kStudyStream = 0x5354554459ULL;
constexpr std::uint64_t kBenchStream = 0x42454e4348ULL;

double round_to(double v, double step) { return std::round(v / step) * step; }

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(Errc::ConfigError, what);
}

std::size_t pick_weighted(Rng& rng, std::span<const double> weights) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  double u = rng.uniform() * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (u < weights[i]) return i;
    u -= weights[i];
  }
  // Rounding can leave u just above the last bucket.
  for (std::size_t i = weights.size(); i-- > 0;) {
    if (weights[i] > 0.0) return i;
  }
  return 0;
}

std::vector<std::uint8_t> render_pixels(const EchoStudy& s) {
  const std::size_t plane = static_cast<std::size_t>(s.height) * static_cast<std::size_t>(s.width);
  std::vector<std::uint8_t> out(plane * static_cast<std::size_t>(s.frame_count));
  const double cx = s.width / 2.0;
  const double cy = s.height / 2.0;
  const double max_r = std::min(s.width, s.height) / 2.0 - 2.0;
  for (int t = 0; t < s.frame_count; ++t) {
    const double cavity = s.cycle.values.count(Kind::LVID) ? s.true_value(Kind::LVID, t) : 4.0;
    const double wall = s.cycle.values.count(Kind::IVS) ? s.true_value(Kind::IVS, t) : 1.0;
    const double inner = std::min(cavity / s.pixel_scale / 2.0, max_r);
    const double outer = std::min(inner + wall / s.pixel_scale, max_r + 2.0);
    auto* frame = out.data() + plane * static_cast<std::size_t>(t);
    for (int y = 0; y < s.height; ++y) {
      for (int x = 0; x < s.width; ++x) {
        const double r = std::hypot(x + 0.5 - cx, y + 0.5 - cy);
        std::uint8_t v = static_cast<std::uint8_t>(20 + (y * 20) / s.height);
        if (r >= inner && r < outer) v = 200;
        frame[static_cast<std::size_t>(y) * static_cast<std::size_t>(s.width) + static_cast<std::size_t>(x)] = v;
      }
    }
  }
  return out;
}

std::string study_id_for(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "study-%04d", index);
  return buf;
}

}  // namespace

void validate_config(const SimConfig& c) {
  require(c.study_count >= 0, "study_count must be non-negative");
  for (Kind k : evaluated_kinds()) {
    const auto it = c.value_ranges.find(k);
    const std::string name(kind_name(k));
    require(it != c.value_ranges.end(), "missing value range for " + name);
    const auto& r = it->second;
    require(r.ed_min > 0.0 && r.ed_min <= r.ed_max, "invalid ED range for " + name);
    require(r.ratio_min > 0.0 && r.ratio_min <= r.ratio_max, "invalid ES/ED ratio range for " + name);
    const auto cat = kind_info(k).category;
    require(cat != KindCategory::Cavity || r.ratio_max <= 1.0, "cavity " + name + " would have es > ed");
    require(cat != KindCategory::Wall || r.ratio_min >= 1.0, "wall " + name + " would have ed > es");
  }
  for (const auto& [k, _] : c.value_ranges) {
    require(kind_info(k).evaluated, "value range for non-evaluated kind " + std::string(kind_name(k)));
  }
  require(c.period_min >= 4 && c.period_min <= c.period_max, "period range must satisfy 4 <= min <= max");
  require((c.period_min + 1) / 2 <= c.period_max / 2, "period range contains no even period");
  require(c.cycles_min >= 1 && c.cycles_min <= c.cycles_max, "cycle count range invalid");
  require(c.frame_rate_min > 0.0 && c.frame_rate_min <= c.frame_rate_max, "frame rate range invalid");
  require(c.pixel_scale_min > 0.0 && c.pixel_scale_min <= c.pixel_scale_max, "pixel scale range invalid");
  for (double p : {c.invisible_probability, c.degraded_probability, c.degraded_first_ed_probability}) {
    require(p >= 0.0 && p <= 1.0, "probabilities must lie in [0, 1]");
  }
  double total = 0.0;
  for (double w : c.view_weights) {
    require(w >= 0.0, "view weights must be non-negative");
    total += w;
  }
  require(total > 0.0, "view weights sum to zero");
  require(!c.pixels || (c.pixel_height > 0 && c.pixel_width > 0), "pixel dimensions must be positive");
}

EchoStudy generate_study(const SimConfig& config, int study_index) {
  validate_config(config);
  Rng rng(derive_seed(config.seed, {kStudyStream, static_cast<std::uint64_t>(study_index)}));

  EchoStudy s;
  s.study_id = study_id_for(study_index);
  s.view = all_views()[pick_weighted(rng, config.view_weights)];
  const int period = 2 * static_cast<int>(rng.uniform_int((config.period_min + 1) / 2, config.period_max / 2));
  const int cycles = static_cast<int>(rng.uniform_int(config.cycles_min, config.cycles_max));
  s.frame_count = period * cycles;
  s.cycle.period_frames = period;
  s.cycle.phase_offset_frames = static_cast<int>(rng.uniform_int(0, period - 1));
  s.frame_rate = round_to(rng.uniform(config.frame_rate_min, config.frame_rate_max), 0.1);
  s.pixel_scale = round_to(rng.uniform(config.pixel_scale_min, config.pixel_scale_max), 1e-4);
  s.height = config.pixel_height;
  s.width = config.pixel_width;

  for (Kind k : evaluated_kinds()) {
    const auto& r = config.value_ranges.at(k);
    const double ed = round_to(rng.uniform(r.ed_min, r.ed_max), 0.01);
    const double es = round_to(ed * rng.uniform(r.ratio_min, r.ratio_max), 0.01);
    s.cycle.values[k] = {ed, es};
  }

  std::vector<Kind> present;
  for (Kind k : view_kinds(s.view)) {
    const bool visible = !rng.bernoulli(config.invisible_probability);
    s.quality.visible.set(kind_index(k), visible);
    if (visible) present.push_back(k);
  }

  const bool degraded = rng.bernoulli(config.degraded_probability);
  const bool at_first_ed = rng.bernoulli(config.degraded_first_ed_probability);
  const int length = static_cast<int>(rng.uniform_int(std::max(1, period / 4), std::max(1, period / 2)));
  const auto lead = rng.uniform_int(0, length - 1);
  const auto start = rng.uniform_int(0, s.frame_count - length);
  std::vector<Kind> hit;
  for (Kind k : present) {
    if (rng.bernoulli(0.5)) hit.push_back(k);
  }
  const auto fallback = rng.uniform_int(0, std::max<std::int64_t>(0, static_cast<std::int64_t>(present.size()) - 1));
  if (degraded && !present.empty()) {
    if (hit.empty()) hit.push_back(present[static_cast<std::size_t>(fallback)]);
    DegradedWindow w;
    w.begin_frame = at_first_ed ? std::max(0, s.cycle.phase_offset_frames - static_cast<int>(lead))
                                : static_cast<int>(start);
    w.end_frame = std::min(s.frame_count, w.begin_frame + length);
    w.kinds = std::move(hit);
    s.quality.degraded.push_back(std::move(w));
  }

  if (config.pixels) s.pixels = std::make_shared<const std::vector<std::uint8_t>>(render_pixels(s));
  return s;
}

std::vector<EchoStudy> generate_dataset(const SimConfig& config) {
  validate_config(config);
  std::vector<EchoStudy> studies;
  studies.reserve(static_cast<std::size_t>(config.study_count));
  for (int i = 0; i < config.study_count; ++i) studies.push_back(generate_study(config, i));
  return studies;
}

GroundTruth ground_truth(const EchoStudy& study) {
  GroundTruth gt;
  gt.ed_frames = study.key_frames(Phase::ED);
  gt.es_frames = study.key_frames(Phase::ES);
  gt.values = study.cycle.values;
  gt.feasibility.reserve(static_cast<std::size_t>(std::max(study.frame_count, 0)));
  for (int t = 0; t < study.frame_count; ++t) gt.feasibility.push_back(study.feasibility(t));
  return gt;
}

double ground_truth_measurement(const EchoStudy& study, Kind kind, Phase phase) {
  if (!study.kind_present(kind)) {
    throw Error(Errc::NotFeasible, std::string(kind_name(kind)) + " is not present in study " + study.study_id);
  }
  const auto it = study.cycle.values.find(kind);
  if (it == study.cycle.values.end()) {
    throw Error(Errc::UnsupportedKind, std::string(kind_name(kind)) + " has no ground-truth cycle");
  }
  return it->second.at(phase);
}

std::array<Point2, 2> caliper_endpoints(const EchoStudy& study, Kind kind, double value_cm) {
  if (!(study.pixel_scale > 0.0)) throw Error(Errc::InvalidScale, "pixel scale must be positive");
  const double length = value_cm / study.pixel_scale;
  // Spread kinds horizontally so overlays of several calipers stay readable.
  const double x = study.width * (0.2 + 0.6 * (static_cast<double>(kind_index(kind)) + 0.5) / kKindCount);
  const double cy = study.height / 2.0;
  return {Point2{x, cy - length / 2.0}, Point2{x, cy + length / 2.0}};
}

void write_dataset(const fs::path& dir, const std::vector<EchoStudy>& studies) {
  fs::create_directories(dir / "studies");
  json manifest = {{"schema", kDatasetSchema}, {"studies", json::array()}};
  for (const auto& s : studies) {
    write_study(s, dir / "studies");
    manifest["studies"].push_back({{"study_id", s.study_id}, {"path", "studies/" + s.study_id + ".json"}});
  }
  std::ofstream out(dir / "manifest.json");
  out << dump_json(manifest, 2) << "\n";
  if (!out) throw Error(Errc::IoError, "cannot write manifest in " + dir.string());
}

namespace {

std::vector<int> feasible_key_frames(const EchoStudy& s, Kind k, Phase p) {
  std::vector<int> out;
  for (int f : s.key_frames(p)) {
    if (s.feasibility(f).test(kind_index(k))) out.push_back(f);
  }
  return out;
}

bool answerable(const EchoStudy& s, Kind k, Phase p) {
  return kind_info(k).evaluated && s.kind_present(k) && !feasible_key_frames(s, k, p).empty();
}

std::string mention(Kind k) {
  return std::string(kind_info(k).description) + " (" + std::string(kind_name(k)) + ")";
}

GoldValue length_gold(const EchoStudy& s, Kind k, Phase p) {
  const double v = s.cycle.values.at(k).at(p);
  return {std::string(kind_name(k)) + "_" + to_lower(phase_name(p)), v, "cm", kLengthTolerance.for_value(v)};
}

std::string describe_gold(const GoldValue& g) {
  return g.name + " " + format_value(g.value) + (g.unit.empty() ? "" : " " + g.unit);
}

struct Draft {
  std::string question;
  GoldAnswer gold;
  Tolerance tolerance = kLengthTolerance;
  std::string notes;
};

constexpr std::string_view kClassify = "classify it as reduced, normal or increased.";

struct Template {
  std::string id;
  Difficulty difficulty;
  // Returns nothing when the study cannot host the template.
  std::function<std::optional<Draft>(const EchoStudy&, Rng&)> make;
};

std::optional<Kind> choose(Rng& rng, const std::vector<Kind>& kinds) {
  if (kinds.empty()) return std::nullopt;
  return kinds[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(kinds.size()) - 1))];
}

std::vector<Kind> kinds_where(const std::function<bool(Kind)>& pred) {
  std::vector<Kind> out;
  for (Kind k : evaluated_kinds()) {
    if (pred(k)) out.push_back(k);
  }
  return out;
}

std::optional<Draft> single(const EchoStudy& s, Rng& rng, Phase p) {
  const auto k = choose(rng, kinds_where([&](Kind k) { return answerable(s, k, p); }));
  if (!k) return std::nullopt;
  Draft d;
  d.question = "What is the " + mention(*k) + " at " + std::string(phase_long_name(p)) + "?";
  d.gold.values.push_back(length_gold(s, *k, p));
  d.gold.text = describe_gold(d.gold.values.front());
  return d;
}

// Relative distance past a reference bound that still counts as borderline.
constexpr double kBorderlineMargin = 0.15;

// Abnormal by the reference range but close to the violated bound, so the
// label hinges on the exact guideline threshold.
bool borderline_abnormal(double value, const ReferenceRange& range) {
  if (value > range.upper) return value <= range.upper * (1.0 + kBorderlineMargin);
  if (value < range.lower) return value >= range.lower * (1.0 - kBorderlineMargin);
  return false;
}

std::optional<Draft> threshold_case(const EchoStudy& s, Rng& rng) {
  const auto k = choose(rng, kinds_where([&](Kind k) {
    const auto range = find_reference_range(kind_name(k));
    return answerable(s, k, Phase::ED) && range && borderline_abnormal(s.cycle.values.at(k).ed_cm, *range);
  }));
  if (!k) return std::nullopt;
  const auto range = *find_reference_range(kind_name(*k));
  Draft d;
  d.question = "Is the " + mention(*k) + " at end-diastole within the normal range? Report the value and " +
               std::string(kClassify);
  d.gold.values.push_back(length_gold(s, *k, Phase::ED));
  d.gold.label = classify_value(d.gold.values.front().value, range.lower, range.upper);
  d.gold.label_set = interpretation_labels();
  d.gold.text = describe_gold(d.gold.values.front()) + " (" + *d.gold.label + ")";
  d.notes = "borderline value; label from reference range " + format_value(range.lower) + "-" +
            format_value(range.upper) + " cm";
  return d;
}

std::optional<Draft> ratio_case(const EchoStudy& s, Kind num, Phase num_phase, Kind den, Phase den_phase,
                                double factor, const std::string& quantity, const std::string& question,
                                const std::string& formula) {
  if (!answerable(s, num, num_phase) || !answerable(s, den, den_phase)) return std::nullopt;
  const double value = factor * s.cycle.values.at(num).at(num_phase) / s.cycle.values.at(den).at(den_phase);
  Draft d;
  d.question = question;
  d.tolerance = kRatioTolerance;
  d.gold.values.push_back({quantity, value, "", kRatioTolerance.for_value(value)});
  d.gold.text = quantity + " " + format_value(value);
  d.notes = quantity + " = " + formula;
  return d;
}

const std::vector<Template>& templates() {
  static const std::vector<Template> kTemplates{
      {"easy.single_ed", Difficulty::Easy, [](const EchoStudy& s, Rng& r) { return single(s, r, Phase::ED); }},
      {"easy.single_es", Difficulty::Easy, [](const EchoStudy& s, Rng& r) { return single(s, r, Phase::ES); }},
      // The first ED frame is degraded for the asked kind, so measuring there fails.
      {"easy.trap_ed", Difficulty::Easy,
       [](const EchoStudy& s, Rng& r) -> std::optional<Draft> {
         const auto ed = s.key_frames(Phase::ED);
         if (ed.empty()) return std::nullopt;
         const auto k = choose(r, kinds_where([&](Kind k) {
           return answerable(s, k, Phase::ED) && !s.feasibility(ed.front()).test(kind_index(k));
         }));
         if (!k) return std::nullopt;
         Draft d;
         d.question = "What is the " + mention(*k) + " at end-diastole?";
         d.gold.values.push_back(length_gold(s, *k, Phase::ED));
         d.gold.text = describe_gold(d.gold.values.front());
         d.notes = "first ED frame not measurable for " + std::string(kind_name(*k));
         return d;
       }},
      {"medium.pair_ed", Difficulty::Medium,
       [](const EchoStudy& s, Rng& r) -> std::optional<Draft> {
         auto kinds = kinds_where([&](Kind k) { return answerable(s, k, Phase::ED); });
         if (kinds.size() < 2) return std::nullopt;
         const auto first = static_cast<std::size_t>(r.uniform_int(0, static_cast<std::int64_t>(kinds.size()) - 1));
         auto second = static_cast<std::size_t>(r.uniform_int(0, static_cast<std::int64_t>(kinds.size()) - 2));
         if (second >= first) ++second;
         const Kind a = kinds[std::min(first, second)];
         const Kind b = kinds[std::max(first, second)];
         Draft d;
         d.question = "What are the " + mention(a) + " and the " + mention(b) + " at end-diastole?";
         d.gold.values = {length_gold(s, a, Phase::ED), length_gold(s, b, Phase::ED)};
         d.gold.text = describe_gold(d.gold.values[0]) + "; " + describe_gold(d.gold.values[1]);
         return d;
       }},
      {"medium.both_phases", Difficulty::Medium,
       [](const EchoStudy& s, Rng& r) -> std::optional<Draft> {
         const auto k = choose(r, kinds_where([&](Kind k) {
           return answerable(s, k, Phase::ED) && answerable(s, k, Phase::ES);
         }));
         if (!k) return std::nullopt;
         Draft d;
         d.question = "What is the " + mention(*k) + " at end-diastole and at end-systole?";
         d.gold.values = {length_gold(s, *k, Phase::ED), length_gold(s, *k, Phase::ES)};
         d.gold.text = describe_gold(d.gold.values[0]) + "; " + describe_gold(d.gold.values[1]);
         return d;
       }},
      {"difficult.rwt", Difficulty::Difficult,
       [](const EchoStudy& s, Rng&) {
         return ratio_case(s, Kind::LVPW, Phase::ED, Kind::LVID, Phase::ED, 2.0, "RWT",
                           "Compute the relative wall thickness (RWT = 2 x LVPW / LVID) from the " +
                               mention(Kind::LVPW) + " and the " + mention(Kind::LVID) + " at end-diastole.",
                           "2 * LVPW_ed / LVID_ed");
       }},
      {"difficult.la_ao", Difficulty::Difficult,
       [](const EchoStudy& s, Rng&) {
         return ratio_case(s, Kind::LA, Phase::ES, Kind::Aorta, Phase::ED, 1.0, "LA/Ao",
                           "Compute the LA/Ao ratio from the " + mention(Kind::LA) + " at end-systole and the " +
                               mention(Kind::Aorta) + " at end-diastole.",
                           "LA_es / Aorta_ed");
       }},
      {"difficult.threshold", Difficulty::Difficult, [](const EchoStudy& s, Rng& r) { return threshold_case(s, r); }},
  };
  return kTemplates;
}

}  // namespace

std::vector<std::string> benchmark_template_ids() {
  std::vector<std::string> ids;
  for (const auto& t : templates()) ids.push_back(t.id);
  return ids;
}

GeneratedBenchmark generate_benchmark(const std::vector<EchoStudy>& studies, const BenchmarkOptions& options) {
  GeneratedBenchmark out;
  for (const auto& id : options.templates) {
    const auto ids = benchmark_template_ids();
    if (std::find(ids.begin(), ids.end(), id) == ids.end()) throw Error(Errc::ConfigError, "unknown template " + id);
  }
  if (studies.empty()) {
    if (options.mix.total() > 0) out.warnings.push_back("no studies: benchmark is empty");
    return out;
  }

  // Seeded visiting order over studies, shared by all templates.
  std::vector<std::size_t> order(studies.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng shuffle_rng(derive_seed(options.seed, {kBenchStream, 0}));
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle_rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
  }

  const std::array<std::pair<Difficulty, int>, 3> tiers{{{Difficulty::Easy, options.mix.easy},
                                                         {Difficulty::Medium, options.mix.medium},
                                                         {Difficulty::Difficult, options.mix.difficult}}};
  std::map<std::string, std::size_t> cursor;
  int slot = 0;
  for (const auto& [difficulty, count] : tiers) {
    std::vector<const Template*> tier;
    for (const auto& t : templates()) {
      const bool allowed = options.templates.empty() ||
                           std::find(options.templates.begin(), options.templates.end(), t.id) != options.templates.end();
      if (t.difficulty == difficulty && allowed) tier.push_back(&t);
    }
    if (tier.empty() && count > 0) {
      out.warnings.push_back(std::string("no templates enabled for tier ") + std::string(difficulty_name(difficulty)) +
                             ": " + std::to_string(count) + " cases dropped");
      continue;
    }
    for (int n = 0; n < count; ++n, ++slot) {
      const Template& t = *tier[static_cast<std::size_t>(n) % tier.size()];
      Rng rng(derive_seed(options.seed, {kBenchStream, 1, static_cast<std::uint64_t>(slot)}));
      std::size_t& c = cursor[t.id];
      std::optional<Draft> draft;
      const EchoStudy* host = nullptr;
      std::size_t skipped = 0;
      for (std::size_t attempt = 0; attempt < studies.size() && !draft; ++attempt, ++c) {
        const EchoStudy& s = studies[order[c % studies.size()]];
        draft = t.make(s, rng);
        if (draft) host = &s;
        else ++skipped;
      }
      if (skipped > 0) {
        out.warnings.push_back("template " + t.id + ": skipped " + std::to_string(skipped) +
                               " ineligible studies");
      }
      if (!draft) {
        out.warnings.push_back("template " + t.id + ": no eligible study, case dropped");
        continue;
      }
      BenchmarkCase bc;
      char id[32];
      std::snprintf(id, sizeof id, "case-%04d", static_cast<int>(out.cases.size()) + 1);
      bc.case_id = id;
      bc.study_id = host->study_id;
      bc.question = std::move(draft->question);
      bc.gold = std::move(draft->gold);
      bc.tolerance = draft->tolerance;
      bc.difficulty = difficulty;
      bc.template_id = t.id;
      bc.notes = std::move(draft->notes);
      out.cases.push_back(std::move(bc));
    }
  }
  return out;
}

}  // namespace echoreason
