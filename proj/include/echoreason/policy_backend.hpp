#pragma once

#include <optional>
#include <string>
#include <vector>

#include "echoreason/domain.hpp"
#include "echoreason/llm_gateway.hpp"

namespace echoreason {

// What a benchmark question asks for, recovered from its wording.
struct QuestionPlan {
  struct Need {
    Kind kind;
    Phase phase;
    bool operator==(const Need&) const = default;
  };
  std::vector<Need> needs;
  std::string derived;   // "", "RWT" or "LA/Ao"
  bool label = false;    // a reduced/normal/increased classification is requested
  std::string quantity;  // what the classification refers to
};

QuestionPlan parse_question(std::string_view question);

// Range a model would use without looking it up. Deliberately looser than
// the guideline pack, as recalled ranges tend to be.
std::optional<std::pair<double, double>> recalled_range(std::string_view quantity);

// Scripted stand-in for a well-behaved orchestrator. It reads the question,
// the advertised tools and the observations from the rendered messages, so
// it is a pure function of its input:
//   detect_phases first; with predict_feasibility, walk the key frames and
//   measure on the first one predicted feasible; without it, measure on the
//   first key frame and give up if that fails; with search_guideline, look up
//   the reference range before classifying, otherwise use recalled ranges.
class PolicyBackend final : public Backend {
 public:
  std::string complete(const std::vector<Message>& messages) override;
  std::string describe() const override { return "policy"; }
};

}  // namespace echoreason
