#pragma once

#include <optional>
#include <vector>

#include "trustroute/evalkit.hpp"

namespace fixtures {

/// Option texts shared by every record: A inner, B outer, C both, D refusal.
trustroute::Answer pick(char letter);

trustroute::TrdRecord labelled(int i, trustroute::Strategy gold);

// Twelve records, three per scenario, with hand-chosen confusions:
//   FA: FA FA FI     FI: FI RA FE     FE: FE FE FA     RA: RA RA FE
// 7 of 12 correct, 3 refusals (one per D answer).
struct TwelveFixture {
  std::vector<trustroute::TrdRecord> records;
  std::vector<trustroute::Answer> answers;
  std::vector<std::optional<trustroute::Strategy>> decisions;

  TwelveFixture();
};

}  // namespace fixtures
